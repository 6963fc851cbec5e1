//! Loading and validation of SAR scenes and ground-truth masks, plus the
//! dataset manifest and the binary model container.

mod manifest;
mod model_file;
mod raster_io;

pub use manifest::{DatasetManifest, ManifestEntry, Split};
pub use model_file::{
    decode_model, encode_model, load_model, save_model, Aggregation, Backend, ModelFile, ModelHeader,
    StoredEnsembleConfig, MODEL_FORMAT_VERSION, MODEL_MAGIC,
};
pub use raster_io::{
    read_raster, resample_area, resample_mask_fraction, resample_nearest, write_mask_png,
    write_unit_png16, RawRaster,
};

use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::{BoolRaster, RealRaster};

pub const DEFAULT_WORKING_SIZE: (usize, usize) = (256, 256);

/// Co-registered VV/VH intensities for one acquisition.
#[derive(Debug, Clone, PartialEq)]
pub struct SarScene {
    pub id: String,
    vv: RealRaster,
    vh: RealRaster,
    land_mask: Option<BoolRaster>,
}

impl SarScene {
    pub fn new(
        id: impl Into<String>,
        vv: RealRaster,
        vh: RealRaster,
        land_mask: Option<BoolRaster>,
    ) -> Result<Self> {
        let id = id.into();
        vv.check_same_dims(&vh, &format!("scene {id}: vv vs vh"))?;
        if let Some(land) = &land_mask {
            vv.check_same_dims(land, &format!("scene {id}: vv vs land mask"))?;
        }
        for (name, band) in [("vv", &vv), ("vh", &vh)] {
            if let Some(v) = band.data().iter().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(Error::InvalidValues {
                    context: format!("scene {id} band {name}"),
                    detail: format!("intensity {v} is not a finite non-negative number"),
                });
            }
        }
        Ok(SarScene {
            id,
            vv,
            vh,
            land_mask,
        })
    }

    pub fn vv(&self) -> &RealRaster {
        &self.vv
    }

    pub fn vh(&self) -> &RealRaster {
        &self.vh
    }

    pub fn land_mask(&self) -> Option<&BoolRaster> {
        self.land_mask.as_ref()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.vv.dims()
    }

    #[inline]
    pub fn is_land(&self, row: usize, col: usize) -> bool {
        self.land_mask.as_ref().is_some_and(|m| *m.get(row, col))
    }
}

/// Per-pixel oil labels (true = oil).
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthMask {
    pixels: BoolRaster,
}

impl GroundTruthMask {
    pub fn new(pixels: BoolRaster) -> Self {
        GroundTruthMask { pixels }
    }

    pub fn pixels(&self) -> &BoolRaster {
        &self.pixels
    }

    pub fn dims(&self) -> (usize, usize) {
        self.pixels.dims()
    }

    pub fn oil_count(&self) -> usize {
        self.pixels.data().iter().filter(|&&p| p).count()
    }

    /// Clears oil on land so the two masks never disagree.
    pub fn without_land(mut self, land: Option<&BoolRaster>) -> Result<Self> {
        if let Some(land) = land {
            self.pixels.check_same_dims(land, "mask vs land mask")?;
            for (p, &l) in self.pixels.data_mut().iter_mut().zip(land.data()) {
                if l {
                    *p = false;
                }
            }
        }
        Ok(self)
    }
}

fn require_file(path: &Path) -> Result<()> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    Ok(())
}

/// Loads a VV/VH pair (and optional land mask) and brings it to
/// `working_size`: intensities by area averaging, land by nearest neighbour.
/// Inputs are treated as linear intensities.
pub fn load_scene(entry: &ManifestEntry, working_size: (usize, usize)) -> Result<SarScene> {
    require_file(&entry.vv_path)?;
    require_file(&entry.vh_path)?;
    let vv = read_raster(&entry.vv_path)?;
    let vh = read_raster(&entry.vh_path)?;
    if vv.values.dims() != vh.values.dims() {
        return Err(Error::DimensionMismatch {
            context: format!("scene {}: vv vs vh source rasters", entry.scene_id),
            expected_h: vv.values.height(),
            expected_w: vv.values.width(),
            found_h: vh.values.height(),
            found_w: vh.values.width(),
        });
    }
    let land = match &entry.land_mask_path {
        Some(p) => {
            require_file(p)?;
            let raw = read_raster(p)?;
            let land = raw.values.map(|&v| v > 0.0);
            Some(resample_nearest(&land, working_size))
        }
        None => None,
    };
    SarScene::new(
        entry.scene_id.clone(),
        resample_area(&vv.values, working_size),
        resample_area(&vh.values, working_size),
        land,
    )
}

/// A downscaled cell is oil iff at least half of the source area it covers
/// is oil.
pub fn load_mask(path: &Path, working_size: (usize, usize)) -> Result<GroundTruthMask> {
    require_file(path)?;
    let raw = read_raster(path)?;
    let oil = raw.values.map(|&v| v > 0.0);
    let frac = resample_mask_fraction(&oil, working_size);
    Ok(GroundTruthMask::new(frac.map(|&f| f >= 0.5 - 1e-12)))
}

/// Scene plus land-cleaned mask for a manifest entry; the mask is `None`
/// when the entry has no ground truth.
pub fn load_labeled(
    entry: &ManifestEntry,
    working_size: (usize, usize),
) -> Result<(SarScene, Option<GroundTruthMask>)> {
    let scene = load_scene(entry, working_size)?;
    let mask = match &entry.mask_path {
        Some(p) => {
            let m = load_mask(p, working_size)?.without_land(scene.land_mask())?;
            scene.vv().check_same_dims(m.pixels(), &format!("scene {} vs mask", scene.id))?;
            Some(m)
        }
        None => None,
    };
    Ok((scene, mask))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::Raster;

    fn write_u8(path: &Path, h: usize, w: usize, data: Vec<u8>) {
        image::GrayImage::from_raw(w as u32, h as u32, data)
            .unwrap()
            .save(path)
            .unwrap();
    }

    fn entry(dir: &Path, vv: &str, vh: &str) -> ManifestEntry {
        ManifestEntry {
            scene_id: "s".into(),
            vv_path: dir.join(vv),
            vh_path: dir.join(vh),
            mask_path: None,
            land_mask_path: None,
            split: Split::Train,
        }
    }

    #[test]
    fn downscale_512_to_256() {
        let dir = tempfile::tempdir().unwrap();
        let data: Vec<u8> = (0..512 * 512).map(|i| (i % 251) as u8).collect();
        write_u8(&dir.path().join("vv.png"), 512, 512, data.clone());
        write_u8(&dir.path().join("vh.png"), 512, 512, data);
        let s = load_scene(&entry(dir.path(), "vv.png", "vh.png"), (256, 256)).unwrap();
        assert_eq!(s.dims(), (256, 256));
    }

    #[test]
    fn same_size_is_pass_through() {
        let dir = tempfile::tempdir().unwrap();
        let data: Vec<u8> = (0..64 * 64).map(|i| (i * 7 % 256) as u8).collect();
        write_u8(&dir.path().join("vv.png"), 64, 64, data.clone());
        write_u8(&dir.path().join("vh.png"), 64, 64, data.clone());
        let s = load_scene(&entry(dir.path(), "vv.png", "vh.png"), (64, 64)).unwrap();
        let expect: Vec<f64> = data.iter().map(|&b| f64::from(b) / 255.0).collect();
        assert_eq!(s.vv().data(), expect.as_slice());
    }

    #[test]
    fn constant_block_average() {
        let dir = tempfile::tempdir().unwrap();
        write_u8(&dir.path().join("vv.png"), 4, 4, vec![7; 16]);
        write_u8(&dir.path().join("vh.png"), 4, 4, vec![7; 16]);
        let s = load_scene(&entry(dir.path(), "vv.png", "vh.png"), (2, 2)).unwrap();
        assert!(s.vv().data().iter().all(|&v| v == 7.0 / 255.0));
    }

    #[test]
    fn scene_errors() {
        let dir = tempfile::tempdir().unwrap();
        write_u8(&dir.path().join("vv.png"), 4, 4, vec![1; 16]);
        write_u8(&dir.path().join("vh.png"), 4, 6, vec![1; 24]);
        assert!(matches!(
            load_scene(&entry(dir.path(), "vv.png", "missing.png"), (4, 4)),
            Err(Error::MissingFile(_))
        ));
        assert!(matches!(
            load_scene(&entry(dir.path(), "vv.png", "vh.png"), (4, 4)),
            Err(Error::DimensionMismatch { .. })
        ));
        let rgb = image::RgbImage::from_raw(2, 2, vec![0; 12]).unwrap();
        rgb.save(dir.path().join("rgb.png")).unwrap();
        assert!(matches!(
            load_scene(&entry(dir.path(), "rgb.png", "rgb.png"), (2, 2)),
            Err(Error::UnsupportedFormat { .. })
        ));
    }

    #[test]
    fn nan_and_negative_intensities_rejected() {
        let bad = Raster::from_vec(1, 2, vec![0.1, f64::NAN]).unwrap();
        let ok = Raster::filled(1, 2, 0.1);
        assert!(SarScene::new("x", bad, ok.clone(), None).is_err());
        let neg = Raster::from_vec(1, 2, vec![0.1, -0.2]).unwrap();
        assert!(SarScene::new("x", ok, neg, None).is_err());
    }

    #[test]
    fn mask_cases() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.png");
        write_u8(&p, 4, 4, vec![255; 16]);
        assert!(load_mask(&p, (4, 4)).unwrap().pixels().data().iter().all(|&v| v));
        write_u8(&p, 4, 4, vec![0; 16]);
        assert!(load_mask(&p, (2, 2)).unwrap().pixels().data().iter().all(|&v| !v));
        write_u8(&p, 2, 2, vec![255, 255, 0, 0]);
        assert!(*load_mask(&p, (1, 1)).unwrap().pixels().get(0, 0));
        write_u8(&p, 2, 2, vec![255, 0, 0, 0]);
        assert!(!*load_mask(&p, (1, 1)).unwrap().pixels().get(0, 0));
        assert!(matches!(
            load_mask(&dir.path().join("nope.png"), (1, 1)),
            Err(Error::MissingFile(_))
        ));
    }

    #[test]
    fn land_pixels_never_oil() {
        let m = GroundTruthMask::new(Raster::filled(2, 2, true));
        let land = Raster::from_vec(2, 2, vec![true, false, false, true]).unwrap();
        let m = m.without_land(Some(&land)).unwrap();
        assert_eq!(m.pixels().data(), &[false, true, true, false]);
    }

    #[test]
    fn loading_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let data: Vec<u8> = (0..30 * 20).map(|i| (i * 13 % 256) as u8).collect();
        write_u8(&dir.path().join("vv.png"), 30, 20, data.clone());
        write_u8(&dir.path().join("vh.png"), 30, 20, data);
        let e = entry(dir.path(), "vv.png", "vh.png");
        assert_eq!(load_scene(&e, (7, 9)).unwrap(), load_scene(&e, (7, 9)).unwrap());
    }
}
