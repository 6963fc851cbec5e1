use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{BoolRaster, Raster, RealRaster};
use crate::scene_io::{write_mask_png, write_unit_png16, DatasetManifest, ManifestEntry, Split};
use crate::seed;

/// Speckled sea scenes with dark elliptical slicks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_scenes: usize,
    /// The last `n_test` scenes go to the test split, the rest to train.
    pub n_test: usize,
    pub size: usize,
    /// Inclusive range for the number of slicks per scene.
    pub slick_count_range: (usize, usize),
    /// Semi-axis range as a fraction of `size`.
    pub slick_axis_range: (f64, f64),
    pub slick_darkness: f64,
    pub speckle_looks: u32,
    pub background_level: f64,
    pub vh_ratio: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_scenes: 40,
            n_test: 10,
            size: 256,
            slick_count_range: (1, 3),
            slick_axis_range: (0.05, 0.2),
            slick_darkness: 0.3,
            speckle_looks: 4,
            background_level: 0.3,
            vh_ratio: 0.3,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.slick_darkness > 0.0 && self.slick_darkness < 1.0) {
            return bad(format!("slick_darkness must lie in (0,1), got {}", self.slick_darkness));
        }
        if self.speckle_looks < 1 {
            return bad("speckle_looks must be at least 1".into());
        }
        if self.size == 0 || self.n_test > self.n_scenes {
            return bad(format!(
                "need size >= 1 and n_test <= n_scenes, got size {} and {}/{}",
                self.size, self.n_test, self.n_scenes
            ));
        }
        let (lo, hi) = self.slick_count_range;
        let (alo, ahi) = self.slick_axis_range;
        if lo > hi || !(alo > 0.0 && alo <= ahi) {
            return bad("slick ranges must be non-empty with positive axes".into());
        }
        if !(self.background_level > 0.0 && self.vh_ratio > 0.0) {
            return bad("background_level and vh_ratio must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthScene {
    pub id: String,
    pub vv: RealRaster,
    pub vh: RealRaster,
    pub oil: BoolRaster,
}

struct Ellipse {
    cy: f64,
    cx: f64,
    a: f64,
    b: f64,
    cos: f64,
    sin: f64,
}

impl Ellipse {
    fn contains(&self, y: f64, x: f64) -> bool {
        let (dy, dx) = (y - self.cy, x - self.cx);
        let u = (dx * self.cos + dy * self.sin) / self.a;
        let v = (-dx * self.sin + dy * self.cos) / self.b;
        u * u + v * v <= 1.0
    }
}

/// Scene `index` of the dataset, drawn from its own random stream.
pub fn generate_scene(cfg: &SynthConfig, index: usize) -> Result<SynthScene> {
    cfg.validate()?;
    let mut rng = seed::rng_for(cfg.seed, index as u64);
    let n = cfg.size;
    let size = n as f64;
    let looks = f64::from(cfg.speckle_looks);
    let speckle = Gamma::new(looks, 1.0 / looks).expect("validated shape");

    let count = rng.gen_range(cfg.slick_count_range.0..=cfg.slick_count_range.1);
    let axis = |rng: &mut rand_chacha::ChaCha8Rng| {
        size * rng.gen_range(cfg.slick_axis_range.0..=cfg.slick_axis_range.1)
    };
    let ellipses: Vec<Ellipse> = (0..count)
        .map(|_| {
            let theta = rng.gen_range(0.0..PI);
            Ellipse {
                cy: rng.gen_range(0.0..size),
                cx: rng.gen_range(0.0..size),
                a: axis(&mut rng),
                b: axis(&mut rng),
                cos: theta.cos(),
                sin: theta.sin(),
            }
        })
        .collect();

    // pixel centres sit at half-integer coordinates
    let oil = Raster::from_fn(n, n, |r, c| {
        ellipses.iter().any(|e| e.contains(r as f64 + 0.5, c as f64 + 0.5))
    });
    let mut vv = Vec::with_capacity(n * n);
    let mut vh = Vec::with_capacity(n * n);
    for &is_oil in oil.data() {
        let dark = if is_oil { cfg.slick_darkness } else { 1.0 };
        let v = cfg.background_level * dark * speckle.sample(&mut rng);
        vv.push(v);
        vh.push(cfg.vh_ratio * v * speckle.sample(&mut rng));
    }
    Ok(SynthScene {
        id: format!("synth_{index:04}"),
        vv: Raster::from_vec(n, n, vv)?,
        vh: Raster::from_vec(n, n, vh)?,
        oil,
    })
}

/// Writes 16-bit VV/VH PNGs (clamped to [0,1]), 0/255 mask PNGs and a
/// `manifest.json` into `out_dir`.
pub fn generate_synthetic_dataset(cfg: &SynthConfig, out_dir: &Path) -> Result<DatasetManifest> {
    cfg.validate()?;
    for sub in ["scenes", "masks"] {
        let d = out_dir.join(sub);
        std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    let n_train = cfg.n_scenes - cfg.n_test;
    let entries: Vec<ManifestEntry> = (0..cfg.n_scenes)
        .into_par_iter()
        .map(|i| {
            let scene = generate_scene(cfg, i)?;
            let vv_path = out_dir.join("scenes").join(format!("{}_vv.png", scene.id));
            let vh_path = out_dir.join("scenes").join(format!("{}_vh.png", scene.id));
            let mask_path = out_dir.join("masks").join(format!("{}_mask.png", scene.id));
            write_unit_png16(&vv_path, &scene.vv)?;
            write_unit_png16(&vh_path, &scene.vh)?;
            write_mask_png(&mask_path, &scene.oil)?;
            Ok(ManifestEntry {
                scene_id: scene.id,
                vv_path,
                vh_path,
                mask_path: Some(mask_path),
                land_mask_path: None,
                split: if i < n_train { Split::Train } else { Split::Test },
            })
        })
        .collect::<Result<_>>()?;
    let manifest = DatasetManifest::new(entries);
    manifest.save(&out_dir.join("manifest.json"))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_where(r: &RealRaster, m: &BoolRaster, want: bool) -> f64 {
        let v: Vec<f64> = r
            .data()
            .iter()
            .zip(m.data())
            .filter(|(_, &o)| o == want)
            .map(|(&x, _)| x)
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    }

    #[test]
    fn no_slicks_gives_empty_masks() {
        let cfg = SynthConfig { slick_count_range: (0, 0), size: 32, ..Default::default() };
        for i in 0..5 {
            assert!(generate_scene(&cfg, i).unwrap().oil.data().iter().all(|&o| !o));
        }
    }

    #[test]
    fn slick_intensity_tracks_darkness() {
        let cfg = SynthConfig { slick_count_range: (2, 3), ..Default::default() };
        let s = generate_scene(&cfg, 0).unwrap();
        let ratio = mean_where(&s.vv, &s.oil, true) / mean_where(&s.vv, &s.oil, false);
        assert!((ratio - 0.3).abs() <= 0.03, "ratio {ratio}");
        let vh_ratio = mean_where(&s.vh, &s.oil, false) / mean_where(&s.vv, &s.oil, false);
        assert!((vh_ratio - 0.3).abs() <= 0.03);
    }

    #[test]
    fn same_seed_same_scene() {
        let cfg = SynthConfig { size: 48, seed: 9, ..Default::default() };
        assert_eq!(generate_scene(&cfg, 3).unwrap(), generate_scene(&cfg, 3).unwrap());
        assert_ne!(generate_scene(&cfg, 3).unwrap().vv, generate_scene(&cfg, 4).unwrap().vv);
    }

    #[test]
    fn invalid_configs_rejected() {
        for cfg in [
            SynthConfig { slick_darkness: 1.0, ..Default::default() },
            SynthConfig { speckle_looks: 0, ..Default::default() },
            SynthConfig { n_test: 41, ..Default::default() },
        ] {
            assert!(cfg.validate().is_err());
        }
    }

    #[test]
    fn dataset_files_are_deterministic() {
        let cfg = SynthConfig { n_scenes: 3, n_test: 1, size: 24, seed: 2, ..Default::default() };
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ma = generate_synthetic_dataset(&cfg, a.path()).unwrap();
        generate_synthetic_dataset(&cfg, b.path()).unwrap();
        assert_eq!(ma.split(Split::Test).len(), 1);
        let reloaded = DatasetManifest::load(&a.path().join("manifest.json")).unwrap();
        assert_eq!(reloaded, ma);
        for e in &ma.entries {
            for p in [&e.vv_path, &e.vh_path, e.mask_path.as_ref().unwrap()] {
                let rel = p.strip_prefix(a.path()).unwrap();
                assert_eq!(std::fs::read(p).unwrap(), std::fs::read(b.path().join(rel)).unwrap());
            }
        }
    }
}
