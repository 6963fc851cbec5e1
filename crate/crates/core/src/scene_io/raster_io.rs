use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageFormat, ImageReader, Luma};

use crate::error::{Error, Result};
use crate::raster::{BoolRaster, Raster, RealRaster};

/// Single-band raster normalised to [0,1] by the maximum of its bit depth.
#[derive(Debug, Clone)]
pub struct RawRaster {
    pub values: RealRaster,
    pub bit_depth: u8,
}

pub fn read_raster(path: &Path) -> Result<RawRaster> {
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    match reader.format() {
        Some(ImageFormat::Png) | Some(ImageFormat::Tiff) => {}
        other => {
            return Err(Error::UnsupportedFormat {
                path: path.to_path_buf(),
                detail: format!("container {other:?}; expected PNG or TIFF"),
            })
        }
    }
    let img = reader.decode().map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (data, bit_depth): (Vec<f64>, u8) = match img {
        DynamicImage::ImageLuma8(buf) => (
            buf.into_raw().into_iter().map(|v| f64::from(v) / 255.0).collect(),
            8,
        ),
        DynamicImage::ImageLuma16(buf) => (
            buf.into_raw()
                .into_iter()
                .map(|v| f64::from(v) / 65535.0)
                .collect(),
            16,
        ),
        other => {
            return Err(Error::UnsupportedFormat {
                path: path.to_path_buf(),
                detail: format!(
                    "pixel layout {:?}; expected single-band 8- or 16-bit",
                    other.color()
                ),
            })
        }
    };
    Ok(RawRaster {
        values: Raster::from_vec(h, w, data)?,
        bit_depth,
    })
}

/// Source spans covered by each output index along one axis, as
/// `(source index, fraction of the output cell)` pairs.
fn area_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    if src == dst {
        return (0..dst).map(|i| vec![(i, 1.0)]).collect();
    }
    let ratio = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let start = i as f64 * ratio;
            let end = (i + 1) as f64 * ratio;
            let first = start.floor() as usize;
            let last = (end.ceil() as usize).min(src);
            (first..last)
                .filter_map(|s| {
                    let overlap = (end.min((s + 1) as f64) - start.max(s as f64)) / ratio;
                    (overlap > 0.0).then_some((s, overlap))
                })
                .collect()
        })
        .collect()
}

/// Area-weighted average; identical sizes pass values through unchanged.
pub fn resample_area(src: &RealRaster, size: (usize, usize)) -> RealRaster {
    let (h, w) = size;
    if src.dims() == size {
        return src.clone();
    }
    let rows = area_weights(src.height(), h);
    let cols = area_weights(src.width(), w);
    Raster::from_fn(h, w, |r, c| {
        let mut acc = 0.0;
        for &(sr, wr) in &rows[r] {
            let row = src.row(sr);
            for &(sc, wc) in &cols[c] {
                acc += wr * wc * row[sc];
            }
        }
        acc
    })
}

/// Fraction of each output cell's source area that is true.
pub fn resample_mask_fraction(src: &BoolRaster, size: (usize, usize)) -> RealRaster {
    resample_area(&src.map(|&b| if b { 1.0 } else { 0.0 }), size)
}

pub fn resample_nearest<T: Copy>(src: &Raster<T>, size: (usize, usize)) -> Raster<T> {
    let (h, w) = size;
    let pick = |i: usize, n_src: usize, n_dst: usize| {
        (((i as f64 + 0.5) * n_src as f64 / n_dst as f64) as usize).min(n_src - 1)
    };
    Raster::from_fn(h, w, |r, c| {
        *src.get(pick(r, src.height(), h), pick(c, src.width(), w))
    })
}

/// 8-bit PNG, 0 = water and 255 = oil.
pub fn write_mask_png(path: &Path, mask: &BoolRaster) -> Result<()> {
    let data: Vec<u8> = mask.data().iter().map(|&b| if b { 255 } else { 0 }).collect();
    let img: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_raw(mask.width() as u32, mask.height() as u32, data)
            .expect("buffer length matches dimensions");
    img.save_with_format(path, ImageFormat::Png)
        .map_err(|e| Error::Decode {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
}

/// 16-bit PNG of values clamped to [0,1].
pub fn write_unit_png16(path: &Path, raster: &RealRaster) -> Result<()> {
    let data: Vec<u16> = raster
        .data()
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 65535.0).round() as u16)
        .collect();
    let img: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(raster.width() as u32, raster.height() as u32, data)
            .expect("buffer length matches dimensions");
    img.save_with_format(path, ImageFormat::Png)
        .map_err(|e| Error::Decode {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
}
