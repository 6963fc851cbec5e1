//! Per-pixel feature planes, min-max scaling, and balanced training-pixel
//! sampling with hard-negative mining.
//!
//! Every pixel is described by five values computed from the preprocessed
//! bands, always in this order:
//!
//! 1. VV intensity
//! 2. VH / VV ratio
//! 3. Shannon entropy of the 3x3 VV neighbourhood (32 grey levels)
//! 4. population standard deviation of the 3x3 VV neighbourhood
//! 5. Sobel gradient magnitude of VV

use std::io::Write;
use std::path::Path;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::nearest_rank;
use crate::raster::{BoolRaster, Raster, RealRaster};
use crate::scene_io::{GroundTruthMask, SarScene};
use crate::seed;

pub const N_FEATURES: usize = 5;

pub type FeatureVector = [f64; N_FEATURES];

/// Lower bound applied to VV before dividing.
pub const RATIO_EPSILON: f64 = 1e-6;
pub const RATIO_CAP: f64 = 1e6;
pub const ENTROPY_LEVELS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Oil,
    Water,
}

impl Label {
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Label::Oil => 1.0,
            Label::Water => -1.0,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Label::Oil => 1,
            Label::Water => -1,
        }
    }

    pub fn from_i8(v: i8) -> Option<Label> {
        match v {
            1 => Some(Label::Oil),
            -1 => Some(Label::Water),
            _ => None,
        }
    }

    /// Sign rule shared by every backend: zero goes to water.
    #[inline]
    pub fn from_decision(f: f64) -> Label {
        if f > 0.0 {
            Label::Oil
        } else {
            Label::Water
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub struct PixelOrigin {
    pub scene_id: String,
    pub row: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub x: FeatureVector,
    pub y: Label,
    pub origin: PixelOrigin,
}

impl LabeledSample {
    /// Sample without a source pixel, for synthetic problems.
    pub fn new(x: FeatureVector, y: Label) -> Self {
        LabeledSample {
            x,
            y,
            origin: PixelOrigin::default(),
        }
    }
}

pub fn vh_vv_ratio(vh: f64, vv: f64) -> f64 {
    (vh / vv.max(RATIO_EPSILON)).min(RATIO_CAP)
}

#[inline]
fn quantize(v: f64) -> usize {
    ((v.clamp(0.0, 1.0) * ENTROPY_LEVELS as f64) as usize).min(ENTROPY_LEVELS - 1)
}

/// Shannon entropy (bits) of the `window`x`window` neighbourhood histogram.
pub fn local_entropy(raster: &RealRaster, window: usize) -> RealRaster {
    let levels = raster.map(|&v| quantize(v) as u8);
    let n = (window * window) as f64;
    let mut buf = Vec::with_capacity(window * window);
    let mut hist = [0u32; ENTROPY_LEVELS];
    Raster::from_fn(raster.height(), raster.width(), |r, c| {
        levels.window_into(r, c, window, &mut buf);
        hist.iter_mut().for_each(|h| *h = 0);
        for &b in &buf {
            hist[b as usize] += 1;
        }
        let mut h = 0.0;
        for &count in hist.iter().filter(|&&k| k > 0) {
            let p = f64::from(count) / n;
            h -= p * p.log2();
        }
        // -0.0 for a constant window
        h.max(0.0)
    })
}

pub fn local_std(raster: &RealRaster, window: usize) -> RealRaster {
    let mut buf = Vec::with_capacity(window * window);
    Raster::from_fn(raster.height(), raster.width(), |r, c| {
        raster.window_into(r, c, window, &mut buf);
        let n = buf.len() as f64;
        let mean = buf.iter().sum::<f64>() / n;
        let var = buf.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        var.sqrt()
    })
}

pub fn sobel_gradient_magnitude(raster: &RealRaster) -> RealRaster {
    Raster::from_fn(raster.height(), raster.width(), |r, c| {
        let (r, c) = (r as isize, c as isize);
        let p = |dr: isize, dc: isize| raster.reflected(r + dr, c + dc);
        let gx = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
        let gy = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
        gx.hypot(gy)
    })
}

/// Feature planes for one preprocessed scene.
#[derive(Debug, Clone)]
pub struct FeatureImage {
    pub features: Raster<FeatureVector>,
    /// False where the pixel is land and must be skipped.
    pub valid: BoolRaster,
}

impl FeatureImage {
    pub fn height(&self) -> usize {
        self.features.height()
    }

    pub fn width(&self) -> usize {
        self.features.width()
    }

    pub fn valid_count(&self) -> usize {
        self.valid.data().iter().filter(|&&v| v).count()
    }
}

pub fn extract_feature_image(scene: &SarScene) -> Result<FeatureImage> {
    for (name, band) in [("vv", scene.vv()), ("vh", scene.vh())] {
        if let Some(v) = band.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidValues {
                context: format!("scene {} band {name}", scene.id),
                detail: format!("value {v} outside [0,1]; preprocess the scene first"),
            });
        }
    }
    let vv = scene.vv();
    let vh = scene.vh();
    let entropy = local_entropy(vv, 3);
    let std = local_std(vv, 3);
    let grad = sobel_gradient_magnitude(vv);
    let features = Raster::from_fn(vv.height(), vv.width(), |r, c| {
        let v = *vv.get(r, c);
        [
            v,
            vh_vv_ratio(*vh.get(r, c), v),
            *entropy.get(r, c),
            *std.get(r, c),
            *grad.get(r, c),
        ]
    });
    let valid = Raster::from_fn(vv.height(), vv.width(), |r, c| !scene.is_land(r, c));
    Ok(FeatureImage { features, valid })
}

/// Per-feature min-max transform fitted on training samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub shift: FeatureVector,
    pub scale: FeatureVector,
}

impl Default for FeatureScaler {
    fn default() -> Self {
        FeatureScaler {
            shift: [0.0; N_FEATURES],
            scale: [1.0; N_FEATURES],
        }
    }
}

impl FeatureScaler {
    pub fn fit(xs: &[FeatureVector]) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::NotEnoughSamples(
                "cannot fit a feature scaler on an empty sample set".into(),
            ));
        }
        let mut lo = [f64::INFINITY; N_FEATURES];
        let mut hi = [f64::NEG_INFINITY; N_FEATURES];
        for x in xs {
            for k in 0..N_FEATURES {
                lo[k] = lo[k].min(x[k]);
                hi[k] = hi[k].max(x[k]);
            }
        }
        let mut scale = [1.0; N_FEATURES];
        for k in 0..N_FEATURES {
            let range = hi[k] - lo[k];
            if range > 0.0 && range.is_finite() {
                scale[k] = range;
            }
        }
        Ok(FeatureScaler { shift: lo, scale })
    }

    pub fn fit_samples(samples: &[LabeledSample]) -> Result<Self> {
        let xs: Vec<FeatureVector> = samples.iter().map(|s| s.x).collect();
        Self::fit(&xs)
    }

    /// Scaled value clamped to [0,1], as used at inference.
    #[inline]
    pub fn apply(&self, x: &FeatureVector) -> FeatureVector {
        let mut out = self.transform(x);
        for v in &mut out {
            *v = v.clamp(0.0, 1.0);
        }
        out
    }

    #[inline]
    pub fn transform(&self, x: &FeatureVector) -> FeatureVector {
        std::array::from_fn(|k| (x[k] - self.shift[k]) / self.scale[k])
    }

    pub fn inverse(&self, x: &FeatureVector) -> FeatureVector {
        std::array::from_fn(|k| x[k] * self.scale[k] + self.shift[k])
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self
            .scale
            .iter()
            .zip(&self.shift)
            .all(|(s, t)| s.is_finite() && *s > 0.0 && t.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid feature scaler {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    pub max_oil: usize,
    pub max_water: usize,
    /// Share of the water budget drawn from the darkest water pixels.
    pub hard_negative_fraction: f64,
    /// VV percentile (0-100) bounding the hard-negative pool.
    pub hard_negative_percentile: f64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            max_oil: 25,
            max_water: 25,
            hard_negative_fraction: 0.5,
            hard_negative_percentile: 10.0,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.hard_negative_fraction) {
            return Err(Error::Config(format!(
                "hard_negative_fraction must lie in [0,1], got {}",
                self.hard_negative_fraction
            )));
        }
        if !(0.0..=100.0).contains(&self.hard_negative_percentile) {
            return Err(Error::Config(format!(
                "hard_negative_percentile must lie in [0,100], got {}",
                self.hard_negative_percentile
            )));
        }
        Ok(())
    }
}

/// Draws up to `max_oil` oil and `max_water` water pixels from one scene.
///
/// The water budget is split: `hard_negative_fraction` of it (rounded down)
/// comes from water pixels whose VV is at or below the scene's water VV
/// percentile, the remainder uniformly from the other water pixels. If the
/// remaining pool runs short the hard pool tops it up. The random stream is
/// derived from `(seed, scene_id)` so scenes can be sampled in any order.
pub fn sample_training_pixels(
    scene_id: &str,
    image: &FeatureImage,
    mask: &GroundTruthMask,
    cfg: &SamplingConfig,
    seed: u64,
) -> Result<Vec<LabeledSample>> {
    cfg.validate()?;
    image.valid.check_same_dims(mask.pixels(), "feature image vs mask")?;
    let mut rng = seed::rng_for(seed, seed::stable_hash(scene_id));

    let mut oil = Vec::new();
    let mut water = Vec::new();
    for (i, (&valid, &is_oil)) in image
        .valid
        .data()
        .iter()
        .zip(mask.pixels().data())
        .enumerate()
    {
        if !valid {
            continue;
        }
        if is_oil {
            oil.push(i);
        } else {
            water.push(i);
        }
    }

    let mut chosen: Vec<(usize, Label)> = Vec::new();
    let n_oil = cfg.max_oil.min(oil.len());
    for k in index::sample(&mut rng, oil.len(), n_oil) {
        chosen.push((oil[k], Label::Oil));
    }

    let n_water = cfg.max_water.min(water.len());
    if n_water > 0 {
        let feats = image.features.data();
        let mut vv: Vec<f64> = water.iter().map(|&i| feats[i][0]).collect();
        vv.sort_by(f64::total_cmp);
        let threshold = nearest_rank(&vv, cfg.hard_negative_percentile);
        let (hard, rest): (Vec<usize>, Vec<usize>) =
            water.iter().partition(|&&i| feats[i][0] <= threshold);

        let want_hard = (n_water as f64 * cfg.hard_negative_fraction).floor() as usize;
        let n_hard = want_hard.min(hard.len());
        let n_rest = (n_water - n_hard).min(rest.len());
        let hard_picks = index::sample(&mut rng, hard.len(), hard.len());
        let mut hard_iter = hard_picks.iter();
        for k in hard_iter.by_ref().take(n_hard) {
            chosen.push((hard[k], Label::Water));
        }
        for k in index::sample(&mut rng, rest.len(), n_rest) {
            chosen.push((rest[k], Label::Water));
        }
        let shortfall = n_water - n_hard - n_rest;
        for k in hard_iter.take(shortfall) {
            chosen.push((hard[k], Label::Water));
        }
    }

    let width = image.width();
    Ok(chosen
        .into_iter()
        .map(|(i, y)| LabeledSample {
            x: image.features.data()[i],
            y,
            origin: PixelOrigin {
                scene_id: scene_id.to_string(),
                row: i / width,
                col: i % width,
            },
        })
        .collect())
}

/// Writes `scene_id,row,col,f1..f5,y` rows for auditing a training pool.
pub fn write_samples_csv(path: &Path, samples: &[LabeledSample]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let mut emit = || -> std::io::Result<()> {
        writeln!(w, "scene_id,row,col,f1,f2,f3,f4,f5,y")?;
        for s in samples {
            write!(w, "{},{},{}", s.origin.scene_id, s.origin.row, s.origin.col)?;
            for v in s.x {
                write!(w, ",{v}")?;
            }
            writeln!(w, ",{}", s.y.as_i8())?;
        }
        w.flush()
    };
    emit().map_err(|e| Error::io(path, e))
}
