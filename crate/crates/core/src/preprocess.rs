//! Scene conditioning applied identically at training and inference time:
//! median blur, percentile clipping with rescale to [0,1], then gamma.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{BoolRaster, Raster, RealRaster};
use crate::scene_io::SarScene;

/// Candidates tried by the gamma sweep, in tie-break order.
pub const GAMMA_SWEEP_CANDIDATES: [f64; 5] = [0.5, 0.75, 1.0, 1.5, 2.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub median_window: usize,
    pub clip_low_pct: f64,
    pub clip_high_pct: f64,
    pub gamma: f64,
    pub apply_land_mask: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            median_window: 3,
            clip_low_pct: 1.0,
            clip_high_pct: 99.0,
            gamma: 1.0,
            apply_land_mask: true,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.median_window == 0 || self.median_window % 2 == 0 {
            return Err(Error::Config(format!(
                "median window must be odd and >= 1, got {}",
                self.median_window
            )));
        }
        check_percentiles(self.clip_low_pct, self.clip_high_pct)?;
        check_gamma(self.gamma)
    }
}

fn check_percentiles(low: f64, high: f64) -> Result<()> {
    if !(0.0..=100.0).contains(&low) || !(0.0..=100.0).contains(&high) || low >= high {
        return Err(Error::Config(format!(
            "clip percentiles must satisfy 0 <= low < high <= 100, got {low}/{high}"
        )));
    }
    Ok(())
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Config(format!("gamma must be positive, got {gamma}")));
    }
    Ok(())
}

/// Nearest-rank percentile of an ascending slice: the value at rank
/// `ceil(p/100 * n)`, with rank clamped to `1..=n`.
pub fn nearest_rank(sorted: &[f64], pct: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty set");
    let n = sorted.len();
    let rank = ((pct / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

pub fn median_filter(raster: &RealRaster, window: usize) -> Result<RealRaster> {
    if window % 2 == 0 {
        return Err(Error::Config(format!(
            "median window must be odd, got {window}"
        )));
    }
    if window > raster.height().min(raster.width()) {
        return Err(Error::Config(format!(
            "median window {window} exceeds raster size {}x{}",
            raster.height(),
            raster.width()
        )));
    }
    if window == 1 {
        return Ok(raster.clone());
    }
    let mid = window * window / 2;
    let mut buf = Vec::with_capacity(window * window);
    Ok(Raster::from_fn(raster.height(), raster.width(), |r, c| {
        raster.window_into(r, c, window, &mut buf);
        *buf.select_nth_unstable_by(mid, f64::total_cmp).1
    }))
}

pub fn clip_percentiles(raster: &RealRaster, low_pct: f64, high_pct: f64) -> Result<RealRaster> {
    clip_percentiles_masked(raster, low_pct, high_pct, None)
}

/// Percentile clip and linear rescale to [0,1]. Pixels flagged in
/// `exclude` are transformed but never contribute to the percentiles.
/// A zero range (or no contributing pixel) maps everything to 0.
pub fn clip_percentiles_masked(
    raster: &RealRaster,
    low_pct: f64,
    high_pct: f64,
    exclude: Option<&BoolRaster>,
) -> Result<RealRaster> {
    check_percentiles(low_pct, high_pct)?;
    if let Some(m) = exclude {
        raster.check_same_dims(m, "percentile exclusion mask")?;
    }
    let mut values: Vec<f64> = match exclude {
        Some(m) => raster
            .data()
            .iter()
            .zip(m.data())
            .filter(|(_, &ex)| !ex)
            .map(|(&v, _)| v)
            .collect(),
        None => raster.data().to_vec(),
    };
    if values.is_empty() {
        return Ok(raster.map(|_| 0.0));
    }
    values.sort_by(f64::total_cmp);
    let lo = nearest_rank(&values, low_pct);
    let hi = nearest_rank(&values, high_pct);
    let range = hi - lo;
    Ok(raster.map(|&v| {
        if range > 0.0 {
            (v.clamp(lo, hi) - lo) / range
        } else {
            0.0
        }
    }))
}

pub fn gamma_correct(raster: &RealRaster, gamma: f64) -> Result<RealRaster> {
    check_gamma(gamma)?;
    if let Some(v) = raster.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidValues {
            context: "gamma correction".into(),
            detail: format!("value {v} outside [0,1]"),
        });
    }
    if gamma == 1.0 {
        return Ok(raster.clone());
    }
    Ok(raster.map(|&v| v.powf(gamma)))
}

fn land_exclusion(scene: &SarScene, cfg: &PreprocessConfig) -> Option<BoolRaster> {
    if cfg.apply_land_mask {
        scene.land_mask().cloned()
    } else {
        None
    }
}

/// Median then clip for one band; gamma is applied separately so the sweep
/// can reuse this stage.
fn denoise_and_clip(
    band: &RealRaster,
    cfg: &PreprocessConfig,
    exclude: Option<&BoolRaster>,
) -> Result<RealRaster> {
    let blurred = median_filter(band, cfg.median_window)?;
    clip_percentiles_masked(&blurred, cfg.clip_low_pct, cfg.clip_high_pct, exclude)
}

/// Both bands go through median -> clip -> gamma. With `apply_land_mask`
/// the land mask is kept on the output so sampling and inference skip
/// those pixels; otherwise it is dropped and every pixel is treated as sea.
pub fn preprocess_scene(scene: &SarScene, cfg: &PreprocessConfig) -> Result<SarScene> {
    cfg.validate()?;
    let land = land_exclusion(scene, cfg);
    let vv = gamma_correct(&denoise_and_clip(scene.vv(), cfg, land.as_ref())?, cfg.gamma)?;
    let vh = gamma_correct(&denoise_and_clip(scene.vh(), cfg, land.as_ref())?, cfg.gamma)?;
    SarScene::new(scene.id.clone(), vv, vh, land)
}

/// p90 - p10 of the non-land VV pixels.
fn contrast(vv: &RealRaster, exclude: Option<&BoolRaster>) -> Option<f64> {
    let mut values: Vec<f64> = match exclude {
        Some(m) => vv
            .data()
            .iter()
            .zip(m.data())
            .filter(|(_, &ex)| !ex)
            .map(|(&v, _)| v)
            .collect(),
        None => vv.data().to_vec(),
    };
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    Some(nearest_rank(&values, 90.0) - nearest_rank(&values, 10.0))
}

/// Picks the candidate gamma that maximises the mean VV inter-percentile
/// contrast (p90 - p10 over non-land pixels) across `scenes`. The first
/// candidate wins ties. Returns `cfg.gamma` when no scene has sea pixels.
pub fn gamma_sweep(scenes: &[SarScene], cfg: &PreprocessConfig) -> Result<f64> {
    cfg.validate()?;
    let mut clipped = Vec::with_capacity(scenes.len());
    for scene in scenes {
        let land = land_exclusion(scene, cfg);
        let vv = denoise_and_clip(scene.vv(), cfg, land.as_ref())?;
        clipped.push((vv, land));
    }
    let mut best: Option<(f64, f64)> = None;
    for gamma in GAMMA_SWEEP_CANDIDATES {
        let mut total = 0.0;
        let mut count = 0usize;
        for (vv, land) in &clipped {
            let corrected = gamma_correct(vv, gamma)?;
            if let Some(c) = contrast(&corrected, land.as_ref()) {
                total += c;
                count += 1;
            }
        }
        if count == 0 {
            return Ok(cfg.gamma);
        }
        let score = total / count as f64;
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((gamma, score));
        }
    }
    Ok(best.map_or(cfg.gamma, |(g, _)| g))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene(vv: RealRaster, vh: RealRaster, land: Option<BoolRaster>) -> SarScene {
        SarScene::new("t", vv, vh, land).unwrap()
    }

    #[test]
    fn median_constant_and_identity() {
        let r = Raster::filled(5, 5, 0.3);
        assert_eq!(median_filter(&r, 3).unwrap(), r);
        let noisy = Raster::from_fn(4, 4, |r, c| (r * 4 + c) as f64);
        assert_eq!(median_filter(&noisy, 1).unwrap(), noisy);
        assert!(median_filter(&noisy, 2).is_err());
        assert!(median_filter(&noisy, 5).is_err());
    }

    #[test]
    fn median_removes_impulse() {
        let mut r = Raster::filled(5, 5, 0.0);
        r.set(2, 2, 1.0);
        let out = median_filter(&r, 3).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn median_of_ramp_patch() {
        let vals: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
        let r = Raster::from_vec(3, 3, vals.clone()).unwrap();
        let mut sorted = vals;
        sorted.sort_by(f64::total_cmp);
        let oracle = sorted[4];
        let got = *median_filter(&r, 3).unwrap().get(1, 1);
        assert_eq!(got, oracle);
        assert_eq!(got, 0.5);
    }

    #[test]
    fn nearest_rank_on_one_to_hundred() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(nearest_rank(&v, 1.0), 1.0);
        assert_eq!(nearest_rank(&v, 99.0), 99.0);
        assert_eq!(nearest_rank(&v, 0.0), 1.0);
        assert_eq!(nearest_rank(&v, 100.0), 100.0);
        assert_eq!(nearest_rank(&v, 50.5), 51.0);
    }

    #[test]
    fn clip_constant_maps_to_zero() {
        let r = Raster::filled(3, 3, 4.2);
        let out = clip_percentiles(&r, 1.0, 99.0).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn clip_one_to_hundred() {
        let r = Raster::from_fn(10, 10, |r, c| (r * 10 + c + 1) as f64);
        let out = clip_percentiles(&r, 1.0, 99.0).unwrap();
        // oracle: nearest-rank bounds are 1 and 99
        let expect = |v: f64| (v.clamp(1.0, 99.0) - 1.0) / 98.0;
        for (i, &o) in out.data().iter().enumerate() {
            assert!((o - expect((i + 1) as f64)).abs() < 1e-15);
        }
        assert_eq!(*out.get(9, 9), 1.0);
        assert_eq!(*out.get(9, 8), 1.0);
        assert_eq!(*out.get(0, 0), 0.0);
    }

    #[test]
    fn clip_full_range_preserves_order() {
        let r = Raster::from_fn(4, 5, |r, c| ((r * 5 + c) as f64 * 1.7).sin());
        let out = clip_percentiles(&r, 0.0, 100.0).unwrap();
        for i in 0..r.len() {
            for j in 0..r.len() {
                if r.data()[i] < r.data()[j] {
                    assert!(out.data()[i] < out.data()[j]);
                }
            }
        }
        assert!(clip_percentiles(&r, 50.0, 50.0).is_err());
    }

    #[test]
    fn clip_ignores_excluded_pixels() {
        let base = Raster::from_fn(4, 4, |r, c| (r * 4 + c) as f64);
        let mut land = Raster::filled(4, 4, false);
        land.set(0, 0, true);
        land.set(3, 3, true);
        let mut spiked = base.clone();
        spiked.set(0, 0, -1e9);
        spiked.set(3, 3, 1e9);
        let a = clip_percentiles_masked(&base, 0.0, 100.0, Some(&land)).unwrap();
        let b = clip_percentiles_masked(&spiked, 0.0, 100.0, Some(&land)).unwrap();
        for i in 1..15 {
            assert_eq!(a.data()[i], b.data()[i]);
        }
    }

    #[test]
    fn gamma_cases() {
        let r = Raster::from_vec(1, 3, vec![0.0, 0.25, 1.0]).unwrap();
        assert_eq!(gamma_correct(&r, 1.0).unwrap(), r);
        let out = gamma_correct(&r, 0.5).unwrap();
        assert_eq!(out.data(), &[0.0, 0.5, 1.0]);
        for g in [0.3, 2.0, 7.5] {
            let o = gamma_correct(&r, g).unwrap();
            assert_eq!(o.data()[0], 0.0);
            assert_eq!(o.data()[2], 1.0);
        }
        assert!(gamma_correct(&r, 0.0).is_err());
        assert!(gamma_correct(&r, -1.0).is_err());
    }

    #[test]
    fn identity_config_is_rescale_only() {
        let vv = Raster::from_fn(4, 4, |r, c| (r * 4 + c) as f64 * 0.1);
        let vh = Raster::from_fn(4, 4, |r, c| (16 - r * 4 - c) as f64 * 0.01);
        let cfg = PreprocessConfig {
            median_window: 1,
            clip_low_pct: 0.0,
            clip_high_pct: 100.0,
            gamma: 1.0,
            apply_land_mask: true,
        };
        let out = preprocess_scene(&scene(vv.clone(), vh.clone(), None), &cfg).unwrap();
        assert_eq!(out.vv(), &clip_percentiles(&vv, 0.0, 100.0).unwrap());
        assert_eq!(out.vh(), &clip_percentiles(&vh, 0.0, 100.0).unwrap());
    }

    #[test]
    fn all_land_scene_is_fully_flagged() {
        let s = scene(
            Raster::filled(4, 4, 0.2),
            Raster::filled(4, 4, 0.1),
            Some(Raster::filled(4, 4, true)),
        );
        let out = preprocess_scene(&s, &PreprocessConfig::default()).unwrap();
        assert!(out.land_mask().unwrap().data().iter().all(|&l| l));
        assert!(out.vv().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn no_land_mask_flag_drops_mask() {
        let s = scene(
            Raster::filled(4, 4, 0.2),
            Raster::filled(4, 4, 0.1),
            Some(Raster::filled(4, 4, true)),
        );
        let cfg = PreprocessConfig {
            apply_land_mask: false,
            ..Default::default()
        };
        assert!(preprocess_scene(&s, &cfg).unwrap().land_mask().is_none());
    }

    #[test]
    fn impulse_scene_loses_impulse() {
        let mut vv = Raster::from_fn(8, 8, |r, c| 0.2 + 0.01 * ((r + c) % 3) as f64);
        vv.set(4, 4, 50.0);
        let vh = Raster::filled(8, 8, 0.05);
        let out = preprocess_scene(&scene(vv.clone(), vh, None), &PreprocessConfig::default()).unwrap();
        // median oracle: sort the impulse neighbourhood by hand
        let mut window = Vec::new();
        vv.window_into(4, 4, 3, &mut window);
        window.sort_by(f64::total_cmp);
        assert!(window[4] < 0.3);
        let far_max = (0..8)
            .flat_map(|r| (0..8).map(move |c| (r, c)))
            .filter(|&(r, c): &(usize, usize)| r.abs_diff(4) > 1 || c.abs_diff(4) > 1)
            .map(|(r, c)| *out.vv().get(r, c))
            .fold(0.0, f64::max);
        assert!(*out.vv().get(4, 4) <= far_max);
    }

    #[test]
    fn step_order_is_median_clip_gamma() {
        // golden values from applying the three steps by hand
        let vv = Raster::from_vec(3, 3, vec![0.9, 0.1, 0.5, 0.3, 0.7, 0.2, 0.8, 0.4, 0.6]).unwrap();
        let cfg = PreprocessConfig {
            median_window: 3,
            clip_low_pct: 0.0,
            clip_high_pct: 100.0,
            gamma: 2.0,
            apply_land_mask: false,
        };
        let out = preprocess_scene(&scene(vv.clone(), vv.clone(), None), &cfg).unwrap();
        let med = median_filter(&vv, 3).unwrap();
        let clipped = clip_percentiles(&med, 0.0, 100.0).unwrap();
        let golden = gamma_correct(&clipped, 2.0).unwrap();
        assert_eq!(out.vv(), &golden);
        // gamma before clip differs
        let other = median_filter(&clip_percentiles(&gamma_correct(&vv, 2.0).unwrap(), 0.0, 100.0).unwrap(), 3).unwrap();
        assert_ne!(out.vv(), &other);
    }

    #[test]
    fn sweep_picks_a_candidate() {
        let vv = Raster::from_fn(16, 16, |r, c| ((r * 16 + c) as f64 / 255.0).powi(3));
        let s = scene(vv.clone(), vv, None);
        let g = gamma_sweep(&[s], &PreprocessConfig::default()).unwrap();
        assert!(GAMMA_SWEEP_CANDIDATES.contains(&g));
        // cubed ramp is compressed toward 0, so a gamma below 1 expands it
        assert!(g < 1.0);
    }

    #[test]
    fn config_validation() {
        assert!(PreprocessConfig::default().validate().is_ok());
        let bad = [
            PreprocessConfig { median_window: 2, ..Default::default() },
            PreprocessConfig { clip_low_pct: 99.0, clip_high_pct: 1.0, ..Default::default() },
            PreprocessConfig { gamma: 0.0, ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err());
        }
    }
}
