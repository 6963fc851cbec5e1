//! Bagging over disjoint subsets of the training pool and per-pixel
//! aggregation of the trained learners.

use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{
    extract_feature_image, FeatureScaler, FeatureVector, Label, LabeledSample,
};
use crate::gate::{train_gate_svm, GateKernelSpec};
use crate::preprocess::{preprocess_scene, PreprocessConfig};
use crate::qubo::{train_weak_learner_annealed, AnnealConfig, BinaryEncoding};
use crate::raster::{BoolRaster, Raster};
use crate::scene_io::{
    Aggregation, Backend, ModelFile, ModelHeader, SarScene, StoredEnsembleConfig,
    MODEL_FORMAT_VERSION,
};
use crate::seed;
use crate::svm::{smo_train, KernelSpec, SvmTrainConfig, WeakLearner};

/// Stream id for the partition shuffle, kept apart from per-learner streams.
const PARTITION_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleConfig {
    pub n_learners: usize,
    pub subset_size: usize,
    pub backend: Backend,
    pub aggregation: Aggregation,
    pub seed: u64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            n_learners: 500,
            subset_size: 40,
            backend: Backend::Classical,
            aggregation: Aggregation::MeanDecision,
            seed: 0,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_learners == 0 || self.subset_size < 2 {
            return Err(Error::Config(format!(
                "need n_learners >= 1 and subset_size >= 2, got {}/{}",
                self.n_learners, self.subset_size
            )));
        }
        Ok(())
    }
}

/// Training settings for every backend; only the selected one is used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub svm: SvmTrainConfig,
    pub rbf_gamma: f64,
    pub encoding: BinaryEncoding,
    pub anneal: AnnealConfig,
    pub gate: GateKernelSpec,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            svm: SvmTrainConfig::default(),
            rbf_gamma: 1.0,
            encoding: BinaryEncoding::default(),
            anneal: AnnealConfig::default(),
            gate: GateKernelSpec::default(),
        }
    }
}

impl BackendConfig {
    pub fn kernel_for(&self, backend: Backend) -> KernelSpec {
        match backend {
            Backend::Classical | Backend::Annealed => KernelSpec::Rbf {
                gamma: self.rbf_gamma,
            },
            Backend::GateKernel => KernelSpec::QuantumGate(self.gate),
        }
    }

    pub fn validate(&self, backend: Backend) -> Result<()> {
        self.svm.validate()?;
        self.kernel_for(backend).validate()?;
        if backend == Backend::Annealed {
            self.encoding.validate()?;
            self.anneal.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Partition {
    /// Pool indices, each subset exactly `subset_size` long and containing
    /// both classes.
    pub subsets: Vec<Vec<usize>>,
    pub discarded: usize,
    pub repaired: usize,
    pub dropped: usize,
}

fn count_oil(pool: &[LabeledSample], subset: &[usize]) -> usize {
    subset.iter().filter(|&&i| pool[i].y == Label::Oil).count()
}

/// Shuffles the pool by `cfg.seed`, cuts `⌊|pool| / subset_size⌋` subsets
/// (at most `n_learners`), and discards the rest. A subset missing a class
/// takes one sample of it from the first other subset holding at least two,
/// giving back one of its own majority class; subsets that cannot be
/// repaired are dropped.
pub fn partition_disjoint_subsets(
    pool: &[LabeledSample],
    cfg: &EnsembleConfig,
) -> Result<Partition> {
    cfg.validate()?;
    if pool.len() < cfg.subset_size {
        return Err(Error::NotEnoughSamples(format!(
            "pool of {} samples is smaller than one subset of {}",
            pool.len(),
            cfg.subset_size
        )));
    }
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.shuffle(&mut seed::rng_for(cfg.seed, PARTITION_STREAM));
    let n_sub = (pool.len() / cfg.subset_size).min(cfg.n_learners);
    let mut subsets: Vec<Vec<usize>> = order
        .chunks_exact(cfg.subset_size)
        .take(n_sub)
        .map(|c| c.to_vec())
        .collect();
    let discarded = pool.len() - n_sub * cfg.subset_size;

    let mut repaired = 0;
    let mut keep = vec![true; n_sub];
    for s in 0..n_sub {
        let oil = count_oil(pool, &subsets[s]);
        let missing = if oil == 0 {
            Label::Oil
        } else if oil == cfg.subset_size {
            Label::Water
        } else {
            continue;
        };
        let donor = (0..n_sub).find(|&d| {
            d != s
                && subsets[d].iter().filter(|&&i| pool[i].y == missing).count() >= 2
        });
        match donor {
            Some(d) => {
                let di = subsets[d].iter().position(|&i| pool[i].y == missing).unwrap();
                let si = subsets[s].iter().position(|&i| pool[i].y != missing).unwrap();
                let give = subsets[d][di];
                subsets[d][di] = subsets[s][si];
                subsets[s][si] = give;
                repaired += 1;
            }
            None => keep[s] = false,
        }
    }
    let dropped = keep.iter().filter(|&&k| !k).count();
    let subsets = subsets
        .into_iter()
        .zip(keep)
        .filter_map(|(s, k)| k.then_some(s))
        .collect();
    Ok(Partition {
        subsets,
        discarded,
        repaired,
        dropped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TrainingReport {
    pub backend: Option<Backend>,
    pub pool_size: usize,
    pub pool_oil: usize,
    pub requested_learners: usize,
    pub subsets_formed: usize,
    pub subsets_repaired: usize,
    pub subsets_dropped: usize,
    pub samples_discarded: usize,
    pub learners_trained: usize,
    pub learners_failed: usize,
    pub failures: Vec<String>,
    /// Classical/gate learners whose solver hit the iteration cap.
    pub unconverged: usize,
    pub seconds_sampling: f64,
    pub seconds_partition: f64,
    pub seconds_training: f64,
}

/// Settings stored alongside the learners so inference can replay them.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelContext {
    pub preprocess: PreprocessConfig,
    pub working_size: (usize, usize),
}

impl Default for ModelContext {
    fn default() -> Self {
        ModelContext {
            preprocess: PreprocessConfig::default(),
            working_size: crate::scene_io::DEFAULT_WORKING_SIZE,
        }
    }
}

struct TrainedOne {
    learner: WeakLearner,
    converged: bool,
}

fn train_one(
    index: usize,
    samples: &[LabeledSample],
    cfg: &EnsembleConfig,
    backend: &BackendConfig,
) -> Result<TrainedOne> {
    let kernel = backend.kernel_for(cfg.backend);
    match cfg.backend {
        Backend::Classical => {
            let fit = smo_train(samples, &kernel, &backend.svm)?;
            Ok(TrainedOne {
                learner: fit.learner,
                converged: fit.converged,
            })
        }
        Backend::GateKernel => {
            let fit = train_gate_svm(samples, &backend.gate, &backend.svm)?;
            Ok(TrainedOne {
                learner: fit.learner,
                converged: fit.converged,
            })
        }
        Backend::Annealed => {
            let anneal = AnnealConfig {
                seed: seed::derive_seed(cfg.seed, index as u64),
                ..backend.anneal.clone()
            };
            let fit = train_weak_learner_annealed(samples, &kernel, &backend.encoding, &anneal)?;
            Ok(TrainedOne {
                learner: fit.learner,
                converged: true,
            })
        }
    }
}

/// Fits the scaler on the whole pool, partitions the scaled pool, and
/// trains one learner per subset with the selected backend. Learner `i`
/// draws randomness only from `(cfg.seed, i)`, so the result does not
/// depend on the thread schedule.
pub fn train_ensemble(
    pool: &[LabeledSample],
    cfg: &EnsembleConfig,
    backend: &BackendConfig,
    context: &ModelContext,
) -> Result<(ModelFile, TrainingReport)> {
    cfg.validate()?;
    backend.validate(cfg.backend)?;
    let t0 = Instant::now();
    let scaler = FeatureScaler::fit_samples(pool)?;
    let scaled: Vec<LabeledSample> = pool
        .iter()
        .map(|s| LabeledSample {
            x: scaler.apply(&s.x),
            y: s.y,
            origin: s.origin.clone(),
        })
        .collect();
    let partition = partition_disjoint_subsets(&scaled, cfg)?;
    if partition.subsets.is_empty() {
        return Err(Error::NotEnoughSamples(
            "no trainable subset: every subset lacks one of the two classes".into(),
        ));
    }
    let seconds_partition = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let results: Vec<Result<TrainedOne>> = partition
        .subsets
        .par_iter()
        .enumerate()
        .map(|(i, idx)| {
            let samples: Vec<LabeledSample> = idx.iter().map(|&k| scaled[k].clone()).collect();
            train_one(i, &samples, cfg, backend)
        })
        .collect();
    let seconds_training = t1.elapsed().as_secs_f64();

    let mut learners = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    let mut unconverged = 0;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(t) => {
                if !t.converged {
                    unconverged += 1;
                }
                learners.push(t.learner);
            }
            Err(e) => failures.push(format!("learner {i}: {e}")),
        }
    }
    if learners.is_empty() {
        return Err(Error::NotEnoughSamples(format!(
            "every learner failed to train: {}",
            failures.join("; ")
        )));
    }

    let report = TrainingReport {
        backend: Some(cfg.backend),
        pool_size: pool.len(),
        pool_oil: pool.iter().filter(|s| s.y == Label::Oil).count(),
        requested_learners: cfg.n_learners,
        subsets_formed: partition.subsets.len() + partition.dropped,
        subsets_repaired: partition.repaired,
        subsets_dropped: partition.dropped,
        samples_discarded: partition.discarded,
        learners_trained: learners.len(),
        learners_failed: failures.len(),
        failures,
        unconverged,
        seconds_sampling: 0.0,
        seconds_partition,
        seconds_training,
    };
    let model = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        header: ModelHeader {
            backend: cfg.backend,
            ensemble_config: StoredEnsembleConfig {
                n_learners: learners.len(),
                subset_size: cfg.subset_size,
                aggregation: cfg.aggregation,
            },
            feature_scaler: scaler,
            preprocess: context.preprocess.clone(),
            working_size: [context.working_size.0, context.working_size.1],
            rng_seed: cfg.seed,
        },
        learners,
    };
    Ok((model, report))
}

/// Combines per-learner decision values into one label; ties go to water.
pub fn aggregate(decisions: &[f64], rule: Aggregation) -> Result<Label> {
    if decisions.is_empty() {
        return Err(Error::NotEnoughSamples("no decisions to aggregate".into()));
    }
    Ok(aggregate_unchecked(decisions, rule))
}

#[inline]
fn aggregate_unchecked(decisions: &[f64], rule: Aggregation) -> Label {
    match rule {
        Aggregation::MeanDecision => {
            // the sign of the mean is the sign of the sum; when the sum is
            // within rounding error of zero, re-add in sorted order so the
            // label cannot depend on learner order
            let sum: f64 = decisions.iter().sum();
            let magnitude: f64 = decisions.iter().map(|d| d.abs()).sum();
            if sum.abs() > decisions.len() as f64 * f64::EPSILON * magnitude {
                return Label::from_decision(sum);
            }
            let mut sorted = decisions.to_vec();
            sorted.sort_by(f64::total_cmp);
            Label::from_decision(sorted.iter().sum())
        }
        Aggregation::MajorityVote => {
            let oil = decisions.iter().filter(|&&f| f > 0.0).count();
            if 2 * oil > decisions.len() {
                Label::Oil
            } else {
                Label::Water
            }
        }
    }
}

/// Predicted oil extent for one scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationMask {
    pub pixels: BoolRaster,
    pub model_id: String,
    pub scene_id: String,
}

impl SegmentationMask {
    pub fn oil_count(&self) -> usize {
        self.pixels.data().iter().filter(|&&p| p).count()
    }
}

/// Learners flattened into contiguous arrays with `α·y` folded together.
struct CompiledLearner {
    points: Vec<FeatureVector>,
    weights: Vec<f64>,
    bias: f64,
    kernel: KernelSpec,
}

impl CompiledLearner {
    #[inline]
    fn decision(&self, x: &FeatureVector) -> f64 {
        let mut f = 0.0;
        for (p, w) in self.points.iter().zip(&self.weights) {
            f += w * self.kernel.eval(p, x);
        }
        f + self.bias
    }
}

fn compile(model: &ModelFile) -> Vec<CompiledLearner> {
    model
        .learners
        .iter()
        .map(|l| CompiledLearner {
            points: l.support_x.clone(),
            weights: l
                .alphas
                .iter()
                .zip(&l.support_y)
                .map(|(a, y)| a * y.sign())
                .collect(),
            bias: l.bias,
            kernel: l.kernel,
        })
        .collect()
}

fn expected_kernel(backend: Backend, kernel: &KernelSpec) -> bool {
    matches!(
        (backend, kernel),
        (Backend::Classical | Backend::Annealed, KernelSpec::Rbf { .. })
            | (Backend::GateKernel, KernelSpec::QuantumGate(_))
    )
}

/// Labels every non-land pixel of a preprocessed scene; land is water.
pub fn predict_mask(model: &ModelFile, scene: &SarScene) -> Result<SegmentationMask> {
    model.header.feature_scaler.validate()?;
    if model.learners.is_empty() {
        return Err(Error::ModelMismatch("model has no learners".into()));
    }
    if let Some(l) = model
        .learners
        .iter()
        .find(|l| !expected_kernel(model.backend(), &l.kernel))
    {
        return Err(Error::ModelMismatch(format!(
            "backend {} with learner kernel {:?}",
            model.backend(),
            l.kernel
        )));
    }
    let image = extract_feature_image(scene)?;
    let learners = compile(model);
    let scaler = model.scaler();
    let rule = model.header.ensemble_config.aggregation;
    let (h, w) = (image.height(), image.width());

    let mut pixels = vec![false; h * w];
    pixels
        .par_chunks_mut(w)
        .enumerate()
        .for_each(|(r, out_row)| {
            let mut decisions = vec![0.0; learners.len()];
            for (c, out) in out_row.iter_mut().enumerate() {
                if !*image.valid.get(r, c) {
                    continue;
                }
                let x = scaler.apply(image.features.get(r, c));
                for (d, l) in decisions.iter_mut().zip(&learners) {
                    *d = l.decision(&x);
                }
                *out = aggregate_unchecked(&decisions, rule) == Label::Oil;
            }
        });
    Ok(SegmentationMask {
        pixels: Raster::from_vec(h, w, pixels)?,
        model_id: model.fingerprint()?,
        scene_id: scene.id.clone(),
    })
}

/// Preprocesses a raw scene with the model's stored settings, then predicts.
pub fn predict_raw_scene(model: &ModelFile, raw: &SarScene) -> Result<SegmentationMask> {
    let [h, w] = model.header.working_size;
    if raw.dims() != (h, w) {
        return Err(Error::ModelMismatch(format!(
            "scene {} is {}x{} but the model expects {h}x{w}",
            raw.id,
            raw.dims().0,
            raw.dims().1
        )));
    }
    let pre = preprocess_scene(raw, &model.header.preprocess)?;
    predict_mask(model, &pre)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::PixelOrigin;
    use crate::svm::decision_function;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pool(n: usize, n_oil: usize, seed: u64) -> Vec<LabeledSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let oil = i < n_oil;
                let c = if oil { 0.2 } else { 0.7 };
                let x = std::array::from_fn(|_| c + 0.2 * rng.gen::<f64>());
                LabeledSample {
                    x,
                    y: if oil { Label::Oil } else { Label::Water },
                    origin: PixelOrigin { scene_id: format!("s{}", i / 50), row: i, col: 0 },
                }
            })
            .collect()
    }

    fn small_cfg(backend: Backend, n_learners: usize) -> EnsembleConfig {
        EnsembleConfig { n_learners, subset_size: 40, backend, seed: 5, ..Default::default() }
    }

    #[test]
    fn paper_scale_partition() {
        let p = pool(20_000, 10_000, 1);
        let part = partition_disjoint_subsets(&p, &EnsembleConfig::default()).unwrap();
        assert_eq!(part.subsets.len(), 500);
        assert!(part.subsets.iter().all(|s| s.len() == 40));
        let mut seen = vec![false; p.len()];
        for s in &part.subsets {
            for &i in s {
                assert!(!seen[i], "index {i} used twice");
                seen[i] = true;
            }
        }
    }

    #[test]
    fn floor_rule_discards_leftovers() {
        let p = pool(85, 40, 2);
        let part = partition_disjoint_subsets(&p, &small_cfg(Backend::Classical, 500)).unwrap();
        assert_eq!(part.subsets.len(), 2);
        assert_eq!(part.discarded, 5);
        assert!(partition_disjoint_subsets(&p[..30], &small_cfg(Backend::Classical, 500)).is_err());
    }

    #[test]
    fn single_oil_sample_keeps_at_most_one_subset() {
        let p = pool(400, 1, 3);
        let part = partition_disjoint_subsets(&p, &small_cfg(Backend::Classical, 500)).unwrap();
        assert!(part.subsets.len() <= 1);
        for s in &part.subsets {
            let oil = count_oil(&p, s);
            assert!(oil >= 1 && oil < s.len());
        }
        assert_eq!(part.subsets.len() + part.dropped, 10);
    }

    #[test]
    fn repair_swaps_preserve_disjointness() {
        // 3 oil samples among 400 leave most random subsets without oil
        let p = pool(400, 12, 4);
        let part = partition_disjoint_subsets(&p, &small_cfg(Backend::Classical, 500)).unwrap();
        assert!(part.repaired > 0);
        let mut all: Vec<usize> = part.subsets.iter().flatten().copied().collect();
        let n = all.len();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), n);
        for s in &part.subsets {
            let oil = count_oil(&p, s);
            assert!(oil >= 1 && oil < s.len());
        }
    }

    #[test]
    fn aggregate_cases() {
        use Aggregation::*;
        assert_eq!(aggregate(&[1.0, 1.0, -1.0], MajorityVote).unwrap(), Label::Oil);
        assert_eq!(aggregate(&[3.0, -1.0, -1.0], MeanDecision).unwrap(), Label::Oil);
        assert_eq!(aggregate(&[1.0, -1.0], MeanDecision).unwrap(), Label::Water);
        assert_eq!(aggregate(&[1.0, -1.0], MajorityVote).unwrap(), Label::Water);
        assert!(aggregate(&[], MeanDecision).is_err());
    }

    #[test]
    fn near_zero_mean_ignores_order() {
        // naive left-to-right sums: 1e16 + 1 - 1e16 - 1 = -1, reversed gives 0
        let d = [1e16, 1.0, -1e16, -1.0, 0.5];
        let mut rev = d;
        rev.reverse();
        assert_eq!(
            aggregate(&d, Aggregation::MeanDecision).unwrap(),
            aggregate(&rev, Aggregation::MeanDecision).unwrap()
        );
    }

    #[test]
    fn rules_agree_when_learners_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..200 {
            let n = rng.gen_range(1..9);
            let sign = if rng.gen() { 1.0 } else { -1.0 };
            let d: Vec<f64> = (0..n).map(|_| sign * rng.gen_range(0.01..2.0)).collect();
            assert_eq!(
                aggregate(&d, Aggregation::MeanDecision).unwrap(),
                aggregate(&d, Aggregation::MajorityVote).unwrap()
            );
        }
    }

    #[test]
    fn single_learner_classical_model_matches_smo() {
        let p = pool(40, 20, 7);
        let cfg = small_cfg(Backend::Classical, 1);
        let (model, report) = train_ensemble(&p, &cfg, &BackendConfig::default(), &ModelContext::default()).unwrap();
        assert_eq!(model.learners.len(), 1);
        assert_eq!(report.learners_trained, 1);
        let scaler = FeatureScaler::fit_samples(&p).unwrap();
        let part = partition_disjoint_subsets(
            &p.iter().map(|s| LabeledSample { x: scaler.apply(&s.x), ..s.clone() }).collect::<Vec<_>>(),
            &cfg,
        )
        .unwrap();
        let subset: Vec<LabeledSample> = part.subsets[0]
            .iter()
            .map(|&i| LabeledSample { x: scaler.apply(&p[i].x), ..p[i].clone() })
            .collect();
        let direct = smo_train(&subset, &KernelSpec::Rbf { gamma: 1.0 }, &SvmTrainConfig::default()).unwrap();
        assert_eq!(model.learners[0], direct.learner);
    }

    #[test]
    fn training_is_deterministic_per_backend() {
        let p = pool(200, 80, 8);
        let mut backend = BackendConfig::default();
        backend.anneal.num_reads = 40;
        backend.anneal.sweeps_per_read = 60;
        for b in Backend::ALL {
            let cfg = small_cfg(b, 5);
            let (m1, _) = train_ensemble(&p, &cfg, &backend, &ModelContext::default()).unwrap();
            let (m2, _) = train_ensemble(&p, &cfg, &backend, &ModelContext::default()).unwrap();
            assert_eq!(
                crate::scene_io::encode_model(&m1).unwrap(),
                crate::scene_io::encode_model(&m2).unwrap()
            );
        }
    }

    #[test]
    fn every_learner_beats_chance_on_its_subset() {
        let p = pool(2000, 600, 9);
        let cfg = small_cfg(Backend::Classical, 500);
        let (model, _) = train_ensemble(&p, &cfg, &BackendConfig::default(), &ModelContext::default()).unwrap();
        let scaler = model.scaler().clone();
        let scaled: Vec<LabeledSample> =
            p.iter().map(|s| LabeledSample { x: scaler.apply(&s.x), ..s.clone() }).collect();
        let part = partition_disjoint_subsets(&scaled, &cfg).unwrap();
        assert_eq!(part.subsets.len(), model.learners.len());
        for (subset, learner) in part.subsets.iter().zip(&model.learners) {
            let hits = subset
                .iter()
                .filter(|&&i| Label::from_decision(decision_function(learner, &scaled[i].x)) == scaled[i].y)
                .count();
            assert!(hits as f64 / subset.len() as f64 > 0.5);
        }
    }

    #[test]
    fn no_oil_pool_aborts() {
        let p = pool(200, 0, 10);
        let err = train_ensemble(&p, &small_cfg(Backend::Classical, 5), &BackendConfig::default(), &ModelContext::default());
        assert!(matches!(err, Err(Error::NotEnoughSamples(_))));
    }

    fn constant_model(bias: f64, n: usize) -> ModelFile {
        ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            header: ModelHeader {
                backend: Backend::Annealed,
                ensemble_config: StoredEnsembleConfig { n_learners: n, subset_size: 40, aggregation: Aggregation::MeanDecision },
                feature_scaler: FeatureScaler::default(),
                preprocess: PreprocessConfig::default(),
                working_size: [8, 8],
                rng_seed: 0,
            },
            learners: vec![WeakLearner::constant(bias, KernelSpec::Rbf { gamma: 1.0 }); n],
        }
    }

    fn test_scene(land: Option<BoolRaster>) -> SarScene {
        let vv = Raster::from_fn(8, 8, |r, c| (r * 8 + c) as f64 / 63.0);
        let vh = Raster::from_fn(8, 8, |r, c| (r + c) as f64 / 14.0);
        SarScene::new("scene", vv, vh, land).unwrap()
    }

    #[test]
    fn constant_positive_learners_mark_all_sea_as_oil() {
        let mut land = Raster::filled(8, 8, false);
        land.set(0, 0, true);
        let mask = predict_mask(&constant_model(1.0, 3), &test_scene(Some(land))).unwrap();
        assert_eq!(mask.oil_count(), 63);
        assert!(!*mask.pixels.get(0, 0));
        let all_land = predict_mask(&constant_model(1.0, 3), &test_scene(Some(Raster::filled(8, 8, true)))).unwrap();
        assert_eq!(all_land.oil_count(), 0);
    }

    #[test]
    fn single_learner_mask_is_sign_of_decision() {
        let p = pool(40, 20, 11);
        let (mut model, _) = train_ensemble(&p, &small_cfg(Backend::GateKernel, 1), &BackendConfig::default(), &ModelContext::default()).unwrap();
        model.header.feature_scaler = FeatureScaler::default();
        let scene = test_scene(None);
        let mask = predict_mask(&model, &scene).unwrap();
        let img = extract_feature_image(&scene).unwrap();
        for r in 0..8 {
            for c in 0..8 {
                let x = model.scaler().apply(img.features.get(r, c));
                let expect = decision_function(&model.learners[0], &x) > 0.0;
                assert_eq!(*mask.pixels.get(r, c), expect);
            }
        }
    }

    #[test]
    fn learner_order_does_not_change_masks() {
        let p = pool(400, 150, 12);
        let (model, _) = train_ensemble(&p, &small_cfg(Backend::Classical, 10), &BackendConfig::default(), &ModelContext::default()).unwrap();
        let mut rev = model.clone();
        rev.learners.reverse();
        let scene = test_scene(None);
        assert_eq!(predict_mask(&model, &scene).unwrap().pixels, predict_mask(&rev, &scene).unwrap().pixels);
    }

    #[test]
    fn backend_kernel_mismatch_rejected() {
        let mut m = constant_model(1.0, 1);
        m.header.backend = Backend::GateKernel;
        assert!(matches!(predict_mask(&m, &test_scene(None)), Err(Error::ModelMismatch(_))));
    }
}
