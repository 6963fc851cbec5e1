//! Kernel SVM machinery shared by all backends: kernels, Gram matrices,
//! the decision function, bias reconstruction from multipliers, and an SMO
//! solver for the soft-margin dual.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureVector, Label, LabeledSample};
use crate::gate::{self, GateKernelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    Rbf { gamma: f64 },
    QuantumGate(GateKernelSpec),
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec::Rbf { gamma: 1.0 }
    }
}

impl KernelSpec {
    /// Kernel value without input validation (hot path).
    #[inline]
    pub fn eval(&self, a: &FeatureVector, b: &FeatureVector) -> f64 {
        match *self {
            KernelSpec::Rbf { gamma } => rbf_unchecked(a, b, gamma),
            KernelSpec::QuantumGate(spec) => gate::kernel_value_unchecked(a, b, &spec),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (name, p) = match *self {
            KernelSpec::Rbf { gamma } => ("rbf gamma", gamma),
            KernelSpec::QuantumGate(spec) => ("gate angle scale", spec.angle_scale),
        };
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::Config(format!("{name} must be positive, got {p}")));
        }
        Ok(())
    }
}

#[inline]
fn rbf_unchecked(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

pub fn rbf_kernel(x1: &[f64], x2: &[f64], gamma: f64) -> Result<f64> {
    if x1.len() != x2.len() {
        return Err(Error::Length {
            expected: x1.len(),
            found: x2.len(),
        });
    }
    Ok(rbf_unchecked(x1, x2, gamma))
}

/// Dense symmetric matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Gram {
    n: usize,
    data: Vec<f64>,
}

impl Gram {
    pub fn from_fn(n: usize, mut k: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = k(i, j);
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        Gram { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

pub fn gram_matrix(xs: &[FeatureVector], kernel: &KernelSpec) -> Result<Gram> {
    if xs.is_empty() {
        return Err(Error::NotEnoughSamples("Gram matrix of an empty sample set".into()));
    }
    kernel.validate()?;
    if let KernelSpec::QuantumGate(spec) = kernel {
        return gate::quantum_gram_matrix(xs, spec);
    }
    Ok(Gram::from_fn(xs.len(), |i, j| kernel.eval(&xs[i], &xs[j])))
}

/// A trained binary SVM: `f(x) = sum_n alpha_n y_n K(x_n, x) + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakLearner {
    pub support_x: Vec<FeatureVector>,
    pub support_y: Vec<Label>,
    pub alphas: Vec<f64>,
    pub bias: f64,
    pub kernel: KernelSpec,
}

impl WeakLearner {
    /// Learner with no support samples, deciding by `bias` alone.
    pub fn constant(bias: f64, kernel: KernelSpec) -> Self {
        WeakLearner {
            support_x: Vec::new(),
            support_y: Vec::new(),
            alphas: Vec::new(),
            bias,
            kernel,
        }
    }

    pub fn n_support(&self) -> usize {
        self.alphas.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.alphas.len();
        if self.support_x.len() != n || self.support_y.len() != n {
            return Err(Error::MalformedModel(format!(
                "support arrays disagree: {} alphas, {} features, {} labels",
                n,
                self.support_x.len(),
                self.support_y.len()
            )));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
            return Err(Error::MalformedModel(format!("invalid multiplier {a}")));
        }
        if !self.bias.is_finite() {
            return Err(Error::MalformedModel(format!("invalid bias {}", self.bias)));
        }
        self.kernel.validate()
    }

    /// Drops zero multipliers; the decision function is unchanged.
    pub fn pruned(mut self) -> Self {
        let keep: Vec<bool> = self.alphas.iter().map(|&a| a > 0.0).collect();
        let mut k = keep.iter();
        self.support_x.retain(|_| *k.next().unwrap());
        let mut k = keep.iter();
        self.support_y.retain(|_| *k.next().unwrap());
        self.alphas.retain(|&a| a > 0.0);
        self
    }

    pub fn predict(&self, x: &FeatureVector) -> Label {
        Label::from_decision(decision_function(self, x))
    }
}

pub fn decision_function(learner: &WeakLearner, x: &FeatureVector) -> f64 {
    let mut f = 0.0;
    for ((sx, sy), a) in learner
        .support_x
        .iter()
        .zip(&learner.support_y)
        .zip(&learner.alphas)
    {
        f += a * sy.sign() * learner.kernel.eval(sx, x);
    }
    f + learner.bias
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmTrainConfig {
    pub box_c: f64,
    pub smo_tol: f64,
    pub smo_max_passes: usize,
}

impl Default for SvmTrainConfig {
    fn default() -> Self {
        SvmTrainConfig {
            box_c: 3.0,
            smo_tol: 1e-3,
            smo_max_passes: 50,
        }
    }
}

impl SvmTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.box_c > 0.0 && self.box_c.is_finite()) {
            return Err(Error::Config(format!("box_c must be positive, got {}", self.box_c)));
        }
        if !(self.smo_tol > 0.0) {
            return Err(Error::Config(format!("smo_tol must be positive, got {}", self.smo_tol)));
        }
        Ok(())
    }
}

/// Multipliers within this distance of a bound count as at the bound.
fn bound_eps(c: f64) -> f64 {
    1e-12 * c.max(1.0)
}

/// `b = mean_n [y_n - sum_m alpha_m y_m K_mn]` over multipliers strictly
/// inside (0, C); if there are none, over all positive multipliers; if
/// none of those either, 0.
pub fn bias_from_alphas(gram: &Gram, ys: &[Label], alphas: &[f64], box_c: f64) -> f64 {
    let eps = bound_eps(box_c);
    let margin = |n: usize| -> f64 {
        let row = gram.row(n);
        let s: f64 = alphas
            .iter()
            .zip(ys)
            .zip(row)
            .map(|((a, y), k)| a * y.sign() * k)
            .sum();
        ys[n].sign() - s
    };
    let mean_over = |pred: &dyn Fn(f64) -> bool| -> Option<f64> {
        let idx: Vec<usize> = (0..alphas.len()).filter(|&n| pred(alphas[n])).collect();
        if idx.is_empty() {
            None
        } else {
            Some(idx.iter().map(|&n| margin(n)).sum::<f64>() / idx.len() as f64)
        }
    };
    mean_over(&|a| a > eps && a < box_c - eps)
        .or_else(|| mean_over(&|a| a > eps))
        .unwrap_or(0.0)
}

/// Bias for samples under an explicit kernel.
pub fn bias_for_samples(
    samples: &[LabeledSample],
    alphas: &[f64],
    kernel: &KernelSpec,
    box_c: f64,
) -> Result<f64> {
    let xs: Vec<FeatureVector> = samples.iter().map(|s| s.x).collect();
    let ys: Vec<Label> = samples.iter().map(|s| s.y).collect();
    let gram = gram_matrix(&xs, kernel)?;
    Ok(bias_from_alphas(&gram, &ys, alphas, box_c))
}

/// Dual objective `sum a - 1/2 sum_nm a_n a_m y_n y_m K_nm` (to maximise).
pub fn dual_objective(gram: &Gram, ys: &[Label], alphas: &[f64]) -> f64 {
    let n = alphas.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alphas[i] * alphas[j] * ys[i].sign() * ys[j].sign() * gram.get(i, j);
        }
    }
    alphas.iter().sum::<f64>() - 0.5 * quad
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution {
    pub alphas: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    /// False when the iteration cap was hit before the KKT gap closed; the
    /// multipliers are then the last iterate.
    pub converged: bool,
}

fn require_both_classes(ys: &[Label]) -> Result<()> {
    let oil = ys.iter().filter(|&&y| y == Label::Oil).count();
    if ys.len() < 2 || oil == 0 || oil == ys.len() {
        return Err(Error::SingleClass(format!(
            "{} samples, {} oil",
            ys.len(),
            oil
        )));
    }
    Ok(())
}

/// SMO over a precomputed Gram matrix, selecting working pairs by maximal
/// violation and second-order gain. Stops once the KKT gap
/// `max_{I_up} -y G - min_{I_low} -y G` drops below `smo_tol`; at most
/// `smo_max_passes * n` pair updates are made.
pub fn smo_solve(gram: &Gram, ys: &[Label], cfg: &SvmTrainConfig) -> Result<SmoSolution> {
    cfg.validate()?;
    let n = ys.len();
    if gram.n() != n {
        return Err(Error::Length {
            expected: n,
            found: gram.n(),
        });
    }
    require_both_classes(ys)?;
    let c = cfg.box_c;
    let y: Vec<f64> = ys.iter().map(|l| l.sign()).collect();
    let mut alpha = vec![0.0; n];
    // gradient of 1/2 a'Qa - e'a with Q_ij = y_i y_j K_ij
    let mut grad = vec![-1.0; n];
    let max_iter = cfg.smo_max_passes.saturating_mul(n).max(1);
    let tau = 1e-12;

    let in_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let in_low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            if in_up(alpha[t], y[t]) {
                let v = -y[t] * grad[t];
                if v > gmax {
                    gmax = v;
                    i_sel = Some(t);
                }
            }
        }
        let mut gmin = f64::INFINITY;
        let mut j_sel = None;
        let mut best_gain = f64::INFINITY;
        if let Some(i) = i_sel {
            let kii = gram.get(i, i);
            for t in 0..n {
                if !in_low(alpha[t], y[t]) {
                    continue;
                }
                let v = -y[t] * grad[t];
                gmin = gmin.min(v);
                let b = gmax - v;
                if b > 0.0 {
                    let mut a = kii + gram.get(t, t) - 2.0 * gram.get(i, t);
                    if a <= 0.0 {
                        a = tau;
                    }
                    let gain = -(b * b) / a;
                    if gain < best_gain {
                        best_gain = gain;
                        j_sel = Some(t);
                    }
                }
            }
        }
        if gmax - gmin < cfg.smo_tol {
            converged = true;
            break;
        }
        let (Some(i), Some(j)) = (i_sel, j_sel) else {
            converged = true;
            break;
        };
        iterations += 1;

        let old_i = alpha[i];
        let old_j = alpha[j];
        let mut quad = gram.get(i, i) + gram.get(j, j) - 2.0 * gram.get(i, j);
        if quad <= 0.0 {
            quad = tau;
        }
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let di = alpha[i] - old_i;
        let dj = alpha[j] - old_j;
        let (ri, rj) = (gram.row(i), gram.row(j));
        for t in 0..n {
            grad[t] += y[t] * (y[i] * ri[t] * di + y[j] * rj[t] * dj);
        }
    }

    let bias = bias_from_alphas(gram, ys, &alpha, c);
    Ok(SmoSolution {
        alphas: alpha,
        bias,
        iterations,
        converged,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoFit {
    pub learner: WeakLearner,
    pub converged: bool,
    pub iterations: usize,
}

/// Trains a learner on `samples`; zero multipliers are pruned from the
/// stored support set.
pub fn smo_train(
    samples: &[LabeledSample],
    kernel: &KernelSpec,
    cfg: &SvmTrainConfig,
) -> Result<SmoFit> {
    let ys: Vec<Label> = samples.iter().map(|s| s.y).collect();
    require_both_classes(&ys)?;
    let xs: Vec<FeatureVector> = samples.iter().map(|s| s.x).collect();
    let gram = gram_matrix(&xs, kernel)?;
    let sol = smo_solve(&gram, &ys, cfg)?;
    let learner = WeakLearner {
        support_x: xs,
        support_y: ys,
        alphas: sol.alphas,
        bias: sol.bias,
        kernel: *kernel,
    }
    .pruned();
    Ok(SmoFit {
        learner,
        converged: sol.converged,
        iterations: sol.iterations,
    })
}

pub fn training_accuracy(learner: &WeakLearner, samples: &[LabeledSample]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let hits = samples
        .iter()
        .filter(|s| learner.predict(&s.x) == s.y)
        .count();
    hits as f64 / samples.len() as f64
}
