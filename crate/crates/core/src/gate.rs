//! Gate-model quantum kernel on five qubits.
//!
//! Each feature drives one qubit. The first sample is loaded with `RY(+θ)`
//! rotations and the second with `RY(-θ)`; the kernel value is the
//! probability of reading all zeros afterwards. There are no entangling
//! gates, so the circuit factorises and the probability equals
//! `Π_i cos²((θ_i(x1) - θ_i(x2)) / 2)`. Production code uses that product;
//! [`StateVector`] runs the same circuit gate by gate and backs the tests.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureVector, Label, LabeledSample, N_FEATURES};
use crate::svm::{smo_solve, Gram, KernelSpec, SmoFit, SvmTrainConfig, WeakLearner};

pub const N_QUBITS: usize = N_FEATURES;
pub const DIM: usize = 1 << N_QUBITS;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GateKernelSpec {
    /// Rotation angle per unit of scaled feature, θ = angle_scale · f.
    pub angle_scale: f64,
}

impl Default for GateKernelSpec {
    fn default() -> Self {
        GateKernelSpec {
            angle_scale: std::f64::consts::PI,
        }
    }
}

impl GateKernelSpec {
    #[inline]
    pub fn angles(&self, x: &FeatureVector) -> FeatureVector {
        std::array::from_fn(|i| self.angle_scale * x[i])
    }
}

/// Amplitudes of a five-qubit register; qubit `q` is bit `q` of the
/// basis-state index.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: [Complex64; DIM],
}

impl Default for StateVector {
    fn default() -> Self {
        Self::zero()
    }
}

impl StateVector {
    /// |00000⟩
    pub fn zero() -> Self {
        let mut amps = [Complex64::new(0.0, 0.0); DIM];
        amps[0] = Complex64::new(1.0, 0.0);
        StateVector { amps }
    }

    pub fn amplitudes(&self) -> &[Complex64; DIM] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probability(&self, basis: usize) -> f64 {
        self.amps[basis].norm_sqr()
    }

    /// Applies `RY(θ) = [[cos θ/2, -sin θ/2], [sin θ/2, cos θ/2]]` to `qubit`.
    pub fn apply_ry(&mut self, qubit: usize, theta: f64) -> Result<()> {
        if qubit >= N_QUBITS {
            return Err(Error::Config(format!(
                "qubit index {qubit} out of range 0..{N_QUBITS}"
            )));
        }
        let (s, c) = (theta / 2.0).sin_cos();
        let bit = 1 << qubit;
        for i in 0..DIM {
            if i & bit == 0 {
                let a0 = self.amps[i];
                let a1 = self.amps[i | bit];
                self.amps[i] = a0 * c - a1 * s;
                self.amps[i | bit] = a0 * s + a1 * c;
            }
        }
        Ok(())
    }
}

fn check_scaled(x: &FeatureVector) -> Result<()> {
    if let Some(v) = x.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Unscaled(format!(
            "gate kernel input {v} outside [0,1]; apply the feature scaler first"
        )));
    }
    Ok(())
}

/// Runs the encoding circuit on the simulator and returns P(|00000⟩).
pub fn circuit_kernel_value(
    x1: &FeatureVector,
    x2: &FeatureVector,
    spec: &GateKernelSpec,
) -> Result<f64> {
    check_scaled(x1)?;
    check_scaled(x2)?;
    let mut psi = StateVector::zero();
    for (q, theta) in spec.angles(x1).into_iter().enumerate() {
        psi.apply_ry(q, theta)?;
    }
    for (q, theta) in spec.angles(x2).into_iter().enumerate() {
        psi.apply_ry(q, -theta)?;
    }
    Ok(psi.probability(0))
}

#[inline]
pub fn kernel_value_unchecked(x1: &FeatureVector, x2: &FeatureVector, spec: &GateKernelSpec) -> f64 {
    let mut p = 1.0;
    for i in 0..N_QUBITS {
        let c = (0.5 * spec.angle_scale * (x1[i] - x2[i])).cos();
        p *= c * c;
    }
    p
}

pub fn kernel_value(x1: &FeatureVector, x2: &FeatureVector, spec: &GateKernelSpec) -> Result<f64> {
    check_scaled(x1)?;
    check_scaled(x2)?;
    Ok(kernel_value_unchecked(x1, x2, spec))
}

pub fn quantum_gram_matrix(xs: &[FeatureVector], spec: &GateKernelSpec) -> Result<Gram> {
    if xs.is_empty() {
        return Err(Error::NotEnoughSamples("Gram matrix of an empty sample set".into()));
    }
    for x in xs {
        check_scaled(x)?;
    }
    Ok(Gram::from_fn(xs.len(), |i, j| {
        if i == j {
            1.0
        } else {
            kernel_value_unchecked(&xs[i], &xs[j], spec)
        }
    }))
}

/// Classical dual solver over the quantum Gram matrix. The learner keeps
/// its support vectors and the gate kernel, so inference evaluates the
/// quantum kernel against each of them.
pub fn train_gate_svm(
    samples: &[LabeledSample],
    spec: &GateKernelSpec,
    cfg: &SvmTrainConfig,
) -> Result<SmoFit> {
    let xs: Vec<FeatureVector> = samples.iter().map(|s| s.x).collect();
    let ys: Vec<Label> = samples.iter().map(|s| s.y).collect();
    let gram = quantum_gram_matrix(&xs, spec)?;
    let sol = smo_solve(&gram, &ys, cfg)?;
    let learner = WeakLearner {
        support_x: xs,
        support_y: ys,
        alphas: sol.alphas,
        bias: sol.bias,
        kernel: KernelSpec::QuantumGate(*spec),
    }
    .pruned();
    Ok(SmoFit {
        learner,
        converged: sol.converged,
        iterations: sol.iterations,
    })
}
