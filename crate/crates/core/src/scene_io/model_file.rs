//! Versioned binary container for trained ensembles.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic        8 bytes  "SLKQSVM1"
//! version      u32
//! header_len   u32
//! header       header_len bytes of canonical JSON (sorted keys, no spaces)
//! learners     header.ensemble_config.n_learners blocks:
//!                u32 n_support
//!                f64 alpha[n_support]
//!                f64 bias
//!                i8  y[n_support]
//!                f64 features[n_support * 5]
//!                u8  kernel tag (0 = rbf, 1 = quantum gate)
//!                f64 kernel parameter (rbf gamma / gate angle scale)
//! crc32        u32 over every preceding byte
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureScaler, FeatureVector, Label, N_FEATURES};
use crate::gate::GateKernelSpec;
use crate::preprocess::PreprocessConfig;
use crate::svm::{KernelSpec, WeakLearner};

pub const MODEL_MAGIC: &[u8; 8] = b"SLKQSVM1";
pub const MODEL_FORMAT_VERSION: u32 = 1;

const KERNEL_TAG_RBF: u8 = 0;
const KERNEL_TAG_GATE: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Classical,
    Annealed,
    GateKernel,
}

impl Backend {
    pub const ALL: [Backend; 3] = [Backend::Classical, Backend::Annealed, Backend::GateKernel];

    pub fn name(self) -> &'static str {
        match self {
            Backend::Classical => "classical",
            Backend::Annealed => "annealed",
            Backend::GateKernel => "gate_kernel",
        }
    }
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classical" => Ok(Backend::Classical),
            "annealed" => Ok(Backend::Annealed),
            "gate_kernel" | "gate" => Ok(Backend::GateKernel),
            other => Err(Error::Config(format!(
                "unknown backend {other:?} (expected classical, annealed or gate_kernel)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    MeanDecision,
    MajorityVote,
}

impl std::str::FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean_decision" | "mean" => Ok(Aggregation::MeanDecision),
            "majority_vote" | "vote" => Ok(Aggregation::MajorityVote),
            other => Err(Error::Config(format!("unknown aggregation rule {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredEnsembleConfig {
    pub n_learners: usize,
    pub subset_size: usize,
    pub aggregation: Aggregation,
}

/// JSON part of the container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub backend: Backend,
    pub ensemble_config: StoredEnsembleConfig,
    pub feature_scaler: FeatureScaler,
    pub preprocess: PreprocessConfig,
    pub working_size: [usize; 2],
    pub rng_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub format_version: u32,
    pub header: ModelHeader,
    pub learners: Vec<WeakLearner>,
}

impl ModelFile {
    pub fn backend(&self) -> Backend {
        self.header.backend
    }

    pub fn scaler(&self) -> &FeatureScaler {
        &self.header.feature_scaler
    }

    pub fn validate(&self) -> Result<()> {
        if self.header.ensemble_config.n_learners != self.learners.len() {
            return Err(Error::MalformedModel(format!(
                "header lists {} learners but {} are present",
                self.header.ensemble_config.n_learners,
                self.learners.len()
            )));
        }
        self.header.feature_scaler.validate()?;
        for (i, l) in self.learners.iter().enumerate() {
            l.validate()
                .map_err(|e| Error::MalformedModel(format!("learner {i}: {e}")))?;
        }
        Ok(())
    }

    /// CRC32 of the encoded bytes, as hex; identifies a trained model.
    pub fn fingerprint(&self) -> Result<String> {
        let bytes = encode_model(self)?;
        Ok(format!("{:08x}", crc32fast::hash(&bytes)))
    }
}

fn canonical_header(header: &ModelHeader) -> Result<Vec<u8>> {
    let json_err = |source| Error::Json {
        context: "model header".into(),
        source,
    };
    // Value maps are ordered by key, which makes the text canonical.
    let value = serde_json::to_value(header).map_err(json_err)?;
    serde_json::to_vec(&value).map_err(json_err)
}

pub fn encode_model(model: &ModelFile) -> Result<Vec<u8>> {
    model.validate()?;
    let header = canonical_header(&model.header)?;
    let mut out = Vec::with_capacity(64 + header.len() + model.learners.len() * 40 * 64);
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&model.format_version.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for l in &model.learners {
        out.extend_from_slice(&(l.alphas.len() as u32).to_le_bytes());
        for a in &l.alphas {
            out.extend_from_slice(&a.to_le_bytes());
        }
        out.extend_from_slice(&l.bias.to_le_bytes());
        for y in &l.support_y {
            out.push(y.as_i8() as u8);
        }
        for x in &l.support_x {
            for v in x {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let (tag, param) = match l.kernel {
            KernelSpec::Rbf { gamma } => (KERNEL_TAG_RBF, gamma),
            KernelSpec::QuantumGate(spec) => (KERNEL_TAG_GATE, spec.angle_scale),
        };
        out.push(tag);
        out.extend_from_slice(&param.to_le_bytes());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Truncated(format!(
                "needed {n} bytes for {what} at offset {}, file has {}",
                self.pos,
                self.bytes.len()
            ))),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<ModelFile> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8, "magic")? != MODEL_MAGIC {
        return Err(Error::MalformedModel("bad magic bytes".into()));
    }
    let version = r.u32("format version")?;
    if version != MODEL_FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: MODEL_FORMAT_VERSION,
        });
    }
    let header_len = r.u32("header length")? as usize;
    let header: ModelHeader =
        serde_json::from_slice(r.take(header_len, "header")?).map_err(|source| Error::Json {
            context: "model header".into(),
            source,
        })?;

    let n_learners = header.ensemble_config.n_learners;
    let mut learners = Vec::with_capacity(n_learners.min(1 << 16));
    for i in 0..n_learners {
        let what = format!("learner {i}");
        let n = r.u32(&what)? as usize;
        // a corrupt count must not trigger a huge allocation
        if n > bytes.len() {
            return Err(Error::Truncated(format!("{what} claims {n} support samples")));
        }
        let alphas = (0..n).map(|_| r.f64(&what)).collect::<Result<Vec<_>>>()?;
        let bias = r.f64(&what)?;
        let support_y = r
            .take(n, &what)?
            .iter()
            .map(|&b| {
                Label::from_i8(b as i8)
                    .ok_or_else(|| Error::MalformedModel(format!("{what}: label byte {b}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut support_x: Vec<FeatureVector> = Vec::with_capacity(n);
        for _ in 0..n {
            let mut x = [0.0; N_FEATURES];
            for v in &mut x {
                *v = r.f64(&what)?;
            }
            support_x.push(x);
        }
        let tag = r.u8(&what)?;
        let param = r.f64(&what)?;
        let kernel = match tag {
            KERNEL_TAG_RBF => KernelSpec::Rbf { gamma: param },
            KERNEL_TAG_GATE => KernelSpec::QuantumGate(GateKernelSpec { angle_scale: param }),
            other => {
                return Err(Error::MalformedModel(format!("{what}: kernel tag {other}")))
            }
        };
        learners.push(WeakLearner {
            support_x,
            support_y,
            alphas,
            bias,
            kernel,
        });
    }
    let body_end = r.pos;
    let stored = r.u32("checksum")?;
    if r.pos != bytes.len() {
        return Err(Error::MalformedModel(format!(
            "{} trailing bytes after checksum",
            bytes.len() - r.pos
        )));
    }
    let computed = crc32fast::hash(&bytes[..body_end]);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }
    let model = ModelFile {
        format_version: version,
        header,
        learners,
    };
    model.validate()?;
    Ok(model)
}

pub fn save_model(model: &ModelFile, path: &Path) -> Result<()> {
    let bytes = encode_model(model)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_learner(rng: &mut ChaCha8Rng, n: usize, gate: bool) -> WeakLearner {
        WeakLearner {
            support_x: (0..n).map(|_| std::array::from_fn(|_| rng.gen())).collect(),
            support_y: (0..n)
                .map(|_| if rng.gen() { Label::Oil } else { Label::Water })
                .collect(),
            alphas: (0..n).map(|_| rng.gen::<f64>() * 3.0).collect(),
            bias: rng.gen::<f64>() - 0.5,
            kernel: if gate {
                KernelSpec::QuantumGate(GateKernelSpec::default())
            } else {
                KernelSpec::Rbf { gamma: 1.0 / 3.0 }
            },
        }
    }

    fn model(learners: Vec<WeakLearner>) -> ModelFile {
        ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            header: ModelHeader {
                backend: Backend::Annealed,
                ensemble_config: StoredEnsembleConfig {
                    n_learners: learners.len(),
                    subset_size: 40,
                    aggregation: Aggregation::MeanDecision,
                },
                feature_scaler: FeatureScaler {
                    shift: [0.1, 0.2, 0.0, 0.0, 0.3],
                    scale: [0.7, 12.5, 3.1, 0.4, 1.0 / 7.0],
                },
                preprocess: PreprocessConfig::default(),
                working_size: [256, 256],
                rng_seed: 42,
            },
            learners,
        }
    }

    #[test]
    fn empty_ensemble_round_trips() {
        let m = model(vec![]);
        assert_eq!(decode_model(&encode_model(&m).unwrap()).unwrap(), m);
    }

    #[test]
    fn large_ensemble_round_trips_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let learners = (0..500).map(|i| random_learner(&mut rng, 40, i % 2 == 0)).collect();
        let m = model(learners);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.bin");
        save_model(&m, &p).unwrap();
        let back = load_model(&p).unwrap();
        for (a, b) in m.learners.iter().zip(&back.learners) {
            for (x, y) in a.alphas.iter().zip(&b.alphas) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        assert_eq!(back, m);
        assert_eq!(encode_model(&back).unwrap(), std::fs::read(&p).unwrap());
    }

    #[test]
    fn version_mismatch_detected() {
        let mut bytes = encode_model(&model(vec![])).unwrap();
        bytes[8..12].copy_from_slice(&999u32.to_le_bytes());
        assert!(matches!(
            decode_model(&bytes),
            Err(Error::VersionMismatch { found: 999, .. })
        ));
    }

    #[test]
    fn truncation_and_corruption_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = model(vec![random_learner(&mut rng, 5, false)]);
        let bytes = encode_model(&m).unwrap();
        for cut in [3, 20, bytes.len() - 40, bytes.len() - 1] {
            assert!(matches!(
                decode_model(&bytes[..cut]),
                Err(Error::Truncated(_))
            ));
        }
        let mut flipped = bytes.clone();
        let k = bytes.len() - 30;
        flipped[k] ^= 0x10;
        assert!(matches!(decode_model(&flipped), Err(Error::Checksum { .. })));
    }

    #[test]
    fn header_is_canonical_json() {
        let m = model(vec![]);
        let bytes = encode_model(&m).unwrap();
        let len = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        let text = std::str::from_utf8(&bytes[16..16 + len]).unwrap();
        assert!(text.starts_with("{\"backend\":\"annealed\",\"ensemble_config\":"));
        assert!(!text.contains(' '));
    }

    proptest::proptest! {
        #[test]
        fn arbitrary_alphas_survive(alphas in proptest::collection::vec(proptest::num::f64::NORMAL, 0..30), bias in proptest::num::f64::ANY.prop_filter("finite", |b| b.is_finite())) {
            let n = alphas.len();
            let learner = WeakLearner {
                support_x: vec![[0.25; N_FEATURES]; n],
                support_y: vec![Label::Oil; n],
                alphas: alphas.iter().map(|a| a.abs()).collect(),
                bias,
                kernel: KernelSpec::Rbf { gamma: 2.0 },
            };
            let m = model(vec![learner]);
            let back = decode_model(&encode_model(&m).unwrap()).unwrap();
            proptest::prop_assert_eq!(back, m);
        }
    }
    use proptest::strategy::Strategy;
}
