//! Run configuration documents (TOML).
//!
//! Units: times in seconds, lengths in metres, angles in radians, gains
//! `nu1` in 1/s and `nu2` in 1/s². Unknown keys are rejected everywhere.
//!
//! ```toml
//! schema_version = 1
//!
//! [solver]                 # all optional
//! nu1 = 500.0
//! nu2 = 2500.0
//! dt = 1e-4
//! integrator = "rk4"       # rk4 | euler
//! activation = "power_sigmoid"   # power_sigmoid | linear
//! exponent = 3
//! variant = "both"         # ie | z | both
//!
//! [output]                 # all optional
//! name = "starfish"        # file stem, defaults to the config file stem
//! dir = "out"
//! log_stride = 100
//!
//! [track]
//! scheme = "repetitive_motion"   # repetitive_motion | hybrid_torque
//! chain = "spatial6"             # preset name, or chain_file = "arm.chain"
//! theta0 = [1.675, 2.843, -3.216, 4.187, -1.710, -2.650]
//! duration = 8.0                 # defaults to path.period
//! seed = 0
//! y0 = "oracle"                  # oracle | zero
//! y0_jitter = 0.0
//! [track.path]
//! shape = { kind = "starfish", r0 = 1.0, r1 = 0.2 }   # circle | starfish | butterfly
//! scale = 0.1
//! period = 8.0
//! timing = "smoothstart"         # smoothstart | uniform
//! # center = [x, y, z]           # omitted: the path starts at F(theta0)
//! # e1 = [1, 0, 0]               # plane basis, 3-D tasks only
//! # e2 = [0, 1, 0]
//! [track.noise]
//! kind = "paper_sinusoid"        # none | constant | ramp | sinusoid_vector | paper_sinusoid
//! [track.repetitive_motion]
//! kappa = 4.0
//! feedback_gain = 1.2
//! # [track.hybrid_torque] mu, alpha, beta, xi1, xi2
//!
//! [verify]                       # optional in its entirety
//! gains = [[3.0, 2.0], [2.0, 1.0], [2.0, 4.0]]
//! [[verify.noise]]
//! variant = "ie"
//! nu1 = 500.0
//! nu2 = 2500.0
//! ramp = true
//! magnitude = 5.0
//!
//! [solve]                        # matrices row by row, entries are expressions of t
//! q = [["1", "0"], ["0", "1"]]
//! p = ["0", "0"]
//! j = [["1", "1"]]
//! b = ["2"]
//! duration = 1.0
//! y0 = [0.0, 0.0, 0.0]           # defaults to zeros
//! ```

use std::path::{Path, PathBuf};

use iernn::activation::{ActivationKind, ActivationSpec};
use iernn::harness::{
    default_noise_cases, InitialGuess, NoiseCase, SchemeConfig, TrackingConfig, DEFAULT_GAINS,
};
use iernn::paths::{PathShape, PathSpec, Timing};
use iernn::robot::{forward_kinematics, parse_chain, preset, SerialChain};
use iernn::schemes::{HybridTorqueParams, RepetitiveMotionParams};
use iernn::{Integrator, NeuralConfig, NoiseModel, Variant};
use nalgebra::DVector;
use serde::Deserialize;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantChoice {
    Ie,
    Z,
    Both,
}

impl VariantChoice {
    pub fn variants(self) -> Vec<Variant> {
        match self {
            VariantChoice::Ie => vec![Variant::IeRnn],
            VariantChoice::Z => vec![Variant::ZRnn],
            VariantChoice::Both => vec![Variant::IeRnn, Variant::ZRnn],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantName {
    Ie,
    Z,
}

impl From<VariantName> for Variant {
    fn from(v: VariantName) -> Self {
        match v {
            VariantName::Ie => Variant::IeRnn,
            VariantName::Z => Variant::ZRnn,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputSection,
    pub verify: Option<VerifySection>,
    pub track: Option<TrackSection>,
    pub solve: Option<SolveSection>,
    /// Directory of the config file; relative paths resolve against it.
    #[serde(skip)]
    pub base_dir: PathBuf,
    /// File stem of the config document, the default output name.
    #[serde(skip)]
    pub stem: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub nu1: f64,
    pub nu2: f64,
    pub dt: f64,
    pub integrator: Integrator,
    pub activation: ActivationKind,
    pub exponent: u32,
    pub variant: Option<VariantChoice>,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = NeuralConfig::default();
        SolverSection {
            nu1: d.nu1,
            nu2: d.nu2,
            dt: d.dt,
            integrator: d.integrator,
            activation: d.activation.kind,
            exponent: d.activation.exponent,
            variant: None,
        }
    }
}

impl SolverSection {
    pub fn neural(&self, variant: Variant) -> Result<NeuralConfig, String> {
        let activation = match self.activation {
            ActivationKind::Linear => ActivationSpec::linear(),
            ActivationKind::PowerSigmoid => {
                ActivationSpec::power_sigmoid(self.exponent).map_err(|e| format!("solver.exponent: {e}"))?
            }
        };
        let cfg = NeuralConfig {
            nu1: self.nu1,
            nu2: self.nu2,
            activation,
            dt: self.dt,
            integrator: self.integrator,
            variant,
        };
        // ν₂ must be positive even for Z-RNN so one config serves both variants
        cfg.with_variant(Variant::IeRnn).validate().map_err(|e| format!("solver: {e}"))?;
        Ok(cfg)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub name: Option<String>,
    pub dir: Option<PathBuf>,
    pub log_stride: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            name: None,
            dir: None,
            log_stride: 100,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    #[serde(default = "default_gains")]
    pub gains: Vec<[f64; 2]>,
    #[serde(default = "default_cases")]
    pub noise: Vec<NoiseCaseSection>,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection {
            gains: default_gains(),
            noise: default_cases(),
        }
    }
}

fn default_gains() -> Vec<[f64; 2]> {
    DEFAULT_GAINS.iter().map(|&(a, b)| [a, b]).collect()
}

fn default_cases() -> Vec<NoiseCaseSection> {
    default_noise_cases()
        .into_iter()
        .map(|c| NoiseCaseSection {
            variant: match c.variant {
                Variant::IeRnn => VariantName::Ie,
                Variant::ZRnn => VariantName::Z,
            },
            nu1: c.nu1,
            nu2: c.nu2,
            ramp: c.ramp,
            magnitude: c.magnitude,
        })
        .collect()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseCaseSection {
    pub variant: VariantName,
    pub nu1: f64,
    pub nu2: f64,
    #[serde(default)]
    pub ramp: bool,
    pub magnitude: f64,
}

/// Gain pairs and noise cases ready for `verify_theorems`.
pub type Resolved = (Vec<(f64, f64)>, Vec<NoiseCase>);

impl VerifySection {
    pub fn resolve(&self) -> Result<Resolved, String> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        let mut gains = Vec::with_capacity(self.gains.len());
        for (i, &[nu1, nu2]) in self.gains.iter().enumerate() {
            if !positive(nu1) || !positive(nu2) {
                return Err(format!("verify.gains[{i}]: nu1 and nu2 must be positive, got ({nu1}, {nu2})"));
            }
            gains.push((nu1, nu2));
        }
        let mut cases = Vec::with_capacity(self.noise.len());
        for (i, c) in self.noise.iter().enumerate() {
            if !positive(c.nu1) || !positive(c.nu2) {
                return Err(format!(
                    "verify.noise[{i}]: nu1 and nu2 must be positive, got ({}, {})",
                    c.nu1, c.nu2
                ));
            }
            if !c.magnitude.is_finite() {
                return Err(format!("verify.noise[{i}].magnitude must be finite"));
            }
            cases.push(NoiseCase {
                variant: c.variant.into(),
                nu1: c.nu1,
                nu2: c.nu2,
                ramp: c.ramp,
                magnitude: c.magnitude,
            });
        }
        Ok((gains, cases))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    RepetitiveMotion,
    HybridTorque,
}

#[derive(Debug, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSection {
    #[default]
    None,
    Constant {
        base: Vec<f64>,
    },
    Ramp {
        base: Vec<f64>,
    },
    SinusoidVector {
        base: Vec<f64>,
        /// rad/s
        frequencies: Vec<f64>,
        phases: Vec<f64>,
    },
    /// Nine slow sinusoids with arguments `k·t/(πT)`, cut to the system size.
    PaperSinusoid {
        /// Use the printed `t·π·T` argument for the seventh component.
        #[serde(default)]
        literal_seventh: bool,
    },
}

impl NoiseSection {
    pub fn model(&self, period: f64, dim: usize) -> NoiseModel {
        match self {
            NoiseSection::None => NoiseModel::None,
            NoiseSection::Constant { base } => NoiseModel::constant(base),
            NoiseSection::Ramp { base } => NoiseModel::ramp(base),
            NoiseSection::SinusoidVector {
                base,
                frequencies,
                phases,
            } => NoiseModel::SinusoidVector {
                base: base.clone(),
                frequencies: frequencies.clone(),
                phases: phases.clone(),
            },
            NoiseSection::PaperSinusoid { literal_seventh } => {
                NoiseModel::paper_sinusoid(period, dim, *literal_seventh)
            }
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSection {
    pub shape: PathShape,
    pub scale: f64,
    pub period: f64,
    #[serde(default)]
    pub timing: Timing,
    pub center: Option<Vec<f64>>,
    pub e1: Option<Vec<f64>>,
    pub e2: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RmSection {
    pub kappa: f64,
    pub feedback_gain: f64,
}

impl Default for RmSection {
    fn default() -> Self {
        RmSection {
            kappa: RepetitiveMotionParams::DEFAULT_KAPPA,
            feedback_gain: RepetitiveMotionParams::DEFAULT_FEEDBACK_GAIN,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HtSection {
    pub mu: f64,
    pub alpha: f64,
    pub beta: f64,
    pub xi1: f64,
    pub xi2: f64,
}

impl Default for HtSection {
    fn default() -> Self {
        HtSection {
            mu: HybridTorqueParams::DEFAULT_MU,
            alpha: HybridTorqueParams::DEFAULT_ALPHA,
            beta: HybridTorqueParams::DEFAULT_BETA,
            xi1: HybridTorqueParams::DEFAULT_XI,
            xi2: HybridTorqueParams::DEFAULT_XI,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackSection {
    pub scheme: SchemeName,
    pub chain: Option<String>,
    pub chain_file: Option<PathBuf>,
    pub theta0: Vec<f64>,
    pub duration: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub y0: InitialGuess,
    #[serde(default)]
    pub y0_jitter: f64,
    pub path: PathSection,
    #[serde(default)]
    pub noise: NoiseSection,
    pub repetitive_motion: Option<RmSection>,
    pub hybrid_torque: Option<HtSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveSection {
    pub q: Vec<Vec<String>>,
    pub p: Vec<String>,
    pub j: Vec<Vec<String>>,
    pub b: Vec<String>,
    pub duration: f64,
    pub y0: Option<Vec<f64>>,
    #[serde(default)]
    pub noise: NoiseSection,
}

impl RunConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self, String> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| format!("{}: {e}", origin.display()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(format!(
                "{}: schema_version {} is not supported (expected {SCHEMA_VERSION})",
                origin.display(),
                cfg.schema_version
            ));
        }
        cfg.base_dir = origin.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.stem = origin
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run".into());
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text, path)
    }

    pub fn name(&self) -> &str {
        self.output.name.as_deref().unwrap_or(&self.stem)
    }

    fn chain(&self, track: &TrackSection) -> Result<SerialChain, String> {
        match (&track.chain, &track.chain_file) {
            (Some(name), None) => preset(name).map_err(|e| format!("track.chain: {e}")),
            (None, Some(file)) => {
                let path = self.base_dir.join(file);
                let text = std::fs::read_to_string(&path).map_err(|e| format!("track.chain_file: {}: {e}", path.display()))?;
                parse_chain(&text).map_err(|e| format!("track.chain_file: {}: {e}", path.display()))
            }
            _ => Err("track: exactly one of `chain` and `chain_file` is required".into()),
        }
    }

    /// Builds the tracking run for one solver variant.
    pub fn tracking(&self, variant: Variant, seed: Option<u64>) -> Result<TrackingConfig, String> {
        let track = self.track.as_ref().ok_or("missing [track] section")?;
        let chain = self.chain(track)?;
        let theta0 = DVector::from_vec(track.theta0.clone());
        if theta0.len() != chain.n_joints() {
            return Err(format!(
                "track.theta0 has {} entries but chain `{}` has {} joints",
                theta0.len(),
                chain.name(),
                chain.n_joints()
            ));
        }
        let p = &track.path;
        let m = chain.task_dim();
        let vector = |key: &str, v: &Option<Vec<f64>>, default: Vec<f64>| -> Result<DVector<f64>, String> {
            let v = v.clone().unwrap_or(default);
            if v.len() != m {
                return Err(format!("track.path.{key} needs {m} entries for a {m}-D task"));
            }
            Ok(DVector::from_vec(v))
        };
        let unit = |i: usize| {
            let mut v = vec![0.0; m];
            v[i] = 1.0;
            v
        };
        let (e1, e2) = (vector("e1", &p.e1, unit(0))?, vector("e2", &p.e2, unit(1))?);
        let path = match &p.center {
            Some(_) => PathSpec::with_plane(p.shape, vector("center", &p.center, vec![])?, p.scale, p.period, p.timing, e1, e2),
            None => PathSpec::anchored(p.shape, &forward_kinematics(&chain, &theta0), p.scale, p.period, p.timing, e1, e2),
        }
        .map_err(|e| format!("track.path: {e}"))?;
        let scheme = match track.scheme {
            SchemeName::RepetitiveMotion => {
                let s = track.repetitive_motion.clone().unwrap_or_default();
                let mut params = RepetitiveMotionParams::new(chain, path, theta0);
                params.kappa = s.kappa;
                params.feedback_gain = s.feedback_gain;
                SchemeConfig::RepetitiveMotion(params)
            }
            SchemeName::HybridTorque => {
                let s = track.hybrid_torque.clone().unwrap_or_default();
                let mut params = HybridTorqueParams::new(chain, path, theta0);
                params.mu = s.mu;
                params.alpha = s.alpha;
                params.beta = s.beta;
                params.xi1 = s.xi1;
                params.xi2 = s.xi2;
                SchemeConfig::HybridTorque(params)
            }
        };
        let dim = scheme.chain().n_joints() + scheme.chain().task_dim();
        let mut cfg = TrackingConfig::new(scheme);
        cfg.solver = self.solver.neural(variant)?;
        cfg.duration = track.duration.unwrap_or(p.period);
        cfg.noise = track.noise.model(p.period, dim);
        cfg.log_stride = self.output.log_stride;
        cfg.rng_seed = seed.unwrap_or(track.seed);
        cfg.y0 = track.y0;
        cfg.y0_jitter = track.y0_jitter;
        cfg.validate().map_err(|e| format!("track: {e}"))?;
        cfg.scheme.build().map_err(|e| format!("track: {e}"))?;
        Ok(cfg)
    }
}
