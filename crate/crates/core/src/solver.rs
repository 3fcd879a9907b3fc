//! Integration-enhanced (IE-RNN) and zeroing (Z-RNN) neural dynamics.
//!
//! Both drive the residual `ε = A·Y − Z` of a time-varying matrix equation
//! towards zero. In implicit form
//!
//! ```text
//! A·Ẏ = −ν₁Φ(A·Y − Z) + Ż − ν₂∫₀ᵗε dτ − Ȧ·Y + ΔN(t)
//! ```
//!
//! and Z-RNN drops the integral term. The running integral is carried as part
//! of the integrated state so it sees the same quadrature order as `Y`.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activation::ActivationSpec;
use crate::error::{Error, Result};
use crate::integrate::Integrator;
use crate::noise::NoiseModel;
use crate::qp::{KktSample, TimeVaryingSystem};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    #[default]
    IeRnn,
    ZRnn,
}

impl Variant {
    pub fn label(self) -> &'static str {
        match self {
            Variant::IeRnn => "ie",
            Variant::ZRnn => "z",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeuralConfig {
    /// Proportional gain ν₁ (1/s).
    pub nu1: f64,
    /// Integral gain ν₂ (1/s²); unused by Z-RNN.
    pub nu2: f64,
    pub activation: ActivationSpec,
    /// Step size (s).
    pub dt: f64,
    pub integrator: Integrator,
    pub variant: Variant,
}

impl Default for NeuralConfig {
    fn default() -> Self {
        NeuralConfig {
            nu1: 500.0,
            nu2: 2500.0,
            activation: ActivationSpec::default(),
            dt: 1e-4,
            integrator: Integrator::Rk4,
            variant: Variant::IeRnn,
        }
    }
}

impl NeuralConfig {
    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu1 > 0.0 && self.nu1.is_finite()) {
            return Err(Error::config(format!("nu1 must be positive, got {}", self.nu1)));
        }
        if self.variant == Variant::IeRnn && !(self.nu2 > 0.0 && self.nu2.is_finite()) {
            return Err(Error::config(format!("nu2 must be positive, got {}", self.nu2)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config(format!("dt must be positive, got {}", self.dt)));
        }
        self.activation.validate()
    }

    /// Non-fatal diagnostics, currently the explicit-Euler stability guard.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.integrator == Integrator::Euler && self.dt * self.nu1 >= 2.0 {
            out.push(format!(
                "euler step dt*nu1 = {} >= 2; the residual dynamics are unstable",
                self.dt * self.nu1
            ));
        }
        out
    }
}

/// Solver state: `Y(t)` and the running residual integral.
#[derive(Clone, Debug, PartialEq)]
pub struct NeuralState {
    pub t: f64,
    pub y: DVector<f64>,
    pub eps_integral: DVector<f64>,
}

impl NeuralState {
    pub fn new(t: f64, y: DVector<f64>) -> Self {
        let eps_integral = DVector::zeros(y.len());
        NeuralState { t, y, eps_integral }
    }
}

/// `Ẏ` together with the residual it was computed from.
#[derive(Clone, Debug, PartialEq)]
pub struct NeuralRate {
    pub dy: DVector<f64>,
    pub eps: DVector<f64>,
}

/// Right-hand side of the neural dynamics for given `A, Z, Ȧ, Ż`.
#[allow(clippy::too_many_arguments)]
pub fn neural_rate(
    kkt: &KktSample,
    kkt_rate: &KktSample,
    y: &DVector<f64>,
    eps_integral: &DVector<f64>,
    t: f64,
    cfg: &NeuralConfig,
    variant: Variant,
    noise: &NoiseModel,
) -> Result<NeuralRate> {
    let eps = &kkt.a * y - &kkt.z;
    let mut rhs = -cfg.activation.apply_vec(&eps) * cfg.nu1 + &kkt_rate.z;
    if variant == Variant::IeRnn {
        rhs -= eps_integral * cfg.nu2;
    }
    rhs -= &kkt_rate.a * y;
    rhs += noise.eval(t, y.len());
    let dy = kkt.a.clone().lu().solve(&rhs).ok_or(Error::Singular { t })?;
    Ok(NeuralRate { dy, eps })
}

fn derivative<S: TimeVaryingSystem>(
    sys: &S,
    state: &NeuralState,
    cfg: &NeuralConfig,
    variant: Variant,
    noise: &NoiseModel,
) -> Result<DVector<f64>> {
    check_state(sys.dim(), state)?;
    let kkt = sys.sample(state.t);
    let rate = sys.sample_rate(state.t);
    neural_rate(&kkt, &rate, &state.y, &state.eps_integral, state.t, cfg, variant, noise)
        .map(|r| r.dy)
}

fn check_state(dim: usize, state: &NeuralState) -> Result<()> {
    if state.y.len() != dim || state.eps_integral.len() != dim {
        return Err(Error::DimensionMismatch {
            sampler: "state",
            expected: (dim, dim),
            found: (state.y.len(), state.eps_integral.len()),
        });
    }
    Ok(())
}

/// `Ẏ` of the IE-RNN at `state`.
pub fn ie_rnn_derivative<S: TimeVaryingSystem>(
    sys: &S,
    state: &NeuralState,
    cfg: &NeuralConfig,
    noise: &NoiseModel,
) -> Result<DVector<f64>> {
    derivative(sys, state, cfg, Variant::IeRnn, noise)
}

/// `Ẏ` of the Z-RNN at `state`; `eps_integral` is ignored.
pub fn z_rnn_derivative<S: TimeVaryingSystem>(
    sys: &S,
    state: &NeuralState,
    cfg: &NeuralConfig,
    noise: &NoiseModel,
) -> Result<DVector<f64>> {
    derivative(sys, state, cfg, Variant::ZRnn, noise)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub y: DVector<f64>,
    pub eps: DVector<f64>,
    pub eps_integral: DVector<f64>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AbortReason {
    #[error("invalid input: {0}")]
    Invalid(Error),
    #[error("solver failure: {0}")]
    Solver(Error),
    #[error("non-finite state component")]
    NonFinite,
}

/// A run that stopped early; carries everything recorded up to the failure.
#[derive(Debug, Error, Clone)]
#[error("trajectory aborted at t={t}: {reason}")]
pub struct TrajectoryAbort {
    pub t: f64,
    pub reason: AbortReason,
    pub samples: Vec<TrajectorySample>,
    /// Last state whose components were all finite.
    pub last_finite: Option<NeuralState>,
}

/// Fixed-step integration of `(Y, ∫ε)` from `t = 0` to `t_end`, recording a
/// sample every `sample_every` steps (and at the final step).
pub fn solve_trajectory<S: TimeVaryingSystem>(
    sys: &S,
    y0: &DVector<f64>,
    cfg: &NeuralConfig,
    noise: &NoiseModel,
    t_end: f64,
    sample_every: usize,
) -> Result<Vec<TrajectorySample>, TrajectoryAbort> {
    let invalid = |e: Error| TrajectoryAbort {
        t: 0.0,
        reason: AbortReason::Invalid(e),
        samples: Vec::new(),
        last_finite: None,
    };
    let dim = sys.dim();
    cfg.validate().map_err(invalid)?;
    noise.validate(dim).map_err(invalid)?;
    if y0.len() != dim {
        return Err(invalid(Error::DimensionMismatch {
            sampler: "y0",
            expected: (dim, 1),
            found: (y0.len(), 1),
        }));
    }
    if sample_every == 0 {
        return Err(invalid(Error::config("sample_every must be at least 1")));
    }
    let n_steps = step_count(t_end, cfg.dt).map_err(invalid)?;
    for w in cfg.warnings() {
        log::warn!("{w}");
    }

    let variant = cfg.variant;
    let rhs = |t: f64, s: &DVector<f64>| -> Result<DVector<f64>> {
        let y = s.rows(0, dim).into_owned();
        let theta = s.rows(dim, dim).into_owned();
        let kkt = sys.sample(t);
        let rate = sys.sample_rate(t);
        let r = neural_rate(&kkt, &rate, &y, &theta, t, cfg, variant, noise)?;
        let mut out = DVector::zeros(2 * dim);
        out.rows_mut(0, dim).copy_from(&r.dy);
        out.rows_mut(dim, dim).copy_from(&r.eps);
        Ok(out)
    };

    let mut state = DVector::zeros(2 * dim);
    state.rows_mut(0, dim).copy_from(y0);
    let mut samples = Vec::with_capacity(n_steps / sample_every + 2);
    let record = |t: f64, s: &DVector<f64>| {
        let y = s.rows(0, dim).into_owned();
        let kkt = sys.sample(t);
        TrajectorySample {
            t,
            eps: &kkt.a * &y - &kkt.z,
            y,
            eps_integral: s.rows(dim, dim).into_owned(),
        }
    };
    let split = |t: f64, s: &DVector<f64>| NeuralState {
        t,
        y: s.rows(0, dim).into_owned(),
        eps_integral: s.rows(dim, dim).into_owned(),
    };

    samples.push(record(0.0, &state));
    for k in 0..n_steps {
        let t = k as f64 * cfg.dt;
        let next = match cfg.integrator.step(&rhs, t, &state, cfg.dt) {
            Ok(next) => next,
            Err(e) => {
                return Err(TrajectoryAbort {
                    t,
                    reason: AbortReason::Solver(e),
                    samples,
                    last_finite: Some(split(t, &state)),
                })
            }
        };
        let t_next = (k + 1) as f64 * cfg.dt;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(TrajectoryAbort {
                t: t_next,
                reason: AbortReason::NonFinite,
                samples,
                last_finite: Some(split(t, &state)),
            });
        }
        state = next;
        if (k + 1) % sample_every == 0 || k + 1 == n_steps {
            samples.push(record(t_next, &state));
        }
    }
    Ok(samples)
}

/// Number of steps of size `dt` covering `duration`; `dt` must divide it.
pub fn step_count(duration: f64, dt: f64) -> Result<usize> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::config(format!("duration must be positive, got {duration}")));
    }
    let n = (duration / dt).round();
    if n < 1.0 || (n * dt - duration).abs() > 1e-9 * duration.max(1.0) {
        return Err(Error::config(format!(
            "step {dt} does not divide duration {duration}"
        )));
    }
    Ok(n as usize)
}

/// `center` plus a seeded uniform offset in `[-half_width, half_width]` per
/// component.
pub fn perturbed_initial_state(center: &DVector<f64>, half_width: f64, seed: u64) -> DVector<f64> {
    if half_width == 0.0 {
        return center.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    center.map(|c| c + rng.gen_range(-half_width..=half_width))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qp::{assemble_augmented, theoretical_solution, ConstantSystem, FnQp};
    use approx::assert_relative_eq;
    use nalgebra::{dmatrix, dvector, DMatrix};

    fn linear(nu1: f64, nu2: f64, variant: Variant) -> NeuralConfig {
        NeuralConfig {
            nu1,
            nu2,
            activation: ActivationSpec::linear(),
            dt: 1e-4,
            integrator: Integrator::Rk4,
            variant,
        }
    }

    fn scalar_run(cfg: &NeuralConfig, noise: &NoiseModel, y0: f64, t_end: f64) -> Vec<TrajectorySample> {
        let sys = ConstantSystem::scalar(1.0, 0.0);
        solve_trajectory(&sys, &dvector![y0], cfg, noise, t_end, 100).unwrap()
    }

    #[test]
    fn fixed_point_has_zero_rate() {
        let aug = assemble_augmented(FnQp::constant(
            DMatrix::identity(2, 2),
            dvector![0.5, -1.0],
            dmatrix![1.0, 1.0],
            dvector![2.0],
        ))
        .unwrap();
        let ystar = theoretical_solution(&aug, 0.0).unwrap().stacked();
        let state = NeuralState::new(0.0, ystar);
        let cfg = NeuralConfig::default();
        let ie = ie_rnn_derivative(&aug, &state, &cfg, &NoiseModel::None).unwrap();
        let z = z_rnn_derivative(&aug, &state, &cfg, &NoiseModel::None).unwrap();
        assert!(ie.norm() <= 1e-10);
        assert!(z.norm() <= 1e-10);
    }

    #[test]
    fn scalar_case_one_value_at_one_second() {
        let s = scalar_run(&linear(3.0, 2.0, Variant::IeRnn), &NoiseModel::None, 1.0, 1.0);
        let last = s.last().unwrap();
        assert_relative_eq!(last.t, 1.0);
        let exact = 2.0 * (-2.0f64).exp() - (-1.0f64).exp();
        assert_relative_eq!(last.eps[0], exact, epsilon = 1e-10);
        assert!((last.eps[0] + 0.09721).abs() < 1e-5);
    }

    #[test]
    fn scalar_case_two_crosses_zero_at_one_second() {
        let s = scalar_run(&linear(2.0, 1.0, Variant::IeRnn), &NoiseModel::None, 1.0, 1.0);
        assert!(s.last().unwrap().eps[0].abs() < 1e-10);
    }

    #[test]
    fn zeroing_dynamics_decay_exponentially() {
        let s = scalar_run(&linear(1.0, 0.0, Variant::ZRnn), &NoiseModel::None, 1.0, 2.0);
        for sample in &s {
            assert_relative_eq!(sample.y[0], (-sample.t).exp(), epsilon = 1e-12);
        }
    }

    #[test]
    fn zeroing_constant_noise_floor() {
        let s = scalar_run(&linear(10.0, 0.0, Variant::ZRnn), &NoiseModel::constant(&[3.0]), 0.0, 3.0);
        assert_relative_eq!(s.last().unwrap().eps[0], 0.3, max_relative = 1e-6);
    }

    #[test]
    fn stays_on_solution_of_constant_problem() {
        let aug = assemble_augmented(FnQp::constant(
            dmatrix![2.0, 0.5; 0.5, 1.0],
            dvector![1.0, -1.0],
            dmatrix![1.0, 2.0],
            dvector![0.5],
        ))
        .unwrap();
        let y0 = theoretical_solution(&aug, 0.0).unwrap().stacked();
        let s = solve_trajectory(&aug, &y0, &NeuralConfig::default(), &NoiseModel::None, 0.5, 50).unwrap();
        assert!(s.iter().all(|x| x.eps.norm() <= 1e-9));
    }

    #[test]
    fn non_finite_aborts_with_partial_samples() {
        // ẏ = +y blows past f64 range well before t_end with a huge gain.
        let cfg = NeuralConfig {
            nu1: -1.0,
            ..linear(1.0, 1.0, Variant::ZRnn)
        };
        let sys = ConstantSystem::scalar(1.0, 0.0);
        let err = solve_trajectory(&sys, &dvector![1.0], &cfg, &NoiseModel::None, 1.0, 1).unwrap_err();
        assert!(matches!(err.reason, AbortReason::Invalid(_)));

        let cfg = NeuralConfig {
            nu1: 1e4,
            dt: 1e-2,
            integrator: Integrator::Euler,
            ..linear(1.0, 1.0, Variant::ZRnn)
        };
        assert!(!cfg.warnings().is_empty());
        let err = solve_trajectory(&sys, &dvector![1.0], &cfg, &NoiseModel::None, 10.0, 1).unwrap_err();
        assert_eq!(err.reason, AbortReason::NonFinite);
        assert!(!err.samples.is_empty());
        let last = err.last_finite.unwrap();
        assert!(last.y.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn rejects_non_dividing_step() {
        assert!(step_count(1.0, 0.3).is_err());
        assert_eq!(step_count(8.0, 1e-4).unwrap(), 80_000);
    }

    #[test]
    fn perturbation_is_seeded() {
        let c = dvector![1.0, 2.0, 3.0];
        let a = perturbed_initial_state(&c, 0.5, 7);
        assert_eq!(a, perturbed_initial_state(&c, 0.5, 7));
        assert!((a - &c).amax() <= 0.5);
        assert_ne!(perturbed_initial_state(&c, 0.5, 8), perturbed_initial_state(&c, 0.5, 7));
    }
}
