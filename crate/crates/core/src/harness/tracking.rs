//! Closed-loop tracking: scheme QP, neural solver and joint integration.
//!
//! The integrated state is `[q; 𝒴; ∫ε]` with `q = θ` for velocity-level
//! schemes (`θ̇ = x`) and `q = (θ, θ̇)` for acceleration-level schemes
//! (`θ̈ = x`). One fixed-step integrator advances all parts together, so
//! every stage evaluates the QP at the joint state of that stage.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::log::{LogRow, TrajectoryLog};
use crate::error::{Error, Result};
use crate::noise::NoiseModel;
use crate::paths::PathSpec;
use crate::qp::{row_rank_ratio, solve_kkt, KktSample, RANK_TOLERANCE};
use crate::robot::{jacobian, JointState, SerialChain};
use crate::schemes::{
    torque_output, HybridTorque, HybridTorqueParams, Level, RepetitiveMotion, RepetitiveMotionParams, Scheme,
};
use crate::solver::{neural_rate, perturbed_initial_state, step_count, NeuralConfig};

#[derive(Clone, Debug, PartialEq)]
pub enum SchemeConfig {
    RepetitiveMotion(RepetitiveMotionParams),
    HybridTorque(HybridTorqueParams),
}

impl SchemeConfig {
    pub fn build(&self) -> Result<Box<dyn Scheme>> {
        Ok(match self {
            SchemeConfig::RepetitiveMotion(p) => Box::new(RepetitiveMotion::new(p.clone())?),
            SchemeConfig::HybridTorque(p) => Box::new(HybridTorque::new(p.clone())?),
        })
    }

    pub fn path(&self) -> &PathSpec {
        match self {
            SchemeConfig::RepetitiveMotion(p) => &p.path,
            SchemeConfig::HybridTorque(p) => &p.path,
        }
    }

    pub fn chain(&self) -> &SerialChain {
        match self {
            SchemeConfig::RepetitiveMotion(p) => &p.chain,
            SchemeConfig::HybridTorque(p) => &p.chain,
        }
    }

    pub fn theta0(&self) -> &DVector<f64> {
        match self {
            SchemeConfig::RepetitiveMotion(p) => &p.theta0,
            SchemeConfig::HybridTorque(p) => &p.theta0,
        }
    }
}

/// Centre of the initial neural state `𝒴(0)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialGuess {
    Zero,
    /// Instantaneous KKT solution at `t = 0`.
    #[default]
    Oracle,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackingConfig {
    pub scheme: SchemeConfig,
    pub solver: NeuralConfig,
    pub noise: NoiseModel,
    /// Simulated time (s); a multiple of `solver.dt`.
    pub duration: f64,
    /// Steps between logged samples; must divide the step count.
    pub log_stride: usize,
    pub rng_seed: u64,
    pub y0: InitialGuess,
    /// Half-width of the seeded uniform perturbation added to `𝒴(0)`.
    pub y0_jitter: f64,
}

impl TrackingConfig {
    /// One noise-free period of the path with default solver settings.
    pub fn new(scheme: SchemeConfig) -> Self {
        let duration = scheme.path().period();
        TrackingConfig {
            scheme,
            solver: NeuralConfig::default(),
            noise: NoiseModel::None,
            duration,
            log_stride: 100,
            rng_seed: 0,
            y0: InitialGuess::Oracle,
            y0_jitter: 0.0,
        }
    }

    /// Number of integration steps; validates everything except the scheme.
    pub fn validate(&self) -> Result<usize> {
        self.solver.validate()?;
        let chain = self.scheme.chain();
        self.noise.validate(chain.n_joints() + chain.task_dim())?;
        let steps = step_count(self.duration, self.solver.dt)?;
        if self.log_stride == 0 || steps % self.log_stride != 0 {
            return Err(Error::config(format!(
                "log_stride {} must divide the step count {steps}",
                self.log_stride
            )));
        }
        if !(self.y0_jitter >= 0.0 && self.y0_jitter.is_finite()) {
            return Err(Error::config("y0_jitter must be non-negative"));
        }
        Ok(steps)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrackingAbortReason {
    #[error("invalid configuration: {0}")]
    Invalid(Error),
    #[error("solver failure: {0}")]
    Solver(Error),
    #[error("non-finite state component")]
    NonFinite,
    #[error("kinematic singularity (sigma_min/sigma_max = {sigma_ratio:e})")]
    KinematicSingularity { sigma_ratio: f64 },
}

/// A run that stopped early, with the samples logged up to the failure.
#[derive(Debug, Error, Clone)]
#[error("tracking aborted at t={t}: {reason}")]
pub struct TrackingAbort {
    pub t: f64,
    pub reason: TrackingAbortReason,
    pub log: TrajectoryLog,
}

struct Eval {
    deriv: DVector<f64>,
    joints: JointState,
    kkt: KktSample,
}

struct Loop<'a> {
    scheme: &'a dyn Scheme,
    cfg: &'a TrackingConfig,
    n: usize,
    dim: usize,
    q_len: usize,
}

impl Loop<'_> {
    fn eval(&self, t: f64, s: &DVector<f64>) -> Result<Eval> {
        let (n, dim, q_len) = (self.n, self.dim, self.q_len);
        let y = s.rows(q_len, dim).into_owned();
        let integral = s.rows(q_len + dim, dim).into_owned();
        let x = y.rows(0, n).into_owned();
        let theta = s.rows(0, n).into_owned();
        let mut joints = match self.scheme.level() {
            Level::Velocity => JointState {
                theta,
                dtheta: x.clone(),
                ddtheta: DVector::zeros(n),
            },
            Level::Acceleration => JointState {
                theta,
                dtheta: s.rows(n, n).into_owned(),
                ddtheta: x.clone(),
            },
        };
        let kkt = KktSample::assemble(&self.scheme.coefficients(&joints, t));
        let kkt_rate = KktSample::assemble(&self.scheme.coefficient_rates(&joints, t));
        let variant = self.cfg.solver.variant;
        let r = neural_rate(&kkt, &kkt_rate, &y, &integral, t, &self.cfg.solver, variant, &self.cfg.noise)?;

        let mut deriv = DVector::zeros(s.len());
        match self.scheme.level() {
            Level::Velocity => {
                deriv.rows_mut(0, n).copy_from(&x);
                joints.ddtheta = r.dy.rows(0, n).into_owned();
            }
            Level::Acceleration => {
                deriv.rows_mut(0, n).copy_from(&joints.dtheta);
                deriv.rows_mut(n, n).copy_from(&x);
            }
        }
        deriv.rows_mut(q_len, dim).copy_from(&r.dy);
        deriv.rows_mut(q_len + dim, dim).copy_from(&r.eps);
        Ok(Eval { deriv, joints, kkt })
    }

    fn row(&self, t: f64, s: &DVector<f64>) -> Result<LogRow> {
        let e = self.eval(t, s)?;
        let y = s.rows(self.q_len, self.dim).into_owned();
        let chain = self.scheme.chain();
        let (position, _) = chain.position_and_jacobian(&e.joints.theta);
        let eps = &position - self.scheme.path().evaluate(t).position;
        let tau = match self.scheme.level() {
            Level::Acceleration => Some(torque_output(chain, &e.joints)?),
            Level::Velocity => None,
        };
        Ok(LogRow {
            t,
            qp_residual: (&e.kkt.a * &y - &e.kkt.z).norm(),
            rms: eps.norm(),
            theta: e.joints.theta,
            dtheta: e.joints.dtheta,
            ddtheta: e.joints.ddtheta,
            y,
            position,
            eps,
            tau,
        })
    }
}

/// Runs one closed-loop tracking experiment.
pub fn run_tracking(cfg: &TrackingConfig) -> std::result::Result<TrajectoryLog, TrackingAbort> {
    let chain = cfg.scheme.chain();
    let (n, m) = (chain.n_joints(), chain.task_dim());
    let empty = TrajectoryLog::new(n, m, matches!(cfg.scheme, SchemeConfig::HybridTorque(_)));
    let invalid = |e: Error| TrackingAbort {
        t: 0.0,
        reason: TrackingAbortReason::Invalid(e),
        log: empty.clone(),
    };
    let steps = cfg.validate().map_err(invalid)?;
    let scheme = cfg.scheme.build().map_err(invalid)?;
    for w in cfg.solver.warnings() {
        log::warn!("{w}");
    }

    let dim = n + m;
    let q_len = match scheme.level() {
        Level::Velocity => n,
        Level::Acceleration => 2 * n,
    };
    let lp = Loop {
        scheme: scheme.as_ref(),
        cfg,
        n,
        dim,
        q_len,
    };
    let mut state = DVector::zeros(q_len + 2 * dim);
    state.rows_mut(0, n).copy_from(scheme.theta0());

    let mut log = empty;
    let dt = cfg.solver.dt;
    let abort = |t: f64, reason: TrackingAbortReason, log: TrajectoryLog| TrackingAbort { t, reason, log };
    let singular = |s: &DVector<f64>| {
        let ratio = row_rank_ratio(&jacobian(chain, &s.rows(0, n).into_owned()));
        (ratio < RANK_TOLERANCE).then_some(TrackingAbortReason::KinematicSingularity { sigma_ratio: ratio })
    };
    if let Some(reason) = singular(&state) {
        return Err(abort(0.0, reason, log));
    }
    let center = match cfg.y0 {
        InitialGuess::Zero => DVector::zeros(dim),
        InitialGuess::Oracle => {
            let joints = JointState::at_rest(scheme.theta0().clone());
            match solve_kkt(&scheme.coefficients(&joints, 0.0), 0.0) {
                Ok(sol) => sol.stacked(),
                Err(e) => return Err(abort(0.0, TrackingAbortReason::Solver(e), log)),
            }
        }
    };
    let y0 = perturbed_initial_state(&center, cfg.y0_jitter, cfg.rng_seed);
    state.rows_mut(q_len, dim).copy_from(&y0);
    match lp.row(0.0, &state) {
        Ok(r) => log.rows.push(r),
        Err(e) => return Err(abort(0.0, TrackingAbortReason::Solver(e), log)),
    }
    let rhs = |t: f64, s: &DVector<f64>| lp.eval(t, s).map(|e| e.deriv);
    for k in 0..steps {
        let t = k as f64 * dt;
        let t_next = (k + 1) as f64 * dt;
        let next = match cfg.solver.integrator.step(rhs, t, &state, dt) {
            Ok(next) => next,
            Err(e) => return Err(abort(t, TrackingAbortReason::Solver(e), log)),
        };
        if next.iter().any(|v| !v.is_finite()) {
            return Err(abort(t_next, TrackingAbortReason::NonFinite, log));
        }
        if let Some(reason) = singular(&next) {
            return Err(abort(t_next, reason, log));
        }
        state = next;
        if (k + 1) % cfg.log_stride == 0 {
            match lp.row(t_next, &state) {
                Ok(r) => log.rows.push(r),
                Err(e) => return Err(abort(t_next, TrackingAbortReason::Solver(e), log)),
            }
        }
    }
    Ok(log)
}

/// `‖𝒴(t) − 𝒴*(t)‖₂` per logged sample, with `𝒴*` the instantaneous KKT
/// solution at the logged joint state.
pub fn oracle_deviation(scheme: &dyn Scheme, log: &TrajectoryLog) -> Result<Vec<f64>> {
    log.rows
        .iter()
        .map(|row| {
            let joints = JointState {
                theta: row.theta.clone(),
                dtheta: row.dtheta.clone(),
                ddtheta: row.ddtheta.clone(),
            };
            let sample = scheme.coefficients(&joints, row.t);
            let star = solve_kkt(&sample, row.t)?.stacked();
            Ok((&row.y - star).norm())
        })
        .collect()
}
