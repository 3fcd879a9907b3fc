//! Redundancy-resolution schemes expressed as standard-form QPs.
//!
//! Both schemes read the current joint state, so their coefficients are
//! functions of `(θ, θ̇, t)` rather than of `t` alone.
//!
//! Repetitive motion (decision variable `x = θ̇`):
//!
//! ```text
//! Q = I,  P = κ(θ − θ₀),  J = J(θ),  B = ℛ̇ + w(ℛ − F(θ))
//! ```
//!
//! Hybrid torque (decision variable `x = θ̈`):
//!
//! ```text
//! Q = μI + (1−μ)ℐᵀℐ
//! P = (1−μ)ℐᵀ(𝒞 + 𝒢) + μ𝒮,   𝒮 = (ξ₁+ξ₂)θ̇ + ξ₁ξ₂(θ − θ₀)
//! J = J(θ)
//! B = ℛ̈ − J̇θ̇ + α(ℛ̇ − Jθ̇) + β(ℛ − F(θ))
//! ```
//!
//! Minimising `½xᵀQx + Pᵀx` for the hybrid scheme is the weighted sum of
//! `½‖θ̈‖² + 𝒮ᵀθ̈` and `½‖𝒯‖²` with `𝒯 = ℐθ̈ + 𝒞 + 𝒢`.

use std::sync::{Arc, RwLock};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::paths::PathSpec;
use crate::qp::{five_point_rate, QpSample, TimeVaryingQp, DERIVATIVE_STEP};
use crate::robot::{dynamics_terms, jacobian_time_derivative, JointState, SerialChain};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    RepetitiveMotion,
    HybridTorque,
}

/// Which joint derivative the QP decides.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Level {
    /// `x = θ̇`
    Velocity,
    /// `x = θ̈`
    Acceleration,
}

/// A state-coupled QP family.
pub trait Scheme: Send + Sync {
    fn kind(&self) -> SchemeKind;
    fn chain(&self) -> &SerialChain;
    fn path(&self) -> &PathSpec;
    fn theta0(&self) -> &DVector<f64>;

    fn level(&self) -> Level {
        match self.kind() {
            SchemeKind::RepetitiveMotion => Level::Velocity,
            SchemeKind::HybridTorque => Level::Acceleration,
        }
    }

    fn n(&self) -> usize {
        self.chain().n_joints()
    }

    fn m(&self) -> usize {
        self.chain().task_dim()
    }

    /// `Q, P, J, B` at the given joint state and time.
    fn coefficients(&self, joints: &JointState, t: f64) -> QpSample;

    /// Total time derivative of the coefficients along the motion
    /// `(θ + sθ̇, θ̇ + sθ̈, t + s)`, by five-point differences in `s`.
    fn coefficient_rates(&self, joints: &JointState, t: f64) -> QpSample {
        let along = |s: f64| {
            let moved = JointState {
                theta: &joints.theta + &joints.dtheta * s,
                dtheta: &joints.dtheta + &joints.ddtheta * s,
                ddtheta: joints.ddtheta.clone(),
            };
            self.coefficients(&moved, t + s)
        };
        five_point_rate(along, 0.0, DERIVATIVE_STEP)
    }
}

fn check_common(chain: &SerialChain, path: &PathSpec, theta0: &DVector<f64>) -> Result<()> {
    if chain.n_joints() <= chain.task_dim() {
        return Err(Error::config(format!(
            "chain `{}` is not redundant: {} joints for a {}-D task",
            chain.name(),
            chain.n_joints(),
            chain.task_dim()
        )));
    }
    if path.dim() != chain.task_dim() {
        return Err(Error::DimensionMismatch {
            sampler: "path",
            expected: (chain.task_dim(), 1),
            found: (path.dim(), 1),
        });
    }
    if theta0.len() != chain.n_joints() {
        return Err(Error::DimensionMismatch {
            sampler: "theta0",
            expected: (chain.n_joints(), 1),
            found: (theta0.len(), 1),
        });
    }
    if theta0.iter().any(|v| !v.is_finite()) {
        return Err(Error::config("theta0 must be finite"));
    }
    Ok(())
}

fn nonneg(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(format!("{name} must be non-negative, got {v}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RepetitiveMotionParams {
    /// Drift-response magnitude κ (1/s).
    pub kappa: f64,
    /// Scalar task-space feedback gain w (1/s).
    pub feedback_gain: f64,
    pub theta0: DVector<f64>,
    pub path: PathSpec,
    pub chain: SerialChain,
}

impl RepetitiveMotionParams {
    pub const DEFAULT_KAPPA: f64 = 4.0;
    pub const DEFAULT_FEEDBACK_GAIN: f64 = 10.0;

    pub fn new(chain: SerialChain, path: PathSpec, theta0: DVector<f64>) -> Self {
        RepetitiveMotionParams {
            kappa: Self::DEFAULT_KAPPA,
            feedback_gain: Self::DEFAULT_FEEDBACK_GAIN,
            theta0,
            path,
            chain,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::config(format!("kappa must be positive, got {}", self.kappa)));
        }
        nonneg("feedback_gain", self.feedback_gain)?;
        check_common(&self.chain, &self.path, &self.theta0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HybridTorqueParams {
    /// Weight μ ∈ [0, 1] between acceleration and torque norms.
    pub mu: f64,
    /// Velocity feedback gain α (1/s).
    pub alpha: f64,
    /// Position feedback gain β (1/s²).
    pub beta: f64,
    pub xi1: f64,
    pub xi2: f64,
    pub theta0: DVector<f64>,
    pub path: PathSpec,
    pub chain: SerialChain,
}

impl HybridTorqueParams {
    pub const DEFAULT_MU: f64 = 0.5;
    pub const DEFAULT_ALPHA: f64 = 10.0;
    pub const DEFAULT_BETA: f64 = 10.0;
    pub const DEFAULT_XI: f64 = 4.0;

    pub fn new(chain: SerialChain, path: PathSpec, theta0: DVector<f64>) -> Self {
        HybridTorqueParams {
            mu: Self::DEFAULT_MU,
            alpha: Self::DEFAULT_ALPHA,
            beta: Self::DEFAULT_BETA,
            xi1: Self::DEFAULT_XI,
            xi2: Self::DEFAULT_XI,
            theta0,
            path,
            chain,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.mu) {
            return Err(Error::config(format!("mu must lie in [0, 1], got {}", self.mu)));
        }
        nonneg("alpha", self.alpha)?;
        nonneg("beta", self.beta)?;
        nonneg("xi1", self.xi1)?;
        nonneg("xi2", self.xi2)?;
        if !self.chain.has_dynamics() {
            return Err(Error::DynamicsUnavailable(self.chain.name().to_string()));
        }
        check_common(&self.chain, &self.path, &self.theta0)
    }
}

/// Validated repetitive-motion scheme with analytic coefficient rates.
#[derive(Clone, Debug)]
pub struct RepetitiveMotion {
    params: RepetitiveMotionParams,
}

impl RepetitiveMotion {
    pub fn new(params: RepetitiveMotionParams) -> Result<Self> {
        params.validate()?;
        Ok(RepetitiveMotion { params })
    }

    pub fn params(&self) -> &RepetitiveMotionParams {
        &self.params
    }
}

impl Scheme for RepetitiveMotion {
    fn kind(&self) -> SchemeKind {
        SchemeKind::RepetitiveMotion
    }

    fn chain(&self) -> &SerialChain {
        &self.params.chain
    }

    fn path(&self) -> &PathSpec {
        &self.params.path
    }

    fn theta0(&self) -> &DVector<f64> {
        &self.params.theta0
    }

    fn coefficients(&self, joints: &JointState, t: f64) -> QpSample {
        let p = &self.params;
        let (pos, jac) = p.chain.position_and_jacobian(&joints.theta);
        let r = p.path.evaluate(t);
        QpSample {
            q: DMatrix::identity(self.n(), self.n()),
            p: (&joints.theta - &p.theta0) * p.kappa,
            j: jac,
            b: r.velocity + (r.position - pos) * p.feedback_gain,
        }
    }

    /// `Q̇ = 0, Ṗ = κθ̇, J̇, Ḃ = ℛ̈ + w(ℛ̇ − Jθ̇)`.
    fn coefficient_rates(&self, joints: &JointState, t: f64) -> QpSample {
        let p = &self.params;
        let (_, jac) = p.chain.position_and_jacobian(&joints.theta);
        let r = p.path.evaluate(t);
        QpSample {
            q: DMatrix::zeros(self.n(), self.n()),
            p: &joints.dtheta * p.kappa,
            j: jacobian_time_derivative(&p.chain, joints),
            b: r.acceleration + (r.velocity - jac * &joints.dtheta) * p.feedback_gain,
        }
    }
}

/// Validated hybrid-torque scheme.
#[derive(Clone, Debug)]
pub struct HybridTorque {
    params: HybridTorqueParams,
}

impl HybridTorque {
    pub fn new(params: HybridTorqueParams) -> Result<Self> {
        params.validate()?;
        Ok(HybridTorque { params })
    }

    pub fn params(&self) -> &HybridTorqueParams {
        &self.params
    }
}

impl Scheme for HybridTorque {
    fn kind(&self) -> SchemeKind {
        SchemeKind::HybridTorque
    }

    fn chain(&self) -> &SerialChain {
        &self.params.chain
    }

    fn path(&self) -> &PathSpec {
        &self.params.path
    }

    fn theta0(&self) -> &DVector<f64> {
        &self.params.theta0
    }

    fn coefficients(&self, joints: &JointState, t: f64) -> QpSample {
        let p = &self.params;
        let n = self.n();
        let terms = dynamics_terms(&p.chain, joints).expect("dynamics checked at construction");
        let inertia = &terms.inertia;
        let s = &joints.dtheta * (p.xi1 + p.xi2) + (&joints.theta - &p.theta0) * (p.xi1 * p.xi2);
        let q = DMatrix::identity(n, n) * p.mu + inertia.transpose() * inertia * (1.0 - p.mu);
        let bias = &terms.coriolis_centrifugal + &terms.gravity_vec;
        let pv = inertia.transpose() * bias * (1.0 - p.mu) + s * p.mu;

        let (pos, jac) = p.chain.position_and_jacobian(&joints.theta);
        let jdot = jacobian_time_derivative(&p.chain, joints);
        let r = p.path.evaluate(t);
        let b = &r.acceleration - jdot * &joints.dtheta
            + (&r.velocity - &jac * &joints.dtheta) * p.alpha
            + (&r.position - pos) * p.beta;
        QpSample { q, p: pv, j: jac, b }
    }
}

/// Shared, mutable joint state read by a [`SchemeQp`].
#[derive(Clone, Debug)]
pub struct JointStateFeed(Arc<RwLock<JointState>>);

impl JointStateFeed {
    pub fn new(state: JointState) -> Self {
        JointStateFeed(Arc::new(RwLock::new(state)))
    }

    pub fn set(&self, state: JointState) {
        *self.0.write().unwrap_or_else(|e| e.into_inner()) = state;
    }

    pub fn get(&self) -> JointState {
        self.0.read().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

/// A scheme bound to a live joint-state source, usable wherever a plain
/// time-varying QP is expected. Rates follow the fed state forward in time.
pub struct SchemeQp<S> {
    scheme: S,
    feed: JointStateFeed,
}

impl<S: Scheme> SchemeQp<S> {
    pub fn scheme(&self) -> &S {
        &self.scheme
    }

    pub fn feed(&self) -> &JointStateFeed {
        &self.feed
    }
}

impl<S: Scheme> TimeVaryingQp for SchemeQp<S> {
    fn n(&self) -> usize {
        self.scheme.n()
    }

    fn m(&self) -> usize {
        self.scheme.m()
    }

    fn sample(&self, t: f64) -> QpSample {
        self.scheme.coefficients(&self.feed.get(), t)
    }

    fn sample_rate(&self, t: f64) -> QpSample {
        self.scheme.coefficient_rates(&self.feed.get(), t)
    }
}

fn check_feed(chain: &SerialChain, feed: &JointStateFeed) -> Result<()> {
    let s = feed.get();
    let n = chain.n_joints();
    if s.theta.len() != n || s.dtheta.len() != n || s.ddtheta.len() != n {
        return Err(Error::DimensionMismatch {
            sampler: "joint state",
            expected: (n, 1),
            found: (s.theta.len(), 1),
        });
    }
    Ok(())
}

pub fn build_repetitive_motion_qp(
    params: RepetitiveMotionParams,
    feed: JointStateFeed,
) -> Result<SchemeQp<RepetitiveMotion>> {
    let scheme = RepetitiveMotion::new(params)?;
    check_feed(scheme.chain(), &feed)?;
    Ok(SchemeQp { scheme, feed })
}

pub fn build_hybrid_torque_qp(params: HybridTorqueParams, feed: JointStateFeed) -> Result<SchemeQp<HybridTorque>> {
    let scheme = HybridTorque::new(params)?;
    check_feed(scheme.chain(), &feed)?;
    Ok(SchemeQp { scheme, feed })
}

/// `𝒯 = ℐθ̈ + 𝒞 + 𝒢` (N·m).
pub fn torque_output(chain: &SerialChain, state: &JointState) -> Result<DVector<f64>> {
    Ok(dynamics_terms(chain, state)?.torque(&state.ddtheta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::{PathShape, Timing};
    use crate::qp::solve_kkt;
    use crate::robot::{forward_kinematics, preset};
    use approx::assert_relative_eq;
    use nalgebra::dvector;
    use std::f64::consts::FRAC_PI_2;

    fn planar3_rm(w: f64) -> RepetitiveMotionParams {
        let chain = preset("planar3").unwrap();
        let theta0 = dvector![0.4, 0.9, 0.7];
        let start = forward_kinematics(&chain, &theta0);
        let path = PathSpec::anchored(
            PathShape::Circle,
            &start,
            0.3,
            4.0,
            Timing::Uniform,
            dvector![1.0, 0.0],
            dvector![0.0, 1.0],
        )
        .unwrap();
        let mut p = RepetitiveMotionParams::new(chain, path, theta0);
        p.feedback_gain = w;
        p
    }

    fn planar3_ht() -> HybridTorqueParams {
        let rm = planar3_rm(10.0);
        HybridTorqueParams::new(rm.chain, rm.path, rm.theta0)
    }

    #[test]
    fn rm_zero_drift_at_start() {
        let params = planar3_rm(10.0);
        let theta0 = params.theta0.clone();
        let qp = build_repetitive_motion_qp(params, JointStateFeed::new(JointState::at_rest(theta0))).unwrap();
        let s = qp.sample(0.0);
        assert_eq!(s.p, DVector::zeros(3));
        assert_eq!(s.q, DMatrix::identity(3, 3));
    }

    #[test]
    fn rm_on_path_without_feedback_gives_path_velocity() {
        let params = planar3_rm(0.0);
        let path = params.path.clone();
        let theta0 = params.theta0.clone();
        let qp = build_repetitive_motion_qp(params, JointStateFeed::new(JointState::at_rest(theta0))).unwrap();
        assert_relative_eq!(qp.sample(0.7).b, path.evaluate(0.7).velocity);
    }

    #[test]
    fn rm_analytic_rates_match_directional_difference() {
        let scheme = RepetitiveMotion::new(planar3_rm(3.0)).unwrap();
        let joints = JointState {
            theta: dvector![0.5, 0.7, 1.1],
            dtheta: dvector![0.3, -0.8, 0.4],
            ddtheta: dvector![0.0, 0.0, 0.0],
        };
        let analytic = scheme.coefficient_rates(&joints, 1.3);
        let along = |s: f64| {
            let moved = JointState {
                theta: &joints.theta + &joints.dtheta * s,
                ..joints.clone()
            };
            scheme.coefficients(&moved, 1.3 + s)
        };
        let fd = five_point_rate(along, 0.0, DERIVATIVE_STEP);
        assert_relative_eq!(analytic.p, fd.p, epsilon = 1e-9);
        assert_relative_eq!(analytic.j, fd.j, epsilon = 1e-9);
        assert_relative_eq!(analytic.b, fd.b, epsilon = 1e-9);
        assert_relative_eq!(analytic.q, fd.q, epsilon = 1e-12);
    }

    #[test]
    fn rm_rejects_dimension_mismatch() {
        let mut params = planar3_rm(1.0);
        params.path = PathSpec::new(PathShape::Circle, dvector![0.0, 0.0, 0.0], 1.0, 1.0, Timing::Uniform).unwrap();
        assert!(matches!(RepetitiveMotion::new(params), Err(Error::DimensionMismatch { .. })));
        let mut params = planar3_rm(1.0);
        params.kappa = 0.0;
        assert!(RepetitiveMotion::new(params).is_err());
    }

    #[test]
    fn ht_full_weight_is_kinematic() {
        let mut params = planar3_ht();
        params.mu = 1.0;
        let scheme = HybridTorque::new(params.clone()).unwrap();
        let joints = JointState {
            theta: dvector![0.5, 0.8, 0.6],
            dtheta: dvector![0.2, -0.1, 0.3],
            ddtheta: DVector::zeros(3),
        };
        let s = scheme.coefficients(&joints, 0.4);
        assert_eq!(s.q, DMatrix::identity(3, 3));
        let expect = &joints.dtheta * 8.0 + (&joints.theta - &params.theta0) * 16.0;
        assert_relative_eq!(s.p, expect, epsilon = 1e-15);
    }

    #[test]
    fn ht_zero_weight_at_rest_sees_gravity_only() {
        let mut params = planar3_ht();
        params.mu = 0.0;
        let scheme = HybridTorque::new(params.clone()).unwrap();
        let joints = JointState::at_rest(params.theta0.clone());
        let s = scheme.coefficients(&joints, 0.0);
        let terms = dynamics_terms(&params.chain, &joints).unwrap();
        assert_relative_eq!(s.p, terms.inertia.transpose() * &terms.gravity_vec, epsilon = 1e-12);
    }

    #[test]
    fn ht_at_rest_on_path_has_zero_constraint_target() {
        let mut params = planar3_ht();
        params.path = PathSpec::anchored(
            PathShape::Butterfly,
            &forward_kinematics(&params.chain, &params.theta0),
            0.3,
            8.0,
            Timing::Smoothstart,
            dvector![1.0, 0.0],
            dvector![0.0, 1.0],
        )
        .unwrap();
        let scheme = HybridTorque::new(params.clone()).unwrap();
        let s = scheme.coefficients(&JointState::at_rest(params.theta0.clone()), 0.0);
        assert!(s.b.amax() < 1e-15);
    }

    #[test]
    fn ht_minimiser_minimises_blended_cost() {
        let params = planar3_ht();
        let scheme = HybridTorque::new(params.clone()).unwrap();
        let joints = JointState {
            theta: dvector![0.5, 0.8, 0.6],
            dtheta: dvector![0.2, -0.1, 0.3],
            ddtheta: DVector::zeros(3),
        };
        let s = scheme.coefficients(&joints, 0.4);
        let x = solve_kkt(&s, 0.4).unwrap().x;
        let terms = dynamics_terms(&params.chain, &joints).unwrap();
        let sv = &joints.dtheta * 8.0 + (&joints.theta - &params.theta0) * 16.0;
        let cost = |a: &DVector<f64>| {
            let tau = terms.torque(a);
            0.5 * params.mu * a.norm_squared() + params.mu * sv.dot(a) + 0.5 * (1.0 - params.mu) * tau.norm_squared()
        };
        // null-space direction of the 2×3 Jacobian
        let r0 = nalgebra::Vector3::new(s.j[(0, 0)], s.j[(0, 1)], s.j[(0, 2)]);
        let r1 = nalgebra::Vector3::new(s.j[(1, 0)], s.j[(1, 1)], s.j[(1, 2)]);
        let c = r0.cross(&r1);
        let null = dvector![c.x, c.y, c.z];
        for h in [-1e-2, 1e-2] {
            assert!(cost(&(&x + &null * h)) > cost(&x));
        }
    }

    #[test]
    fn ht_requires_dynamics() {
        let chain = preset("spatial6").unwrap();
        let theta0 = DVector::from_element(6, 0.3);
        let path = PathSpec::new(PathShape::Circle, dvector![0.0, 0.0, 0.0], 0.1, 1.0, Timing::Uniform).unwrap();
        let params = HybridTorqueParams::new(chain, path, theta0.clone());
        let feed = JointStateFeed::new(JointState::at_rest(theta0));
        assert!(matches!(build_hybrid_torque_qp(params, feed), Err(Error::DynamicsUnavailable(_))));
    }

    #[test]
    fn feed_updates_are_visible() {
        let params = planar3_rm(1.0);
        let theta0 = params.theta0.clone();
        let feed = JointStateFeed::new(JointState::at_rest(theta0.clone()));
        let qp = build_repetitive_motion_qp(params, feed.clone()).unwrap();
        feed.set(JointState::at_rest(&theta0 + dvector![0.1, 0.0, 0.0]));
        assert_relative_eq!(qp.sample(0.0).p, dvector![0.4, 0.0, 0.0], epsilon = 1e-15);
    }

    #[test]
    fn torque_examples() {
        let chain = preset("planar2").unwrap();
        let hanging = JointState::at_rest(dvector![-FRAC_PI_2, 0.0]);
        assert!(torque_output(&chain, &hanging).unwrap().amax() < 1e-14);
        let statics = JointState::at_rest(dvector![0.3, 0.2]);
        let terms = dynamics_terms(&chain, &statics).unwrap();
        assert_eq!(torque_output(&chain, &statics).unwrap(), terms.gravity_vec);
        let moving = JointState {
            theta: dvector![0.3, -0.6],
            dtheta: dvector![1.2, 0.4],
            ddtheta: dvector![-0.7, 2.0],
        };
        let terms = dynamics_terms(&chain, &moving).unwrap();
        let expect = &terms.inertia * &moving.ddtheta + &terms.coriolis_centrifugal + &terms.gravity_vec;
        assert_eq!(torque_output(&chain, &moving).unwrap(), expect);
    }
}
