//! Serial manipulators described by standard Denavit–Hartenberg rows.
//!
//! All joints are revolute. Row `i` maps frame `i-1` to frame `i` through
//! `Rz(θᵢ + offset)·Tz(d)·Tx(a)·Rx(α)`; joint `i` turns about `z_{i-1}`.
//! Only the end-effector position is tracked: the first `task_dim`
//! components of the frame-`n` origin.

mod dynamics;
mod params;

use nalgebra::{DMatrix, DVector, Isometry3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dynamics::{dynamics_terms, forward_dynamics, kinetic_energy, potential_energy, DynamicsTerms};
pub use params::{parse_chain, preset, PRESET_NAMES};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DhRow {
    pub a: f64,
    pub alpha: f64,
    pub d: f64,
    pub theta_offset: f64,
}

impl DhRow {
    pub fn planar(length: f64) -> Self {
        DhRow {
            a: length,
            alpha: 0.0,
            d: 0.0,
            theta_offset: 0.0,
        }
    }

    fn transform(&self, q: f64) -> Isometry3<f64> {
        let rz = Isometry3::from_parts(
            Translation3::new(0.0, 0.0, self.d),
            UnitQuaternion::from_axis_angle(&Vector3::z_axis(), q + self.theta_offset),
        );
        let rx = Isometry3::from_parts(
            Translation3::new(self.a, 0.0, 0.0),
            UnitQuaternion::from_axis_angle(&Vector3::x_axis(), self.alpha),
        );
        rz * rx
    }
}

/// Mass properties of one planar link.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkInertia {
    /// kg
    pub mass: f64,
    /// Distance of the centre of mass from the joint along the link (m).
    pub com_offset: f64,
    /// Rotational inertia about the centre of mass (kg·m²).
    pub inertia: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SerialChain {
    name: String,
    rows: Vec<DhRow>,
    task_dim: usize,
    links: Option<Vec<LinkInertia>>,
    /// Gravitational acceleration (m/s²) acting along −y of the base frame;
    /// potential energy is `Σ mᵢ·g·yᵢ`.
    gravity: f64,
}

impl SerialChain {
    pub fn new(name: impl Into<String>, rows: Vec<DhRow>, task_dim: usize) -> Result<Self> {
        if !(task_dim == 2 || task_dim == 3) {
            return Err(Error::config(format!("task_dim must be 2 or 3, got {task_dim}")));
        }
        if rows.len() < task_dim {
            return Err(Error::config(format!(
                "{} joints cannot position a {task_dim}-D task",
                rows.len()
            )));
        }
        Ok(SerialChain {
            name: name.into(),
            rows,
            task_dim,
            links: None,
            gravity: 0.0,
        })
    }

    /// Planar chain in the x–y plane with the given link lengths.
    pub fn planar(name: impl Into<String>, lengths: &[f64]) -> Result<Self> {
        SerialChain::new(name, lengths.iter().map(|&l| DhRow::planar(l)).collect(), 2)
    }

    /// Attaches planar mass properties. Only chains with every `α = d = 0`
    /// qualify.
    pub fn with_dynamics(mut self, links: Vec<LinkInertia>, gravity: f64) -> Result<Self> {
        if !self.is_planar() {
            return Err(Error::DynamicsUnavailable(self.name));
        }
        if links.len() != self.rows.len() {
            return Err(Error::config(format!(
                "{} links given for {} joints",
                links.len(),
                self.rows.len()
            )));
        }
        if links.iter().any(|l| l.mass.is_nan() || l.mass <= 0.0 || l.inertia < 0.0) {
            return Err(Error::config("link masses must be positive, inertias non-negative"));
        }
        self.links = Some(links);
        self.gravity = gravity;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_joints(&self) -> usize {
        self.rows.len()
    }

    pub fn task_dim(&self) -> usize {
        self.task_dim
    }

    pub fn rows(&self) -> &[DhRow] {
        &self.rows
    }

    pub fn links(&self) -> Option<&[LinkInertia]> {
        self.links.as_deref()
    }

    pub fn gravity(&self) -> f64 {
        self.gravity
    }

    pub fn is_planar(&self) -> bool {
        self.rows.iter().all(|r| r.alpha == 0.0 && r.d == 0.0)
    }

    pub fn has_dynamics(&self) -> bool {
        self.links.is_some()
    }

    /// Origins `p₀..pₙ` and z-axes `z₀..zₙ` of all frames.
    fn frames(&self, theta: &DVector<f64>) -> (Vec<Vector3<f64>>, Vec<Vector3<f64>>) {
        assert_eq!(theta.len(), self.n_joints(), "joint vector length");
        let mut pose = Isometry3::identity();
        let mut origins = Vec::with_capacity(self.rows.len() + 1);
        let mut axes = Vec::with_capacity(self.rows.len() + 1);
        origins.push(Vector3::zeros());
        axes.push(Vector3::z());
        for (row, &q) in self.rows.iter().zip(theta.iter()) {
            pose *= row.transform(q);
            origins.push(pose.translation.vector);
            axes.push(pose.rotation * Vector3::z());
        }
        (origins, axes)
    }

    fn truncate(&self, v: &Vector3<f64>) -> DVector<f64> {
        DVector::from_column_slice(&v.as_slice()[..self.task_dim])
    }

    /// End-effector position and position Jacobian from one frame sweep.
    pub fn position_and_jacobian(&self, theta: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let (p, z) = self.frames(theta);
        let n = self.n_joints();
        let pe = p[n];
        let mut jac = DMatrix::zeros(self.task_dim, n);
        for i in 0..n {
            let col = z[i].cross(&(pe - p[i]));
            for r in 0..self.task_dim {
                jac[(r, i)] = col[r];
            }
        }
        (self.truncate(&pe), jac)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct JointState {
    /// rad
    pub theta: DVector<f64>,
    /// rad/s
    pub dtheta: DVector<f64>,
    /// rad/s²
    pub ddtheta: DVector<f64>,
}

impl JointState {
    pub fn at_rest(theta: DVector<f64>) -> Self {
        let n = theta.len();
        JointState {
            theta,
            dtheta: DVector::zeros(n),
            ddtheta: DVector::zeros(n),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.theta
            .iter()
            .chain(self.dtheta.iter())
            .chain(self.ddtheta.iter())
            .all(|v| v.is_finite())
    }
}

/// `F(θ)`: Cartesian end-effector position.
pub fn forward_kinematics(chain: &SerialChain, theta: &DVector<f64>) -> DVector<f64> {
    let (p, _) = chain.frames(theta);
    chain.truncate(&p[chain.n_joints()])
}

/// `J(θ) = ∂F/∂θ`, column `i` being `z_{i-1} × (pₙ − p_{i-1})`.
pub fn jacobian(chain: &SerialChain, theta: &DVector<f64>) -> DMatrix<f64> {
    chain.position_and_jacobian(theta).1
}

/// `J̇ = Σₖ (∂J/∂θₖ)·θ̇ₖ`, differentiating each column
/// `z_{i-1} × (pₙ − p_{i-1})` along the joint motion.
pub fn jacobian_time_derivative(chain: &SerialChain, state: &JointState) -> DMatrix<f64> {
    let (p, z) = chain.frames(&state.theta);
    let n = chain.n_joints();
    let dq = &state.dtheta;
    assert_eq!(dq.len(), n, "joint rate length");

    // angular velocity of frame i and linear velocity of origin i
    let mut omega = vec![Vector3::zeros(); n + 1];
    for i in 1..=n {
        omega[i] = omega[i - 1] + z[i - 1] * dq[i - 1];
    }
    let point_velocity = |k: usize| -> Vector3<f64> {
        (0..k).fold(Vector3::zeros(), |acc, j| {
            acc + z[j].cross(&(p[k] - p[j])) * dq[j]
        })
    };
    let ve = point_velocity(n);

    let mut out = DMatrix::zeros(chain.task_dim(), n);
    for i in 0..n {
        let dz = omega[i].cross(&z[i]);
        let col = dz.cross(&(p[n] - p[i])) + z[i].cross(&(ve - point_velocity(i)));
        for r in 0..chain.task_dim() {
            out[(r, i)] = col[r];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{dmatrix, dvector};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn fd_jacobian(chain: &SerialChain, theta: &DVector<f64>, h: f64) -> DMatrix<f64> {
        let n = chain.n_joints();
        let mut out = DMatrix::zeros(chain.task_dim(), n);
        for j in 0..n {
            let mut plus = theta.clone();
            let mut minus = theta.clone();
            plus[j] += h;
            minus[j] -= h;
            let col = (forward_kinematics(chain, &plus) - forward_kinematics(chain, &minus)) / (2.0 * h);
            out.set_column(j, &col);
        }
        out
    }

    #[test]
    fn planar_forward_kinematics() {
        let two = SerialChain::planar("p2", &[1.0, 1.0]).unwrap();
        assert_relative_eq!(forward_kinematics(&two, &dvector![0.0, 0.0]), dvector![2.0, 0.0]);
        assert_relative_eq!(
            forward_kinematics(&two, &dvector![FRAC_PI_2, 0.0]),
            dvector![0.0, 2.0],
            epsilon = 1e-15
        );
        let three = SerialChain::planar("p3", &[1.0, 1.0, 1.0]).unwrap();
        assert_relative_eq!(
            forward_kinematics(&three, &dvector![0.0, FRAC_PI_2, -FRAC_PI_2]),
            dvector![2.0, 1.0],
            epsilon = 1e-15
        );
    }

    #[test]
    fn planar_jacobian_examples() {
        let two = SerialChain::planar("p2", &[1.0, 1.0]).unwrap();
        let theta = dvector![0.0, 0.0];
        let jac = jacobian(&two, &theta);
        assert_relative_eq!(jac, dmatrix![0.0, 0.0; 2.0, 1.0], epsilon = 1e-15);
        assert_relative_eq!(jac, fd_jacobian(&two, &theta, 1e-6), epsilon = 1e-8);

        let folded = jacobian(&two, &dvector![0.0, PI]);
        let sv = folded.singular_values();
        assert!(sv.min() < 1e-12, "{sv}");
    }

    #[test]
    fn jacobian_column_is_single_joint_perturbation() {
        let chain = preset("spatial6").unwrap();
        let theta = dvector![0.3, 1.9, -2.2, 0.4, 1.1, -0.7];
        let jac = jacobian(&chain, &theta);
        let h = 1e-6;
        for j in 0..6 {
            let mut plus = theta.clone();
            plus[j] += h;
            let mut minus = theta.clone();
            minus[j] -= h;
            let col = (forward_kinematics(&chain, &plus) - forward_kinematics(&chain, &minus)) / (2.0 * h);
            assert_relative_eq!(jac.column(j).into_owned(), col, epsilon = 1e-8);
        }
    }

    #[test]
    fn jacobian_rate_examples() {
        let two = SerialChain::planar("p2", &[1.0, 1.0]).unwrap();
        let rest = JointState::at_rest(dvector![0.4, -0.3]);
        assert_eq!(jacobian_time_derivative(&two, &rest), DMatrix::zeros(2, 2));

        // a single link can't be redundant, so check the 1-link case as the
        // first column of a chain whose second joint is still
        let state = JointState {
            theta: dvector![0.0, 0.0],
            dtheta: dvector![1.0, 0.0],
            ddtheta: dvector![0.0, 0.0],
        };
        let one = SerialChain::planar("p1+0", &[1.0, 0.0]).unwrap();
        let jd = jacobian_time_derivative(&one, &state);
        assert_relative_eq!(jd.column(0).into_owned(), dvector![-1.0, 0.0], epsilon = 1e-15);
    }

    #[test]
    fn jacobian_rate_matches_directional_difference() {
        let three = preset("planar3").unwrap();
        let six = preset("spatial6").unwrap();
        let cases = [
            (three, dvector![0.3, 0.8, -0.4], dvector![0.7, -1.1, 0.5]),
            (
                six,
                dvector![1.675, 2.843, -3.216, 4.187, -1.710, -2.650],
                dvector![0.2, -0.4, 0.9, -0.3, 0.6, 1.2],
            ),
        ];
        for (chain, theta, dtheta) in cases {
            let h = 1e-6;
            let fd = (jacobian(&chain, &(&theta + &dtheta * h)) - jacobian(&chain, &(&theta - &dtheta * h)))
                / (2.0 * h);
            let state = JointState {
                theta,
                dtheta,
                ddtheta: DVector::zeros(chain.n_joints()),
            };
            let an = jacobian_time_derivative(&chain, &state);
            assert!((an - fd).amax() <= 1e-5);
        }
    }

    #[test]
    fn rejects_underactuated_chain() {
        assert!(SerialChain::planar("p2", &[1.0, 1.0]).is_ok());
        assert!(SerialChain::planar("p1", &[1.0]).is_err());
        assert!(SerialChain::new("s2", vec![DhRow::planar(1.0); 2], 3).is_err());
        assert!(SerialChain::new("bad", vec![DhRow::planar(1.0); 3], 4).is_err());
    }
}
