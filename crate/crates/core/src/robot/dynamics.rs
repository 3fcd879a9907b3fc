//! Rigid-body terms of planar serial chains.
//!
//! With absolute link angles `φᵢ = Σ_{k≤i}(θₖ + offsetₖ)` the centre of mass of
//! link `i` sits at `Σ_{j<i} lⱼ·u(φⱼ) + cᵢ·u(φᵢ)`, `u(φ) = (cos φ, sin φ)`.
//! The equations of motion are the projected Newton equations
//!
//! ```text
//! Σᵢ mᵢ·Jᵢᵀ(Jᵢθ̈ + J̇ᵢθ̇) + Iᵢ·eᵢᵀeᵢθ̈ + ∂U/∂θ = 𝒯
//! ```
//!
//! so `ℐ = Σ mᵢJᵢᵀJᵢ + Iᵢeᵢᵀeᵢ` and `𝒞 = Σ mᵢJᵢᵀ(J̇ᵢθ̇)` (Coriolis and
//! centrifugal combined). The rotational Jacobian rows `eᵢ` are constant in
//! the plane and contribute nothing to `𝒞`.

use nalgebra::{DMatrix, DVector, Vector2};

use super::{JointState, LinkInertia, SerialChain};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct DynamicsTerms {
    pub inertia: DMatrix<f64>,
    pub coriolis_centrifugal: DVector<f64>,
    pub gravity_vec: DVector<f64>,
}

impl DynamicsTerms {
    /// `𝒯 = ℐθ̈ + 𝒞 + 𝒢`.
    pub fn torque(&self, ddtheta: &DVector<f64>) -> DVector<f64> {
        &self.inertia * ddtheta + &self.coriolis_centrifugal + &self.gravity_vec
    }
}

struct Planar<'a> {
    lengths: Vec<f64>,
    links: &'a [LinkInertia],
    phi: Vec<f64>,
}

fn unit(phi: f64) -> Vector2<f64> {
    Vector2::new(phi.cos(), phi.sin())
}

fn perp(phi: f64) -> Vector2<f64> {
    Vector2::new(-phi.sin(), phi.cos())
}

impl<'a> Planar<'a> {
    fn new(chain: &'a SerialChain, theta: &DVector<f64>) -> Result<Self> {
        let links = chain
            .links()
            .ok_or_else(|| Error::DynamicsUnavailable(chain.name().to_string()))?;
        assert_eq!(theta.len(), chain.n_joints(), "joint vector length");
        let mut acc = 0.0;
        let phi = chain
            .rows()
            .iter()
            .zip(theta.iter())
            .map(|(r, q)| {
                acc += q + r.theta_offset;
                acc
            })
            .collect();
        Ok(Planar {
            lengths: chain.rows().iter().map(|r| r.a).collect(),
            links,
            phi,
        })
    }

    fn n(&self) -> usize {
        self.lengths.len()
    }

    fn com(&self, i: usize) -> Vector2<f64> {
        (0..i).fold(unit(self.phi[i]) * self.links[i].com_offset, |acc, j| {
            acc + unit(self.phi[j]) * self.lengths[j]
        })
    }

    /// 2×n Jacobian of the centre of mass of link `i`.
    fn com_jacobian(&self, i: usize) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(2, self.n());
        for k in 0..=i {
            let mut col = perp(self.phi[i]) * self.links[i].com_offset;
            for j in k..i {
                col += perp(self.phi[j]) * self.lengths[j];
            }
            jac[(0, k)] = col.x;
            jac[(1, k)] = col.y;
        }
        jac
    }

    /// Velocity-product part `J̇ᵢθ̇` of the centre-of-mass acceleration.
    fn com_bias_acceleration(&self, i: usize, omega: &[f64]) -> Vector2<f64> {
        let tip = (0..i).fold(Vector2::zeros(), |acc, j| {
            acc + unit(self.phi[j]) * (self.lengths[j] * omega[j] * omega[j])
        });
        -(tip + unit(self.phi[i]) * (self.links[i].com_offset * omega[i] * omega[i]))
    }

    fn inertia(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            let jac = self.com_jacobian(i);
            m += jac.transpose() * &jac * self.links[i].mass;
            m.view_mut((0, 0), (i + 1, i + 1)).add_scalar_mut(self.links[i].inertia);
        }
        // exact symmetry for downstream Cholesky/eigen checks
        (&m + m.transpose()) * 0.5
    }
}

/// `ℐ(θ)`, `𝒞(θ, θ̇)` and `𝒢(θ)` of a planar chain with mass properties.
pub fn dynamics_terms(chain: &SerialChain, state: &JointState) -> Result<DynamicsTerms> {
    let planar = Planar::new(chain, &state.theta)?;
    let n = planar.n();
    let mut omega = Vec::with_capacity(n);
    let mut acc = 0.0;
    for &w in state.dtheta.iter() {
        acc += w;
        omega.push(acc);
    }
    let mut coriolis = DVector::zeros(n);
    let mut gravity = DVector::zeros(n);
    for i in 0..n {
        let jac = planar.com_jacobian(i);
        let mass = planar.links[i].mass;
        coriolis += jac.transpose() * planar.com_bias_acceleration(i, &omega) * mass;
        gravity += jac.row(1).transpose() * (mass * chain.gravity());
    }
    Ok(DynamicsTerms {
        inertia: planar.inertia(),
        coriolis_centrifugal: coriolis,
        gravity_vec: gravity,
    })
}

/// `U(θ) = Σ mᵢ·g·yᵢ`.
pub fn potential_energy(chain: &SerialChain, theta: &DVector<f64>) -> Result<f64> {
    let planar = Planar::new(chain, theta)?;
    Ok((0..planar.n())
        .map(|i| planar.links[i].mass * chain.gravity() * planar.com(i).y)
        .sum())
}

/// `½θ̇ᵀℐθ̇`.
pub fn kinetic_energy(chain: &SerialChain, state: &JointState) -> Result<f64> {
    let planar = Planar::new(chain, &state.theta)?;
    Ok(0.5 * state.dtheta.dot(&(planar.inertia() * &state.dtheta)))
}

/// `θ̈ = ℐ⁻¹(𝒯 − 𝒞 − 𝒢)`.
pub fn forward_dynamics(
    chain: &SerialChain,
    theta: &DVector<f64>,
    dtheta: &DVector<f64>,
    torque: &DVector<f64>,
) -> Result<DVector<f64>> {
    let state = JointState {
        theta: theta.clone(),
        dtheta: dtheta.clone(),
        ddtheta: DVector::zeros(theta.len()),
    };
    let terms = dynamics_terms(chain, &state)?;
    let rhs = torque - &terms.coriolis_centrifugal - &terms.gravity_vec;
    terms
        .inertia
        .cholesky()
        .map(|c| c.solve(&rhs))
        .ok_or_else(|| Error::config("inertia matrix not positive definite"))
}
