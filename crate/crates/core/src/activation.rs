//! Elementwise activation arrays for the neural dynamics.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationKind {
    PowerSigmoid,
    /// The identity map. Used by the closed-form convergence checks, since the
    /// power-sigmoid at exponent 1 is a scaled tanh rather than the identity.
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActivationSpec {
    pub kind: ActivationKind,
    /// Odd exponent of the power-sigmoid; ignored by `Linear`.
    pub exponent: u32,
}

impl ActivationSpec {
    pub fn power_sigmoid(exponent: u32) -> Result<Self> {
        check_exponent(exponent)?;
        Ok(ActivationSpec {
            kind: ActivationKind::PowerSigmoid,
            exponent,
        })
    }

    pub fn linear() -> Self {
        ActivationSpec {
            kind: ActivationKind::Linear,
            exponent: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ActivationKind::PowerSigmoid => check_exponent(self.exponent),
            ActivationKind::Linear => Ok(()),
        }
    }

    pub fn apply(&self, u: f64) -> f64 {
        match self.kind {
            ActivationKind::PowerSigmoid => power_sigmoid_unchecked(u, self.exponent),
            ActivationKind::Linear => u,
        }
    }

    /// `Φ(v)`: the scalar map applied to each component.
    pub fn apply_vec(&self, v: &DVector<f64>) -> DVector<f64> {
        v.map(|u| self.apply(u))
    }
}

impl Default for ActivationSpec {
    fn default() -> Self {
        ActivationSpec {
            kind: ActivationKind::PowerSigmoid,
            exponent: 3,
        }
    }
}

fn check_exponent(n: u32) -> Result<()> {
    if n == 0 || n.is_multiple_of(2) {
        return Err(Error::config(format!(
            "power-sigmoid exponent must be odd and positive, got {n}"
        )));
    }
    Ok(())
}

/// Power-sigmoid activation.
///
/// For `|u| <= 1` this is `((1+e⁻ⁿ)/(1−e⁻ⁿ))·((1−e⁻ⁿᵘ)/(1+e⁻ⁿᵘ))`, evaluated
/// as `coth(n/2)·tanh(nu/2)`; outside it is `uⁿ`. Both branches meet at ±1.
pub fn power_sigmoid(u: f64, n: u32) -> Result<f64> {
    check_exponent(n)?;
    Ok(power_sigmoid_unchecked(u, n))
}

fn power_sigmoid_unchecked(u: f64, n: u32) -> f64 {
    let nf = n as f64;
    if u.abs() <= 1.0 {
        (nf * u / 2.0).tanh() / (nf / 2.0).tanh()
    } else {
        u.powi(n as i32)
    }
}
