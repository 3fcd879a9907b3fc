//! Fixed-step explicit integrators over `DVector` states.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    Euler,
    #[default]
    Rk4,
}

impl Integrator {
    pub fn order(self) -> u32 {
        match self {
            Integrator::Euler => 1,
            Integrator::Rk4 => 4,
        }
    }

    /// Advances `x` from `t` to `t + dt`. The rate function may fail; the
    /// first error aborts the step.
    pub fn step<F, E>(self, mut f: F, t: f64, x: &DVector<f64>, dt: f64) -> Result<DVector<f64>, E>
    where
        F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>, E>,
    {
        match self {
            Integrator::Euler => Ok(x + f(t, x)? * dt),
            Integrator::Rk4 => {
                let half = 0.5 * dt;
                let k1 = f(t, x)?;
                let k2 = f(t + half, &(x + &k1 * half))?;
                let k3 = f(t + half, &(x + &k2 * half))?;
                let k4 = f(t + dt, &(x + &k3 * dt))?;
                Ok(x + (k1 + (k2 + k3) * 2.0 + k4) * (dt / 6.0))
            }
        }
    }
}
