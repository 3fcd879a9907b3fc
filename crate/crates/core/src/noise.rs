//! Additive disturbances injected into the right-hand side of the neural
//! dynamics.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    #[default]
    None,
    /// `ΔN(t) = base`.
    Constant { base: Vec<f64> },
    /// `ΔN(t) = t·base`.
    Ramp { base: Vec<f64> },
    /// `ΔNᵢ(t) = baseᵢ·sin(frequenciesᵢ·t + phasesᵢ)`, frequencies in rad/s.
    SinusoidVector {
        base: Vec<f64>,
        frequencies: Vec<f64>,
        phases: Vec<f64>,
    },
}

/// (amplitude, harmonic k, is_cosine) of the nine shipped sinusoid components;
/// the argument of each is `k·t/(πT)`.
const PAPER_COMPONENTS: [(f64, f64, bool); 9] = [
    (3.0, 1.0, false),
    (6.0, 2.0, true),
    (-7.5, 3.0, false),
    (1.5, 3.0, true),
    (-1.5, 3.0, false),
    (4.5, 1.0, true),
    (-1.5, 1.0, false),
    (-1.5, 2.0, false),
    (1.5, 1.0, true),
];

impl NoiseModel {
    pub fn constant(base: &[f64]) -> Self {
        NoiseModel::Constant {
            base: base.to_vec(),
        }
    }

    pub fn ramp(base: &[f64]) -> Self {
        NoiseModel::Ramp {
            base: base.to_vec(),
        }
    }

    /// The nine-component slow sinusoid preset for a task of duration
    /// `period`, truncated (or cycled) to `dim` components.
    ///
    /// With `literal_seventh` the seventh component uses the argument
    /// `t·π·T` as printed instead of `t/(πT)`.
    pub fn paper_sinusoid(period: f64, dim: usize, literal_seventh: bool) -> Self {
        let mut base = Vec::with_capacity(dim);
        let mut frequencies = Vec::with_capacity(dim);
        let mut phases = Vec::with_capacity(dim);
        for i in 0..dim {
            let (amp, k, cosine) = PAPER_COMPONENTS[i % PAPER_COMPONENTS.len()];
            let freq = if literal_seventh && i == 6 {
                k * PI * period
            } else {
                k / (PI * period)
            };
            base.push(amp);
            frequencies.push(freq);
            phases.push(if cosine { FRAC_PI_2 } else { 0.0 });
        }
        NoiseModel::SinusoidVector {
            base,
            frequencies,
            phases,
        }
    }

    /// Component count, `None` for the zero model.
    pub fn dim(&self) -> Option<usize> {
        match self {
            NoiseModel::None => None,
            NoiseModel::Constant { base } | NoiseModel::Ramp { base } => Some(base.len()),
            NoiseModel::SinusoidVector { base, .. } => Some(base.len()),
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if let NoiseModel::SinusoidVector {
            base,
            frequencies,
            phases,
        } = self
        {
            if frequencies.len() != base.len() || phases.len() != base.len() {
                return Err(Error::config(
                    "sinusoid noise needs equally long base, frequencies and phases",
                ));
            }
        }
        match self.dim() {
            Some(d) if d != dim => Err(Error::config(format!(
                "noise has {d} components but the system has {dim}"
            ))),
            _ => Ok(()),
        }
    }

    pub fn eval(&self, t: f64, dim: usize) -> DVector<f64> {
        match self {
            NoiseModel::None => DVector::zeros(dim),
            NoiseModel::Constant { base } => DVector::from_column_slice(base),
            NoiseModel::Ramp { base } => DVector::from_column_slice(base) * t,
            NoiseModel::SinusoidVector {
                base,
                frequencies,
                phases,
            } => DVector::from_iterator(
                base.len(),
                base.iter()
                    .zip(frequencies)
                    .zip(phases)
                    .map(|((a, w), p)| a * (w * t + p).sin()),
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn none_is_zero_everywhere() {
        for t in [0.0, 1.0, 100.0] {
            assert_eq!(NoiseModel::None.eval(t, 5), DVector::zeros(5));
        }
    }

    #[test]
    fn ramp_scales_with_time() {
        let n = NoiseModel::ramp(&[5.0, -1.0]);
        assert_eq!(n.eval(2.0, 2), DVector::from_vec(vec![10.0, -2.0]));
        assert_eq!(n.eval(0.0, 2), DVector::zeros(2));
    }

    #[test]
    fn paper_preset_components() {
        let period = 8.0;
        let n = NoiseModel::paper_sinusoid(period, 9, false);
        let t = 3.0_f64;
        let a = t / (PI * period);
        let expect = [
            3.0 * a.sin(),
            6.0 * (2.0 * a).cos(),
            -7.5 * (3.0 * a).sin(),
            1.5 * (3.0 * a).cos(),
            -1.5 * (3.0 * a).sin(),
            4.5 * a.cos(),
            -1.5 * a.sin(),
            -1.5 * (2.0 * a).sin(),
            1.5 * a.cos(),
        ];
        let got = n.eval(t, 9);
        for (g, e) in got.iter().zip(expect) {
            assert_relative_eq!(*g, e, epsilon = 1e-14);
        }
        let literal = NoiseModel::paper_sinusoid(period, 9, true).eval(t, 9);
        assert_relative_eq!(literal[6], -1.5 * (t * PI * period).sin(), epsilon = 1e-14);
    }

    #[test]
    fn paper_preset_truncates() {
        let n = NoiseModel::paper_sinusoid(8.0, 5, false);
        assert_eq!(n.dim(), Some(5));
        assert!(n.validate(5).is_ok());
        assert!(n.validate(9).is_err());
    }
}
