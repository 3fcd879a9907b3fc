//! Scalar checks of the residual dynamics against their closed forms.
//!
//! With linear activation and `A = 1, Z = 0` the residual obeys
//! `ε̇ = −ν₁ε − ν₂∫ε + ΔN`. Writing `u = ∫ε` gives `ü + ν₁u̇ + ν₂u = ΔN`
//! with `u(0) = 0, u̇(0) = ε₀`, whose roots `δ = (−ν₁ ± √(ν₁² − 4ν₂))/2`
//! select one of three solution shapes.

use std::fmt::Write as _;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::activation::ActivationSpec;
use crate::integrate::Integrator;
use crate::noise::NoiseModel;
use crate::qp::ConstantSystem;
use crate::solver::{solve_trajectory, NeuralConfig, TrajectorySample, Variant};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RootCase {
    /// `ν₁² > 4ν₂`
    Distinct,
    /// `ν₁² = 4ν₂`
    Repeated,
    /// `ν₁² < 4ν₂`
    Complex,
}

impl RootCase {
    pub fn classify(nu1: f64, nu2: f64) -> Self {
        let disc = nu1 * nu1 - 4.0 * nu2;
        if disc > 0.0 {
            RootCase::Distinct
        } else if disc == 0.0 {
            RootCase::Repeated
        } else {
            RootCase::Complex
        }
    }

    pub fn number(self) -> u8 {
        match self {
            RootCase::Distinct => 1,
            RootCase::Repeated => 2,
            RootCase::Complex => 3,
        }
    }
}

/// Noise-free scalar IE-RNN residual `ε(t)` starting from `ε₀`.
pub fn closed_form_residual(nu1: f64, nu2: f64, eps0: f64, t: f64) -> f64 {
    match RootCase::classify(nu1, nu2) {
        RootCase::Distinct => {
            let root = (nu1 * nu1 - 4.0 * nu2).sqrt();
            let d1 = (-nu1 + root) / 2.0;
            let d2 = (-nu1 - root) / 2.0;
            eps0 * (d1 * (d1 * t).exp() - d2 * (d2 * t).exp()) / root
        }
        RootCase::Repeated => {
            let d = -nu1 / 2.0;
            eps0 * (1.0 + d * t) * (d * t).exp()
        }
        RootCase::Complex => {
            let a = -nu1 / 2.0;
            let b = (4.0 * nu2 - nu1 * nu1).sqrt() / 2.0;
            eps0 * (a * t).exp() * (a / b * (b * t).sin() + (b * t).cos())
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseCase {
    pub variant: Variant,
    pub nu1: f64,
    pub nu2: f64,
    /// `false`: constant `ΔN = magnitude`; `true`: `ΔN = magnitude·t`.
    pub ramp: bool,
    pub magnitude: f64,
}

impl NoiseCase {
    pub const HORIZON: f64 = 8.0;
    pub const WINDOW: (f64, f64) = (6.0, 8.0);

    /// Predicted residual: the value at the horizon for constant noise, the
    /// mean over [`Self::WINDOW`] for ramp noise.
    pub fn expected(&self) -> f64 {
        let c = self.magnitude;
        match (self.variant, self.ramp) {
            (Variant::IeRnn, false) => 0.0,
            (Variant::IeRnn, true) => c / self.nu2,
            (Variant::ZRnn, false) => c / self.nu1,
            // ε → c·t/ν₁ − c/ν₁²
            (Variant::ZRnn, true) => {
                let mid = 0.5 * (Self::WINDOW.0 + Self::WINDOW.1);
                c * mid / self.nu1 - c / (self.nu1 * self.nu1)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub label: String,
    pub expected: f64,
    pub measured: f64,
    pub deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CaseResult {
    fn new(label: String, expected: f64, measured: f64, deviation: f64, tolerance: f64) -> Self {
        CaseResult {
            label,
            expected,
            measured,
            deviation,
            tolerance,
            passed: deviation <= tolerance,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub convergence: Vec<CaseResult>,
    pub noise: Vec<CaseResult>,
}

impl TheoremReport {
    pub fn passed(&self) -> bool {
        self.convergence.iter().chain(&self.noise).all(|c| c.passed)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut section = |title: &str, rows: &[CaseResult]| {
            let _ = writeln!(out, "{title}");
            for r in rows {
                let _ = writeln!(
                    out,
                    "  [{}] {:<44} expected {:>12.6e}  measured {:>12.6e}  deviation {:.3e} (tol {:.1e})",
                    if r.passed { "pass" } else { "FAIL" },
                    r.label,
                    r.expected,
                    r.measured,
                    r.deviation,
                    r.tolerance
                );
            }
        };
        section("convergence (closed forms, linear activation)", &self.convergence);
        section("noise limits", &self.noise);
        let _ = writeln!(out, "overall: {}", if self.passed() { "pass" } else { "FAIL" });
        out
    }
}

/// Gains covering all three root cases.
pub const DEFAULT_GAINS: [(f64, f64); 3] = [(3.0, 2.0), (2.0, 1.0), (2.0, 4.0)];

pub fn default_noise_cases() -> Vec<NoiseCase> {
    let base = |variant, ramp, magnitude| NoiseCase {
        variant,
        nu1: 500.0,
        nu2: 2500.0,
        ramp,
        magnitude,
    };
    vec![
        base(Variant::IeRnn, false, 10.0),
        base(Variant::ZRnn, false, 10.0),
        base(Variant::IeRnn, true, 5.0),
        base(Variant::ZRnn, true, 5.0),
    ]
}

fn scalar_run(
    nu1: f64,
    nu2: f64,
    variant: Variant,
    noise: &NoiseModel,
    eps0: f64,
    t_end: f64,
) -> Vec<TrajectorySample> {
    let cfg = NeuralConfig {
        nu1,
        nu2,
        activation: ActivationSpec::linear(),
        dt: 1e-4,
        integrator: Integrator::Rk4,
        variant,
    };
    let sys = ConstantSystem::scalar(1.0, 0.0);
    solve_trajectory(&sys, &DVector::from_element(1, eps0), &cfg, noise, t_end, 1)
        .unwrap_or_else(|abort| abort.samples)
}

/// Integrates each gain pair from `ε₀ = 1` over `[0, 2]` and each noise case
/// over `[0, 8]`, comparing against the closed forms and limits.
pub fn verify_theorems(gains: &[(f64, f64)], noise_cases: &[NoiseCase]) -> TheoremReport {
    let mut report = TheoremReport::default();
    for &(nu1, nu2) in gains {
        let case = RootCase::classify(nu1, nu2);
        let samples = scalar_run(nu1, nu2, Variant::IeRnn, &NoiseModel::None, 1.0, 2.0);
        let sup = samples
            .iter()
            .map(|s| closed_form_residual(nu1, nu2, 1.0, s.t).abs())
            .fold(0.0, f64::max);
        let (worst_t, worst) = samples
            .iter()
            .map(|s| (s.t, (s.eps[0] - closed_form_residual(nu1, nu2, 1.0, s.t)).abs()))
            .fold((0.0, 0.0), |acc, v| if v.1 > acc.1 { v } else { acc });
        let label = format!("Case {} (nu1={nu1}, nu2={nu2})", case.number());
        let measured = samples.iter().find(|s| s.t == worst_t).map_or(f64::NAN, |s| s.eps[0]);
        report.convergence.push(CaseResult::new(
            label,
            closed_form_residual(nu1, nu2, 1.0, worst_t),
            measured,
            if sup > 0.0 { worst / sup } else { worst },
            1e-5,
        ));
        if case == RootCase::Repeated {
            let t_zero = 2.0 / nu1;
            if let Some(s) = samples.iter().find(|s| (s.t - t_zero).abs() < 0.5e-4) {
                report.convergence.push(CaseResult::new(
                    format!("Case 2 zero crossing at t={t_zero}"),
                    0.0,
                    s.eps[0],
                    s.eps[0].abs(),
                    1e-6,
                ));
            }
        }
    }
    for nc in noise_cases {
        let noise = if nc.ramp {
            NoiseModel::ramp(&[nc.magnitude])
        } else {
            NoiseModel::constant(&[nc.magnitude])
        };
        let samples = scalar_run(nc.nu1, nc.nu2, nc.variant, &noise, 0.0, NoiseCase::HORIZON);
        let measured = if nc.ramp {
            let (a, b) = NoiseCase::WINDOW;
            let window: Vec<f64> = samples.iter().filter(|s| s.t >= a && s.t <= b).map(|s| s.eps[0]).collect();
            window.iter().sum::<f64>() / window.len().max(1) as f64
        } else {
            samples.last().map_or(f64::NAN, |s| s.eps[0])
        };
        let expected = nc.expected();
        let (deviation, tolerance) = if expected == 0.0 {
            (measured.abs(), 1e-6 * nc.magnitude.abs().max(1.0))
        } else {
            ((measured - expected).abs() / expected.abs(), 0.05)
        };
        let label = format!(
            "{} {} {} (nu1={}, nu2={})",
            nc.variant.label(),
            if nc.ramp { "ramp slope" } else { "constant" },
            nc.magnitude,
            nc.nu1,
            nc.nu2
        );
        report.noise.push(CaseResult::new(label, expected, measured, deviation, tolerance));
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn classification() {
        assert_eq!(RootCase::classify(3.0, 2.0), RootCase::Distinct);
        assert_eq!(RootCase::classify(2.0, 1.0), RootCase::Repeated);
        assert_eq!(RootCase::classify(2.0, 4.0), RootCase::Complex);
    }

    #[test]
    fn closed_forms_start_at_eps0_with_slope_minus_nu1() {
        for &(a, b) in &DEFAULT_GAINS {
            assert_relative_eq!(closed_form_residual(a, b, 1.0, 0.0), 1.0, epsilon = 1e-15);
            let h = 1e-6;
            let slope = (closed_form_residual(a, b, 1.0, h) - closed_form_residual(a, b, 1.0, -h)) / (2.0 * h);
            assert_relative_eq!(slope, -a, epsilon = 1e-6);
        }
    }

    #[test]
    fn default_matrix_passes() {
        let report = verify_theorems(&DEFAULT_GAINS, &default_noise_cases());
        assert!(report.passed(), "{}", report.to_text());
        assert_eq!(report.convergence.len(), 4);
        let ramp = &report.noise[2];
        assert_relative_eq!(ramp.expected, 0.002);
        let text = report.to_text();
        for needle in ["Case 1", "Case 2", "Case 3", "ramp slope 5"] {
            assert!(text.contains(needle), "{text}");
        }
    }
}
