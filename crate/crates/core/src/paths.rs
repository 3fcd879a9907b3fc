//! Closed Cartesian reference paths with analytic velocity and acceleration.
//!
//! A path is a polar curve `ρ(α)` drawn in the plane `center + span(e₁, e₂)`:
//!
//! ```text
//! ℛ(t) = center + scale·ρ(α(t))·(cos α·e₁ + sin α·e₂)
//! ```
//!
//! with the angle law `α(t)` sweeping `[0, 2π]` over one period.

use std::f64::consts::TAU;
use std::io::Write;
use std::sync::OnceLock;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PathShape {
    Circle,
    /// Five-lobed rose `ρ = r0 + r1·cos 5α`.
    Starfish { r0: f64, r1: f64 },
    /// `ρ = e^{sin α} − 2cos 4α`, normalised to unit maximum radius.
    Butterfly,
}

impl PathShape {
    pub fn starfish() -> Self {
        PathShape::Starfish { r0: 1.0, r1: 0.2 }
    }

    /// `(ρ, ρ', ρ'')` at angle `a`.
    fn radius(&self, a: f64) -> (f64, f64, f64) {
        match *self {
            PathShape::Circle => (1.0, 0.0, 0.0),
            PathShape::Starfish { r0, r1 } => {
                let (s, c) = (5.0 * a).sin_cos();
                (r0 + r1 * c, -5.0 * r1 * s, -25.0 * r1 * c)
            }
            PathShape::Butterfly => {
                let k = butterfly_peak();
                let (s, c) = a.sin_cos();
                let (s4, c4) = (4.0 * a).sin_cos();
                let e = s.exp();
                (
                    (e - 2.0 * c4) / k,
                    (c * e + 8.0 * s4) / k,
                    ((c * c - s) * e + 32.0 * c4) / k,
                )
            }
        }
    }
}

/// `max |e^{sin α} − 2cos 4α|` over one turn.
fn butterfly_peak() -> f64 {
    static PEAK: OnceLock<f64> = OnceLock::new();
    *PEAK.get_or_init(|| {
        let f = |a: f64| (a.sin().exp() - 2.0 * (4.0 * a).cos()).abs();
        let n = 20_000;
        let h = TAU / n as f64;
        let best = (0..n)
            .map(|k| k as f64 * h)
            .max_by(|a, b| f(*a).total_cmp(&f(*b)))
            .unwrap();
        // golden-section refinement inside the bracketing cell
        let (mut lo, mut hi) = (best - h, best + h);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..80 {
            let x1 = hi - g * (hi - lo);
            let x2 = lo + g * (hi - lo);
            if f(x1) > f(x2) {
                hi = x2;
            } else {
                lo = x1;
            }
        }
        f(0.5 * (lo + hi))
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Timing {
    /// `α = 2πt/T`.
    Uniform,
    /// `α = 2π(t/T − sin(2πt/T)/2π)`; starts and ends at rest.
    #[default]
    Smoothstart,
}

impl Timing {
    /// `(α, α̇, α̈)`.
    fn angle(self, t: f64, period: f64) -> (f64, f64, f64) {
        let w = TAU / period;
        match self {
            Timing::Uniform => (w * t, w, 0.0),
            Timing::Smoothstart => {
                let (s, c) = (w * t).sin_cos();
                (w * t - s, w * (1.0 - c), w * w * s)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathSample {
    pub position: DVector<f64>,
    pub velocity: DVector<f64>,
    pub acceleration: DVector<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathSpec {
    shape: PathShape,
    center: DVector<f64>,
    scale: f64,
    period: f64,
    e1: DVector<f64>,
    e2: DVector<f64>,
    timing: Timing,
}

impl PathSpec {
    /// Path in the plane spanned by the first two coordinate axes.
    pub fn new(shape: PathShape, center: DVector<f64>, scale: f64, period: f64, timing: Timing) -> Result<Self> {
        let m = center.len();
        let mut e1 = DVector::zeros(m);
        let mut e2 = DVector::zeros(m);
        if m >= 2 {
            e1[0] = 1.0;
            e2[1] = 1.0;
        }
        PathSpec::with_plane(shape, center, scale, period, timing, e1, e2)
    }

    pub fn with_plane(
        shape: PathShape,
        center: DVector<f64>,
        scale: f64,
        period: f64,
        timing: Timing,
        e1: DVector<f64>,
        e2: DVector<f64>,
    ) -> Result<Self> {
        let m = center.len();
        if !(m == 2 || m == 3) {
            return Err(Error::config(format!("path dimension must be 2 or 3, got {m}")));
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::config(format!("path period must be positive, got {period}")));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::config(format!("path scale must be positive, got {scale}")));
        }
        if e1.len() != m || e2.len() != m {
            return Err(Error::config("plane basis dimension differs from center"));
        }
        if (e1.norm() - 1.0).abs() > 1e-12 || (e2.norm() - 1.0).abs() > 1e-12 || e1.dot(&e2).abs() > 1e-12 {
            return Err(Error::config("plane basis must be orthonormal"));
        }
        if let PathShape::Starfish { r0, r1 } = shape {
            if !(r0.is_finite() && r1.is_finite()) {
                return Err(Error::config("starfish radii must be finite"));
            }
        }
        Ok(PathSpec {
            shape,
            center,
            scale,
            period,
            e1,
            e2,
            timing,
        })
    }

    /// Path whose start point `ℛ(0)` is `start`.
    pub fn anchored(
        shape: PathShape,
        start: &DVector<f64>,
        scale: f64,
        period: f64,
        timing: Timing,
        e1: DVector<f64>,
        e2: DVector<f64>,
    ) -> Result<Self> {
        let (rho0, _, _) = shape.radius(0.0);
        let center = start - &e1 * (scale * rho0);
        PathSpec::with_plane(shape, center, scale, period, timing, e1, e2)
    }

    pub fn shape(&self) -> PathShape {
        self.shape
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn timing(&self) -> Timing {
        self.timing
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn plane(&self) -> (&DVector<f64>, &DVector<f64>) {
        (&self.e1, &self.e2)
    }

    /// Evaluates the closed-form expressions at any `t`, including slightly
    /// outside `[0, T]` as finite-difference stencils require.
    pub fn evaluate(&self, t: f64) -> PathSample {
        let (a, da, dda) = self.timing.angle(t, self.period);
        let (rho, drho, ddrho) = self.shape.radius(a);
        let (s, c) = a.sin_cos();
        let u = &self.e1 * c + &self.e2 * s;
        let up = &self.e2 * c - &self.e1 * s;
        let position = &self.center + &u * (self.scale * rho);
        // d/dα (ρu) = ρ'u + ρu⊥ ;  d²/dα² (ρu) = (ρ'' − ρ)u + 2ρ'u⊥
        let d1 = &u * drho + &up * rho;
        let d2 = &u * (ddrho - rho) + &up * (2.0 * drho);
        PathSample {
            position,
            velocity: &d1 * (self.scale * da),
            acceleration: (d2 * (da * da) + d1 * dda) * self.scale,
        }
    }
}

/// `(ℛ(t), ℛ̇(t), ℛ̈(t))` for `t ∈ [0, T]`.
pub fn sample_path(spec: &PathSpec, t: f64) -> Result<PathSample> {
    if !(0.0..=spec.period).contains(&t) {
        return Err(Error::OutOfRange { t, period: spec.period });
    }
    Ok(spec.evaluate(t))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathReport {
    pub closure_error: f64,
    pub max_velocity_error: f64,
    pub max_acceleration_error: f64,
    /// `|ℛ̇(0)| + |ℛ̇(T)|`; `None` for uniform timing.
    pub endpoint_speed: Option<f64>,
}

impl PathReport {
    pub const CLOSURE_TOL: f64 = 1e-12;
    pub const VELOCITY_TOL: f64 = 1e-6;
    pub const ACCELERATION_TOL: f64 = 1e-4;

    pub fn closure_ok(&self) -> bool {
        self.closure_error <= Self::CLOSURE_TOL
    }

    pub fn velocity_ok(&self) -> bool {
        self.max_velocity_error <= Self::VELOCITY_TOL
    }

    pub fn acceleration_ok(&self) -> bool {
        self.max_acceleration_error <= Self::ACCELERATION_TOL
    }

    pub fn endpoints_ok(&self) -> bool {
        self.endpoint_speed.is_none_or(|v| v == 0.0)
    }

    pub fn passed(&self) -> bool {
        self.closure_ok() && self.velocity_ok() && self.acceleration_ok() && self.endpoints_ok()
    }
}

/// Cross-checks the analytic derivatives against central differences on a
/// 1000-point grid and verifies the closure invariants.
pub fn path_consistency_check(spec: &PathSpec) -> PathReport {
    let h = 1e-4;
    let grid = 1000;
    let mut max_v: f64 = 0.0;
    let mut max_a: f64 = 0.0;
    for k in 0..grid {
        let t = spec.period * k as f64 / (grid - 1) as f64;
        let s = spec.evaluate(t);
        let m2 = spec.evaluate(t - 2.0 * h);
        let m1 = spec.evaluate(t - h);
        let p1 = spec.evaluate(t + h);
        let p2 = spec.evaluate(t + 2.0 * h);
        let fd_v = (&m2.position - &m1.position * 8.0 + &p1.position * 8.0 - &p2.position) / (12.0 * h);
        let fd_a = (&m2.velocity - &m1.velocity * 8.0 + &p1.velocity * 8.0 - &p2.velocity) / (12.0 * h);
        max_v = max_v.max((fd_v - &s.velocity).amax());
        max_a = max_a.max((fd_a - &s.acceleration).amax());
    }
    let start = spec.evaluate(0.0);
    let end = spec.evaluate(spec.period);
    PathReport {
        closure_error: (&start.position - &end.position).amax(),
        max_velocity_error: max_v,
        max_acceleration_error: max_a,
        endpoint_speed: match spec.timing {
            Timing::Uniform => None,
            Timing::Smoothstart => Some(start.velocity.norm() + end.velocity.norm()),
        },
    }
}

/// Writes `points` evenly spaced samples over one period as `t,x,y[,z]`.
pub fn write_path_csv<W: Write>(spec: &PathSpec, points: usize, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let axes = ["x", "y", "z"];
    let mut header = vec!["t".to_string()];
    header.extend(axes[..spec.dim()].iter().map(|s| s.to_string()));
    w.write_record(&header)?;
    let denom = points.saturating_sub(1).max(1) as f64;
    for k in 0..points {
        let t = spec.period * k as f64 / denom;
        let p = spec.evaluate(t).position;
        let mut row = vec![t.to_string()];
        row.extend(p.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::Csv(e.to_string()))?;
    Ok(())
}
