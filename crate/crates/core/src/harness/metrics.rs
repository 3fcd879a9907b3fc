use nalgebra::DVector;
use serde::Serialize;

use super::log::TrajectoryLog;
use crate::error::{Error, Result};
use crate::paths::PathSpec;

/// Cartesian tracking error of a logged run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorMetrics {
    pub t: Vec<f64>,
    /// `F(θ(t)) − ℛ(t)` per sample (m).
    pub eps_xyz: Vec<Vec<f64>>,
    /// `√(ε_x² + ε_y² + ε_z²)` per sample (m).
    pub rms: Vec<f64>,
    pub max_rms: f64,
    /// `‖θ(end) − θ(0)‖₂` (rad).
    pub joint_drift: f64,
}

impl ErrorMetrics {
    /// Means of the RMS trace over its first and last quarter of samples.
    pub fn quarter_means(&self) -> (f64, f64) {
        let k = (self.rms.len() / 4).max(1);
        let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
        (mean(&self.rms[..k]), mean(&self.rms[self.rms.len() - k..]))
    }
}

/// Recomputes the error against `path` from the logged positions.
pub fn compute_error_metrics(log: &TrajectoryLog, path: &PathSpec) -> Result<ErrorMetrics> {
    let (first, last) = match (log.rows.first(), log.rows.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::config("empty trajectory log")),
    };
    if path.dim() != log.m {
        return Err(Error::DimensionMismatch {
            sampler: "path",
            expected: (log.m, 1),
            found: (path.dim(), 1),
        });
    }
    let mut eps_xyz = Vec::with_capacity(log.len());
    let mut rms = Vec::with_capacity(log.len());
    for row in &log.rows {
        let e: DVector<f64> = &row.position - path.evaluate(row.t).position;
        rms.push(e.norm());
        eps_xyz.push(e.iter().copied().collect());
    }
    Ok(ErrorMetrics {
        t: log.rows.iter().map(|r| r.t).collect(),
        max_rms: rms.iter().cloned().fold(0.0, f64::max),
        eps_xyz,
        rms,
        joint_drift: (&last.theta - &first.theta).norm(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::log::LogRow;
    use crate::paths::{PathShape, Timing};
    use approx::assert_relative_eq;
    use nalgebra::dvector;

    fn row(t: f64, position: DVector<f64>, theta: DVector<f64>) -> LogRow {
        LogRow {
            t,
            theta: theta.clone(),
            dtheta: theta.clone() * 0.0,
            ddtheta: theta * 0.0,
            y: DVector::zeros(6),
            qp_residual: 0.0,
            eps: position.clone() * 0.0,
            position,
            rms: 0.0,
            tau: None,
        }
    }

    #[test]
    fn perfect_tracking_has_zero_error() {
        let path = PathSpec::new(PathShape::starfish(), dvector![0.2, 0.1, 0.3], 0.1, 2.0, Timing::Smoothstart).unwrap();
        let mut log = TrajectoryLog::new(3, 3, false);
        for k in 0..11 {
            let t = 0.2 * k as f64;
            log.rows.push(row(t, path.evaluate(t).position, dvector![0.0, 0.0, 0.0]));
        }
        let m = compute_error_metrics(&log, &path).unwrap();
        assert!(m.rms.iter().all(|&r| r == 0.0));
        assert_eq!(m.max_rms, 0.0);
    }

    #[test]
    fn three_four_five() {
        let path = PathSpec::new(PathShape::Circle, dvector![0.0, 0.0, 0.0], 1.0, 1.0, Timing::Uniform).unwrap();
        let mut log = TrajectoryLog::new(3, 3, false);
        log.rows.push(row(0.0, dvector![1.0 + 3e-3, 4e-3, 0.0], dvector![0.1, 0.2, 0.3]));
        let m = compute_error_metrics(&log, &path).unwrap();
        assert_relative_eq!(m.rms[0], 5e-3, epsilon = 1e-15);
        assert_relative_eq!(m.max_rms, 5e-3, epsilon = 1e-15);
        assert_eq!(m.joint_drift, 0.0);
        assert!(m.rms[0] >= m.eps_xyz[0].iter().fold(0.0f64, |a, b| a.max(b.abs())) / 3f64.sqrt());
    }

    #[test]
    fn drift_and_quarters() {
        let path = PathSpec::new(PathShape::Circle, dvector![0.0, 0.0], 1.0, 1.0, Timing::Uniform).unwrap();
        let mut log = TrajectoryLog::new(2, 2, false);
        for k in 0..8 {
            let t = k as f64 / 8.0;
            let mut p = path.evaluate(t).position;
            p[0] += 1e-3 * k as f64;
            log.rows.push(row(t, p, dvector![0.0, 0.3 * t]));
        }
        log.rows.last_mut().unwrap().theta = dvector![3e-3, 4e-3];
        let m = compute_error_metrics(&log, &path).unwrap();
        assert_relative_eq!(m.joint_drift, 5e-3, epsilon = 1e-15);
        let (a, b) = m.quarter_means();
        assert_relative_eq!(a, 0.5e-3, epsilon = 1e-15);
        assert_relative_eq!(b, 6.5e-3, epsilon = 1e-15);
        assert!(compute_error_metrics(&TrajectoryLog::new(2, 2, false), &path).is_err());
    }
}
