//! Sampled tracking logs and their CSV form.
//!
//! Column order: `t, theta_1..n, dtheta_1..n, ddtheta_1..n, y_1..(n+m),
//! qp_residual, pos_x, pos_y[, pos_z], eps_x, eps_y[, eps_z], rms
//! [, tau_1..n]`. Values are written in shortest round-trip form.

use std::io::{Read, Write};

use nalgebra::DVector;

use crate::error::{Error, Result};

const AXES: [&str; 3] = ["x", "y", "z"];

#[derive(Clone, Debug, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub theta: DVector<f64>,
    pub dtheta: DVector<f64>,
    pub ddtheta: DVector<f64>,
    /// Neural state `𝒴 = [x; λ]`.
    pub y: DVector<f64>,
    /// `‖A𝒴 − Z‖₂`.
    pub qp_residual: f64,
    /// End-effector position `F(θ)` (m).
    pub position: DVector<f64>,
    /// `F(θ) − ℛ(t)` (m).
    pub eps: DVector<f64>,
    pub rms: f64,
    /// Joint torques (N·m), when the chain has dynamics.
    pub tau: Option<DVector<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryLog {
    pub n: usize,
    pub m: usize,
    pub has_tau: bool,
    pub rows: Vec<LogRow>,
}

impl TrajectoryLog {
    pub fn new(n: usize, m: usize, has_tau: bool) -> Self {
        TrajectoryLog {
            n,
            m,
            has_tau,
            rows: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> Option<&LogRow> {
        self.rows.last()
    }

    pub fn header(&self) -> Vec<String> {
        let (n, m) = (self.n, self.m);
        let mut h = vec!["t".to_string()];
        for prefix in ["theta", "dtheta", "ddtheta"] {
            h.extend((1..=n).map(|i| format!("{prefix}_{i}")));
        }
        h.extend((1..=n + m).map(|i| format!("y_{i}")));
        h.push("qp_residual".into());
        h.extend(AXES[..m].iter().map(|a| format!("pos_{a}")));
        h.extend(AXES[..m].iter().map(|a| format!("eps_{a}")));
        h.push("rms".into());
        if self.has_tau {
            h.extend((1..=n).map(|i| format!("tau_{i}")));
        }
        h
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header())?;
        let mut fields = Vec::with_capacity(self.header().len());
        for row in &self.rows {
            fields.clear();
            fields.push(row.t.to_string());
            for v in [&row.theta, &row.dtheta, &row.ddtheta, &row.y] {
                fields.extend(v.iter().map(f64::to_string));
            }
            fields.push(row.qp_residual.to_string());
            fields.extend(row.position.iter().map(f64::to_string));
            fields.extend(row.eps.iter().map(f64::to_string));
            fields.push(row.rms.to_string());
            if let Some(tau) = &row.tau {
                fields.extend(tau.iter().map(f64::to_string));
            }
            w.write_record(&fields)?;
        }
        w.flush().map_err(|e| Error::Csv(e.to_string()))
    }

    /// Parses a log written by [`TrajectoryLog::write_csv`]; dimensions are
    /// recovered from the header.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let count = |prefix: &str| header.iter().filter(|h| h.starts_with(prefix)).count();
        let n = count("theta_");
        let m = count("pos_");
        let has_tau = count("tau_") > 0;
        let log = TrajectoryLog::new(n, m, has_tau);
        if header != log.header() {
            return Err(Error::Csv("unexpected column layout".into()));
        }
        let mut log = log;
        for (idx, record) in r.records().enumerate() {
            let record = record?;
            let values = record
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|e| Error::Csv(format!("row {}: `{f}`: {e}", idx + 1)))
                })
                .collect::<Result<Vec<f64>>>()?;
            if values.len() != header.len() {
                return Err(Error::Csv(format!("row {} has {} fields", idx + 1, values.len())));
            }
            let mut it = values.into_iter();
            let mut take = |k: usize| DVector::from_iterator(k, it.by_ref().take(k));
            let t = take(1)[0];
            let theta = take(n);
            let dtheta = take(n);
            let ddtheta = take(n);
            let y = take(n + m);
            let qp_residual = take(1)[0];
            let position = take(m);
            let eps = take(m);
            let rms = take(1)[0];
            let tau = has_tau.then(|| take(n));
            log.rows.push(LogRow {
                t,
                theta,
                dtheta,
                ddtheta,
                y,
                qp_residual,
                position,
                eps,
                rms,
                tau,
            });
        }
        Ok(log)
    }
}
