//! Time-varying QPs written as arithmetic expressions of `t`.
//!
//! Every coefficient entry is a string such as `2 + sin(t)` or `cos(t)^2`.
//! Supported: numbers, `t`, `pi`, `e`, `+ - * / ^`, parentheses and the
//! usual functions (`sin`, `cos`, `tan`, `exp`, `ln`, `sqrt`, `abs`, ...).

use meval::{Context, Expr};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::qp::{QpSample, TimeVaryingQp};

struct Entry {
    key: String,
    expr: Expr,
}

pub struct ExprQp {
    n: usize,
    m: usize,
    q: Vec<Entry>,
    p: Vec<Entry>,
    j: Vec<Entry>,
    b: Vec<Entry>,
    ctx: Context<'static>,
}

fn parse_entry(key: String, text: &str, ctx: &Context) -> Result<Entry> {
    let expr: Expr = text.parse().map_err(|e: meval::Error| Error::Expression {
        key: key.clone(),
        message: e.to_string(),
    })?;
    // surface unknown names and non-finite values up front
    let v = expr.eval_with_context((("t", 0.0), ctx)).map_err(|e| Error::Expression {
        key: key.clone(),
        message: e.to_string(),
    })?;
    if !v.is_finite() {
        return Err(Error::Expression {
            key,
            message: format!("`{text}` is not finite at t=0"),
        });
    }
    Ok(Entry { key, expr })
}

fn parse_matrix(name: &str, rows: &[Vec<String>], nrows: usize, ncols: usize, ctx: &Context) -> Result<Vec<Entry>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Expression {
            key: name.to_string(),
            message: format!("expected a {nrows}x{ncols} matrix"),
        });
    }
    let mut out = Vec::with_capacity(nrows * ncols);
    // column-major to match nalgebra storage
    for c in 0..ncols {
        for (r, row) in rows.iter().enumerate() {
            out.push(parse_entry(format!("{name}[{r}][{c}]"), &row[c], ctx)?);
        }
    }
    Ok(out)
}

fn parse_vector(name: &str, items: &[String], len: usize, ctx: &Context) -> Result<Vec<Entry>> {
    if items.len() != len {
        return Err(Error::Expression {
            key: name.to_string(),
            message: format!("expected {len} entries, found {}", items.len()),
        });
    }
    items
        .iter()
        .enumerate()
        .map(|(i, s)| parse_entry(format!("{name}[{i}]"), s, ctx))
        .collect()
}

impl ExprQp {
    /// `q` is n×n, `p` has n entries, `j` is m×n and `b` has m entries;
    /// matrices are given row by row.
    pub fn parse(q: &[Vec<String>], p: &[String], j: &[Vec<String>], b: &[String]) -> Result<Self> {
        let n = p.len();
        let m = b.len();
        if n == 0 {
            return Err(Error::Expression {
                key: "p".into(),
                message: "at least one decision variable is required".into(),
            });
        }
        let ctx = Context::new();
        Ok(ExprQp {
            n,
            m,
            q: parse_matrix("q", q, n, n, &ctx)?,
            p: parse_vector("p", p, n, &ctx)?,
            j: parse_matrix("j", j, m, n, &ctx)?,
            b: parse_vector("b", b, m, &ctx)?,
            ctx,
        })
    }

    fn eval<'a>(&'a self, entries: &'a [Entry], t: f64) -> impl Iterator<Item = f64> + 'a {
        let ctx = &self.ctx;
        entries.iter().map(move |e| {
            e.expr.eval_with_context((("t", t), ctx)).unwrap_or_else(|err| {
                log::error!("{}: {err}", e.key);
                f64::NAN
            })
        })
    }
}

impl std::fmt::Debug for ExprQp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExprQp").field("n", &self.n).field("m", &self.m).finish_non_exhaustive()
    }
}

impl TimeVaryingQp for ExprQp {
    fn n(&self) -> usize {
        self.n
    }

    fn m(&self) -> usize {
        self.m
    }

    fn sample(&self, t: f64) -> QpSample {
        let (n, m) = (self.n, self.m);
        QpSample {
            q: DMatrix::from_iterator(n, n, self.eval(&self.q, t)),
            p: DVector::from_iterator(n, self.eval(&self.p, t)),
            j: DMatrix::from_iterator(m, n, self.eval(&self.j, t)),
            b: DVector::from_iterator(m, self.eval(&self.b, t)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{dmatrix, dvector};

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn evaluates_row_major_input() {
        let qp = ExprQp::parse(
            &[s(&["2", "t"]), s(&["t", "3 + cos(t)"])],
            &s(&["-1", "sin(t)"]),
            &[s(&["1", "2*t"])],
            &s(&["t^2"]),
        )
        .unwrap();
        let smp = qp.sample(2.0);
        assert_relative_eq!(smp.q, dmatrix![2.0, 2.0; 2.0, 3.0 + 2f64.cos()]);
        assert_relative_eq!(smp.p, dvector![-1.0, 2f64.sin()]);
        assert_relative_eq!(smp.j, dmatrix![1.0, 4.0]);
        assert_relative_eq!(smp.b, dvector![4.0]);
        let rate = qp.sample_rate(2.0);
        assert_relative_eq!(rate.b, dvector![4.0], epsilon = 1e-9);
        assert_relative_eq!(rate.q[(1, 1)], -2f64.sin(), epsilon = 1e-9);
    }

    #[test]
    fn reports_offending_key() {
        let err = ExprQp::parse(&[s(&["1"])], &s(&["sin("]), &[s(&["1"])], &s(&["0"])).unwrap_err();
        assert!(matches!(err, Error::Expression { ref key, .. } if key == "p[0]"), "{err}");
        let err = ExprQp::parse(&[s(&["1"])], &s(&["0"]), &[s(&["1"])], &s(&["x"])).unwrap_err();
        assert!(matches!(err, Error::Expression { ref key, .. } if key == "b[0]"), "{err}");
        let err = ExprQp::parse(&[s(&["1", "0"])], &s(&["0"]), &[s(&["1"])], &s(&["0"])).unwrap_err();
        assert!(matches!(err, Error::Expression { ref key, .. } if key == "q"));
    }
}
