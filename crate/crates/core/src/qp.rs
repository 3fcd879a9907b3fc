//! Time-varying equality-constrained QPs and their KKT form.
//!
//! A problem `min ½xᵀQ(t)x + P(t)ᵀx  s.t.  J(t)x = B(t)` is carried by a
//! [`TimeVaryingQp`]. Stationarity and feasibility stack into the augmented
//! linear system `A(t)Y(t) = Z(t)` with
//!
//! ```text
//! A = [ Q  Jᵀ ]    Y = [ x ]    Z = [ -P ]
//!     [ J  0  ]        [ λ ]        [  B ]
//! ```
//!
//! which [`AugmentedSystem`] exposes together with `Ȧ(t)` and `Ż(t)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Step used by the finite-difference derivative samplers (seconds).
pub const DERIVATIVE_STEP: f64 = 1e-4;
/// `J` is constraint-degenerate when `sigma_min < RANK_TOLERANCE * sigma_max`.
pub const RANK_TOLERANCE: f64 = 1e-8;
/// Largest accepted 1-norm condition estimate of the KKT matrix.
pub const CONDITION_CAP: f64 = 1e12;
/// Largest accepted element of `|Q - Qᵀ|`.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Coefficients of the standard QP at one instant (or their time derivatives).
#[derive(Clone, Debug, PartialEq)]
pub struct QpSample {
    pub q: DMatrix<f64>,
    pub p: DVector<f64>,
    pub j: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl QpSample {
    pub fn zeros(n: usize, m: usize) -> Self {
        QpSample {
            q: DMatrix::zeros(n, n),
            p: DVector::zeros(n),
            j: DMatrix::zeros(m, n),
            b: DVector::zeros(m),
        }
    }

    pub fn n(&self) -> usize {
        self.p.len()
    }

    pub fn m(&self) -> usize {
        self.b.len()
    }

    /// `Σ wᵢ·sᵢ`; all terms must share dimensions.
    pub fn combine(terms: &[(f64, &QpSample)]) -> QpSample {
        let first = terms[0].1;
        let mut out = QpSample::zeros(first.n(), first.m());
        for (w, s) in terms {
            out.q += &s.q * *w;
            out.p += &s.p * *w;
            out.j += &s.j * *w;
            out.b += &s.b * *w;
        }
        out
    }

    /// Checks every block against `(n, m)`, naming the first offender.
    pub fn check_dims(&self, n: usize, m: usize, rate: bool) -> Result<()> {
        let names: [&'static str; 4] = if rate {
            ["dQ", "dP", "dJ", "dB"]
        } else {
            ["Q", "P", "J", "B"]
        };
        let checks = [
            (names[0], (n, n), self.q.shape()),
            (names[1], (n, 1), self.p.shape()),
            (names[2], (m, n), self.j.shape()),
            (names[3], (m, 1), self.b.shape()),
        ];
        for (sampler, expected, found) in checks {
            if expected != found {
                return Err(Error::DimensionMismatch {
                    sampler,
                    expected,
                    found,
                });
            }
        }
        Ok(())
    }
}

/// Five-point central difference `(f(t-2h) - 8f(t-h) + 8f(t+h) - f(t+2h)) / 12h`.
pub fn five_point_rate<F>(f: F, t: f64, h: f64) -> QpSample
where
    F: Fn(f64) -> QpSample,
{
    let m2 = f(t - 2.0 * h);
    let m1 = f(t - h);
    let p1 = f(t + h);
    let p2 = f(t + 2.0 * h);
    let k = 1.0 / (12.0 * h);
    QpSample::combine(&[(k, &m2), (-8.0 * k, &m1), (8.0 * k, &p1), (-k, &p2)])
}

fn five_point_matrix(f: &dyn Fn(f64) -> DMatrix<f64>, t: f64, h: f64) -> DMatrix<f64> {
    (f(t - 2.0 * h) - f(t - h) * 8.0 + f(t + h) * 8.0 - f(t + 2.0 * h)) / (12.0 * h)
}

fn five_point_vector(f: &dyn Fn(f64) -> DVector<f64>, t: f64, h: f64) -> DVector<f64> {
    (f(t - 2.0 * h) - f(t - h) * 8.0 + f(t + h) * 8.0 - f(t + 2.0 * h)) / (12.0 * h)
}

/// A standard-form QP whose coefficients are functions of time.
///
/// Samplers must be pure functions of `t`. The default rate sampler is a
/// five-point central difference with step [`DERIVATIVE_STEP`], truncation
/// error `O(h⁴)`.
pub trait TimeVaryingQp {
    fn n(&self) -> usize;
    fn m(&self) -> usize;
    fn sample(&self, t: f64) -> QpSample;

    fn sample_rate(&self, t: f64) -> QpSample {
        five_point_rate(|s| self.sample(s), t, DERIVATIVE_STEP)
    }
}

impl<T: TimeVaryingQp + ?Sized> TimeVaryingQp for &T {
    fn n(&self) -> usize {
        (**self).n()
    }
    fn m(&self) -> usize {
        (**self).m()
    }
    fn sample(&self, t: f64) -> QpSample {
        (**self).sample(t)
    }
    fn sample_rate(&self, t: f64) -> QpSample {
        (**self).sample_rate(t)
    }
}

pub type MatrixFn = Box<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>;
pub type VectorFn = Box<dyn Fn(f64) -> DVector<f64> + Send + Sync>;

/// QP built from one closure per coefficient. Derivative closures are
/// optional; any that are missing fall back to finite differences.
pub struct FnQp {
    n: usize,
    m: usize,
    q: MatrixFn,
    p: VectorFn,
    j: MatrixFn,
    b: VectorFn,
    dq: Option<MatrixFn>,
    dp: Option<VectorFn>,
    dj: Option<MatrixFn>,
    db: Option<VectorFn>,
}

impl FnQp {
    pub fn new(n: usize, m: usize, q: MatrixFn, p: VectorFn, j: MatrixFn, b: VectorFn) -> Self {
        FnQp {
            n,
            m,
            q,
            p,
            j,
            b,
            dq: None,
            dp: None,
            dj: None,
            db: None,
        }
    }

    /// Problem with constant coefficients and exactly zero derivatives.
    pub fn constant(q: DMatrix<f64>, p: DVector<f64>, j: DMatrix<f64>, b: DVector<f64>) -> Self {
        let (n, m) = (p.len(), b.len());
        let zq = DMatrix::zeros(q.nrows(), q.ncols());
        let zp = DVector::zeros(p.len());
        let zj = DMatrix::zeros(j.nrows(), j.ncols());
        let zb = DVector::zeros(b.len());
        FnQp::new(
            n,
            m,
            Box::new(move |_| q.clone()),
            Box::new(move |_| p.clone()),
            Box::new(move |_| j.clone()),
            Box::new(move |_| b.clone()),
        )
        .with_rates(
            Some(Box::new(move |_| zq.clone())),
            Some(Box::new(move |_| zp.clone())),
            Some(Box::new(move |_| zj.clone())),
            Some(Box::new(move |_| zb.clone())),
        )
    }

    pub fn with_rates(
        mut self,
        dq: Option<MatrixFn>,
        dp: Option<VectorFn>,
        dj: Option<MatrixFn>,
        db: Option<VectorFn>,
    ) -> Self {
        self.dq = dq;
        self.dp = dp;
        self.dj = dj;
        self.db = db;
        self
    }
}

impl TimeVaryingQp for FnQp {
    fn n(&self) -> usize {
        self.n
    }

    fn m(&self) -> usize {
        self.m
    }

    fn sample(&self, t: f64) -> QpSample {
        QpSample {
            q: (self.q)(t),
            p: (self.p)(t),
            j: (self.j)(t),
            b: (self.b)(t),
        }
    }

    fn sample_rate(&self, t: f64) -> QpSample {
        let h = DERIVATIVE_STEP;
        QpSample {
            q: match &self.dq {
                Some(f) => f(t),
                None => five_point_matrix(&self.q, t, h),
            },
            p: match &self.dp {
                Some(f) => f(t),
                None => five_point_vector(&self.p, t, h),
            },
            j: match &self.dj {
                Some(f) => f(t),
                None => five_point_matrix(&self.j, t, h),
            },
            b: match &self.db {
                Some(f) => f(t),
                None => five_point_vector(&self.b, t, h),
            },
        }
    }
}

/// `A` and `Z` of `A·Y = Z` at one instant, or `Ȧ` and `Ż`.
#[derive(Clone, Debug, PartialEq)]
pub struct KktSample {
    pub a: DMatrix<f64>,
    pub z: DVector<f64>,
}

impl KktSample {
    /// Block assembly `A = [Q Jᵀ; J 0]`, `Z = [-P; B]`. Applied to a rate
    /// sample this yields `Ȧ`, `Ż` with the same layout.
    pub fn assemble(s: &QpSample) -> Self {
        let (n, m) = (s.n(), s.m());
        let mut a = DMatrix::zeros(n + m, n + m);
        a.view_mut((0, 0), (n, n)).copy_from(&s.q);
        a.view_mut((0, n), (n, m)).copy_from(&s.j.transpose());
        a.view_mut((n, 0), (m, n)).copy_from(&s.j);
        let mut z = DVector::zeros(n + m);
        z.rows_mut(0, n).copy_from(&(-&s.p));
        z.rows_mut(n, m).copy_from(&s.b);
        KktSample { a, z }
    }

    pub fn dim(&self) -> usize {
        self.z.len()
    }
}

/// A time-varying linear matrix equation `A(t)·Y(t) = Z(t)` that the neural
/// solvers can track.
pub trait TimeVaryingSystem {
    fn dim(&self) -> usize;
    fn sample(&self, t: f64) -> KktSample;
    fn sample_rate(&self, t: f64) -> KktSample;

    /// Instantaneous solution `A(t)⁻¹Z(t)`.
    fn solve_at(&self, t: f64) -> Result<DVector<f64>> {
        let s = self.sample(t);
        s.a.lu().solve(&s.z).ok_or(Error::Singular { t })
    }
}

/// A constant system with zero derivatives. The scalar surrogate `A = 1,
/// Z = 0` used for the closed-form convergence checks is one of these.
#[derive(Clone, Debug)]
pub struct ConstantSystem {
    pub a: DMatrix<f64>,
    pub z: DVector<f64>,
}

impl ConstantSystem {
    pub fn scalar(a: f64, z: f64) -> Self {
        ConstantSystem {
            a: DMatrix::from_element(1, 1, a),
            z: DVector::from_element(1, z),
        }
    }
}

impl TimeVaryingSystem for ConstantSystem {
    fn dim(&self) -> usize {
        self.z.len()
    }

    fn sample(&self, _t: f64) -> KktSample {
        KktSample {
            a: self.a.clone(),
            z: self.z.clone(),
        }
    }

    fn sample_rate(&self, _t: f64) -> KktSample {
        KktSample {
            a: DMatrix::zeros(self.a.nrows(), self.a.ncols()),
            z: DVector::zeros(self.z.len()),
        }
    }
}

/// Primal/dual split of `Y = [x; λ]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SolutionVector {
    pub x: DVector<f64>,
    pub lambda: DVector<f64>,
}

impl SolutionVector {
    pub fn from_stacked(y: &DVector<f64>, n: usize) -> Self {
        SolutionVector {
            x: y.rows(0, n).into_owned(),
            lambda: y.rows(n, y.len() - n).into_owned(),
        }
    }

    pub fn stacked(&self) -> DVector<f64> {
        let mut y = DVector::zeros(self.x.len() + self.lambda.len());
        y.rows_mut(0, self.x.len()).copy_from(&self.x);
        y.rows_mut(self.x.len(), self.lambda.len())
            .copy_from(&self.lambda);
        y
    }
}

/// The augmented KKT system of a [`TimeVaryingQp`].
pub struct AugmentedSystem<Q> {
    qp: Q,
}

impl<Q: TimeVaryingQp> AugmentedSystem<Q> {
    pub fn qp(&self) -> &Q {
        &self.qp
    }

    pub fn n(&self) -> usize {
        self.qp.n()
    }

    pub fn m(&self) -> usize {
        self.qp.m()
    }

    pub fn a(&self, t: f64) -> DMatrix<f64> {
        self.sample(t).a
    }

    pub fn z(&self, t: f64) -> DVector<f64> {
        self.sample(t).z
    }

    pub fn da(&self, t: f64) -> DMatrix<f64> {
        self.sample_rate(t).a
    }

    pub fn dz(&self, t: f64) -> DVector<f64> {
        self.sample_rate(t).z
    }
}

impl<Q: TimeVaryingQp> TimeVaryingSystem for AugmentedSystem<Q> {
    fn dim(&self) -> usize {
        self.qp.n() + self.qp.m()
    }

    fn sample(&self, t: f64) -> KktSample {
        KktSample::assemble(&self.qp.sample(t))
    }

    fn sample_rate(&self, t: f64) -> KktSample {
        KktSample::assemble(&self.qp.sample_rate(t))
    }

    fn solve_at(&self, t: f64) -> Result<DVector<f64>> {
        theoretical_solution(self, t).map(|s| s.stacked())
    }
}

/// Validates `qp` at `t = 0` and wraps it as `A(t)Y = Z(t)`.
pub fn assemble_augmented<Q: TimeVaryingQp>(qp: Q) -> Result<AugmentedSystem<Q>> {
    let (n, m) = (qp.n(), qp.m());
    if n == 0 {
        return Err(Error::config("decision dimension n must be positive"));
    }
    if m > n {
        return Err(Error::config(format!("constraint count m={m} exceeds n={n}")));
    }
    let s = qp.sample(0.0);
    s.check_dims(n, m, false)?;
    let asym = max_asymmetry(&s.q);
    if asym > SYMMETRY_TOLERANCE {
        return Err(Error::AsymmetricQ {
            t: 0.0,
            asymmetry: asym,
        });
    }
    qp.sample_rate(0.0).check_dims(n, m, true)?;
    Ok(AugmentedSystem { qp })
}

pub fn max_asymmetry(q: &DMatrix<f64>) -> f64 {
    (q - q.transpose()).amax()
}

/// `sigma_min / sigma_max` of `J`, 0 for the zero matrix.
pub fn row_rank_ratio(j: &DMatrix<f64>) -> f64 {
    if j.nrows() == 0 {
        return 1.0;
    }
    let sv = j.clone().singular_values();
    let max = sv.max();
    if max == 0.0 {
        return 0.0;
    }
    // fewer columns than rows leaves rank < m
    if j.ncols() < j.nrows() {
        return 0.0;
    }
    sv.min() / max
}

fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Dense KKT solve of one QP sample with degeneracy classification.
pub fn solve_kkt(s: &QpSample, t: f64) -> Result<SolutionVector> {
    let ratio = row_rank_ratio(&s.j);
    if ratio < RANK_TOLERANCE {
        return Err(Error::ConstraintDegenerate {
            t,
            sigma_ratio: ratio,
        });
    }
    let kkt = KktSample::assemble(s);
    let lu = kkt.a.clone().lu();
    let inv = lu.try_inverse().ok_or(Error::QDegenerate {
        t,
        condition: f64::INFINITY,
    })?;
    let condition = norm1(&kkt.a) * norm1(&inv);
    if !condition.is_finite() || condition > CONDITION_CAP {
        return Err(Error::QDegenerate { t, condition });
    }
    let mut y = lu.solve(&kkt.z).ok_or(Error::Singular { t })?;
    // one step of iterative refinement
    let r = &kkt.z - &kkt.a * &y;
    if let Some(dy) = lu.solve(&r) {
        y += dy;
    }
    Ok(SolutionVector::from_stacked(&y, s.n()))
}

/// `Y*(t) = A(t)⁻¹Z(t)` by pivoted LU.
pub fn theoretical_solution<Q: TimeVaryingQp>(
    aug: &AugmentedSystem<Q>,
    t: f64,
) -> Result<SolutionVector> {
    solve_kkt(&aug.qp.sample(t), t)
}

/// `ε(t) = A(t)·Y − Z(t)`, unnormalized.
pub fn kkt_residual<Q: TimeVaryingQp>(
    aug: &AugmentedSystem<Q>,
    y: &SolutionVector,
    t: f64,
) -> Result<DVector<f64>> {
    if y.x.len() != aug.n() || y.lambda.len() != aug.m() {
        return Err(Error::DimensionMismatch {
            sampler: "Y",
            expected: (aug.n(), aug.m()),
            found: (y.x.len(), y.lambda.len()),
        });
    }
    let s = aug.sample(t);
    Ok(&s.a * y.stacked() - &s.z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{dmatrix, dvector};

    fn unit_sum_qp() -> FnQp {
        FnQp::constant(
            DMatrix::identity(2, 2),
            dvector![0.0, 0.0],
            dmatrix![1.0, 1.0],
            dvector![2.0],
        )
    }

    #[test]
    fn assembles_block_layout() {
        let aug = assemble_augmented(unit_sum_qp()).unwrap();
        assert_eq!(
            aug.a(0.0),
            dmatrix![1.0, 0.0, 1.0; 0.0, 1.0, 1.0; 1.0, 1.0, 0.0]
        );
        assert_eq!(aug.z(0.0), dvector![0.0, 0.0, 2.0]);
        assert_eq!(aug.da(3.0), DMatrix::zeros(3, 3));
        assert_eq!(aug.dz(3.0), DVector::zeros(3));
    }

    #[test]
    fn finite_difference_rate_of_linear_q() {
        let qp = FnQp::new(
            2,
            1,
            Box::new(|t| DMatrix::identity(2, 2) * (1.0 + t)),
            Box::new(|_| DVector::zeros(2)),
            Box::new(|_| dmatrix![1.0, 1.0]),
            Box::new(|_| dvector![2.0]),
        );
        let aug = assemble_augmented(qp).unwrap();
        for t in [0.0, 0.7, 5.0] {
            let da = aug.da(t);
            assert_relative_eq!(
                da.view((0, 0), (2, 2)).into_owned(),
                DMatrix::identity(2, 2),
                epsilon = 1e-10
            );
            assert_relative_eq!(da.view((0, 2), (3, 1)).amax(), 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn names_offending_sampler() {
        let qp = FnQp::new(
            2,
            1,
            Box::new(|_| DMatrix::identity(2, 2)),
            Box::new(|_| DVector::zeros(2)),
            Box::new(|_| dmatrix![1.0, 1.0, 1.0]),
            Box::new(|_| dvector![2.0]),
        );
        match assemble_augmented(qp) {
            Err(Error::DimensionMismatch { sampler, .. }) => assert_eq!(sampler, "J"),
            other => panic!("unexpected {:?}", other.err()),
        }
    }

    #[test]
    fn rejects_asymmetric_q() {
        let qp = FnQp::constant(
            dmatrix![1.0, 0.5; 0.0, 1.0],
            dvector![0.0, 0.0],
            dmatrix![1.0, 1.0],
            dvector![2.0],
        );
        assert!(matches!(
            assemble_augmented(qp),
            Err(Error::AsymmetricQ { .. })
        ));
    }

    #[test]
    fn hand_solved_kkt() {
        let aug = assemble_augmented(unit_sum_qp()).unwrap();
        let sol = theoretical_solution(&aug, 0.0).unwrap();
        assert_relative_eq!(sol.x, dvector![1.0, 1.0], epsilon = 1e-14);
        assert_relative_eq!(sol.lambda, dvector![-1.0], epsilon = 1e-14);
    }

    #[test]
    fn constrained_linear_objective() {
        // min ½‖x‖² − x₂ subject to x₁ = 0
        let qp = FnQp::constant(
            DMatrix::identity(2, 2),
            dvector![0.0, -1.0],
            dmatrix![1.0, 0.0],
            dvector![0.0],
        );
        let aug = assemble_augmented(qp).unwrap();
        let sol = theoretical_solution(&aug, 0.0).unwrap();
        assert_relative_eq!(sol.x, dvector![0.0, 1.0], epsilon = 1e-14);
        assert_relative_eq!(sol.lambda[0], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn duplicated_constraint_row_is_constraint_degenerate() {
        let qp = FnQp::constant(
            DMatrix::identity(2, 2),
            dvector![0.0, 0.0],
            dmatrix![1.0, 1.0; 1.0, 1.0],
            dvector![2.0, 2.0],
        );
        let aug = assemble_augmented(qp).unwrap();
        assert!(matches!(
            theoretical_solution(&aug, 0.0),
            Err(Error::ConstraintDegenerate { .. })
        ));
    }

    #[test]
    fn singular_q_on_nullspace_is_q_degenerate() {
        // Q vanishes along the constraint nullspace (1, -1).
        let qp = FnQp::constant(
            dmatrix![1.0, 1.0; 1.0, 1.0],
            dvector![0.0, 0.0],
            dmatrix![1.0, 1.0],
            dvector![2.0],
        );
        let aug = assemble_augmented(qp).unwrap();
        assert!(matches!(
            theoretical_solution(&aug, 0.0),
            Err(Error::QDegenerate { .. })
        ));
    }

    #[test]
    fn residual_examples() {
        let aug = assemble_augmented(unit_sum_qp()).unwrap();
        let y = SolutionVector {
            x: dvector![1.0, 0.0],
            lambda: dvector![0.0],
        };
        assert_eq!(kkt_residual(&aug, &y, 0.0).unwrap(), dvector![1.0, 0.0, -1.0]);
        let zero = SolutionVector {
            x: DVector::zeros(2),
            lambda: DVector::zeros(1),
        };
        assert_eq!(kkt_residual(&aug, &zero, 0.0).unwrap(), -aug.z(0.0));
        let sol = theoretical_solution(&aug, 0.0).unwrap();
        let z = aug.z(0.0);
        assert!(kkt_residual(&aug, &sol, 0.0).unwrap().norm() <= 1e-10 * (1.0 + z.norm()));
    }

    #[test]
    fn residual_rejects_wrong_dimensions() {
        let aug = assemble_augmented(unit_sum_qp()).unwrap();
        let y = SolutionVector {
            x: dvector![1.0],
            lambda: dvector![0.0],
        };
        assert!(kkt_residual(&aug, &y, 0.0).is_err());
    }
}
