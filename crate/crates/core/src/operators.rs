//! Operator families `F(p, M)`, drift and potential fields, and randomized
//! checks of the structural hypotheses.

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::DomainSpec;
use crate::Point;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

/// Symmetric 2x2 matrix `[[m11, m12], [m12, m22]]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct SymMatrix2 {
    pub m11: f64,
    pub m12: f64,
    pub m22: f64,
}

impl SymMatrix2 {
    pub const fn new(m11: f64, m12: f64, m22: f64) -> Self {
        Self { m11, m12, m22 }
    }

    pub const fn diag(d1: f64, d2: f64) -> Self {
        Self::new(d1, 0.0, d2)
    }

    pub const fn identity() -> Self {
        Self::diag(1.0, 1.0)
    }

    /// `(u ⊗ v + v ⊗ u) / 2`.
    pub fn sym_outer(u: Point, v: Point) -> Self {
        Self::new(u[0] * v[0], 0.5 * (u[0] * v[1] + u[1] * v[0]), u[1] * v[1])
    }

    pub fn outer(u: Point) -> Self {
        Self::sym_outer(u, u)
    }

    pub fn trace(&self) -> f64 {
        self.m11 + self.m22
    }

    pub fn det(&self) -> f64 {
        self.m11 * self.m22 - self.m12 * self.m12
    }

    pub fn scale(&self, t: f64) -> Self {
        Self::new(t * self.m11, t * self.m12, t * self.m22)
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        (self.m11 * self.m11 + 2.0 * self.m12 * self.m12 + self.m22 * self.m22).sqrt()
    }

    /// `(λ_min, λ_max)`.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * (self.m11 + self.m22);
        let r = (0.5 * (self.m11 - self.m22)).hypot(self.m12);
        (mean - r, mean + r)
    }

    pub fn quad(&self, v: Point) -> f64 {
        self.m11 * v[0] * v[0] + 2.0 * self.m12 * v[0] * v[1] + self.m22 * v[1] * v[1]
    }
}

impl std::ops::Add for SymMatrix2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.m11 + o.m11, self.m12 + o.m12, self.m22 + o.m22)
    }
}

impl std::ops::Sub for SymMatrix2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.m11 - o.m11, self.m12 - o.m12, self.m22 - o.m22)
    }
}

impl std::ops::Neg for SymMatrix2 {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

fn pucci_from_eigs(eigs: &[f64], up: f64, down: f64) -> f64 {
    eigs.iter().map(|&l| if l > 0.0 { up * l } else { down * l }).sum()
}

/// `M⁺(M) = A Σλ⁺ − a Σλ⁻`.
pub fn pucci_plus(m: &SymMatrix2, a: f64, big_a: f64) -> f64 {
    let (l1, l2) = m.eigenvalues();
    pucci_from_eigs(&[l1, l2], big_a, a)
}

/// `M⁻(M) = a Σλ⁺ − A Σλ⁻`.
pub fn pucci_minus(m: &SymMatrix2, a: f64, big_a: f64) -> f64 {
    let (l1, l2) = m.eigenvalues();
    pucci_from_eigs(&[l1, l2], a, big_a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    PucciSup,
    PucciInf,
    Trace,
}

impl Family {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "pucci_sup" => Ok(Family::PucciSup),
            "pucci_inf" => Ok(Family::PucciInf),
            "trace" => Ok(Family::Trace),
            other => Err(Error::InvalidParams(format!("unknown operator family `{other}`"))),
        }
    }

    /// The dual family `-F(-M)`.
    pub fn dual(self) -> Self {
        match self {
            Family::PucciSup => Family::PucciInf,
            Family::PucciInf => Family::PucciSup,
            Family::Trace => Family::Trace,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::PucciSup => "pucci_sup",
            Family::PucciInf => "pucci_inf",
            Family::Trace => "trace",
        })
    }
}

#[derive(Clone)]
pub enum ScalarField {
    Const(f64),
    Expr(Expr),
    Func(Arc<dyn Fn(Point) -> f64 + Send + Sync>),
}

impl ScalarField {
    pub fn parse(src: &str) -> Result<Self> {
        let e = Expr::parse(src)?;
        Ok(match e.as_constant() {
            Some(c) => ScalarField::Const(c),
            None => ScalarField::Expr(e),
        })
    }

    pub fn eval(&self, x: Point) -> f64 {
        match self {
            ScalarField::Const(c) => *c,
            ScalarField::Expr(e) => e.eval(x[0], x[1]),
            ScalarField::Func(f) => f(x),
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            ScalarField::Const(c) => Some(*c),
            _ => None,
        }
    }
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarField::Const(c) => write!(f, "Const({c})"),
            ScalarField::Expr(e) => write!(f, "Expr({e})"),
            ScalarField::Func(_) => write!(f, "Func(..)"),
        }
    }
}

impl Default for ScalarField {
    fn default() -> Self {
        ScalarField::Const(0.0)
    }
}

#[derive(Clone)]
pub enum VectorField {
    Const(Point),
    Expr(Expr, Expr),
    Func(Arc<dyn Fn(Point) -> Point + Send + Sync>),
}

impl VectorField {
    pub fn zero() -> Self {
        VectorField::Const([0.0, 0.0])
    }

    pub fn parse(sx: &str, sy: &str) -> Result<Self> {
        let (ex, ey) = (Expr::parse(sx)?, Expr::parse(sy)?);
        Ok(match (ex.as_constant(), ey.as_constant()) {
            (Some(cx), Some(cy)) => VectorField::Const([cx, cy]),
            _ => VectorField::Expr(ex, ey),
        })
    }

    pub fn eval(&self, x: Point) -> Point {
        match self {
            VectorField::Const(c) => *c,
            VectorField::Expr(ex, ey) => [ex.eval(x[0], x[1]), ey.eval(x[0], x[1])],
            VectorField::Func(f) => f(x),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, VectorField::Const(c) if c[0] == 0.0 && c[1] == 0.0)
    }
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VectorField::Const(c) => write!(f, "Const({c:?})"),
            VectorField::Expr(ex, ey) => write!(f, "Expr({ex}, {ey})"),
            VectorField::Func(_) => write!(f, "Func(..)"),
        }
    }
}

impl Default for VectorField {
    fn default() -> Self {
        Self::zero()
    }
}

/// Ellipticity bounds, degeneracy exponent, operator family, drift `h` and
/// potential `V`.
#[derive(Debug, Clone)]
pub struct EllipticParams {
    pub a: f64,
    pub big_a: f64,
    pub alpha: f64,
    pub family: Family,
    pub drift: VectorField,
    pub potential: ScalarField,
}

impl EllipticParams {
    pub fn new(a: f64, big_a: f64, alpha: f64, family: Family) -> Result<Self> {
        let p = Self {
            a,
            big_a,
            alpha,
            family,
            drift: VectorField::zero(),
            potential: ScalarField::default(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn laplacian() -> Self {
        Self::new(1.0, 1.0, 0.0, Family::Trace).expect("valid")
    }

    pub fn with_drift(mut self, drift: VectorField) -> Self {
        self.drift = drift;
        self
    }

    pub fn with_potential(mut self, potential: ScalarField) -> Self {
        self.potential = potential;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::InvalidParams(format!("a = {} must be positive", self.a)));
        }
        if !(self.big_a >= self.a && self.big_a.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "A = {} must be at least a = {}",
                self.big_a, self.a
            )));
        }
        if !(self.alpha > -1.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParams(format!("alpha = {} must exceed -1", self.alpha)));
        }
        Ok(())
    }

    /// Upper ellipticity actually used by the family (`a` for the trace family).
    pub fn upper(&self) -> f64 {
        match self.family {
            Family::Trace => self.a,
            _ => self.big_a,
        }
    }

    /// The dual operator `-F(-M)`, with the same fields.
    pub fn dual(&self) -> Self {
        Self { family: self.family.dual(), ..self.clone() }
    }
}

/// Second-order part without the gradient weight.
pub fn second_order(m: &SymMatrix2, params: &EllipticParams) -> f64 {
    match params.family {
        Family::PucciSup => pucci_plus(m, params.a, params.big_a),
        Family::PucciInf => pucci_minus(m, params.a, params.big_a),
        Family::Trace => params.a * m.trace(),
    }
}

fn norm(p: Point) -> f64 {
    p[0].hypot(p[1])
}

/// `F(x, p, M) = |p|^α G(M)`.
pub fn eval_f(_x: Point, p: Point, m: &SymMatrix2, params: &EllipticParams) -> Result<f64> {
    let np = norm(p);
    if np == 0.0 {
        return Err(Error::InvalidParams("F is undefined at p = 0".into()));
    }
    Ok(np.powf(params.alpha) * second_order(m, params))
}

/// `F(x,p,M) + h(x)·p|p|^α + (V(x)+λ)|u|^α u`.
pub fn full_operator(
    x: Point,
    p: Point,
    m: &SymMatrix2,
    u_val: f64,
    lambda: f64,
    params: &EllipticParams,
) -> Result<f64> {
    let f = eval_f(x, p, m, params)?;
    let h = params.drift.eval(x);
    let w = norm(p).powf(params.alpha);
    let zero = (params.potential.eval(x) + lambda) * signed_power(u_val, params.alpha);
    Ok(f + (h[0] * p[0] + h[1] * p[1]) * w + zero)
}

/// `|u|^α u`, with value 0 at `u = 0`.
pub fn signed_power(u: f64, alpha: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        u.abs().powf(alpha) * u
    }
}

/// Maximum violation found for each structural hypothesis.
#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport {
    pub trials: usize,
    /// Homogeneity, relative.
    pub h1: f64,
    /// Ellipticity sandwich, relative.
    pub h2: f64,
    /// x-dependence, relative. Zero for the shipped families.
    pub h3: f64,
    /// For `alpha > 0`: largest positive `(h(x)-h(y))·(x-y) / |x-y|²`.
    pub h5_monotone: Option<f64>,
    /// For `alpha <= 0`: sampled Hölder constant of `h` with exponent `1+alpha`.
    pub h5_holder_constant: Option<f64>,
    pub ok: bool,
}

const HYPOTHESIS_TOL: f64 = 1e-10;

fn random_sym<R: Rng>(rng: &mut R, scale: f64) -> SymMatrix2 {
    SymMatrix2::new(
        rng.gen_range(-scale..scale),
        rng.gen_range(-scale..scale),
        rng.gen_range(-scale..scale),
    )
}

fn random_psd<R: Rng>(rng: &mut R, scale: f64) -> SymMatrix2 {
    let u = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
    let v = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
    (SymMatrix2::outer(u) + SymMatrix2::outer(v)).scale(scale)
}

fn random_nonzero<R: Rng>(rng: &mut R) -> Point {
    loop {
        let p = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        if norm(p) > 1e-3 {
            return p;
        }
    }
}

/// Randomized verification of homogeneity, ellipticity, x-independence and
/// the drift condition, the latter over points of `domain`.
pub fn check_hypotheses(
    params: &EllipticParams,
    domain: &DomainSpec,
    trials: usize,
    seed: u64,
) -> Result<HypothesisReport> {
    params.validate()?;
    if trials == 0 {
        return Err(Error::InvalidParams("trials must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, big_a, alpha) = (params.a, params.upper(), params.alpha);
    let (mut h1, mut h2, mut h3) = (0.0f64, 0.0f64, 0.0f64);
    let points = domain.interior_samples(trials.clamp(2, 4096));
    for k in 0..trials {
        let x = points[k % points.len()];
        let y = points[(k * 7 + 1) % points.len()];
        let p = random_nonzero(&mut rng);
        let m = random_sym(&mut rng, 10.0);
        let n = random_psd(&mut rng, 5.0);
        let t = rng.gen_range(0.1..4.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let mu = rng.gen_range(0.0..4.0);

        let base = eval_f(x, p, &m, params)?;
        let scaled = eval_f(x, [t * p[0], t * p[1]], &m.scale(mu), params)?;
        let want = t.abs().powf(alpha) * mu * base;
        h1 = h1.max((scaled - want).abs() / (1.0 + want.abs()));

        let diff = eval_f(x, p, &(m + n), params)? - base;
        let w = norm(p).powf(alpha);
        let (lo, hi) = (a * w * n.trace(), big_a * w * n.trace());
        let scale = 1.0 + base.abs() + hi.abs();
        h2 = h2.max(((lo - diff).max(diff - hi)).max(0.0) / scale);

        let other = eval_f(y, p, &m, params)?;
        h3 = h3.max((other - base).abs() / (1.0 + base.abs()));
    }
    let mut h5_monotone = None;
    let mut h5_holder_constant = None;
    if !params.drift.is_zero() {
        let pts = domain.interior_samples(256);
        let mut worst_sign = f64::NEG_INFINITY;
        let mut holder = 0.0f64;
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                let (x, y) = (pts[i], pts[j]);
                let (hx, hy) = (params.drift.eval(x), params.drift.eval(y));
                let dx = [x[0] - y[0], x[1] - y[1]];
                let dh = [hx[0] - hy[0], hx[1] - hy[1]];
                let d = norm(dx);
                if alpha > 0.0 {
                    worst_sign = worst_sign.max((dh[0] * dx[0] + dh[1] * dx[1]) / (d * d));
                } else {
                    holder = holder.max(norm(dh) / d.powf(1.0 + alpha));
                }
            }
        }
        if alpha > 0.0 {
            h5_monotone = Some(worst_sign);
        } else {
            h5_holder_constant = Some(holder);
        }
    }
    let ok = h1 <= HYPOTHESIS_TOL
        && h2 <= HYPOTHESIS_TOL
        && h3 <= HYPOTHESIS_TOL
        && h5_monotone.map_or(true, |v| v <= HYPOTHESIS_TOL)
        && h5_holder_constant.map_or(true, f64::is_finite);
    Ok(HypothesisReport { trials, h1, h2, h3, h5_monotone, h5_holder_constant, ok })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn sym() -> impl Strategy<Value = SymMatrix2> {
        (-50.0..50.0f64, -50.0..50.0f64, -50.0..50.0f64).prop_map(|(a, b, c)| SymMatrix2::new(a, b, c))
    }

    fn psd() -> impl Strategy<Value = SymMatrix2> {
        (-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64)
            .prop_map(|(a, b, c, d)| SymMatrix2::outer([a, b]) + SymMatrix2::outer([c, d]))
    }

    fn bounds() -> impl Strategy<Value = (f64, f64)> {
        (0.1..3.0f64, 1.0..4.0f64).prop_map(|(a, k)| (a, a * k))
    }

    #[test]
    fn pucci_examples() {
        let i = SymMatrix2::identity();
        assert_eq!(pucci_plus(&i, 1.0, 2.0), 4.0);
        assert_eq!(pucci_minus(&i, 1.0, 2.0), 2.0);
        assert_eq!(pucci_plus(&SymMatrix2::diag(1.0, -1.0), 1.0, 2.0), 1.0);
        let gamma = 0.1;
        let x = [0.3f64, -0.7];
        let r2 = x[0] * x[0] + x[1] * x[1];
        let m = i + SymMatrix2::outer(x).scale((gamma - 2.0) / r2);
        assert!((pucci_plus(&m, 1.0, 2.0) - 1.1).abs() < 1e-14);
    }

    #[test]
    fn eval_f_examples() {
        let lap = EllipticParams::laplacian();
        let m = SymMatrix2::new(2.0, 0.4, -0.5);
        assert_eq!(eval_f([0.0, 0.0], [0.3, 0.1], &m, &lap).unwrap(), 1.5);
        assert!(eval_f([0.0, 0.0], [0.0, 0.0], &m, &lap).is_err());
        let v = full_operator([0.0, 0.0], [1.0, 0.0], &m, 2.0, 0.5, &lap.clone().with_potential(ScalarField::Const(1.0)))
            .unwrap();
        assert_eq!(v, 1.5 + 1.5 * 2.0);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(EllipticParams::new(0.0, 1.0, 0.0, Family::Trace).is_err());
        assert!(EllipticParams::new(2.0, 1.0, 0.0, Family::PucciSup).is_err());
        assert!(EllipticParams::new(1.0, 1.0, -1.0, Family::PucciSup).is_err());
    }

    #[test]
    fn hypothesis_checks() {
        let dom = DomainSpec::unit_square(PI / 2.0, 0.5).unwrap();
        let r = check_hypotheses(&EllipticParams::laplacian(), &dom, 100, 1).unwrap();
        assert!(r.ok && r.h1 < 1e-15 && r.h3 == 0.0, "{r:?}");
        let p = EllipticParams::new(0.5, 2.0, 0.7, Family::PucciSup).unwrap();
        let r = check_hypotheses(&p, &dom, 10_000, 7).unwrap();
        assert!(r.ok, "{r:?}");
        let p = EllipticParams::new(1.0, 2.0, 1.0, Family::PucciInf)
            .unwrap()
            .with_drift(VectorField::parse("-x", "-y").unwrap());
        let r = check_hypotheses(&p, &dom, 100, 2).unwrap();
        assert!(r.ok && r.h5_monotone.unwrap() <= -1.0 + 1e-12, "{r:?}");
        let p = p.with_drift(VectorField::parse("x", "y").unwrap());
        assert!(!check_hypotheses(&p, &dom, 100, 2).unwrap().ok);
    }

    proptest! {
        #[test]
        fn eigenvalues_solve_characteristic_polynomial(m in sym()) {
            let (l1, l2) = m.eigenvalues();
            prop_assert!(l1 <= l2);
            for l in [l1, l2] {
                let res = l * l - m.trace() * l + m.det();
                prop_assert!(res.abs() <= 1e-12 * (1.0 + m.norm()).powi(2));
            }
        }

        #[test]
        fn duality(m in sym(), (a, big_a) in bounds()) {
            prop_assert_eq!(pucci_plus(&m, a, big_a), -pucci_minus(&-m, a, big_a));
        }

        #[test]
        fn monotone_in_psd_direction(m in sym(), n in psd(), (a, big_a) in bounds()) {
            let tol = 1e-12 * (1.0 + m.norm());
            prop_assert!(pucci_plus(&(m + n), a, big_a) >= pucci_plus(&m, a, big_a) - tol);
            prop_assert!(pucci_minus(&(m + n), a, big_a) >= pucci_minus(&m, a, big_a) - tol);
        }

        #[test]
        fn sub_and_superadditive(m1 in sym(), m2 in sym(), (a, big_a) in bounds()) {
            let tol = 1e-11 * (1.0 + m1.norm() + m2.norm()) * big_a;
            prop_assert!(pucci_plus(&(m1 + m2), a, big_a) <= pucci_plus(&m1, a, big_a) + pucci_plus(&m2, a, big_a) + tol);
            prop_assert!(pucci_minus(&(m1 + m2), a, big_a) >= pucci_minus(&m1, a, big_a) + pucci_minus(&m2, a, big_a) - tol);
        }

        #[test]
        fn homogeneity(m in sym(), p in (-3.0..3.0f64, -3.0..3.0f64), t in 0.1..5.0f64, mu in 0.0..5.0f64,
                       alpha in prop::sample::select(vec![-0.5, 0.0, 1.0]),
                       fam in prop::sample::select(vec![Family::PucciSup, Family::PucciInf, Family::Trace])) {
            prop_assume!(p.0.hypot(p.1) > 1e-3);
            let params = EllipticParams::new(0.7, 1.9, alpha, fam).unwrap();
            let p = [p.0, p.1];
            let lhs = eval_f([0.0, 0.0], [t * p[0], t * p[1]], &m.scale(mu), &params).unwrap();
            let rhs = t.powf(alpha) * mu * eval_f([0.0, 0.0], p, &m, &params).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
        }

        #[test]
        fn lambda_shift_matches_potential_shift(u in -3.0..3.0f64, lam in -5.0..5.0f64, c in -5.0..5.0f64) {
            let base = EllipticParams::new(1.0, 2.0, 0.5, Family::PucciSup).unwrap();
            let shifted = base.clone().with_potential(ScalarField::Const(c));
            let m = SymMatrix2::new(1.0, 0.2, -0.3);
            let l = full_operator([0.1, 0.2], [1.0, 1.0], &m, u, lam + c, &base).unwrap();
            let r = full_operator([0.1, 0.2], [1.0, 1.0], &m, u, lam, &shifted).unwrap();
            prop_assert!((l - r).abs() <= 1e-12 * (1.0 + l.abs()));
        }
    }
}
