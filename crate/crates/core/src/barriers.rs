//! Closed-form cone barriers.
//!
//! The local barrier at an apex `z` with axis `n` is `v = r^γ φ(θ)`, where
//! `r = |x − z|`, `θ` is the angle between `x − z` and `n`, and
//! `φ = C₁e^{σ₁θ} + C₂e^{σ₂θ}` solves `aφ″ − βφ′ + γA(N−1)φ = 0` with
//! `φ′(0) = 0` and `φ(ψ) = 1`. The global barrier glues `v` to a pole
//! function `G` centred at an exterior point `y`.

use crate::error::{Error, Result};
use crate::geometry::{required_opening, DomainSpec};
use crate::operators::{second_order, EllipticParams, SymMatrix2};
use crate::Point;
use serde::Serialize;

const ANGLE_SAMPLES: usize = 4001;

fn beta(params: &EllipticParams, psi: f64, gamma: f64, n_dim: usize) -> f64 {
    let (a, big_a) = (params.a, params.upper());
    let cot_neg = (-1.0 / psi.tan()).max(0.0);
    big_a * ((n_dim as f64 - 1.0) * cot_neg + 2.0) + gamma * (big_a - a)
}

/// Roots `σ₁ > σ₂ > 0` of `aσ² − βσ + γA(N−1) = 0`, if real and distinct.
fn exponents(params: &EllipticParams, psi: f64, gamma: f64, n_dim: usize) -> Option<(f64, f64, f64)> {
    let b = beta(params, psi, gamma, n_dim) / params.a;
    let c = gamma * (n_dim as f64 - 1.0) * params.upper() / params.a;
    let disc = b * b - 4.0 * c;
    if disc <= 0.0 {
        return None;
    }
    let s1 = 0.5 * (b + disc.sqrt());
    // stable small root
    let s2 = c / s1;
    Some((b * params.a, s1, s2))
}

fn admissible(params: &EllipticParams, psi: f64, gamma: f64, n_dim: usize) -> bool {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return false;
    }
    let Some((_, s1, s2)) = exponents(params, psi, gamma, n_dim) else {
        return false;
    };
    let solvable = (s2 - s1) * psi > (s2 / s1).ln();
    let margin = 1.0 - gamma >= gamma.powf(1.0f64.min(1.0 + params.alpha));
    solvable && margin
}

/// Largest admissible exponent found by bisection, scaled by 0.9.
///
/// Besides real distinct exponents and `e^{(σ₂−σ₁)ψ} > σ₂/σ₁`, the exponent
/// must satisfy `1 − γ ≥ γ^{min(1, 1+α)}`, which keeps the supersolution
/// margin of the local barrier positive for every `α > −1`.
pub fn choose_gamma(params: &EllipticParams, psi: f64, n_dim: usize) -> Result<f64> {
    params.validate()?;
    if !(psi > 0.0 && psi < std::f64::consts::PI) {
        return Err(Error::InvalidParams(format!("psi = {psi} must lie in (0, pi)")));
    }
    if n_dim < 2 {
        return Err(Error::InvalidParams("dimension must be at least 2".into()));
    }
    if admissible(params, psi, 1.0, n_dim) {
        return Ok(0.9);
    }
    let mut lo = 1.0;
    while !admissible(params, psi, lo, n_dim) {
        lo *= 0.5;
        if lo < 1e-300 {
            return Err(Error::Internal(format!("no admissible gamma for psi = {psi}")));
        }
    }
    let mut hi = (2.0 * lo).min(1.0);
    while hi - lo > 1e-6 * hi {
        let mid = 0.5 * (lo + hi);
        if admissible(params, psi, mid, n_dim) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut gamma = 0.9 * lo;
    while !admissible(params, psi, gamma, n_dim) {
        gamma *= 0.9;
        if gamma < 1e-300 {
            return Err(Error::Internal("admissible set is not an interval".into()));
        }
    }
    Ok(gamma)
}

/// Parameters of the local barrier `v = r^γ φ(θ)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalBarrierParams {
    pub z: Point,
    pub n: Point,
    pub psi: f64,
    pub gamma: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub c1: f64,
    pub c2: f64,
    pub beta: f64,
    /// `min over [0, ψ]` of `(φ² + φ′²)^{α/2}`.
    pub c_psi: f64,
    /// `max over [0, ψ]` of `γ²φ² + φ′²`.
    pub q_max: f64,
    pub r_o: f64,
    pub b: f64,
    pub n_dim: usize,
}

impl LocalBarrierParams {
    pub fn phi(&self, t: f64) -> f64 {
        self.c1 * (self.sigma1 * t).exp() + self.c2 * (self.sigma2 * t).exp()
    }

    pub fn dphi(&self, t: f64) -> f64 {
        self.c1 * self.sigma1 * (self.sigma1 * t).exp() + self.c2 * self.sigma2 * (self.sigma2 * t).exp()
    }

    pub fn ddphi(&self, t: f64) -> f64 {
        self.c1 * self.sigma1.powi(2) * (self.sigma1 * t).exp()
            + self.c2 * self.sigma2.powi(2) * (self.sigma2 * t).exp()
    }

    /// Same profile with apex `z` and unit axis `n`.
    pub fn at(&self, z: Point, n: Point) -> Self {
        let len = n[0].hypot(n[1]);
        Self { z, n: [n[0] / len, n[1] / len], ..self.clone() }
    }

    /// Radius and angle of `x` about the apex.
    pub fn polar(&self, x: Point) -> (f64, f64) {
        let d = [x[0] - self.z[0], x[1] - self.z[1]];
        let r = d[0].hypot(d[1]);
        let xn = d[0] * self.n[0] + d[1] * self.n[1];
        let xt = d[1] * self.n[0] - d[0] * self.n[1];
        (r, xt.abs().atan2(xn))
    }

    pub fn value(&self, x: Point) -> f64 {
        let (r, t) = self.polar(x);
        r.powf(self.gamma) * self.phi(t)
    }
}

/// Solves for `(C₁, C₂)` and derives `C_ψ`, `r_o`, `b`. The apex is the
/// origin and the axis is `e₂`; see [`LocalBarrierParams::at`].
pub fn build_phi(
    gamma: f64,
    psi: f64,
    params: &EllipticParams,
    n_dim: usize,
    rbar: f64,
    h_sup: f64,
) -> Result<LocalBarrierParams> {
    params.validate()?;
    let (beta, s1, s2) = exponents(params, psi, gamma, n_dim)
        .ok_or_else(|| Error::InadmissibleGamma(format!("gamma = {gamma}: exponents not real and distinct")))?;
    if !(s1 - s2 > 1e-14 * s1) {
        return Err(Error::InadmissibleGamma(format!("gamma = {gamma}: singular system")));
    }
    // C₁σ₁ + C₂σ₂ = 0, C₁e^{σ₁ψ} + C₂e^{σ₂ψ} = 1
    let denom = (s2 * psi).exp() - (s2 / s1) * (s1 * psi).exp();
    if !(denom > 0.0) {
        return Err(Error::InadmissibleGamma(format!("gamma = {gamma}: solvability fails")));
    }
    let c2 = 1.0 / denom;
    let c1 = -c2 * s2 / s1;
    if !(c1 < 0.0 && c2 > 0.0) {
        return Err(Error::InadmissibleGamma(format!("gamma = {gamma}: C1 = {c1}, C2 = {c2}")));
    }
    let mut lb = LocalBarrierParams {
        z: [0.0, 0.0],
        n: [0.0, 1.0],
        psi,
        gamma,
        sigma1: s1,
        sigma2: s2,
        c1,
        c2,
        beta,
        c_psi: 0.0,
        q_max: 0.0,
        r_o: rbar,
        b: 0.0,
        n_dim,
    };
    let alpha = params.alpha;
    let (mut s_min, mut s_max, mut q_max) = (f64::INFINITY, 0.0f64, 0.0f64);
    for k in 0..ANGLE_SAMPLES {
        let t = psi * k as f64 / (ANGLE_SAMPLES - 1) as f64;
        let (p, dp) = (lb.phi(t), lb.dphi(t));
        let s = p * p + dp * dp;
        s_min = s_min.min(s);
        s_max = s_max.max(s);
        q_max = q_max.max(gamma * gamma * p * p + dp * dp);
    }
    // sampled extrema are widened slightly to stay on the safe side
    let c_psi = if alpha >= 0.0 {
        (0.99 * s_min).powf(0.5 * alpha)
    } else {
        (1.01 * s_max).powf(0.5 * alpha)
    };
    lb.c_psi = c_psi;
    lb.q_max = 1.01 * q_max;
    let a = params.a;
    let lead = a * gamma.powf(2.0 + alpha) * c_psi;
    if h_sup > 0.0 {
        lb.r_o = rbar.min(lead / (2.0 * h_sup * lb.q_max.powf(0.5 * (1.0 + alpha))));
    }
    let e = gamma * (alpha + 1.0) - alpha - 2.0;
    lb.b = 0.5 * lead * lb.r_o.powf(e);
    Ok(lb)
}

/// Value, gradient and Hessian of a barrier at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Jet {
    pub value: f64,
    pub grad: Point,
    pub hess: SymMatrix2,
}

impl Jet {
    fn scale(&self, t: f64) -> Self {
        Jet {
            value: t * self.value,
            grad: [t * self.grad[0], t * self.grad[1]],
            hess: self.hess.scale(t),
        }
    }
}

/// Exact `v`, `∇v` and `D²v` inside the sector `0 < r < r_o`, `θ ≤ ψ`.
pub fn eval_local_barrier(x: Point, lb: &LocalBarrierParams) -> Result<Jet> {
    let d = [x[0] - lb.z[0], x[1] - lb.z[1]];
    let r = d[0].hypot(d[1]);
    if r == 0.0 {
        return Err(Error::OutsideDomain("local barrier evaluated at its apex".into()));
    }
    let (_, theta) = lb.polar(x);
    if theta > lb.psi + 1e-12 || r >= lb.r_o {
        return Err(Error::OutsideDomain(format!("{x:?} lies outside the barrier sector")));
    }
    let n = lb.n;
    let g = lb.gamma;
    let r2 = r * r;
    let rg = r.powf(g);
    let (p, dp, ddp) = (lb.phi(theta), lb.dphi(theta), lb.ddphi(theta));
    let xn = d[0] * n[0] + d[1] * n[1];
    let xp = [d[0] - xn * n[0], d[1] - xn * n[1]];
    let rp = xp[0].hypot(xp[1]);
    let radial = SymMatrix2::identity() + SymMatrix2::outer(d).scale((g - 2.0) / r2);
    let mut hess = radial.scale(g * p);
    let mut grad = [g * rg / r2 * d[0] * p, g * rg / r2 * d[1] * p];
    if rp > 1e-12 * r {
        let dtheta = [(xn * d[0] / r2 - n[0]) / rp, (xn * d[1] / r2 - n[1]) / rp];
        let bracket = SymMatrix2::sym_outer(xp, n).scale(2.0)
            + SymMatrix2::outer(n).scale(xn)
            - SymMatrix2::outer(d).scale(2.0 * xn / r2)
            + SymMatrix2::identity().scale(xn);
        let d2theta = SymMatrix2::outer(xp).scale(-xn / (rp.powi(3) * r2)) + bracket.scale(1.0 / (rp * r2));
        let mixed = d2theta.scale(r2) + SymMatrix2::sym_outer(dtheta, d).scale(2.0 * g);
        hess = hess + mixed.scale(dp) + SymMatrix2::outer(dtheta).scale(ddp * r2);
        grad[0] += rg * dp * dtheta[0];
        grad[1] += rg * dp * dtheta[1];
    } else {
        // on the axis φ′ = 0 and ∇θ ⊗ ∇θ = t ⊗ t / r²
        let t = [-n[1], n[0]];
        hess = hess + SymMatrix2::outer(t).scale(ddp);
    }
    Ok(Jet { value: rg * p, grad, hess: hess.scale(rg / r2) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BarrierSign {
    Upper,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Local,
    Pole,
}

/// `W_z = ±min(G, v)/κ` with `G = (r_o^γ r₁^σ / 2)(r₁^{−σ} − |x − y|^{−σ})`.
#[derive(Debug, Clone)]
pub struct GlobalBarrier {
    pub local: LocalBarrierParams,
    pub y: Point,
    pub r1: f64,
    pub sigma: f64,
    pub kappa: f64,
    pub sign: BarrierSign,
    pub h_sup: f64,
    pub rho_max: f64,
    params: EllipticParams,
    domain: DomainSpec,
}

fn sup_drift(domain: &DomainSpec, params: &EllipticParams) -> f64 {
    if params.drift.is_zero() {
        return 0.0;
    }
    let mut pts = domain.vertices().to_vec();
    pts.extend(domain.boundary_samples(2000));
    pts.extend(domain.interior_samples(2000));
    pts.iter()
        .map(|&p| {
            let h = params.drift.eval(p);
            h[0].hypot(h[1])
        })
        .fold(0.0, f64::max)
}

/// Builds the global barrier at the boundary point `z`.
///
/// The pole sits at `y = z − 3r₁n` with `r₁ = r̄/8`, halving `r₁` until the
/// ball `B(y, 2r₁)` clears the closed domain. The normalization uses
/// `κ^{1+α} = min(b, c^{1+α} A N σ^{1+α} ρ_max^{−(σ+1)(1+α)−1})`, where
/// `c = r_o^γ r₁^σ / 2` and `ρ_max` is the largest distance from `y` to the
/// domain.
pub fn build_global_barrier(
    domain: &DomainSpec,
    z: Point,
    params: &EllipticParams,
    sign: BarrierSign,
) -> Result<GlobalBarrier> {
    params.validate()?;
    let scale = domain.diameter();
    if domain.distance_to_boundary(z) > 1e-9 * scale {
        return Err(Error::OutsideDomain(format!("apex {z:?} is not on the boundary")));
    }
    let view = required_opening(domain.vertices(), z, domain.rbar());
    if view.opening > domain.psi() + 1e-9 {
        return Err(Error::Geometry(format!(
            "cone at {z:?} needs opening {} > psi = {}",
            view.opening,
            domain.psi()
        )));
    }
    let n_dim = 2;
    let h_sup = sup_drift(domain, params);
    let gamma = choose_gamma(params, domain.psi(), n_dim)?;
    let local = build_phi(gamma, domain.psi(), params, n_dim, domain.rbar(), h_sup)?.at(z, view.axis);
    let n = local.n;
    let mut r1 = domain.rbar() / 8.0;
    let y = loop {
        let y = [z[0] - 3.0 * r1 * n[0], z[1] - 3.0 * r1 * n[1]];
        if !domain.contains(y) && domain.distance_to_boundary(y) > 2.0 * r1 {
            break y;
        }
        r1 *= 0.5;
        if r1 < 1e-12 * scale {
            return Err(Error::Geometry(format!("no exterior pole found for apex {z:?}")));
        }
    };
    let rho_max = domain
        .vertices()
        .iter()
        .map(|v| (v[0] - y[0]).hypot(v[1] - y[1]))
        .fold(0.0, f64::max);
    let (a, big_a, alpha) = (params.a, params.upper(), params.alpha);
    let reach = scale.max(rho_max);
    let sigma = (4.0 * big_a * n_dim as f64 / a).max(2.0 * h_sup * reach / a) - 1.0;
    let c = 0.5 * local.r_o.powf(gamma) * r1.powf(sigma);
    let expo = (sigma + 1.0) * (1.0 + alpha) + 1.0;
    // c^{1+α}σ^{1+α}ρ^{−E} with E > 0, assembled in logs
    let log_pole = (1.0 + alpha) * (c.ln() + sigma.ln()) + (big_a * n_dim as f64).ln() - expo * rho_max.ln();
    let kappa_pow = local.b.ln().min(log_pole);
    let kappa = (kappa_pow / (1.0 + alpha)).exp();
    Ok(GlobalBarrier {
        local,
        y,
        r1,
        sigma,
        kappa,
        sign,
        h_sup,
        rho_max,
        params: params.clone(),
        domain: domain.clone(),
    })
}

impl GlobalBarrier {
    /// Copy with a different normalization constant.
    pub fn with_kappa(&self, kappa: f64) -> Self {
        Self { kappa, ..self.clone() }
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn params(&self) -> &EllipticParams {
        &self.params
    }

    fn pole_scale(&self) -> f64 {
        0.5 * self.local.r_o.powf(self.local.gamma) * self.r1.powf(self.sigma)
    }

    fn sign_factor(&self) -> f64 {
        match self.sign {
            BarrierSign::Upper => 1.0,
            BarrierSign::Lower => -1.0,
        }
    }

    fn pole_jet(&self, x: Point) -> Jet {
        let c = self.pole_scale();
        let s = self.sigma;
        let d = [x[0] - self.y[0], x[1] - self.y[1]];
        let rho = d[0].hypot(d[1]);
        let value = c * (self.r1.powf(-s) - rho.powf(-s));
        let k = c * s * rho.powf(-s - 2.0);
        let hess = SymMatrix2::identity().scale(k) + SymMatrix2::outer(d).scale(-k * (s + 2.0) / (rho * rho));
        Jet { value, grad: [k * d[0], k * d[1]], hess }
    }

    fn in_sector(&self, x: Point) -> bool {
        let (r, t) = self.local.polar(x);
        r < self.local.r_o && t <= self.local.psi
    }

    /// Active branch and its unnormalized jet; `None` at the apex.
    fn branch(&self, x: Point) -> Option<(Branch, Jet, Jet)> {
        let pole = self.pole_jet(x);
        if x == self.local.z {
            return None;
        }
        if self.in_sector(x) {
            if let Ok(loc) = eval_local_barrier(x, &self.local) {
                if loc.value < pole.value {
                    return Some((Branch::Local, loc, pole));
                }
                return Some((Branch::Pole, pole, loc));
            }
        }
        Some((Branch::Pole, pole, pole))
    }

    pub fn value(&self, x: Point) -> f64 {
        let g = self.pole_jet(x).value;
        let m = if self.in_sector(x) { g.min(self.local.value(x)) } else { g };
        self.sign_factor() * m / self.kappa
    }

    /// Exact jet of the active branch; `None` at the apex.
    pub fn eval(&self, x: Point) -> Option<(Branch, Jet)> {
        let (b, jet, _) = self.branch(x)?;
        Some((b, jet.scale(self.sign_factor() / self.kappa)))
    }

    /// `F(∇W, D²W) + h·∇W|∇W|^α` for the active branch.
    pub fn residual(&self, x: Point) -> Option<f64> {
        let (_, jet) = self.eval(x)?;
        let p = jet.grad;
        let np = p[0].hypot(p[1]);
        if np == 0.0 {
            return None;
        }
        let w = np.powf(self.params.alpha);
        let h = self.params.drift.eval(x);
        Some(w * (second_order(&jet.hess, &self.params) + h[0] * p[0] + h[1] * p[1]))
    }

    /// `C_w` in `|W_z(x)| ≤ C_w |x − z|^γ`.
    pub fn near_apex_constant(&self) -> f64 {
        self.local.phi(0.0) / self.kappa
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CertifyReport {
    pub sign: BarrierSign,
    pub samples_used: usize,
    pub excluded: usize,
    /// Largest residual for an upper barrier, smallest for a lower one.
    pub worst_residual: f64,
    /// Distance from the worst residual to the required bound; negative on failure.
    pub margin: f64,
    pub local_samples: usize,
    pub pole_samples: usize,
    pub pass: bool,
}

const CERTIFY_TOL: f64 = 1e-8;

/// Samples the exact residual at Halton points of the domain, skipping a
/// `1e-6` neighbourhood of the apex and of the branch-switch set.
pub fn certify_barrier(gb: &GlobalBarrier, samples: usize) -> CertifyReport {
    let upper = gb.sign == BarrierSign::Upper;
    let mut worst = if upper { f64::NEG_INFINITY } else { f64::INFINITY };
    let (mut used, mut excluded, mut local, mut pole) = (0, 0, 0, 0);
    for x in gb.domain.interior_samples(samples) {
        let (r, _) = gb.local.polar(x);
        if r < 1e-6 {
            excluded += 1;
            continue;
        }
        let Some((branch, jet, other)) = gb.branch(x) else {
            excluded += 1;
            continue;
        };
        if branch == Branch::Local || other != jet {
            let gap = (jet.value - other.value).abs();
            let slope = (jet.grad[0] - other.grad[0]).hypot(jet.grad[1] - other.grad[1]);
            if gap < 1e-6 * slope {
                excluded += 1;
                continue;
            }
        }
        let Some(res) = gb.residual(x) else {
            excluded += 1;
            continue;
        };
        used += 1;
        match branch {
            Branch::Local => local += 1,
            Branch::Pole => pole += 1,
        }
        worst = if upper { worst.max(res) } else { worst.min(res) };
    }
    let margin = if upper { -1.0 - worst } else { worst - 1.0 };
    CertifyReport {
        sign: gb.sign,
        samples_used: used,
        excluded,
        worst_residual: worst,
        margin,
        local_samples: local,
        pole_samples: pole,
        pass: used > 0 && margin >= -CERTIFY_TOL,
    }
}

/// JSON record for one barrier.
#[derive(Debug, Clone, Serialize)]
pub struct BarrierReport {
    pub apex: Point,
    pub local: LocalBarrierParams,
    pub pole: Point,
    pub r1: f64,
    pub sigma: f64,
    pub kappa: f64,
    pub h_sup: f64,
    pub near_apex_constant: f64,
    pub certificate: CertifyReport,
}

impl BarrierReport {
    pub fn new(gb: &GlobalBarrier, certificate: CertifyReport) -> Self {
        Self {
            apex: gb.local.z,
            local: gb.local.clone(),
            pole: gb.y,
            r1: gb.r1,
            sigma: gb.sigma,
            kappa: gb.kappa,
            h_sup: gb.h_sup,
            near_apex_constant: gb.near_apex_constant(),
            certificate,
        }
    }
}

/// A boundary strip `{d(x, ∂Ω) < rho}` on which anything dominated by the
/// upper barriers stays below `delta`.
#[derive(Debug, Clone, Serialize)]
pub struct BoundaryLayer {
    pub delta: f64,
    pub rho: f64,
    pub gamma: f64,
    pub phi0: f64,
    pub kappa_min: f64,
    pub apexes: usize,
}

/// `rho = min(r_o, (δ κ_min / φ(0))^{1/γ})`, with `κ_min` the smallest
/// normalization over the vertices and `apexes` boundary samples. Inside the
/// sector `W_z ≤ φ(0) r^γ / κ`, so `W_z ≤ δ` for `r < rho`.
pub fn boundary_layer(domain: &DomainSpec, params: &EllipticParams, delta: f64, apexes: usize) -> Result<BoundaryLayer> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParams("delta must be positive".into()));
    }
    let mut pts = domain.vertices().to_vec();
    pts.extend(domain.boundary_samples(apexes));
    let mut kappa_min = f64::INFINITY;
    let mut local = None;
    for z in &pts {
        let gb = build_global_barrier(domain, *z, params, BarrierSign::Upper)?;
        kappa_min = kappa_min.min(gb.kappa);
        local.get_or_insert(gb.local);
    }
    let local = local.ok_or_else(|| Error::Geometry("no boundary points".into()))?;
    let phi0 = local.phi(0.0);
    let rho = (delta * kappa_min / phi0).powf(1.0 / local.gamma).min(local.r_o);
    Ok(BoundaryLayer { delta, rho, gamma: local.gamma, phi0, kappa_min, apexes: pts.len() })
}
