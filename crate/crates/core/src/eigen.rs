//! Principal eigenvalue estimates and maximum-principle tests.
//!
//! `λ̄` is located by bisection on the admissibility of the shifted
//! iteration with `f ≡ −1`: bounded iterates mean the Dirichlet problem is
//! solvable at that `λ`. Inverse iteration supplies the eigenfunction.

use crate::error::{Error, Result};
use crate::geometry::{build_grid, exterior_approximation, interior_exhaustion, DomainSpec, Grid};
use crate::operators::{signed_power, EllipticParams, ScalarField};
use crate::scheme::{iterate_shifted, solve_u0, Cache, GridFunction, Problem, ShiftedOptions, SolveConfig, SolveOutcome};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Debug, Clone, Serialize)]
pub struct EigenConfig {
    /// Bisection width; defaults to `1e-3 |λ_hi|`.
    pub tol_lambda: Option<f64>,
    pub bracket: Option<[f64; 2]>,
    pub j_max: usize,
    pub max_inverse_steps: usize,
}

impl Default for EigenConfig {
    fn default() -> Self {
        Self { tol_lambda: None, bracket: None, j_max: 6, max_inverse_steps: 500 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EigenMethod {
    Bisection,
    InverseIteration,
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenResult {
    pub lambda: f64,
    #[serde(skip)]
    pub phi: Option<GridFunction>,
    /// Sup-norm of the full discrete operator at `(φ, λ)`; `None` without `φ`.
    pub residual: Option<f64>,
    pub domain_tag: String,
    pub method: EigenMethod,
    pub grid_h: f64,
    /// Final bracket for bisection.
    pub bracket: Option<[f64; 2]>,
    pub tol_lambda: f64,
    pub iterations: usize,
}

fn sup_potential(grid: &Grid, params: &EllipticParams) -> f64 {
    grid.positions().iter().map(|&p| params.potential.eval(p)).fold(f64::NEG_INFINITY, f64::max)
}

/// True when the shifted iteration with `f ≡ −1` stays bounded at `lambda`.
pub fn admissible(grid: &Arc<Grid>, params: &EllipticParams, lambda: f64, cfg: &SolveConfig) -> Result<bool> {
    let f = vec![-1.0; grid.len()];
    let opts = ShiftedOptions { early_decision: true, ..Default::default() };
    let out = iterate_shifted(grid.clone(), params, lambda, &f, cfg, &opts)?;
    Ok(!out.is_blowup())
}

/// Bisection for `λ̄` on one grid.
///
/// Without a bracket the search starts from `[−sup V, −sup V + 8π² max(1, A)/|Ω|]`
/// and doubles the width until the upper end is inadmissible.
pub fn lambda_bar_bisect(
    grid: &Arc<Grid>,
    params: &EllipticParams,
    cfg: &SolveConfig,
    eig: &EigenConfig,
) -> Result<EigenResult> {
    let (mut lo, mut hi) = match eig.bracket {
        Some([lo, hi]) => {
            if !(lo < hi) {
                return Err(Error::BadBracket(format!("[{lo}, {hi}] is empty")));
            }
            if !admissible(grid, params, lo, cfg)? {
                return Err(Error::BadBracket(format!("lower end {lo} is not admissible")));
            }
            if admissible(grid, params, hi, cfg)? {
                return Err(Error::BadBracket(format!("upper end {hi} is admissible")));
            }
            (lo, hi)
        }
        None => {
            let lo = -sup_potential(grid, params);
            let area = grid.domain().area();
            let mut width = 4.0 * 2.0 * PI * PI / area * params.big_a.max(1.0);
            let mut doublings = 0;
            while admissible(grid, params, lo + width, cfg)? {
                width *= 2.0;
                doublings += 1;
                if doublings > 60 {
                    return Err(Error::BadBracket("no inadmissible upper end found".into()));
                }
            }
            (lo, lo + width)
        }
    };
    let tol = eig.tol_lambda.unwrap_or(1e-3 * hi.abs());
    if !(tol > 0.0) {
        return Err(Error::InvalidParams("tol_lambda must be positive".into()));
    }
    let mut steps = 0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if admissible(grid, params, mid, cfg)? {
            lo = mid;
        } else {
            hi = mid;
        }
        steps += 1;
    }
    Ok(EigenResult {
        lambda: 0.5 * (lo + hi),
        phi: None,
        residual: None,
        domain_tag: "omega".into(),
        method: EigenMethod::Bisection,
        grid_h: grid.spacing(),
        bracket: Some([lo, hi]),
        tol_lambda: tol,
        iterations: steps,
    })
}

/// Sup-norm of `F_h[φ] + h·∇φ|∇φ|^α + (V + λ)|φ|^α φ` over the unknowns.
pub fn eigen_residual(phi: &GridFunction, params: &EllipticParams, lambda: f64, eps_grad: f64) -> Result<f64> {
    let grid = phi.grid().clone();
    let n = grid.len();
    let prob = Problem::new(grid, params, lambda, vec![0.0; n], phi.trace.clone(), eps_grad)?;
    Ok(prob.residual(&phi.values).iter().fold(0.0, |m, r| m.max(r.abs())))
}

/// Inverse iteration `F[w] + h·∇w|∇w|^α + (V − s)|w|^α w = −|u|^α u`,
/// `u ← w / sup w`, with `s = (sup V)⁺` keeping the zero-order term proper.
/// Then `λ = (sup w)^{−(1+α)} − s`.
pub fn inverse_iteration(grid: &Arc<Grid>, params: &EllipticParams, cfg: &SolveConfig, eig: &EigenConfig) -> Result<EigenResult> {
    let alpha = params.alpha;
    let s = sup_potential(grid, params).max(0.0);
    let u0 = solve_u0(grid.clone(), params, cfg)?;
    let top = u0.sup();
    if !(top > 0.0) {
        return Err(Error::IterationCollapse("torsion function vanishes".into()));
    }
    let mut u: Vec<f64> = u0.values.iter().map(|v| v / top).collect();
    let n = grid.len();
    let trace = vec![0.0; grid.cut_points().len()];
    let mut prob = Problem::new(grid.clone(), params, -s, vec![0.0; n], trace.clone(), cfg.eps_grad)?;
    let mut cache = Cache::default();
    let mut lambda_prev = f64::NAN;
    let mut iterations = 0;
    let mut result = None;
    for it in 0..eig.max_inverse_steps {
        for i in 0..n {
            prob.rhs[i] = -signed_power(u[i], alpha);
        }
        let w = match crate::scheme::solve_problem(&prob, Some(u.clone()), cfg, &mut cache)? {
            SolveOutcome::Converged { u, .. } => u.values,
            _ => return Err(Error::IterationCollapse("inner solve did not converge".into())),
        };
        let top = w.iter().cloned().fold(0.0, f64::max);
        if !(top > 1e-300) || !top.is_finite() {
            return Err(Error::IterationCollapse(format!("sup w = {top:e}")));
        }
        let lambda = top.powf(-(1.0 + alpha)) - s;
        u = w.iter().map(|v| (v / top).max(0.0)).collect();
        iterations = it + 1;
        let phi = GridFunction::from_parts(grid.clone(), u.clone(), trace.clone());
        let residual = eigen_residual(&phi, params, lambda, cfg.eps_grad)?;
        let tol = eig.tol_lambda.unwrap_or(1e-3 * lambda.abs());
        let settled = (lambda - lambda_prev).abs() <= tol;
        result = Some((lambda, phi, residual, tol));
        if settled && residual <= 10.0 * cfg.tol * lambda.abs().max(1.0) {
            break;
        }
        lambda_prev = lambda;
    }
    let (lambda, phi, residual, tol) = result.ok_or_else(|| Error::IterationCollapse("no iterations".into()))?;
    Ok(EigenResult {
        lambda,
        phi: Some(phi),
        residual: Some(residual),
        domain_tag: "omega".into(),
        method: EigenMethod::InverseIteration,
        grid_h: grid.spacing(),
        bracket: None,
        tol_lambda: tol,
        iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Interior,
    Exterior,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExhaustionReport {
    pub side: Side,
    pub entries: Vec<EigenResult>,
    /// Levels `j` at which the expected monotonicity fails by more than `2 tol_lambda`.
    pub violations: Vec<usize>,
    pub monotone: bool,
}

/// Bisection estimates on `H_j` (interior) or `Ω_j` (exterior) for `j = 1..=j_max`.
pub fn eigen_exhaustion(
    domain: &DomainSpec,
    params: &EllipticParams,
    side: Side,
    h_grid: f64,
    stencil_order: usize,
    cfg: &SolveConfig,
    eig: &EigenConfig,
) -> Result<ExhaustionReport> {
    if eig.j_max == 0 {
        return Err(Error::InvalidParams("j_max must be at least 1".into()));
    }
    let entries: Vec<EigenResult> = (1..=eig.j_max)
        .into_par_iter()
        .map(|j| {
            let dom = match side {
                Side::Interior => interior_exhaustion(domain, j)?,
                Side::Exterior => exterior_approximation(domain, j)?,
            };
            let grid = Arc::new(build_grid(&dom, h_grid, stencil_order)?);
            let mut r = lambda_bar_bisect(&grid, params, cfg, eig)?;
            r.domain_tag = match side {
                Side::Interior => format!("H_{j}"),
                Side::Exterior => format!("Omega_{j}"),
            };
            Ok(r)
        })
        .collect::<Result<_>>()?;
    let mut violations = Vec::new();
    for (k, w) in entries.windows(2).enumerate() {
        let slack = 2.0 * w[0].tol_lambda.max(w[1].tol_lambda);
        let bad = match side {
            Side::Interior => w[1].lambda > w[0].lambda + slack,
            Side::Exterior => w[1].lambda < w[0].lambda - slack,
        };
        if bad {
            violations.push(k + 2);
        }
    }
    Ok(ExhaustionReport { side, monotone: violations.is_empty(), entries, violations })
}

#[derive(Debug, Clone, Serialize)]
pub struct MaxPrincipleReport {
    pub lambda: f64,
    pub trials: usize,
    pub passed: usize,
    /// Largest nodal value over all trials.
    pub worst: f64,
    /// The shifted iteration with `f ≡ −1` blew up at `lambda`.
    pub blowup_witness: bool,
    pub ok: bool,
}

fn random_bump_field(rng: &mut ChaCha8Rng, domain: &DomainSpec, scale: f64) -> ScalarField {
    let (lo, hi) = domain.bounding_box();
    let bumps: Vec<(f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.gen_range(0.0..scale),
                rng.gen_range(lo[0]..hi[0]),
                rng.gen_range(lo[1]..hi[1]),
                rng.gen_range(1.0..10.0),
            )
        })
        .collect();
    ScalarField::Func(Arc::new(move |p: crate::Point| {
        bumps.iter().map(|(c, x, y, w)| c * (-w * ((p[0] - x).powi(2) + (p[1] - y).powi(2))).exp()).sum()
    }))
}

/// Solves subsolution-side problems `F[u] + h·∇u|∇u|^α + (V+λ)|u|^α u = g ≥ 0`
/// with boundary data `≤ 0` and checks `u ≤ 1e-6`. When the shifted
/// iteration blows up at `lambda` the trials are skipped and the blow-up is
/// reported as the witness of a positive solution.
pub fn max_principle_test(
    grid: &Arc<Grid>,
    params: &EllipticParams,
    lambda: f64,
    trials: usize,
    seed: u64,
    cfg: &SolveConfig,
) -> Result<MaxPrincipleReport> {
    let blowup_witness = !admissible(grid, params, lambda, cfg)?;
    let mut report = MaxPrincipleReport { lambda, trials: 0, passed: 0, worst: f64::NEG_INFINITY, blowup_witness, ok: true };
    if blowup_witness {
        return Ok(report);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let domain = grid.domain().clone();
    for _ in 0..trials {
        let g = random_bump_field(&mut rng, &domain, 2.0);
        let b = random_bump_field(&mut rng, &domain, 1.0);
        let boundary = ScalarField::Func(Arc::new(move |p| -b.eval(p)));
        let out = crate::scheme::solve_dirichlet(grid.clone(), params, lambda, &g, &boundary, cfg)?;
        report.trials += 1;
        match out.solution() {
            Some(u) => {
                let top = u.sup();
                report.worst = report.worst.max(top);
                if top <= 1e-6 {
                    report.passed += 1;
                }
            }
            None => report.worst = f64::INFINITY,
        }
    }
    report.ok = report.passed == report.trials;
    Ok(report)
}
