//! Dirichlet solvers and the shifted monotone iteration.

use super::assemble::Problem;
use super::{BandLu, GridFunction, Method, SolveConfig};
use crate::error::{Error, Result};
use crate::geometry::Grid;
use crate::operators::{signed_power, EllipticParams, Family, ScalarField};
use serde::Serialize;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogEntry {
    pub iter: usize,
    pub residual: f64,
    pub sup_norm: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SolveStats {
    pub iterations: usize,
    /// Final relative residual.
    pub residual: f64,
    pub history: Vec<LogEntry>,
}

#[derive(Debug, Clone)]
pub enum SolveOutcome {
    Converged { u: GridFunction, stats: SolveStats },
    /// Iterates crossed the blow-up threshold, or grew monotonically.
    BlowUp { sup: f64, iterations: usize, stats: SolveStats },
    /// Early bounded witness of the shifted iteration; `bound` caps the limit.
    Bounded { u: GridFunction, bound: f64, stats: SolveStats },
}

impl SolveOutcome {
    pub fn is_blowup(&self) -> bool {
        matches!(self, SolveOutcome::BlowUp { .. })
    }

    pub fn solution(&self) -> Option<&GridFunction> {
        match self {
            SolveOutcome::Converged { u, .. } | SolveOutcome::Bounded { u, .. } => Some(u),
            SolveOutcome::BlowUp { .. } => None,
        }
    }

    pub fn into_solution(self) -> Result<GridFunction> {
        match self {
            SolveOutcome::Converged { u, .. } | SolveOutcome::Bounded { u, .. } => Ok(u),
            SolveOutcome::BlowUp { sup, iterations, .. } => Err(Error::Scheme(format!(
                "iterates blew up (sup {sup:.3e}) after {iterations} iterations"
            ))),
        }
    }

    pub fn stats(&self) -> &SolveStats {
        match self {
            SolveOutcome::Converged { stats, .. }
            | SolveOutcome::BlowUp { stats, .. }
            | SolveOutcome::Bounded { stats, .. } => stats,
        }
    }
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Factorization cache shared by consecutive solves of related problems.
#[derive(Debug, Default)]
pub(crate) struct Cache {
    lu: Option<BandLu>,
}

enum Inner {
    Converged(Vec<f64>, SolveStats),
    BlowUp(f64, SolveStats),
}

fn record(stats: &mut SolveStats, iter: usize, residual: f64, u: &[f64]) {
    stats.history.push(LogEntry { iter, residual, sup_norm: norm_inf(u) });
}

fn newton(prob: &Problem, mut u: Vec<f64>, cfg: &SolveConfig, cache: &mut Cache) -> Result<Inner> {
    let scale = norm_inf(&prob.rhs).max(1.0);
    let mut stats = SolveStats::default();
    let mut r = prob.residual(&u);
    let mut reuse = cache.lu.is_some();
    let mut fresh = false;
    let mut failures = 0;
    let max_iter = cfg.max_iter.min(500);
    for it in 0..max_iter {
        let rel = norm_inf(&r) / scale;
        record(&mut stats, it, rel, &u);
        stats.iterations = it;
        stats.residual = rel;
        if rel <= cfg.tol {
            return Ok(Inner::Converged(u, stats));
        }
        let sup = norm_inf(&u);
        if sup > cfg.blowup_threshold || !sup.is_finite() {
            return Ok(Inner::BlowUp(sup, stats));
        }
        if !reuse || cache.lu.is_none() {
            let (_, rows) = prob.jacobian_rows(&u);
            cache.lu = Some(prob.band_matrix(&rows).factor()?);
            fresh = true;
        }
        let lu = cache.lu.as_ref().expect("factor present");
        let mut delta = r.clone();
        lu.solve_in_place(&mut delta);
        let base = norm2(&r);
        let mut theta = 1.0;
        let mut accepted = None;
        while theta >= 1.0 / 1024.0 {
            let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a - theta * d).collect();
            let rt = prob.residual(&trial);
            let nt = norm2(&rt);
            if nt.is_finite() && nt <= (1.0 - 1e-4 * theta) * base {
                accepted = Some((trial, rt, nt));
                break;
            }
            theta *= 0.5;
        }
        match accepted {
            Some((trial, rt, nt)) => {
                let contraction = nt / base;
                u = trial;
                r = rt;
                reuse = theta == 1.0 && contraction <= 0.5;
                fresh = false;
                failures = 0;
            }
            None if !fresh => {
                reuse = false;
            }
            None => {
                failures += 1;
                if failures > 3 {
                    return Err(Error::Stagnation {
                        iterations: it,
                        residual: rel,
                        history: stats.history.iter().map(|e| e.residual).collect(),
                    });
                }
                // a burst of damped Jacobi steps moves the iterate off the bad region
                let (_, inner) = pseudo_time_steps(prob, &mut u, cfg, 50);
                r = inner;
                cache.lu = None;
                reuse = false;
            }
        }
    }
    Err(Error::Stagnation {
        iterations: max_iter,
        residual: stats.residual,
        history: stats.history.iter().map(|e| e.residual).collect(),
    })
}

/// Runs `steps` damped nodal Newton–Jacobi updates; returns the last
/// relative residual and residual vector.
fn pseudo_time_steps(prob: &Problem, u: &mut [f64], cfg: &SolveConfig, steps: usize) -> (f64, Vec<f64>) {
    let scale = norm_inf(&prob.rhs).max(1.0);
    let mut r = Vec::new();
    for _ in 0..steps {
        let (res, rows) = prob.jacobian_rows(u);
        for i in 0..u.len() {
            if rows[i].diag != 0.0 {
                u[i] -= cfg.damping * res[i] / rows[i].diag;
            }
        }
        r = res;
    }
    let r2 = prob.residual(u);
    let rel = norm_inf(&r2) / scale;
    if r.is_empty() {
        r = r2;
    }
    (rel, r)
}

fn pseudo_time(prob: &Problem, mut u: Vec<f64>, cfg: &SolveConfig) -> Result<Inner> {
    let scale = norm_inf(&prob.rhs).max(1.0);
    let mut stats = SolveStats::default();
    let log_every = 100;
    for it in 0..cfg.max_iter {
        let (res, rows) = prob.jacobian_rows(&u);
        let rel = norm_inf(&res) / scale;
        stats.iterations = it;
        stats.residual = rel;
        if it % log_every == 0 || rel <= cfg.tol {
            record(&mut stats, it, rel, &u);
        }
        if rel <= cfg.tol {
            return Ok(Inner::Converged(u, stats));
        }
        let sup = norm_inf(&u);
        if sup > cfg.blowup_threshold || !sup.is_finite() {
            return Ok(Inner::BlowUp(sup, stats));
        }
        for i in 0..u.len() {
            if rows[i].diag != 0.0 {
                u[i] -= cfg.damping * res[i] / rows[i].diag;
            }
        }
    }
    Err(Error::Stagnation {
        iterations: cfg.max_iter,
        residual: stats.residual,
        history: stats.history.iter().map(|e| e.residual).collect(),
    })
}

/// Scaled solution of the `alpha = 0` problem, a starting point for the
/// degenerate and singular cases.
fn homogeneous_guess(prob: &Problem, cfg: &SolveConfig) -> Option<Vec<f64>> {
    let alpha = prob.params.alpha;
    if alpha == 0.0 || prob.trace.iter().any(|&g| g != 0.0) || prob.rhs.iter().all(|&f| f == 0.0) {
        return None;
    }
    let mut lin = prob.clone();
    lin.params.alpha = 0.0;
    for c in &mut lin.zero {
        *c = c.min(0.0);
    }
    let mut cache = Cache::default();
    let Ok(Inner::Converged(v, _)) = newton(&lin, vec![0.0; prob.len()], cfg, &mut cache) else {
        return None;
    };
    let mut q_prob = prob.clone();
    q_prob.rhs.iter_mut().for_each(|f| *f = 0.0);
    q_prob.zero.iter_mut().for_each(|c| *c = 0.0);
    let q = q_prob.residual(&v);
    let (num, den) = q
        .iter()
        .zip(&prob.rhs)
        .fold((0.0, 0.0), |(n, d), (qi, fi)| (n + qi * fi, d + qi * qi));
    if !(num > 0.0 && den > 0.0) {
        return None;
    }
    let s = (num / den).powf(1.0 / (1.0 + alpha));
    Some(v.into_iter().map(|x| s * x).collect())
}

pub(crate) fn solve_problem(
    prob: &Problem,
    u0: Option<Vec<f64>>,
    cfg: &SolveConfig,
    cache: &mut Cache,
) -> Result<SolveOutcome> {
    cfg.validate()?;
    let start = match u0 {
        Some(u) if u.iter().any(|&v| v != 0.0) => u,
        _ => homogeneous_guess(prob, cfg).unwrap_or_else(|| vec![0.0; prob.len()]),
    };
    let inner = match cfg.method {
        Method::Newton => newton(prob, start, cfg, cache)?,
        Method::PseudoTime => pseudo_time(prob, start, cfg)?,
    };
    Ok(match inner {
        Inner::Converged(values, stats) => {
            let u = GridFunction { grid: prob.grid.clone(), values, trace: prob.trace.clone() };
            SolveOutcome::Converged { u, stats }
        }
        Inner::BlowUp(sup, stats) => SolveOutcome::BlowUp { sup, iterations: stats.iterations, stats },
    })
}

/// Solves `F[u] + h·∇u|∇u|^α + (V + λ)|u|^α u = f` in the domain with
/// `u = g` on the boundary.
pub fn solve_dirichlet(
    grid: Arc<Grid>,
    params: &EllipticParams,
    lambda: f64,
    f: &ScalarField,
    g: &ScalarField,
    cfg: &SolveConfig,
) -> Result<SolveOutcome> {
    let prob = Problem::from_fields(grid, params, lambda, f, g, cfg.eps_grad)?;
    solve_problem(&prob, None, cfg, &mut Cache::default())
}

/// Torsion-like function: `F[u] + h·∇u|∇u|^α = −1`, `u = 0` on the boundary,
/// with the potential switched off.
pub fn solve_u0(grid: Arc<Grid>, params: &EllipticParams, cfg: &SolveConfig) -> Result<GridFunction> {
    let p = params.clone().with_potential(ScalarField::Const(0.0));
    solve_dirichlet(grid, &p, 0.0, &ScalarField::Const(-1.0), &ScalarField::Const(0.0), cfg)?.into_solution()
}

/// Options of [`iterate_shifted`].
#[derive(Debug, Clone)]
pub struct ShiftedOptions {
    pub max_outer: usize,
    /// Decide boundedness or blow-up from the growth of successive increments.
    /// Honoured only for linear operators (trace family, `alpha = 0`).
    pub early_decision: bool,
    pub boundary: ScalarField,
}

impl Default for ShiftedOptions {
    fn default() -> Self {
        Self { max_outer: 100_000, early_decision: false, boundary: ScalarField::Const(0.0) }
    }
}

/// The monotone iteration `u₁ = 0`,
/// `F[u_{n+1}] + h·∇u_{n+1}|∇u_{n+1}|^α + (V + λ − K)|u_{n+1}|^α u_{n+1} = f − K|u_n|^α u_n`
/// with `K = 2|V|∞ + |λ|`.
///
/// With `early_decision` and a linear operator, increments `d_n = u_{n+1} − u_n` that grow at
/// every node for three consecutive steps are reported as blow-up, and
/// increments that shrink by a uniform factor `ρ < 1` for three
/// consecutive steps are reported as [`SolveOutcome::Bounded`] with the
/// bound `sup u_n + sup d_n ρ / (1 − ρ)`.
pub fn iterate_shifted(
    grid: Arc<Grid>,
    params: &EllipticParams,
    lambda: f64,
    f: &[f64],
    cfg: &SolveConfig,
    opts: &ShiftedOptions,
) -> Result<SolveOutcome> {
    cfg.validate()?;
    if f.len() != grid.len() {
        return Err(Error::InvalidParams("right-hand side length does not match the grid".into()));
    }
    if f.iter().any(|&v| v > 0.0) {
        return Err(Error::InvalidParams("the shifted iteration needs f <= 0".into()));
    }
    let alpha = params.alpha;
    let v_sup = grid.positions().iter().fold(0.0f64, |m, &p| m.max(params.potential.eval(p).abs()));
    let k = 2.0 * v_sup + lambda.abs();
    let trace: Vec<f64> = grid.cut_points().iter().map(|&p| opts.boundary.eval(p)).collect();
    let mut prob = Problem::new(grid.clone(), params, lambda - k, f.to_vec(), trace, cfg.eps_grad)?;
    let inner_cfg = SolveConfig { tol: (1e-3 * cfg.tol).max(1e-14), ..cfg.clone() };
    let mut cache = Cache::default();
    let mut u = vec![0.0; grid.len()];
    let mut prev_d: Option<Vec<f64>> = None;
    let (mut grow_streak, mut shrink_streak) = (0, 0);
    let mut stats = SolveStats::default();
    let early = opts.early_decision && alpha == 0.0 && params.family == Family::Trace;
    for n in 0..opts.max_outer {
        for i in 0..u.len() {
            prob.rhs[i] = f[i] - k * signed_power(u[i], alpha);
        }
        let next = match solve_problem(&prob, Some(u.clone()), &inner_cfg, &mut cache)? {
            SolveOutcome::Converged { u, .. } => u.values,
            SolveOutcome::BlowUp { sup, .. } => {
                stats.iterations = n;
                return Ok(SolveOutcome::BlowUp { sup, iterations: n, stats });
            }
            SolveOutcome::Bounded { .. } => unreachable!("inner solves never stop early"),
        };
        let d: Vec<f64> = next.iter().zip(&u).map(|(a, b)| a - b).collect();
        let sup = next.iter().cloned().fold(0.0, f64::max);
        let step = norm_inf(&d);
        let floor = d.iter().cloned().fold(0.0, f64::min);
        record(&mut stats, n, step, &next);
        stats.iterations = n + 1;
        stats.residual = step;
        if floor < -10.0 * cfg.tol * sup.max(1.0) {
            return Err(Error::Scheme(format!(
                "shifted iterates decreased by {:.3e} at step {n}",
                -floor
            )));
        }
        u = next;
        if sup > cfg.blowup_threshold || !sup.is_finite() {
            return Ok(SolveOutcome::BlowUp { sup, iterations: n + 1, stats });
        }
        if step <= cfg.tol * sup.max(1.0) {
            let trace = prob.trace.clone();
            return Ok(SolveOutcome::Converged { u: GridFunction { grid, values: u, trace }, stats });
        }
        if early {
            if let Some(pd) = &prev_d {
                let top = norm_inf(pd);
                let (mut rmin, mut rmax) = (f64::INFINITY, 0.0f64);
                for (a, b) in d.iter().zip(pd) {
                    if *b > 1e-8 * top {
                        let ratio = a / b;
                        rmin = rmin.min(ratio);
                        rmax = rmax.max(ratio);
                    }
                }
                grow_streak = if rmin >= 1.0 { grow_streak + 1 } else { 0 };
                shrink_streak = if rmax < 1.0 { shrink_streak + 1 } else { 0 };
                if grow_streak >= 3 {
                    return Ok(SolveOutcome::BlowUp { sup, iterations: n + 1, stats });
                }
                if shrink_streak >= 3 {
                    let bound = sup + step * rmax / (1.0 - rmax);
                    if bound <= cfg.blowup_threshold {
                        let trace = prob.trace.clone();
                        return Ok(SolveOutcome::Bounded {
                            u: GridFunction { grid, values: u, trace },
                            bound,
                            stats,
                        });
                    }
                }
            }
            prev_d = Some(d);
        }
    }
    Err(Error::Stagnation {
        iterations: opts.max_outer,
        residual: stats.residual,
        history: stats.history.iter().map(|e| e.residual).collect(),
    })
}
