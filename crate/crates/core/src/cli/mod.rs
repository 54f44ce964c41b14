//! Command-line front end.
//!
//! Every command reads a [`RunConfig`], writes its artifacts into the output
//! directory through a temporary file and a rename, and maps its outcome to
//! an exit code: 0 on success, 2 on blow-up, 1 on any error or failed check.

mod config;

pub use config::{FieldValue, RunConfig};

use crate::barriers::{build_global_barrier, certify_barrier, BarrierReport, BarrierSign};
use crate::eigen::{eigen_exhaustion, inverse_iteration, lambda_bar_bisect, EigenResult, ExhaustionReport, Side};
use crate::error::{Error, Result};
use crate::geometry::{build_grid, exterior_cone_check, ConeReport, DomainSpec, Grid};
use crate::operators::{check_hypotheses, EllipticParams, HypothesisReport, ScalarField, VectorField};
use crate::scheme::{
    discrete_operator, iterate_shifted, solve_dirichlet, GridFunction, ShiftedOptions, SolveConfig, SolveOutcome, SolveStats,
};
use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_BLOWUP: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "conebarrier", version, about = "Barriers, Dirichlet solvers and principal eigenvalues on polygonal domains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Common {
    /// Run configuration (key = value lines or JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `output` in the configuration.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides `seed` in the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the Dirichlet problem.
    Solve(Common),
    /// Build and certify the upper and lower barriers at one apex.
    Barrier(Common),
    /// Principal eigenvalue by bisection and inverse iteration.
    Eigen(Common),
    /// Interior and exterior exhaustion sequences and their gap.
    ProbeGap(Common),
    /// Structural hypotheses and discrete property suites.
    Check(Common),
}

/// Runs one command and returns its exit code; errors go to standard error.
pub fn run(cli: Cli) -> i32 {
    let (common, f): (&Common, fn(&Context) -> Result<i32>) = match &cli.command {
        Command::Solve(c) => (c, cmd_solve),
        Command::Barrier(c) => (c, cmd_barrier),
        Command::Eigen(c) => (c, cmd_eigen),
        Command::ProbeGap(c) => (c, cmd_probe_gap),
        Command::Check(c) => (c, cmd_check),
    };
    match Context::new(common).and_then(|ctx| f(&ctx)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

pub struct Context {
    pub cfg: RunConfig,
    pub out: PathBuf,
    pub seed: u64,
}

impl Context {
    fn new(c: &Common) -> Result<Self> {
        let cfg = RunConfig::load(&c.config)?;
        let out = match (&c.out, &cfg.output) {
            (Some(o), _) => o.clone(),
            (None, Some(o)) => cfg.base_dir.join(o),
            (None, None) => PathBuf::from("out"),
        };
        let seed = c.seed.unwrap_or_else(|| cfg.seed());
        std::fs::create_dir_all(&out)?;
        Ok(Self { cfg, out, seed })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn grid(&self, domain: &DomainSpec) -> Result<Arc<Grid>> {
        Ok(Arc::new(build_grid(domain, self.cfg.grid_h()?, self.cfg.stencil_order())?))
    }
}

/// Writes `bytes` to a temporary sibling of `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn write_log(path: &Path, stats: &SolveStats) -> Result<()> {
    let mut text = String::new();
    for e in &stats.history {
        text.push_str(&serde_json::to_string(e)?);
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}

/// A zero-order coefficient `V + λ` that can be positive makes the problem
/// non-proper; with `f ≤ 0` and `g ≥ 0` the monotone shifted iteration then
/// decides existence, and its blow-up is the nonexistence signal.
fn shifted_applies(grid: &Grid, params: &EllipticParams, lambda: f64, f: &ScalarField, g: &ScalarField) -> bool {
    let improper = grid.positions().iter().any(|&p| params.potential.eval(p) + lambda > 0.0);
    improper
        && grid.positions().iter().all(|&p| f.eval(p) <= 0.0)
        && grid.cut_points().iter().all(|&p| g.eval(p) >= 0.0)
}

#[derive(Serialize)]
struct SolveSummary {
    status: &'static str,
    iterations: usize,
    residual: f64,
    sup: f64,
    inf: Option<f64>,
    probe: Option<[f64; 2]>,
    probe_value: Option<f64>,
    nodes: usize,
    grid_h: f64,
    lambda: f64,
}

pub fn cmd_solve(ctx: &Context) -> Result<i32> {
    let cfg = &ctx.cfg;
    let domain = cfg.domain()?;
    let params = cfg.params()?;
    let solve = cfg.solve_config()?;
    let grid = ctx.grid(&domain)?;
    let lambda = cfg.problem.lambda.unwrap_or(0.0);
    let (f, g) = (cfg.rhs()?, cfg.boundary()?);
    let outcome = if shifted_applies(&grid, &params, lambda, &f, &g) {
        let fv: Vec<f64> = grid.positions().iter().map(|&p| f.eval(p)).collect();
        let opts = ShiftedOptions { boundary: g, ..Default::default() };
        iterate_shifted(grid.clone(), &params, lambda, &fv, &solve, &opts)?
    } else {
        solve_dirichlet(grid.clone(), &params, lambda, &f, &g, &solve)?
    };
    write_log(&ctx.path("solve_log.jsonl"), outcome.stats())?;
    let probe = cfg.problem.probe;
    let mut summary = SolveSummary {
        status: "converged",
        iterations: outcome.stats().iterations,
        residual: outcome.stats().residual,
        sup: 0.0,
        inf: None,
        probe,
        probe_value: None,
        nodes: grid.len(),
        grid_h: grid.spacing(),
        lambda,
    };
    match &outcome {
        SolveOutcome::Converged { u, .. } | SolveOutcome::Bounded { u, .. } => {
            u.save_csv(&ctx.path("solution.csv"))?;
            summary.sup = u.sup();
            summary.inf = Some(u.inf());
            summary.probe_value = probe.and_then(|p| u.nearest(p));
            write_json(&ctx.path("solve.json"), &summary)?;
            Ok(EXIT_OK)
        }
        SolveOutcome::BlowUp { sup, .. } => {
            summary.status = "blowup";
            summary.sup = *sup;
            write_json(&ctx.path("solve.json"), &summary)?;
            eprintln!("blow-up: sup |u| reached {sup:.3e}");
            Ok(EXIT_BLOWUP)
        }
    }
}

#[derive(Serialize)]
struct BarrierOutput {
    upper: BarrierReport,
    lower: BarrierReport,
    kappa_scale: f64,
    pass: bool,
}

pub fn cmd_barrier(ctx: &Context) -> Result<i32> {
    let cfg = &ctx.cfg;
    let domain = cfg.domain()?;
    let params = cfg.params()?;
    let b = &cfg.barrier;
    let z = match (b.point, b.apex) {
        (Some(p), _) => p,
        (None, k) => {
            let k = k.unwrap_or(0);
            *domain
                .vertices()
                .get(k)
                .ok_or_else(|| Error::Config(format!("barrier.apex {k} exceeds the vertex count")))?
        }
    };
    let samples = b.samples.unwrap_or(10_000);
    let scale = b.kappa_scale.unwrap_or(1.0);
    if !(scale > 0.0) {
        return Err(Error::Config("barrier.kappa_scale must be positive".into()));
    }
    let mut reports = Vec::new();
    for sign in [BarrierSign::Upper, BarrierSign::Lower] {
        let mut gb = build_global_barrier(&domain, z, &params, sign)?;
        if scale != 1.0 {
            gb = gb.with_kappa(gb.kappa * scale);
        }
        let cert = certify_barrier(&gb, samples);
        reports.push(BarrierReport::new(&gb, cert));
    }
    let lower = reports.pop().expect("two reports");
    let upper = reports.pop().expect("two reports");
    let pass = upper.certificate.pass && lower.certificate.pass;
    write_json(&ctx.path("barrier.json"), &BarrierOutput { upper, lower, kappa_scale: scale, pass })?;
    Ok(if pass { EXIT_OK } else { EXIT_ERROR })
}

#[derive(Serialize)]
struct EigenOutput {
    bisection: EigenResult,
    inverse_iteration: EigenResult,
    relative_difference: f64,
    agree: bool,
}

const CROSS_METHOD_TOL: f64 = 0.02;

pub fn cmd_eigen(ctx: &Context) -> Result<i32> {
    let cfg = &ctx.cfg;
    let domain = cfg.domain()?;
    let params = cfg.params()?;
    let solve = cfg.solve_config()?;
    let eig = cfg.eigen_config()?;
    let grid = ctx.grid(&domain)?;
    let bis = lambda_bar_bisect(&grid, &params, &solve, &eig)?;
    let inv = inverse_iteration(&grid, &params, &solve, &eig)?;
    if let Some(phi) = &inv.phi {
        phi.save_csv(&ctx.path("eigenfunction.csv"))?;
    }
    let rel = (bis.lambda - inv.lambda).abs() / bis.lambda.abs().max(f64::MIN_POSITIVE);
    let agree = rel <= CROSS_METHOD_TOL;
    write_json(&ctx.path("eigen.json"), &EigenOutput { bisection: bis, inverse_iteration: inv, relative_difference: rel, agree })?;
    if !agree {
        eprintln!("bisection and inverse iteration differ by {:.2}%", 100.0 * rel);
        return Ok(EXIT_ERROR);
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct GapRow {
    j: usize,
    lambda_interior: f64,
    lambda_exterior: f64,
    gap: f64,
    gap_coarse: Option<f64>,
}

#[derive(Serialize)]
struct GapOutput {
    grid_h: f64,
    coarse_h: Option<f64>,
    rows: Vec<GapRow>,
    interior_monotone: bool,
    exterior_monotone: bool,
    final_gap: f64,
    /// Grid-refinement difference of the final gap plus both bisection tolerances.
    error_bar: f64,
    /// First-order Richardson extrapolation in the grid spacing.
    extrapolated_gap: Option<f64>,
}

pub fn cmd_probe_gap(ctx: &Context) -> Result<i32> {
    let cfg = &ctx.cfg;
    let domain = cfg.domain()?;
    let params = cfg.params()?;
    let solve = cfg.solve_config()?;
    let eig = cfg.eigen_config()?;
    let h = cfg.grid_h()?;
    let order = cfg.stencil_order();
    let run = |h: f64| -> Result<(ExhaustionReport, ExhaustionReport)> {
        Ok((
            eigen_exhaustion(&domain, &params, Side::Interior, h, order, &solve, &eig)?,
            eigen_exhaustion(&domain, &params, Side::Exterior, h, order, &solve, &eig)?,
        ))
    };
    let (inner, outer) = run(h)?;
    let coarse = if 2.0 * h < domain.rbar() / 4.0 { Some(run(2.0 * h)?) } else { None };
    let mut rows = Vec::new();
    let mut table = String::from("j,lambda_interior,lambda_exterior,gap,gap_coarse\n");
    for k in 0..inner.entries.len() {
        let (li, le) = (inner.entries[k].lambda, outer.entries[k].lambda);
        let gap_coarse = coarse.as_ref().map(|(ci, ce)| ci.entries[k].lambda - ce.entries[k].lambda);
        let row = GapRow { j: k + 1, lambda_interior: li, lambda_exterior: le, gap: li - le, gap_coarse };
        table.push_str(&format!(
            "{},{},{},{},{}\n",
            row.j,
            li,
            le,
            row.gap,
            gap_coarse.map_or(String::new(), |g| g.to_string())
        ));
        rows.push(row);
    }
    let last = rows.last().expect("j_max >= 1");
    let tol = inner.entries.last().map_or(0.0, |e| e.tol_lambda) + outer.entries.last().map_or(0.0, |e| e.tol_lambda);
    let (error_bar, extrapolated_gap) = match last.gap_coarse {
        Some(gc) => ((last.gap - gc).abs() + tol, Some(2.0 * last.gap - gc)),
        None => (tol, None),
    };
    let out = GapOutput {
        grid_h: h,
        coarse_h: coarse.as_ref().map(|_| 2.0 * h),
        final_gap: last.gap,
        rows,
        interior_monotone: inner.monotone,
        exterior_monotone: outer.monotone,
        error_bar,
        extrapolated_gap,
    };
    write_atomic(&ctx.path("probe_gap.csv"), table.as_bytes())?;
    write_json(&ctx.path("probe_gap.json"), &out)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct SuiteReport {
    runs: usize,
    worst: f64,
    ok: bool,
}

#[derive(Serialize)]
struct CheckOutput {
    hypotheses: HypothesisReport,
    cone: ConeReport,
    monotone_stencil: SuiteReport,
    comparison: SuiteReport,
    sign_preservation: SuiteReport,
    ok: bool,
}

const SUITE_TOL: f64 = 1e-6;

fn monotone_stencil_suite(grid: &Arc<Grid>, params: &EllipticParams, trials: usize, rng: &mut ChaCha8Rng) -> Result<SuiteReport> {
    let mut second = params.clone();
    second.alpha = 0.0;
    second.drift = VectorField::zero();
    second.potential = ScalarField::Const(0.0);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let mut u = GridFunction::from_fn(grid.clone(), |_| 0.0);
        u.values.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        let node = rng.gen_range(0..grid.len());
        let base = discrete_operator(&u, node, 0.0, 0.0, &second, 1e-8)?;
        let k = rng.gen_range(0..u.values.len());
        if k == node {
            continue;
        }
        u.values[k] += rng.gen_range(0.0..1.0);
        let bumped = discrete_operator(&u, node, 0.0, 0.0, &second, 1e-8)?;
        worst = worst.max(base - bumped);
    }
    Ok(SuiteReport { runs: trials, worst, ok: worst <= 1e-12 })
}

fn comparison_suites(
    grid: &Arc<Grid>,
    params: &EllipticParams,
    solve: &SolveConfig,
    pairs: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(SuiteReport, SuiteReport)> {
    let (mut order, mut sign) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for _ in 0..pairs {
        let (c0, c1, c2) = (rng.gen_range(-2.0..0.0), rng.gen_range(-1.0..1.0), rng.gen_range(0.0..1.0));
        let f2 = ScalarField::Func(Arc::new(move |x: crate::Point| c0 + c1 * x[0] * x[1]));
        let f1 = ScalarField::Func(Arc::new(move |x: crate::Point| c0 + c1 * x[0] * x[1] - c2));
        let g = ScalarField::Func(Arc::new(move |x: crate::Point| c2 * (x[0] - x[1])));
        let u1 = solve_dirichlet(grid.clone(), params, 0.0, &f1, &g, solve)?.into_solution()?;
        let u2 = solve_dirichlet(grid.clone(), params, 0.0, &f2, &g, solve)?.into_solution()?;
        for (a, b) in u1.values.iter().zip(&u2.values) {
            order = order.max(b - a);
        }
        let fneg = ScalarField::Func(Arc::new(move |x: crate::Point| -(c0 + c1 * x[0] * x[1]).abs()));
        let u = solve_dirichlet(grid.clone(), params, 0.0, &fneg, &ScalarField::Const(0.0), solve)?.into_solution()?;
        sign = sign.max(-u.inf());
    }
    Ok((
        SuiteReport { runs: pairs, worst: order, ok: order <= SUITE_TOL },
        SuiteReport { runs: pairs, worst: sign, ok: sign <= SUITE_TOL },
    ))
}

pub fn cmd_check(ctx: &Context) -> Result<i32> {
    let cfg = &ctx.cfg;
    cfg.validate()?;
    let domain = cfg.domain()?;
    let params = cfg.params()?;
    let solve = cfg.solve_config()?;
    let grid = ctx.grid(&domain)?;
    let trials = cfg.check.trials.unwrap_or(1000);
    let pairs = cfg.check.pairs.unwrap_or(10);
    let hypotheses = check_hypotheses(&params, &domain, trials, ctx.seed)?;
    let cone = exterior_cone_check(&domain, 512)?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let monotone_stencil = monotone_stencil_suite(&grid, &params, trials, &mut rng)?;
    let (comparison, sign_preservation) = comparison_suites(&grid, &params, &solve, pairs, &mut rng)?;
    let ok = hypotheses.ok && cone.ok && monotone_stencil.ok && comparison.ok && sign_preservation.ok;
    write_json(&ctx.path("check.json"), &CheckOutput { hypotheses, cone, monotone_stencil, comparison, sign_preservation, ok })?;
    Ok(if ok { EXIT_OK } else { EXIT_ERROR })
}
