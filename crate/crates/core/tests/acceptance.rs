use conebarrier::barriers::{
    boundary_layer, build_global_barrier, build_phi, certify_barrier, choose_gamma, eval_local_barrier, BarrierSign,
};
use conebarrier::eigen::{eigen_exhaustion, inverse_iteration, lambda_bar_bisect, max_principle_test, EigenConfig, Side};
use conebarrier::geometry::{build_grid, DomainSpec, Grid};
use conebarrier::operators::{
    pucci_minus, pucci_plus, second_order, EllipticParams, Family, ScalarField, SymMatrix2, VectorField,
};
use conebarrier::sampling::halton2;
use conebarrier::scheme::{holder_estimate, solve_dirichlet, solve_u0, GridFunction, SolveConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::sync::Arc;
use std::time::{Duration, Instant};

const PUCCI_REL_TOL: f64 = 1e-12;
const PUCCI_BUDGET: Duration = Duration::from_secs(1);
const ODE_REL_TOL: f64 = 1e-10;
const CERTIFY_SLACK: f64 = 1e-8;
const BARRIER_BUDGET: Duration = Duration::from_secs(30);
const TORSION_TOL: f64 = 1e-2;
const TORSION_BUDGET: Duration = Duration::from_secs(60);
const EIGEN_REL_TOL: f64 = 0.05;
const CROSS_METHOD_TOL: f64 = 0.02;
const EIGEN_BUDGET: Duration = Duration::from_secs(300);
const HOLDER_RANGE: (f64, f64) = (0.60, 0.73);
const HOLDER_BUDGET: Duration = Duration::from_secs(120);
const SIGN_TOL: f64 = 1e-6;
const SCALING_TOL: f64 = 0.03;
const BARRIER_DOMINATION_TOL: f64 = 1e-6;

type Outcome = (bool, String);

fn timed(budget: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let (ok, msg) = f();
    let took = start.elapsed();
    match budget {
        Some(b) if took > b => (false, format!("{msg}; {took:.1?} exceeds {b:?}")),
        _ => (ok, format!("{msg}; {took:.1?}")),
    }
}

fn grid(domain: &DomainSpec, h: f64) -> Arc<Grid> {
    Arc::new(build_grid(domain, h, 1).expect("grid"))
}

fn rel(x: f64, y: f64) -> f64 {
    (x - y).abs() / x.abs().max(y.abs()).max(1e-300)
}

fn pucci_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut dual, mut sandwich) = (0.0f64, 0.0f64);
    for _ in 0..10_000 {
        let mut m = || SymMatrix2::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let (x, n) = (m(), m());
        let a = rng.gen_range(0.1..2.0);
        let big_a = a + rng.gen_range(0.0..3.0);
        let scale = x.norm().max(n.norm()) * big_a;
        dual = dual.max((pucci_plus(&x, a, big_a) + pucci_minus(&(-x), a, big_a)).abs() / scale);
        for fam in [Family::PucciSup, Family::PucciInf, Family::Trace] {
            let p = EllipticParams::new(a, big_a, 0.0, fam).unwrap();
            let up = p.upper();
            let diff = second_order(&(x + n), &p) - second_order(&x, &p);
            let lo = pucci_minus(&n, a, up) - diff;
            let hi = diff - pucci_plus(&n, a, up);
            sandwich = sandwich.max(lo / scale).max(hi / scale);
        }
    }
    (
        dual <= PUCCI_REL_TOL && sandwich <= PUCCI_REL_TOL,
        format!("duality {dual:.1e}, sandwich excess {sandwich:.1e}"),
    )
}

fn barrier_certification() -> Outcome {
    let sq = DomainSpec::unit_square(PI / 2.0, 0.5).unwrap();
    let ell = DomainSpec::l_shape(3.0 * PI / 4.0, 0.5).unwrap();
    let apexes = [(PI / 4.0, sq.with_cone(PI / 4.0, 0.5).unwrap(), [0.0, 0.0]), (PI / 2.0, sq.clone(), [0.5, 0.0]), (3.0 * PI / 4.0, ell, [0.0, 0.0])];
    let drift = VectorField::Const([0.3, -0.2]);
    let (mut ode, mut sign_bad, mut local_worst, mut global_worst) = (0.0f64, 0usize, f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut fails = Vec::new();
    for (a, big_a) in [(1.0, 1.0), (1.0, 2.0)] {
        for alpha in [-0.5, 0.0, 1.0] {
            let p = EllipticParams::new(a, big_a, alpha, Family::PucciSup).unwrap().with_drift(drift.clone());
            for (psi, dom, z) in &apexes {
                let tag = format!("a={a} A={big_a} alpha={alpha} psi={psi:.3}");
                let gamma = match choose_gamma(&p, *psi, 2) {
                    Ok(g) => g,
                    Err(e) => {
                        fails.push(format!("{tag}: {e}"));
                        continue;
                    }
                };
                let lb = build_phi(gamma, *psi, &p, 2, dom.rbar(), 0.3f64.hypot(0.2)).unwrap();
                for k in 0..=1000 {
                    let t = *psi * k as f64 / 1000.0;
                    let (f0, f1, f2) = (lb.phi(t), lb.dphi(t), lb.ddphi(t));
                    let terms = [a * f2, -lb.beta * f1, gamma * big_a * f0];
                    let r = terms.iter().sum::<f64>().abs() / terms.iter().map(|v| v.abs()).sum::<f64>();
                    ode = ode.max(r);
                    if f0 < 1.0 - 1e-12 || f1 > 1e-12 || f2 > 1e-12 {
                        sign_bad += 1;
                    }
                }
                for i in 1..=10_000u64 {
                    let [s, u] = halton2(i);
                    let (r, t) = (s * lb.r_o, (2.0 * u - 1.0) * *psi);
                    let x = [r * t.sin(), r * t.cos()];
                    let jet = eval_local_barrier(x, &lb).unwrap();
                    let g = jet.grad;
                    let w = g[0].hypot(g[1]).powf(alpha);
                    let res = w * (second_order(&jet.hess, &p) + 0.3 * g[0] - 0.2 * g[1]);
                    local_worst = local_worst.max(res / lb.b);
                }
                let gb = build_global_barrier(dom, *z, &p, BarrierSign::Upper).unwrap();
                let cert = certify_barrier(&gb, 10_000);
                global_worst = global_worst.max(cert.worst_residual);
                if !cert.pass {
                    fails.push(format!("{tag}: global {:.3e}", cert.worst_residual));
                }
            }
        }
    }
    let ok = fails.is_empty() && ode <= ODE_REL_TOL && sign_bad == 0 && local_worst <= -1.0 && global_worst <= -1.0 + CERTIFY_SLACK;
    (
        ok,
        format!(
            "18 cases, ODE residual {ode:.1e}, sign violations {sign_bad}, local max residual/b {local_worst:.4}, global max residual {global_worst:.4}{}",
            if fails.is_empty() { String::new() } else { format!(", failures {fails:?}") }
        ),
    )
}

fn torsion() -> Outcome {
    let d = DomainSpec::regular_polygon(64, 1.0, PI / 2.0, 0.5).unwrap();
    let g = grid(&d, 1.0 / 64.0);
    let u = solve_u0(g.clone(), &EllipticParams::laplacian(), &SolveConfig::default()).unwrap();
    let err = g
        .positions()
        .iter()
        .zip(&u.values)
        .map(|(p, v)| (v - (1.0 - p[0] * p[0] - p[1] * p[1]) / 4.0).abs())
        .fold(0.0, f64::max);
    let centre = u.nearest([0.0, 0.0]).unwrap();
    (err <= TORSION_TOL, format!("max error {err:.2e}, u(0) = {centre:.5}"))
}

fn eigenvalue() -> Outcome {
    let d = DomainSpec::unit_square(PI / 2.0, 0.5).unwrap();
    let g = grid(&d, 1.0 / 64.0);
    let p = EllipticParams::laplacian();
    let cfg = SolveConfig::default();
    let eig = EigenConfig::default();
    let bis = lambda_bar_bisect(&g, &p, &cfg, &eig).unwrap().lambda;
    let inv = inverse_iteration(&g, &p, &cfg, &eig).unwrap().lambda;
    let exact = 2.0 * PI * PI;
    let (e, x) = (rel(bis, exact), rel(bis, inv));
    (
        e <= EIGEN_REL_TOL && x <= CROSS_METHOD_TOL,
        format!("bisection {bis:.4}, inverse iteration {inv:.4}, 2pi^2 {exact:.4}, rel error {e:.2e}, cross {x:.2e}"),
    )
}

fn corner_holder() -> Outcome {
    let d = DomainSpec::l_shape(3.0 * PI / 4.0, 0.5).unwrap();
    let g = grid(&d, 1.0 / 128.0);
    let u = solve_u0(g, &EllipticParams::laplacian(), &SolveConfig::default()).unwrap();
    let est = holder_estimate(&u, &d, [0.0, 0.0], 5).unwrap();
    (
        est.gamma >= HOLDER_RANGE.0 && est.gamma <= HOLDER_RANGE.1,
        format!("gamma {:.4} from {} samples on {} rays, C {:.3}", est.gamma, est.samples, est.rays, est.c),
    )
}

fn comparison_and_max_principle() -> Outcome {
    let d = DomainSpec::unit_square(PI / 2.0, 0.5).unwrap();
    let g = grid(&d, 1.0 / 16.0);
    let cfg = SolveConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_order = f64::NEG_INFINITY;
    let mut worst_sign = f64::INFINITY;
    let alphas = [-0.5, 0.0, 1.0];
    for k in 0..100 {
        let p = EllipticParams::new(1.0, 2.0, alphas[k % 3], Family::PucciSup)
            .unwrap()
            .with_drift(VectorField::Const([rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]));
        let (c1, c2, c3) = (rng.gen_range(-2.0..0.0), rng.gen_range(-1.0..1.0), rng.gen_range(0.0..1.0));
        let f1 = ScalarField::Func(Arc::new(move |x: [f64; 2]| c1 + c2 * x[0] * x[1] - c3));
        let f2 = ScalarField::Func(Arc::new(move |x: [f64; 2]| c1 + c2 * x[0] * x[1]));
        let bnd = ScalarField::Func(Arc::new(move |x: [f64; 2]| c3 * (x[0] - x[1])));
        let u1 = solve_dirichlet(g.clone(), &p, 0.0, &f1, &bnd, &cfg).unwrap().into_solution().unwrap();
        let u2 = solve_dirichlet(g.clone(), &p, 0.0, &f2, &bnd, &cfg).unwrap().into_solution().unwrap();
        for (a, b) in u1.values.iter().zip(&u2.values) {
            worst_order = worst_order.max(b - a);
        }
        let fneg = ScalarField::Func(Arc::new(move |x: [f64; 2]| -(c1 + c2 * x[0] * x[1]).abs()));
        let u3 = solve_dirichlet(g.clone(), &p, 0.0, &fneg, &ScalarField::Const(0.0), &cfg).unwrap().into_solution().unwrap();
        worst_sign = worst_sign.min(u3.inf());
    }
    let p = EllipticParams::new(1.0, 2.0, 0.0, Family::PucciSup).unwrap();
    let lam = lambda_bar_bisect(&g, &p, &cfg, &EigenConfig::default()).unwrap().lambda;
    let low = max_principle_test(&g, &p, 0.5 * lam, 100, 11, &cfg).unwrap();
    let high = max_principle_test(&g, &p, 1.5 * lam, 100, 11, &cfg).unwrap();
    let ok = worst_order <= SIGN_TOL && worst_sign >= -SIGN_TOL && low.ok && low.trials == 100 && high.blowup_witness;
    (
        ok,
        format!(
            "order violation {worst_order:.1e}, sign violation {:.1e}, max principle {}/{} (worst {:.2e}), blow-up witness {}",
            (-worst_sign).max(0.0),
            low.passed,
            low.trials,
            low.worst,
            high.blowup_witness
        ),
    )
}

fn exhaustion() -> Outcome {
    let d = DomainSpec::l_shape(3.0 * PI / 4.0, 0.5).unwrap();
    let p = EllipticParams::laplacian();
    let cfg = SolveConfig::default();
    let eig = EigenConfig { j_max: 6, ..Default::default() };
    let h = 1.0 / 32.0;
    let inner = eigen_exhaustion(&d, &p, Side::Interior, h, 1, &cfg, &eig).unwrap();
    let outer = eigen_exhaustion(&d, &p, Side::Exterior, h, 1, &cfg, &eig).unwrap();
    let (li, lo) = (inner.entries.last().unwrap(), outer.entries.last().unwrap());
    let slack = 2.0 * li.tol_lambda.max(lo.tol_lambda);
    let ok = inner.monotone && outer.monotone && lo.lambda <= li.lambda + slack;
    let seq = |r: &conebarrier::eigen::ExhaustionReport| r.entries.iter().map(|e| format!("{:.3}", e.lambda)).collect::<Vec<_>>().join(" ");
    (ok, format!("interior [{}], exterior [{}]", seq(&inner), seq(&outer)))
}

fn scaling() -> Outcome {
    let d = DomainSpec::unit_square(PI / 2.0, 0.5).unwrap();
    let cfg = SolveConfig::default();
    let eig = EigenConfig::default();
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for alpha in [-0.5, 0.0, 1.0] {
        let p = EllipticParams::new(1.0, 1.0, alpha, Family::Trace).unwrap();
        let mut vals = Vec::new();
        for t in [1.0, 2.0] {
            let dt = d.scaled(t).unwrap();
            let lam = lambda_bar_bisect(&grid(&dt, t / 16.0), &p, &cfg, &eig).unwrap().lambda;
            vals.push(lam * f64::powf(t, 2.0 + alpha));
        }
        let r = rel(vals[0], vals[1]);
        worst = worst.max(r);
        parts.push(format!("alpha {alpha}: {:.4} vs {:.4}", vals[0], vals[1]));
    }
    (worst <= SCALING_TOL, format!("{}, worst {worst:.1e}", parts.join(", ")))
}

fn barrier_domination() -> Outcome {
    let d = DomainSpec::l_shape(3.0 * PI / 4.0, 0.5).unwrap();
    let p = EllipticParams::laplacian();
    let g = grid(&d, 1.0 / 32.0);
    let u: GridFunction = solve_u0(g.clone(), &p, &SolveConfig::default()).unwrap();
    let mut excess = f64::NEG_INFINITY;
    let mut certified = 0;
    for z in d.boundary_samples(16) {
        let gb = build_global_barrier(&d, z, &p, BarrierSign::Upper).unwrap();
        if certify_barrier(&gb, 2_000).pass {
            certified += 1;
        }
        for (x, v) in g.positions().iter().zip(&u.values) {
            excess = excess.max(v - gb.value(*x));
        }
    }
    let delta = 0.1;
    let layer = boundary_layer(&d, &p, delta, 16).unwrap();
    let (mut outside, mut top) = (0, 0.0f64);
    for (x, v) in g.positions().iter().zip(&u.values) {
        if d.distance_to_boundary(*x) < layer.rho {
            outside += 1;
            top = top.max(*v);
        }
    }
    let ok = certified == 16 && excess <= BARRIER_DOMINATION_TOL && u.inf() >= 0.0 && top <= delta;
    (
        ok,
        format!(
            "{certified}/16 barriers certified, max(u_o - W_z) {excess:.3e}, delta {delta}, rho {:.2e}, nodes outside K {outside}, sup there {top:.2e}",
            layer.rho
        ),
    )
}

fn main() {
    let criteria: Vec<(&str, Option<Duration>, fn() -> Outcome)> = vec![
        ("pucci-algebra", Some(PUCCI_BUDGET), pucci_algebra),
        ("barrier-certification", Some(BARRIER_BUDGET), barrier_certification),
        ("torsion-oracle", Some(TORSION_BUDGET), torsion),
        ("eigenvalue-oracle", Some(EIGEN_BUDGET), eigenvalue),
        ("corner-holder", Some(HOLDER_BUDGET), corner_holder),
        ("comparison-maximum-principle", None, comparison_and_max_principle),
        ("exhaustion-monotonicity", None, exhaustion),
        ("scaling-law", None, scaling),
        ("barrier-domination", None, barrier_domination),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (k, (name, budget, run)) in criteria.into_iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let (ok, msg) = timed(budget, run);
        println!("{} {}. {name}: {msg}", if ok { "PASS" } else { "FAIL" }, k + 1);
        if !ok {
            failed += 1;
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
