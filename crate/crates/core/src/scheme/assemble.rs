//! Nodal residuals and Jacobian rows.

use super::{BandMatrix, GridFunction};
use crate::error::Result;
use crate::geometry::{Grid, Link};
use crate::operators::{signed_power, EllipticParams, Family, ScalarField};
use crate::Point;
use rayon::prelude::*;
use std::sync::Arc;

const MAX_DIRS: usize = 8;

/// A discrete Dirichlet problem
/// `w(u)(P_h[u] + h·∇⁺u) + c|u|^α u = f` with `w = |∇_h u|^α`.
#[derive(Debug, Clone)]
pub struct Problem {
    pub(crate) grid: Arc<Grid>,
    pub(crate) params: EllipticParams,
    /// Zero-order coefficient `c` per unknown.
    pub(crate) zero: Vec<f64>,
    pub(crate) rhs: Vec<f64>,
    pub(crate) trace: Vec<f64>,
    drift: Vec<Point>,
    pub(crate) eps_grad: f64,
}

/// Sparse Jacobian row: diagonal plus off-diagonal `(column, value)` pairs.
#[derive(Debug, Clone, Default)]
pub(crate) struct Row {
    pub diag: f64,
    pub off: Vec<(usize, f64)>,
}

struct Neighbor {
    value: f64,
    dist: f64,
    node: Option<usize>,
}

impl Problem {
    /// `c = V + lambda + shift` at each unknown.
    pub fn new(
        grid: Arc<Grid>,
        params: &EllipticParams,
        lambda: f64,
        rhs: Vec<f64>,
        trace: Vec<f64>,
        eps_grad: f64,
    ) -> Result<Self> {
        params.validate()?;
        let zero = grid.positions().iter().map(|&p| params.potential.eval(p) + lambda).collect();
        let drift = grid.positions().iter().map(|&p| params.drift.eval(p)).collect();
        Ok(Self { grid, params: params.clone(), zero, rhs, trace, drift, eps_grad })
    }

    pub fn from_fields(
        grid: Arc<Grid>,
        params: &EllipticParams,
        lambda: f64,
        f: &ScalarField,
        g: &ScalarField,
        eps_grad: f64,
    ) -> Result<Self> {
        let rhs = grid.positions().iter().map(|&p| f.eval(p)).collect();
        let trace = grid.cut_points().iter().map(|&p| g.eval(p)).collect();
        Self::new(grid, params, lambda, rhs, trace, eps_grad)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn shift_zero_order(&mut self, delta: f64) {
        for c in &mut self.zero {
            *c += delta;
        }
    }

    fn neighbor(&self, u: &[f64], i: usize, k: usize, side: usize) -> Neighbor {
        match self.grid.link(i, k, side) {
            Link::Node(m) => Neighbor { value: u[m as usize], dist: 1.0, node: Some(m as usize) },
            Link::Cut { t, cut } => Neighbor { value: self.trace[cut as usize], dist: t, node: None },
        }
    }

    /// Residual at unknown `i`; fills `row` with the Jacobian when given.
    pub(crate) fn eval(&self, u: &[f64], i: usize, row: Option<&mut Row>) -> f64 {
        let grid = &*self.grid;
        let st = grid.stencil();
        let h = grid.spacing();
        let p = &self.params;
        let alpha = p.alpha;
        let ui = u[i];
        let ndir = st.directions.len();
        debug_assert!(ndir <= MAX_DIRS);

        let mut delta = [0.0; MAX_DIRS];
        let mut cp = [0.0; MAX_DIRS];
        let mut cm = [0.0; MAX_DIRS];
        let mut nb: [[Option<usize>; 2]; MAX_DIRS] = [[None; 2]; MAX_DIRS];
        // one-sided axis differences and their step lengths
        let mut dplus = [0.0; 2];
        let mut dminus = [0.0; 2];
        let mut tplus = [1.0; 2];
        let mut tminus = [1.0; 2];
        for k in 0..ndir {
            let a = self.neighbor(u, i, k, 0);
            let b = self.neighbor(u, i, k, 1);
            let s = 2.0 / ((a.dist + b.dist) * st.len2(k) * h * h);
            cp[k] = s / a.dist;
            cm[k] = s / b.dist;
            delta[k] = cp[k] * (a.value - ui) + cm[k] * (b.value - ui);
            nb[k] = [a.node, b.node];
            if k < 2 {
                dplus[k] = (a.value - ui) / (a.dist * h);
                dminus[k] = (ui - b.value) / (b.dist * h);
                tplus[k] = a.dist * h;
                tminus[k] = b.dist * h;
            }
        }

        // second-order part and the slope applied to each direction
        let mut slope = [0.0; MAX_DIRS];
        let second = match p.family {
            Family::Trace => {
                slope[0] = p.a;
                slope[1] = p.a;
                p.a * (delta[0] + delta[1])
            }
            Family::PucciSup | Family::PucciInf => {
                let (pos, neg) = if p.family == Family::PucciSup { (p.big_a, p.a) } else { (p.a, p.big_a) };
                let s = |d: f64| if d > 0.0 { pos } else { neg };
                let mut best: Option<(f64, usize, usize)> = None;
                for &(k1, k2) in &st.frames {
                    let v = s(delta[k1]) * delta[k1] + s(delta[k2]) * delta[k2];
                    let better = match best {
                        None => true,
                        Some((b, _, _)) => {
                            if p.family == Family::PucciSup {
                                v > b
                            } else {
                                v < b
                            }
                        }
                    };
                    if better {
                        best = Some((v, k1, k2));
                    }
                }
                let (v, k1, k2) = best.expect("stencil has frames");
                slope[k1] = s(delta[k1]);
                slope[k2] = s(delta[k2]);
                v
            }
        };

        let hx = self.drift[i];
        let mut drift_term = 0.0;
        let mut drift_coef = [[0.0; 2]; 2];
        for k in 0..2 {
            if hx[k] > 0.0 {
                drift_term += hx[k] * dplus[k];
                drift_coef[k][0] = hx[k] / tplus[k];
            } else if hx[k] < 0.0 {
                drift_term += hx[k] * dminus[k];
                drift_coef[k][1] = -hx[k] / tminus[k];
            }
        }
        let s_val = second + drift_term;

        let g2 = 0.5 * (dplus[0].powi(2) + dplus[1].powi(2) + dminus[0].powi(2) + dminus[1].powi(2));
        let g = g2.sqrt();
        let (w, w_jac, dw_dg) = if alpha == 0.0 {
            (1.0, 1.0, 0.0)
        } else if alpha > 0.0 {
            let w = if g > 0.0 { g.powf(alpha) } else { 0.0 };
            let gj = g.max(self.eps_grad);
            (w, gj.powf(alpha), alpha * gj.powf(alpha - 1.0))
        } else if g > self.eps_grad {
            (g.powf(alpha), g.powf(alpha), alpha * g.powf(alpha - 1.0))
        } else {
            let w = self.eps_grad.powf(alpha);
            (w, w, 0.0)
        };

        let c = self.zero[i];
        let residual = w * s_val + c * signed_power(ui, alpha) - self.rhs[i];

        if let Some(row) = row {
            row.off.clear();
            let mut diag = 0.0;
            for k in 0..ndir {
                if slope[k] == 0.0 {
                    continue;
                }
                let (a, b) = (slope[k] * cp[k], slope[k] * cm[k]);
                diag -= a + b;
                if let Some(m) = nb[k][0] {
                    row.off.push((m, w_jac * a));
                }
                if let Some(m) = nb[k][1] {
                    row.off.push((m, w_jac * b));
                }
            }
            for k in 0..2 {
                let [fwd, bwd] = drift_coef[k];
                diag -= fwd + bwd;
                if fwd != 0.0 {
                    if let Some(m) = nb[k][0] {
                        row.off.push((m, w_jac * fwd));
                    }
                }
                if bwd != 0.0 {
                    if let Some(m) = nb[k][1] {
                        row.off.push((m, w_jac * bwd));
                    }
                }
            }
            diag *= w_jac;
            if dw_dg != 0.0 && g > 0.0 {
                // ∂w/∂u_j · S with ∂g/∂u_j from the one-sided differences
                let f = dw_dg * s_val / (2.0 * g);
                for k in 0..2 {
                    let (a, b) = (dplus[k] / tplus[k], dminus[k] / tminus[k]);
                    diag += f * (-a + b);
                    if let Some(m) = nb[k][0] {
                        row.off.push((m, f * a));
                    }
                    if let Some(m) = nb[k][1] {
                        row.off.push((m, -f * b));
                    }
                }
            }
            let base = if alpha < 0.0 { ui.abs().max(self.eps_grad) } else { ui.abs() };
            let zero_slope = if alpha == 0.0 { 1.0 } else { base.powf(alpha) };
            diag += c * (1.0 + alpha) * zero_slope;
            row.diag = diag;
        }
        residual
    }

    pub fn residual(&self, u: &[f64]) -> Vec<f64> {
        (0..self.len()).into_par_iter().map(|i| self.eval(u, i, None)).collect()
    }

    pub(crate) fn jacobian_rows(&self, u: &[f64]) -> (Vec<f64>, Vec<Row>) {
        (0..self.len())
            .into_par_iter()
            .map(|i| {
                let mut row = Row::default();
                let r = self.eval(u, i, Some(&mut row));
                (r, row)
            })
            .unzip()
    }

    pub(crate) fn band_matrix(&self, rows: &[Row]) -> BandMatrix {
        let bw = self.grid.bandwidth();
        let mut m = BandMatrix::zeros(self.len(), bw, bw);
        for (i, row) in rows.iter().enumerate() {
            m.add(i, i, row.diag);
            for &(j, v) in &row.off {
                m.add(i, j, v);
            }
        }
        m
    }
}

/// Residual of the full discrete operator at one unknown:
/// `F_h[u] + h·∇_h u |∇_h u|^α + (V + λ)|u|^α u − f`.
pub fn discrete_operator(
    u: &GridFunction,
    node: usize,
    lambda: f64,
    f_value: f64,
    params: &EllipticParams,
    eps_grad: f64,
) -> Result<f64> {
    let grid = u.grid().clone();
    let mut rhs = vec![0.0; grid.len()];
    rhs[node] = f_value;
    let prob = Problem::new(grid, params, lambda, rhs, u.trace.clone(), eps_grad)?;
    Ok(prob.eval(&u.values, node, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_grid, DomainSpec, NodeKind};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn square_grid(h: f64, order: usize) -> Arc<Grid> {
        let d = DomainSpec::unit_square(PI / 2.0, 0.6).unwrap();
        Arc::new(build_grid(&d, h, order).unwrap())
    }

    fn disk_grid(h: f64) -> Arc<Grid> {
        let d = DomainSpec::regular_polygon(64, 1.0, PI / 2.0, 0.6).unwrap();
        Arc::new(build_grid(&d, h, 1).unwrap())
    }

    #[test]
    fn affine_data_has_zero_second_order_part() {
        let grid = disk_grid(1.0 / 16.0);
        let u = GridFunction::from_fn(grid.clone(), |p| 0.3 + 2.0 * p[0] - p[1]);
        for node in 0..grid.len() {
            let r = discrete_operator(&u, node, 0.0, -1.0, &EllipticParams::laplacian(), 1e-8).unwrap();
            assert!((r - 1.0).abs() < 1e-9, "{r}");
        }
    }

    #[test]
    fn quadratic_gives_two_a() {
        let grid = disk_grid(1.0 / 16.0);
        let u = GridFunction::from_fn(grid.clone(), |p| 0.5 * (p[0] * p[0] + p[1] * p[1]));
        let p = EllipticParams::new(1.0, 3.0, 0.0, Family::PucciSup).unwrap();
        for node in 0..grid.len() {
            let r = discrete_operator(&u, node, 0.0, 0.0, &p, 1e-8).unwrap();
            assert!((r - 6.0).abs() < 1e-8, "{r}");
        }
    }

    #[test]
    fn consistency_is_first_order_or_better() {
        // u = x³ + x y² − y³ + x y, exact Pucci-sup and drift evaluated in closed form
        let u = |p: Point| p[0].powi(3) + p[0] * p[1] * p[1] - p[1].powi(3) + p[0] * p[1];
        let hess = |p: Point| {
            crate::operators::SymMatrix2::new(6.0 * p[0], 2.0 * p[1] + 1.0, 2.0 * p[0] - 6.0 * p[1])
        };
        let grad = |p: Point| [3.0 * p[0] * p[0] + p[1] * p[1] + p[1], 2.0 * p[0] * p[1] - 3.0 * p[1] * p[1] + p[0]];
        let params = EllipticParams::new(1.0, 2.0, 0.0, Family::Trace)
            .unwrap()
            .with_drift(crate::operators::VectorField::Const([0.5, -0.25]));
        let probe = [0.375, 0.625];
        let mut errs = Vec::new();
        for h in [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0] {
            let d = DomainSpec::unit_square(PI / 2.0, 0.6).unwrap();
            let grid = Arc::new(build_grid(&d, h, 1).unwrap());
            let gf = GridFunction::from_fn(grid.clone(), u);
            let node = grid.unknown_at((probe[0] / h).round() as i32, (probe[1] / h).round() as i32).unwrap();
            let x = grid.position(node);
            let g = grad(x);
            let exact = params.a * hess(x).trace() + 0.5 * g[0] - 0.25 * g[1];
            let got = discrete_operator(&gf, node, 0.0, 0.0, &params, 1e-8).unwrap();
            errs.push((got - exact).abs());
        }
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() >= 0.9, "{errs:?}");
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let grid = square_grid(1.0 / 8.0, 2);
        for (alpha, fam) in [(0.0, Family::PucciSup), (1.0, Family::PucciInf), (-0.5, Family::Trace)] {
            let params = EllipticParams::new(0.7, 1.8, alpha, fam)
                .unwrap()
                .with_drift(crate::operators::VectorField::Const([0.3, -0.6]))
                .with_potential(ScalarField::Const(-1.5));
            let u: Vec<f64> = grid
                .positions()
                .iter()
                .enumerate()
                // the jitter breaks frame ties, where the operator is not differentiable
                .map(|(i, p)| (PI * p[0]).sin() * (PI * p[1]).sin() + 0.1 * p[0] * p[0] + 1e-3 * ((i * 7919) % 13) as f64)
                .collect();
            let prob = Problem::new(grid.clone(), &params, 0.2, vec![0.3; grid.len()], vec![0.0; grid.cut_points().len()], 1e-8)
                .unwrap();
            let (_, rows) = prob.jacobian_rows(&u);
            let m = prob.band_matrix(&rows);
            let eps = 1e-7;
            for j in [0, grid.len() / 3, grid.len() / 2] {
                let mut up = u.clone();
                up[j] += eps;
                let mut dn = u.clone();
                dn[j] -= eps;
                let (rp, rm) = (prob.residual(&up), prob.residual(&dn));
                for i in 0..grid.len() {
                    let fd = (rp[i] - rm[i]) / (2.0 * eps);
                    let an = m.get(i, j);
                    assert!((fd - an).abs() <= 1e-4 * (1.0 + an.abs()), "alpha={alpha} ({i},{j}): {fd} vs {an}");
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn second_order_part_is_monotone(seed in 0u64..1000, bump in 0.0..1.0f64,
                                         fam in prop::sample::select(vec![Family::PucciSup, Family::PucciInf, Family::Trace])) {
            use rand::{Rng, SeedableRng};
            let grid = square_grid(1.0 / 8.0, 2);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let u: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let params = EllipticParams::new(0.5, 2.0, 0.0, fam).unwrap();
            let prob = Problem::new(grid.clone(), &params, 0.0, vec![0.0; grid.len()], vec![0.0; grid.cut_points().len()], 1e-8).unwrap();
            let i = rng.gen_range(0..grid.len());
            let base = prob.eval(&u, i, None);
            for k in 0..grid.stencil().directions.len() {
                for side in 0..2 {
                    if let Link::Node(m) = grid.link(i, k, side) {
                        let mut v = u.clone();
                        v[m as usize] += bump;
                        prop_assert!(prob.eval(&v, i, None) >= base - 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn cut_cells_reproduce_quadratics() {
        let d = DomainSpec::regular_polygon(7, 1.0, 2.5, 0.4).unwrap();
        let grid = Arc::new(build_grid(&d, 1.0 / 20.0, 2).unwrap());
        let u = GridFunction::from_fn(grid.clone(), |p| p[0] * p[0] + 3.0 * p[1] * p[1]);
        for node in 0..grid.len() {
            if grid.kind(node) == NodeKind::BoundaryAdjacent {
                let r = discrete_operator(&u, node, 0.0, 0.0, &EllipticParams::laplacian(), 1e-8).unwrap();
                assert!((r - 8.0).abs() < 1e-6, "{r}");
            }
        }
    }
}
