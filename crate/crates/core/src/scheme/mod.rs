//! Monotone wide-stencil discretization and Dirichlet solvers.
//!
//! Second derivatives are taken along the stencil directions with
//! Shortley–Weller weights at cut cells, and the Pucci operators are
//! assembled over orthogonal direction frames. The gradient weight
//! `|∇u|^α` uses the root mean square of the one-sided axis differences,
//! which stays positive at discrete extrema.

mod assemble;
mod banded;
mod holder;
mod solve;

pub use assemble::{discrete_operator, Problem};
pub use banded::{BandLu, BandMatrix};
pub use holder::{holder_estimate, HolderEstimate};
pub use solve::{iterate_shifted, solve_dirichlet, solve_u0, LogEntry, ShiftedOptions, SolveOutcome, SolveStats};
pub(crate) use solve::{solve_problem, Cache};

use crate::error::{Error, Result};
use crate::geometry::{Grid, NodeKind};
use crate::operators::ScalarField;
use crate::Point;
use serde::Serialize;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

/// Nodal values on the unknowns of a grid plus the Dirichlet trace at its
/// cut points.
#[derive(Debug, Clone)]
pub struct GridFunction {
    grid: Arc<Grid>,
    pub values: Vec<f64>,
    pub trace: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(grid: Arc<Grid>) -> Self {
        let (n, m) = (grid.len(), grid.cut_points().len());
        Self { grid, values: vec![0.0; n], trace: vec![0.0; m] }
    }

    /// Samples `field` at nodes and cut points.
    pub fn from_field(grid: Arc<Grid>, field: &ScalarField) -> Self {
        let values = grid.positions().iter().map(|&p| field.eval(p)).collect();
        let trace = grid.cut_points().iter().map(|&p| field.eval(p)).collect();
        Self { grid, values, trace }
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(Point) -> f64) -> Self {
        let values = grid.positions().iter().map(|&p| f(p)).collect();
        let trace = grid.cut_points().iter().map(|&p| f(p)).collect();
        Self { grid, values, trace }
    }

    pub(crate) fn from_parts(grid: Arc<Grid>, values: Vec<f64>, trace: Vec<f64>) -> Self {
        Self { grid, values, trace }
    }

    pub fn with_trace(mut self, g: &ScalarField) -> Self {
        self.trace = self.grid.cut_points().iter().map(|&p| g.eval(p)).collect();
        self
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn inf(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Value at the unknown nearest to `p`, if any lies within one spacing.
    pub fn nearest(&self, p: Point) -> Option<f64> {
        let h = self.grid.spacing();
        let (i, j) = ((p[0] / h).round() as i32, (p[1] / h).round() as i32);
        self.grid.unknown_at(i, j).map(|n| self.values[n])
    }

    /// Bilinear interpolation on the lattice; nodes that are not unknowns
    /// contribute 0, which is the homogeneous Dirichlet value.
    pub fn sample(&self, p: Point) -> f64 {
        let h = self.grid.spacing();
        let (fx, fy) = (p[0] / h, p[1] / h);
        let (i, j) = (fx.floor() as i32, fy.floor() as i32);
        let (sx, sy) = (fx - i as f64, fy - j as f64);
        let at = |a: i32, b: i32| self.grid.unknown_at(a, b).map_or(0.0, |n| self.values[n]);
        (1.0 - sx) * (1.0 - sy) * at(i, j)
            + sx * (1.0 - sy) * at(i + 1, j)
            + (1.0 - sx) * sy * at(i, j + 1)
            + sx * sy * at(i + 1, j + 1)
    }

    /// `x,y,value` rows for the unknowns followed by the boundary trace.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,y,value")?;
        for (p, v) in self.grid.positions().iter().zip(&self.values) {
            writeln!(w, "{},{},{}", p[0], p[1], v)?;
        }
        for (p, v) in self.grid.cut_points().iter().zip(&self.trace) {
            writeln!(w, "{},{},{}", p[0], p[1], v)?;
        }
        Ok(())
    }

    /// Writes the CSV to a temporary sibling and renames it into place.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("csv.tmp");
        {
            let file = std::fs::File::create(&tmp)?;
            let mut buf = std::io::BufWriter::new(file);
            self.write_csv(&mut buf)?;
            buf.flush()?;
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn count_kind(&self, kind: NodeKind) -> usize {
        self.grid.count_kind(kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Damped Newton iteration with a banded direct solver.
    Newton,
    /// Explicit damped pseudo-time stepping with local monotone step sizes.
    PseudoTime,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveConfig {
    /// Relative residual tolerance.
    pub tol: f64,
    pub max_iter: usize,
    /// Fraction of the monotone step bound used by pseudo-time stepping.
    pub damping: f64,
    /// Gradient floor for `alpha < 0`.
    pub eps_grad: f64,
    /// Sup-norm whose crossing signals nonexistence.
    pub blowup_threshold: f64,
    pub method: Method,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 1_000_000,
            damping: 0.8,
            eps_grad: 1e-8,
            blowup_threshold: 1e6,
            method: Method::Newton,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.tol > 0.0
            && self.max_iter > 0
            && self.damping > 0.0
            && self.damping <= 1.0
            && self.eps_grad > 0.0
            && self.blowup_threshold > 0.0;
        if !ok {
            return Err(Error::InvalidParams(format!("invalid solver configuration {self:?}")));
        }
        Ok(())
    }
}
