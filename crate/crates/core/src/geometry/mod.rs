//! Polygonal domains with uniform exterior-cone data.
//!
//! A [`DomainSpec`] is immutable once built; the interior and exterior offset
//! sequences return fresh domains.

mod cone;
mod grid;
mod offset;
pub mod polygon;

pub use cone::{exterior_cone_check, required_opening, ConeReport, ConeView};
pub use grid::{build_grid, Grid, Link, NodeKind, Stencil};
pub use offset::{exterior_approximation, interior_exhaustion, offset_polygon};

use crate::error::{Error, Result};
use crate::Point;
use std::f64::consts::PI;

/// A simple polygon together with the cone half-opening `psi` and the cone
/// height `rbar` of its uniform exterior cone condition.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    vertices: Vec<Point>,
    psi: f64,
    rbar: f64,
}

impl DomainSpec {
    /// Validates and normalizes the vertex list to counter-clockwise order.
    pub fn new(mut vertices: Vec<Point>, psi: f64, rbar: f64) -> Result<Self> {
        if vertices.len() >= 2 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        if vertices.len() < 3 {
            return Err(Error::InvalidDomain("need at least three vertices".into()));
        }
        if vertices.iter().any(|v| !v[0].is_finite() || !v[1].is_finite()) {
            return Err(Error::InvalidDomain("non-finite vertex".into()));
        }
        if !(psi > 0.0 && psi < PI) {
            return Err(Error::InvalidDomain(format!("psi = {psi} must lie in (0, pi)")));
        }
        if !(rbar > 0.0 && rbar.is_finite()) {
            return Err(Error::InvalidDomain(format!("rbar = {rbar} must be positive")));
        }
        let diam = polygon::diameter(&vertices);
        for (i, (a, b)) in polygon::edges(&vertices).enumerate() {
            if polygon::norm(polygon::sub(b, a)) <= 1e-12 * diam.max(1e-300) {
                return Err(Error::InvalidDomain(format!("zero-length edge at vertex {i}")));
            }
        }
        let area = polygon::signed_area(&vertices);
        if area.abs() <= 1e-14 * diam * diam {
            return Err(Error::InvalidDomain("polygon has zero area".into()));
        }
        if !polygon::is_simple(&vertices) {
            return Err(Error::InvalidDomain("polygon is self-intersecting".into()));
        }
        if area < 0.0 {
            vertices.reverse();
        }
        Ok(Self { vertices, psi, rbar })
    }

    pub fn unit_square(psi: f64, rbar: f64) -> Result<Self> {
        Self::new(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]], psi, rbar)
    }

    /// The L-shaped domain `[-1,1]x[0,1] ∪ [-1,0]x[-1,0]` with its re-entrant
    /// corner at the origin.
    pub fn l_shape(psi: f64, rbar: f64) -> Result<Self> {
        Self::new(
            vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [0.0, -1.0]],
            psi,
            rbar,
        )
    }

    /// Regular `n`-gon inscribed in the circle of the given radius about the origin.
    pub fn regular_polygon(n: usize, radius: f64, psi: f64, rbar: f64) -> Result<Self> {
        let verts = (0..n)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / n as f64;
                [radius * t.cos(), radius * t.sin()]
            })
            .collect();
        Self::new(verts, psi, rbar)
    }

    /// Parses a domain file: one `x y` pair per line, `#` starts a comment line.
    pub fn parse(text: &str, psi: f64, rbar: f64) -> Result<Self> {
        let mut verts = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let nums: Vec<f64> = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::InvalidDomain(format!("line {}: {e}", lineno + 1)))?;
            if nums.len() != 2 {
                return Err(Error::InvalidDomain(format!(
                    "line {}: expected two coordinates",
                    lineno + 1
                )));
            }
            verts.push([nums[0], nums[1]]);
        }
        Self::new(verts, psi, rbar)
    }

    /// The domain dilated about the origin by `t > 0`; cone heights scale too.
    pub fn scaled(&self, t: f64) -> Result<Self> {
        let verts = self.vertices.iter().map(|v| [v[0] * t, v[1] * t]).collect();
        Self::new(verts, self.psi, self.rbar * t)
    }

    pub fn with_cone(&self, psi: f64, rbar: f64) -> Result<Self> {
        Self::new(self.vertices.clone(), psi, rbar)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }

    pub fn rbar(&self) -> f64 {
        self.rbar
    }

    pub fn area(&self) -> f64 {
        polygon::signed_area(&self.vertices)
    }

    pub fn diameter(&self) -> f64 {
        polygon::diameter(&self.vertices)
    }

    pub fn contains(&self, p: Point) -> bool {
        polygon::contains(&self.vertices, p)
    }

    pub fn distance_to_boundary(&self, p: Point) -> f64 {
        polygon::distance_to_boundary(&self.vertices, p)
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        polygon::bounding_box(&self.vertices)
    }

    /// Evenly spaced boundary samples by arclength, starting at vertex 0.
    pub fn boundary_samples(&self, count: usize) -> Vec<Point> {
        polygon::sample_boundary(&self.vertices, count)
    }

    /// Halton points of the bounding box that fall strictly inside the domain.
    pub fn interior_samples(&self, count: usize) -> Vec<Point> {
        let (lo, hi) = self.bounding_box();
        let mut out = Vec::with_capacity(count);
        let mut k = 1u64;
        while out.len() < count {
            let u = crate::sampling::halton2(k);
            k += 1;
            let p = [lo[0] + u[0] * (hi[0] - lo[0]), lo[1] + u[1] * (hi[1] - lo[1])];
            if self.contains(p) && self.distance_to_boundary(p) > 1e-12 {
                out.push(p);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizes_orientation() {
        let d = DomainSpec::new(
            vec![[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]],
            PI / 2.0,
            0.5,
        )
        .unwrap();
        assert!(d.area() > 0.0);
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(matches!(
            DomainSpec::new(vec![[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], 1.0, 1.0),
            Err(Error::InvalidDomain(_))
        ));
        assert!(DomainSpec::new(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]], 1.0, 1.0).is_err());
        assert!(DomainSpec::unit_square(PI, 1.0).is_err());
        assert!(DomainSpec::unit_square(1.0, 0.0).is_err());
    }

    #[test]
    fn parses_domain_files() {
        let text = "# unit square\n0 0\n1 0\n\n1 1\n0 1\n";
        let d = DomainSpec::parse(text, PI / 2.0, 0.5).unwrap();
        assert_eq!(d.vertices().len(), 4);
        assert!((d.area() - 1.0).abs() < 1e-15);
        assert!(DomainSpec::parse("0 0\n1\n", 1.0, 1.0).is_err());
    }

    #[test]
    fn l_shape_area() {
        let d = DomainSpec::l_shape(3.0 * PI / 4.0, 0.5).unwrap();
        assert!((d.area() - 3.0).abs() < 1e-14);
        assert!(d.contains([-0.5, -0.5]));
        assert!(!d.contains([0.5, -0.5]));
    }
}
