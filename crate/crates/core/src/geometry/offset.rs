//! Polygon erosion and dilation with arc-sampled rounding.

use super::polygon::{self, add, cross, dot, norm, scale, sub};
use super::DomainSpec;
use crate::error::{Error, Result};
use crate::Point;

/// Offsets a counter-clockwise polygon by `dist`: positive values erode
/// (move inward), negative values dilate. Corners where the offset lines
/// diverge are replaced by circular arcs of radius `|dist|` sampled at
/// chord spacing about `|dist| / 8`; the other corners are mitred, which is
/// the exact offset there.
pub fn offset_polygon(vertices: &[Point], dist: f64) -> Result<Vec<Point>> {
    let n = vertices.len();
    if dist == 0.0 {
        return Ok(vertices.to_vec());
    }
    let dirs: Vec<Point> = (0..n)
        .map(|i| {
            let d = sub(vertices[(i + 1) % n], vertices[i]);
            scale(d, 1.0 / norm(d))
        })
        .collect();
    let normals: Vec<Point> = dirs.iter().map(|d| [-d[1], d[0]]).collect();
    // first and last generated point for every vertex
    let mut out = Vec::new();
    let mut span = Vec::with_capacity(n);
    for i in 0..n {
        let prev = (i + n - 1) % n;
        let v = vertices[i];
        let (dp, dn) = (dirs[prev], dirs[i]);
        let (np, nn) = (normals[prev], normals[i]);
        let turn = cross(dp, dn);
        let first = out.len();
        if turn.abs() < 1e-12 {
            out.push(add(v, scale(np, dist)));
        } else if turn * dist < 0.0 {
            let phi = turn.atan2(dot(dp, dn));
            let k = (8.0 * phi.abs()).ceil().max(1.0) as usize;
            for j in 0..=k {
                let t = phi * j as f64 / k as f64;
                let (s, c) = t.sin_cos();
                let r = [np[0] * c - np[1] * s, np[0] * s + np[1] * c];
                out.push(add(v, scale(r, dist)));
            }
        } else {
            let m = add(np, nn);
            out.push(add(v, scale(m, dist / (1.0 + dot(np, nn)))));
        }
        span.push((first, out.len() - 1));
    }
    let collapse = |msg: &str| {
        if dist > 0.0 {
            Error::EmptyDomain(format!("erosion by {dist} {msg}"))
        } else {
            Error::Geometry(format!("dilation by {} {msg}", -dist))
        }
    };
    for i in 0..n {
        let start = out[span[i].1];
        let end = out[span[(i + 1) % n].0];
        if dot(sub(end, start), dirs[i]) <= 0.0 {
            return Err(collapse("collapses an edge"));
        }
    }
    if polygon::signed_area(&out) <= 0.0 || !polygon::is_simple(&out) {
        return Err(collapse("changes the polygon topology"));
    }
    Ok(out)
}

/// `d_j = rbar / (2j)`.
fn schedule(domain: &DomainSpec, j: usize) -> Result<f64> {
    if j == 0 {
        return Err(Error::InvalidParams("exhaustion index starts at 1".into()));
    }
    Ok(domain.rbar() / (2.0 * j as f64))
}

/// Interior exhaustion domain `H_j`: the erosion by `rbar / (2j)`.
pub fn interior_exhaustion(domain: &DomainSpec, j: usize) -> Result<DomainSpec> {
    let d = schedule(domain, j)?;
    let verts = offset_polygon(domain.vertices(), d)?;
    DomainSpec::new(verts, domain.psi(), domain.rbar()).map_err(|e| match e {
        Error::InvalidDomain(m) => Error::EmptyDomain(m),
        other => other,
    })
}

/// Exterior approximation `Ω_j`: the dilation by `rbar / (2j)`.
pub fn exterior_approximation(domain: &DomainSpec, j: usize) -> Result<DomainSpec> {
    let d = schedule(domain, j)?;
    let verts = offset_polygon(domain.vertices(), -d)?;
    DomainSpec::new(verts, domain.psi(), domain.rbar())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sampled_hausdorff(a: &DomainSpec, b: &DomainSpec) -> f64 {
        let pa = a.boundary_samples(2000);
        let pb = b.boundary_samples(2000);
        let one = |p: &[Point], q: &DomainSpec| {
            p.iter().map(|x| q.distance_to_boundary(*x)).fold(0.0, f64::max)
        };
        one(&pa, b).max(one(&pb, a))
    }

    #[test]
    fn square_erosion_is_exact() {
        let d = DomainSpec::unit_square(PI / 2.0, 0.5).unwrap();
        let h1 = interior_exhaustion(&d, 1).unwrap();
        let mut v = h1.vertices().to_vec();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let want = [[0.25, 0.25], [0.25, 0.75], [0.75, 0.25], [0.75, 0.75]];
        for (p, q) in v.iter().zip(want) {
            assert!((p[0] - q[0]).abs() < 1e-14 && (p[1] - q[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn square_dilation_contains_and_rounds() {
        let d = DomainSpec::unit_square(PI / 2.0, 0.5).unwrap();
        let o1 = exterior_approximation(&d, 1).unwrap();
        assert!(o1.contains([-0.2, 0.5]) && o1.contains([0.5, 1.2]));
        assert!(!o1.contains([-0.24, -0.24]));
        let exact = 1.0 + 4.0 * 0.25 + PI * 0.25 * 0.25;
        assert!(o1.area() < exact && o1.area() > exact - 1e-2);
    }

    #[test]
    fn erosion_to_nothing_fails() {
        let d = DomainSpec::unit_square(PI / 2.0, 1.2).unwrap();
        assert!(matches!(interior_exhaustion(&d, 1), Err(Error::EmptyDomain(_))));
    }

    #[test]
    fn l_shape_sequences_nest() {
        let d = DomainSpec::l_shape(3.0 * PI / 4.0, 0.5).unwrap();
        let inner: Vec<_> = (1..=11).map(|j| interior_exhaustion(&d, j).unwrap()).collect();
        let outer: Vec<_> = (1..=11).map(|j| exterior_approximation(&d, j).unwrap()).collect();
        for j in 0..10 {
            for p in inner[j].boundary_samples(400) {
                assert!(inner[j + 1].contains(p) && inner[j + 1].distance_to_boundary(p) > 0.0);
            }
            for p in outer[j + 1].boundary_samples(400) {
                assert!(outer[j].contains(p));
            }
            assert!(outer[j + 1].area() < outer[j].area());
            assert!(outer[j + 1].area() > d.area());
            assert!(inner[j + 1].area() > inner[j].area());
        }
        let mut last = f64::INFINITY;
        for h in &inner {
            let dist = sampled_hausdorff(h, &d);
            assert!(dist < last);
            last = dist;
        }
        assert!(last < 0.05);
        // Every interior sample point is eventually covered.
        for p in d.interior_samples(500) {
            let dist = d.distance_to_boundary(p);
            let needed = (0.5 / (2.0 * dist) * 1.5).ceil() as usize + 1;
            let j = needed.clamp(1, 400);
            let hj = interior_exhaustion(&d, j).unwrap();
            assert!(hj.contains(p), "{p:?} not in H_{j}");
        }
    }
}
