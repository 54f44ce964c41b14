//! Exterior cone verification.
//!
//! For a boundary point `z` the set of directions `d` for which the segment
//! `z + t d`, `0 < t < rbar`, meets the open domain is a finite union of arcs
//! whose endpoints are directions towards edge endpoints clipped to the disk
//! `B(z, rbar)`. The smallest cone containing `Ω ∩ B(z, rbar)` is the
//! complement of the largest unoccupied gap between those arcs.

use super::polygon::{self, add, dot, norm, scale, sub};
use super::DomainSpec;
use crate::error::{Error, Result};
use crate::Point;
use serde::Serialize;
use std::f64::consts::PI;

/// The smallest cone at a boundary point containing the nearby domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConeView {
    /// Half-opening (radians) of the smallest cone with apex `z` containing
    /// `Ω ∩ B(z, rbar)`.
    pub opening: f64,
    /// Unit axis of that cone, pointing into the domain.
    pub axis: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeReport {
    pub ok: bool,
    /// `min_z (psi - opening(z))`.
    pub worst_margin: f64,
    pub worst_point: Point,
    pub points_checked: usize,
}

fn clip_to_disk(a: Point, b: Point, z: Point, r: f64) -> Option<(f64, f64)> {
    let d = sub(b, a);
    let f = sub(a, z);
    let qa = dot(d, d);
    let qb = 2.0 * dot(f, d);
    let qc = dot(f, f) - r * r;
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    let t0 = ((-qb - s) / (2.0 * qa)).max(0.0);
    let t1 = ((-qb + s) / (2.0 * qa)).min(1.0);
    (t0 <= t1).then_some((t0, t1))
}

fn ray_occupied(vertices: &[Point], z: Point, dir: Point, len: f64) -> bool {
    let mut ts = vec![0.0, len];
    for (a, b) in polygon::edges(vertices) {
        if let Some(t) = polygon::segment_hit(z, dir, a, b) {
            if t > 0.0 && t < len {
                ts.push(t);
            }
        }
    }
    ts.sort_by(|x, y| x.total_cmp(y));
    ts.windows(2).any(|w| {
        if w[1] - w[0] <= 1e-12 * len {
            return false;
        }
        let p = add(z, scale(dir, 0.5 * (w[0] + w[1])));
        polygon::contains(vertices, p) && polygon::distance_to_boundary(vertices, p) > 1e-13 * len
    })
}

/// Smallest cone at `z` (a boundary point) containing `Ω ∩ B(z, rbar)`.
pub fn required_opening(vertices: &[Point], z: Point, rbar: f64) -> ConeView {
    let tiny = 1e-14 * rbar;
    let mut angles = Vec::new();
    for (a, b) in polygon::edges(vertices) {
        if let Some((t0, t1)) = clip_to_disk(a, b, z, rbar) {
            for t in [t0, t1] {
                let p = add(a, scale(sub(b, a), t));
                let v = sub(p, z);
                if norm(v) > tiny {
                    angles.push(v[1].atan2(v[0]));
                }
            }
        }
    }
    angles.sort_by(|x, y| x.total_cmp(y));
    angles.dedup_by(|x, y| (*x - *y).abs() < 1e-13);
    if angles.is_empty() {
        return ConeView { opening: 0.0, axis: [1.0, 0.0] };
    }
    let m = angles.len();
    let mut lens = Vec::with_capacity(m);
    let mut occupied = Vec::with_capacity(m);
    for k in 0..m {
        let lo = angles[k];
        let hi = if k + 1 < m { angles[k + 1] } else { angles[0] + 2.0 * PI };
        let mid = 0.5 * (lo + hi);
        lens.push(hi - lo);
        occupied.push(ray_occupied(vertices, z, [mid.cos(), mid.sin()], rbar));
    }
    if occupied.iter().all(|o| !*o) {
        return ConeView { opening: 0.0, axis: [1.0, 0.0] };
    }
    if occupied.iter().all(|o| *o) {
        return ConeView { opening: PI, axis: [1.0, 0.0] };
    }
    // Longest cyclic run of unoccupied intervals, starting after an occupied one.
    let start = occupied.iter().position(|o| *o).unwrap();
    let mut best = (0.0, 0usize, 0usize);
    let mut run_len = 0.0;
    let mut run_start = 0usize;
    for step in 1..=m {
        let k = (start + step) % m;
        if occupied[k] {
            run_len = 0.0;
        } else {
            if run_len == 0.0 {
                run_start = k;
            }
            run_len += lens[k];
            if run_len > best.0 {
                best = (run_len, run_start, k);
            }
        }
    }
    let gap = best.0;
    let gap_start = angles[best.1];
    let center = gap_start + 0.5 * gap + PI;
    ConeView { opening: PI - 0.5 * gap, axis: [center.cos(), center.sin()] }
}

/// Checks the exterior cone condition at all vertices and `samples` evenly
/// spaced boundary points; the margin is `psi - opening` at the worst point.
pub fn exterior_cone_check(domain: &DomainSpec, samples: usize) -> Result<ConeReport> {
    let verts = domain.vertices();
    let diam = domain.diameter();
    for (i, (a, b)) in polygon::edges(verts).enumerate() {
        if norm(sub(b, a)) <= 1e-12 * diam {
            return Err(Error::InvalidDomain(format!("zero-length edge at vertex {i}")));
        }
    }
    let mut points: Vec<Point> = verts.to_vec();
    points.extend(domain.boundary_samples(samples));
    let mut worst = (f64::INFINITY, verts[0]);
    for &z in &points {
        let view = required_opening(verts, z, domain.rbar());
        let margin = domain.psi() - view.opening;
        if margin < worst.0 {
            worst = (margin, z);
        }
    }
    Ok(ConeReport {
        ok: worst.0 >= -1e-9,
        worst_margin: worst.0,
        worst_point: worst.1,
        points_checked: points.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force angular sweep over 4096 directions, the independent route.
    fn sweep_opening(verts: &[Point], z: Point, rbar: f64) -> f64 {
        let n = 4096;
        let occ: Vec<bool> = (0..n)
            .map(|k| {
                let t = 2.0 * PI * (k as f64 + 0.5) / n as f64;
                let d = [t.cos(), t.sin()];
                (1..200).any(|s| {
                    let p = add(z, scale(d, rbar * s as f64 / 200.0));
                    polygon::contains(verts, p) && polygon::distance_to_boundary(verts, p) > 1e-9
                })
            })
            .collect();
        let mut best = f64::INFINITY;
        for a in 0..n {
            let axis = 2.0 * PI * (a as f64 + 0.5) / n as f64;
            let mut worst: f64 = 0.0;
            for (k, o) in occ.iter().enumerate() {
                if *o {
                    let t = 2.0 * PI * (k as f64 + 0.5) / n as f64;
                    let mut diff = (t - axis).rem_euclid(2.0 * PI);
                    if diff > PI {
                        diff = 2.0 * PI - diff;
                    }
                    worst = worst.max(diff);
                }
            }
            best = best.min(worst);
        }
        best
    }

    #[test]
    fn square_edge_and_corner() {
        let d = DomainSpec::unit_square(PI / 2.0, 0.5).unwrap();
        let edge = required_opening(d.vertices(), [0.5, 0.0], 0.5);
        assert!((edge.opening - PI / 2.0).abs() < 1e-12);
        assert!((edge.axis[1] - 1.0).abs() < 1e-12);
        let corner = required_opening(d.vertices(), [0.0, 0.0], 0.5);
        assert!((corner.opening - PI / 4.0).abs() < 1e-12);
        assert!(exterior_cone_check(&d, 256).unwrap().ok);
    }

    #[test]
    fn l_shape_reentrant_corner() {
        let ok = DomainSpec::l_shape(3.0 * PI / 4.0, 0.5).unwrap();
        let r = exterior_cone_check(&ok, 256).unwrap();
        assert!(r.ok, "{r:?}");
        let bad = DomainSpec::l_shape(PI / 2.0, 0.5).unwrap();
        let r = exterior_cone_check(&bad, 256).unwrap();
        assert!(!r.ok);
        assert!((r.worst_margin + PI / 4.0).abs() < 1e-9);
        assert_eq!(r.worst_point, [0.0, 0.0]);
    }

    #[test]
    fn matches_angular_sweep() {
        let d = DomainSpec::l_shape(3.0 * PI / 4.0, 0.5).unwrap();
        for z in [[0.0, 0.0], [0.5, 0.0], [1.0, 1.0], [-1.0, 0.3], [0.0, -0.5]] {
            let exact = required_opening(d.vertices(), z, 0.5).opening;
            let swept = sweep_opening(d.vertices(), z, 0.5);
            assert!((exact - swept).abs() < 2.0 * PI / 4096.0 + 1e-9, "{z:?}: {exact} vs {swept}");
        }
    }

    #[test]
    fn near_pi_cone_on_convex_polygon() {
        let d = DomainSpec::regular_polygon(7, 1.0, PI - 1e-3, 0.3).unwrap();
        assert!(exterior_cone_check(&d, 256).unwrap().ok);
    }
}
