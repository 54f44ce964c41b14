//! Growth exponent of a discrete solution at a boundary point.

use super::GridFunction;
use crate::error::{Error, Result};
use crate::geometry::{required_opening, DomainSpec};
use crate::Point;
use serde::Serialize;
use std::f64::consts::PI;

#[derive(Debug, Clone, Serialize)]
pub struct HolderEstimate {
    /// Fitted exponent in `u ≈ C r^gamma`.
    pub gamma: f64,
    pub c: f64,
    pub rays: usize,
    pub samples: usize,
}

/// Least-squares fit of `log u` against `log |x − z|` along `rays` rays
/// from `z` into the domain, with `r ∈ [2h, rbar/4]`.
///
/// When `z` is a lattice point the rays run through nodes and no
/// interpolation is involved; otherwise values are interpolated bilinearly.
pub fn holder_estimate(u: &GridFunction, domain: &DomainSpec, z: Point, rays: usize) -> Result<HolderEstimate> {
    if rays == 0 {
        return Err(Error::InvalidParams("need at least one ray".into()));
    }
    let grid = u.grid();
    let h = grid.spacing();
    let (r_lo, r_hi) = (2.0 * h, domain.rbar() / 4.0);
    let cone = required_opening(domain.vertices(), z, domain.rbar());
    let axis = cone.axis[1].atan2(cone.axis[0]);
    let lattice = (z[0] / h - (z[0] / h).round()).abs() < 1e-9 && (z[1] / h - (z[1] / h).round()).abs() < 1e-9;
    let (zi, zj) = ((z[0] / h).round() as i32, (z[1] / h).round() as i32);
    // lattice rays step through nodes; other rays are sampled at geometric radii
    let chosen: Vec<(Point, Option<[i32; 2]>)> = if lattice {
        let mut dirs = Vec::new();
        for (p, q) in [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)] {
            let t = (q as f64).atan2(p as f64);
            let off = (t - axis + PI).rem_euclid(2.0 * PI) - PI;
            if off.abs() < cone.opening - 1e-9 {
                dirs.push((off, [p, q]));
            }
        }
        dirs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let pick: Vec<[i32; 2]> = if dirs.len() <= rays {
            dirs.iter().map(|d| d.1).collect()
        } else {
            (0..rays).map(|k| dirs[(2 * k + 1) * dirs.len() / (2 * rays)].1).collect()
        };
        pick.into_iter()
            .map(|e| {
                let l = ((e[0] * e[0] + e[1] * e[1]) as f64).sqrt();
                ([e[0] as f64 / l, e[1] as f64 / l], Some(e))
            })
            .collect()
    } else {
        (0..rays)
            .map(|k| {
                let t = axis - cone.opening + (k as f64 + 0.5) * 2.0 * cone.opening / rays as f64;
                ([t.cos(), t.sin()], None)
            })
            .collect()
    };
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (dir, step) in &chosen {
        let mut pts: Vec<(f64, Option<f64>)> = Vec::new();
        match step {
            Some(e) => {
                let len = ((e[0] * e[0] + e[1] * e[1]) as f64).sqrt() * h;
                let mut k = 1;
                while k as f64 * len <= r_hi * (1.0 + 1e-12) {
                    let r = k as f64 * len;
                    if r >= r_lo * (1.0 - 1e-12) {
                        pts.push((r, grid.unknown_at(zi + k * e[0], zj + k * e[1]).map(|n| u.values[n])));
                    }
                    k += 1;
                }
            }
            None => {
                let m = 12;
                for j in 0..m {
                    let r = r_lo * (r_hi / r_lo).powf(j as f64 / (m - 1) as f64);
                    let x = [z[0] + r * dir[0], z[1] + r * dir[1]];
                    pts.push((r, domain.contains(x).then(|| u.sample(x))));
                }
            }
        }
        let mut usable = 0;
        for (r, val) in pts {
            if let Some(v) = val.filter(|v| *v > 0.0) {
                xs.push(r.ln());
                ys.push(v.ln());
                usable += 1;
            }
        }
        if usable < 5 {
            return Err(Error::InsufficientData(format!(
                "ray at angle {:.3} has {usable} usable samples, need 5",
                dir[1].atan2(dir[0])
            )));
        }
    }
    if chosen.is_empty() {
        return Err(Error::InsufficientData("no lattice ray enters the domain".into()));
    }
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let gamma = sxy / sxx;
    Ok(HolderEstimate { gamma, c: (my - gamma * mx).exp(), rays: chosen.len(), samples: xs.len() })
}
