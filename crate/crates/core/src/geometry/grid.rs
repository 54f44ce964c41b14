//! Uniform lattice with a wide, centrally symmetric stencil and cut-cell
//! links to the boundary.

use super::polygon::{self, add, scale};
use super::DomainSpec;
use crate::error::{Error, Result};
use crate::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    /// Unknown whose stencil neighbors are all unknowns.
    Interior,
    /// Unknown with at least one stencil segment cut by the boundary.
    BoundaryAdjacent,
    /// Outside the domain or on its boundary.
    Exterior,
}

impl NodeKind {
    pub fn is_unknown(self) -> bool {
        !matches!(self, NodeKind::Exterior)
    }
}

/// Where the stencil segment from a node along `±e` ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Link {
    /// Another unknown, by unknown index.
    Node(u32),
    /// The boundary, crossed at fraction `t ∈ (0, 1]` of the lattice step;
    /// `cut` indexes [`Grid::cut_points`].
    Cut { t: f64, cut: u32 },
}

/// Half of a centrally symmetric direction set, plus its orthogonal frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    /// One representative of each `±e` pair.
    pub directions: Vec<[i32; 2]>,
    /// Orthogonal pairs of indices into `directions`.
    pub frames: Vec<(usize, usize)>,
}

impl Stencil {
    pub fn new(order: usize) -> Result<Self> {
        let mut directions = vec![[1, 0], [0, 1], [1, 1], [-1, 1]];
        match order {
            1 => {}
            2 => directions.extend([[2, 1], [-1, 2], [1, 2], [-2, 1]]),
            _ => {
                return Err(Error::InvalidGrid(format!("stencil order {order} not in {{1, 2}}")))
            }
        }
        let frames = (0..directions.len() / 2).map(|k| (2 * k, 2 * k + 1)).collect();
        Ok(Self { directions, frames })
    }

    /// Number of distinct directions counting `e` and `-e` separately.
    pub fn direction_count(&self) -> usize {
        2 * self.directions.len()
    }

    pub fn reach(&self) -> i32 {
        self.directions.iter().map(|d| d[0].abs().max(d[1].abs())).max().unwrap_or(1)
    }

    /// Squared length of direction `k` in lattice units.
    pub fn len2(&self, k: usize) -> f64 {
        let d = self.directions[k];
        (d[0] * d[0] + d[1] * d[1]) as f64
    }
}

#[derive(Debug, Clone)]
pub struct Grid {
    domain: DomainSpec,
    spacing: f64,
    origin: [i32; 2],
    dims: [usize; 2],
    kinds: Vec<NodeKind>,
    unknown_of: Vec<u32>,
    lattice: Vec<[i32; 2]>,
    positions: Vec<Point>,
    links: Vec<Link>,
    cut_points: Vec<Point>,
    stencil: Stencil,
}

const NONE: u32 = u32::MAX;

/// Builds the lattice `h Z²` over the domain's bounding box and classifies
/// every node.
pub fn build_grid(domain: &DomainSpec, h_grid: f64, stencil_order: usize) -> Result<Grid> {
    let stencil = Stencil::new(stencil_order)?;
    if !(h_grid > 0.0 && h_grid.is_finite()) {
        return Err(Error::InvalidGrid(format!("spacing {h_grid} must be positive")));
    }
    if h_grid >= domain.diameter() {
        return Err(Error::EmptyGrid(format!("spacing {h_grid} exceeds the domain diameter")));
    }
    if h_grid >= domain.rbar() / 4.0 {
        return Err(Error::InvalidGrid(format!(
            "spacing {h_grid} must be below rbar/4 = {}",
            domain.rbar() / 4.0
        )));
    }
    let verts = domain.vertices();
    let (lo, hi) = domain.bounding_box();
    let reach = stencil.reach();
    let i0 = (lo[0] / h_grid).floor() as i32 - reach;
    let j0 = (lo[1] / h_grid).floor() as i32 - reach;
    let i1 = (hi[0] / h_grid).ceil() as i32 + reach;
    let j1 = (hi[1] / h_grid).ceil() as i32 + reach;
    let dims = [(i1 - i0 + 1) as usize, (j1 - j0 + 1) as usize];
    let total = dims[0] * dims[1];

    let mut kinds = vec![NodeKind::Exterior; total];
    let mut unknown_of = vec![NONE; total];
    let mut lattice = Vec::new();
    let mut positions = Vec::new();
    for jj in 0..dims[1] {
        for ii in 0..dims[0] {
            let (i, j) = (i0 + ii as i32, j0 + jj as i32);
            let p = [i as f64 * h_grid, j as f64 * h_grid];
            if polygon::contains(verts, p) && polygon::distance_to_boundary(verts, p) > 1e-9 * h_grid
            {
                let flat = jj * dims[0] + ii;
                unknown_of[flat] = lattice.len() as u32;
                kinds[flat] = NodeKind::Interior;
                lattice.push([i, j]);
                positions.push(p);
            }
        }
    }
    if lattice.is_empty() {
        return Err(Error::EmptyGrid(format!("no lattice node of spacing {h_grid} is inside")));
    }

    let mut links = Vec::with_capacity(lattice.len() * stencil.direction_count());
    let mut cut_points = Vec::new();
    for (idx, &[i, j]) in lattice.iter().enumerate() {
        let p = positions[idx];
        let mut any_cut = false;
        for dir in &stencil.directions {
            for sign in [1, -1] {
                let e = [sign * dir[0], sign * dir[1]];
                let step = [e[0] as f64 * h_grid, e[1] as f64 * h_grid];
                let mut hit: Option<f64> = None;
                for (a, b) in polygon::edges(verts) {
                    if let Some(t) = polygon::segment_hit(p, step, a, b) {
                        if t > 1e-12 && t <= 1.0 + 1e-12 {
                            hit = Some(hit.map_or(t, |h: f64| h.min(t)));
                        }
                    }
                }
                let (ni, nj) = ((i + e[0] - i0) as usize, (j + e[1] - j0) as usize);
                let neighbor = unknown_of[nj * dims[0] + ni];
                let crosses = hit.is_some_and(|t| t < 1.0 - 1e-12);
                if neighbor != NONE && !crosses {
                    links.push(Link::Node(neighbor));
                } else {
                    let t = hit.unwrap_or(1.0).clamp(1e-6, 1.0);
                    links.push(Link::Cut { t, cut: cut_points.len() as u32 });
                    cut_points.push(add(p, scale(step, t)));
                    any_cut = true;
                }
            }
        }
        if any_cut {
            let (ii, jj) = ((i - i0) as usize, (j - j0) as usize);
            kinds[jj * dims[0] + ii] = NodeKind::BoundaryAdjacent;
        }
    }

    Ok(Grid {
        domain: domain.clone(),
        spacing: h_grid,
        origin: [i0, j0],
        dims,
        kinds,
        unknown_of,
        lattice,
        positions,
        links,
        cut_points,
        stencil,
    })
}

impl Grid {
    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn stencil(&self) -> &Stencil {
        &self.stencil
    }

    /// Number of unknowns (interior plus boundary-adjacent nodes).
    pub fn len(&self) -> usize {
        self.lattice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lattice.is_empty()
    }

    pub fn position(&self, node: usize) -> Point {
        self.positions[node]
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn lattice_index(&self, node: usize) -> [i32; 2] {
        self.lattice[node]
    }

    pub fn kind(&self, node: usize) -> NodeKind {
        let [i, j] = self.lattice[node];
        self.kind_at(i, j)
    }

    /// Classification of lattice node `(i, j)`; nodes off the lattice are exterior.
    pub fn kind_at(&self, i: i32, j: i32) -> NodeKind {
        match self.flat(i, j) {
            Some(f) => self.kinds[f],
            None => NodeKind::Exterior,
        }
    }

    /// Unknown index of lattice node `(i, j)`, if it is an unknown.
    pub fn unknown_at(&self, i: i32, j: i32) -> Option<usize> {
        self.flat(i, j).and_then(|f| {
            let u = self.unknown_of[f];
            (u != NONE).then_some(u as usize)
        })
    }

    fn flat(&self, i: i32, j: i32) -> Option<usize> {
        let ii = i - self.origin[0];
        let jj = j - self.origin[1];
        if ii < 0 || jj < 0 || ii as usize >= self.dims[0] || jj as usize >= self.dims[1] {
            None
        } else {
            Some(jj as usize * self.dims[0] + ii as usize)
        }
    }

    /// Link of `node` along direction `k` (`side` 0 for `+e`, 1 for `-e`).
    #[inline]
    pub fn link(&self, node: usize, k: usize, side: usize) -> Link {
        self.links[node * self.stencil.direction_count() + 2 * k + side]
    }

    pub fn cut_points(&self) -> &[Point] {
        &self.cut_points
    }

    pub fn count_kind(&self, kind: NodeKind) -> usize {
        self.lattice.iter().filter(|&&[i, j]| self.kind_at(i, j) == kind).count()
    }

    /// Largest `|col - row|` coupling between unknowns through the stencil.
    pub fn bandwidth(&self) -> usize {
        let mut bw = 0usize;
        for node in 0..self.len() {
            for k in 0..self.stencil.directions.len() {
                for side in 0..2 {
                    if let Link::Node(m) = self.link(node, k, side) {
                        bw = bw.max((m as usize).abs_diff(node));
                    }
                }
            }
        }
        bw
    }
}
