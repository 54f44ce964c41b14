//! Planar polygon primitives.

use crate::Point;

#[inline]
pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub(crate) fn add(a: Point, b: Point) -> Point {
    [a[0] + b[0], a[1] + b[1]]
}

#[inline]
pub(crate) fn scale(a: Point, s: f64) -> Point {
    [a[0] * s, a[1] * s]
}

#[inline]
pub(crate) fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub(crate) fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub(crate) fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

/// Signed area; positive for counter-clockwise vertex order.
pub fn signed_area(vertices: &[Point]) -> f64 {
    let n = vertices.len();
    let mut s = 0.0;
    for i in 0..n {
        s += cross(vertices[i], vertices[(i + 1) % n]);
    }
    0.5 * s
}

pub fn perimeter(vertices: &[Point]) -> f64 {
    edges(vertices).map(|(a, b)| norm(sub(b, a))).sum()
}

/// Iterator over the closed edge list `(v_i, v_{i+1})`.
pub fn edges(vertices: &[Point]) -> impl Iterator<Item = (Point, Point)> + '_ {
    let n = vertices.len();
    (0..n).map(move |i| (vertices[i], vertices[(i + 1) % n]))
}

/// Crossing-number point-in-polygon test. Points on the boundary may land on
/// either side; callers that care use [`distance_to_boundary`].
pub fn contains(vertices: &[Point], p: Point) -> bool {
    let mut inside = false;
    for (a, b) in edges(vertices) {
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    let t = if len2 > 0.0 {
        (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    norm(sub(p, add(a, scale(ab, t))))
}

pub fn distance_to_boundary(vertices: &[Point], p: Point) -> f64 {
    edges(vertices)
        .map(|(a, b)| point_segment_distance(p, a, b))
        .fold(f64::INFINITY, f64::min)
}

/// Positive inside, negative outside.
pub fn signed_distance(vertices: &[Point], p: Point) -> f64 {
    let d = distance_to_boundary(vertices, p);
    if contains(vertices, p) {
        d
    } else {
        -d
    }
}

/// Parameter `t` of the intersection of `p + t d` with segment `[a, b]`, if any.
pub fn segment_hit(p: Point, d: Point, a: Point, b: Point) -> Option<f64> {
    let e = sub(b, a);
    let denom = cross(d, e);
    if denom.abs() < 1e-300 {
        return None;
    }
    let ap = sub(a, p);
    let t = cross(ap, e) / denom;
    let s = cross(ap, d) / denom;
    let eps = 1e-12;
    if (-eps..=1.0 + eps).contains(&s) {
        Some(t)
    } else {
        None
    }
}

/// Proper or touching intersection between two closed segments.
pub fn segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = cross(sub(q2, q1), sub(p1, q1));
    let d2 = cross(sub(q2, q1), sub(p2, q1));
    let d3 = cross(sub(p2, p1), sub(q1, p1));
    let d4 = cross(sub(p2, p1), sub(q2, p1));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |a: Point, b: Point, c: Point, d: f64| {
        d == 0.0
            && c[0] >= a[0].min(b[0])
            && c[0] <= a[0].max(b[0])
            && c[1] >= a[1].min(b[1])
            && c[1] <= a[1].max(b[1])
    };
    on(q1, q2, p1, d1) || on(q1, q2, p2, d2) || on(p1, p2, q1, d3) || on(p1, p2, q2, d4)
}

/// True when no two non-adjacent edges intersect.
pub fn is_simple(vertices: &[Point]) -> bool {
    let n = vertices.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let (a1, a2) = (vertices[i], vertices[(i + 1) % n]);
        for j in (i + 1)..n {
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (b1, b2) = (vertices[j], vertices[(j + 1) % n]);
            if segments_intersect(a1, a2, b1, b2) {
                return false;
            }
        }
    }
    true
}

pub fn bounding_box(vertices: &[Point]) -> (Point, Point) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for v in vertices {
        for k in 0..2 {
            lo[k] = lo[k].min(v[k]);
            hi[k] = hi[k].max(v[k]);
        }
    }
    (lo, hi)
}

pub fn diameter(vertices: &[Point]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, a) in vertices.iter().enumerate() {
        for b in &vertices[i + 1..] {
            d = d.max(norm(sub(*a, *b)));
        }
    }
    d
}

/// Points spaced evenly by arclength along the boundary, starting at the
/// first vertex.
pub fn sample_boundary(vertices: &[Point], count: usize) -> Vec<Point> {
    let total = perimeter(vertices);
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return out;
    }
    let step = total / count as f64;
    let mut edge_iter = edges(vertices);
    let (mut a, mut b) = edge_iter.next().expect("polygon has edges");
    let mut consumed = 0.0;
    let mut len = norm(sub(b, a));
    for k in 0..count {
        let s = k as f64 * step;
        while s > consumed + len {
            consumed += len;
            match edge_iter.next() {
                Some((na, nb)) => {
                    a = na;
                    b = nb;
                    len = norm(sub(b, a));
                }
                None => break,
            }
        }
        let t = if len > 0.0 { ((s - consumed) / len).clamp(0.0, 1.0) } else { 0.0 };
        out.push(add(a, scale(sub(b, a), t)));
    }
    out
}
