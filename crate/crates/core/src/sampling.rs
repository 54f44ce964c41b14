//! Low-discrepancy sampling used by the certification routines.

/// Radical inverse of `index` in the given prime `base`.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while index > 0 {
        out += f * (index % base) as f64;
        index /= base;
        f *= inv;
    }
    out
}

/// The `index`-th point of the 2D Halton sequence (bases 2 and 3) in `[0,1)²`.
pub fn halton2(index: u64) -> [f64; 2] {
    [radical_inverse(index, 2), radical_inverse(index, 3)]
}
