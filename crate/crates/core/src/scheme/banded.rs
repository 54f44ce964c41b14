//! Banded LU factorization with partial pivoting.

use crate::error::{Error, Result};

/// Square band matrix with `kl` sub- and `ku` superdiagonals, stored by rows
/// with room for the fill-in that row exchanges create.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self { n, kl, ku, width, data: vec![0.0; n * width] }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    fn idx(&self, r: usize, c: usize) -> usize {
        r * self.width + (c + self.kl - r)
    }

    /// Adds `v` at `(r, c)`; panics outside the band.
    #[inline]
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        assert!(c + self.kl >= r && c <= r + self.ku, "({r}, {c}) outside the band");
        let i = self.idx(r, c);
        self.data[i] += v;
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        if c + self.kl < r || c > r + self.ku + self.kl {
            0.0
        } else {
            self.data[self.idx(r, c)]
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|r| {
                let lo = r.saturating_sub(self.kl);
                let hi = (r + self.ku).min(self.n - 1);
                (lo..=hi).map(|c| self.data[self.idx(r, c)] * x[c]).sum()
            })
            .collect()
    }

    /// In-place factorization `P A = L U`.
    pub fn factor(mut self) -> Result<BandLu> {
        let (n, kl) = (self.n, self.kl);
        let reach = kl + self.ku;
        let mut piv = vec![0usize; n];
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.idx(k, k)].abs();
            for r in (k + 1)..=last {
                let v = self.data[self.idx(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if !(best > 0.0) || !best.is_finite() {
                return Err(Error::Scheme(format!("singular Jacobian at row {k}")));
            }
            piv[k] = p;
            let cend = (k + reach).min(n - 1);
            if p != k {
                for c in k..=cend {
                    let (a, b) = (self.idx(k, c), self.idx(p, c));
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.idx(k, k)];
            for r in (k + 1)..=last {
                let ir = self.idx(r, k);
                let l = self.data[ir] / pivot;
                self.data[ir] = l;
                if l != 0.0 {
                    let (rk, rr) = (self.idx(k, k), self.idx(r, k));
                    for off in 1..=(cend - k) {
                        self.data[rr + off] -= l * self.data[rk + off];
                    }
                }
            }
        }
        Ok(BandLu { m: self, piv })
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    m: BandMatrix,
    piv: Vec<usize>,
}

impl BandLu {
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let m = &self.m;
        let n = m.n;
        let reach = m.kl + m.ku;
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                for r in (k + 1)..=(k + m.kl).min(n - 1) {
                    b[r] -= m.data[m.idx(r, k)] * bk;
                }
            }
        }
        for k in (0..n).rev() {
            let base = m.idx(k, k);
            let mut s = b[k];
            for off in 1..=((k + reach).min(n - 1) - k) {
                s -= m.data[base + off] * b[k + off];
            }
            b[k] = s / m.data[base];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
            a.swap(k, p);
            b.swap(k, p);
            for r in (k + 1)..n {
                let l = a[r][k] / a[k][k];
                for c in k..n {
                    a[r][c] -= l * a[k][c];
                }
                b[r] -= l * b[k];
            }
        }
        for k in (0..n).rev() {
            let s: f64 = ((k + 1)..n).map(|c| a[k][c] * b[c]).sum();
            b[k] = (b[k] - s) / a[k][k];
        }
        b
    }

    #[test]
    fn matches_dense_elimination() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for &(n, kl, ku) in &[(1, 0, 0), (7, 2, 1), (30, 3, 5), (50, 6, 6)] {
            let mut band = BandMatrix::zeros(n, kl, ku);
            let mut dense = vec![vec![0.0; n]; n];
            for r in 0..n {
                for c in r.saturating_sub(kl)..=(r + ku).min(n - 1) {
                    // weak diagonal forces pivoting
                    let v: f64 = rng.gen_range(-1.0..1.0) + if r == c { 0.1 } else { 0.0 };
                    band.add(r, c, v);
                    dense[r][c] = v;
                }
            }
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b = band.mul_vec(&x);
            let want = dense_solve(dense, b.clone());
            let lu = band.factor().unwrap();
            let mut got = b;
            lu.solve_in_place(&mut got);
            for i in 0..n {
                assert!((got[i] - want[i]).abs() < 1e-8 * (1.0 + want[i].abs()), "n={n}");
                assert!((got[i] - x[i]).abs() < 1e-6 * (1.0 + x[i].abs()));
            }
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let band = BandMatrix::zeros(3, 1, 1);
        assert!(band.factor().is_err());
    }
}
