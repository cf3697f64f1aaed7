//! Banded LU factorization with partial pivoting, in LAPACK-style band
//! storage. The Newton linearizations on a tensor mesh have bandwidth equal
//! to the grid width, so a dense band factorization is the exact direct solve
//! the scheme asks for.

use crate::error::{Error, Result};

/// Band matrix with `kl` subdiagonals and `ku` superdiagonals. Storage has
/// `2*kl + ku + 1` rows per column; the extra `kl` rows absorb fill-in from
/// row swaps during factorization.
pub struct BandMatrix {
    pub n: usize,
    pub kl: usize,
    pub ku: usize,
    ldab: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            ldab,
            data: vec![0.0; ldab * n],
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        // Element (i, j) lives at band row kl + ku + i - j of column j.
        j * self.ldab + (self.kl + self.ku + i - j)
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.n && j < self.n);
        debug_assert!(j + self.kl >= i && i + self.ku >= j, "({i},{j}) outside band");
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.idx(i, j)]
    }

    /// In-place LU factorization with partial pivoting.
    pub fn factor(mut self) -> Result<BandLu> {
        let n = self.n;
        let kl = self.kl;
        let ku = self.ku;
        let mut pivots = vec![0usize; n];
        for j in 0..n {
            let row_max = (j + kl).min(n - 1);
            let mut p = j;
            let mut best = self.data[self.idx(j, j)].abs();
            for i in (j + 1)..=row_max {
                let v = self.data[self.idx(i, j)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            pivots[j] = p;
            if best == 0.0 {
                return Err(Error::SingularSystem(format!("zero pivot at column {j}")));
            }
            let col_max = (j + kl + ku).min(n - 1);
            if p != j {
                for c in j..=col_max {
                    let a = self.idx(j, c);
                    let b = self.idx(p, c);
                    self.data.swap(a, b);
                }
            }
            let piv = self.data[self.idx(j, j)];
            for i in (j + 1)..=row_max {
                let lk = self.idx(i, j);
                let l = self.data[lk] / piv;
                self.data[lk] = l;
                if l != 0.0 {
                    for c in (j + 1)..=col_max {
                        let u = self.data[self.idx(j, c)];
                        if u != 0.0 {
                            let k = self.idx(i, c);
                            self.data[k] -= l * u;
                        }
                    }
                }
            }
        }
        Ok(BandLu {
            mat: self,
            pivots,
        })
    }
}

pub struct BandLu {
    mat: BandMatrix,
    pivots: Vec<usize>,
}

impl BandLu {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.mat.n;
        let kl = self.mat.kl;
        let ku = self.mat.ku;
        let mut x = rhs.to_vec();
        // Forward: apply pivots and L (unit lower, multipliers stored).
        for j in 0..n {
            let p = self.pivots[j];
            if p != j {
                x.swap(j, p);
            }
            let xj = x[j];
            if xj != 0.0 {
                let row_max = (j + kl).min(n - 1);
                for i in (j + 1)..=row_max {
                    x[i] -= self.mat.data[self.mat.idx(i, j)] * xj;
                }
            }
        }
        // Back substitution with U (bandwidth kl + ku after pivoting).
        for j in (0..n).rev() {
            x[j] /= self.mat.data[self.mat.idx(j, j)];
            let xj = x[j];
            if xj != 0.0 {
                let i_min = j.saturating_sub(kl + ku);
                for i in i_min..j {
                    x[i] -= self.mat.data[self.mat.idx(i, j)] * xj;
                }
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn rng_stream(seed: u64) -> impl FnMut() -> f64 {
        let mut state = seed;
        move || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
        }
    }

    #[test]
    fn tridiagonal_poisson() {
        // -u'' = 1 discretized: exact discrete solution known.
        let n = 50;
        let h = 1.0 / (n as f64 + 1.0);
        let mut a = BandMatrix::zeros(n, 1, 1);
        for i in 0..n {
            a.add(i, i, 2.0 / (h * h));
            if i > 0 {
                a.add(i, i - 1, -1.0 / (h * h));
            }
            if i + 1 < n {
                a.add(i, i + 1, -1.0 / (h * h));
            }
        }
        let lu = a.factor().unwrap();
        let x = lu.solve(&vec![1.0; n]);
        for i in 0..n {
            let t = (i as f64 + 1.0) * h;
            let exact = 0.5 * t * (1.0 - t);
            assert!((x[i] - exact).abs() < 1e-12, "{} vs {}", x[i], exact);
        }
    }

    #[test]
    fn matches_dense_solver() {
        let n = 40;
        let (kl, ku) = (7, 5);
        let mut rnd = rng_stream(42);
        let mut band = BandMatrix::zeros(n, kl, ku);
        let mut dense = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if j + kl >= i && i + ku >= j {
                    let v = if i == j { 4.0 + rnd() } else { rnd() };
                    band.add(i, j, v);
                    dense[(i, j)] = v;
                }
            }
        }
        let rhs: Vec<f64> = (0..n).map(|_| rnd()).collect();
        let x = band.factor().unwrap().solve(&rhs);
        let xd = dense
            .lu()
            .solve(&nalgebra::DVector::from_vec(rhs.clone()))
            .unwrap();
        for i in 0..n {
            assert!((x[i] - xd[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn pivoting_handles_small_diagonal() {
        // Leading entry tiny: without pivoting this loses all accuracy.
        let mut a = BandMatrix::zeros(2, 1, 1);
        a.add(0, 0, 1e-18);
        a.add(0, 1, 1.0);
        a.add(1, 0, 1.0);
        a.add(1, 1, 1.0);
        let lu = a.factor().unwrap();
        let x = lu.solve(&[1.0, 2.0]);
        // Solution of [[1e-18,1],[1,1]] x = [1,2] is approximately [1, 1].
        assert!((x[0] - 1.0).abs() < 1e-9);
        assert!((x[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn singular_detected() {
        let mut a = BandMatrix::zeros(3, 1, 1);
        a.add(0, 0, 1.0);
        a.add(1, 1, 0.0);
        a.add(2, 2, 1.0);
        assert!(matches!(a.factor(), Err(Error::SingularSystem(_))));
    }
}
