//! Dense linear algebra over `F_p`: row reduction, rank, kernels and
//! solving. Vectors are plain `Vec<u64>` with entries in `[0, p)`.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("system has no solution")]
    Inconsistent,
}

fn inv_mod(a: u64, p: u64) -> u64 {
    debug_assert!(!a.is_multiple_of(p));
    let mut acc = 1u64;
    let mut base = a % p;
    let mut e = p - 2;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * base % p;
        }
        base = base * base % p;
        e >>= 1;
    }
    acc
}

pub fn reduce_vec(v: &[i64], p: u64) -> Vec<u64> {
    v.iter().map(|&x| x.rem_euclid(p as i64) as u64).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FpMatrix {
    p: u64,
    rows: usize,
    cols: usize,
    data: Vec<u64>,
}

impl FpMatrix {
    pub fn zeros(p: u64, rows: usize, cols: usize) -> Self {
        FpMatrix {
            p,
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn from_rows(p: u64, cols: usize, rows: &[Vec<u64>]) -> Self {
        let mut m = Self::zeros(p, rows.len(), cols);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), cols, "ragged row {i}");
            for (j, &x) in r.iter().enumerate() {
                m.set(i, j, x);
            }
        }
        m
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(p: u64, dim: usize, cols: &[Vec<u64>]) -> Self {
        let mut m = Self::zeros(p, dim, cols.len());
        for (j, c) in cols.iter().enumerate() {
            assert_eq!(c.len(), dim, "column {j} has wrong length");
            for (i, &x) in c.iter().enumerate() {
                m.set(i, j, x);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: u64) {
        self.data[i * self.cols + j] = v % self.p;
    }

    pub fn push_row(&mut self, row: &[u64]) {
        assert_eq!(row.len(), self.cols);
        self.data.extend(row.iter().map(|x| x % self.p));
        self.rows += 1;
    }

    pub fn mul_vec(&self, v: &[u64]) -> Vec<u64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                (0..self.cols).fold(0u64, |acc, j| (acc + self.get(i, j) * v[j]) % self.p)
            })
            .collect()
    }

    /// Reduced row echelon form in place; returns pivot columns.
    pub fn rref(&mut self) -> Vec<usize> {
        let p = self.p;
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..self.cols {
            if r == self.rows {
                break;
            }
            let Some(piv) = (r..self.rows).find(|&i| self.get(i, c) != 0) else {
                continue;
            };
            if piv != r {
                for j in 0..self.cols {
                    self.data.swap(piv * self.cols + j, r * self.cols + j);
                }
            }
            let inv = inv_mod(self.get(r, c), p);
            for j in 0..self.cols {
                let v = self.get(r, j) * inv % p;
                self.set(r, j, v);
            }
            for i in 0..self.rows {
                if i == r {
                    continue;
                }
                let f = self.get(i, c);
                if f == 0 {
                    continue;
                }
                for j in 0..self.cols {
                    let v = (self.get(i, j) + p * p - f * self.get(r, j)) % p;
                    self.set(i, j, v);
                }
            }
            pivots.push(c);
            r += 1;
        }
        pivots
    }

    pub fn rank(&self) -> usize {
        self.clone().rref().len()
    }

    /// Basis of `{x : self * x = 0}`, in canonical (free-variable) order.
    pub fn kernel(&self) -> Vec<Vec<u64>> {
        let p = self.p;
        let mut m = self.clone();
        let pivots = m.rref();
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        free.iter()
            .map(|&f| {
                let mut v = vec![0u64; self.cols];
                v[f] = 1;
                for (r, &pc) in pivots.iter().enumerate() {
                    v[pc] = (p - m.get(r, f)) % p;
                }
                v
            })
            .collect()
    }

    /// Some `x` with `self * x = b`.
    pub fn solve(&self, b: &[u64]) -> Result<Vec<u64>, LinalgError> {
        if b.len() != self.rows {
            return Err(LinalgError::Dimension {
                expected: self.rows,
                got: b.len(),
            });
        }
        let mut aug = FpMatrix::zeros(self.p, self.rows, self.cols + 1);
        for (i, &bi) in b.iter().enumerate() {
            for j in 0..self.cols {
                aug.set(i, j, self.get(i, j));
            }
            aug.set(i, self.cols, bi);
        }
        let pivots = aug.rref();
        if pivots.last() == Some(&self.cols) {
            return Err(LinalgError::Inconsistent);
        }
        let mut x = vec![0u64; self.cols];
        for (r, &pc) in pivots.iter().enumerate() {
            x[pc] = aug.get(r, self.cols);
        }
        Ok(x)
    }
}

/// Dimension of the span of `vectors` in `F_p^dim`.
pub fn span_rank(p: u64, dim: usize, vectors: &[Vec<u64>]) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    FpMatrix::from_rows(p, dim, vectors).rank()
}

pub fn in_span(p: u64, dim: usize, basis: &[Vec<u64>], v: &[u64]) -> bool {
    if basis.is_empty() {
        return v.iter().all(|&x| x % p == 0);
    }
    FpMatrix::from_columns(p, dim, basis).solve(v).is_ok()
}

pub fn add_scaled(p: u64, acc: &mut [u64], v: &[u64], scale: u64) {
    for (a, &x) in acc.iter_mut().zip(v) {
        *a = (*a + x % p * (scale % p)) % p;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_and_kernel() {
        let m = FpMatrix::from_rows(5, 3, &[vec![1, 2, 3], vec![0, 1, 4]]);
        assert_eq!(m.rank(), 2);
        let k = m.kernel();
        assert_eq!(k.len(), 1);
        assert_eq!(m.mul_vec(&k[0]), vec![0, 0]);
    }

    #[test]
    fn solve_consistent_and_inconsistent() {
        let m = FpMatrix::from_rows(7, 2, &[vec![1, 1], vec![2, 2]]);
        let x = m.solve(&[3, 6]).unwrap();
        assert_eq!(m.mul_vec(&x), vec![3, 6]);
        assert_eq!(m.solve(&[3, 5]), Err(LinalgError::Inconsistent));
    }

    #[test]
    fn span_membership() {
        let basis = vec![vec![1, 0, 0], vec![0, 1, 1]];
        assert!(in_span(5, 3, &basis, &[2, 3, 3]));
        assert!(!in_span(5, 3, &basis, &[0, 1, 2]));
        assert!(in_span(5, 3, &[], &[0, 0, 0]));
        assert_eq!(span_rank(5, 3, &basis), 2);
    }
}
