//! Dense column-major storage and the handful of BLAS-1 style kernels the
//! solver needs.

use crate::error::{Error, Result};

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // independent lanes so the compiler can vectorize the reduction
    let mut acc = [0.0; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (xa, xb) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += xa[k] * xb[k];
        }
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// Error-free `a·b = p + e` (Dekker), without relying on a hardware fma.
#[inline]
fn two_product(a: f64, b: f64) -> (f64, f64) {
    const SPLIT: f64 = 134_217_729.0; // 2^27 + 1
    let split = |v: f64| {
        let c = SPLIT * v;
        let hi = c - (c - v);
        (hi, v - hi)
    };
    let p = a * b;
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    (p, ((ah * bh - p) + ah * bl + al * bh) + al * bl)
}

/// Error-free `a + b = s + e` (Knuth).
#[inline]
pub(crate) fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let z = s - a;
    (s, (a - (s - z)) + (b - z))
}

/// Dot product accumulated as if in twice the working precision and rounded
/// once (the compensated Dot2 scheme).
pub fn dot_accurate(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let (mut s, mut c) = (0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (p, pe) = two_product(x, y);
        let (t, se) = two_sum(s, p);
        s = t;
        c += pe + se;
    }
    s + c
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn norm1(a: &[f64]) -> f64 {
    a.iter().map(|v| v.abs()).sum()
}

#[inline]
pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Dense matrix stored column by column, so that `column(j)` is a contiguous
/// slice of length `nrows`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl DesignMatrix {
    pub fn from_col_major(nrows: usize, ncols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != nrows * ncols {
            return Err(Error::DimensionMismatch {
                what: "matrix buffer length",
                expected: nrows * ncols,
                got: data.len(),
            });
        }
        Ok(Self { nrows, ncols, data })
    }

    pub fn from_row_major(nrows: usize, ncols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != nrows * ncols {
            return Err(Error::DimensionMismatch {
                what: "matrix buffer length",
                expected: nrows * ncols,
                got: data.len(),
            });
        }
        let mut col_major = vec![0.0; data.len()];
        for i in 0..nrows {
            for j in 0..ncols {
                col_major[j * nrows + i] = data[i * ncols + j];
            }
        }
        Ok(Self {
            nrows,
            ncols,
            data: col_major,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut flat = Vec::with_capacity(nrows * ncols);
        for row in rows {
            if row.len() != ncols {
                return Err(Error::DimensionMismatch {
                    what: "row length",
                    expected: ncols,
                    got: row.len(),
                });
            }
            flat.extend_from_slice(row);
        }
        Self::from_row_major(nrows, ncols, &flat)
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    #[inline]
    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.nrows + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.nrows + i] = v;
    }

    pub fn as_col_major(&self) -> &[f64] {
        &self.data
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.data.len()];
        for j in 0..self.ncols {
            for (i, v) in self.column(j).iter().enumerate() {
                out[i * self.ncols + j] = *v;
            }
        }
        out
    }

    /// `X β`
    pub fn matvec(&self, beta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.nrows];
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                axpy(b, self.column(j), &mut out);
            }
        }
        out
    }

    /// `Xᵀ v`
    pub fn tmatvec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.ncols).map(|j| dot(self.column(j), v)).collect()
    }

    /// Stacks `other` below `self`; both must have the same number of columns.
    pub fn vstack(&self, other: &DesignMatrix) -> Result<Self> {
        if self.ncols != other.ncols {
            return Err(Error::DimensionMismatch {
                what: "vstack column count",
                expected: self.ncols,
                got: other.ncols,
            });
        }
        let nrows = self.nrows + other.nrows;
        let mut data = Vec::with_capacity(nrows * self.ncols);
        for j in 0..self.ncols {
            data.extend_from_slice(self.column(j));
            data.extend_from_slice(other.column(j));
        }
        Ok(Self {
            nrows,
            ncols: self.ncols,
            data,
        })
    }
}

pub const POWER_ITER_TOL: f64 = 1e-10;
pub const POWER_ITER_MAX: usize = 1000;

/// Spectral norm of the column block `cols` of `x`, by power iteration on the
/// small Gram matrix `X_gᵀ X_g`.
///
/// The start vector is the all-ones vector (deterministic). Iteration stops
/// once the Rayleigh quotient changes by less than `tol` relative.
pub fn block_spectral_norm(x: &DesignMatrix, cols: &[usize], tol: f64, max_iter: usize) -> f64 {
    let k = cols.len();
    if k == 0 {
        return 0.0;
    }
    if k == 1 {
        return norm2(x.column(cols[0]));
    }
    let mut gram = vec![0.0; k * k];
    for a in 0..k {
        for b in a..k {
            let v = dot(x.column(cols[a]), x.column(cols[b]));
            gram[a * k + b] = v;
            gram[b * k + a] = v;
        }
    }
    let trace: f64 = (0..k).map(|a| gram[a * k + a]).sum();
    if trace == 0.0 {
        return 0.0;
    }

    let mut v = vec![1.0 / (k as f64).sqrt(); k];
    let mut w = vec![0.0; k];
    let mut eig = 0.0;
    for _ in 0..max_iter {
        for a in 0..k {
            w[a] = dot(&gram[a * k..(a + 1) * k], &v);
        }
        let new_eig = dot(&w, &v);
        let nw = norm2(&w);
        if nw == 0.0 {
            // start vector orthogonal to the range; fall back to a coordinate
            // vector of the largest diagonal entry
            let best = (0..k)
                .max_by(|&a, &b| gram[a * k + a].total_cmp(&gram[b * k + b]))
                .unwrap_or(0);
            v.iter_mut().for_each(|e| *e = 0.0);
            v[best] = 1.0;
            continue;
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / nw;
        }
        let done = (new_eig - eig).abs() <= tol * new_eig.abs();
        eig = new_eig;
        if done {
            break;
        }
    }
    // one more Rayleigh quotient at the converged vector
    for a in 0..k {
        w[a] = dot(&gram[a * k..(a + 1) * k], &v);
    }
    dot(&w, &v).max(eig).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accurate_dot_survives_cancellation() {
        // 1e16 + 1 − 1e16 in plain arithmetic loses the 1
        let a = [1e16, 1.0, -1e16, 3.0];
        let b = [1.0, 1.0, 1.0, 1e-17];
        assert_eq!(dot_accurate(&a, &b), 1.0 + 3e-17);
        let x = [0.1, 0.2, 0.3];
        let y = [3.0, -1.5, 1.0 / 3.0];
        // exact value of the rounded inputs, rounded once
        assert_eq!(dot_accurate(&x, &y), 0.09999999999999999);
    }

    #[test]
    fn row_and_col_major_agree() {
        let m = DesignMatrix::from_row_major(2, 3, &[1., 2., 3., 4., 5., 6.]).unwrap();
        assert_eq!(m.column(1), &[2., 5.]);
        assert_eq!(m.to_row_major(), vec![1., 2., 3., 4., 5., 6.]);
        assert_eq!(m.matvec(&[1., 0., 1.]), vec![4., 10.]);
        assert_eq!(m.tmatvec(&[1., 1.]), vec![5., 7., 9.]);
    }

    #[test]
    fn spectral_norm_of_diagonal_block() {
        let mut m = DesignMatrix::zeros(3, 3);
        m.set(0, 0, 1.0);
        m.set(1, 1, 3.0);
        m.set(2, 2, 2.0);
        let s = block_spectral_norm(&m, &[0, 1, 2], POWER_ITER_TOL, POWER_ITER_MAX);
        assert!((s - 3.0).abs() < 1e-8);
    }

    #[test]
    fn spectral_norm_zero_block() {
        let m = DesignMatrix::zeros(4, 2);
        assert_eq!(block_spectral_norm(&m, &[0, 1], 1e-10, 100), 0.0);
    }
}
