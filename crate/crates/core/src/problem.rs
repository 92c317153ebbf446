use crate::error::{Error, Result};
use crate::groups::GroupPartition;
use crate::linalg::{axpy, block_spectral_norm, dot, norm2, DesignMatrix, POWER_ITER_MAX, POWER_ITER_TOL};

/// Design matrix, response and the per-column / per-block norms the solver
/// and the screening tests need.
///
/// A second copy of `X` is kept with each group's columns adjacent, so that a
/// pass over the groups reads memory sequentially.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    x: DesignMatrix,
    y: Vec<f64>,
    col_norms: Vec<f64>,
    block_norms: Vec<f64>,
    packed: Vec<f64>,
    // column order of `packed`, and where each group starts in it
    layout: Vec<usize>,
    group_start: Vec<usize>,
}

impl Problem {
    /// Precomputes `‖X_j‖` for every column and `‖X_g‖₂` for every group of
    /// `partition`.
    pub fn new(x: DesignMatrix, y: Vec<f64>, partition: &GroupPartition) -> Result<Self> {
        if y.len() != x.nrows() {
            return Err(Error::DimensionMismatch {
                what: "response length",
                expected: x.nrows(),
                got: y.len(),
            });
        }
        if partition.n_features() != x.ncols() {
            return Err(Error::DimensionMismatch {
                what: "partition size",
                expected: x.ncols(),
                got: partition.n_features(),
            });
        }
        let col_norms = (0..x.ncols()).map(|j| norm2(x.column(j))).collect();
        let block_norms = partition
            .groups()
            .iter()
            .map(|cols| block_spectral_norm(&x, cols, POWER_ITER_TOL, POWER_ITER_MAX))
            .collect();
        let n = x.nrows();
        let layout: Vec<usize> = partition.groups().iter().flatten().copied().collect();
        let mut packed = Vec::with_capacity(n * layout.len());
        for &j in &layout {
            packed.extend_from_slice(x.column(j));
        }
        let mut group_start = Vec::with_capacity(partition.n_groups() + 1);
        group_start.push(0);
        for g in partition.groups() {
            group_start.push(group_start.last().unwrap() + g.len());
        }
        Ok(Self {
            x,
            y,
            col_norms,
            block_norms,
            packed,
            layout,
            group_start,
        })
    }

    #[inline]
    pub fn x(&self) -> &DesignMatrix {
        &self.x
    }

    #[inline]
    pub fn y(&self) -> &[f64] {
        &self.y
    }

    #[inline]
    pub fn n_samples(&self) -> usize {
        self.x.nrows()
    }

    #[inline]
    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    #[inline]
    pub fn col_norm(&self, j: usize) -> f64 {
        self.col_norms[j]
    }

    /// Spectral norm `‖X_g‖₂` of group `g`'s column block.
    #[inline]
    pub fn block_norm(&self, g: usize) -> f64 {
        self.block_norms[g]
    }

    pub fn block_norms(&self) -> &[f64] {
        &self.block_norms
    }

    /// `y − Xβ`
    pub fn residual(&self, beta: &[f64]) -> Vec<f64> {
        let xb = self.x.matvec(beta);
        self.y.iter().zip(&xb).map(|(a, b)| a - b).collect()
    }

    /// Columns of group `g`, stored one after another.
    #[inline]
    pub(crate) fn block(&self, g: usize) -> &[f64] {
        let n = self.n_samples();
        &self.packed[self.group_start[g] * n..self.group_start[g + 1] * n]
    }

    /// True when `partition` has the groups this problem was built with.
    pub(crate) fn matches(&self, partition: &GroupPartition) -> bool {
        partition.n_groups() + 1 == self.group_start.len()
            && partition
                .groups()
                .iter()
                .enumerate()
                .all(|(g, m)| m[..] == self.layout[self.group_start[g]..self.group_start[g + 1]])
    }

    /// `y − Xβ`, walking the packed blocks.
    pub(crate) fn residual_packed(&self, beta: &[f64]) -> Vec<f64> {
        let n = self.n_samples();
        let mut rho = self.y.clone();
        for (k, &j) in self.layout.iter().enumerate() {
            if beta[j] != 0.0 {
                axpy(-beta[j], &self.packed[k * n..(k + 1) * n], &mut rho);
            }
        }
        rho
    }

    /// `Xᵀv`, walking the packed blocks.
    pub(crate) fn tmatvec_packed(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n_samples();
        let mut out = vec![0.0; self.n_features()];
        for (col, &j) in self.packed.chunks_exact(n.max(1)).zip(&self.layout) {
            out[j] = dot(col, v);
        }
        out
    }

    pub(crate) fn check_beta(&self, beta: &[f64]) -> Result<()> {
        if beta.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                what: "coefficient vector length",
                expected: self.n_features(),
                got: beta.len(),
            });
        }
        Ok(())
    }
}
