//! Union-of-subspaces constraint sets and their nearest-point projections.
//!
//! Every projection here returns one element of the (possibly non-unique)
//! set of closest model members. Where several members are equally close the
//! choice is fixed: the lowest coordinate, block or row index wins.
//!
//! Signals are flat vectors. Low-rank models vectorise an `m x n` matrix in
//! column-major order; multiband models flatten their `N x F` block matrix
//! row by row, so frequency block `j` occupies entries `j*F .. (j+1)*F`.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{Scalar, SignalVector};

/// Nearest-point projection onto a constraint set.
pub trait Projection<S: Scalar>: Send + Sync {
    fn ambient_dim(&self) -> usize;

    /// Panics if `x` does not have `ambient_dim()` entries.
    fn project(&self, x: &DVector<S>) -> DVector<S>;

    /// Membership with a relative tolerance (only used by the low-rank check).
    fn contains(&self, x: &DVector<S>, tol: f64) -> bool;
}

impl<S: Scalar, P: Projection<S> + ?Sized> Projection<S> for &P {
    fn ambient_dim(&self) -> usize {
        (**self).ambient_dim()
    }

    fn project(&self, x: &DVector<S>) -> DVector<S> {
        (**self).project(x)
    }

    fn contains(&self, x: &DVector<S>, tol: f64) -> bool {
        (**self).contains(x, tol)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelKind {
    KSparse {
        dim: usize,
        order: usize,
    },
    /// Disjoint blocks covering `0..dim`.
    BlockSparse {
        partition: Vec<Vec<usize>>,
        order: usize,
    },
    LowRank {
        rows: usize,
        cols: usize,
        rank: usize,
    },
    /// `blocks` frequency blocks of `grid` samples each, at most `order` active.
    Multiband {
        blocks: usize,
        grid: usize,
        order: usize,
    },
}

/// A validated union-of-subspaces model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnionModel {
    kind: ModelKind,
}

impl UnionModel {
    pub fn k_sparse(dim: usize, order: usize) -> Result<Self> {
        positive("dimension", dim)?;
        if order > dim {
            return Err(Error::InvalidParameter(format!(
                "sparsity {order} exceeds dimension {dim}"
            )));
        }
        Ok(Self {
            kind: ModelKind::KSparse { dim, order },
        })
    }

    pub fn block_sparse(partition: Vec<Vec<usize>>, order: usize) -> Result<Self> {
        validate_partition(&partition)?;
        if order > partition.len() {
            return Err(Error::InvalidParameter(format!(
                "block order {order} exceeds {} blocks",
                partition.len()
            )));
        }
        Ok(Self {
            kind: ModelKind::BlockSparse { partition, order },
        })
    }

    /// Block-sparse model with `blocks` contiguous blocks of length `block_len`.
    pub fn contiguous_blocks(blocks: usize, block_len: usize, order: usize) -> Result<Self> {
        positive("block length", block_len)?;
        let partition = (0..blocks)
            .map(|b| (b * block_len..(b + 1) * block_len).collect())
            .collect();
        Self::block_sparse(partition, order)
    }

    pub fn low_rank(rows: usize, cols: usize, rank: usize) -> Result<Self> {
        positive("rows", rows)?;
        positive("cols", cols)?;
        if rank > rows.min(cols) {
            return Err(Error::InvalidParameter(format!(
                "rank {rank} exceeds min({rows}, {cols})"
            )));
        }
        Ok(Self {
            kind: ModelKind::LowRank { rows, cols, rank },
        })
    }

    pub fn multiband(blocks: usize, grid: usize, order: usize) -> Result<Self> {
        positive("blocks", blocks)?;
        positive("grid length", grid)?;
        if order > blocks {
            return Err(Error::InvalidParameter(format!(
                "active blocks {order} exceeds {blocks} blocks"
            )));
        }
        Ok(Self {
            kind: ModelKind::Multiband {
                blocks,
                grid,
                order,
            },
        })
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            ModelKind::KSparse { dim, .. } => *dim,
            ModelKind::BlockSparse { partition, .. } => partition.iter().map(Vec::len).sum(),
            ModelKind::LowRank { rows, cols, .. } => rows * cols,
            ModelKind::Multiband { blocks, grid, .. } => blocks * grid,
        }
    }

    /// Sparsity, number of active blocks/rows, or rank.
    pub fn order(&self) -> usize {
        match &self.kind {
            ModelKind::KSparse { order, .. }
            | ModelKind::BlockSparse { order, .. }
            | ModelKind::Multiband { order, .. } => *order,
            ModelKind::LowRank { rank, .. } => *rank,
        }
    }

    pub fn name(&self) -> &'static str {
        match &self.kind {
            ModelKind::KSparse { .. } => "k-sparse",
            ModelKind::BlockSparse { .. } => "block-sparse",
            ModelKind::LowRank { .. } => "low-rank",
            ModelKind::Multiband { .. } => "multiband",
        }
    }

    /// Checked projection.
    pub fn try_project<S: Scalar>(&self, x: &DVector<S>) -> Result<DVector<S>> {
        check_dim("model signal", self.dim(), x.len())?;
        Ok(self.project_unchecked(x))
    }

    fn project_unchecked<S: Scalar>(&self, x: &DVector<S>) -> DVector<S> {
        match &self.kind {
            ModelKind::KSparse { order, .. } => keep_top_coordinates(x, *order),
            ModelKind::BlockSparse { partition, order } => keep_top_blocks(x, partition, *order),
            ModelKind::LowRank { rows, cols, rank } => {
                let m = DMatrix::from_column_slice(*rows, *cols, x.as_slice());
                let p = truncate_rank(&m, *rank);
                DVector::from_column_slice(p.as_slice())
            }
            ModelKind::Multiband { grid, order, .. } => keep_top_rows(x, *grid, *order),
        }
    }

    /// Draws a member with exactly the model order and Euclidean norm `norm`.
    /// Order-zero models only contain the zero vector, which is returned as is.
    pub fn sample<S: Scalar, R: Rng + ?Sized>(&self, rng: &mut R, norm: f64) -> Result<SignalVector<S>> {
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sample norm must be finite and > 0, got {norm}"
            )));
        }
        let n = self.dim();
        let mut x = DVector::<S>::zeros(n);
        match &self.kind {
            ModelKind::KSparse { dim, order } => {
                for i in sample_indices(rng, *dim, *order).into_vec() {
                    x[i] = S::sample_normal(rng);
                }
            }
            ModelKind::BlockSparse { partition, order } => {
                for b in sample_indices(rng, partition.len(), *order).into_vec() {
                    for &i in &partition[b] {
                        x[i] = S::sample_normal(rng);
                    }
                }
            }
            ModelKind::Multiband {
                blocks,
                grid,
                order,
            } => {
                for b in sample_indices(rng, *blocks, *order).into_vec() {
                    for i in b * grid..(b + 1) * grid {
                        x[i] = S::sample_normal(rng);
                    }
                }
            }
            ModelKind::LowRank { rows, cols, rank } => {
                let left = DMatrix::<S>::from_fn(*rows, *rank, |_, _| S::sample_normal(rng));
                let right = DMatrix::<S>::from_fn(*rank, *cols, |_, _| S::sample_normal(rng));
                x = DVector::from_column_slice((left * right).as_slice());
            }
        }
        let current = x.norm();
        if current > 0.0 {
            x *= S::from_real(norm / current);
        }
        SignalVector::new(x)
    }
}

impl<S: Scalar> Projection<S> for UnionModel {
    fn ambient_dim(&self) -> usize {
        self.dim()
    }

    fn project(&self, x: &DVector<S>) -> DVector<S> {
        assert_eq!(x.len(), self.dim(), "model signal dimension");
        self.project_unchecked(x)
    }

    fn contains(&self, x: &DVector<S>, tol: f64) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        match &self.kind {
            ModelKind::KSparse { order, .. } => {
                x.iter().filter(|v| !v.is_zero()).count() <= *order
            }
            ModelKind::BlockSparse { partition, order } => {
                partition
                    .iter()
                    .filter(|block| block.iter().any(|&i| !x[i].is_zero()))
                    .count()
                    <= *order
            }
            ModelKind::Multiband { grid, order, .. } => {
                x.as_slice()
                    .chunks(*grid)
                    .filter(|row| row.iter().any(|v| !v.is_zero()))
                    .count()
                    <= *order
            }
            ModelKind::LowRank { rows, cols, rank } => {
                let m = DMatrix::from_column_slice(*rows, *cols, x.as_slice());
                let sv = sorted_singular_values(&m);
                let top = sv.first().copied().unwrap_or(0.0);
                sv.iter().skip(*rank).all(|&s| s <= tol * top)
            }
        }
    }
}

/// Deterministic sample of `model` seeded by `seed`.
pub fn sample_from_model<S: Scalar>(model: &UnionModel, seed: u64, norm: f64) -> Result<SignalVector<S>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    model.sample(&mut rng, norm)
}

/// Keeps the `k` entries of largest modulus.
pub fn project_k_sparse<S: Scalar>(x: &DVector<S>, k: usize) -> Result<DVector<S>> {
    if k > x.len() {
        return Err(Error::InvalidParameter(format!(
            "sparsity {k} exceeds dimension {}",
            x.len()
        )));
    }
    Ok(keep_top_coordinates(x, k))
}

/// Keeps the `k` blocks of largest energy.
pub fn project_block_sparse<S: Scalar>(
    x: &DVector<S>,
    partition: &[Vec<usize>],
    k: usize,
) -> Result<DVector<S>> {
    validate_partition(partition)?;
    let covered: usize = partition.iter().map(Vec::len).sum();
    check_dim("block partition", x.len(), covered)?;
    if k > partition.len() {
        return Err(Error::InvalidParameter(format!(
            "block order {k} exceeds {} blocks",
            partition.len()
        )));
    }
    Ok(keep_top_blocks(x, partition, k))
}

/// Best rank-`r` Frobenius approximation.
pub fn project_low_rank<S: Scalar>(x: &DMatrix<S>, r: usize) -> Result<DMatrix<S>> {
    if r > x.nrows().min(x.ncols()) {
        return Err(Error::InvalidParameter(format!(
            "rank {r} exceeds min({}, {})",
            x.nrows(),
            x.ncols()
        )));
    }
    Ok(truncate_rank(x, r))
}

/// Keeps the `k` rows (frequency blocks) of largest energy of an `N x F`
/// block matrix.
pub fn project_multiband<S: Scalar>(x: &DMatrix<S>, k: usize) -> Result<DMatrix<S>> {
    if k > x.nrows() {
        return Err(Error::InvalidParameter(format!(
            "active blocks {k} exceeds {} blocks",
            x.nrows()
        )));
    }
    let mut out = DMatrix::zeros(x.nrows(), x.ncols());
    let energies: Vec<f64> = x.row_iter().map(|r| r.norm_squared()).collect();
    for i in top_indices(&energies, k) {
        out.set_row(i, &x.row(i));
    }
    Ok(out)
}

/// Row-major flattening of an `N x F` block matrix.
pub fn block_matrix_to_vec<S: Scalar>(x: &DMatrix<S>) -> DVector<S> {
    DVector::from_iterator(x.len(), x.transpose().iter().copied())
}

/// Inverse of [`block_matrix_to_vec`].
pub fn vec_to_block_matrix<S: Scalar>(v: &DVector<S>, blocks: usize, grid: usize) -> Result<DMatrix<S>> {
    check_dim("block matrix", blocks * grid, v.len())?;
    Ok(DMatrix::from_row_slice(blocks, grid, v.as_slice()))
}

/// Singular values in descending order.
pub(crate) fn sorted_singular_values<S: Scalar>(m: &DMatrix<S>) -> Vec<f64> {
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    sv
}

/// Indices of the `k` largest energies, ties to the lowest index.
fn top_indices(energies: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..energies.len()).collect();
    order.sort_by(|&a, &b| {
        energies[b]
            .partial_cmp(&energies[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    order.truncate(k);
    order
}

fn keep_top_coordinates<S: Scalar>(x: &DVector<S>, k: usize) -> DVector<S> {
    let energies: Vec<f64> = x.iter().map(|v| v.modulus_squared()).collect();
    let mut out = DVector::zeros(x.len());
    for i in top_indices(&energies, k) {
        out[i] = x[i];
    }
    out
}

fn keep_top_blocks<S: Scalar>(x: &DVector<S>, partition: &[Vec<usize>], k: usize) -> DVector<S> {
    let energies: Vec<f64> = partition
        .iter()
        .map(|block| block.iter().map(|&i| x[i].modulus_squared()).sum())
        .collect();
    let mut out = DVector::zeros(x.len());
    for b in top_indices(&energies, k) {
        for &i in &partition[b] {
            out[i] = x[i];
        }
    }
    out
}

fn keep_top_rows<S: Scalar>(x: &DVector<S>, grid: usize, k: usize) -> DVector<S> {
    let energies: Vec<f64> = x
        .as_slice()
        .chunks(grid)
        .map(|row| row.iter().map(|v| v.modulus_squared()).sum())
        .collect();
    let mut out = DVector::zeros(x.len());
    for b in top_indices(&energies, k) {
        out.rows_mut(b * grid, grid).copy_from(&x.rows(b * grid, grid));
    }
    out
}

fn truncate_rank<S: Scalar>(x: &DMatrix<S>, r: usize) -> DMatrix<S> {
    let full = x.nrows().min(x.ncols());
    if r == full {
        return x.clone();
    }
    if r == 0 {
        return DMatrix::zeros(x.nrows(), x.ncols());
    }
    let svd = x.clone().svd(true, true);
    let u = svd.u.as_ref().expect("left singular vectors");
    let v_t = svd.v_t.as_ref().expect("right singular vectors");
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].partial_cmp(&sv[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    let mut out = DMatrix::zeros(x.nrows(), x.ncols());
    for &i in order.iter().take(r) {
        out += (u.column(i) * S::from_real(sv[i])) * v_t.row(i);
    }
    out
}

fn validate_partition(partition: &[Vec<usize>]) -> Result<()> {
    let n: usize = partition.iter().map(Vec::len).sum();
    if n == 0 {
        return Err(Error::InvalidParameter("partition is empty".into()));
    }
    let mut seen = vec![false; n];
    for block in partition {
        if block.is_empty() {
            return Err(Error::InvalidParameter("partition has an empty block".into()));
        }
        for &i in block {
            if i >= n {
                return Err(Error::InvalidParameter(format!(
                    "index {i} outside 0..{n}: partition is incomplete"
                )));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidParameter(format!(
                    "index {i} appears in more than one block"
                )));
            }
        }
    }
    Ok(())
}

fn positive(what: &str, v: usize) -> Result<()> {
    if v == 0 {
        Err(Error::InvalidParameter(format!("{what} must be >= 1")))
    } else {
        Ok(())
    }
}
