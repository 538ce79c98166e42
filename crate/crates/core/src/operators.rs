//! Measurement operator families: seeded random ensembles, matrix sensing on
//! vectorised matrices, and block-wise spectral mixing.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{DenseOperator, LinearOperator, Scalar};
use crate::models::{block_matrix_to_vec, vec_to_block_matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnsembleKind {
    Gaussian,
    Rademacher,
}

impl fmt::Display for EnsembleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EnsembleKind::Gaussian => "gaussian",
            EnsembleKind::Rademacher => "rademacher",
        })
    }
}

/// A random dense `rows x cols` matrix, fully determined by its fields.
///
/// Entries have standard deviation (Gaussian) or magnitude (Rademacher)
/// `scale`, which defaults to `1/sqrt(rows)` so that `E‖Φx‖² = ‖x‖²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    pub rows: usize,
    pub cols: usize,
    pub scale: Option<f64>,
    pub seed: u64,
}

impl EnsembleSpec {
    pub fn gaussian(rows: usize, cols: usize, seed: u64) -> Self {
        Self {
            kind: EnsembleKind::Gaussian,
            rows,
            cols,
            scale: None,
            seed,
        }
    }

    pub fn rademacher(rows: usize, cols: usize, seed: u64) -> Self {
        Self {
            kind: EnsembleKind::Rademacher,
            ..Self::gaussian(rows, cols, seed)
        }
    }

    pub fn with_scale(self, scale: f64) -> Self {
        Self {
            scale: Some(scale),
            ..self
        }
    }

    pub fn effective_scale(&self) -> f64 {
        self.scale.unwrap_or(1.0 / (self.rows as f64).sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::InvalidParameter(format!(
                "ensemble dimensions must be >= 1, got {}x{}",
                self.rows, self.cols
            )));
        }
        let scale = self.effective_scale();
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "ensemble scale must be finite and > 0, got {scale}"
            )));
        }
        Ok(())
    }

    pub fn matrix(&self) -> Result<DMatrix<f64>> {
        self.validate()?;
        let scale = self.effective_scale();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let m = match self.kind {
            EnsembleKind::Gaussian => DMatrix::from_fn(self.rows, self.cols, |_, _| {
                scale * rng.sample::<f64, _>(StandardNormal)
            }),
            EnsembleKind::Rademacher => DMatrix::from_fn(self.rows, self.cols, |_, _| {
                if rng.random::<bool>() {
                    scale
                } else {
                    -scale
                }
            }),
        };
        Ok(m)
    }

    pub fn build<S: Scalar>(&self) -> Result<DenseOperator<S>> {
        DenseOperator::from_real(&self.matrix()?)
    }

    /// One-line provenance record, e.g. for result-table headers.
    pub fn describe(&self) -> String {
        format!(
            "kind={} rows={} cols={} scale={:?} seed={}",
            self.kind,
            self.rows,
            self.cols,
            self.effective_scale(),
            self.seed
        )
    }
}

/// Gaussian `m x n` operator with entry variance `1/m`.
pub fn make_gaussian(m: usize, n: usize, seed: u64) -> Result<DenseOperator> {
    EnsembleSpec::gaussian(m, n, seed).build()
}

/// Rademacher `m x n` operator with entries `±1/sqrt(m)`.
pub fn make_rademacher(m: usize, n: usize, seed: u64) -> Result<DenseOperator> {
    EnsembleSpec::rademacher(m, n, seed).build()
}

/// Linear map from `rows x cols` matrices to `R^M`, acting on the
/// column-major vectorisation.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSensingOperator<S: Scalar = f64> {
    rows: usize,
    cols: usize,
    map: DenseOperator<S>,
}

impl<S: Scalar> MatrixSensingOperator<S> {
    pub fn new(rows: usize, cols: usize, map: DenseOperator<S>) -> Result<Self> {
        check_dim("matrix sensing input", rows * cols, map.input_dim())?;
        Ok(Self { rows, cols, map })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn map(&self) -> &DenseOperator<S> {
        &self.map
    }

    pub fn apply_matrix(&self, x: &DMatrix<S>) -> Result<DVector<S>> {
        if x.shape() != (self.rows, self.cols) {
            return Err(Error::InvalidParameter(format!(
                "expected a {}x{} matrix, got {}x{}",
                self.rows,
                self.cols,
                x.nrows(),
                x.ncols()
            )));
        }
        Ok(self.map.apply(&DVector::from_column_slice(x.as_slice())))
    }

    pub fn adjoint_matrix(&self, y: &DVector<S>) -> Result<DMatrix<S>> {
        check_dim("matrix sensing output", self.map.output_dim(), y.len())?;
        let v = self.map.apply_adjoint(y);
        Ok(DMatrix::from_column_slice(self.rows, self.cols, v.as_slice()))
    }
}

impl<S: Scalar> LinearOperator<S> for MatrixSensingOperator<S> {
    fn input_dim(&self) -> usize {
        self.rows * self.cols
    }

    fn output_dim(&self) -> usize {
        self.map.output_dim()
    }

    fn apply(&self, x: &DVector<S>) -> DVector<S> {
        self.map.apply(x)
    }

    fn apply_adjoint(&self, y: &DVector<S>) -> DVector<S> {
        self.map.apply_adjoint(y)
    }
}

/// Gaussian matrix-sensing map with `measurements` outputs.
pub fn make_matrix_sensing(
    rows: usize,
    cols: usize,
    measurements: usize,
    seed: u64,
) -> Result<MatrixSensingOperator> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidParameter("matrix shape must be at least 1x1".into()));
    }
    let map = make_gaussian(measurements, rows * cols, seed)?;
    MatrixSensingOperator::new(rows, cols, map)
}

/// Block-wise spectral mixing.
///
/// The input is an `N x F` block matrix: row `j` holds the `F` grid samples
/// of frequency block `j`. Output block `i` at grid index `f` is
/// `Σ_j Φ[i,j] · X[j,f]`, i.e. `Y = Φ X` column by column. As a
/// [`LinearOperator`] it acts on the row-major flattening of the blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMixingOperator<S: Scalar = f64> {
    mixing: DMatrix<f64>,
    lifted: DMatrix<S>,
    grid: usize,
}

impl<S: Scalar> SpectralMixingOperator<S> {
    pub fn new(mixing: DMatrix<f64>, grid: usize) -> Result<Self> {
        if grid == 0 {
            return Err(Error::InvalidParameter("grid length must be >= 1".into()));
        }
        let lifted = DenseOperator::<S>::from_real(&mixing)?.into_matrix();
        Ok(Self {
            mixing,
            lifted,
            grid,
        })
    }

    pub fn mixing(&self) -> &DMatrix<f64> {
        &self.mixing
    }

    /// Number of input frequency blocks `N`.
    pub fn input_blocks(&self) -> usize {
        self.mixing.ncols()
    }

    /// Number of output blocks `M`.
    pub fn output_blocks(&self) -> usize {
        self.mixing.nrows()
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    fn check_blocks(&self, x: &DMatrix<S>, rows: usize) -> Result<()> {
        if x.shape() != (rows, self.grid) {
            return Err(Error::InvalidParameter(format!(
                "expected a {}x{} block matrix, got {}x{}",
                rows,
                self.grid,
                x.nrows(),
                x.ncols()
            )));
        }
        Ok(())
    }

    pub fn forward_blocks(&self, x: &DMatrix<S>) -> Result<DMatrix<S>> {
        self.check_blocks(x, self.input_blocks())?;
        Ok(&self.lifted * x)
    }

    pub fn adjoint_blocks(&self, y: &DMatrix<S>) -> Result<DMatrix<S>> {
        self.check_blocks(y, self.output_blocks())?;
        Ok(self.lifted.ad_mul(y))
    }
}

impl<S: Scalar> LinearOperator<S> for SpectralMixingOperator<S> {
    fn input_dim(&self) -> usize {
        self.input_blocks() * self.grid
    }

    fn output_dim(&self) -> usize {
        self.output_blocks() * self.grid
    }

    fn apply(&self, x: &DVector<S>) -> DVector<S> {
        let blocks = vec_to_block_matrix(x, self.input_blocks(), self.grid).expect("input size");
        block_matrix_to_vec(&(&self.lifted * blocks))
    }

    fn apply_adjoint(&self, y: &DVector<S>) -> DVector<S> {
        let blocks = vec_to_block_matrix(y, self.output_blocks(), self.grid).expect("output size");
        block_matrix_to_vec(&self.lifted.ad_mul(&blocks))
    }
}

/// `Y = Φ X` for an `N x F` block matrix.
pub fn spectral_mixing_forward<S: Scalar>(
    op: &SpectralMixingOperator<S>,
    x: &DMatrix<S>,
) -> Result<DMatrix<S>> {
    op.forward_blocks(x)
}

/// Both sides of the stacking identity
/// `‖Y1 − Y2‖² = Σ_f ‖Φ(x1(f) − x2(f))‖²`.
///
/// The left side is the squared norm of the difference of the two mixed
/// block matrices; the right side mixes each grid column separately.
pub fn stacking_norm_identity_check<S: Scalar>(
    op: &SpectralMixingOperator<S>,
    x1: &DMatrix<S>,
    x2: &DMatrix<S>,
) -> Result<(f64, f64)> {
    let y1 = op.forward_blocks(x1)?;
    let y2 = op.forward_blocks(x2)?;
    let lhs = (y1 - y2).norm_squared();
    let rhs = (0..op.grid())
        .map(|f| {
            let diff = x1.column(f) - x2.column(f);
            (&op.lifted * diff).norm_squared()
        })
        .sum();
    Ok((lhs, rhs))
}
