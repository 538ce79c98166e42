//! Vectors, the measurement-operator contract and shared numerical helpers.
//!
//! Everything downstream is generic over [`Scalar`], implemented for `f64`
//! and `Complex<f64>`. Only real parts of inner products are exposed; the
//! full Hermitian product stays internal.

use std::fmt;
use std::io::{BufRead, Write};
use std::ops::Deref;

use nalgebra::{ComplexField, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};

/// Seed of the start vector used by [`operator_norm_sq`].
const POWER_ITERATION_SEED: u64 = 0x5eed_0f_90e7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Field {
    Real,
    Complex,
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Field::Real => f.write_str("real"),
            Field::Complex => f.write_str("complex"),
        }
    }
}

/// Scalar field of signals and operators.
pub trait Scalar: ComplexField<RealField = f64> + Copy + Send + Sync + 'static {
    const FIELD: Field;

    /// A standard normal draw; complex draws have `E|z|² = 1`.
    fn sample_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Builds a scalar from real and imaginary parts. Real scalars reject a
    /// nonzero imaginary part.
    fn from_parts(re: f64, im: f64) -> Option<Self>;

    fn to_parts(self) -> (f64, f64);
}

impl Scalar for f64 {
    const FIELD: Field = Field::Real;

    fn sample_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }

    fn from_parts(re: f64, im: f64) -> Option<Self> {
        (im == 0.0).then_some(re)
    }

    fn to_parts(self) -> (f64, f64) {
        (self, 0.0)
    }
}

impl Scalar for nalgebra::Complex<f64> {
    const FIELD: Field = Field::Complex;

    fn sample_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        nalgebra::Complex::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    }

    fn from_parts(re: f64, im: f64) -> Option<Self> {
        Some(nalgebra::Complex::new(re, im))
    }

    fn to_parts(self) -> (f64, f64) {
        (self.re, self.im)
    }
}

fn check_finite<S: Scalar>(entries: &[S]) -> Result<()> {
    match entries.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFinite(i)),
        None => Ok(()),
    }
}

macro_rules! coordinate_vector {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name<S: Scalar = f64>(DVector<S>);

        impl<S: Scalar> $name<S> {
            /// Wraps `entries`, rejecting empty or non-finite input.
            pub fn new(entries: DVector<S>) -> Result<Self> {
                if entries.is_empty() {
                    return Err(Error::InvalidParameter(
                        concat!(stringify!($name), " needs dimension >= 1").into(),
                    ));
                }
                check_finite(entries.as_slice())?;
                Ok(Self(entries))
            }

            pub fn from_vec(entries: Vec<S>) -> Result<Self> {
                Self::new(DVector::from_vec(entries))
            }

            /// Zero vector of dimension `dim` (must be >= 1).
            pub fn zeros(dim: usize) -> Result<Self> {
                Self::new(DVector::zeros(dim))
            }

            pub fn dim(&self) -> usize {
                self.0.len()
            }

            pub fn norm_sq(&self) -> f64 {
                self.0.norm_squared()
            }

            pub fn as_vector(&self) -> &DVector<S> {
                &self.0
            }

            pub fn into_inner(self) -> DVector<S> {
                self.0
            }
        }

        impl<S: Scalar> Deref for $name<S> {
            type Target = DVector<S>;

            fn deref(&self) -> &DVector<S> {
                &self.0
            }
        }
    };
}

coordinate_vector!(
    /// Coordinates of a signal `x` in a fixed orthonormal basis.
    SignalVector
);
coordinate_vector!(
    /// Measurements `y = Φx + e`.
    MeasurementVector
);

/// A linear measurement map `Φ: H -> L` with its adjoint.
///
/// `apply` and `apply_adjoint` assume correctly sized input and panic
/// otherwise; `forward` and `adjoint` check dimensions and finiteness.
pub trait LinearOperator<S: Scalar>: Send + Sync {
    fn input_dim(&self) -> usize;

    fn output_dim(&self) -> usize;

    fn apply(&self, x: &DVector<S>) -> DVector<S>;

    fn apply_adjoint(&self, y: &DVector<S>) -> DVector<S>;

    fn field(&self) -> Field {
        S::FIELD
    }

    fn forward(&self, x: &SignalVector<S>) -> Result<MeasurementVector<S>> {
        check_dim("operator input", self.input_dim(), x.dim())?;
        MeasurementVector::new(self.apply(x))
    }

    fn adjoint(&self, y: &MeasurementVector<S>) -> Result<SignalVector<S>> {
        check_dim("operator output", self.output_dim(), y.dim())?;
        SignalVector::new(self.apply_adjoint(y))
    }

    /// Explicit matrix, one forward application per basis vector. Feed the
    /// result to [`write_dense_matrix`] to serialise any operator.
    fn dense_matrix(&self) -> DMatrix<S> {
        let n = self.input_dim();
        let mut out = DMatrix::zeros(self.output_dim(), n);
        for j in 0..n {
            let mut e = DVector::zeros(n);
            e[j] = S::one();
            out.set_column(j, &self.apply(&e));
        }
        out
    }
}

impl<S: Scalar, T: LinearOperator<S> + ?Sized> LinearOperator<S> for &T {
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }

    fn output_dim(&self) -> usize {
        (**self).output_dim()
    }

    fn apply(&self, x: &DVector<S>) -> DVector<S> {
        (**self).apply(x)
    }

    fn apply_adjoint(&self, y: &DVector<S>) -> DVector<S> {
        (**self).apply_adjoint(y)
    }
}

impl<S: Scalar, T: LinearOperator<S> + ?Sized> LinearOperator<S> for Box<T> {
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }

    fn output_dim(&self) -> usize {
        (**self).output_dim()
    }

    fn apply(&self, x: &DVector<S>) -> DVector<S> {
        (**self).apply(x)
    }

    fn apply_adjoint(&self, y: &DVector<S>) -> DVector<S> {
        (**self).apply_adjoint(y)
    }
}

/// Dense `M x N` matrix operator; the adjoint is the conjugate transpose.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator<S: Scalar = f64> {
    matrix: DMatrix<S>,
}

impl<S: Scalar> DenseOperator<S> {
    pub fn new(matrix: DMatrix<S>) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(Error::InvalidParameter(
                "operator matrix must be at least 1x1".into(),
            ));
        }
        check_finite(matrix.as_slice())?;
        Ok(Self { matrix })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new(DMatrix::identity(n, n))
    }

    /// Lifts a real matrix into this scalar field.
    pub fn from_real(matrix: &DMatrix<f64>) -> Result<Self> {
        Self::new(matrix.map(S::from_real))
    }

    pub fn matrix(&self) -> &DMatrix<S> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<S> {
        self.matrix
    }
}

impl<S: Scalar> LinearOperator<S> for DenseOperator<S> {
    fn input_dim(&self) -> usize {
        self.matrix.ncols()
    }

    fn output_dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn apply(&self, x: &DVector<S>) -> DVector<S> {
        &self.matrix * x
    }

    fn apply_adjoint(&self, y: &DVector<S>) -> DVector<S> {
        self.matrix.ad_mul(y)
    }
}

/// `Re⟨a, b⟩`.
pub fn real_inner<S: Scalar>(a: &DVector<S>, b: &DVector<S>) -> Result<f64> {
    check_dim("inner product", a.len(), b.len())?;
    Ok(a.dotc(b).real())
}

/// Result of power iteration on `Φ*Φ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerEstimate {
    /// Rayleigh quotient `‖Φv‖²` of the final unit iterate; never exceeds
    /// the true largest squared singular value.
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Estimates `‖Φ‖²` by power iteration on `Φ*Φ`, stopping once successive
/// Rayleigh quotients agree to relative `tol`.
pub fn operator_norm_sq<S, Op>(op: &Op, tol: f64, max_iters: usize) -> Result<PowerEstimate>
where
    S: Scalar,
    Op: LinearOperator<S> + ?Sized,
{
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "power iteration tolerance must be > 0, got {tol}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(POWER_ITERATION_SEED);
    let mut v = DVector::<S>::from_fn(op.input_dim(), |_, _| S::sample_normal(&mut rng));
    v.unscale_mut(v.norm());

    let mut best = 0.0_f64;
    let mut previous = f64::NAN;
    for iteration in 1..=max_iters {
        let w = op.apply(&v);
        let rayleigh = w.norm_squared();
        best = best.max(rayleigh);
        if rayleigh == 0.0 {
            // zero operator, or a start vector in the null space
            return Ok(PowerEstimate {
                value: 0.0,
                iterations: iteration,
                converged: true,
            });
        }
        if (rayleigh - previous).abs() <= tol * rayleigh {
            return Ok(PowerEstimate {
                value: best,
                iterations: iteration,
                converged: true,
            });
        }
        previous = rayleigh;
        let z = op.apply_adjoint(&w);
        let z_norm = z.norm();
        v = z.unscale(z_norm);
    }
    Ok(PowerEstimate {
        value: best,
        iterations: max_iters,
        converged: false,
    })
}

/// `(y − Φx, ‖y − Φx‖)`.
pub fn residual<S, Op>(
    op: &Op,
    x: &SignalVector<S>,
    y: &MeasurementVector<S>,
) -> Result<(MeasurementVector<S>, f64)>
where
    S: Scalar,
    Op: LinearOperator<S> + ?Sized,
{
    check_dim("operator output", op.output_dim(), y.dim())?;
    let fitted = op.forward(x)?;
    let r = y.as_vector() - fitted.as_vector();
    let norm = r.norm();
    Ok((MeasurementVector::new(r)?, norm))
}

/// Parses a dense matrix from delimiter-separated text: one row per line,
/// separated by commas, semicolons or whitespace. Complex matrices store
/// each entry as two adjacent columns `re im`. Blank lines and lines
/// starting with `#` are skipped.
pub fn read_dense_matrix<S: Scalar, R: BufRead>(reader: R) -> Result<DMatrix<S>> {
    let width = match S::FIELD {
        Field::Real => 1,
        Field::Complex => 2,
    };
    let mut rows: Vec<Vec<S>> = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line_no = index + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut values = Vec::new();
        for token in trimmed
            .split(|c: char| c == ',' || c == ';' || c.is_whitespace())
            .filter(|t| !t.is_empty())
        {
            let v: f64 = token.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("not a number: {token:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("non-finite value {token:?}"),
                });
            }
            values.push(v);
        }
        if values.len() % width != 0 {
            return Err(Error::Parse {
                line: line_no,
                message: format!(
                    "complex rows need an even number of columns, found {}",
                    values.len()
                ),
            });
        }
        let row: Vec<S> = values
            .chunks(width)
            .map(|c| S::from_parts(c[0], c.get(1).copied().unwrap_or(0.0)).expect("real parts"))
            .collect();
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected {} entries, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() || rows[0].is_empty() {
        return Err(Error::Parse {
            line: 0,
            message: "matrix is empty".into(),
        });
    }
    let (m, n) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_fn(m, n, |i, j| rows[i][j]))
}

pub fn parse_dense_matrix<S: Scalar>(text: &str) -> Result<DMatrix<S>> {
    read_dense_matrix(text.as_bytes())
}

/// Writes `matrix` in the format read by [`read_dense_matrix`], comma
/// separated, with shortest round-trip float formatting.
pub fn write_dense_matrix<S: Scalar, W: Write>(mut writer: W, matrix: &DMatrix<S>) -> Result<()> {
    for i in 0..matrix.nrows() {
        let mut fields = Vec::with_capacity(matrix.ncols() * 2);
        for j in 0..matrix.ncols() {
            let (re, im) = matrix[(i, j)].to_parts();
            fields.push(format!("{re:?}"));
            if S::FIELD == Field::Complex {
                fields.push(format!("{im:?}"));
            }
        }
        writeln!(writer, "{}", fields.join(","))?;
    }
    Ok(())
}
