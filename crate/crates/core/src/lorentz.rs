//! The orthochronous Lorentz group `O₊(1,n)` in block form
//!
//! ```text
//!     τ = | a  uᵀ |
//!         | v  A  |
//! ```
//!
//! with `a ∈ ℝ`, `u, v ∈ ℝⁿ`, `A ∈ ℝⁿˣⁿ`, together with the two block
//! embeddings into the isometry groups of de Sitter (`O(1,n+1)`) and
//! anti-de Sitter (`O(2,n)`) space.

use std::fmt;
use std::ops::Mul;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tolerance used by [`lorentz_check`] callers that have no better idea.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// Signature of a flat ambient space: `minus` negative directions followed by
/// `plus` positive ones. Time components always come first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MetricSignature {
    minus: usize,
    plus: usize,
}

impl MetricSignature {
    /// A Lorentzian or split signature with at least one sign of each kind.
    pub fn new(minus: usize, plus: usize) -> Result<Self> {
        if minus == 0 || plus == 0 {
            return Err(Error::InvalidSignature { minus, plus });
        }
        Ok(Self { minus, plus })
    }

    /// `ℝ^{1,n}`
    pub fn minkowski(n: usize) -> Self {
        Self { minus: 1, plus: n }
    }

    /// `ℝ^{1,n+1}`, the ambient space of `dS_{n+1}`.
    pub fn de_sitter(n: usize) -> Self {
        Self {
            minus: 1,
            plus: n + 1,
        }
    }

    /// `ℝ^{2,n}`, the ambient space of `AdS_{n+1}`.
    pub fn anti_de_sitter(n: usize) -> Self {
        Self { minus: 2, plus: n }
    }

    /// Plain Euclidean `ℝⁿ`; used for pullbacks of sphere- and plane-valued charts.
    pub fn euclidean(n: usize) -> Self {
        Self { minus: 0, plus: n }
    }

    pub fn minus(&self) -> usize {
        self.minus
    }

    pub fn plus(&self) -> usize {
        self.plus
    }

    pub fn dim(&self) -> usize {
        self.minus + self.plus
    }

    /// Diagonal entries of the bilinear form.
    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![-1.0; self.minus];
        d.resize(self.dim(), 1.0);
        d
    }
}

/// `-Σ_{i<p} xᵢyᵢ + Σ_{i≥p} xᵢyᵢ`
pub fn minkowski_inner(x: &[f64], y: &[f64], sig: MetricSignature) -> Result<f64> {
    if x.len() != sig.dim() || y.len() != sig.dim() {
        return Err(Error::DimensionMismatch {
            expected: sig.dim(),
            found: if x.len() != sig.dim() {
                x.len()
            } else {
                y.len()
            },
        });
    }
    Ok(inner_unchecked(x, y, sig.minus))
}

pub(crate) fn inner_unchecked(x: &[f64], y: &[f64], minus: usize) -> f64 {
    let time: f64 = x[..minus].iter().zip(&y[..minus]).map(|(a, b)| a * b).sum();
    let space: f64 = x[minus..].iter().zip(&y[minus..]).map(|(a, b)| a * b).sum();
    space - time
}

/// Residuals of the block conditions
///
/// ```text
///   a² − ‖v‖² = 1,   Aᵀv − a·u = 0,   AᵀA − uuᵀ = Iₙ,   a > 0
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidityReport {
    /// `|a² − ‖v‖² − 1|`
    pub residual_scalar: f64,
    /// `max |Aᵀv − a·u|`
    pub residual_mixed: f64,
    /// `max |AᵀA − uuᵀ − I|`
    pub residual_block: f64,
    /// `max |Mᵀ η M − η|`, computed independently of the block residuals.
    pub residual_global: f64,
    pub orthochronous: bool,
    /// Sign of the determinant. Space-orientation reversing maps are accepted.
    pub det_sign: i8,
    pub tolerance: f64,
    pub pass: bool,
}

impl ValidityReport {
    /// Largest of the three block residuals.
    pub fn max_residual(&self) -> f64 {
        self.residual_scalar
            .max(self.residual_mixed)
            .max(self.residual_block)
    }
}

/// Validates a square matrix against the orthochronous Lorentz conditions.
pub fn lorentz_check(m: &DMatrix<f64>, tol: f64) -> Result<ValidityReport> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.nrows() < 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: m.nrows(),
        });
    }
    let n = m.nrows() - 1;
    let a = m[(0, 0)];
    let u = m.view((0, 1), (1, n)).transpose();
    let v = m.view((1, 0), (n, 1)).into_owned();
    let big_a = m.view((1, 1), (n, n)).into_owned();

    let residual_scalar = (a * a - v.norm_squared() - 1.0).abs();
    let mixed = big_a.transpose() * &v - &u * a;
    let residual_mixed = mixed.amax();
    let block = big_a.transpose() * &big_a - &u * u.transpose() - DMatrix::identity(n, n);
    let residual_block = block.amax();

    let eta = eta(n);
    let residual_global = (m.transpose() * &eta * m - &eta).amax();

    let det = m.determinant();
    let orthochronous = a > 0.0;
    let pass =
        orthochronous && residual_scalar <= tol && residual_mixed <= tol && residual_block <= tol;
    Ok(ValidityReport {
        residual_scalar,
        residual_mixed,
        residual_block,
        residual_global,
        orthochronous,
        det_sign: if det < 0.0 { -1 } else { 1 },
        tolerance: tol,
        pass,
    })
}

/// `η = diag(−1, Iₙ)`
pub fn eta(n: usize) -> DMatrix<f64> {
    let mut e = DMatrix::identity(n + 1, n + 1);
    e[(0, 0)] = -1.0;
    e
}

/// An element of `O₊(1,n)`, stored as a dense `(n+1)×(n+1)` matrix.
///
/// Constructors validate; the raw matrix is reachable through
/// [`LorentzMap::matrix`].
#[derive(Clone, PartialEq)]
pub struct LorentzMap {
    m: DMatrix<f64>,
}

impl LorentzMap {
    /// Wraps `m` after [`lorentz_check`] passes at `tol`.
    pub fn new(m: DMatrix<f64>, tol: f64) -> Result<Self> {
        let report = lorentz_check(&m, tol)?;
        if !report.pass {
            return Err(Error::NotLorentz(Box::new(report)));
        }
        Ok(Self { m })
    }

    /// Wraps `m` without validation. Intended for matrices assembled from
    /// closed-form generator formulas.
    pub fn from_matrix_unchecked(m: DMatrix<f64>) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        Self { m }
    }

    /// Assembles `(a, uᵀ; v, A)`.
    pub fn from_blocks(a: f64, u: &DVector<f64>, v: &DVector<f64>, big_a: &DMatrix<f64>) -> Self {
        let n = u.len();
        assert!(v.len() == n && big_a.nrows() == n && big_a.ncols() == n);
        let mut m = DMatrix::zeros(n + 1, n + 1);
        m[(0, 0)] = a;
        m.view_mut((0, 1), (1, n)).copy_from(&u.transpose());
        m.view_mut((1, 0), (n, 1)).copy_from(v);
        m.view_mut((1, 1), (n, n)).copy_from(big_a);
        Self { m }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            m: DMatrix::identity(n + 1, n + 1),
        }
    }

    /// Spatial dimension `n`.
    pub fn n(&self) -> usize {
        self.m.nrows() - 1
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn a(&self) -> f64 {
        self.m[(0, 0)]
    }

    /// First row without its leading entry.
    pub fn u(&self) -> DVector<f64> {
        self.m.row(0).columns(1, self.n()).transpose()
    }

    /// First column without its leading entry.
    pub fn v(&self) -> DVector<f64> {
        self.m.column(0).rows(1, self.n()).into_owned()
    }

    /// Lower-right `n×n` block.
    pub fn spatial_block(&self) -> DMatrix<f64> {
        self.m.view((1, 1), (self.n(), self.n())).into_owned()
    }

    pub fn check(&self, tol: f64) -> ValidityReport {
        lorentz_check(&self.m, tol).expect("LorentzMap is square by construction")
    }

    pub fn compose(&self, rhs: &LorentzMap) -> Result<LorentzMap> {
        lorentz_compose(self, rhs)
    }

    pub fn inverse(&self) -> LorentzMap {
        lorentz_inverse(self)
    }

    /// Applies the map to an ambient vector of `ℝ^{1,n}`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.m.ncols(),
                found: x.len(),
            });
        }
        let y = &self.m * DVector::from_column_slice(x);
        Ok(y.as_slice().to_vec())
    }

    /// Entrywise `max |self − other|`.
    pub fn max_abs_diff(&self, other: &LorentzMap) -> f64 {
        assert_eq!(self.m.shape(), other.m.shape());
        (&self.m - &other.m).amax()
    }
}

impl fmt::Debug for LorentzMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LorentzMap{}", self.m)
    }
}

impl Mul for &LorentzMap {
    type Output = LorentzMap;

    /// Panics on dimension mismatch; use [`lorentz_compose`] for a checked product.
    fn mul(self, rhs: &LorentzMap) -> LorentzMap {
        lorentz_compose(self, rhs).expect("dimension mismatch in Lorentz product")
    }
}

/// Matrix product `m1 · m2`.
pub fn lorentz_compose(m1: &LorentzMap, m2: &LorentzMap) -> Result<LorentzMap> {
    if m1.n() != m2.n() {
        return Err(Error::DimensionMismatch {
            expected: m1.m.nrows(),
            found: m2.m.nrows(),
        });
    }
    Ok(LorentzMap { m: &m1.m * &m2.m })
}

/// `η Mᵀ η`, exact for group elements.
pub fn lorentz_inverse(m: &LorentzMap) -> LorentzMap {
    let mut inv = m.m.transpose();
    let n1 = inv.nrows();
    for j in 1..n1 {
        inv[(0, j)] = -inv[(0, j)];
        inv[(j, 0)] = -inv[(j, 0)];
    }
    LorentzMap { m: inv }
}

/// The three spacetimes whose future light cones we work with, tagged by
/// their curvature sign `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConeKind {
    /// `k = 0`, flat `ℝ^{1,n}`.
    Minkowski,
    /// `k = +1`, `dS_{n+1} ⊂ ℝ^{1,n+1}`.
    DeSitter,
    /// `k = −1`, `AdS_{n+1} ⊂ ℝ^{2,n}`.
    AntiDeSitter,
}

impl ConeKind {
    pub fn from_k(k: i64) -> Result<Self> {
        match k {
            0 => Ok(Self::Minkowski),
            1 => Ok(Self::DeSitter),
            -1 => Ok(Self::AntiDeSitter),
            other => Err(Error::InvalidConeKind(other)),
        }
    }

    pub fn k(self) -> i8 {
        match self {
            Self::Minkowski => 0,
            Self::DeSitter => 1,
            Self::AntiDeSitter => -1,
        }
    }

    /// Ambient signature for spatial dimension `n`.
    pub fn signature(self, n: usize) -> MetricSignature {
        match self {
            Self::Minkowski => MetricSignature::minkowski(n),
            Self::DeSitter => MetricSignature::de_sitter(n),
            Self::AntiDeSitter => MetricSignature::anti_de_sitter(n),
        }
    }

    /// Number of ambient coordinates for spatial dimension `n`.
    pub fn ambient_dim(self, n: usize) -> usize {
        match self {
            Self::Minkowski => n + 1,
            Self::DeSitter | Self::AntiDeSitter => n + 2,
        }
    }
}

impl fmt::Display for ConeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.k())
    }
}

/// `τ^{(k)}`: a Lorentz map placed in the isotropy group of the de Sitter
/// (`k = +1`) or anti-de Sitter (`k = −1`) base point.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedIsometry {
    kind: ConeKind,
    m: DMatrix<f64>,
}

impl EmbeddedIsometry {
    pub fn kind(&self) -> ConeKind {
        self.kind
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.m.ncols(),
                found: x.len(),
            });
        }
        Ok((&self.m * DVector::from_column_slice(x))
            .as_slice()
            .to_vec())
    }

    /// Product of two embeddings of the same kind.
    pub fn compose(&self, rhs: &EmbeddedIsometry) -> Result<EmbeddedIsometry> {
        if self.kind != rhs.kind || self.m.shape() != rhs.m.shape() {
            return Err(Error::DimensionMismatch {
                expected: self.m.nrows(),
                found: rhs.m.nrows(),
            });
        }
        Ok(EmbeddedIsometry {
            kind: self.kind,
            m: &self.m * &rhs.m,
        })
    }

    /// Recovers the `O₊(1,n)` block.
    pub fn lorentz(&self) -> LorentzMap {
        let n1 = self.m.nrows() - 1;
        let offset = match self.kind {
            ConeKind::AntiDeSitter => 1,
            _ => 0,
        };
        LorentzMap::from_matrix_unchecked(self.m.view((offset, offset), (n1, n1)).into_owned())
    }
}

/// `diag(τ, 1)` for `k = +1`, `diag(1, τ)` for `k = −1`.
pub fn block_embed(m: &LorentzMap, kind: ConeKind) -> Result<EmbeddedIsometry> {
    let n1 = m.n() + 1;
    let mut out = DMatrix::zeros(n1 + 1, n1 + 1);
    match kind {
        ConeKind::DeSitter => {
            out.view_mut((0, 0), (n1, n1)).copy_from(&m.m);
            out[(n1, n1)] = 1.0;
        }
        ConeKind::AntiDeSitter => {
            out[(0, 0)] = 1.0;
            out.view_mut((1, 1), (n1, n1)).copy_from(&m.m);
        }
        ConeKind::Minkowski => return Err(Error::InvalidConeKind(0)),
    }
    Ok(EmbeddedIsometry { kind, m: out })
}
