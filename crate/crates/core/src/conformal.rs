//! Conformal transformations of `S^{n-1}` realised as Lorentz matrices.
//!
//! A Lorentz map `τ = (a, uᵀ; v, A)` acts on the sphere of future null rays by
//!
//! ```text
//!     τ̄(z) = (Az + v) / (uᵀz + a)
//! ```
//!
//! Stereographic coordinates `w = z′/(1 − z₁)` (with `z = (z₁, z′)`) are only
//! used to describe the four generator families; every map is stored as a
//! matrix, so there is no point at infinity to special-case.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::lorentz::{inner_unchecked, lorentz_check, LorentzMap, ValidityReport};
use crate::rigidity::RecoveryStatus;

/// Tolerance on `|‖z‖ − 1|` for [`SpherePoint::new`].
pub const UNIT_TOLERANCE: f64 = 1e-12;

/// Relative singular-value gap below which a homogeneous system is treated
/// as rank deficient.
pub const SINGULAR_GAP: f64 = 1e-8;

/// A unit vector `z = (z₁, z′) ∈ S^{n-1} ⊂ ℝⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpherePoint(Vec<f64>);

impl SpherePoint {
    pub fn new(z: Vec<f64>) -> Result<Self> {
        let norm = z.iter().map(|x| x * x).sum::<f64>().sqrt();
        if z.is_empty() || !((norm - 1.0).abs() <= UNIT_TOLERANCE) {
            return Err(Error::NotUnit(norm - 1.0));
        }
        Ok(Self(z))
    }

    /// Rescales a nonzero vector onto the sphere.
    pub fn normalized(mut z: Vec<f64>) -> Result<Self> {
        let norm = z.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::NotUnit(norm - 1.0));
        }
        z.iter_mut().for_each(|x| *x /= norm);
        Ok(Self(z))
    }

    /// Ambient dimension `n`.
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Great-circle distance.
    pub fn distance(&self, other: &SpherePoint) -> f64 {
        let chord = self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        2.0 * (0.5 * chord).min(1.0).asin()
    }
}

/// A point `w ∈ ℝ^{n-1}` in stereographic coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanePoint(Vec<f64>);

impl PlanePoint {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(
                "plane point has non-finite entries".into(),
            ));
        }
        Ok(Self(w))
    }

    pub fn origin(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    fn norm_squared(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum()
    }
}

/// `w = z′/(1 − z₁)`. The pole `z₁ = 1` is an error.
pub fn stereo_project(z: &SpherePoint) -> Result<PlanePoint> {
    let denom = 1.0 - z.0[0];
    if denom <= 1e-12 {
        return Err(Error::Pole);
    }
    Ok(PlanePoint(z.0[1..].iter().map(|x| x / denom).collect()))
}

/// Inverse of [`stereo_project`]: `z₁ = (‖w‖²−1)/(‖w‖²+1)`, `z′ = 2w/(‖w‖²+1)`.
pub fn stereo_unproject(w: &PlanePoint) -> SpherePoint {
    let r2 = w.norm_squared();
    let mut z = Vec::with_capacity(w.dim() + 1);
    z.push((r2 - 1.0) / (r2 + 1.0));
    z.extend(w.0.iter().map(|x| 2.0 * x / (r2 + 1.0)));
    SpherePoint(z)
}

/// A conformal transformation of `S^{n-1}`, represented by its Lorentz lift.
#[derive(Debug, Clone, PartialEq)]
pub struct ConformalMap {
    lorentz: LorentzMap,
}

impl ConformalMap {
    pub fn new(lorentz: LorentzMap) -> Self {
        Self { lorentz }
    }

    pub fn identity(n: usize) -> Self {
        Self::new(LorentzMap::identity(n))
    }

    pub fn lorentz(&self) -> &LorentzMap {
        &self.lorentz
    }

    pub fn into_lorentz(self) -> LorentzMap {
        self.lorentz
    }

    /// Sphere dimension parameter `n` (the map acts on `S^{n-1} ⊂ ℝⁿ`).
    pub fn n(&self) -> usize {
        self.lorentz.n()
    }

    /// `self ∘ other`
    pub fn compose(&self, other: &ConformalMap) -> Result<ConformalMap> {
        Ok(Self::new(self.lorentz.compose(&other.lorentz)?))
    }

    pub fn inverse(&self) -> ConformalMap {
        Self::new(self.lorentz.inverse())
    }

    pub fn apply(&self, z: &SpherePoint) -> Result<SpherePoint> {
        mobius_apply(self, z)
    }
}

fn denominator_and_image(m: &DMatrix<f64>, z: &[f64]) -> Result<(f64, Vec<f64>)> {
    let n = m.nrows() - 1;
    if z.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: z.len(),
        });
    }
    let mut denom = m[(0, 0)];
    for (j, zj) in z.iter().enumerate() {
        denom += m[(0, j + 1)] * zj;
    }
    if !(denom > 0.0) {
        return Err(Error::NonPositiveDenominator(denom));
    }
    let mut out = vec![0.0; n];
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = m[(i + 1, 0)];
        for (j, zj) in z.iter().enumerate() {
            acc += m[(i + 1, j + 1)] * zj;
        }
        *o = acc / denom;
    }
    Ok((denom, out))
}

pub(crate) fn mobius_apply_matrix(m: &DMatrix<f64>, z: &[f64]) -> Result<SpherePoint> {
    let (_, image) = denominator_and_image(m, z)?;
    SpherePoint::normalized(image)
}

/// `τ̄(z) = (Az + v)/(uᵀz + a)`, snapped back onto the sphere.
pub fn mobius_apply(m: &ConformalMap, z: &SpherePoint) -> Result<SpherePoint> {
    mobius_apply_matrix(m.lorentz.matrix(), z.coords())
}

/// Conformal factor `σ(z) = 1/(uᵀz + a)`, so that `τ̄* g_S = σ² g_S` at `z`.
pub fn mobius_conformal_factor(m: &ConformalMap, z: &SpherePoint) -> Result<f64> {
    let (denom, _) = denominator_and_image(m.lorentz.matrix(), z.coords())?;
    Ok(1.0 / denom)
}

/// Lift of the dilation `w ↦ λw`.
pub fn gen_dilation(lambda: f64, n: usize) -> Result<ConformalMap> {
    if lambda == 0.0 || !lambda.is_finite() {
        return Err(Error::ZeroDilation);
    }
    let l = lambda.abs();
    let c = 0.5 * (l + 1.0 / l);
    let s = 0.5 * (l - 1.0 / l);
    let mut m = DMatrix::identity(n + 1, n + 1);
    m[(0, 0)] = c;
    m[(1, 1)] = c;
    m[(0, 1)] = s;
    m[(1, 0)] = s;
    if lambda < 0.0 {
        // negating the λ-formula blocks; the leading entry is then −c < 0 for
        // the raw formula, and its negative c > 0 here
        let mut raw = m.clone();
        raw[(0, 0)] = -c;
        raw[(1, 1)] = -c;
        raw[(0, 1)] = -s;
        raw[(1, 0)] = -s;
        m = -raw;
    }
    Ok(ConformalMap::new(LorentzMap::from_matrix_unchecked(m)))
}

/// Lift of the orthogonal map `w ↦ Bw`: `a = 1`, `u = v = 0`, `A = diag(1, B)`.
pub fn gen_rotation(b: &DMatrix<f64>) -> Result<ConformalMap> {
    if b.nrows() != b.ncols() {
        return Err(Error::NotSquare {
            rows: b.nrows(),
            cols: b.ncols(),
        });
    }
    let k = b.nrows();
    let defect = (b.transpose() * b - DMatrix::identity(k, k)).amax();
    if !(defect <= 1e-10) {
        return Err(Error::NotOrthogonal(defect));
    }
    let mut m = DMatrix::identity(k + 2, k + 2);
    m.view_mut((2, 2), (k, k)).copy_from(b);
    Ok(ConformalMap::new(LorentzMap::from_matrix_unchecked(m)))
}

/// Lift of the inversion `w ↦ (w − w₀)/‖w − w₀‖²`.
pub fn gen_inversion(w0: &PlanePoint) -> ConformalMap {
    let k = w0.dim();
    let h = 0.5 * w0.norm_squared();
    let a = 1.0 + h;
    let mut u = DVector::zeros(k + 1);
    u[0] = -h;
    for (i, wi) in w0.coords().iter().enumerate() {
        u[i + 1] = -wi;
    }
    let v = u.clone();
    let mut big_a = DMatrix::identity(k + 1, k + 1);
    big_a[(0, 0)] = -1.0 + h;
    for (i, wi) in w0.coords().iter().enumerate() {
        big_a[(0, i + 1)] = *wi;
        big_a[(i + 1, 0)] = *wi;
    }
    ConformalMap::new(LorentzMap::from_blocks(a, &u, &v, &big_a))
}

/// Lift of the translation `w ↦ w + b`.
pub fn gen_translation(b: &PlanePoint) -> ConformalMap {
    let k = b.dim();
    let h = 0.5 * b.norm_squared();
    let a = 1.0 + h;
    let mut u = DVector::zeros(k + 1);
    let mut v = DVector::zeros(k + 1);
    u[0] = -h;
    v[0] = h;
    for (i, bi) in b.coords().iter().enumerate() {
        u[i + 1] = *bi;
        v[i + 1] = *bi;
    }
    let mut big_a = DMatrix::identity(k + 1, k + 1);
    big_a[(0, 0)] = 1.0 - h;
    for (i, bi) in b.coords().iter().enumerate() {
        big_a[(0, i + 1)] = *bi;
        big_a[(i + 1, 0)] = -bi;
    }
    ConformalMap::new(LorentzMap::from_blocks(a, &u, &v, &big_a))
}

/// Haar-distributed element of `O(k)` (QR of a Gaussian matrix with the
/// sign of `R`'s diagonal folded into `Q`).
pub fn random_orthogonal<R: Rng>(rng: &mut R, k: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(k, k, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..k {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Uniformly distributed unit vector in `ℝᵏ`.
pub fn random_unit<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn random_plane_point<R: Rng>(rng: &mut R, k: usize, bound: f64) -> PlanePoint {
    let r = rng.random_range(0.0..=bound);
    PlanePoint(random_unit(rng, k).into_iter().map(|x| x * r).collect())
}

/// One random generator (dilation, orthogonal map, inversion or translation)
/// for `S^{n-1}`. Dilation factors lie in `[1/bound, bound]`; translation and
/// inversion centres have norm at most `bound`.
pub fn random_generator<R: Rng>(rng: &mut R, n: usize, bound: f64) -> ConformalMap {
    let bound = bound.abs().max(1.0 / bound.abs());
    match rng.random_range(0..4u8) {
        0 => {
            let log_b = bound.ln();
            let lambda = rng.random_range(-log_b..=log_b).exp();
            gen_dilation(lambda, n).expect("lambda > 0")
        }
        1 => gen_rotation(&random_orthogonal(rng, n - 1)).expect("orthogonal by construction"),
        2 => gen_inversion(&random_plane_point(rng, n - 1, bound)),
        _ => gen_translation(&random_plane_point(rng, n - 1, bound)),
    }
}

/// Deterministic pseudo-random product of `steps` generators.
pub fn random_conformal(n: usize, seed: u64, steps: usize, param_bound: f64) -> ConformalMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_conformal_with(&mut rng, n, steps, param_bound)
}

pub fn random_conformal_with<R: Rng>(
    rng: &mut R,
    n: usize,
    steps: usize,
    param_bound: f64,
) -> ConformalMap {
    assert!(n >= 2, "sphere dimension parameter must be at least 2");
    let mut m = LorentzMap::identity(n);
    for _ in 0..steps {
        let g = random_generator(rng, n, param_bound);
        m = &m * g.lorentz();
    }
    ConformalMap::new(m)
}

/// Outcome of [`conformal_to_lorentz`].
#[derive(Debug, Clone)]
pub struct ConformalEstimate {
    pub status: RecoveryStatus,
    /// Present unless the samples are underdetermined.
    pub map: Option<ConformalMap>,
    /// Max great-circle distance between `τ̄(zᵢ)` and `z̃ᵢ`.
    pub residual: f64,
    pub lorentz_residuals: Option<ValidityReport>,
    /// Smallest singular value of the scale-eliminated linear system.
    pub sigma_min: f64,
    /// Second smallest singular value; the gap to `sigma_min` certifies uniqueness.
    pub sigma_second: f64,
    pub sigma_max: f64,
    /// Numerical rank of the source vectors `(1, zᵢ)`.
    pub span_rank: usize,
}

/// Estimates the Lorentz matrix `M` with `M(1, zᵢ) ∝ (1, z̃ᵢ)` from sphere pairs.
///
/// Unknown per-pair scales are eliminated by taking the first row of
/// `M(1, zᵢ)` as the scale, leaving `n` homogeneous equations per pair in the
/// `(n+1)²` entries of `M`. The least-squares null direction is normalised to
/// `a² − ‖v‖² = 1`, `a > 0`.
///
/// With exactly `n+1` generic pairs the linear system has a `(n+1)`-dimensional
/// null space (every map with the prescribed eigen-directions). In that case
/// the scales are pinned instead by the Lorentz condition
/// `μᵢ μⱼ ⟨(1,z̃ᵢ),(1,z̃ⱼ)⟩ = ⟨(1,zᵢ),(1,zⱼ)⟩`.
pub fn conformal_to_lorentz(
    pairs: &[(SpherePoint, SpherePoint)],
    tol: f64,
) -> Result<ConformalEstimate> {
    let first = pairs
        .first()
        .ok_or_else(|| Error::InvalidInput("no sphere pairs".into()))?;
    let n = first.0.dim();
    if n < 2 {
        return Err(Error::InvalidInput(
            "sphere points need at least 2 coordinates".into(),
        ));
    }
    for (z, zt) in pairs {
        if z.dim() != n || zt.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: if z.dim() != n { z.dim() } else { zt.dim() },
            });
        }
    }
    let n1 = n + 1;
    let unknowns = n1 * n1;

    let lift = |z: &SpherePoint| {
        let mut x = Vec::with_capacity(n1);
        x.push(1.0);
        x.extend_from_slice(z.coords());
        x
    };
    let xs: Vec<Vec<f64>> = pairs.iter().map(|(z, _)| lift(z)).collect();
    let ys: Vec<Vec<f64>> = pairs.iter().map(|(_, z)| lift(z)).collect();

    let x_mat = DMatrix::from_fn(n1, pairs.len(), |i, j| xs[j][i]);
    let sx = x_mat.singular_values();
    let sx_max = sx.max();
    let span_rank = sx.iter().filter(|s| **s > SINGULAR_GAP * sx_max).count();

    // (M x)_j − y_j (M x)_0 = 0 for j = 1..n
    let rows = (pairs.len() * n).max(unknowns);
    let mut sys = DMatrix::zeros(rows, unknowns);
    for (p, (x, y)) in xs.iter().zip(&ys).enumerate() {
        for j in 1..n1 {
            let r = p * n + (j - 1);
            for c in 0..n1 {
                sys[(r, j * n1 + c)] += x[c];
                sys[(r, c)] -= y[j] * x[c];
            }
        }
    }
    let svd = sys.svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let sv: &DVector<f64> = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[a].total_cmp(&sv[b]));
    let sigma_min = svd.singular_values[order[0]];
    let sigma_second = svd.singular_values[order[1]];
    let sigma_max = svd.singular_values[order[order.len() - 1]];

    let mut estimate = ConformalEstimate {
        status: RecoveryStatus::Underdetermined,
        map: None,
        residual: f64::NAN,
        lorentz_residuals: None,
        sigma_min,
        sigma_second,
        sigma_max,
        span_rank,
    };

    let candidate = if sigma_second >= SINGULAR_GAP * sigma_max {
        let row = v_t.row(order[0]);
        let m = DMatrix::from_fn(n1, n1, |i, j| row[i * n1 + j]);
        normalize_lorentz_scale(m)
    } else if span_rank == n1 && pairs.len() >= 3 {
        scales_from_inner_products(&xs, &ys, &x_mat)
    } else {
        return Ok(estimate);
    };

    let Some(m) = candidate else {
        estimate.status = RecoveryStatus::Inconsistent;
        estimate.residual = f64::INFINITY;
        return Ok(estimate);
    };

    let mut residual: f64 = 0.0;
    for (z, zt) in pairs {
        match mobius_apply_matrix(&m, z.coords()) {
            Ok(img) => residual = residual.max(img.distance(zt)),
            Err(_) => residual = f64::INFINITY,
        }
    }
    let report = lorentz_check(&m, tol)?;
    estimate.residual = residual;
    estimate.status = if residual <= tol && report.pass {
        RecoveryStatus::Unique
    } else {
        RecoveryStatus::Inconsistent
    };
    estimate.lorentz_residuals = Some(report);
    estimate.map = Some(ConformalMap::new(LorentzMap::from_matrix_unchecked(m)));
    Ok(estimate)
}

/// Rescales a projective Lorentz candidate so that `a² − ‖v‖² = 1`, `a > 0`.
fn normalize_lorentz_scale(mut m: DMatrix<f64>) -> Option<DMatrix<f64>> {
    let col0: Vec<f64> = m.column(0).iter().copied().collect();
    let s = -inner_unchecked(&col0, &col0, 1);
    if !(s > 0.0) {
        return None;
    }
    let mut scale = 1.0 / s.sqrt();
    if m[(0, 0)] < 0.0 {
        scale = -scale;
    }
    m *= scale;
    Some(m)
}

fn scales_from_inner_products(
    xs: &[Vec<f64>],
    ys: &[Vec<f64>],
    x_mat: &DMatrix<f64>,
) -> Option<DMatrix<f64>> {
    let count = xs.len();
    let mut eqs = Vec::new();
    let mut rhs = Vec::new();
    for i in 0..count {
        for j in (i + 1)..count {
            let gx = inner_unchecked(&xs[i], &xs[j], 1);
            let gy = inner_unchecked(&ys[i], &ys[j], 1);
            let ratio = gx / gy;
            if !(ratio > 0.0 && ratio.is_finite()) {
                return None;
            }
            eqs.push((i, j));
            rhs.push(ratio.ln());
        }
    }
    let design = DMatrix::from_fn(eqs.len(), count, |r, c| {
        let (i, j) = eqs[r];
        if c == i || c == j {
            1.0
        } else {
            0.0
        }
    });
    let log_mu = design
        .svd(true, true)
        .solve(&DVector::from_vec(rhs), 1e-12)
        .ok()?;
    let n1 = xs[0].len();
    let scaled_y = DMatrix::from_fn(n1, count, |r, c| ys[c][r] * log_mu[c].exp());
    // M X = Y D  ⇔  Xᵀ Mᵀ = (Y D)ᵀ
    let mt = x_mat
        .transpose()
        .svd(true, true)
        .solve(&scaled_y.transpose(), 1e-14)
        .ok()?;
    normalize_lorentz_scale(mt.transpose())
}
