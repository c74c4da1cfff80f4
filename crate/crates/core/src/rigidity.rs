//! Recovering the Lorentz transformation relating two cone immersions.
//!
//! Given samples `(φ₁(p), φ₂(p))` of two maps into `L₊^{(k)}`, the solver looks
//! for `τ ∈ O₊(1,n)` with `φ₂ = τ^{(k)} ∘ φ₁`. Generic cone samples span
//! `ℝ^{1,n}`, so `τ` is pinned by a square linear solve on `n+1` well-spread
//! samples; the remaining samples and the Lorentz conditions then decide
//! whether the data really are related by a single `τ`.

use nalgebra::{DMatrix, DVector};

use crate::chart::pullback_metric;
use crate::chart::{
    verify_isometric_immersion, ChartTarget, GridChart, ImmersionReport, MetricField,
};
use crate::cone::{cone_contains, convert_unchecked, ConePoint, CONE_TOLERANCE};
use crate::conformal::SpherePoint;
use crate::error::{Error, Result};
use crate::lorentz::{
    block_embed, eta, lorentz_check, ConeKind, EmbeddedIsometry, LorentzMap, MetricSignature,
    ValidityReport,
};

/// Relative singular-value threshold for the numerical rank of the sample span.
pub const SPAN_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RecoveryStatus {
    /// A single `τ` explains every sample.
    Unique,
    /// No Lorentz transformation fits the samples.
    Inconsistent,
    /// The samples do not span `ℝ^{1,n}`.
    Underdetermined,
}

impl RecoveryStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Unique => "unique",
            Self::Inconsistent => "inconsistent",
            Self::Underdetermined => "underdetermined",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "unique" => Some(Self::Unique),
            "inconsistent" => Some(Self::Inconsistent),
            "underdetermined" => Some(Self::Underdetermined),
            _ => None,
        }
    }
}

/// Sample pairs `(φ₁(p), φ₂(p))` on a common cone.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceSet {
    kind: ConeKind,
    pairs: Vec<(ConePoint, ConePoint)>,
}

impl CorrespondenceSet {
    /// Validates kinds, dimensions and cone membership of every point.
    pub fn new(kind: ConeKind, pairs: Vec<(ConePoint, ConePoint)>) -> Result<Self> {
        let Some(first) = pairs.first() else {
            return Err(Error::InvalidCorrespondence("no pairs".into()));
        };
        let width = first.0.coords().len();
        for (i, (x, y)) in pairs.iter().enumerate() {
            if x.kind() != kind || y.kind() != kind {
                return Err(Error::InvalidCorrespondence(format!(
                    "pair {i} mixes cone kinds ({}, {}) with k={}",
                    x.kind(),
                    y.kind(),
                    kind
                )));
            }
            if x.coords().len() != width || y.coords().len() != width {
                return Err(Error::InvalidCorrespondence(format!(
                    "pair {i} has inconsistent dimension"
                )));
            }
            for p in [x, y] {
                if !cone_contains(p, CONE_TOLERANCE).pass {
                    return Err(Error::InvalidCorrespondence(format!(
                        "pair {i} has a point off the cone"
                    )));
                }
            }
        }
        Ok(Self { kind, pairs })
    }

    /// Nodewise pairs of two cone charts on the same grid.
    pub fn from_charts(chart1: &GridChart, chart2: &GridChart) -> Result<Self> {
        let kind = chart_kind(chart1)?;
        check_same_grid(chart1, chart2)?;
        let pairs = (0..chart1.node_count())
            .map(|i| (chart1.cone_point(i), chart2.cone_point(i)))
            .collect();
        Self::new(kind, pairs)
    }

    /// Restriction to a subset of sample indices.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let pairs = indices.iter().map(|&i| self.pairs[i].clone()).collect();
        Self::new(self.kind, pairs)
    }

    pub fn kind(&self) -> ConeKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.pairs[0].0.n()
    }

    pub fn pairs(&self) -> &[(ConePoint, ConePoint)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

fn chart_kind(chart: &GridChart) -> Result<ConeKind> {
    match chart.target() {
        ChartTarget::Cone(kind) => Ok(kind),
        _ => Err(Error::InvalidChart("expected a cone-valued chart".into())),
    }
}

fn check_same_grid(a: &GridChart, b: &GridChart) -> Result<()> {
    if a.grid() != b.grid() || a.n() != b.n() || a.target() != b.target() {
        return Err(Error::InvalidChart(
            "charts do not share grid, n and target".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryOptions {
    pub tol: f64,
    /// One Newton step towards `MᵀηM = η` before validation. Off by default;
    /// meant for noisy-data experiments only.
    pub polish: bool,
}

impl RecoveryOptions {
    pub fn new(tol: f64) -> Self {
        Self { tol, polish: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryReport {
    pub status: RecoveryStatus,
    /// Present iff `status` is `unique`.
    pub tau: Option<LorentzMap>,
    /// `τ^{(k)}` for `k = ±1`, present iff `tau` is.
    pub tau_embedded: Option<EmbeddedIsometry>,
    /// The square-solve fit, whenever the samples span; lets inconsistent
    /// fits be inspected.
    pub candidate: Option<LorentzMap>,
    /// `max ‖τxᵢ − yᵢ‖ / ‖xᵢ‖` over all samples.
    pub max_point_residual: f64,
    pub lorentz_residuals: Option<ValidityReport>,
    pub span_rank: usize,
    /// 2-norm condition number of the pivot columns (normalised).
    pub condition_estimate: f64,
    /// Residuals fail `tol` but stay within `10·tol`.
    pub near_miss: bool,
    /// Indices of the samples used for the square solve.
    pub pivots: Vec<usize>,
    pub tolerance: f64,
}

impl RecoveryReport {
    fn underdetermined(span_rank: usize, tol: f64) -> Self {
        Self {
            status: RecoveryStatus::Underdetermined,
            tau: None,
            tau_embedded: None,
            candidate: None,
            max_point_residual: f64::NAN,
            lorentz_residuals: None,
            span_rank,
            condition_estimate: f64::INFINITY,
            near_miss: false,
            pivots: Vec::new(),
            tolerance: tol,
        }
    }

    pub fn unique_tau(&self) -> Option<&LorentzMap> {
        self.tau.as_ref()
    }

    fn demote(&mut self) {
        self.status = RecoveryStatus::Inconsistent;
        self.tau = None;
        self.tau_embedded = None;
    }
}

/// Greedy volume-maximising column selection (column-pivoted Gram-Schmidt on
/// normalised columns).
fn volume_pivots(x: &DMatrix<f64>, count: usize) -> Vec<usize> {
    let mut work: Vec<DVector<f64>> = x
        .column_iter()
        .map(|c| {
            let norm = c.norm();
            if norm > 0.0 {
                c / norm
            } else {
                c.into_owned()
            }
        })
        .collect();
    let mut chosen = Vec::with_capacity(count);
    for _ in 0..count {
        let (best, _) = work
            .iter()
            .enumerate()
            .filter(|(i, _)| !chosen.contains(i))
            .map(|(i, c)| (i, c.norm_squared()))
            .fold(
                (usize::MAX, -1.0),
                |acc, cur| if cur.1 > acc.1 { cur } else { acc },
            );
        if best == usize::MAX {
            break;
        }
        chosen.push(best);
        let q = work[best].normalize();
        for (i, c) in work.iter_mut().enumerate() {
            if !chosen.contains(&i) {
                let d = q.dot(c);
                c.axpy(-d, &q, 1.0);
            }
        }
    }
    chosen
}

/// `M ← M (I − ½ η (MᵀηM − η))`
fn polish_step(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n1 = m.nrows();
    let e = eta(n1 - 1);
    let defect = m.transpose() * &e * m - &e;
    m * (DMatrix::identity(n1, n1) - (&e * defect) * 0.5)
}

/// Finds `τ` with `yᵢ = τ^{(k)} xᵢ` for every sample pair.
pub fn recover_tau(c: &CorrespondenceSet, tol: f64) -> RecoveryReport {
    recover_tau_with(c, &RecoveryOptions::new(tol))
}

pub fn recover_tau_with(c: &CorrespondenceSet, opts: &RecoveryOptions) -> RecoveryReport {
    let tol = opts.tol;
    let n1 = c.n() + 1;
    let count = c.len();
    let mut x = DMatrix::zeros(n1, count);
    let mut y = DMatrix::zeros(n1, count);
    for (j, (p, q)) in c.pairs().iter().enumerate() {
        let p0 = convert_unchecked(p, ConeKind::Minkowski);
        let q0 = convert_unchecked(q, ConeKind::Minkowski);
        x.column_mut(j).copy_from_slice(p0.coords());
        y.column_mut(j).copy_from_slice(q0.coords());
    }

    let sv = x.singular_values();
    let sv_max = sv.max();
    let span_rank = sv.iter().filter(|s| **s > SPAN_THRESHOLD * sv_max).count();
    if span_rank < n1 {
        return RecoveryReport::underdetermined(span_rank, tol);
    }

    let pivots = volume_pivots(&x, n1);
    let xs = x.select_columns(&pivots);
    let ys = y.select_columns(&pivots);
    let col_norms: Vec<f64> = xs.column_iter().map(|c| c.norm()).collect();
    let xs_normalized = DMatrix::from_fn(n1, n1, |i, j| xs[(i, j)] / col_norms[j]);
    let svs = xs_normalized.singular_values();
    let condition_estimate = svs.max() / svs.min();

    // τ Xs = Ys  ⇔  Xsᵀ τᵀ = Ysᵀ
    let Some(tau_t) = xs.transpose().lu().solve(&ys.transpose()) else {
        return RecoveryReport::underdetermined(span_rank, tol);
    };
    let mut tau = tau_t.transpose();
    if opts.polish {
        tau = polish_step(&tau);
    }

    let fitted = &tau * &x;
    let max_point_residual = (0..count)
        .map(|j| (fitted.column(j) - y.column(j)).norm() / x.column(j).norm())
        .fold(0.0_f64, f64::max);
    let lorentz = lorentz_check(&tau, tol).expect("square by construction");

    let fits = max_point_residual <= tol;
    let status = if fits && lorentz.pass {
        RecoveryStatus::Unique
    } else {
        RecoveryStatus::Inconsistent
    };
    let near_miss = status == RecoveryStatus::Inconsistent
        && lorentz.orthochronous
        && max_point_residual <= 10.0 * tol
        && lorentz.max_residual() <= 10.0 * tol;

    let candidate = LorentzMap::from_matrix_unchecked(tau);
    let (tau, tau_embedded) = if status == RecoveryStatus::Unique {
        let embedded = match c.kind() {
            ConeKind::Minkowski => None,
            kind => Some(block_embed(&candidate, kind).expect("k = ±1")),
        };
        (Some(candidate.clone()), embedded)
    } else {
        (None, None)
    };
    RecoveryReport {
        status,
        tau,
        tau_embedded,
        candidate: Some(candidate),
        max_point_residual,
        lorentz_residuals: Some(lorentz),
        span_rank,
        condition_estimate,
        near_miss,
        pivots,
        tolerance: tol,
    }
}

/// Immersion checks for both charts plus the recovery verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidityReport {
    pub immersion1: ImmersionReport,
    pub immersion2: ImmersionReport,
    /// `None` when either immersion check failed.
    pub recovery: Option<RecoveryReport>,
}

/// Verifies both charts are isometric immersions for `g` (at `fd_tol`) and
/// recovers the transformation between them (at `tol`).
pub fn verify_rigidity(
    chart1: &GridChart,
    chart2: &GridChart,
    g: &MetricField,
    fd_tol: f64,
    tol: f64,
) -> Result<RigidityReport> {
    chart_kind(chart1)?;
    check_same_grid(chart1, chart2)?;
    let immersion1 = verify_isometric_immersion(chart1, g, fd_tol)?;
    let immersion2 = verify_isometric_immersion(chart2, g, fd_tol)?;
    let recovery = if immersion1.pass && immersion2.pass {
        Some(recover_tau(
            &CorrespondenceSet::from_charts(chart1, chart2)?,
            tol,
        ))
    } else {
        None
    };
    Ok(RigidityReport {
        immersion1,
        immersion2,
        recovery,
    })
}

/// Samples of a cone self-map in product coordinates `(t, z) ↦ (t′, z′)`
/// over a set of `t`-levels times a sphere grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeSelfMap {
    pub kind: ConeKind,
    pub t_levels: Vec<f64>,
    /// Sphere-valued chart supplying the `z` samples and the grid for
    /// finite differences.
    pub sphere: GridChart,
    /// Per level, per node: `[t′, z′₁, …, z′ₙ]`, node-major.
    pub images: Vec<Vec<f64>>,
}

impl ConeSelfMap {
    pub fn new(
        kind: ConeKind,
        t_levels: Vec<f64>,
        sphere: GridChart,
        images: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if sphere.target() != ChartTarget::Sphere {
            return Err(Error::InvalidChart(
                "self-map base must be sphere-valued".into(),
            ));
        }
        if t_levels.len() < 2 {
            return Err(Error::InvalidInput("need at least two t-levels".into()));
        }
        if t_levels.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::InvalidInput("t-levels must be positive".into()));
        }
        let mut sorted = t_levels.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput("t-levels must be distinct".into()));
        }
        let width = sphere.n() + 1;
        if images.len() != t_levels.len()
            || images
                .iter()
                .any(|l| l.len() != sphere.node_count() * width)
        {
            return Err(Error::InvalidInput(format!(
                "images must hold {} levels of {} nodes x {width}",
                t_levels.len(),
                sphere.node_count()
            )));
        }
        Ok(Self {
            kind,
            t_levels,
            sphere,
            images,
        })
    }

    /// Samples `f(t, z) = (t′, z′)` on the product grid.
    pub fn from_fn<F>(
        kind: ConeKind,
        t_levels: Vec<f64>,
        sphere: GridChart,
        mut f: F,
    ) -> Result<Self>
    where
        F: FnMut(f64, &[f64]) -> (f64, Vec<f64>),
    {
        let images = t_levels
            .iter()
            .map(|&t| {
                sphere
                    .nodes()
                    .flat_map(|z| {
                        let (tp, zp) = f(t, z);
                        std::iter::once(tp).chain(zp)
                    })
                    .collect()
            })
            .collect();
        Self::new(kind, t_levels, sphere, images)
    }

    /// Restriction of a Lorentz map to the cone, sampled on the product grid.
    pub fn from_lorentz(
        kind: ConeKind,
        tau: &LorentzMap,
        t_levels: Vec<f64>,
        sphere: GridChart,
    ) -> Result<Self> {
        Self::from_fn(kind, t_levels, sphere, |t, z| {
            let mut x = Vec::with_capacity(z.len() + 1);
            x.push(t);
            x.extend(z.iter().map(|v| t * v));
            let y = tau.apply(&x).expect("dimension matches");
            let tp = y[0];
            (tp, y[1..].iter().map(|v| v / tp).collect())
        })
    }

    pub fn n(&self) -> usize {
        self.sphere.n()
    }

    fn image(&self, level: usize, node: usize) -> &[f64] {
        let w = self.n() + 1;
        &self.images[level][node * w..(node + 1) * w]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtensionRejection {
    /// The sphere component of the image depends on `t`.
    TimeDependent,
    /// `f² φ̄* g_S ≠ t² g_S`.
    ScalingViolation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionReport {
    /// Max over nodes and levels of the drift of `z′` away from its value on
    /// the first level.
    pub t_variation: f64,
    /// Max nodewise `‖f² φ̄*g_S − t² g_S‖_F / ‖t² g_S‖_F`.
    pub scaling_residual: Option<f64>,
    /// Max relative mismatch between `t′` and the first row of `τ` applied to
    /// `(t, t z)`.
    pub f_residual: Option<f64>,
    pub rejection: Option<ExtensionRejection>,
    pub recovery: Option<RecoveryReport>,
}

impl ExtensionReport {
    /// `Inconsistent` for rejected maps.
    pub fn status(&self) -> RecoveryStatus {
        match (&self.rejection, &self.recovery) {
            (None, Some(r)) => r.status,
            _ => RecoveryStatus::Inconsistent,
        }
    }
}

/// Extends an isometry of the light cone to the ambient Lorentz map.
pub fn extend_cone_isometry(map: &ConeSelfMap, tol: f64, fd_tol: f64) -> Result<ExtensionReport> {
    let n = map.n();
    let nodes = map.sphere.node_count();

    let mut t_variation: f64 = 0.0;
    for level in 1..map.t_levels.len() {
        for node in 0..nodes {
            let a = &map.image(0, node)[1..];
            let b = &map.image(level, node)[1..];
            let d = a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            t_variation = t_variation.max(d);
        }
    }
    let mut report = ExtensionReport {
        t_variation,
        scaling_residual: None,
        f_residual: None,
        rejection: None,
        recovery: None,
    };
    if !(t_variation <= tol) {
        report.rejection = Some(ExtensionRejection::TimeDependent);
        return Ok(report);
    }

    let euclid = MetricSignature::euclidean(n);
    let base = pullback_metric(&map.sphere, euclid)?;
    let mut scaling: f64 = 0.0;
    for (level, &t) in map.t_levels.iter().enumerate() {
        let zvals: Vec<f64> = (0..nodes)
            .flat_map(|i| map.image(level, i)[1..].to_vec())
            .collect();
        let image_chart = GridChart::new(map.sphere.grid().clone(), n, ChartTarget::Sphere, zvals)?;
        let pulled = pullback_metric(&image_chart, euclid)?;
        for node in 0..nodes {
            let f = map.image(level, node)[0];
            let mut diff = 0.0;
            let mut norm = 0.0;
            for (p, g) in pulled.node(node).iter().zip(base.node(node)) {
                diff += (f * f * p - t * t * g).powi(2);
                norm += (t * t * g).powi(2);
            }
            scaling = scaling.max((diff / norm).sqrt());
        }
    }
    report.scaling_residual = Some(scaling);
    if !(scaling <= fd_tol) {
        report.rejection = Some(ExtensionRejection::ScalingViolation);
        return Ok(report);
    }

    let mut pairs = Vec::with_capacity(nodes * map.t_levels.len());
    for (level, &t) in map.t_levels.iter().enumerate() {
        for node in 0..nodes {
            let z = SpherePoint::normalized(map.sphere.node(node).to_vec())?;
            let img = map.image(level, node);
            let zp = SpherePoint::normalized(img[1..].to_vec())?;
            let src = ConePoint::from_ray(t, &z);
            let dst = ConePoint::from_ray(img[0], &zp);
            pairs.push((
                convert_unchecked(&src, map.kind),
                convert_unchecked(&dst, map.kind),
            ));
        }
    }
    let mut recovery = recover_tau(&CorrespondenceSet::new(map.kind, pairs)?, tol);

    if let Some(tau) = recovery.candidate.clone() {
        let mut f_res: f64 = 0.0;
        for (level, &t) in map.t_levels.iter().enumerate() {
            for node in 0..nodes {
                let z = map.sphere.node(node);
                let row0 = tau.a() + tau.u().iter().zip(z).map(|(u, zi)| u * zi).sum::<f64>();
                let tp = map.image(level, node)[0];
                f_res = f_res.max((t * row0 - tp).abs() / tp.abs());
            }
        }
        report.f_residual = Some(f_res);
        if !(f_res <= tol) && recovery.status == RecoveryStatus::Unique {
            recovery.demote();
        }
    }
    report.recovery = Some(recovery);
    Ok(report)
}

/// How [`locality_check`] tiles the grid: `parts[a]` windows along axis `a`,
/// each extended by `overlap` nodes into its neighbour.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowSpec {
    pub parts: Vec<usize>,
    pub overlap: usize,
}

impl WindowSpec {
    /// Two overlapping halves per axis, `2^m` windows in total.
    pub fn halves(m: usize) -> Self {
        Self {
            parts: vec![2; m],
            overlap: 2,
        }
    }

    /// `(start, len)` per window.
    pub fn windows(&self, shape: &[usize], periodic: &[bool]) -> Vec<(Vec<usize>, Vec<usize>)> {
        let m = shape.len();
        let per_axis: Vec<Vec<(usize, usize)>> = (0..m)
            .map(|a| {
                let parts = self.parts[a].clamp(1, shape[a]);
                let base = shape[a].div_ceil(parts);
                (0..parts)
                    .map(|k| {
                        let start = k * base;
                        let mut len = base + self.overlap;
                        if !periodic[a] {
                            len = len.min(shape[a] - start);
                        }
                        (start, len.min(shape[a]))
                    })
                    .filter(|(start, _)| *start < shape[a])
                    .collect()
            })
            .collect();
        let total: usize = per_axis.iter().map(Vec::len).product();
        (0..total)
            .map(|mut k| {
                let mut start = vec![0; m];
                let mut len = vec![0; m];
                for a in (0..m).rev() {
                    let (s, l) = per_axis[a][k % per_axis[a].len()];
                    start[a] = s;
                    len[a] = l;
                    k /= per_axis[a].len();
                }
                (start, len)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowOutcome {
    pub start: Vec<usize>,
    pub len: Vec<usize>,
    pub report: RecoveryReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalityReport {
    pub windows: Vec<WindowOutcome>,
    /// Indices into `windows` whose samples do not span.
    pub underdetermined: Vec<usize>,
    /// Max pairwise `‖τ̂ᵢ − τ̂ⱼ‖∞` over windows with a unique recovery.
    pub max_disagreement: f64,
    /// Every window unique and all pairwise disagreements within `agree_tol`.
    pub constant: bool,
}

/// Recovers `τ` on each window separately and compares the results.
pub fn locality_check(
    chart1: &GridChart,
    chart2: &GridChart,
    spec: &WindowSpec,
    tol: f64,
    agree_tol: f64,
) -> Result<LocalityReport> {
    let all = CorrespondenceSet::from_charts(chart1, chart2)?;
    let grid = chart1.grid();
    if spec.parts.len() != grid.dim() {
        return Err(Error::InvalidInput(format!(
            "window spec has {} axes, grid has {}",
            spec.parts.len(),
            grid.dim()
        )));
    }
    let mut windows = Vec::new();
    for (start, len) in spec.windows(&grid.shape, &grid.periodic) {
        let nodes = grid.window_nodes(&start, &len);
        let report = recover_tau(&all.subset(&nodes)?, tol);
        windows.push(WindowOutcome { start, len, report });
    }
    let underdetermined: Vec<usize> = windows
        .iter()
        .enumerate()
        .filter(|(_, w)| w.report.status == RecoveryStatus::Underdetermined)
        .map(|(i, _)| i)
        .collect();
    let taus: Vec<&LorentzMap> = windows
        .iter()
        .filter_map(|w| w.report.unique_tau())
        .collect();
    let mut max_disagreement: f64 = 0.0;
    for i in 0..taus.len() {
        for j in (i + 1)..taus.len() {
            max_disagreement = max_disagreement.max(taus[i].max_abs_diff(taus[j]));
        }
    }
    let constant = taus.len() == windows.len() && max_disagreement <= agree_tol;
    Ok(LocalityReport {
        windows,
        underdetermined,
        max_disagreement,
        constant,
    })
}
