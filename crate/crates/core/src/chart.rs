//! Sampled charts on uniform tensor grids and finite-difference pullback metrics.
//!
//! A [`GridChart`] is the discrete stand-in for a map `φ: (M, g) → target`
//! written in local coordinates `(y₁, …, y_m)`. Derivatives use second-order
//! central differences in the interior (wrapping on periodic axes) and
//! second-order one-sided stencils at non-periodic boundaries.

use nalgebra::DMatrix;

use crate::cone::{cone_contains, convert_unchecked, project_unchecked, ConePoint, CONE_TOLERANCE};
use crate::error::{Error, Result};
use crate::lorentz::{inner_unchecked, ConeKind, MetricSignature};

/// Nodes below which a grid axis cannot carry a second-order stencil.
pub const MIN_AXIS_NODES: usize = 3;

/// Smallest Jacobian singular value below which an immersion is flagged as
/// rank deficient (reported, not failed).
pub const RANK_THRESHOLD: f64 = 1e-8;

/// A uniform tensor grid in parameter space. Nodes are ordered row-major
/// (last axis fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub shape: Vec<usize>,
    pub spacing: Vec<f64>,
    pub origin: Vec<f64>,
    pub periodic: Vec<bool>,
}

impl Grid {
    pub fn new(
        shape: Vec<usize>,
        spacing: Vec<f64>,
        origin: Vec<f64>,
        periodic: Vec<bool>,
    ) -> Result<Self> {
        let m = shape.len();
        if m == 0 {
            return Err(Error::InvalidChart("grid has no axes".into()));
        }
        if spacing.len() != m || origin.len() != m || periodic.len() != m {
            return Err(Error::InvalidChart(format!(
                "axis metadata lengths differ (shape {m}, spacing {}, origin {}, periodic {})",
                spacing.len(),
                origin.len(),
                periodic.len()
            )));
        }
        if let Some(h) = spacing.iter().find(|h| !(**h > 0.0 && h.is_finite())) {
            return Err(Error::InvalidChart(format!(
                "spacing must be positive, got {h}"
            )));
        }
        if let Some(s) = shape.iter().find(|s| **s < MIN_AXIS_NODES) {
            return Err(Error::InvalidChart(format!(
                "every axis needs at least {MIN_AXIS_NODES} nodes, got {s}"
            )));
        }
        Ok(Self {
            shape,
            spacing,
            origin,
            periodic,
        })
    }

    /// A periodic 1-d grid of `nodes` samples over `[0, 2π)`.
    pub fn circle(nodes: usize) -> Result<Self> {
        Self::new(
            vec![nodes],
            vec![std::f64::consts::TAU / nodes as f64],
            vec![0.0],
            vec![true],
        )
    }

    /// A non-periodic cube `[lo, hi]^m` with `nodes` samples per axis.
    pub fn cube(m: usize, nodes: usize, lo: f64, hi: f64) -> Result<Self> {
        let h = (hi - lo) / (nodes.max(2) - 1) as f64;
        Self::new(vec![nodes; m], vec![h; m], vec![lo; m], vec![false; m])
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn node_count(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn multi_index(&self, mut node: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            idx[a] = node % self.shape[a];
            node /= self.shape[a];
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.shape)
            .fold(0, |acc, (i, s)| acc * s + i)
    }

    /// Parameter coordinates `y` of a node.
    pub fn coords(&self, node: usize) -> Vec<f64> {
        self.multi_index(node)
            .iter()
            .enumerate()
            .map(|(a, &i)| self.origin[a] + i as f64 * self.spacing[a])
            .collect()
    }

    /// Nodes of the block starting at `start` with `len` nodes per axis,
    /// wrapping on periodic axes and clipping on the others.
    pub fn window_nodes(&self, start: &[usize], len: &[usize]) -> Vec<usize> {
        let m = self.dim();
        let ranges: Vec<Vec<usize>> = (0..m)
            .map(|a| {
                (0..len[a])
                    .map(|o| start[a] + o)
                    .filter_map(|i| {
                        if self.periodic[a] {
                            Some(i % self.shape[a])
                        } else if i < self.shape[a] {
                            Some(i)
                        } else {
                            None
                        }
                    })
                    .collect()
            })
            .collect();
        let mut out = Vec::new();
        let mut idx = vec![0usize; m];
        let total: usize = ranges.iter().map(Vec::len).product();
        for mut k in 0..total {
            for a in (0..m).rev() {
                idx[a] = ranges[a][k % ranges[a].len()];
                k /= ranges[a].len();
            }
            out.push(self.flat_index(&idx));
        }
        out
    }

    /// Stencil `(node, weight)` list for `∂/∂y_axis` at `node`.
    fn stencil(&self, node: usize, axis: usize) -> [(usize, f64); 3] {
        let mut idx = self.multi_index(node);
        let n = self.shape[axis];
        let h = self.spacing[axis];
        let i = idx[axis];
        let mut at = |j: usize| {
            idx[axis] = j;
            self.flat_index(&idx)
        };
        if self.periodic[axis] {
            [
                (at((i + 1) % n), 0.5 / h),
                (at((i + n - 1) % n), -0.5 / h),
                (node, 0.0),
            ]
        } else if i == 0 {
            [(at(0), -1.5 / h), (at(1), 2.0 / h), (at(2), -0.5 / h)]
        } else if i == n - 1 {
            [
                (at(n - 1), 1.5 / h),
                (at(n - 2), -2.0 / h),
                (at(n - 3), 0.5 / h),
            ]
        } else {
            [(at(i + 1), 0.5 / h), (at(i - 1), -0.5 / h), (node, 0.0)]
        }
    }
}

/// What the chart's node values are.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChartTarget {
    /// Unit vectors in `ℝⁿ`.
    Sphere,
    /// Points of `L₊^{(k)}` in ambient coordinates.
    Cone(ConeKind),
    /// Stereographic coordinates in `ℝ^{n-1}`.
    Plane,
}

impl ChartTarget {
    pub fn width(self, n: usize) -> usize {
        match self {
            Self::Sphere => n,
            Self::Cone(kind) => kind.ambient_dim(n),
            Self::Plane => n - 1,
        }
    }

    /// The ambient form pulled back by [`pullback_metric`].
    pub fn signature(self, n: usize) -> MetricSignature {
        match self {
            Self::Sphere => MetricSignature::euclidean(n),
            Self::Cone(kind) => kind.signature(n),
            Self::Plane => MetricSignature::euclidean(n - 1),
        }
    }
}

/// Sampled map values on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridChart {
    grid: Grid,
    n: usize,
    target: ChartTarget,
    values: Vec<f64>,
}

impl GridChart {
    /// `values` is node-major with `target.width(n)` entries per node.
    pub fn new(grid: Grid, n: usize, target: ChartTarget, values: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidChart(format!(
                "n must be at least 2, got {n}"
            )));
        }
        let width = target.width(n);
        if values.len() != grid.node_count() * width {
            return Err(Error::InvalidChart(format!(
                "expected {} values ({} nodes x width {width}), got {}",
                grid.node_count() * width,
                grid.node_count(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidChart("non-finite node value".into()));
        }
        Ok(Self {
            grid,
            n,
            target,
            values,
        })
    }

    /// Samples `f` at every node's parameter coordinates.
    pub fn from_fn<F>(grid: Grid, n: usize, target: ChartTarget, mut f: F) -> Result<Self>
    where
        F: FnMut(&[f64]) -> Vec<f64>,
    {
        let width = target.width(n);
        let mut values = Vec::with_capacity(grid.node_count() * width);
        for node in 0..grid.node_count() {
            let v = f(&grid.coords(node));
            if v.len() != width {
                return Err(Error::InvalidChart(format!(
                    "node {node} has width {}, expected {width}",
                    v.len()
                )));
            }
            values.extend(v);
        }
        Self::new(grid, n, target, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Intrinsic dimension `m`.
    pub fn m(&self) -> usize {
        self.grid.dim()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn target(&self) -> ChartTarget {
        self.target
    }

    pub fn width(&self) -> usize {
        self.target.width(self.n)
    }

    pub fn node_count(&self) -> usize {
        self.grid.node_count()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn node(&self, i: usize) -> &[f64] {
        let w = self.width();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.width())
    }

    /// Node `i` as a cone point; panics for non-cone charts.
    pub fn cone_point(&self, i: usize) -> ConePoint {
        match self.target {
            ChartTarget::Cone(kind) => {
                ConePoint::new(kind, self.node(i).to_vec()).expect("width checked at construction")
            }
            _ => panic!("chart target is not a cone"),
        }
    }

    /// Indices of nodes violating the target's pointwise invariant
    /// (unit norm for sphere charts, cone membership for cone charts).
    pub fn target_violations(&self, tol: f64) -> Vec<usize> {
        match self.target {
            ChartTarget::Plane => Vec::new(),
            ChartTarget::Sphere => self
                .nodes()
                .enumerate()
                .filter(|(_, z)| {
                    !((z.iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs() <= tol)
                })
                .map(|(i, _)| i)
                .collect(),
            ChartTarget::Cone(_) => (0..self.node_count())
                .filter(|&i| !cone_contains(&self.cone_point(i), tol).pass)
                .collect(),
        }
    }

    /// Applies a linear map nodewise (e.g. a Lorentz matrix to a cone chart).
    pub fn map_linear(&self, m: &DMatrix<f64>) -> Result<GridChart> {
        let w = self.width();
        if m.nrows() != w || m.ncols() != w {
            return Err(Error::DimensionMismatch {
                expected: w,
                found: m.ncols(),
            });
        }
        let mut values = Vec::with_capacity(self.values.len());
        for x in self.nodes() {
            for r in 0..w {
                values.push((0..w).map(|c| m[(r, c)] * x[c]).sum::<f64>());
            }
        }
        GridChart::new(self.grid.clone(), self.n, self.target, values)
    }

    /// Converts every node of a cone chart to another cone.
    pub fn convert_cone(&self, to: ConeKind) -> Result<GridChart> {
        let ChartTarget::Cone(_) = self.target else {
            return Err(Error::InvalidChart("chart target is not a cone".into()));
        };
        let mut values = Vec::with_capacity(self.node_count() * to.ambient_dim(self.n));
        for i in 0..self.node_count() {
            values.extend(convert_unchecked(&self.cone_point(i), to).into_coords());
        }
        GridChart::new(self.grid.clone(), self.n, ChartTarget::Cone(to), values)
    }

    /// `π ∘ φ` for a cone chart.
    pub fn project_to_sphere(&self) -> Result<GridChart> {
        let ChartTarget::Cone(_) = self.target else {
            return Err(Error::InvalidChart("chart target is not a cone".into()));
        };
        let mut values = Vec::with_capacity(self.node_count() * self.n);
        for i in 0..self.node_count() {
            values.extend(project_unchecked(&self.cone_point(i))?.into_inner());
        }
        GridChart::new(self.grid.clone(), self.n, ChartTarget::Sphere, values)
    }

    /// Finite-difference Jacobian: `m` columns of width `width()` per node,
    /// laid out node-major then axis-major.
    pub fn jacobian(&self) -> Vec<f64> {
        let w = self.width();
        let m = self.m();
        let mut jac = vec![0.0; self.node_count() * m * w];
        for node in 0..self.node_count() {
            for axis in 0..m {
                let out = &mut jac[(node * m + axis) * w..(node * m + axis + 1) * w];
                for (src, weight) in self.grid.stencil(node, axis) {
                    if weight == 0.0 {
                        continue;
                    }
                    for (o, x) in out.iter_mut().zip(self.node(src)) {
                        *o += weight * x;
                    }
                }
            }
        }
        jac
    }
}

/// Per-node symmetric `m×m` matrices, stored node-major, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricField {
    m: usize,
    data: Vec<f64>,
}

impl MetricField {
    /// Validates symmetry and positive definiteness at every node.
    pub fn new(m: usize, data: Vec<f64>) -> Result<Self> {
        let field = Self::unchecked(m, data)?;
        for node in 0..field.node_count() {
            let g = field.at(node);
            let scale = g.amax().max(f64::MIN_POSITIVE);
            if (&g - g.transpose()).amax() > 1e-12 * scale {
                return Err(Error::InvalidMetric(format!(
                    "not symmetric at node {node}"
                )));
            }
            if g.cholesky().is_none() {
                return Err(Error::InvalidMetric(format!(
                    "not positive definite at node {node}"
                )));
            }
        }
        Ok(field)
    }

    /// Shape checks only; used for pulled-back forms, which may be degenerate.
    pub fn unchecked(m: usize, data: Vec<f64>) -> Result<Self> {
        if m == 0 || !data.len().is_multiple_of(m * m) {
            return Err(Error::InvalidMetric(format!(
                "{} entries is not a multiple of {m}x{m}",
                data.len()
            )));
        }
        Ok(Self { m, data })
    }

    /// Evaluates `f` at every node's parameter coordinates.
    pub fn from_fn<F>(grid: &Grid, mut f: F) -> Result<Self>
    where
        F: FnMut(&[f64]) -> DMatrix<f64>,
    {
        let m = grid.dim();
        let mut data = Vec::with_capacity(grid.node_count() * m * m);
        for node in 0..grid.node_count() {
            let g = f(&grid.coords(node));
            if g.shape() != (m, m) {
                return Err(Error::InvalidMetric(format!("node {node} is not {m}x{m}")));
            }
            data.extend(g.transpose().iter());
        }
        Self::new(m, data)
    }

    /// The same matrix at every node.
    pub fn constant(grid: &Grid, g: &DMatrix<f64>) -> Result<Self> {
        Self::from_fn(grid, |_| g.clone())
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn node_count(&self) -> usize {
        self.data.len() / (self.m * self.m)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn node(&self, i: usize) -> &[f64] {
        let s = self.m * self.m;
        &self.data[i * s..(i + 1) * s]
    }

    pub fn at(&self, i: usize) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.m, self.m, self.node(i))
    }
}

fn frobenius(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Nodewise `‖a − c·b‖_F / ‖c·b‖_F`, maximised over nodes, returning
/// `(max, argmax)`.
fn max_relative_deviation(
    a: &MetricField,
    b: &MetricField,
    scale: impl Fn(usize) -> f64,
) -> (f64, usize) {
    let mut worst = (0.0_f64, 0);
    for node in 0..a.node_count() {
        let c = scale(node);
        let diff: Vec<f64> = a
            .node(node)
            .iter()
            .zip(b.node(node))
            .map(|(x, y)| x - c * y)
            .collect();
        let rel = frobenius(&diff) / (c.abs() * frobenius(b.node(node)));
        if !(rel <= worst.0) {
            worst = (rel, node);
        }
    }
    worst
}

fn check_shapes(chart: &GridChart, g: &MetricField) -> Result<()> {
    if g.m() != chart.m() || g.node_count() != chart.node_count() {
        return Err(Error::InvalidMetric(format!(
            "metric has {} nodes of size {}, chart has {} nodes of dimension {}",
            g.node_count(),
            g.m(),
            chart.node_count(),
            chart.m()
        )));
    }
    Ok(())
}

/// `⟨∂ᵢφ, ∂ⱼφ⟩_s` per node, with derivatives by finite differences.
pub fn pullback_metric(chart: &GridChart, sig: MetricSignature) -> Result<MetricField> {
    let w = chart.width();
    if sig.dim() != w {
        return Err(Error::DimensionMismatch {
            expected: w,
            found: sig.dim(),
        });
    }
    let m = chart.m();
    let jac = chart.jacobian();
    let mut data = Vec::with_capacity(chart.node_count() * m * m);
    for node in 0..chart.node_count() {
        let cols = &jac[node * m * w..(node + 1) * m * w];
        for i in 0..m {
            for j in 0..m {
                data.push(inner_unchecked(
                    &cols[i * w..(i + 1) * w],
                    &cols[j * w..(j + 1) * w],
                    sig.minus(),
                ));
            }
        }
    }
    MetricField::unchecked(m, data)
}

/// Result of [`extract_conformal_factor`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConformalFactor {
    /// `λ` with `ψ* g_S = λ⁻² g`, per node.
    pub lambda: Vec<f64>,
    /// `max ‖P − c g‖_F / ‖g‖_F` where `P = ψ* g_S` and `c = λ⁻²`.
    pub residual: f64,
}

/// Finds `λ` with `ψ* g_S ≈ λ⁻² g` by nodewise Frobenius projection
/// `c = ⟨P, g⟩ / ⟨g, g⟩`, `λ = c^{−1/2}`.
pub fn extract_conformal_factor(
    psi: &GridChart,
    g: &MetricField,
    tol: f64,
) -> Result<ConformalFactor> {
    if psi.target() != ChartTarget::Sphere {
        return Err(Error::InvalidChart("expected a sphere-valued chart".into()));
    }
    if let Some(&bad) = psi.target_violations(CONE_TOLERANCE).first() {
        return Err(Error::InvalidChart(format!(
            "node {bad} is not a unit vector"
        )));
    }
    check_shapes(psi, g)?;
    let p = pullback_metric(psi, MetricSignature::euclidean(psi.n()))?;
    let mut lambda = Vec::with_capacity(psi.node_count());
    let mut residual: f64 = 0.0;
    for node in 0..psi.node_count() {
        let pn = p.node(node);
        let gn = g.node(node);
        let gg: f64 = gn.iter().map(|x| x * x).sum();
        let c = pn.iter().zip(gn).map(|(a, b)| a * b).sum::<f64>() / gg;
        if !(c > 0.0) {
            return Err(Error::NonPositiveFactor { node, value: c });
        }
        let diff: Vec<f64> = pn.iter().zip(gn).map(|(a, b)| a - c * b).collect();
        residual = residual.max(frobenius(&diff) / gg.sqrt());
        lambda.push(c.powf(-0.5));
    }
    if !(residual <= tol) {
        return Err(Error::NotConformal {
            residual,
            tolerance: tol,
        });
    }
    Ok(ConformalFactor { lambda, residual })
}

/// `φ = (λ, λψ)`, converted to the requested cone.
pub fn cone_lift(psi: &GridChart, lambda: &[f64], kind: ConeKind) -> Result<GridChart> {
    if psi.target() != ChartTarget::Sphere {
        return Err(Error::InvalidChart("expected a sphere-valued chart".into()));
    }
    if lambda.len() != psi.node_count() {
        return Err(Error::DimensionMismatch {
            expected: psi.node_count(),
            found: lambda.len(),
        });
    }
    if let Some((node, &value)) = lambda.iter().enumerate().find(|(_, l)| !(**l > 0.0)) {
        return Err(Error::NonPositiveFactor { node, value });
    }
    let mut values = Vec::with_capacity(psi.node_count() * kind.ambient_dim(psi.n()));
    for (z, &l) in psi.nodes().zip(lambda) {
        let mut coords = Vec::with_capacity(z.len() + 1);
        coords.push(l);
        coords.extend(z.iter().map(|x| l * x));
        let p = ConePoint::new(ConeKind::Minkowski, coords)?;
        values.extend(convert_unchecked(&p, kind).into_coords());
    }
    GridChart::new(psi.grid().clone(), psi.n(), ChartTarget::Cone(kind), values)
}

/// Outcome of [`verify_isometric_immersion`].
#[derive(Debug, Clone, PartialEq)]
pub struct ImmersionReport {
    /// `max ‖φ*⟨,⟩ − g‖_F / ‖g‖_F` over nodes.
    pub max_deviation: f64,
    pub worst_node: usize,
    /// Nodes failing cone membership.
    pub cone_violations: Vec<usize>,
    /// Smallest Jacobian singular value over all nodes.
    pub min_singular_value: f64,
    pub full_rank: bool,
    pub tolerance: f64,
    pub pass: bool,
}

/// Checks that a cone chart pulls the ambient form back to `g`.
pub fn verify_isometric_immersion(
    chart: &GridChart,
    g: &MetricField,
    tol: f64,
) -> Result<ImmersionReport> {
    let ChartTarget::Cone(kind) = chart.target() else {
        return Err(Error::InvalidChart("expected a cone-valued chart".into()));
    };
    check_shapes(chart, g)?;
    let p = pullback_metric(chart, kind.signature(chart.n()))?;
    let (max_deviation, worst_node) = max_relative_deviation(&p, g, |_| 1.0);
    let cone_violations = chart.target_violations(CONE_TOLERANCE);

    let m = chart.m();
    let w = chart.width();
    let jac = chart.jacobian();
    let mut min_sv = f64::INFINITY;
    for node in 0..chart.node_count() {
        let j = DMatrix::from_column_slice(w, m, &jac[node * m * w..(node + 1) * m * w]);
        min_sv = min_sv.min(j.singular_values().min());
    }
    Ok(ImmersionReport {
        pass: max_deviation <= tol && cone_violations.is_empty(),
        max_deviation,
        worst_node,
        cone_violations,
        min_singular_value: min_sv,
        full_rank: min_sv >= RANK_THRESHOLD,
        tolerance: tol,
    })
}

/// Max nodewise relative deviation between `(π∘φ)* g_S` and `t⁻² g`.
pub fn verify_lemma1(chart: &GridChart, g: &MetricField) -> Result<f64> {
    let ChartTarget::Cone(_) = chart.target() else {
        return Err(Error::InvalidChart("expected a cone-valued chart".into()));
    };
    check_shapes(chart, g)?;
    let sphere = chart.project_to_sphere()?;
    let p = pullback_metric(&sphere, MetricSignature::euclidean(chart.n()))?;
    let t: Vec<f64> = (0..chart.node_count())
        .map(|i| chart.cone_point(i).time())
        .collect();
    Ok(max_relative_deviation(&p, g, |i| t[i].powi(-2)).0)
}
