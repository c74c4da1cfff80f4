//! JSON file formats.
//!
//! Residuals are written as decimal strings with 17 significant digits so that
//! reports compare bit-for-bit across languages.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::chart::{ChartTarget, Grid, GridChart, ImmersionReport, MetricField};
use crate::cone::{quadric_residual, ConePoint};
use crate::conformal::{ConformalEstimate, SpherePoint};
use crate::error::{Error, Result};
use crate::lorentz::{ConeKind, ValidityReport};
use crate::rigidity::{
    ConeSelfMap, CorrespondenceSet, ExtensionReport, RecoveryReport, RecoveryStatus,
};

/// `{:.16e}`: 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_real(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

pub fn parse_real(s: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::InvalidInput(format!("not a decimal number: {s:?}")))
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(field: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(Error::InvalidInput(format!(
            "{field}: ragged or empty matrix"
        )));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

/// `{"n": int, "entries": [[row-major reals]]}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixFile {
    pub n: usize,
    pub entries: Vec<Vec<f64>>,
}

impl MatrixFile {
    /// `n` is the spatial dimension, so a Lorentz matrix is `(n+1)×(n+1)`.
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        Self {
            n: m.nrows().saturating_sub(1),
            entries: rows(m),
        }
    }

    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        let m = from_rows("entries", &self.entries)?;
        if m.nrows() != self.n + 1 || m.ncols() != self.n + 1 {
            return Err(Error::InvalidInput(format!(
                "entries: expected {0}x{0} for n={1}, got {2}x{3}",
                self.n + 1,
                self.n,
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityReportFile {
    pub residual_scalar: String,
    pub residual_mixed: String,
    pub residual_block: String,
    pub residual_global: String,
    pub orthochronous: bool,
    pub det_sign: i8,
    pub pass: bool,
}

impl From<&ValidityReport> for ValidityReportFile {
    fn from(r: &ValidityReport) -> Self {
        Self {
            residual_scalar: fmt_real(r.residual_scalar),
            residual_mixed: fmt_real(r.residual_mixed),
            residual_block: fmt_real(r.residual_block),
            residual_global: fmt_real(r.residual_global),
            orthochronous: r.orthochronous,
            det_sign: r.det_sign,
            pass: r.pass,
        }
    }
}

/// `{"n": int, "points": [[unit vectors]]}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereSamplesFile {
    pub n: usize,
    pub points: Vec<Vec<f64>>,
}

impl SphereSamplesFile {
    pub fn from_points(n: usize, points: &[SpherePoint]) -> Self {
        Self {
            n,
            points: points.iter().map(|p| p.coords().to_vec()).collect(),
        }
    }

    pub fn to_points(&self) -> Result<Vec<SpherePoint>> {
        self.points
            .iter()
            .enumerate()
            .map(|(i, z)| sphere_point(self.n, z, &format!("points[{i}]")))
            .collect()
    }
}

fn sphere_point(n: usize, z: &[f64], field: &str) -> Result<SpherePoint> {
    if z.len() != n {
        return Err(Error::InvalidInput(format!(
            "{field}: expected {n} coordinates, got {}",
            z.len()
        )));
    }
    SpherePoint::new(z.to_vec()).map_err(|e| Error::InvalidInput(format!("{field}: {e}")))
}

/// `{"n": int, "pairs": [[[z], [z̃]], …]}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpherePairsFile {
    pub n: usize,
    pub pairs: Vec<(Vec<f64>, Vec<f64>)>,
}

impl SpherePairsFile {
    pub fn from_pairs(n: usize, pairs: &[(SpherePoint, SpherePoint)]) -> Self {
        Self {
            n,
            pairs: pairs
                .iter()
                .map(|(a, b)| (a.coords().to_vec(), b.coords().to_vec()))
                .collect(),
        }
    }

    pub fn to_pairs(&self) -> Result<Vec<(SpherePoint, SpherePoint)>> {
        self.pairs
            .iter()
            .enumerate()
            .map(|(i, (a, b))| {
                Ok((
                    sphere_point(self.n, a, &format!("pairs[{i}][0]"))?,
                    sphere_point(self.n, b, &format!("pairs[{i}][1]"))?,
                ))
            })
            .collect()
    }
}

/// Report for sphere-pair estimation; mirrors [`RecoveryReportFile`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformalEstimateFile {
    pub status: String,
    pub tau: Option<Vec<Vec<f64>>>,
    pub residual: String,
    pub sigma_min: String,
    pub sigma_second: String,
    pub sigma_max: String,
    pub span_rank: usize,
}

impl From<&ConformalEstimate> for ConformalEstimateFile {
    fn from(e: &ConformalEstimate) -> Self {
        Self {
            status: e.status.as_str().to_string(),
            tau: e
                .map
                .as_ref()
                .filter(|_| e.status == RecoveryStatus::Unique)
                .map(|m| rows(m.lorentz().matrix())),
            residual: fmt_real(e.residual),
            sigma_min: fmt_real(e.sigma_min),
            sigma_second: fmt_real(e.sigma_second),
            sigma_max: fmt_real(e.sigma_max),
            span_rank: e.span_rank,
        }
    }
}

/// Chart JSON: `{"m","n","target","k","shape","spacing","origin","periodic","values","metric"?}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartFile {
    pub m: usize,
    pub n: usize,
    pub target: String,
    #[serde(default)]
    pub k: i64,
    pub shape: Vec<usize>,
    pub spacing: Vec<f64>,
    pub origin: Vec<f64>,
    pub periodic: Vec<bool>,
    pub values: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<Vec<Vec<f64>>>,
}

impl ChartFile {
    pub fn from_chart(chart: &GridChart, metric: Option<&MetricField>) -> Self {
        let (target, k) = match chart.target() {
            ChartTarget::Sphere => ("sphere", 0),
            ChartTarget::Cone(kind) => ("cone", kind.k() as i64),
            ChartTarget::Plane => ("plane", 0),
        };
        let grid = chart.grid();
        Self {
            m: chart.m(),
            n: chart.n(),
            target: target.to_string(),
            k,
            shape: grid.shape.clone(),
            spacing: grid.spacing.clone(),
            origin: grid.origin.clone(),
            periodic: grid.periodic.clone(),
            values: chart.nodes().map(<[f64]>::to_vec).collect(),
            metric: metric.map(metric_rows),
        }
    }

    pub fn to_chart(&self) -> Result<GridChart> {
        let target = match self.target.as_str() {
            "sphere" => ChartTarget::Sphere,
            "cone" => ChartTarget::Cone(
                ConeKind::from_k(self.k).map_err(|e| Error::InvalidInput(format!("k: {e}")))?,
            ),
            "plane" => ChartTarget::Plane,
            other => {
                return Err(Error::InvalidInput(format!(
                    "target: expected \"sphere\", \"cone\" or \"plane\", got {other:?}"
                )))
            }
        };
        if self.shape.len() != self.m {
            return Err(Error::InvalidInput(format!(
                "shape: expected {} axes for m={}, got {}",
                self.m,
                self.m,
                self.shape.len()
            )));
        }
        let grid = Grid::new(
            self.shape.clone(),
            self.spacing.clone(),
            self.origin.clone(),
            self.periodic.clone(),
        )
        .map_err(|e| Error::InvalidInput(format!("shape/spacing/origin/periodic: {e}")))?;
        let width = target.width(self.n);
        if let Some(i) = self.values.iter().position(|v| v.len() != width) {
            return Err(Error::InvalidInput(format!(
                "values[{i}]: expected {width} entries, got {}",
                self.values[i].len()
            )));
        }
        let flat = self.values.concat();
        GridChart::new(grid, self.n, target, flat)
            .map_err(|e| Error::InvalidInput(format!("values: {e}")))
    }

    pub fn to_metric(&self) -> Result<Option<MetricField>> {
        self.metric
            .as_ref()
            .map(|rows| metric_from_rows(self.m, rows))
            .transpose()
    }
}

fn metric_rows(g: &MetricField) -> Vec<Vec<f64>> {
    (0..g.node_count()).map(|i| g.node(i).to_vec()).collect()
}

fn metric_from_rows(m: usize, rows: &[Vec<f64>]) -> Result<MetricField> {
    if let Some(i) = rows.iter().position(|r| r.len() != m * m) {
        return Err(Error::InvalidInput(format!(
            "metric[{i}]: expected {} entries, got {}",
            m * m,
            rows[i].len()
        )));
    }
    MetricField::new(m, rows.concat()).map_err(|e| Error::InvalidInput(format!("metric: {e}")))
}

/// Standalone metric: `{"m": int, "metric": [[m×m row-major per node]]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricFile {
    pub m: usize,
    pub metric: Vec<Vec<f64>>,
}

impl MetricFile {
    pub fn from_metric(g: &MetricField) -> Self {
        Self {
            m: g.m(),
            metric: metric_rows(g),
        }
    }

    pub fn to_metric(&self) -> Result<MetricField> {
        metric_from_rows(self.m, &self.metric)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImmersionReportFile {
    pub pass: bool,
    pub max_deviation: String,
    pub worst_node: usize,
    pub cone_violations: Vec<usize>,
    pub min_singular_value: String,
    pub full_rank: bool,
    pub tolerance: String,
}

impl From<&ImmersionReport> for ImmersionReportFile {
    fn from(r: &ImmersionReport) -> Self {
        Self {
            pass: r.pass,
            max_deviation: fmt_real(r.max_deviation),
            worst_node: r.worst_node,
            cone_violations: r.cone_violations.clone(),
            min_singular_value: fmt_real(r.min_singular_value),
            full_rank: r.full_rank,
            tolerance: fmt_real(r.tolerance),
        }
    }
}

/// `{"k": 0|1|-1, "n": int, "pairs": [[[x], [y]], …]}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrespondenceFile {
    pub k: i64,
    pub n: usize,
    pub pairs: Vec<(Vec<f64>, Vec<f64>)>,
}

impl CorrespondenceFile {
    pub fn from_set(set: &CorrespondenceSet) -> Self {
        Self {
            k: set.kind().k() as i64,
            n: set.n(),
            pairs: set
                .pairs()
                .iter()
                .map(|(a, b)| (a.coords().to_vec(), b.coords().to_vec()))
                .collect(),
        }
    }

    pub fn to_set(&self) -> Result<CorrespondenceSet> {
        let kind = ConeKind::from_k(self.k).map_err(|e| Error::InvalidInput(format!("k: {e}")))?;
        let width = kind.ambient_dim(self.n);
        let mut pairs = Vec::with_capacity(self.pairs.len());
        for (i, (a, b)) in self.pairs.iter().enumerate() {
            for (side, v) in [(0, a), (1, b)] {
                if v.len() != width {
                    return Err(Error::InvalidInput(format!(
                        "pairs[{i}][{side}]: expected {width} coordinates, got {}",
                        v.len()
                    )));
                }
            }
            pairs.push((
                ConePoint::new(kind, a.clone())?,
                ConePoint::new(kind, b.clone())?,
            ));
        }
        // membership failures stay InvalidCorrespondence: the file is well formed
        CorrespondenceSet::new(kind, pairs)
    }
}

/// `{"status", "tau", "tau_embedded"?, "max_point_residual", "span_rank",
/// "condition_estimate", "near_miss"}` plus the Lorentz residuals of the fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReportFile {
    pub status: String,
    pub tau: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_embedded: Option<Vec<Vec<f64>>>,
    pub max_point_residual: String,
    pub span_rank: usize,
    pub condition_estimate: String,
    pub near_miss: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lorentz: Option<ValidityReportFile>,
}

impl From<&RecoveryReport> for RecoveryReportFile {
    fn from(r: &RecoveryReport) -> Self {
        Self {
            status: r.status.as_str().to_string(),
            tau: r.tau.as_ref().map(|t| rows(t.matrix())),
            tau_embedded: r.tau_embedded.as_ref().map(|t| rows(t.matrix())),
            max_point_residual: fmt_real(r.max_point_residual),
            span_rank: r.span_rank,
            condition_estimate: fmt_real(r.condition_estimate),
            near_miss: r.near_miss,
            lorentz: r.lorentz_residuals.as_ref().map(ValidityReportFile::from),
        }
    }
}

/// Self-map samples: `images[level][node] = [t′, z′…]` over `t_levels × sphere`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfMapFile {
    #[serde(default)]
    pub k: i64,
    pub n: usize,
    pub t_levels: Vec<f64>,
    pub sphere: ChartFile,
    pub images: Vec<Vec<Vec<f64>>>,
}

impl SelfMapFile {
    pub fn from_selfmap(map: &ConeSelfMap) -> Self {
        let w = map.n() + 1;
        Self {
            k: map.kind.k() as i64,
            n: map.n(),
            t_levels: map.t_levels.clone(),
            sphere: ChartFile::from_chart(&map.sphere, None),
            images: map
                .images
                .iter()
                .map(|level| level.chunks_exact(w).map(<[f64]>::to_vec).collect())
                .collect(),
        }
    }

    pub fn to_selfmap(&self) -> Result<ConeSelfMap> {
        let kind = ConeKind::from_k(self.k).map_err(|e| Error::InvalidInput(format!("k: {e}")))?;
        let sphere = self.sphere.to_chart()?;
        if sphere.n() != self.n {
            return Err(Error::InvalidInput(format!(
                "sphere.n: expected {}, got {}",
                self.n,
                sphere.n()
            )));
        }
        let w = self.n + 1;
        for (l, level) in self.images.iter().enumerate() {
            if let Some(i) = level.iter().position(|v| v.len() != w) {
                return Err(Error::InvalidInput(format!(
                    "images[{l}][{i}]: expected {w} entries"
                )));
            }
        }
        let images = self.images.iter().map(|l| l.concat()).collect();
        ConeSelfMap::new(kind, self.t_levels.clone(), sphere, images)
            .map_err(|e| Error::InvalidInput(format!("images/t_levels: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtensionReportFile {
    pub status: String,
    pub rejection: Option<String>,
    pub t_variation: String,
    pub scaling_residual: Option<String>,
    pub f_residual: Option<String>,
    pub recovery: Option<RecoveryReportFile>,
}

impl From<&ExtensionReport> for ExtensionReportFile {
    fn from(r: &ExtensionReport) -> Self {
        Self {
            status: r.status().as_str().to_string(),
            rejection: r.rejection.map(|x| format!("{x:?}")),
            t_variation: fmt_real(r.t_variation),
            scaling_residual: r.scaling_residual.map(fmt_real),
            f_residual: r.f_residual.map(fmt_real),
            recovery: r.recovery.as_ref().map(RecoveryReportFile::from),
        }
    }
}

/// Cone points: `{"k", "n", "points", "residuals"?}`; `residuals` are the
/// ambient quadric residuals, written on output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConePointsFile {
    pub k: i64,
    pub n: usize,
    pub points: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residuals: Option<Vec<String>>,
}

impl ConePointsFile {
    pub fn from_points(kind: ConeKind, n: usize, points: &[ConePoint]) -> Self {
        Self {
            k: kind.k() as i64,
            n,
            points: points.iter().map(|p| p.coords().to_vec()).collect(),
            residuals: Some(
                points
                    .iter()
                    .map(|p| fmt_real(quadric_residual(p)))
                    .collect(),
            ),
        }
    }

    /// Unvalidated points (only coordinate counts are checked).
    pub fn to_points(&self) -> Result<(ConeKind, Vec<ConePoint>)> {
        let kind = ConeKind::from_k(self.k).map_err(|e| Error::InvalidInput(format!("k: {e}")))?;
        let width = kind.ambient_dim(self.n);
        let points = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                if p.len() != width {
                    return Err(Error::InvalidInput(format!(
                        "points[{i}]: expected {width} coordinates, got {}",
                        p.len()
                    )));
                }
                ConePoint::new(kind, p.clone())
            })
            .collect::<Result<_>>()?;
        Ok((kind, points))
    }
}
