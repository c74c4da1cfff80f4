//! Points on the future light cones `L₊^{(k)}`.
//!
//! * `k = 0`: `{(t, x) ∈ ℝ^{1,n} : −t² + ‖x‖² = 0, t > 0}`
//! * `k = +1`: `{(t, x, x_{n+1}) ∈ ℝ^{1,n+1} : −t² + ‖x‖² = 0, x_{n+1} = 1, t > 0}`
//! * `k = −1`: `{(t₁, t₂, x) ∈ ℝ^{2,n} : t₁ = 1, −t₂² + ‖x‖² = 0, t₂ > 0}`
//!
//! The two curved cones are flat slices of the de Sitter / anti-de Sitter
//! quadrics and are identified with the Minkowski cone by inserting or
//! removing the constant slice coordinate.

use crate::conformal::SpherePoint;
use crate::error::{Error, Result};
use crate::lorentz::ConeKind;

/// Default tolerance for cone membership.
pub const CONE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct ConePoint {
    kind: ConeKind,
    coords: Vec<f64>,
}

/// Constraint residuals of a candidate cone point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeMembership {
    /// `|−t² + ‖x‖²| / max(1, t²)`: absolute for small points, relative for
    /// large ones, since the cone is invariant under positive scaling.
    pub cone: f64,
    /// Distance of the slice coordinate from 1 (always 0 for `k = 0`).
    pub slice: f64,
    /// The time component that must be positive.
    pub time: f64,
    pub pass: bool,
}

impl ConePoint {
    /// Wraps coordinates without checking the cone constraints (only the
    /// coordinate count). See [`cone_contains`].
    pub fn new(kind: ConeKind, coords: Vec<f64>) -> Result<Self> {
        let min = match kind {
            ConeKind::Minkowski => 2,
            _ => 3,
        };
        if coords.len() < min {
            return Err(Error::DimensionMismatch {
                expected: min,
                found: coords.len(),
            });
        }
        Ok(Self { kind, coords })
    }

    /// Wraps and validates at `tol`.
    pub fn checked(kind: ConeKind, coords: Vec<f64>, tol: f64) -> Result<Self> {
        let p = Self::new(kind, coords)?;
        p.validate(tol)?;
        Ok(p)
    }

    /// `ι(t, z) = (t, t z)` on the Minkowski cone.
    pub fn from_ray(t: f64, z: &SpherePoint) -> Self {
        let mut coords = Vec::with_capacity(z.dim() + 1);
        coords.push(t);
        coords.extend(z.coords().iter().map(|x| t * x));
        Self {
            kind: ConeKind::Minkowski,
            coords,
        }
    }

    pub fn kind(&self) -> ConeKind {
        self.kind
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    /// Spatial dimension `n` of the underlying `ℝ^{1,n}`.
    pub fn n(&self) -> usize {
        match self.kind {
            ConeKind::Minkowski => self.coords.len() - 1,
            _ => self.coords.len() - 2,
        }
    }

    /// The time coordinate `t` of the Minkowski representative.
    pub fn time(&self) -> f64 {
        match self.kind {
            ConeKind::AntiDeSitter => self.coords[1],
            _ => self.coords[0],
        }
    }

    fn validate(&self, tol: f64) -> Result<()> {
        let m = cone_contains(self, tol);
        if !m.pass {
            return Err(Error::NotOnCone {
                kind: self.kind.k(),
                cone: m.cone,
                slice: m.slice,
                time: m.time,
            });
        }
        Ok(())
    }

    /// The `(t, x)` part, i.e. the Minkowski coordinates without the slice entry.
    pub(crate) fn minkowski_part(&self) -> &[f64] {
        match self.kind {
            ConeKind::Minkowski => &self.coords,
            ConeKind::DeSitter => &self.coords[..self.coords.len() - 1],
            ConeKind::AntiDeSitter => &self.coords[1..],
        }
    }
}

/// Evaluates the `k`-specific cone constraints.
pub fn cone_contains(p: &ConePoint, tol: f64) -> ConeMembership {
    let txs = p.minkowski_part();
    let t = txs[0];
    let x2: f64 = txs[1..].iter().map(|x| x * x).sum();
    let cone = (x2 - t * t).abs() / (t * t).max(1.0);
    let slice = match p.kind {
        ConeKind::Minkowski => 0.0,
        ConeKind::DeSitter => (p.coords[p.coords.len() - 1] - 1.0).abs(),
        ConeKind::AntiDeSitter => (p.coords[0] - 1.0).abs(),
    };
    ConeMembership {
        cone,
        slice,
        time: t,
        pass: cone <= tol && slice <= tol && t > 0.0,
    }
}

/// Moves a valid point between cones: `(t,x) ↔ (t,x,1)` for `k = +1` and
/// `(t,x) ↔ (1,t,x)` for `k = −1`. Exact (pure coordinate insertion/removal).
pub fn cone_convert(p: &ConePoint, to: ConeKind) -> Result<ConePoint> {
    p.validate(CONE_TOLERANCE)?;
    Ok(convert_unchecked(p, to))
}

pub(crate) fn convert_unchecked(p: &ConePoint, to: ConeKind) -> ConePoint {
    if p.kind == to {
        return p.clone();
    }
    let base = p.minkowski_part();
    let mut coords = Vec::with_capacity(base.len() + 1);
    match to {
        ConeKind::Minkowski => coords.extend_from_slice(base),
        ConeKind::DeSitter => {
            coords.extend_from_slice(base);
            coords.push(1.0);
        }
        ConeKind::AntiDeSitter => {
            coords.push(1.0);
            coords.extend_from_slice(base);
        }
    }
    ConePoint { kind: to, coords }
}

/// `π(t, x) = x / t`, the null ray through the point.
pub fn cone_project(p: &ConePoint) -> Result<SpherePoint> {
    p.validate(CONE_TOLERANCE)?;
    project_unchecked(p)
}

pub(crate) fn project_unchecked(p: &ConePoint) -> Result<SpherePoint> {
    let txs = p.minkowski_part();
    let t = txs[0];
    SpherePoint::normalized(txs[1..].iter().map(|x| x / t).collect())
}

/// Residual of the ambient quadric the converted point lives on:
/// `−t² + ‖x‖²` for `k = 0`, `−t² + ‖x‖² + x_{n+1}² − 1` for dS,
/// `−t₁² − t₂² + ‖x‖² + 1` for AdS.
pub fn quadric_residual(p: &ConePoint) -> f64 {
    let c = &p.coords;
    match p.kind {
        ConeKind::Minkowski => -c[0] * c[0] + c[1..].iter().map(|x| x * x).sum::<f64>(),
        ConeKind::DeSitter => -c[0] * c[0] + c[1..].iter().map(|x| x * x).sum::<f64>() - 1.0,
        ConeKind::AntiDeSitter => {
            -c[0] * c[0] - c[1] * c[1] + c[2..].iter().map(|x| x * x).sum::<f64>() + 1.0
        }
    }
}
