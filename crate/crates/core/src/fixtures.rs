//! Synthetic charts and sample sets with known answers.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chart::{cone_lift, ChartTarget, Grid, GridChart, MetricField};
use crate::cone::ConePoint;
use crate::conformal::{random_conformal, random_unit, ConformalMap, SpherePoint};
use crate::error::Result;
use crate::lorentz::{ConeKind, LorentzMap};
use crate::rigidity::ConeSelfMap;

/// The two immersions of the radius-2 circle into `L₊ ⊂ ℝ^{1,2}`:
/// `φ₁(θ) = (2, 2cosθ, 2sinθ)`, `φ₂(θ) = (1, cos2θ, sin2θ)`, and `g = 4dθ²`.
pub fn circle_pair(nodes: usize) -> Result<(GridChart, GridChart, MetricField)> {
    let grid = Grid::circle(nodes)?;
    let target = ChartTarget::Cone(ConeKind::Minkowski);
    let phi1 = GridChart::from_fn(grid.clone(), 2, target, |y| {
        vec![2.0, 2.0 * y[0].cos(), 2.0 * y[0].sin()]
    })?;
    let phi2 = GridChart::from_fn(grid.clone(), 2, target, |y| {
        vec![1.0, (2.0 * y[0]).cos(), (2.0 * y[0]).sin()]
    })?;
    let g = MetricField::constant(&grid, &DMatrix::from_element(1, 1, 4.0))?;
    Ok((phi1, phi2, g))
}

/// `θ_i = 2πi/nodes`, matching [`Grid::circle`].
pub fn circle_angles(nodes: usize) -> Vec<f64> {
    (0..nodes).map(|i| TAU * i as f64 / nodes as f64).collect()
}

/// Stereographic coordinates `w(y) ∈ ℝ^{n-1}` of an `m`-dimensional patch and
/// their Jacobian. The first `m` coordinates are `y`; any further ones are
/// distinct monomials of degree ≥ 2 so that the patch spans the whole sphere's
/// ambient space instead of a great subsphere.
fn patch_plane(y: &[f64], n: usize) -> (Vec<f64>, DMatrix<f64>) {
    let m = y.len();
    let k = n - 1;
    let mut w = vec![0.0; k];
    let mut jac = DMatrix::zeros(k, m);
    for j in 0..m.min(k) {
        w[j] = y[j];
        jac[(j, j)] = 1.0;
    }
    for (q, mono) in monomials(m, k.saturating_sub(m)).into_iter().enumerate() {
        let j = m + q;
        let c = 0.4 + 0.1 * q as f64;
        w[j] = c * mono.iter().map(|&a| y[a]).product::<f64>();
        for (pos, &a) in mono.iter().enumerate() {
            let rest: f64 = mono
                .iter()
                .enumerate()
                .filter(|&(p, _)| p != pos)
                .map(|(_, &b)| y[b])
                .product();
            jac[(j, a)] += c * rest;
        }
    }
    (w, jac)
}

/// The first `count` non-decreasing index tuples over `0..m`, by degree from 2.
fn monomials(m: usize, count: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(count);
    let mut degree = 2;
    while out.len() < count {
        let mut idx = vec![0; degree];
        loop {
            out.push(idx.clone());
            if out.len() == count {
                return out;
            }
            // next non-decreasing tuple
            let Some(p) = (0..degree).rev().find(|&p| idx[p] + 1 < m) else {
                break;
            };
            let v = idx[p] + 1;
            idx[p..].iter_mut().for_each(|x| *x = v);
        }
        degree += 1;
    }
    out
}

/// A patch of `S^{n-1}` parametrised through inverse stereographic projection
/// over the cube `[−half_width, half_width]^m`, with its exact round metric.
pub fn sphere_patch(
    n: usize,
    m: usize,
    nodes: usize,
    half_width: f64,
) -> Result<(GridChart, MetricField)> {
    assert!(
        m >= 1 && m < n,
        "patch dimension must satisfy 1 <= m <= n-1"
    );
    let grid = Grid::cube(m, nodes, -half_width, half_width)?;
    let psi = GridChart::from_fn(grid.clone(), n, ChartTarget::Sphere, |y| {
        let (w, _) = patch_plane(y, n);
        let r2: f64 = w.iter().map(|x| x * x).sum();
        let mut z = Vec::with_capacity(n);
        z.push((r2 - 1.0) / (r2 + 1.0));
        z.extend(w.iter().map(|x| 2.0 * x / (r2 + 1.0)));
        z
    })?;
    let g = MetricField::from_fn(&grid, |y| round_metric(y, n))?;
    Ok((psi, g))
}

fn round_metric(y: &[f64], n: usize) -> DMatrix<f64> {
    let (w, jac) = patch_plane(y, n);
    let r2: f64 = w.iter().map(|x| x * x).sum();
    let conf = 4.0 / ((1.0 + r2) * (1.0 + r2));
    jac.transpose() * jac * conf
}

/// Smooth positive conformal factor with a few random coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorField {
    pub base: f64,
    pub coeffs: Vec<f64>,
}

impl FactorField {
    pub fn random<R: Rng>(rng: &mut R, m: usize) -> Self {
        Self {
            base: rng.random_range(0.8..1.6),
            coeffs: (0..m).map(|_| rng.random_range(-0.3..0.3)).collect(),
        }
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        let lin: f64 = self.coeffs.iter().zip(y).map(|(c, v)| c * v).sum();
        self.base * lin.exp()
    }
}

/// A conformally flat chart lifted to the cone: `φ = (λ, λψ)` over a sphere
/// patch, together with the exact metric `g = λ² ψ* g_S` it is isometric for.
pub fn lifted_patch(
    n: usize,
    m: usize,
    nodes: usize,
    half_width: f64,
    factor: &FactorField,
    kind: ConeKind,
) -> Result<(GridChart, MetricField)> {
    let (psi, _) = sphere_patch(n, m, nodes, half_width)?;
    let grid = psi.grid().clone();
    let lambda: Vec<f64> = (0..grid.node_count())
        .map(|i| factor.eval(&grid.coords(i)))
        .collect();
    let chart = cone_lift(&psi, &lambda, kind)?;
    let g = MetricField::from_fn(&grid, |y| {
        let l = factor.eval(y);
        round_metric(y, n) * (l * l)
    })?;
    Ok((chart, g))
}

/// A random `τ₀` and two cone charts with `chart2 = τ₀ · chart1`.
#[derive(Debug, Clone)]
pub struct TauPair {
    pub tau: LorentzMap,
    pub chart1: GridChart,
    pub chart2: GridChart,
    pub metric: MetricField,
}

pub fn tau_pair(seed: u64, n: usize, m: usize, nodes: usize, steps: usize) -> Result<TauPair> {
    let tau = random_conformal(n, seed, steps, 2.0).into_lorentz();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let factor = FactorField::random(&mut rng, m);
    let (chart1, metric) = lifted_patch(n, m, nodes, 0.25, &factor, ConeKind::Minkowski)?;
    let chart2 = chart1.map_linear(tau.matrix())?;
    Ok(TauPair {
        tau,
        chart1,
        chart2,
        metric,
    })
}

/// `count` random Minkowski cone points with `t ∈ [0.5, 2]`.
pub fn random_cone_points<R: Rng>(rng: &mut R, n: usize, count: usize) -> Vec<ConePoint> {
    (0..count)
        .map(|_| {
            let z = SpherePoint::new(random_unit(rng, n)).expect("unit by construction");
            ConePoint::from_ray(rng.random_range(0.5..2.0), &z)
        })
        .collect()
}

/// Half-width of the sphere patch used by the self-map fixtures. Random maps
/// can distort the sphere strongly, so the patch is kept small enough for the
/// finite-difference scaling check to resolve them.
pub const SELFMAP_HALF_WIDTH: f64 = 0.05;

/// Cone self-map sampled from a Lorentz map on `levels` t-values in `[0.5, 2]`
/// over a 2-d sphere patch.
pub fn lorentz_selfmap(
    tau: &LorentzMap,
    kind: ConeKind,
    levels: usize,
    nodes: usize,
) -> Result<ConeSelfMap> {
    let (sphere, _) = sphere_patch(tau.n(), 2, nodes, SELFMAP_HALF_WIDTH)?;
    ConeSelfMap::from_lorentz(kind, tau, t_levels(levels), sphere)
}

/// `levels` equispaced values in `[0.5, 2]`.
pub fn t_levels(levels: usize) -> Vec<f64> {
    (0..levels)
        .map(|i| 0.5 + 1.5 * i as f64 / (levels.max(2) - 1) as f64)
        .collect()
}

/// `(t, z) ↦ (t, R(t) z)` with `R(t)` rotating the `(z₂, z₃)`-plane by angle `t`:
/// not an isometry, since the sphere part depends on `t`.
pub fn twisted_selfmap(n: usize, levels: usize, nodes: usize) -> Result<ConeSelfMap> {
    assert!(n >= 3);
    let (sphere, _) = sphere_patch(n, 2, nodes, SELFMAP_HALF_WIDTH)?;
    ConeSelfMap::from_fn(ConeKind::Minkowski, t_levels(levels), sphere, |t, z| {
        let mut out = z.to_vec();
        let (c, s) = (t.cos(), t.sin());
        out[1] = c * z[1] - s * z[2];
        out[2] = s * z[1] + c * z[2];
        (t, out)
    })
}

/// Sphere pairs `(z, z̃)` from a conformal map applied to random points.
pub fn mobius_pairs<R: Rng>(
    rng: &mut R,
    map: &ConformalMap,
    count: usize,
) -> Vec<(SpherePoint, SpherePoint)> {
    (0..count)
        .map(|_| {
            let z = SpherePoint::new(random_unit(rng, map.n())).expect("unit");
            let zt = map.apply(&z).expect("orthochronous");
            (z, zt)
        })
        .collect()
}

/// Sphere pairs under the coordinatewise cube `z ↦ z³/‖z³‖`, which is not Möbius.
pub fn nonconformal_pairs<R: Rng>(
    rng: &mut R,
    n: usize,
    count: usize,
) -> Vec<(SpherePoint, SpherePoint)> {
    (0..count)
        .map(|_| {
            let z = random_unit(rng, n);
            let cube = z.iter().map(|x| x * x * x).collect();
            (
                SpherePoint::new(z).expect("unit"),
                SpherePoint::normalized(cube).expect("nonzero"),
            )
        })
        .collect()
}
