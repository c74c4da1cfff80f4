//! Isometric immersions into light cones and their rigidity.
//!
//! The crate works with the future light cones of Minkowski `ℝ^{1,n}`, de
//! Sitter `dS_{n+1}` and anti-de Sitter `AdS_{n+1}` space:
//!
//! * [`lorentz`]: the orthochronous Lorentz group in `(a, uᵀ; v, A)` block form
//!   and its embeddings into the dS/AdS isometry groups.
//! * [`conformal`]: Möbius transformations of `S^{n-1}` as Lorentz matrices,
//!   stereographic coordinates and estimation of a Lorentz lift from sampled
//!   sphere correspondences.
//! * [`cone`]: cone points, conversion between the three cones and the
//!   projection `π(t, x) = x/t` onto the sphere of null rays.
//! * [`chart`]: sampled charts on tensor grids, finite-difference pullback
//!   metrics, conformal-factor extraction and the lift `φ = (λ, λψ)`.
//! * [`rigidity`]: recovery of the unique `τ` relating two cone immersions,
//!   extension of cone isometries and windowed constancy checks.
//! * [`io`]: the JSON file formats.

// `!(x <= tol)` is used on purpose throughout so that NaN fails every check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chart;
pub mod cone;
pub mod conformal;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod lorentz;
pub mod rigidity;

pub use chart::{
    cone_lift, extract_conformal_factor, pullback_metric, verify_isometric_immersion,
    verify_lemma1, ChartTarget, ConformalFactor, Grid, GridChart, ImmersionReport, MetricField,
};
pub use cone::{cone_contains, cone_convert, cone_project, ConeMembership, ConePoint};
pub use conformal::{
    conformal_to_lorentz, gen_dilation, gen_inversion, gen_rotation, gen_translation, mobius_apply,
    mobius_conformal_factor, random_conformal, stereo_project, stereo_unproject, ConformalEstimate,
    ConformalMap, PlanePoint, SpherePoint,
};
pub use error::{Error, Result};
pub use lorentz::{
    block_embed, lorentz_check, lorentz_compose, lorentz_inverse, minkowski_inner, ConeKind,
    EmbeddedIsometry, LorentzMap, MetricSignature, ValidityReport,
};
pub use rigidity::{
    extend_cone_isometry, locality_check, recover_tau, recover_tau_with, verify_rigidity,
    ConeSelfMap, CorrespondenceSet, ExtensionReport, LocalityReport, RecoveryOptions,
    RecoveryReport, RecoveryStatus, RigidityReport, WindowSpec,
};
