//! Charted surfaces, Finsler metric families, perturbations and sampled checks.

pub mod metric;
pub mod perturbation;
pub mod surface;
pub mod verify;

pub use metric::{FinslerMetric, MetricFamily, RandersData};
pub use perturbation::{BumpProfile, MetricPerturbation, PerturbationKind, RadialBump};
pub use surface::SurfacePatch;
pub use verify::{
    conformal_perturb, cr_distance, eval_metric, verify_metric, SampleSpec, VerificationReport,
};
