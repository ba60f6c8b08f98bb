//! Experiment configuration files.
//!
//! A config is a TOML document with optional `seed` and `out` keys and one
//! `[experiment]` table whose `name` selects the experiment. Every key has a
//! default; unknown keys are rejected.

use finsler_closing::closing::{CensusOptions, DensityOptions, ScanOptions};
use finsler_closing::contact::{dumbbell, folded_fiber, Ambient};
use finsler_closing::geometry::{FinslerMetric, MetricPerturbation, SurfacePatch};
use finsler_closing::phase::{ClassicalHamiltonian, CosineTerm, Hamiltonian, Potential};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use std::sync::Arc;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    pub experiment: Experiment,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Experiment {
    Verify(VerifyParams),
    Lens(LensParams),
    CloseLocal(CloseParams),
    CloseDirectional(CloseParams),
    KatokCensus(CensusParams),
    TorusDensity(DensityParams),
    ConformalScan(ScanParams),
    Contact(ContactParams),
    HamClose(HamCloseParams),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Verify(_) => "verify",
            Experiment::Lens(_) => "lens",
            Experiment::CloseLocal(_) => "close-local",
            Experiment::CloseDirectional(_) => "close-directional",
            Experiment::KatokCensus(_) => "katok-census",
            Experiment::TorusDensity(_) => "torus-density",
            Experiment::ConformalScan(_) => "conformal-scan",
            Experiment::Contact(_) => "contact",
            Experiment::HamClose(_) => "ham-close",
        }
    }
}

pub fn golden() -> f64 {
    0.5 * (1.0 + 5f64.sqrt())
}

/// The metrics checked by `verify` when none are listed.
pub fn builtin_metrics() -> Vec<FinslerMetric> {
    let flat = FinslerMetric::flat_torus();
    vec![
        FinslerMetric::euclidean(),
        flat.clone(),
        FinslerMetric::round_sphere(),
        FinslerMetric::randers([0.1, 0.0]),
        FinslerMetric::katok(0.3).expect("0.3 is a valid Katok parameter"),
        flat.perturbed(&MetricPerturbation::conformal([0.5, 0.5], 0.2, 0.05))
            .expect("valid bump"),
        flat.perturbed(&MetricPerturbation::localized(
            [0.5, 0.5],
            0.2,
            0.1,
            [0.3, -0.4],
        ))
        .expect("valid drift"),
    ]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyParams {
    /// Metrics to check; the built-in families when empty.
    pub metrics: Vec<FinslerMetric>,
    pub points: usize,
    pub directions: usize,
}

impl Default for VerifyParams {
    fn default() -> Self {
        VerifyParams {
            metrics: vec![],
            points: 100,
            directions: 8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LensParams {
    pub metric: FinslerMetric,
    pub chart: u8,
    pub center: [f64; 2],
    pub radius: f64,
    pub n_s: usize,
    pub n_t: usize,
    /// Base points for the consistency integral.
    pub base_points: usize,
    pub n_quad: usize,
    pub defect_limit: f64,
    pub integral_limit: f64,
}

impl Default for LensParams {
    fn default() -> Self {
        LensParams {
            metric: FinslerMetric::euclidean(),
            chart: 0,
            center: [0.0, 0.0],
            radius: 0.5,
            n_s: 64,
            n_t: 64,
            base_points: 8,
            n_quad: 64,
            defect_limit: 1e-6,
            integral_limit: 1e-5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CloseParams {
    pub metric: FinslerMetric,
    pub chart: u8,
    /// Base point of the covector to close through.
    pub point: [f64; 2],
    /// Velocity direction of the covector; normalized by the metric.
    pub direction: [f64; 2],
    /// Radius of the neighbourhood `U` (local closing only).
    pub radius: f64,
    pub eps: f64,
    pub t_max: f64,
    pub rho: Option<f64>,
    pub reversible: bool,
}

impl Default for CloseParams {
    fn default() -> Self {
        CloseParams {
            metric: FinslerMetric::flat_torus(),
            chart: 0,
            point: [0.3, 0.2],
            direction: [1.0, golden()],
            radius: 0.05,
            eps: 1e-2,
            t_max: 1000.0,
            rho: None,
            reversible: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CensusParams {
    pub alpha: f64,
    pub seeds: usize,
    pub half_width: f64,
    pub cluster_tol: f64,
    pub expected_classes: usize,
    pub ratio_tol: f64,
}

impl Default for CensusParams {
    fn default() -> Self {
        let d = CensusOptions::default();
        CensusParams {
            alpha: 0.3,
            seeds: d.seeds,
            half_width: d.half_width,
            cluster_tol: d.cluster_tol,
            expected_classes: 2,
            ratio_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DensityParams {
    pub bumps: Vec<MetricPerturbation>,
    pub grid: usize,
    pub budgets: Vec<f64>,
    pub recurrence_eps: f64,
    pub cover: f64,
}

impl Default for DensityParams {
    fn default() -> Self {
        let d = DensityOptions::default();
        DensityParams {
            bumps: vec![MetricPerturbation::conformal([0.5, 0.5], 0.2, 0.02)],
            grid: d.grid,
            budgets: d.budgets,
            recurrence_eps: d.recurrence_eps,
            cover: d.cover,
        }
    }
}

impl DensityParams {
    pub fn options(&self) -> DensityOptions {
        DensityOptions {
            grid: self.grid,
            budgets: self.budgets.clone(),
            recurrence_eps: self.recurrence_eps,
            cover: self.cover,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanParams {
    pub metric: FinslerMetric,
    pub bump: MetricPerturbation,
    /// Points of the uniform grid on `[0, 1]`.
    pub t_points: usize,
    pub repetitions: usize,
    /// Repetitions that must produce a hit.
    pub min_hit_repetitions: usize,
    pub seeds: usize,
    pub t_max: f64,
    pub recurrence_eps: f64,
}

impl Default for ScanParams {
    fn default() -> Self {
        let d = ScanOptions::default();
        ScanParams {
            metric: FinslerMetric::flat_torus(),
            bump: MetricPerturbation::conformal([0.5, 0.5], 0.1, 0.01),
            t_points: 101,
            repetitions: 10,
            min_hit_repetitions: 7,
            seeds: d.seeds,
            t_max: d.t_max,
            recurrence_eps: d.recurrence_eps,
        }
    }
}

/// A Hamiltonian on a four-dimensional phase space.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum HamiltonianSpec {
    /// `(phi*)^2 / 2 + V`.
    Classical {
        metric: FinslerMetric,
        #[serde(default)]
        potential: Potential,
    },
    HarmonicOscillator,
    /// Engineered level in `R^4` that is not radially transverse.
    Dumbbell,
    /// Engineered Hamiltonian on `T*T^2` with a non-star-shaped fibre.
    FoldedFiber,
}

impl HamiltonianSpec {
    /// The Hamiltonian with its natural ambient space and default level.
    pub fn build(&self) -> (Arc<dyn Hamiltonian>, Ambient, Option<f64>) {
        match self {
            HamiltonianSpec::Classical { metric, potential } => {
                let ambient = match metric.surface {
                    SurfacePatch::PlaneDisc { radius: None } => Ambient::Euclidean,
                    _ => Ambient::Cotangent,
                };
                (
                    Arc::new(ClassicalHamiltonian::new(metric.clone(), potential.clone())),
                    ambient,
                    None,
                )
            }
            HamiltonianSpec::HarmonicOscillator => (
                Arc::new(ClassicalHamiltonian::harmonic_oscillator()),
                Ambient::Euclidean,
                Some(0.5),
            ),
            HamiltonianSpec::Dumbbell => {
                let (h, level) = dumbbell();
                (Arc::new(h), Ambient::Euclidean, Some(level))
            }
            HamiltonianSpec::FoldedFiber => {
                let (h, level) = folded_fiber();
                (Arc::new(h), Ambient::Cotangent, Some(level))
            }
        }
    }
}

/// `|p|^2 / 2 + 0.05 (cos 2 pi q1 + cos 2 pi q2)` on the flat torus.
pub fn pendulum_pair() -> HamiltonianSpec {
    let term = |k: [f64; 2]| CosineTerm {
        amplitude: 0.05,
        wavevector: k,
    };
    HamiltonianSpec::Classical {
        metric: FinslerMetric::flat_torus(),
        potential: Potential::Cosine {
            terms: vec![term([1.0, 0.0]), term([0.0, 1.0])],
        },
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContactParams {
    pub hamiltonian: HamiltonianSpec,
    pub level: Option<f64>,
    pub ambient: Option<Ambient>,
    /// Expected outcome of the check, if asserted.
    pub expect_pass: Option<bool>,
}

impl Default for ContactParams {
    fn default() -> Self {
        ContactParams {
            hamiltonian: HamiltonianSpec::HarmonicOscillator,
            level: None,
            ambient: None,
            expect_pass: Some(true),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HamCloseParams {
    pub hamiltonian: HamiltonianSpec,
    pub level: f64,
    pub point: [f64; 2],
    /// Direction of the momentum; scaled onto the level.
    pub direction: [f64; 2],
    pub radius: f64,
    pub eps: f64,
    pub t_max: f64,
}

impl Default for HamCloseParams {
    fn default() -> Self {
        HamCloseParams {
            hamiltonian: pendulum_pair(),
            level: 0.5,
            point: [0.3, 0.2],
            direction: [1.0, golden()],
            radius: 0.05,
            eps: 1e-2,
            t_max: 1000.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg: ExperimentConfig =
            toml::from_str("[experiment]\nname = \"katok-census\"\n").unwrap();
        assert_eq!(cfg.seed, 0);
        match cfg.experiment {
            Experiment::KatokCensus(p) => assert_eq!(p.seeds, 200),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = [
            "seed = 1\nbogus = 2\n[experiment]\nname = \"verify\"\n",
            "[experiment]\nname = \"verify\"\npoints = 3\nbogus = 2\n",
        ];
        for text in bad {
            assert!(toml::from_str::<ExperimentConfig>(text).is_err(), "{text}");
        }
    }

    #[test]
    fn unknown_experiment_is_rejected() {
        assert!(
            toml::from_str::<ExperimentConfig>("[experiment]\nname = \"billiards\"\n").is_err()
        );
    }

    #[test]
    fn nested_metric_and_hamiltonian_parse() {
        let text = r#"
            seed = 4
            [experiment]
            name = "ham-close"
            level = 0.6
            [experiment.hamiltonian]
            kind = "classical"
            metric = { surface = { kind = "flat-torus", periods = [1.0, 1.0] }, metric = { family = "flat" } }
            potential = { kind = "cosine", terms = [{ amplitude = 0.05, wavevector = [1.0, 0.0] }] }
        "#;
        let cfg: ExperimentConfig = toml::from_str(text).unwrap();
        match cfg.experiment {
            Experiment::HamClose(p) => {
                assert_eq!(p.level, 0.6);
                assert!(matches!(p.hamiltonian, HamiltonianSpec::Classical { .. }));
            }
            other => panic!("{other:?}"),
        }
    }
}
