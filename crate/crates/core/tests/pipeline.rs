use finsler_closing::closing::{
    local_close, torus_density, DensityOptions, LocalOptions, Neighbourhood,
};
use finsler_closing::geometry::{verify_metric, FinslerMetric, MetricPerturbation, SampleSpec};
use finsler_closing::lens::{build_lens_grid, LensGrid, SimpleDisc, TransitionMap};
use finsler_closing::perturb::{hybrid_orbit, HybridOptions};
use finsler_closing::phase::{legendre, PhasePoint};
use finsler_closing::Vec2;

fn golden_covector(metric: &FinslerMetric) -> PhasePoint {
    let q = Vec2::new(0.3, 0.2);
    let v = Vec2::new(1.0, 0.5 * (1.0 + 5f64.sqrt()));
    legendre(metric, 0, &q, &(v / metric.eval(0, &q, &v).unwrap()))
        .unwrap()
        .point
}

#[test]
fn metrics_survive_json() {
    let bumped = FinslerMetric::flat_torus()
        .perturbed(&MetricPerturbation::conformal([0.5, 0.5], 0.2, 0.02))
        .unwrap();
    for m in [
        FinslerMetric::randers([0.2, -0.1]),
        FinslerMetric::katok(0.3).unwrap(),
        bumped,
    ] {
        let text = serde_json::to_string(&m).unwrap();
        let back: FinslerMetric = serde_json::from_str(&text).unwrap();
        let (q, v) = (Vec2::new(0.45, 0.55), Vec2::new(0.3, -0.8));
        assert_eq!(back.eval(0, &q, &v).unwrap(), m.eval(0, &q, &v).unwrap());
    }
}

#[test]
fn perturbed_metrics_still_verify() {
    let m = FinslerMetric::randers([0.2, 0.1])
        .perturbed(&MetricPerturbation::localized(
            [0.1, 0.2],
            0.2,
            0.01,
            [1.0, 0.0],
        ))
        .unwrap();
    let r = verify_metric(
        &m,
        &SampleSpec {
            points: 40,
            directions: 8,
            seed: 5,
            ..Default::default()
        },
    );
    assert!(r.passed, "{:?}", r.failures);
    assert!(r.min_hessian_eigenvalue > 0.0);
}

#[test]
fn lens_grid_reloads_from_csv() {
    let disc = SimpleDisc::certified(
        &FinslerMetric::randers([0.1, 0.0]),
        0,
        Vec2::new(0.0, 0.1),
        0.3,
    )
    .unwrap();
    let grid = build_lens_grid(&disc, 16, 16).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.csv");
    grid.save_csv(&path).unwrap();
    let back = LensGrid::read_csv(&mut std::io::BufReader::new(
        std::fs::File::open(&path).unwrap(),
    ))
    .unwrap();
    for (s, t) in [(0.3, 0.1), (1.2, -0.4), (1.7, 0.6)] {
        assert_eq!(back.apply(s, t).unwrap(), grid.apply(s, t).unwrap());
    }
}

#[test]
fn closed_orbit_returns_under_an_independent_run() {
    let flat = FinslerMetric::flat_torus();
    let v = golden_covector(&flat);
    let c = local_close(
        &flat,
        &Neighbourhood::new(v, 0.05),
        1e-2,
        &LocalOptions::default(),
    )
    .unwrap();
    // rerun the hybrid system at a tighter tolerance than the one used to close
    let run = hybrid_orbit(
        &c.system,
        &c.orbit.point,
        c.orbit.period,
        &HybridOptions {
            tol: 1e-12,
            ..Default::default()
        },
    )
    .unwrap();
    let surface = c.system.ham.surface();
    let end = run.end.to_chart(&surface, c.orbit.point.chart);
    let miss =
        surface.min_image(&(end.q - c.orbit.point.q)).norm() + (end.p - c.orbit.point.p).norm();
    assert!(miss <= 1e-8, "{miss}");
    assert!(c.orbit.verified_residual.unwrap() <= 1e-8);
    // the base point of v stays inside U along the way
    assert!(c.in_neighbourhood);
}

#[test]
fn density_runs_are_reproducible() {
    let bumps = [MetricPerturbation::conformal([0.5, 0.5], 0.2, 0.02)];
    let opts = DensityOptions {
        grid: 4,
        budgets: vec![2.0, 4.0],
        ..Default::default()
    };
    let a = torus_density(&bumps, &opts).unwrap();
    let b = torus_density(&bumps, &opts).unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
    assert!(a.monotone);
}
