//! Experiment drivers. Each returns its JSON result, its assertions and its tables.

use crate::config::*;
use crate::output::{Check, Report, Table};
use finsler_closing::closing::{
    conformal_scan, directional_close, ham_close, katok_census, local_close, torus_density,
    CensusOptions, DirectionalOptions, HamCloseOptions, LocalOptions, Neighbourhood, PeriodicOrbit,
    ScanOptions,
};
use finsler_closing::contact::{contact_type_check, LevelSet, Sampling};
use finsler_closing::geometry::{verify_metric, FinslerMetric, SampleSpec};
use finsler_closing::lens::{build_lens_grid, consistency_integral, ExactLens, SimpleDisc};
use finsler_closing::perturb::{hybrid_orbit, HybridOptions, HybridSystem, SymplecticBump, Watch};
use finsler_closing::phase::{legendre, Hamiltonian, PhasePoint};
use finsler_closing::{Error, Result, Vec2};
use serde_json::json;

/// Why a run could not produce a report.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    /// The configuration is inconsistent (exit 2).
    #[error("usage: {0}")]
    Usage(String),
    /// A numerical routine failed (exit 3).
    #[error(transparent)]
    Numeric(#[from] Error),
}

pub fn run(cfg: &ExperimentConfig) -> std::result::Result<Report, RunError> {
    let seed = cfg.seed;
    let report = match &cfg.experiment {
        Experiment::Verify(p) => verify(p, seed),
        Experiment::Lens(p) => lens(p),
        Experiment::CloseLocal(p) => close_local(p, seed),
        Experiment::CloseDirectional(p) => close_directional(p, seed),
        Experiment::KatokCensus(p) => census(p, seed),
        Experiment::TorusDensity(p) => density(p),
        Experiment::ConformalScan(p) => scan(p, seed),
        Experiment::Contact(p) => return contact(p, seed),
        Experiment::HamClose(p) => ham(p, seed),
    }?;
    Ok(report)
}

fn v2(a: [f64; 2]) -> Vec2 {
    Vec2::new(a[0], a[1])
}

/// The unit covector at `point` whose velocity points along `direction`.
fn unit_covector(
    metric: &FinslerMetric,
    chart: u8,
    point: [f64; 2],
    direction: [f64; 2],
) -> Result<PhasePoint> {
    let (q, v) = (v2(point), v2(direction));
    let n = metric.eval(chart, &q, &v)?;
    Ok(legendre(metric, chart, &q, &(v / n))?.point)
}

fn point_json(z: &PhasePoint) -> serde_json::Value {
    json!({ "chart": z.chart, "q": [z.q.x, z.q.y], "p": [z.p.x, z.p.y] })
}

fn orbit_json(o: &PeriodicOrbit) -> serde_json::Value {
    json!({
        "period": o.period,
        "residual": o.residual,
        "verified_residual": o.verified_residual,
        "point": point_json(&o.point),
        "floquet": o.floquet,
        "tags": o.tags,
    })
}

fn bump_json(b: &SymplecticBump) -> serde_json::Value {
    let d = b.target - b.source;
    json!({
        "center": [b.center.x, b.center.y],
        "source": [b.source.x, b.source.y],
        "target": [b.target.x, b.target.y],
        "delta": b.delta,
        "displacement": [d.x, d.y],
        "amplitude": b.amplitude,
    })
}

/// One period of the closed hybrid orbit, sampled.
fn orbit_table(stem: &str, system: &HybridSystem, orbit: &PeriodicOrbit) -> Result<Table> {
    let opts = HybridOptions {
        record: true,
        ..Default::default()
    };
    let run = hybrid_orbit(system, &orbit.point, orbit.period, &opts)?;
    let mut t = Table::new(stem, &["t", "chart", "q1", "q2", "p1", "p2"]).plotted(2, 3, "lines");
    if let Some(traj) = run.trajectory {
        for (s, z) in traj.times.iter().zip(&traj.points) {
            t.push(vec![*s, f64::from(z.chart), z.q.x, z.q.y, z.p.x, z.p.y]);
        }
    }
    Ok(t)
}

fn verify(p: &VerifyParams, seed: u64) -> Result<Report> {
    let metrics = if p.metrics.is_empty() {
        builtin_metrics()
    } else {
        p.metrics.clone()
    };
    let spec = SampleSpec {
        points: p.points,
        directions: p.directions,
        seed,
        ..Default::default()
    };
    let reports: Vec<_> = metrics.iter().map(|m| verify_metric(m, &spec)).collect();
    let mut table = Table::new(
        "verify",
        &[
            "index",
            "homogeneity_defect",
            "min_norm",
            "min_hessian_eigenvalue",
            "reversibility_defect",
        ],
    );
    let mut checks = Vec::new();
    for (i, r) in reports.iter().enumerate() {
        table.push(vec![
            i as f64,
            r.homogeneity_defect,
            r.min_norm,
            r.min_hessian_eigenvalue,
            r.reversibility_defect,
        ]);
        checks.push(Check::holds(
            format!("{} is a Finsler metric", r.metric),
            r.passed,
        ));
    }
    Ok(Report {
        result: json!({ "reports": reports }),
        checks,
        tables: vec![table],
    })
}

fn lens(p: &LensParams) -> Result<Report> {
    let disc = SimpleDisc::certified(&p.metric, p.chart, v2(p.center), p.radius)?;
    let grid = build_lens_grid(&disc, p.n_s, p.n_t)?;
    let map = ExactLens::new(disc.clone());
    let length = disc.boundary_length();
    let mut integrals =
        Table::new("consistency", &["s_p", "integral"]).plotted(0, 1, "linespoints");
    for k in 0..p.base_points {
        let sp = length * k as f64 / p.base_points as f64;
        integrals.push(vec![sp, consistency_integral(&map, sp, p.n_quad)?]);
    }
    let worst = integrals
        .rows
        .iter()
        .map(|r| r[1].abs())
        .fold(0.0, f64::max);
    let mut nodes = Table::new("lens-grid", &["s_in", "t_in", "s_out", "t_out", "excluded"])
        .plotted(0, 2, "points");
    for (n, ex) in grid.nodes.iter().zip(&grid.excluded) {
        nodes.push(vec![
            n.s_in,
            n.t_in,
            n.s_out,
            n.t_out,
            f64::from(u8::from(*ex)),
        ]);
    }
    let checks = vec![
        Check::holds("disc certified simple", disc.is_certified()),
        Check::at_most("symplectic defect", grid.defect, p.defect_limit),
        Check::at_most("max |consistency integral|", worst, p.integral_limit),
    ];
    let result = json!({
        "metric": p.metric.name(),
        "disc": { "chart": p.chart, "center": p.center, "radius": p.radius, "certification": disc.certification },
        "grid": { "n_s": p.n_s, "n_t": p.n_t, "defect": grid.defect },
        "integrals": integrals.rows,
    });
    Ok(Report {
        result,
        checks,
        tables: vec![nodes, integrals],
    })
}

fn close_local(p: &CloseParams, seed: u64) -> Result<Report> {
    let v = unit_covector(&p.metric, p.chart, p.point, p.direction)?;
    let u = Neighbourhood::new(v, p.radius);
    let opts = LocalOptions {
        t_max: p.t_max,
        rho: p.rho,
        reversible: p.reversible,
        ..Default::default()
    };
    let c = local_close(&p.metric, &u, p.eps, &opts)?;
    let worst = c.integrals.iter().map(|(_, i)| i.abs()).fold(0.0, f64::max);
    let mut checks = vec![
        Check::at_most("orbit residual", c.orbit.residual, 1e-9),
        Check::holds("orbit meets U", c.in_neighbourhood),
        Check::at_most("|psi(alpha) - alpha_1|", c.bump_match, 1e-10),
        Check::at_most("bump C^0 size / eps", c.bump.cr_size(0)? / p.eps, 1.0),
        Check::at_most("max |consistency integral|", worst, 1e-4),
        Check::at_most("defect outside the disc", c.outside_defect, 1e-8),
    ];
    if let Some(d) = c.reversibility_defect {
        checks.push(Check::at_most("reversibility defect", d, 1e-6));
    }
    let result = json!({
        "experiment": "close-local",
        "metric": p.metric.name(),
        "seed": seed,
        "orbit": orbit_json(&c.orbit),
        "bump": bump_json(&c.bump),
        "integrals": c.integrals,
        "recurrence": { "time": c.recurrence.time, "displacement": [c.recurrence.displacement.x, c.recurrence.displacement.y] },
        "disc": { "center": [c.disc.center.x, c.disc.center.y], "radius": c.disc.radius },
    });
    let table = orbit_table("orbit", &c.system, &c.orbit)?;
    Ok(Report {
        result,
        checks,
        tables: vec![table],
    })
}

fn close_directional(p: &CloseParams, seed: u64) -> Result<Report> {
    let v = unit_covector(&p.metric, p.chart, p.point, p.direction)?;
    let local = LocalOptions {
        t_max: p.t_max,
        ..Default::default()
    };
    let opts = DirectionalOptions {
        local,
        rho: p.rho,
        reversible: p.reversible,
        ..Default::default()
    };
    let c = directional_close(&p.metric, v, p.eps, &opts)?;
    let moved = c.bump_minus.apply(c.alpha_minus)?;
    let matched = Watch::Disc(c.minus.clone())
        .offset(moved, c.beta_minus)
        .norm();
    let mut checks = vec![
        Check::at_most("orbit residual", c.orbit.residual, 1e-9),
        Check::at_most("passage distance to v", c.passage, 1e-7),
        Check::at_most("composition identity defect", c.identity_defect, 1e-7),
        Check::at_most(
            "agreement outside the corrected region",
            c.outside_agreement,
            1e-12,
        ),
        Check::at_most("|psi-(alpha-) - beta-|", matched, 1e-10),
    ];
    if let Some(d) = c.reversibility_defect {
        checks.push(Check::at_most("reversibility defect", d, 1e-6));
    }
    let result = json!({
        "experiment": "close-directional",
        "metric": p.metric.name(),
        "seed": seed,
        "orbit": orbit_json(&c.orbit),
        "bump": bump_json(&c.closing_bump),
        "bump_minus": bump_json(&c.bump_minus),
        "passage": c.passage,
        "identity_defect": c.identity_defect,
        "outside_agreement": c.outside_agreement,
        "reversibility_defect": c.reversibility_defect,
        "discs": [c.minus.center.as_slice(), c.plus.center.as_slice(), c.closing_disc.center.as_slice()],
    });
    let table = orbit_table("orbit", &c.system, &c.orbit)?;
    Ok(Report {
        result,
        checks,
        tables: vec![table],
    })
}

fn census(p: &CensusParams, seed: u64) -> Result<Report> {
    let opts = CensusOptions {
        seeds: p.seeds,
        seed,
        half_width: p.half_width,
        cluster_tol: p.cluster_tol,
        ..Default::default()
    };
    let c = katok_census(p.alpha, &opts)?;
    let expected = (1.0 + p.alpha) / (1.0 - p.alpha);
    let mut checks = vec![Check::at_most(
        "|classes - expected|",
        (c.classes.len() as f64 - p.expected_classes as f64).abs(),
        0.0,
    )];
    checks.push(match c.ratio {
        Some(r) => Check::at_most(
            "|period ratio - (1+a)/(1-a)|",
            (r - expected).abs(),
            p.ratio_tol,
        ),
        None => Check::holds("period ratio available", false),
    });
    let mut table =
        Table::new("census", &["class", "period", "members", "spread"]).plotted(0, 1, "points");
    for (i, k) in c.classes.iter().enumerate() {
        table.push(vec![i as f64, k.period, k.members as f64, k.spread]);
    }
    let classes: Vec<_> =
        c.classes.iter().map(|k| json!({ "period": k.period, "members": k.members, "spread": k.spread, "orbit": orbit_json(&k.representative) })).collect();
    let result = json!({
        "alpha": c.alpha,
        "seeds": c.seeds,
        "converged": c.converged,
        "classes": classes,
        "ratio": c.ratio,
        "expected_ratio": expected,
    });
    Ok(Report {
        result,
        checks,
        tables: vec![table],
    })
}

fn density(p: &DensityParams) -> Result<Report> {
    let r = torus_density(&p.bumps, &p.options())?;
    let mut fractions = Table::new("density", &["budget", "fraction"]).plotted(0, 1, "linespoints");
    for (b, f) in r.budgets.iter().zip(&r.fractions) {
        fractions.push(vec![*b, *f]);
    }
    let mut crossings =
        Table::new("crossings", &["found_at", "period", "u", "v"]).plotted(2, 3, "points");
    for o in &r.orbits {
        for c in &o.crossings {
            crossings.push(vec![o.found_at, o.orbit.period, c.x, c.y]);
        }
    }
    let checks = vec![Check::holds(
        "coverage non-decreasing in the budget",
        r.monotone,
    )];
    let result = json!({
        "grid": r.grid,
        "budgets": r.budgets,
        "fractions": r.fractions,
        "orbits": r.orbits.len(),
        "periods": r.orbits.iter().map(|o| o.orbit.period).collect::<Vec<_>>(),
    });
    Ok(Report {
        result,
        checks,
        tables: vec![fractions, crossings],
    })
}

fn scan(p: &ScanParams, seed: u64) -> Result<Report> {
    let n = p.t_points.max(2);
    let grid: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    let mut table = Table::new(
        "scan-hits",
        &["repetition", "t", "period", "residual", "q1", "q2"],
    )
    .plotted(1, 2, "points");
    let mut per_rep = Vec::new();
    let mut outside = 0usize;
    for rep in 0..p.repetitions {
        let opts = ScanOptions {
            seeds: p.seeds,
            seed: seed.wrapping_add(rep as u64),
            t_max: p.t_max,
            recurrence_eps: p.recurrence_eps,
            ..Default::default()
        };
        let hits = conformal_scan(&p.metric, &p.bump, &grid, &opts)?;
        for h in &hits {
            outside += usize::from(h.witness_distance >= p.bump.radius);
            table.push(vec![
                rep as f64,
                h.t,
                h.orbit.period,
                h.orbit.residual,
                h.witness.q.x,
                h.witness.q.y,
            ]);
        }
        per_rep.push(hits.len());
    }
    let with_hits = per_rep.iter().filter(|&&k| k > 0).count();
    let checks = vec![
        Check::at_least(
            "repetitions with a hit",
            with_hits as f64,
            p.min_hit_repetitions as f64,
        ),
        Check::at_most("hits missing the support", outside as f64, 0.0),
    ];
    let result = json!({
        "metric": p.metric.name(),
        "bump": p.bump,
        "t_points": n,
        "hits_per_repetition": per_rep,
        "repetitions_with_hits": with_hits,
        "note": "empirical: existence of a hit for some t is not constructive",
    });
    Ok(Report {
        result,
        checks,
        tables: vec![table],
    })
}

fn contact(p: &ContactParams, seed: u64) -> std::result::Result<Report, RunError> {
    let (ham, ambient, default_level) = p.hamiltonian.build();
    let level = p
        .level
        .or(default_level)
        .ok_or_else(|| RunError::Usage("this Hamiltonian needs an explicit `level`".into()))?;
    let ambient = p.ambient.unwrap_or(ambient);
    let sampling = Sampling {
        seed,
        ..Default::default()
    };
    let set = LevelSet::sampled(ham, level, ambient, &sampling)?;
    let report = contact_type_check(&set)?;
    let replaced = contact_type_check(&set.replaced()?)?;
    let mut checks = vec![Check::holds(
        "same outcome for 2H - h",
        report.passed == replaced.passed,
    )];
    if let Some(expect) = p.expect_pass {
        checks.push(Check::holds(
            format!("contact check {}", if expect { "passes" } else { "fails" }),
            report.passed == expect,
        ));
        if !expect {
            checks.push(Check::holds(
                "failure has a witness",
                report.witness.is_some(),
            ));
        }
    }
    let result =
        json!({ "level": level, "ambient": ambient, "report": report, "replaced": replaced });
    Ok(Report {
        result,
        checks,
        tables: vec![],
    })
}

/// The covector over `q` along `dir` on the level `h` of a kinetic-plus-potential Hamiltonian.
fn on_level(ham: &dyn Hamiltonian, q: Vec2, dir: Vec2, h: f64) -> Result<PhasePoint> {
    let v = ham.value(&PhasePoint::new(q, Vec2::zeros()));
    let k = ham.value(&PhasePoint::new(q, dir)) - v;
    if !(h > v && k > 0.0) {
        return Err(Error::Precondition(format!(
            "no covector over {q:?} on the level {h}"
        )));
    }
    Ok(PhasePoint::new(q, dir * ((h - v) / k).sqrt()))
}

fn ham(p: &HamCloseParams, seed: u64) -> Result<Report> {
    let (ham, ambient, _) = p.hamiltonian.build();
    let z = on_level(&*ham, v2(p.point), v2(p.direction), p.level)?;
    let u = Neighbourhood::new(z, p.radius);
    let opts = HamCloseOptions {
        t_max: p.t_max,
        ambient,
        ..Default::default()
    };
    let c = ham_close(ham.clone(), p.level, &u, p.eps, &opts)?;
    let checks = vec![
        Check::holds("contact check passed", c.contact.passed),
        Check::at_most("orbit residual", c.orbit.residual, 1e-9),
        Check::holds("orbit meets U", c.in_neighbourhood),
        Check::at_most("|psi(w0) - w1|", c.bump_match, 1e-10),
        Check::at_most("bump C^0 size / eps", c.bump.cr_size(0)? / p.eps, 1.0),
    ];
    let result = json!({
        "experiment": "ham-close",
        "hamiltonian": ham.name(),
        "level": p.level,
        "seed": seed,
        "orbit": orbit_json(&c.orbit),
        "bump": bump_json(&c.bump),
        "tau": c.tau,
        "contact": c.contact,
        "recurrence": { "time": c.recurrence.time, "displacement": [c.recurrence.displacement.x, c.recurrence.displacement.y] },
    });
    let table = orbit_table("orbit", &c.system, &c.orbit)?;
    Ok(Report {
        result,
        checks,
        tables: vec![table],
    })
}
