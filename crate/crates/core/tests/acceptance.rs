//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use finsler_closing::closing::{
    conformal_scan, directional_close, ham_close, katok_census, local_close, CensusOptions,
    DirectionalOptions, HamCloseOptions, LocalOptions, Neighbourhood, PeriodicOrbit, ScanOptions,
};
use finsler_closing::contact::{
    contact_type_check, dumbbell, folded_fiber, Ambient, LevelSet, Sampling,
};
use finsler_closing::geometry::{FinslerMetric, MetricPerturbation};
use finsler_closing::lens::map::euclidean_chord;
use finsler_closing::lens::{
    build_lens_grid, consistency_integral, ExactLens, Postcomposed, Shear, SimpleDisc,
    TransitionMap,
};
use finsler_closing::perturb::{calibrate_constant, make_bump_with, Watch};
use finsler_closing::phase::{
    flow_to, legendre, legendre_inverse, run_flow, ClassicalHamiltonian, CosineTerm, FlowOptions,
    GeodesicHamiltonian, Hamiltonian, PhasePoint, Potential,
};
use finsler_closing::{Result, Vec2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;
use std::sync::Arc;
use std::time::{Duration, Instant};

struct Outcome {
    failures: Vec<String>,
    summary: String,
}

impl Outcome {
    fn new() -> Self {
        Outcome {
            failures: Vec::new(),
            summary: String::new(),
        }
    }

    fn at_most(&mut self, what: &str, value: f64, limit: f64) {
        if value.is_nan() || value > limit {
            self.failures
                .push(format!("{what} = {value:.3e} > {limit:.0e}"));
        }
    }

    fn at_least(&mut self, what: &str, value: f64, limit: f64) {
        if value.is_nan() || value < limit {
            self.failures
                .push(format!("{what} = {value:.3e} < {limit:.0e}"));
        }
    }

    fn holds(&mut self, what: &str, ok: bool) {
        if !ok {
            self.failures.push(what.to_string());
        }
    }

    fn note(&mut self, s: String) {
        if !self.summary.is_empty() {
            self.summary.push_str(", ");
        }
        self.summary.push_str(&s);
    }

    fn orbit(&mut self, o: &PeriodicOrbit) {
        self.at_most("orbit residual", o.residual, 1e-9);
        self.at_most(
            "re-verified residual",
            o.verified_residual.unwrap_or(f64::INFINITY),
            1e-8,
        );
    }
}

fn golden() -> f64 {
    0.5 * (1.0 + 5f64.sqrt())
}

fn unit_covector(metric: &FinslerMetric, q: Vec2, v: Vec2) -> Result<PhasePoint> {
    Ok(legendre(metric, 0, &q, &(v / metric.eval(0, &q, &v)?))?.point)
}

/// Consistency integrals at `n` equally spaced base points.
fn integrals(map: &dyn TransitionMap, n: usize) -> Result<Vec<f64>> {
    let l = map.disc().boundary_length();
    (0..n)
        .map(|k| consistency_integral(map, l * k as f64 / n as f64, 64))
        .collect()
}

fn euclidean_disc(o: &mut Outcome) -> Result<()> {
    let disc = SimpleDisc::certified(&FinslerMetric::euclidean(), 0, Vec2::new(0.2, -0.1), 0.5)?;
    let lens = ExactLens::new(disc.clone());
    let mut worst = 0.0f64;
    for i in 0..24 {
        for j in 1..24 {
            let s = disc.boundary_length() * i as f64 / 24.0;
            let t = -1.0 + 2.0 * j as f64 / 24.0;
            let (s1, t1) = lens.apply(s, t)?;
            let (s2, t2) = euclidean_chord(&disc, s, t);
            worst = worst.max(disc.s_offset(s1, s2).abs()).max((t1 - t2).abs());
        }
    }
    o.at_most("chord-map error", worst, 1e-9);
    let grid = build_lens_grid(&disc, 64, 64)?;
    o.at_most("symplectic defect 64x64", grid.defect, 1e-6);
    let ints = integrals(&lens, 8)?;
    let max = ints.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    o.at_most("|consistency integral|", max, 1e-7);
    o.note(format!(
        "chord {worst:.1e}, defect {:.1e}, integral {max:.1e}",
        grid.defect
    ));
    Ok(())
}

fn genuine_lens_maps(o: &mut Outcome) -> Result<()> {
    let cases = [
        (FinslerMetric::randers([0.1, 0.0]), Vec2::new(0.1, 0.2)),
        (FinslerMetric::katok(0.3)?, Vec2::new(0.2, 0.1)),
    ];
    for (metric, centre) in cases {
        let disc = SimpleDisc::certified(&metric, 0, centre, 0.3)?;
        let ints = integrals(&ExactLens::new(disc), 8)?;
        let max = ints.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let spread = ints.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - ints.iter().cloned().fold(f64::INFINITY, f64::min);
        o.at_most(&format!("{} |integral|", metric.name()), max, 1e-5);
        o.at_most(&format!("{} spread", metric.name()), spread, 2e-5);
        o.note(format!("{} {max:.1e}/{spread:.1e}", metric.name()));
    }
    let disc = SimpleDisc::certified(
        &FinslerMetric::randers([0.1, 0.0]),
        0,
        Vec2::new(0.1, 0.2),
        0.3,
    )?;
    let sheared = Postcomposed {
        sigma: Arc::new(ExactLens::new(disc)),
        psi: Arc::new(Shear { shift: 0.01 }),
    };
    let w = consistency_integral(&sheared, 0.4, 64)?;
    o.at_least("shear |integral|", w.abs(), 5e-3);
    o.note(format!("shear {:.1e}", w.abs()));
    Ok(())
}

fn legendre_and_flow(o: &mut Outcome) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let families = [
        FinslerMetric::euclidean(),
        FinslerMetric::round_sphere(),
        FinslerMetric::randers([0.1, 0.05]),
        FinslerMetric::katok(0.3)?,
    ];
    let mut worst = 0.0f64;
    for m in &families {
        for _ in 0..100 {
            let q = Vec2::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
            let a: f64 = rng.gen_range(0.0..TAU);
            let v = Vec2::new(a.cos(), a.sin());
            let v = v / m.eval(0, &q, &v)?;
            let back = legendre_inverse(m, &legendre(m, 0, &q, &v)?)?;
            worst = worst.max((back - v).norm());
        }
    }
    o.at_most("Legendre round trip", worst, 1e-8);

    let katok = GeodesicHamiltonian::new(FinslerMetric::katok(0.3)?);
    let z0 = unit_covector(
        katok.metric().unwrap(),
        Vec2::new(0.3, -0.2),
        Vec2::new(0.4, 1.0),
    )?;
    let run = run_flow(&katok, &z0, 100.0, &FlowOptions::with_tol(1e-10), &[])?;
    let drift = run.max_energy_drift / katok.value(&z0);
    o.at_most("relative energy drift", drift, 1e-8);

    let sphere = GeodesicHamiltonian::new(FinslerMetric::round_sphere());
    let z = unit_covector(
        sphere.metric().unwrap(),
        Vec2::new(0.3, 0.1),
        Vec2::new(-0.2, 1.0),
    )?;
    let back = flow_to(&sphere, &z, TAU, 1e-12)?.to_chart(&sphere.surface(), 0);
    let miss = (back.q - z.q).norm() + (back.p - z.p).norm();
    // a great circle returns at 2 pi; the period error is the miss over the speed
    let speed = finsler_closing::phase::hamiltonian_vector_field(&sphere, &z)
        .0
        .norm();
    o.at_most("great-circle period error", miss / speed, 1e-6);

    let torus = GeodesicHamiltonian::new(FinslerMetric::flat_torus());
    let z = PhasePoint::new(Vec2::new(0.1, 0.7), Vec2::new(0.6, -0.8));
    let end = flow_to(&torus, &z, 13.7, 1e-12)?.to_chart(&torus.surface(), 0);
    let exact = z.q + z.p * 13.7;
    let err = torus.surface().min_image(&(end.q - exact)).norm() + (end.p - z.p).norm();
    o.at_most("flat-torus closed form", err, 1e-10);
    o.note(format!(
        "round trip {worst:.1e}, drift {drift:.1e}, circle {:.1e}, torus {err:.1e}",
        miss / speed
    ));
    Ok(())
}

fn bumps(o: &mut Outcome) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = [0.0f64; 3];
    for case in 0..50 {
        let x = Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let delta = rng.gen_range(0.05..0.3);
        let r = case % 3;
        let eps = 10f64.powf(rng.gen_range(-3.0..-1.0));
        let c = calibrate_constant(delta, r, eps)?;
        let a: f64 = rng.gen_range(0.0..TAU);
        let d = rng.gen_range(0.1..0.9) * c * delta.powi(r as i32) * eps;
        let y = x + Vec2::new(a.cos(), a.sin()) * d;
        let b = make_bump_with(x, y, delta, r, eps, c, None)?;
        worst[0] = worst[0].max((b.apply(x)? - y).norm());
        worst[1] = worst[1].max(b.area_defect(12)?);
        worst[2] = worst[2].max(b.cr_size(r)? / eps);
        for k in 0..16 {
            let t = TAU * k as f64 / 16.0;
            let z = b.center + Vec2::new(t.cos(), t.sin()) * b.delta * rng.gen_range(1.0..1.5);
            if b.apply(z)? != z {
                o.failures
                    .push(format!("case {case}: moved a point outside the support"));
            }
        }
    }
    o.at_most("|psi(x) - y|", worst[0], 1e-10);
    o.at_most("|det D psi - 1|", worst[1], 1e-8);
    o.at_most("C^r size / eps", worst[2], 1.0);
    o.note(format!(
        "50 cases, hit {:.1e}, area {:.1e}, size/eps {:.2}",
        worst[0], worst[1], worst[2]
    ));
    Ok(())
}

fn golden_covector() -> Result<(FinslerMetric, PhasePoint)> {
    let flat = FinslerMetric::flat_torus();
    let v = unit_covector(&flat, Vec2::new(0.3, 0.2), Vec2::new(1.0, golden()))?;
    Ok((flat, v))
}

fn local_closing(o: &mut Outcome) -> Result<()> {
    let (flat, v) = golden_covector()?;
    let c = local_close(
        &flat,
        &Neighbourhood::new(v, 0.05),
        1e-2,
        &LocalOptions::default(),
    )?;
    o.orbit(&c.orbit);
    o.holds("orbit meets U", c.in_neighbourhood);
    o.at_most("defect outside the disc", c.outside_defect, 1e-8);
    let max = c.integrals.iter().fold(0.0f64, |a, (_, i)| a.max(i.abs()));
    o.at_most("|perturbed consistency integral|", max, 1e-4);
    o.at_most("bump size / eps", c.bump.cr_size(0)? / 1e-2, 1.0);
    o.note(format!(
        "T = {:.4}, residual {:.1e}, outside {:.1e}, integral {max:.1e}",
        c.orbit.period, c.orbit.residual, c.outside_defect
    ));
    Ok(())
}

fn directional_closing(o: &mut Outcome) -> Result<()> {
    let (flat, v) = golden_covector()?;
    for reversible in [false, true] {
        let opts = DirectionalOptions {
            reversible,
            ..Default::default()
        };
        let c = directional_close(&flat, v, 1e-2, &opts)?;
        o.orbit(&c.orbit);
        o.at_most("passage distance", c.passage, 1e-7);
        o.at_most("composition identity", c.identity_defect, 1e-7);
        let matched = Watch::Disc(c.minus.clone())
            .offset(c.bump_minus.apply(c.alpha_minus)?, c.beta_minus)
            .norm();
        o.at_most("psi-(alpha-) - beta-", matched, 1e-10);
        if reversible {
            let d = c.reversibility_defect.unwrap_or(f64::INFINITY);
            o.at_most("reversibility defect", d, 1e-6);
            o.note(format!("reversible {d:.1e}"));
        } else {
            o.note(format!(
                "T = {:.4}, passage {:.1e}, identity {:.1e}",
                c.orbit.period, c.passage, c.identity_defect
            ));
        }
    }
    Ok(())
}

fn census(o: &mut Outcome) -> Result<()> {
    let alpha = 0.3;
    let c = katok_census(alpha, &CensusOptions::default())?;
    o.at_most("|classes - 2|", (c.classes.len() as f64 - 2.0).abs(), 0.0);
    let expected = (1.0 + alpha) / (1.0 - alpha);
    let err = c.ratio.map_or(f64::INFINITY, |r| (r - expected).abs());
    o.at_most("|ratio - (1+a)/(1-a)|", err, 1e-3);
    o.note(format!(
        "{} classes from {} converged, ratio error {err:.1e}",
        c.classes.len(),
        c.converged
    ));
    Ok(())
}

fn pendulum_pair() -> Arc<dyn Hamiltonian> {
    let term = |k: [f64; 2]| CosineTerm {
        amplitude: 0.05,
        wavevector: k,
    };
    let potential = Potential::Cosine {
        terms: vec![term([1.0, 0.0]), term([0.0, 1.0])],
    };
    Arc::new(ClassicalHamiltonian::new(
        FinslerMetric::flat_torus(),
        potential,
    ))
}

/// Name, Hamiltonian, level, ambient space and expected verdict.
type LevelCase = (&'static str, Arc<dyn Hamiltonian>, f64, Ambient, bool);

fn contact(o: &mut Outcome) -> Result<()> {
    let sampling = Sampling::default();
    let (bell, bell_h) = dumbbell();
    let (fold, fold_h) = folded_fiber();
    let cases: Vec<LevelCase> = vec![
        (
            "oscillator",
            Arc::new(ClassicalHamiltonian::harmonic_oscillator()),
            0.5,
            Ambient::Euclidean,
            true,
        ),
        (
            "pendulum pair",
            pendulum_pair(),
            0.5,
            Ambient::Cotangent,
            true,
        ),
        (
            "dumbbell",
            Arc::new(bell),
            bell_h,
            Ambient::Euclidean,
            false,
        ),
        (
            "folded fibre",
            Arc::new(fold),
            fold_h,
            Ambient::Cotangent,
            false,
        ),
    ];
    for (name, ham, h, ambient, expect) in cases {
        let set = LevelSet::sampled(ham, h, ambient, &sampling)?;
        let r = contact_type_check(&set)?;
        let again = contact_type_check(&set.replaced()?)?;
        o.holds(
            &format!("{name}: expected pass = {expect}"),
            r.passed == expect,
        );
        o.holds(
            &format!("{name}: verdict changes under 2H - h"),
            r.passed == again.passed,
        );
        if !expect {
            o.holds(
                &format!("{name}: failure without witness"),
                r.witness.is_some(),
            );
        }
        o.note(format!("{name} {}", if r.passed { "pass" } else { "fail" }));
    }
    Ok(())
}

fn hamiltonian_closing(o: &mut Outcome) -> Result<()> {
    let ham = pendulum_pair();
    let (q, dir, h) = (Vec2::new(0.3, 0.2), Vec2::new(1.0, golden()), 0.5);
    let v = ham.value(&PhasePoint::new(q, Vec2::zeros()));
    let k = ham.value(&PhasePoint::new(q, dir)) - v;
    let z = PhasePoint::new(q, dir * ((h - v) / k).sqrt());
    let c = ham_close(
        ham,
        h,
        &Neighbourhood::new(z, 0.05),
        1e-2,
        &HamCloseOptions::default(),
    )?;
    o.orbit(&c.orbit);
    o.holds("orbit meets U", c.in_neighbourhood);
    o.holds("contact check recorded as passed", c.contact.passed);
    o.note(format!(
        "T = {:.4}, residual {:.1e}, contact pass",
        c.orbit.period, c.orbit.residual
    ));
    Ok(())
}

fn scan(o: &mut Outcome) -> Result<()> {
    let flat = FinslerMetric::flat_torus();
    let h = MetricPerturbation::conformal([0.5, 0.5], 0.1, 0.01);
    let grid: Vec<f64> = (0..101).map(|i| i as f64 / 100.0).collect();
    let mut with_hits = 0;
    let mut total = 0;
    for rep in 0..10u64 {
        let hits = conformal_scan(
            &flat,
            &h,
            &grid,
            &ScanOptions {
                seed: rep,
                ..Default::default()
            },
        )?;
        with_hits += usize::from(!hits.is_empty());
        total += hits.len();
        for hit in &hits {
            let d = flat
                .surface
                .min_image(&(hit.witness.q - Vec2::new(0.5, 0.5)))
                .norm();
            o.holds("hit misses supp h", d < h.radius);
        }
    }
    o.at_least("repetitions with a hit", with_hits as f64, 7.0);
    o.note(format!(
        "{with_hits}/10 repetitions, {total} hits (empirical)"
    ));
    Ok(())
}

type Criterion = fn(&mut Outcome) -> Result<()>;

fn main() {
    let criteria: [(&str, Criterion, Option<Duration>); 10] = [
        (
            "Euclidean-disc oracles",
            euclidean_disc,
            Some(Duration::from_secs(10)),
        ),
        (
            "genuine lens-map consistency",
            genuine_lens_maps,
            Some(Duration::from_secs(120)),
        ),
        ("Legendre and flow", legendre_and_flow, None),
        ("symplectic bumps", bumps, None),
        (
            "local closing",
            local_closing,
            Some(Duration::from_secs(60)),
        ),
        ("directional closing", directional_closing, None),
        ("Katok census", census, None),
        ("contact type", contact, None),
        ("Hamiltonian closing", hamiltonian_closing, None),
        ("conformal scan", scan, None),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let mut o = Outcome::new();
        let start = Instant::now();
        if let Err(e) = run(&mut o) {
            o.failures.push(format!("error: {e}"));
        }
        let took = start.elapsed();
        if let Some(b) = budget {
            if took > *b {
                o.failures.push(format!("took {took:.1?}, budget {b:?}"));
            }
        }
        let ok = o.failures.is_empty();
        failed += usize::from(!ok);
        let detail = if ok { o.summary } else { o.failures.join("; ") };
        println!(
            "[{}] {:>2}. {name} ({:.1?}): {detail}",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            took
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
