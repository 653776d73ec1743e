//! Acceptance criteria, one test per criterion.
//!
//! Each test prints a single `criterion N PASS|FAIL ...` line (visible with
//! `--nocapture`) before asserting. Criteria 7, 8 and 10 search both readings
//! of the quadratic nonlinearity and pass if either reproduces the pattern.

mod common;

use std::collections::BTreeSet;
use std::sync::OnceLock;

use aif_core::bifurcation::{
    find_transitions, refine_transition, sweep_cutoff, sweep_cutoff_sequential, Spacing, SweepSpec, SweptParameter,
};
use aif_core::integrator::{
    euler_train, integrate_to_spike, integrate_to_spike_observed, simulate_train, SpikeOutcome, State, StepControl,
    Stop,
};
use aif_core::model::{self, explosion_time_bound_quadratic, ModelParams, NonlinearityKind, ResetRule};
use aif_core::oracle::{reference_integrate, reference_orbit, reference_quadrature, Target};
use aif_core::phase_plane::{
    detect_spiking_zone_entry, orbit_at, orbit_graph, tail_integral, SpikingZoneEntry,
};
use aif_core::spike_analysis::{
    burst_sizes, classify_train, firing_rate, isi_sequence, AnalysisSettings, Pattern,
};
use common::*;
use rand::Rng;

fn report(n: u32, title: &str, ok: bool, detail: &str) {
    let status = if ok { "PASS" } else { "FAIL" };
    println!("criterion {n:>2} {status} {title}: {detail}");
    assert!(ok, "criterion {n} ({title}) failed: {detail}");
}

fn spike(p: &ModelParams, r: &ResetRule, s0: State, ctrl: &StepControl) -> aif_core::integrator::SpikeEvent {
    match integrate_to_spike(p, r, s0, ctrl).unwrap() {
        SpikeOutcome::Spike(ev) => ev,
        other => panic!("expected a spike from {s0:?} with {p:?}, got {other:?}"),
    }
}

#[test]
fn criterion_01_analytic_blowup() {
    let ctrl = StepControl::default();
    let mut rng = rng(1);
    let mut worst: f64 = 0.0;
    let mut draws = 0;
    while draws < 50 {
        let current = rng.gen_range(-5.0..5.0);
        let w0 = rng.gen_range(-5.0..5.0);
        let v0: f64 = rng.gen_range(-3.0..3.0);
        let kappa: f64 = current - w0;
        if kappa <= 0.0 && v0 <= (-kappa).sqrt() + 0.1 {
            continue;
        }
        draws += 1;
        let theta = 10f64.powf(rng.gen_range(1.0..4.0));
        let p = ModelParams::new(NonlinearityKind::Quadratic, 0.0, 0.0, current).unwrap();
        let r = ResetRule::new(theta, v0 - 1.0, 0.0).unwrap();
        let expected = explosion_time_bound_quadratic(&p, v0, w0).unwrap()
            - tail_integral(&NonlinearityKind::Quadratic, 0.0, theta, kappa);
        let t = spike(&p, &r, State::new(0.0, v0, w0), &ctrl).t_star;
        worst = worst.max((t - expected).abs() / expected.abs());
    }

    let quad = ModelParams::new(NonlinearityKind::Quadratic, 0.0, 0.0, 0.0).unwrap();
    let expo = ModelParams::new(NonlinearityKind::Exponential, 0.0, 0.0, 0.0).unwrap();
    let mut trivial: f64 = 0.0;
    for (v0, theta) in [(1.0, 100.0), (0.5, 1e3), (2.0, 1e6)] {
        let t = spike(&quad, &ResetRule::new(theta, 0.0, 0.0).unwrap(), State::new(0.0, v0, 0.0), &ctrl).t_star;
        trivial = trivial.max((t - (1.0 / v0 - 1.0 / theta)).abs());
    }
    for theta in [5.0, 30.0, 1e3, 1e6] {
        let t = spike(&expo, &ResetRule::new(theta, -1.0, 0.0).unwrap(), State::new(0.0, 0.0, 0.0), &ctrl).t_star;
        trivial = trivial.max((t - (1.0 - (-theta).exp())).abs());
    }
    report(
        1,
        "analytic blow-up",
        worst < 1e-6 && trivial < 1e-8,
        &format!("50 frozen-w draws worst rel err {worst:.2e} (< 1e-6); trivial cases worst abs err {trivial:.2e} (< 1e-8)"),
    );
}

#[test]
fn criterion_02_finite_blowup_time() {
    let ctrl = StepControl::default();
    let mut rng = rng(2);
    let mut worst: f64 = 0.0;
    let mut monotone = true;
    for kind in ALL_KINDS {
        for _ in 0..50 {
            let p = no_fixed_point_params(kind, &mut rng);
            let v0 = rng.gen_range(start_range(kind));
            let w0 = p.b * v0 + rng.gen_range(-1.0..1.0);
            let s0 = State::new(0.0, v0, w0);
            let t3 = spike(&p, &ResetRule::new(1e3, v0 - 1.0, 0.0).unwrap(), s0, &ctrl).t_star;
            let t6 = spike(&p, &ResetRule::new(1e6, v0 - 1.0, 0.0).unwrap(), s0, &ctrl).t_star;
            monotone &= t6 >= t3;
            worst = worst.max((t6 - t3) / t3);
        }
    }
    report(
        2,
        "finite blow-up time",
        worst < 0.01 && monotone,
        &format!("200 no-fixed-point draws: max (t*(1e6)-t*(1e3))/t*(1e3) = {worst:.2e} (< 1e-2), t* non-decreasing: {monotone}"),
    );
}

#[test]
fn criterion_03_gronwall_sandwich() {
    let mut rng = rng(3);
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for kind in ALL_KINDS {
        for _ in 0..100 {
            let p = no_fixed_point_params(kind, &mut rng);
            let e = random_entry(&p, &mut rng);
            let g = orbit_graph(&p, &e, 1e6, 40).unwrap();
            let v = g.worst_violation();
            worst = worst.max(v);
            if v > 1e-10 {
                violations += 1;
            }
        }
    }
    report(
        3,
        "Gronwall sandwich",
        violations == 0,
        &format!("400 graphs x 40 nodes: {violations} violations, worst excursion {worst:.2e} relative to max(1,|W|)"),
    );
}

#[test]
fn criterion_04_log_divergence() {
    let mut rng = rng(4);
    let ctrl = StepControl::default();
    let mut worst: f64 = 0.0;
    let mut oracle_gap: f64 = 0.0;
    let mut oracle_slope_err: f64 = 0.0;
    let ln10 = std::f64::consts::LN_10;
    for i in 0..20 {
        let p = ModelParams::new(
            NonlinearityKind::Quadratic,
            SET_A.a * rng.gen_range(0.8..1.2),
            SET_A.b * rng.gen_range(0.8..1.2),
            SET_A.current * rng.gen_range(0.8..1.2),
        )
        .unwrap();
        let e = detect_spiking_zone_entry(&p, State::new(0.0, SET_A.c, 0.0), &ctrl).unwrap();
        let w = orbit_at(&p, &e, &[1e6, 1e7]).unwrap();
        let target = p.a * p.b * ln10;
        worst = worst.max(((w[1] - w[0]) - target).abs() / target);
        if i < 3 {
            let w6 = reference_orbit(&p, e.v1, e.w1, 1e6, 1e-12).unwrap();
            let w7 = reference_orbit(&p, e.v1, e.w1, 1e7, 1e-12).unwrap();
            oracle_gap = oracle_gap.max(rel_err(w[0], w6)).max(rel_err(w[1], w7));
            oracle_slope_err = oracle_slope_err.max(((w7 - w6) - target).abs() / target);
        }
    }
    report(
        4,
        "log divergence",
        worst < 0.02 && oracle_slope_err < 0.02 && oracle_gap < 1e-8,
        &format!(
            "20 draws around set A: worst |dW - ab ln10|/(ab ln10) = {worst:.2e} (< 2e-2); oracle increment err {oracle_slope_err:.2e}, main vs oracle {oracle_gap:.2e}"
        ),
    );
}

#[test]
fn criterion_05_convergent_adaptation() {
    let mut rng = rng(5);
    let mut worst: f64 = 0.0;
    let mut oracle_gap: f64 = 0.0;
    for kind in [NonlinearityKind::Quartic, NonlinearityKind::Exponential] {
        for i in 0..50 {
            let p = no_fixed_point_params(kind, &mut rng);
            let e = random_entry(&p, &mut rng);
            let w = orbit_at(&p, &e, &[1e4, 1e6]).unwrap();
            worst = worst.max((w[1] - w[0]).abs() / w[0].abs().max(1.0));
            if i < 3 {
                let reference = reference_orbit(&p, e.v1, e.w1, 1e6, 1e-12).unwrap();
                oracle_gap = oracle_gap.max(rel_err(w[1], reference));
            }
        }
    }
    report(
        5,
        "convergence for quartic/exponential",
        worst < 1e-6 && oracle_gap < 1e-8,
        &format!("100 draws: max |W(1e6)-W(1e4)|/max(1,|W(1e4)|) = {worst:.2e} (< 1e-6); main vs oracle {oracle_gap:.2e}"),
    );
}

/// Models of the acceptance matrix with their reset potentials.
fn acceptance_matrix() -> Vec<(String, ModelParams, f64, f64)> {
    let mut out = Vec::new();
    for set in [&SET_A, &SET_C] {
        for form in Form::BOTH {
            out.push((format!("{}/{:?}", set.name, form), set.params(form.kind()), set.c, set.d));
        }
    }
    for kind in [NonlinearityKind::Quartic, NonlinearityKind::Exponential] {
        out.push((format!("A/{}", kind.name()), SET_A.params(kind), SET_A.c, SET_A.d));
    }
    out
}

#[test]
fn criterion_06_time_domain_phase_plane_consistency() {
    let ctrl = StepControl::default();
    let mut worst: f64 = 0.0;
    let mut oracle_worst: f64 = 0.0;
    let mut cases = 0;
    for (_, p, c, _) in acceptance_matrix() {
        let e = detect_spiking_zone_entry(&p, State::new(0.0, c, 0.0), &ctrl).unwrap();
        let start = State::new(e.t1.unwrap(), e.v1, e.w1);
        for theta in [30.0, 100.0, 1e3] {
            let ev = spike(&p, &ResetRule::new(theta, c, 0.0).unwrap(), start, &ctrl);
            let w = orbit_at(&p, &e, &[theta]).unwrap()[0];
            worst = worst.max(rel_err(ev.w_at_spike, w));
            let reference = reference_integrate(&p, start, Target::Crossing { theta }, 1e-12).unwrap();
            oracle_worst = oracle_worst.max(rel_err(ev.w_at_spike, reference.state.w));
            cases += 1;
        }
    }
    report(
        6,
        "time-domain / phase-plane consistency",
        worst < 1e-6 && oracle_worst < 1e-6,
        &format!("{cases} cases: worst |w(t*) - W(theta)| / max(1,|W|) = {worst:.2e}; vs oracle {oracle_worst:.2e} (< 1e-6)"),
    );
}

struct DoublingOutcome {
    form: Form,
    passed: bool,
    theta_star: Option<f64>,
    detail: String,
}

fn pattern_summary(patterns: &[Option<Pattern>]) -> String {
    let mut labels = BTreeSet::new();
    for p in patterns {
        labels.insert(match p {
            Some(Pattern::Bursting(k)) => format!("period {k}"),
            Some(Pattern::RegularSpiking) => "period 1".into(),
            Some(other) => other.label().to_string(),
            None => "unclassified".into(),
        });
    }
    labels.into_iter().collect::<Vec<_>>().join(", ")
}

fn period_doubling(form: Form) -> DoublingOutcome {
    let spec = SweepSpec::cutoff(SET_A.params(form.kind()), SET_A.reset(45.0), 30.0, 45.0, 31);
    let rows = sweep_cutoff(&spec).unwrap();
    let patterns: Vec<_> = rows.iter().map(|r| r.pattern()).collect();
    let low = patterns[0] == Some(Pattern::RegularSpiking);
    let high = patterns[patterns.len() - 1] == Some(Pattern::Bursting(2));
    let mut theta_star = None;
    let mut stable = false;
    if low && high {
        let transitions = find_transitions(&spec, &rows, 1e-3).unwrap();
        theta_star = transitions
            .iter()
            .find(|t| t.lower == Some(Pattern::RegularSpiking) && t.upper == Some(Pattern::Bursting(2)))
            .filter(|t| t.bracket.1 - t.bracket.0 < 1e-3)
            .map(|t| t.theta_star);
        let halved = SweepSpec {
            control: spec.control.scaled_tolerances(0.5),
            ..spec.clone()
        };
        stable = sweep_cutoff(&halved).unwrap().iter().map(|r| r.pattern()).eq(patterns.iter().copied());
    }
    DoublingOutcome {
        form,
        passed: low && high && theta_star.is_some() && stable,
        theta_star,
        detail: format!(
            "{form:?}: theta=30 {:?}, theta=45 {:?}, classes seen [{}], theta* {theta_star:?}",
            patterns[0],
            patterns[patterns.len() - 1],
            pattern_summary(&patterns)
        ),
    }
}

fn doubling_outcomes() -> &'static Vec<DoublingOutcome> {
    static CELL: OnceLock<Vec<DoublingOutcome>> = OnceLock::new();
    CELL.get_or_init(|| Form::BOTH.iter().map(|&f| period_doubling(f)).collect())
}

#[test]
fn criterion_07_period_doubling_in_cutoff() {
    let outcomes = doubling_outcomes();
    let passing = outcomes.iter().find(|o| o.passed);
    let detail = outcomes.iter().map(|o| o.detail.as_str()).collect::<Vec<_>>().join("; ");
    let detail = match passing {
        Some(o) => format!("reproduced under {:?} form; {detail}", o.form),
        None => format!("no form gives period 1 -> 2 on [30, 45]; {detail}"),
    };
    report(7, "period doubling in theta (set A)", passing.is_some(), &detail);
}

#[test]
fn criterion_08_intricate_structure() {
    let mut results = Vec::new();
    let mut any = false;
    for form in Form::BOTH {
        let spec = SweepSpec::cutoff(SET_C.params(form.kind()), SET_C.reset(100.0), 20.0, 100.0, 401);
        let rows = sweep_cutoff(&spec).unwrap();
        let patterns: Vec<_> = rows.iter().map(|r| r.pattern()).collect();
        let chaotic = patterns.iter().filter(|p| **p == Some(Pattern::Chaotic)).count();
        let has = |k: usize| patterns.iter().any(|p| p.and_then(|p| p.period()) == Some(k));
        let ok = chaotic > 0 && has(8) && has(4) && has(2);
        any |= ok;
        results.push(format!(
            "{form:?}: {chaotic} chaotic rows, periods 8/4/2 present: {}/{}/{}, classes seen [{}]",
            has(8),
            has(4),
            has(2),
            pattern_summary(&patterns)
        ));
    }
    report(8, "intricate structure (set C, 401 points)", any, &results.join("; "));
}

#[test]
fn criterion_09_firing_rate_trends() {
    let make = |kind: NonlinearityKind, lo: f64, hi: f64, n: usize| {
        let mut spec = SweepSpec::cutoff(SET_A.params(kind), SET_A.reset(hi), lo, hi, n);
        spec.spacing = Spacing::Log;
        spec
    };
    let quad = make(NonlinearityKind::Quadratic, 10.0, 1e3, 30);
    let rows = sweep_cutoff(&quad).unwrap();
    let rates: Vec<f64> = rows.iter().map(|r| r.firing_rate).collect();
    let decreasing = rates.windows(2).all(|w| w[1] < w[0]) && rows.iter().all(|r| r.flags.is_clean());

    let quartic = make(NonlinearityKind::Quartic, 500.0, 1e3, 2);
    let q = sweep_cutoff(&quartic).unwrap();
    let change = (q[1].firing_rate - q[0].firing_rate).abs() / q[1].firing_rate;

    // plateau check: one inter-spike interval from the stationary reset state by the oracle
    let p = SET_A.params(NonlinearityKind::Quartic);
    let r = SET_A.reset(1e3);
    let train = simulate_train(&p, &r, State::new(0.0, r.c, 0.0), &StepControl::default(), Stop::spikes(600)).unwrap();
    let w_reset = *train.reset_w.last().unwrap();
    let isi = reference_integrate(&p, State::new(0.0, r.c, w_reset), Target::Crossing { theta: r.theta }, 1e-12)
        .unwrap()
        .state
        .t;
    let plateau_err = (1.0 / isi - q[1].firing_rate).abs() * isi;
    report(
        9,
        "firing-rate trends",
        decreasing && change < 1e-3 && plateau_err < 1e-6,
        &format!(
            "quadratic rate over theta in [10, 1e3] strictly decreasing: {decreasing} ({:.5} -> {:.5}); quartic |rate(1e3)-rate(500)|/rate = {change:.2e} (< 1e-3), plateau {:.6} vs oracle {:.6}",
            rates[0],
            rates[rates.len() - 1],
            q[1].firing_rate,
            1.0 / isi
        ),
    );
}

fn euler_pattern(p: &ModelParams, r: &ResetRule, dt: f64) -> Option<Pattern> {
    let settings = AnalysisSettings::default();
    let train = euler_train(p, r, State::new(0.0, r.c, 0.0), dt, Stop::spikes(settings.required_spikes() + 200)).ok()?;
    classify_train(&train, &settings).ok().map(|c| c.pattern)
}

#[test]
fn criterion_10_euler_sensitivity() {
    let outcomes = doubling_outcomes();
    let Some(found) = outcomes.iter().find(|o| o.passed) else {
        report(
            10,
            "Euler sensitivity near theta*",
            false,
            "no period-doubling theta* exists under either form (criterion 7), so the +-5% window is undefined",
        );
        return;
    };
    let theta_star = found.theta_star.unwrap();
    let p = SET_A.params(found.form.kind());
    let ctrl = StepControl::default();
    let settings = AnalysisSettings::default();
    let mut euler_differs = false;
    let mut adaptive_stable = true;
    for i in 0..11 {
        let theta = theta_star * (0.95 + 0.01 * i as f64);
        let r = SET_A.reset(theta);
        euler_differs |= euler_pattern(&p, &r, 1e-3) != euler_pattern(&p, &r, 1e-4);
        let classify = |c: &StepControl| {
            let train = simulate_train(&p, &r, State::new(0.0, r.c, 0.0), c, Stop::spikes(settings.required_spikes() + 200)).unwrap();
            classify_train(&train, &settings).unwrap().pattern
        };
        adaptive_stable &= classify(&ctrl) == classify(&ctrl.scaled_tolerances(0.5));
    }
    report(
        10,
        "Euler sensitivity near theta*",
        euler_differs && adaptive_stable,
        &format!("theta* = {theta_star:.4}: Euler dt 1e-3 vs 1e-4 differ somewhere: {euler_differs}; adaptive tolerance-independent: {adaptive_stable}"),
    );
}

#[test]
fn criterion_11_property_suite() {
    let mut failures: Vec<String> = Vec::new();
    let mut check = |name: &str, ok: bool, detail: String| {
        if !ok {
            failures.push(format!("{name}: {detail}"));
        }
    };
    let ctrl = StepControl::default();
    let mut rng = rng(11);

    // model: convexity, equilibria, explosion bound against direct integration
    let mut convex_ok = true;
    for kind in ALL_KINDS {
        for _ in 0..200 {
            let mut v = [rng.gen_range(-100.0..100.0), rng.gen_range(-100.0..100.0), rng.gen_range(-100.0..100.0)];
            v.sort_by(f64::total_cmp);
            if v[0] == v[2] {
                continue;
            }
            let f = |x: f64| model::f_eval(&kind, 0.02, x).unwrap_or(f64::INFINITY);
            let lam = (v[2] - v[1]) / (v[2] - v[0]);
            let chord = lam * f(v[0]) + (1.0 - lam) * f(v[2]);
            convex_ok &= f(v[1]) <= chord * (1.0 + 1e-12) + 1e-12;
        }
    }
    check("convexity", convex_ok, String::new());

    let mut residual: f64 = 0.0;
    let mut labels_ok = true;
    for kind in ALL_KINDS {
        for _ in 0..50 {
            let a = rng.gen_range(0.005..0.2);
            let b = rng.gen_range(0.0..0.5);
            let current = rng.gen_range(-5.0..5.0);
            let p = ModelParams::new(kind, a, b, current).unwrap();
            for eq in model::fixed_points(&p).unwrap() {
                residual = residual.max(p.nullcline_gap(eq.v_star).unwrap().abs() / p.f(eq.v_star).unwrap().abs().max(1.0));
                let j = model::jacobian(&p, eq.v_star);
                let tr = j[0][0] + j[1][1];
                let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
                let disc = tr * tr - 4.0 * det;
                let max_re = if disc >= 0.0 { 0.5 * (tr + disc.sqrt()) } else { 0.5 * tr };
                if max_re.abs() > 1e-9 {
                    labels_ok &= eq.stability.is_attracting() == (max_re < 0.0);
                }
            }
        }
    }
    check("fixed point residual", residual < 1e-10, format!("{residual:.2e}"));
    check("stability labels", labels_ok, String::new());

    let mut bound_err: f64 = 0.0;
    for _ in 0..50 {
        let b = rng.gen_range(0.0..0.5);
        let current = rng.gen_range(0.5..5.0);
        let w = rng.gen_range(-1.0..0.4);
        let v0 = rng.gen_range(-2.0..2.0);
        let p = ModelParams::new(NonlinearityKind::Quadratic, 0.0, b, current).unwrap();
        let bound = explosion_time_bound_quadratic(&p, v0, w).unwrap();
        // time to infinity of u' = u^2 - b u + (I - w) by quadrature of du/(u^2 - b u + I - w)
        let g = |u: f64| 1.0 / (u * u - b * u + current - w);
        let head = reference_quadrature(&g, v0, 10.0, 1e-14).unwrap();
        let m = 10.0 - 0.5 * b;
        let kappa = current - w - 0.25 * b * b;
        let tail = tail_integral(&NonlinearityKind::Quadratic, 0.0, m, kappa);
        bound_err = bound_err.max((bound - (head + tail)).abs() / bound);
    }
    check("explosion bound vs quadrature", bound_err < 1e-8, format!("{bound_err:.2e}"));

    // integrator: monotone adaptation, reset exactness, oracle agreement, Euler order
    let mut monotone = true;
    let mut exact_reset = true;
    let mut oracle_train: f64 = 0.0;
    for (name, p, c, d) in acceptance_matrix() {
        let r = ResetRule::new(30.0, c, d).unwrap();
        integrate_to_spike_observed(&p, &r, State::new(0.0, c, 0.0), &ctrl, &mut |s| {
            if p.b * s.v - s.w > 0.0 {
                monotone &= p.a * (p.b * s.v - s.w) > 0.0;
            }
        })
        .unwrap();
        let train = simulate_train(&p, &r, State::new(0.0, c, 0.0), &ctrl, Stop::spikes(5)).unwrap();
        let mut start = State::new(0.0, c, 0.0);
        for (ev, &rw) in train.events.iter().zip(&train.reset_w) {
            exact_reset &= rw.to_bits() == (ev.w_at_spike + d).to_bits();
            let reference = reference_integrate(&p, start, Target::Crossing { theta: 30.0 }, 1e-12).unwrap();
            oracle_train = oracle_train.max(rel_err(ev.w_at_spike, reference.state.w));
            // restart the oracle from the main path's reset so errors do not compound
            start = State::new(ev.t_star, c, rw);
        }
        check(&format!("train of {name}"), train.len() == 5, format!("{} spikes", train.len()));
    }
    check("monotone adaptation", monotone, String::new());
    check("reset exactness", exact_reset, String::new());
    check("adaptive vs oracle w_at_spike", oracle_train < 1e-6, format!("{oracle_train:.2e}"));

    let quad = ModelParams::new(NonlinearityKind::Quadratic, 0.0, 0.0, 0.0).unwrap();
    let r = ResetRule::new(100.0, 0.5, 0.0).unwrap();
    let dts = [1e-2, 1e-3, 1e-4, 1e-5];
    let errs: Vec<f64> = dts
        .iter()
        .map(|&dt| {
            let tr = euler_train(&quad, &r, State::new(0.0, 1.0, 0.0), dt, Stop::spikes(1)).unwrap();
            (tr.events[0].t_star - 0.99).abs()
        })
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = dts.iter().zip(&errs).map(|(d, e)| (d.ln(), e.ln())).unzip();
    let mx = xs.iter().sum::<f64>() / 4.0;
    let my = ys.iter().sum::<f64>() / 4.0;
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx) * (x - mx)).sum::<f64>();
    check("Euler order", (slope - 1.0).abs() <= 0.2, format!("slope {slope:.3}"));

    // phase plane: semilog profile shape
    let p = SET_A.params(NonlinearityKind::Quadratic);
    let e = SpikingZoneEntry::new(&p, 10.0, 0.0).unwrap();
    let w = orbit_at(&p, &e, &[1e4, 1e5, 1e6, 1e7]).unwrap();
    let inc: Vec<f64> = w.windows(2).map(|x| x[1] - x[0]).collect();
    check(
        "quadratic profile asymptotically linear in ln v",
        (inc[2] - inc[1]).abs() < 0.02 * inc[2] && inc[2] > 0.0,
        format!("{inc:?}"),
    );
    let pq = SET_A.params(NonlinearityKind::Quartic);
    let eq = SpikingZoneEntry::new(&pq, 2.0, 0.0).unwrap();
    let wq = orbit_at(&pq, &eq, &[1e4, 1e5, 1e6, 1e7]).unwrap();
    check(
        "quartic profile plateaus",
        (wq[3] - wq[1]).abs() < 1e-6 * wq[1].abs().max(1.0),
        format!("{wq:?}"),
    );

    // spike analysis: transient doubling, tolerance halving, bursting rate
    for (name, p, c, d) in acceptance_matrix() {
        let r = ResetRule::new(30.0, c, d).unwrap();
        // 500 spikes: the default tail then starts after spike 300, doubling the
        // transient moves it to 400
        let train = simulate_train(&p, &r, State::new(0.0, c, 0.0), &ctrl, Stop::spikes(500)).unwrap();
        let base = AnalysisSettings::default();
        let first = classify_train(&train, &base).unwrap();
        let doubled = classify_train(
            &train,
            &AnalysisSettings {
                transient_discard: 2 * base.transient_discard,
                ..base
            },
        )
        .unwrap();
        check(&format!("transient doubling {name}"), first.pattern == doubled.pattern, format!("{:?} vs {:?}", first.pattern, doubled.pattern));
        let half = simulate_train(&p, &r, State::new(0.0, c, 0.0), &ctrl.scaled_tolerances(0.5), Stop::spikes(500)).unwrap();
        let halved = classify_train(&half, &base).unwrap();
        check(&format!("tolerance halving {name}"), first.pattern == halved.pattern, format!("{:?} vs {:?}", first.pattern, halved.pattern));
        if let Pattern::Bursting(k) = first.pattern {
            let isis = isi_sequence(&train);
            let cycle: f64 = isis[isis.len() - k..].iter().sum();
            let rate = firing_rate(&train, 0.25);
            check(&format!("bursting rate {name}"), rel_err(rate, k as f64 / cycle) < 1e-3, format!("{rate} vs {}", k as f64 / cycle));
            let sizes = burst_sizes(&isis[isis.len() - k..]);
            check(&format!("burst sizes {name}"), sizes.iter().sum::<usize>() == k || sizes.is_empty(), format!("{sizes:?}"));
        }
    }

    // bifurcation: order independence, refinement, bracketing
    let spec = SweepSpec::cutoff(SET_A.params(NonlinearityKind::izhikevich()), SET_A.reset(45.0), 30.0, 45.0, 7);
    let par = sweep_cutoff(&spec).unwrap();
    let seq = sweep_cutoff_sequential(&spec).unwrap();
    let mut reversed: Vec<_> = spec.points().into_iter().rev().map(|v| aif_core::bifurcation::evaluate_point(&spec, v)).collect();
    reversed.reverse();
    check("row independence", par == seq && par == reversed, String::new());
    let fine = sweep_cutoff(&SweepSpec { n_points: 13, ..spec.clone() }).unwrap();
    check(
        "refinement stability",
        par.iter().enumerate().all(|(i, row)| *row == fine[2 * i]),
        String::new(),
    );
    // class change across a saddle-node in I: quiescent below b^2/4 + ..., spiking above
    let sn = ModelParams::new(NonlinearityKind::Quadratic, 0.5, 1.0, 0.0).unwrap();
    let sweep = SweepSpec {
        parameter: SweptParameter::Current,
        ..SweepSpec::cutoff(sn, ResetRule::new(50.0, -0.2, 0.0).unwrap(), 0.0, 1.0, 5)
    };
    let rows = sweep_cutoff(&sweep).unwrap();
    let transitions = find_transitions(&sweep, &rows, 1e-3).unwrap();
    let bracket_ok = transitions.len() == 1
        && transitions[0].bracket.1 - transitions[0].bracket.0 < 1e-3
        && transitions[0].lower.is_some()
        && transitions[0].upper.is_some();
    check("transition bracketing", bracket_ok, format!("{transitions:?}"));
    check(
        "refine rejects equal classes",
        refine_transition(&sweep, 0.9, 1.0, 1e-3).is_err(),
        String::new(),
    );

    // oracle self-consistency
    let p = SET_A.params(NonlinearityKind::Quadratic);
    let s0 = State::new(0.0, SET_A.c, 0.0);
    let coarse = reference_integrate(&p, s0, Target::Crossing { theta: 30.0 }, 1e-9).unwrap();
    let fine = reference_integrate(&p, s0, Target::Crossing { theta: 30.0 }, 1e-12).unwrap();
    check(
        "oracle tolerance halving",
        rel_err(coarse.state.w, fine.state.w) < 1e-9 && rel_err(coarse.state.t, fine.state.t) < 1e-9,
        format!("{coarse:?} vs {fine:?}"),
    );

    let detail = if failures.is_empty() {
        "model, integrator, phase-plane, spike-analysis, bifurcation and oracle invariants hold".to_string()
    } else {
        failures.join("; ")
    };
    report(11, "property suite and oracle gates", failures.is_empty(), &detail);
}
