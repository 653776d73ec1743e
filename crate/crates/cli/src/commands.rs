use std::collections::BTreeMap;

use aif_core::bifurcation::{
    divergence_profile, find_transitions, rate_curve, sweep_cutoff, DiagramRow, InitialPolicy, SweepSpec, SweptParameter,
};
use aif_core::integrator::{euler_train, simulate_train, SpikeTrain, StepControl, Stop, TrainFailure};
use aif_core::model::{ModelParams, ResetRule};
use aif_core::phase_plane::{
    detect_spiking_zone_entry, divergence_class, g_limit, orbit_graph, predicted_log_slope, DivergenceClass,
    SpikingZoneEntry,
};
use aif_core::spike_analysis::{burst_sizes, classify_train, firing_rate, isi_sequence, AnalysisSettings, Pattern};
use aif_core::Error;
use serde::Serialize;

use crate::config::{
    BoundsExperiment, ClassifyExperiment, Config, EntrySection, ModelSection, Policy, ProfileExperiment,
    RateCurveExperiment, Scheme, SimulateExperiment, SweepExperiment,
};
use crate::error::CliError;
use crate::output::{num, opt_num, OutDir, Table};

fn train_error(f: TrainFailure) -> CliError {
    CliError::numerical(f.error, format!("after {} spikes", f.train.len()))
}

fn pattern_label(p: Option<Pattern>) -> &'static str {
    p.map_or("", |p| p.label())
}

/// Classification of one train, tolerant of short trains.
#[derive(Debug, Serialize)]
struct ClassReport {
    class: Option<&'static str>,
    period: Option<usize>,
    stationary_values: Vec<f64>,
    /// Spikes per burst over one period, from the ISI gap split.
    burst_sizes: Vec<usize>,
    firing_rate: f64,
    n_spikes: usize,
    note: Option<String>,
}

fn class_report(train: &SpikeTrain, settings: &AnalysisSettings, rate_tail: f64) -> Result<ClassReport, CliError> {
    let (pattern, values, note) = match classify_train(train, settings) {
        Ok(c) => (Some(c.pattern), c.stationary_values, None),
        Err(e @ Error::InsufficientData { .. }) => (None, Vec::new(), Some(e.to_string())),
        Err(e) => return Err(CliError::numerical(e, None)),
    };
    let bursts = match pattern {
        Some(Pattern::Bursting(k)) => {
            let isis = isi_sequence(train);
            burst_sizes(&isis[isis.len().saturating_sub(k)..])
        }
        _ => Vec::new(),
    };
    Ok(ClassReport {
        class: pattern.map(|p| p.label()),
        period: pattern.and_then(|p| p.period()),
        stationary_values: values,
        burst_sizes: bursts,
        firing_rate: firing_rate(train, rate_tail),
        n_spikes: train.len(),
        note,
    })
}

pub fn simulate(cfg: &Config<SimulateExperiment>, out: &OutDir) -> Result<(), CliError> {
    let (p, r, ctrl) = (cfg.params()?, cfg.reset()?, cfg.control()?);
    let e = &cfg.experiment;
    let stop = Stop {
        max_spikes: Some(e.n_spikes),
        t_end: e.t_end,
    };
    let s0 = cfg.start();
    let train = match e.scheme {
        Scheme::Adaptive => simulate_train(&p, &r, s0, &ctrl, stop),
        Scheme::Euler => {
            let dt = e
                .dt
                .ok_or_else(|| CliError::config("experiment.dt", "required for scheme euler"))?;
            euler_train(&p, &r, s0, dt, stop)
        }
    }
    .map_err(train_error)?;

    let mut table = Table::new(&["index", "t_star", "w_at_spike", "reset_w", "isi"]);
    let mut previous: Option<f64> = None;
    for (i, (ev, rw)) in train.events.iter().zip(&train.reset_w).enumerate() {
        table.push(vec![
            i.to_string(),
            num(ev.t_star),
            num(ev.w_at_spike),
            num(*rw),
            opt_num(previous.map(|t| ev.t_star - t)),
        ]);
        previous = Some(ev.t_star);
    }
    out.csv("spikes.csv", &table, &format!("terminated by {:?}", train.terminated_by))?;

    let report = class_report(&train, &e.analysis, e.rate_tail_fraction)?;
    let summary = format!("class {}", report.class.unwrap_or("unclassified"));
    #[derive(Serialize)]
    struct Summary<'a> {
        model: &'static str,
        #[serde(flatten)]
        report: ClassReport,
        terminated_by: String,
        scheme: &'a str,
    }
    let body = Summary {
        model: p.kind.name(),
        report,
        terminated_by: format!("{:?}", train.terminated_by),
        scheme: match e.scheme {
            Scheme::Adaptive => "adaptive",
            Scheme::Euler => "euler",
        },
    };
    out.json("summary.json", &body, &summary)
}

fn parameter_name(p: SweptParameter) -> &'static str {
    match p {
        SweptParameter::Theta => "theta",
        SweptParameter::Current => "I",
        SweptParameter::D => "d",
    }
}

fn sweep_spec(cfg: &Config<SweepExperiment>) -> Result<SweepSpec, CliError> {
    let e = &cfg.experiment;
    let (v0, w0) = (cfg.initial.v0, cfg.initial.w0);
    let spec = SweepSpec {
        params: cfg.params()?,
        reset: cfg.reset()?,
        parameter: e.parameter,
        lo: e.lo,
        hi: e.hi,
        n_points: e.n_points,
        spacing: e.spacing,
        n_spikes: e.n_spikes,
        initial: match e.policy {
            Policy::Fresh => InitialPolicy::Fresh { v0, w0 },
            Policy::Continuation => InitialPolicy::Continuation { v0, w0 },
        },
        control: cfg.control()?,
        analysis: e.analysis,
        rate_tail_fraction: e.rate_tail_fraction,
    };
    spec.validate().map_err(|err| CliError::config("experiment", err.to_string()))?;
    Ok(spec)
}

fn diagram_table(spec: &SweepSpec, rows: &[DiagramRow]) -> Table {
    let width = spec.analysis.max_period;
    let mut header = vec![parameter_name(spec.parameter).to_string(), "class".into(), "period".into()];
    header.extend((1..=width).map(|i| format!("w{i}")));
    header.extend(["rate".to_string(), "n_spikes".into(), "flags".into()]);
    let mut table = Table::new(&header);
    for row in rows {
        let mut cells = vec![
            num(row.theta),
            pattern_label(row.pattern()).to_string(),
            row.period().map(|k| k.to_string()).unwrap_or_default(),
        ];
        let values = row.class.as_ref().map_or(&[][..], |c| &c.stationary_values[..]);
        cells.extend((0..width).map(|i| values.get(i).map(|&x| num(x)).unwrap_or_default()));
        cells.extend([num(row.firing_rate), row.n_spikes.to_string(), row.flags.describe()]);
        table.push(cells);
    }
    table
}

fn class_counts(rows: &[DiagramRow]) -> String {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for row in rows {
        let key = match row.pattern() {
            Some(Pattern::Bursting(k)) => format!("period {k}"),
            Some(p) => p.label().to_string(),
            None => "unclassified".to_string(),
        };
        *counts.entry(key).or_default() += 1;
    }
    counts.iter().map(|(k, n)| format!("{k}: {n}")).collect::<Vec<_>>().join(", ")
}

pub fn sweep(cfg: &Config<SweepExperiment>, out: &OutDir) -> Result<(), CliError> {
    let spec = sweep_spec(cfg)?;
    let rows = sweep_cutoff(&spec)?;
    let flagged = rows.iter().filter(|r| !r.flags.is_clean()).count();
    out.csv(
        "diagram.csv",
        &diagram_table(&spec, &rows),
        &format!("{}; {flagged} flagged", class_counts(&rows)),
    )?;
    if let Some(resolution) = cfg.experiment.refine {
        if !(resolution > 0.0) {
            return Err(CliError::config("experiment.refine", "must be positive"));
        }
        let transitions = find_transitions(&spec, &rows, resolution)?;
        let summary = transitions
            .iter()
            .map(|t| {
                format!(
                    "{} -> {} at {:.6}",
                    pattern_label(t.lower),
                    pattern_label(t.upper),
                    t.theta_star
                )
            })
            .collect::<Vec<_>>()
            .join(", ");
        out.json(
            "transitions.json",
            &transitions,
            &format!("{} transitions{}{summary}", transitions.len(), if summary.is_empty() { "" } else { ": " }),
        )?;
    }
    Ok(())
}

pub fn classify(cfg: &Config<ClassifyExperiment>, out: &OutDir) -> Result<(), CliError> {
    let (p, r, ctrl) = (cfg.params()?, cfg.reset()?, cfg.control()?);
    let e = &cfg.experiment;
    let stop = Stop::spikes(e.n_spikes);
    let s0 = cfg.start();
    let tail = aif_core::bifurcation::DEFAULT_RATE_TAIL;
    let adaptive = |c: &StepControl| -> Result<ClassReport, CliError> {
        let train = simulate_train(&p, &r, s0, c, stop).map_err(train_error)?;
        class_report(&train, &e.analysis, tail)
    };
    let main = adaptive(&ctrl)?;
    let halved = if e.tolerance_check { Some(adaptive(&ctrl.scaled_tolerances(0.5))?) } else { None };

    #[derive(Serialize)]
    struct EulerReport {
        dt: f64,
        #[serde(flatten)]
        report: Option<ClassReport>,
        error: Option<String>,
    }
    let mut euler = Vec::new();
    for &dt in &e.euler_dt {
        if !(dt > 0.0) {
            return Err(CliError::config("experiment.euler_dt", format!("step {dt} must be positive")));
        }
        // a diverging Euler run is a result here, not a failure
        let entry = match euler_train(&p, &r, s0, dt, stop) {
            Ok(train) => EulerReport {
                dt,
                report: Some(class_report(&train, &e.analysis, tail)?),
                error: None,
            },
            Err(f) => EulerReport {
                dt,
                report: None,
                error: Some(f.to_string()),
            },
        };
        euler.push(entry);
    }

    let robust = halved.as_ref().is_none_or(|h| h.class == main.class && h.period == main.period);
    let mut summary = format!("adaptive {}", main.class.unwrap_or("unclassified"));
    if let Some(k) = main.period {
        summary.push_str(&format!(" (period {k})"));
    }
    summary.push_str(&format!("; stable under halved tolerances: {robust}"));
    for x in &euler {
        let label = x.report.as_ref().and_then(|r| r.class).unwrap_or("failed");
        summary.push_str(&format!("; euler dt={} {label}", x.dt));
    }

    #[derive(Serialize)]
    struct Body {
        model: &'static str,
        adaptive: ClassReport,
        halved_tolerance: Option<ClassReport>,
        stable_under_halving: bool,
        euler: Vec<EulerReport>,
    }
    let body = Body {
        model: p.kind.name(),
        adaptive: main,
        halved_tolerance: halved,
        stable_under_halving: robust,
        euler,
    };
    out.json("classify.json", &body, &summary)
}

fn entry_for(
    p: &ModelParams,
    given: Option<EntrySection>,
    cfg_start: aif_core::integrator::State,
    ctrl: &StepControl,
) -> Result<SpikingZoneEntry, CliError> {
    match given {
        Some(EntrySection { v1, w1 }) => {
            SpikingZoneEntry::new(p, v1, w1).map_err(|e| CliError::config("experiment.entry", e.to_string()))
        }
        None => detect_spiking_zone_entry(p, cfg_start, ctrl).map_err(|e| CliError::numerical(e, "entry detection".to_string())),
    }
}

pub fn bounds(cfg: &Config<BoundsExperiment>, out: &OutDir) -> Result<(), CliError> {
    let (p, ctrl) = (cfg.params()?, cfg.control()?);
    cfg.reset()?;
    let e = &cfg.experiment;
    let entry = entry_for(&p, e.entry, cfg.start(), &ctrl)?;
    let graph = orbit_graph(&p, &entry, e.v_max, e.n_nodes)?;
    let mut table = Table::new(&["v", "W", "lower", "upper"]);
    for row in graph.rows() {
        table.push(row.iter().map(|&x| num(x)).collect());
    }
    let worst = graph.worst_violation();
    out.csv("orbit.csv", &table, &format!("worst envelope violation {worst:e}"))?;

    #[derive(Serialize)]
    struct Body {
        model: &'static str,
        entry: SpikingZoneEntry,
        g_limit: f64,
        divergence: DivergenceClass,
        predicted_log_slope: Option<f64>,
        worst_violation: f64,
    }
    let divergence = divergence_class(&p, &entry)?;
    let body = Body {
        model: p.kind.name(),
        entry,
        g_limit: g_limit(&p, &entry)?,
        divergence,
        predicted_log_slope: predicted_log_slope(&p),
        worst_violation: worst,
    };
    let summary = match divergence {
        DivergenceClass::LogDivergent { asymptotic_slope } => format!("log-divergent, slope {asymptotic_slope:.6e}"),
        DivergenceClass::Convergent { w_limit } => format!("convergent, limit {w_limit:.6e}"),
    };
    out.json("bounds.json", &body, &summary)
}

fn all_models(main: &ModelSection, extra: &[ModelSection]) -> Result<Vec<ModelParams>, CliError> {
    std::iter::once(main)
        .chain(extra)
        .enumerate()
        .map(|(i, m)| {
            m.params().map_err(|err| match err {
                CliError::Config { field, reason } if i > 0 => {
                    CliError::config(&format!("experiment.models[{}]{}", i - 1, field.trim_start_matches("model")), reason)
                }
                other => other,
            })
        })
        .collect()
}

pub fn profile(cfg: &Config<ProfileExperiment>, out: &OutDir) -> Result<(), CliError> {
    let ctrl = cfg.control()?;
    cfg.reset()?;
    let e = &cfg.experiment;
    let mut table = Table::new(&["model", "v", "W"]);
    let mut notes = Vec::new();
    for p in all_models(&cfg.model, &e.models)? {
        let entry = entry_for(&p, e.entry, cfg.start(), &ctrl)?;
        let samples = divergence_profile(&p, &entry, e.v_max, e.n_nodes)?;
        for &(v, w) in &samples {
            table.push(vec![p.kind.name().to_string(), num(v), num(w)]);
        }
        if let Some(&(_, last)) = samples.last() {
            notes.push(format!("{} W(v_max) = {last:.6e}", p.kind.name()));
        }
    }
    out.csv("profile.csv", &table, &notes.join(", "))
}

pub fn rate_curve_cmd(cfg: &Config<RateCurveExperiment>, out: &OutDir) -> Result<(), CliError> {
    let (r, ctrl): (ResetRule, StepControl) = (cfg.reset()?, cfg.control()?);
    let e = &cfg.experiment;
    let (v0, w0) = (cfg.initial.v0, cfg.initial.w0);
    let specs = all_models(&cfg.model, &e.models)?
        .into_iter()
        .map(|p| {
            let mut spec = SweepSpec::cutoff(p, r, e.lo, e.hi, e.n_points);
            spec.spacing = e.spacing;
            spec.n_spikes = e.n_spikes;
            spec.initial = InitialPolicy::Fresh { v0, w0 };
            spec.control = ctrl;
            spec.rate_tail_fraction = e.rate_tail_fraction;
            spec.validate().map_err(|err| CliError::config("experiment", err.to_string()))?;
            Ok(spec)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let tables = rate_curve(&specs)?;
    let mut table = Table::new(&["model", "theta", "rate", "flags"]);
    let mut notes = Vec::new();
    for t in &tables {
        for pt in &t.points {
            table.push(vec![t.model.clone(), num(pt.theta), num(pt.rate), pt.flags.describe()]);
        }
        if let (Some(first), Some(last)) = (t.points.first(), t.points.last()) {
            notes.push(format!("{} {:.6} -> {:.6}", t.model, first.rate, last.rate));
        }
    }
    out.csv("rates.csv", &table, &notes.join(", "))
}
