//! Spike-pattern classification from the sequence of post-spike adaptation
//! values: convergence means regular spiking, a cycle of length `k` means
//! bursting, and no cycle up to `max_period` is labelled chaotic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::SpikeTrain;

pub const DEFAULT_TRANSIENT: usize = 200;
pub const DEFAULT_TAIL: usize = 200;
pub const DEFAULT_TOL: f64 = 1e-5;
pub const DEFAULT_MAX_PERIOD: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "class", content = "period")]
pub enum Pattern {
    Quiescent,
    RegularSpiking,
    Bursting(usize),
    /// Operational label: no period up to `max_period` at the tolerance.
    Chaotic,
}

impl Pattern {
    /// Reset-sequence period: 1 for regular spiking, `k` for bursting.
    pub fn period(&self) -> Option<usize> {
        match *self {
            Pattern::RegularSpiking => Some(1),
            Pattern::Bursting(k) => Some(k),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Pattern::Quiescent => "Quiescent",
            Pattern::RegularSpiking => "RegularSpiking",
            Pattern::Bursting(_) => "Bursting",
            Pattern::Chaotic => "Chaotic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternClass {
    pub pattern: Pattern,
    /// One value for regular spiking, `k` for bursting (in sequence order),
    /// the whole analysed tail for chaos, empty when quiescent.
    pub stationary_values: Vec<f64>,
    pub transient_len: usize,
}

/// Classification settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisSettings {
    pub transient_discard: usize,
    /// Number of reset values examined after the transient.
    pub tail: usize,
    pub tol: f64,
    pub max_period: usize,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        AnalysisSettings {
            transient_discard: DEFAULT_TRANSIENT,
            tail: DEFAULT_TAIL,
            tol: DEFAULT_TOL,
            max_period: DEFAULT_MAX_PERIOD,
        }
    }
}

impl AnalysisSettings {
    /// Spikes a train needs for a full analysis.
    pub fn required_spikes(&self) -> usize {
        self.transient_discard + self.tail.max(2 * self.max_period + 1)
    }
}

/// Smallest period `q <= max_period` with `|w[n+q] - w[n]| < tol * scale`
/// over the tail, where `scale = max(1, range of the tail)`.
pub fn detect_period(tail: &[f64], tol: f64, max_period: usize) -> Option<usize> {
    let (lo, hi) = tail
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let threshold = tol * (hi - lo).max(1.0);
    (1..=max_period.min(tail.len().saturating_sub(1))).find(|&q| {
        tail.iter()
            .zip(&tail[q..])
            .all(|(a, b)| (b - a).abs() < threshold)
    })
}

/// Classifies a reset sequence directly.
pub fn classify_sequence(reset_w: &[f64], transient_discard: usize, tol: f64, max_period: usize) -> Result<PatternClass> {
    let required = transient_discard + 2 * max_period;
    if reset_w.len() <= required {
        return Err(Error::InsufficientData {
            required,
            available: reset_w.len(),
        });
    }
    let tail = &reset_w[transient_discard..];
    let (pattern, stationary_values) = match detect_period(tail, tol, max_period) {
        Some(1) => (Pattern::RegularSpiking, vec![tail[tail.len() - 1]]),
        Some(q) => (Pattern::Bursting(q), tail[tail.len() - q..].to_vec()),
        None => (Pattern::Chaotic, tail.to_vec()),
    };
    Ok(PatternClass {
        pattern,
        stationary_values,
        transient_len: transient_discard,
    })
}

/// Classifies a train from its post-spike adaptation values. Trains that
/// ended at rest are reported as quiescent regardless of length.
pub fn stationary_reset_sequence(
    train: &SpikeTrain,
    transient_discard: usize,
    tol: f64,
    max_period: usize,
) -> Result<PatternClass> {
    if train.is_quiescent() {
        return Ok(PatternClass {
            pattern: Pattern::Quiescent,
            stationary_values: Vec::new(),
            transient_len: train.len(),
        });
    }
    classify_sequence(&train.reset_w, transient_discard, tol, max_period)
}

/// Classifies the last `settings.tail` reset values, discarding at least
/// `settings.transient_discard` leading ones.
pub fn classify_train(train: &SpikeTrain, settings: &AnalysisSettings) -> Result<PatternClass> {
    let n = train.reset_w.len();
    let transient = settings.transient_discard.max(n.saturating_sub(settings.tail));
    stationary_reset_sequence(train, transient, settings.tol, settings.max_period)
}

/// Consecutive differences of spike times.
pub fn isi_sequence(train: &SpikeTrain) -> Vec<f64> {
    train.events.windows(2).map(|p| p[1].t_star - p[0].t_star).collect()
}

/// Reciprocal of the mean ISI over the last `tail_fraction` of events;
/// zero for quiescent trains or fewer than two events.
pub fn firing_rate(train: &SpikeTrain, tail_fraction: f64) -> f64 {
    if train.is_quiescent() || train.len() < 2 {
        return 0.0;
    }
    let frac = tail_fraction.clamp(f64::MIN_POSITIVE, 1.0);
    let n = ((train.len() as f64 * frac).ceil() as usize).clamp(2, train.len());
    let tail = &train.events[train.len() - n..];
    let span = tail[n - 1].t_star - tail[0].t_star;
    if span > 0.0 {
        (n - 1) as f64 / span
    } else {
        0.0
    }
}

/// Spikes per burst over one period of ISIs: the ISIs are split at the
/// widest gap between the sorted values; an ISI above the split closes a burst.
///
/// Returns an empty vector for fewer than two distinct ISI levels.
pub fn burst_sizes(period_isis: &[f64]) -> Vec<usize> {
    if period_isis.len() < 2 {
        return Vec::new();
    }
    let mut sorted = period_isis.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let (gap_at, gap) = sorted
        .windows(2)
        .enumerate()
        .map(|(i, w)| (i, w[1] - w[0]))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least two ISIs");
    if gap <= 0.0 {
        return Vec::new();
    }
    let split = 0.5 * (sorted[gap_at] + sorted[gap_at + 1]);
    // rotate so the period starts right after a long ISI
    let start = period_isis.iter().position(|&x| x > split).map_or(0, |i| i + 1);
    let mut sizes = Vec::new();
    let mut count = 1;
    for k in 0..period_isis.len() {
        let isi = period_isis[(start + k) % period_isis.len()];
        if isi > split {
            sizes.push(count);
            count = 1;
        } else {
            count += 1;
        }
    }
    sizes
}
