#![allow(dead_code)]

use aif_core::model::{self, ModelParams, NonlinearityKind, ResetRule};
use aif_core::phase_plane::SpikingZoneEntry;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const ALL_KINDS: [NonlinearityKind; 4] = [
    NonlinearityKind::Quadratic,
    NonlinearityKind::izhikevich(),
    NonlinearityKind::Quartic,
    NonlinearityKind::Exponential,
];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Which quadratic form parameter sets A and C are read under.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Form {
    Pure,
    Izhikevich,
}

impl Form {
    pub const BOTH: [Form; 2] = [Form::Pure, Form::Izhikevich];

    pub fn kind(self) -> NonlinearityKind {
        match self {
            Form::Pure => NonlinearityKind::Quadratic,
            Form::Izhikevich => NonlinearityKind::izhikevich(),
        }
    }
}

pub struct ParamSet {
    pub name: &'static str,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub current: f64,
}

pub const SET_A: ParamSet = ParamSet {
    name: "A",
    a: 0.02,
    b: 0.19,
    c: -60.0,
    d: 1.419,
    current: 10.25,
};

pub const SET_C: ParamSet = ParamSet {
    name: "C",
    a: 0.02,
    b: 0.19,
    c: -57.7,
    d: 1.15,
    current: 10.377,
};

impl ParamSet {
    pub fn params(&self, kind: NonlinearityKind) -> ModelParams {
        ModelParams::new(kind, self.a, self.b, self.current).unwrap()
    }

    pub fn reset(&self, theta: f64) -> ResetRule {
        ResetRule::new(theta, self.c, self.d).unwrap()
    }
}

/// Random parameters for which `F(v) - b v + I` has no root.
pub fn no_fixed_point_params(kind: NonlinearityKind, rng: &mut impl Rng) -> ModelParams {
    loop {
        let a = rng.gen_range(0.005..0.1);
        let b = rng.gen_range(0.05..0.4);
        let base = ModelParams::new(kind, a, b, 0.0).unwrap();
        let v_min = model::gap_minimiser(&base).unwrap();
        let gap_min = base.nullcline_gap(v_min).unwrap();
        let p = ModelParams {
            current: -gap_min + rng.gen_range(0.1..5.0),
            ..base
        };
        if model::fixed_points(&p).unwrap().is_empty() {
            return p;
        }
    }
}

/// Typical subthreshold starting potential for the kind.
pub fn start_range(kind: NonlinearityKind) -> std::ops::Range<f64> {
    match kind {
        NonlinearityKind::GeneralizedQuadratic { .. } => -70.0..-60.0,
        _ => -2.0..2.0,
    }
}

/// A random valid entry into the spiking zone.
pub fn random_entry(p: &ModelParams, rng: &mut impl Rng) -> SpikingZoneEntry {
    let v_min = model::gap_minimiser(p).unwrap();
    let scale = match p.kind {
        NonlinearityKind::GeneralizedQuadratic { .. } => 20.0,
        _ => 3.0,
    };
    loop {
        let v1 = v_min + rng.gen_range(0.0..scale);
        let w1 = p.b * v1 - rng.gen_range(0.01..3.0);
        if let Ok(e) = SpikingZoneEntry::new(p, v1, w1) {
            return e;
        }
    }
}

pub fn rel_err(x: f64, reference: f64) -> f64 {
    (x - reference).abs() / reference.abs().max(1.0)
}
