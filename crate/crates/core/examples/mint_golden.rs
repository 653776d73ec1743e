//! Regenerates `tests/golden/*.json` from the reference oracle.
//!
//! cargo run -p aif-core --example mint_golden

use std::path::Path;

use aif_core::integrator::State;
use aif_core::model::{ModelParams, NonlinearityKind};
use aif_core::oracle::{reference_improper, reference_integrate, reference_orbit, write_golden, GoldenValue, Target};
use serde_json::json;

const A: f64 = 0.02;
const B: f64 = 0.19;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    std::fs::create_dir_all(&dir)?;

    let mut crossings = Vec::new();
    for (kind, current, v0) in [
        (NonlinearityKind::izhikevich(), 10.25, -60.0),
        (NonlinearityKind::Quadratic, 10.25, -60.0),
        (NonlinearityKind::Quartic, 10.25, 0.0),
        (NonlinearityKind::Exponential, 10.25, 0.0),
    ] {
        let p = ModelParams::new(kind, A, B, current)?;
        let theta = 30.0;
        let r = reference_integrate(&p, State::new(0.0, v0, 0.0), Target::Crossing { theta }, 1e-12)?;
        let inputs = json!({ "params": p, "v0": v0, "w0": 0.0, "theta": theta });
        let name = kind.name();
        crossings.push(GoldenValue::new(&format!("{name}/t_star"), inputs.clone(), r.state.t, 1e-7));
        crossings.push(GoldenValue::new(&format!("{name}/w_at_spike"), inputs, r.state.w, 1e-7));
    }
    write_golden(&dir.join("crossings.json"), &crossings)?;

    let mut orbits = Vec::new();
    for (kind, v1, w1, v_end) in [
        (NonlinearityKind::Quadratic, 10.0, 0.0, 1e6),
        (NonlinearityKind::izhikevich(), -20.0, -10.0, 1e5),
        (NonlinearityKind::Quartic, 2.0, 0.0, 1e4),
    ] {
        let p = ModelParams::new(kind, A, B, 10.25)?;
        let w = reference_orbit(&p, v1, w1, v_end, 1e-12)?;
        let inputs = json!({ "params": p, "v1": v1, "w1": w1, "v": v_end });
        orbits.push(GoldenValue::new(&format!("{}/orbit", kind.name()), inputs, w, 1e-7));
    }
    write_golden(&dir.join("orbits.json"), &orbits)?;

    // g(∞) = -a ∫_{v1}^∞ du / (F(u) - w1 + I)
    let mut limits = Vec::new();
    for kind in [NonlinearityKind::Quartic, NonlinearityKind::Exponential, NonlinearityKind::Quadratic] {
        let p = ModelParams::new(kind, A, B, 10.377)?;
        let (v1, w1) = (2.0, 0.0);
        let integrand = |u: f64| 1.0 / (p.f(u).unwrap_or(f64::INFINITY) - w1 + p.current);
        let g = -p.a * reference_improper(&integrand, v1, 1e-13)?;
        let inputs = json!({ "params": p, "v1": v1, "w1": w1 });
        limits.push(GoldenValue::new(&format!("{}/g_limit", kind.name()), inputs, g, 1e-8));
    }
    write_golden(&dir.join("g_limits.json"), &limits)?;

    for file in ["crossings.json", "orbits.json", "g_limits.json"] {
        println!("wrote {}", dir.join(file).display());
    }
    Ok(())
}
