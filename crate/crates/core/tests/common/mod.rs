#![allow(dead_code)]

use std::path::PathBuf;

use nipah_core::analysis::r0;
use nipah_core::{ModelVariant, Params, Scenario, State};
use rand::rngs::StdRng;
use rand::Rng;

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

pub fn load_shipped(name: &str) -> Scenario {
    let text = std::fs::read_to_string(scenario_path(name)).unwrap();
    nipah_core::load_scenario(&text).unwrap()
}

fn log_uniform(rng: &mut StdRng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

/// Baseline rates perturbed by up to a factor of two each way, with `beta`
/// set so that the treatment reproduction number is log-uniform in
/// `[0.2, 5]`.
pub fn random_params(rng: &mut StdRng) -> Params {
    let mut p = Params::baseline();
    for name in [
        "pi", "sigma", "gamma", "delta", "nu", "alpha", "eps1", "eps2", "mu",
    ] {
        let v = p.get(name).unwrap() * log_uniform(rng, 0.5, 2.0);
        p.set(name, v).unwrap();
    }
    p.theta = rng.gen_range(0.0..1.0);
    p.n_total = p.carrying_capacity() * rng.gen_range(0.8..1.25);
    p.beta = 1.0;
    let unit = r0(&p, ModelVariant::Treatment).unwrap().value;
    p.beta = log_uniform(rng, 0.2, 5.0) / unit;
    p
}

/// A nonnegative state with total at most `pi / mu`, some compartments
/// occasionally exactly zero.
pub fn random_start(rng: &mut StdRng, p: &Params) -> State {
    let cap = p.carrying_capacity();
    let total = cap * rng.gen_range(0.05..1.0);
    let mut w: [f64; 5] = std::array::from_fn(|_| {
        if rng.gen_bool(0.1) {
            0.0
        } else {
            rng.gen_range(0.0..1.0)
        }
    });
    w[0] += 5.0;
    w[2] += 1e-3;
    let sum: f64 = w.iter().sum();
    let x = w.map(|v| v / sum * total);
    State::new(x[0], x[1], x[2], x[3], x[4])
}
