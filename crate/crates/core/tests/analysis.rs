mod common;

use nipah_core::analysis::*;
use nipah_core::{simulate, Dynamics, ModelVariant, Params, State, TimeGrid};
use proptest::prelude::*;
use rand::SeedableRng;

use ModelVariant::{Treatment, TreatmentFree};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs()
}

#[test]
fn baseline_reproduction_numbers() {
    let p = Params::baseline();
    let free = r0(&p, TreatmentFree).unwrap();
    let treat = r0(&p, Treatment).unwrap();
    assert!(close(free.value, free.spectral_radius, 1e-10));
    assert!(close(treat.value, treat.spectral_radius, 1e-10));
    assert!((free.value - 0.9395).abs() < 5e-4, "{}", free.value);
    assert!((treat.value - 0.6496).abs() < 5e-4, "{}", treat.value);
    for rn in [free, treat] {
        assert!(close(rn.factors.iter().product(), rn.value, 1e-12));
    }
}

#[test]
fn baseline_transmission_entry() {
    let (f, _) = next_generation_matrices(&Params::baseline(), TreatmentFree).unwrap();
    let want = 0.75 * 6102.0 / (164.7e6 * 0.000038642);
    assert!(close(f[(0, 1)], want, 1e-14));
    assert!((f[(0, 1)] - 0.7191).abs() < 1e-3);
}

#[test]
fn baseline_dfe() {
    let x = dfe(&Params::baseline(), Treatment);
    assert!((x.s - 157_911_081.0).abs() < 1.0, "{}", x.s);
    assert_eq!((x.e, x.i, x.t, x.r), (0.0, 0.0, 0.0, 0.0));
}

#[test]
fn baseline_has_no_endemic_state() {
    let p = Params::baseline();
    for v in ModelVariant::ALL {
        assert!(endemic_equilibrium(&p, v).unwrap().is_none());
    }
}

#[test]
fn high_transmission_endemic_state() {
    let mut p = Params::baseline();
    p.beta = 2.0;
    let rn = r0(&p, Treatment).unwrap().value;
    let scaled = r0(&Params::baseline(), Treatment).unwrap().value * 2.0 / 0.75;
    assert!(close(rn, scaled, 1e-12));
    assert!((rn - 1.732).abs() < 1e-3);
    let ee = endemic_equilibrium(&p, Treatment).unwrap().unwrap();
    assert!(close(ee.force_of_infection, p.mu * (rn - 1.0), 1e-14));
    assert!((ee.force_of_infection - 2.83e-5).abs() < 1e-7);
    let report = analyze(&p, Treatment).unwrap();
    assert!(report.verdicts.endemic_exists);
    assert_eq!(report.verdicts.dfe_stability, Stability::Unstable);
    assert_eq!(report.verdicts.endemic_stability, Some(Stability::Stable));
}

#[test]
fn threshold_value_has_no_endemic_state() {
    let mut p = Params::baseline();
    p.beta /= r0(&p, Treatment).unwrap().value;
    let rn = r0(&p, Treatment).unwrap().value;
    if rn <= 1.0 {
        assert!(endemic_equilibrium(&p, Treatment).unwrap().is_none());
    } else {
        // Rounding put R0 one ulp above threshold: the state sits on the DFE.
        let ee = endemic_equilibrium(&p, Treatment).unwrap().unwrap();
        assert!(ee.force_of_infection < 1e-18);
    }
}

#[test]
fn dfe_spectrum_follows_threshold() {
    let mut p = Params::baseline();
    let at = |p: &Params| jacobian_spectrum_at(p, &dfe(p, Treatment), Treatment).unwrap();
    let s = at(&p);
    assert_eq!(s.stability, Stability::Stable);
    assert!(s.eigenvalues.iter().all(|e| e.re < 0.0));
    p.beta *= 2.0 / r0(&p, Treatment).unwrap().value;
    assert_eq!(at(&p).stability, Stability::Unstable);
}

#[test]
fn endemic_exists_iff_above_threshold() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(11);
    for _ in 0..200 {
        let p = common::random_params(&mut rng);
        for v in ModelVariant::ALL {
            let rn = r0(&p, v).unwrap().value;
            let ee = endemic_equilibrium(&p, v).unwrap();
            assert_eq!(ee.is_some(), rn > 1.0, "R0 = {rn}");
        }
    }
}

#[test]
fn lyapunov_reference_values() {
    let p = Params::baseline();
    let x = State::new(1e6, 1.0, 0.0, 0.0, 0.0);
    assert!(close(lyapunov_value(&p, &x, TreatmentFree), 0.6, 1e-15));
    let y = State::new(1e6, 3.0, 4.0, 5.0, 0.0);
    let y2 = State::new(1e6, 6.0, 8.0, 10.0, 0.0);
    assert!(close(
        lyapunov_value(&p, &y2, Treatment),
        2.0 * lyapunov_value(&p, &y, Treatment),
        1e-15
    ));
}

#[test]
fn lyapunov_flat_at_dfe() {
    let p = Params::baseline();
    let grid = TimeGrid::new(0.0, 10.0, 1000).unwrap();
    let traj = simulate(&p, &dfe(&p, Treatment), &grid, Dynamics::Full).unwrap();
    let report = lyapunov_derivative_check(&traj, &p, Treatment).unwrap();
    assert_eq!(report.max_derivative, 0.0);
    assert!(!report.violation);
}

#[test]
fn lyapunov_decreases_below_threshold() {
    let p = Params::baseline();
    let grid = TimeGrid::new(0.0, 30.0, 3000).unwrap();
    let x0 = State::new(1.2e8, 3e4, 2e4, 1e4, 1e6);
    let traj = simulate(&p, &x0, &grid, Dynamics::Full).unwrap();
    let report = lyapunov_derivative_check(&traj, &p, Treatment).unwrap();
    assert!(report.applicable && !report.violation && report.nonincreasing);
}

#[test]
fn lyapunov_grows_above_threshold() {
    let mut p = Params::baseline();
    p.beta = 2.0;
    let grid = TimeGrid::new(0.0, 1.0, 100).unwrap();
    let mut x0 = dfe(&p, Treatment);
    x0.s -= 10.0;
    x0.i = 10.0;
    let traj = simulate(&p, &x0, &grid, Dynamics::Full).unwrap();
    let report = lyapunov_derivative_check(&traj, &p, Treatment).unwrap();
    assert!(!report.applicable);
    assert!(report.max_derivative > 0.0);
}

#[test]
fn lyapunov_check_needs_three_samples() {
    assert!(TimeGrid::new(0.0, 1.0, 1).is_err());
}

#[test]
fn lyapunov_check_requires_constant_mixing() {
    let p = Params::baseline();
    let grid = TimeGrid::new(0.0, 1.0, 10).unwrap();
    let traj = simulate(&p, &dfe(&p, Treatment), &grid, Dynamics::Full).unwrap();
    let q = p.with_mixing(nipah_core::Mixing::DynamicN);
    assert!(lyapunov_derivative_check(&traj, &q, Treatment).is_err());
}

#[test]
fn reproduction_numbers_increase_with_beta_and_nu() {
    let base = Params::baseline();
    let r = |beta: f64, nu: f64, v| {
        let p = Params { beta, nu, ..base };
        r0(&p, v).unwrap().value
    };
    let betas: Vec<f64> = (1..=20).map(|k| 0.1 * k as f64).collect();
    let nus: Vec<f64> = (1..=20).map(|k| 0.1 * k as f64).collect();
    for w in betas.windows(2) {
        assert!(r(w[1], base.nu, TreatmentFree) > r(w[0], base.nu, TreatmentFree));
        assert!(r(w[1], base.nu, Treatment) > r(w[0], base.nu, Treatment));
    }
    for w in nus.windows(2) {
        assert!(r(base.beta, w[1], Treatment) > r(base.beta, w[0], Treatment));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn closed_form_matches_spectral_radius(seed in any::<u64>()) {
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let p = common::random_params(&mut rng);
        for v in ModelVariant::ALL {
            let rn = r0(&p, v).unwrap();
            prop_assert!(close(rn.spectral_radius, rn.value, 1e-10));
            prop_assert!(close(rn.factors.iter().product(), rn.value, 1e-12));
        }
    }
}
