mod common;

use std::fs;
use std::path::PathBuf;

use nipah_core::analysis::r0;
use nipah_core::chart::{emit_chart_svg, render_chart_svg, Series};
use nipah_core::control::AdjointState;
use nipah_core::io::{read_trajectory_csv, write_trajectory, write_trajectory_csv};
use nipah_core::sweep::{load_sweep_spec, run_sweep, Axis, SweepSpec};
use nipah_core::{
    load_scenario, ControlVector, Mixing, ModelVariant, Params, Scenario, State, TimeGrid,
    Trajectory,
};
use proptest::prelude::*;

use common::{load_shipped, scenario_path};

#[test]
fn shipped_scenarios_load() {
    for name in [
        "baseline.json",
        "baseline_controlled.json",
        "fig4_low.json",
        "fig4_high.json",
        "endemic_long.json",
    ] {
        let s = load_shipped(name);
        assert!(s.warnings().is_empty(), "{name}: {:?}", s.warnings());
    }
    let s = load_shipped("baseline.json");
    assert_eq!(s.params, Params::baseline());
    let rn = r0(&s.params, ModelVariant::Treatment).unwrap().value;
    assert_eq!(
        rn,
        r0(&Params::baseline(), ModelVariant::Treatment)
            .unwrap()
            .value
    );
}

#[test]
fn shipped_sweep_spec_loads() {
    let text = fs::read_to_string(scenario_path("sweep_fig4.json")).unwrap();
    let spec = load_sweep_spec(&text, &scenario_path("")).unwrap();
    assert_eq!(spec.cells().len(), 4);
    assert_eq!(spec.base, load_shipped("baseline.json"));
}

#[test]
fn csv_output_is_deterministic() {
    let s = load_shipped("baseline.json");
    let write = || {
        let mut buf = Vec::new();
        write_trajectory(&s.simulate().unwrap(), &mut buf).unwrap();
        buf
    };
    assert_eq!(write(), write());
}

#[test]
fn controlled_csv_has_fourteen_columns() {
    let s = load_shipped("baseline_controlled.json");
    let mut cfg = s.fbs_config().unwrap();
    cfg.grid = TimeGrid::new(0.0, 1.0, 20).unwrap();
    let r = nipah_core::control::solve_fbs(&s.params, &s.x0, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("opt.csv");
    write_trajectory_csv(&r.trajectory, &path).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "t,S,E,I,T,R,u1,u2,u3,l1,l2,l3,l4,l5"
    );
    assert!(text.lines().all(|l| l.split(',').count() == 14));
    assert_eq!(read_trajectory_csv(&path).unwrap(), r.trajectory);
}

#[test]
fn unwritable_path_is_io_error() {
    let s = load_shipped("baseline.json");
    let traj = s.simulate().unwrap();
    let err = write_trajectory_csv(&traj, &PathBuf::from("/nonexistent/dir/x.csv")).unwrap_err();
    assert_eq!(err.kind(), nipah_core::ErrorKind::Io);
    assert!(err.to_string().contains("/nonexistent/dir/x.csv"));
}

#[test]
fn fig4_chart_orders_peaks() {
    let low = load_shipped("fig4_low.json").simulate().unwrap();
    let high = load_shipped("fig4_high.json").simulate().unwrap();
    assert!(low.peak_infected() < high.peak_infected());
    let t = low.times();
    let series = [
        Series::from_columns("nu=0.35, beta=0.45", &t, &low.infected()),
        Series::from_columns("nu=1.5, beta=2.0", &t, &high.infected()),
    ];
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fig4.svg");
    emit_chart_svg(&series, &path, "Infected").unwrap();
    let svg = fs::read_to_string(&path).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert_eq!(svg.matches("class=\"legend\"").count(), 2);
    assert_eq!(svg, render_chart_svg(&series, "Infected").unwrap());
}

fn sweep_spec(axes: Vec<Axis>, out: PathBuf) -> SweepSpec {
    SweepSpec {
        base: load_shipped("baseline.json"),
        axes,
        outputs: out,
    }
}

fn axis(param: &str, values: &[f64]) -> Axis {
    Axis {
        param: param.into(),
        values: values.to_vec(),
    }
}

#[test]
fn fig4_sweep_orders_reproduction_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let spec = sweep_spec(
        vec![axis("beta", &[0.45, 2.0]), axis("nu", &[0.35, 1.5])],
        dir.path().to_path_buf(),
    );
    let summary = run_sweep(&spec).unwrap();
    assert_eq!(summary.cells.len(), 4);
    assert_eq!(summary.failed(), 0);
    let r: Vec<f64> = summary
        .cells
        .iter()
        .map(|c| c.r0_treatment.unwrap())
        .collect();
    // Cells are (beta, nu): (lo, lo), (lo, hi), (hi, lo), (hi, hi).
    assert!(r[0] < r[1] && r[2] < r[3]);
    assert!(r[0] < r[2] && r[1] < r[3]);
    for k in 0..4 {
        assert!(dir.path().join(format!("cell_{k:03}.csv")).exists());
    }
    let summary_csv = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary_csv.lines().count(), 5);
    assert!(summary_csv.starts_with(
        "cell,beta,nu,r0_treatment_free,r0_treatment,peak_i,cumulative_i,final_r,status,error"
    ));
}

#[test]
fn single_cell_sweep_equals_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let spec = sweep_spec(vec![axis("beta", &[0.75])], dir.path().to_path_buf());
    run_sweep(&spec).unwrap();
    let mut direct = Vec::new();
    write_trajectory(&spec.base.simulate().unwrap(), &mut direct).unwrap();
    assert_eq!(fs::read(dir.path().join("cell_000.csv")).unwrap(), direct);
}

#[test]
fn empty_axes_run_the_base_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let spec = sweep_spec(vec![], dir.path().to_path_buf());
    let summary = run_sweep(&spec).unwrap();
    assert_eq!(summary.cells.len(), 1);
    let traj = spec.base.simulate().unwrap();
    assert_eq!(summary.cells[0].peak_i, Some(traj.peak_infected()));
    let text = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn failing_cell_does_not_stop_others() {
    let dir = tempfile::tempdir().unwrap();
    let spec = sweep_spec(
        vec![axis("beta", &[0.5, -1.0, 1.0])],
        dir.path().to_path_buf(),
    );
    let summary = run_sweep(&spec).unwrap();
    assert_eq!(summary.failed(), 1);
    assert!(summary.cells[1].error.as_ref().unwrap().contains("beta"));
    assert!(summary.cells[0].ok() && summary.cells[2].ok());
    assert!(!dir.path().join("cell_001.csv").exists());
    let text = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert!(text.lines().nth(2).unwrap().contains(",failed,"));
}

#[test]
fn inline_base_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let base = fs::read_to_string(scenario_path("baseline.json")).unwrap();
    let text = format!(
        r#"{{"base": {base}, "axes": [{{"param": "nu", "values": [1.0]}}], "outputs": "o"}}"#
    );
    let spec =
        nipah_core::sweep::load_sweep_spec_with_overrides(&text, dir.path(), &["beta=2.0".into()])
            .unwrap();
    assert_eq!(spec.base.params.beta, 2.0);
    assert_eq!(spec.outputs, dir.path().join("o"));
    let bad = text.replace("\"nu\"", "\"kappa\"");
    assert!(load_sweep_spec(&bad, dir.path()).is_err());
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e12..1e12f64,
        -1.0..1.0f64,
        Just(0.0),
        Just(f64::MIN_POSITIVE)
    ]
}

fn trajectory() -> impl Strategy<Value = Trajectory> {
    (
        3usize..12,
        any::<bool>(),
        any::<bool>(),
        0.0..1e3f64,
        1e-3..1e3f64,
    )
        .prop_flat_map(|(n, with_u, with_l, t0, span)| {
            (
                prop::collection::vec(prop::array::uniform5(finite()), n),
                prop::collection::vec(prop::array::uniform3(finite()), n),
                prop::collection::vec(prop::array::uniform5(finite()), n),
            )
                .prop_map(move |(xs, us, ls)| {
                    let grid = TimeGrid::new(t0, t0 + span, n - 1).unwrap();
                    let mut t =
                        Trajectory::new(grid, xs.iter().map(|x| State::from_slice(x)).collect())
                            .unwrap();
                    if with_u {
                        t = t
                            .with_controls(us.into_iter().map(ControlVector::from_array).collect())
                            .unwrap();
                    }
                    if with_l {
                        t = t
                            .with_adjoints(ls.iter().map(|l| AdjointState::from_slice(l)).collect())
                            .unwrap();
                    }
                    t
                })
        })
}

fn params() -> impl Strategy<Value = Params> {
    (prop::array::uniform12(1e-9..1e9f64), any::<bool>()).prop_map(|(v, dynamic)| {
        let mut p = Params::baseline();
        for (name, value) in Params::FIELDS.iter().zip(v) {
            p.set(name, value).unwrap();
        }
        p.with_mixing(if dynamic {
            Mixing::DynamicN
        } else {
            Mixing::ConstantN
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn csv_round_trip_is_exact(traj in trajectory()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_trajectory_csv(&traj, &path).unwrap();
        let back = read_trajectory_csv(&path).unwrap();
        prop_assert_eq!(&back.states, &traj.states);
        prop_assert_eq!(&back.controls, &traj.controls);
        prop_assert_eq!(&back.adjoints, &traj.adjoints);
        prop_assert_eq!(back.times(), traj.times());
    }

    #[test]
    fn scenario_round_trip(p in params()) {
        let mut s: Scenario = load_shipped("baseline_controlled.json");
        s.params = p;
        let again = load_scenario(&s.to_json().unwrap()).unwrap();
        prop_assert_eq!(again, s);
    }
}
