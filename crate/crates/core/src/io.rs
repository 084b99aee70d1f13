//! CSV persistence of trajectories.
//!
//! Layout: `t,S,E,I,T,R[,u1,u2,u3][,l1,l2,l3,l4,l5]`, one row per grid node.
//! Numbers use Rust's shortest round-trip formatting, so parsing a file back
//! yields bit-identical samples.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::control::AdjointState;
use crate::error::{Error, Result};
use crate::integrator::TimeGrid;
use crate::model::{ControlVector, State};
use crate::trajectory::Trajectory;

const CONTROL_LABELS: [&str; 3] = ["u1", "u2", "u3"];

pub fn trajectory_header(traj: &Trajectory) -> Vec<&'static str> {
    let mut header = vec!["t"];
    header.extend(State::LABELS);
    if traj.controls.is_some() {
        header.extend(CONTROL_LABELS);
    }
    if traj.adjoints.is_some() {
        header.extend(AdjointState::LABELS);
    }
    header
}

fn fmt(v: f64) -> String {
    format!("{v:?}")
}

/// Writes the trajectory as CSV into any writer.
pub fn write_trajectory<W: Write>(traj: &Trajectory, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trajectory_header(traj))?;
    for (k, (t, x)) in traj.times().into_iter().zip(&traj.states).enumerate() {
        let mut row = vec![fmt(t)];
        row.extend(x.to_array().map(fmt));
        if let Some(c) = &traj.controls {
            row.extend(c[k].to_array().map(fmt));
        }
        if let Some(a) = &traj.adjoints {
            row.extend(a[k].to_array().map(fmt));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trajectory_csv(traj: &Trajectory, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_trajectory(traj, file).map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a file written by [`write_trajectory_csv`]. The grid is rebuilt from
/// the first and last time stamps and the row count.
pub fn read_trajectory_csv(path: &Path) -> Result<Trajectory> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let bad = |message: String| Error::Schema {
        path: path.display().to_string(),
        message,
    };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let header: Vec<String> = reader
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(String::from)
        .collect();
    let has_controls = header.iter().any(|h| h == "u1");
    let has_adjoints = header.iter().any(|h| h == "l1");
    let width = 6 + if has_controls { 3 } else { 0 } + if has_adjoints { 5 } else { 0 };
    if header.len() != width || header[0] != "t" {
        return Err(bad(format!("unexpected header {header:?}")));
    }

    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut controls = Vec::new();
    let mut adjoints = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let row: Vec<f64> = record
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|e| bad(format!("bad number `{f}`: {e}")))
            })
            .collect::<Result<_>>()?;
        if row.len() != width {
            return Err(bad(format!(
                "row has {} fields, expected {width}",
                row.len()
            )));
        }
        times.push(row[0]);
        states.push(State::from_slice(&row[1..6]));
        let mut at = 6;
        if has_controls {
            controls.push(ControlVector::new(row[6], row[7], row[8]));
            at += 3;
        }
        if has_adjoints {
            adjoints.push(AdjointState::from_slice(&row[at..at + 5]));
        }
    }
    if times.len() < 3 {
        return Err(bad(format!("need at least 3 rows, found {}", times.len())));
    }
    let grid = TimeGrid::new(times[0], times[times.len() - 1], times.len() - 1)?;
    let mut traj = Trajectory::new(grid, states)?;
    if has_controls {
        traj = traj.with_controls(controls)?;
    }
    if has_adjoints {
        traj = traj.with_adjoints(adjoints)?;
    }
    Ok(traj)
}
