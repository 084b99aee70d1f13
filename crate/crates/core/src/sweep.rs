//! Parameter sweeps over the Cartesian product of value axes.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::analysis::r0;
use crate::error::{Error, Result};
use crate::io::write_trajectory_csv;
use crate::model::{ModelVariant, Params};
use crate::scenario::{apply_override, from_value, load_scenario_with_overrides, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub param: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    pub base: Scenario,
    pub axes: Vec<Axis>,
    pub outputs: PathBuf,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    base: Value,
    #[serde(default)]
    axes: Vec<Axis>,
    outputs: PathBuf,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        for (k, axis) in self.axes.iter().enumerate() {
            if !Params::FIELDS.contains(&axis.param.as_str()) {
                return Err(Error::invalid(
                    format!("axes[{k}].param"),
                    format!("`{}` is not a parameter name", axis.param),
                ));
            }
            if axis.values.is_empty() {
                return Err(Error::invalid(
                    format!("axes[{k}].values"),
                    "each axis needs at least one value",
                ));
            }
        }
        Ok(())
    }

    /// Every combination of axis values, first axis varying slowest.
    pub fn cells(&self) -> Vec<Vec<f64>> {
        self.axes.iter().fold(vec![Vec::new()], |acc, axis| {
            acc.iter()
                .flat_map(|prefix| {
                    axis.values.iter().map(move |&v| {
                        let mut next = prefix.clone();
                        next.push(v);
                        next
                    })
                })
                .collect()
        })
    }
}

/// Parses a sweep spec. `base` is either an inline scenario or a path to one,
/// resolved against `dir`; a relative `outputs` directory is resolved the same way.
pub fn load_sweep_spec(text: &str, dir: &Path) -> Result<SweepSpec> {
    load_sweep_spec_with_overrides(text, dir, &[])
}

/// Like [`load_sweep_spec`], applying `key=value` overrides to the base scenario.
pub fn load_sweep_spec_with_overrides(
    text: &str,
    dir: &Path,
    overrides: &[String],
) -> Result<SweepSpec> {
    let raw: RawSpec =
        from_value(
            serde_json::from_str::<Value>(text).map_err(|e| Error::Schema {
                path: "<root>".into(),
                message: e.to_string(),
            })?,
        )?;
    let base = match raw.base {
        Value::String(rel) => {
            let path = dir.join(rel);
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            load_scenario_with_overrides(&text, overrides)?
        }
        mut value => {
            for item in overrides {
                apply_override(&mut value, item)?;
            }
            let s: Scenario = from_value(value)?;
            s.validate()?;
            s
        }
    };
    let spec = SweepSpec {
        base,
        axes: raw.axes,
        outputs: dir.join(raw.outputs),
    };
    spec.validate()?;
    Ok(spec)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub cell: usize,
    pub values: Vec<f64>,
    pub r0_treatment_free: Option<f64>,
    pub r0_treatment: Option<f64>,
    pub peak_i: Option<f64>,
    pub cumulative_i: Option<f64>,
    pub final_r: Option<f64>,
    pub error: Option<String>,
}

impl CellSummary {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub params: Vec<String>,
    pub cells: Vec<CellSummary>,
}

impl SweepSummary {
    pub fn failed(&self) -> usize {
        self.cells.iter().filter(|c| !c.ok()).count()
    }
}

pub fn cell_file_name(cell: usize) -> String {
    format!("cell_{cell:03}.csv")
}

fn run_cell(spec: &SweepSpec, cell: usize, values: &[f64]) -> CellSummary {
    let mut summary = CellSummary {
        cell,
        values: values.to_vec(),
        r0_treatment_free: None,
        r0_treatment: None,
        peak_i: None,
        cumulative_i: None,
        final_r: None,
        error: None,
    };
    let result = (|| -> Result<()> {
        let mut scenario = spec.base.clone();
        for (axis, &v) in spec.axes.iter().zip(values) {
            scenario.params.set(&axis.param, v)?;
        }
        scenario.validate()?;
        summary.r0_treatment_free = r0(&scenario.params, ModelVariant::TreatmentFree)
            .ok()
            .map(|r| r.value);
        summary.r0_treatment = r0(&scenario.params, ModelVariant::Treatment)
            .ok()
            .map(|r| r.value);
        let traj = scenario.run()?;
        summary.peak_i = Some(traj.peak_infected());
        summary.cumulative_i = Some(traj.cumulative_infected());
        summary.final_r = Some(traj.final_state().r);
        write_trajectory_csv(&traj, &spec.outputs.join(cell_file_name(cell)))
    })();
    if let Err(e) = result {
        summary.error = Some(e.to_string());
    }
    summary
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

/// Runs every cell in parallel, writes `cell_NNN.csv` per cell and
/// `summary.csv`. A failing cell is recorded and does not stop the others.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepSummary> {
    spec.validate()?;
    fs::create_dir_all(&spec.outputs).map_err(|e| Error::io(&spec.outputs, e))?;
    let cells: Vec<CellSummary> = spec
        .cells()
        .par_iter()
        .enumerate()
        .map(|(k, values)| run_cell(spec, k, values))
        .collect();
    let summary = SweepSummary {
        params: spec.axes.iter().map(|a| a.param.clone()).collect(),
        cells,
    };
    write_summary_csv(&summary, &spec.outputs.join("summary.csv"))?;
    Ok(summary)
}

pub fn write_summary_csv(summary: &SweepSummary, path: &Path) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header = vec!["cell".to_string()];
    header.extend(summary.params.iter().cloned());
    header.extend(
        [
            "r0_treatment_free",
            "r0_treatment",
            "peak_i",
            "cumulative_i",
            "final_r",
            "status",
            "error",
        ]
        .map(String::from),
    );
    w.write_record(&header).map_err(csv_err)?;
    for c in &summary.cells {
        let mut row = vec![c.cell.to_string()];
        row.extend(c.values.iter().map(|v| format!("{v:?}")));
        row.extend([
            opt(c.r0_treatment_free),
            opt(c.r0_treatment),
            opt(c.peak_i),
            opt(c.cumulative_i),
            opt(c.final_r),
            if c.ok() { "ok" } else { "failed" }.to_string(),
            c.error.clone().unwrap_or_default(),
        ]);
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
