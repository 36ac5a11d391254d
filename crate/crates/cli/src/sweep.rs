use std::path::PathBuf;

use anyhow::{bail, Result};
use qdemon_core::ft::{sweep, SweepAxis};
use qdemon_core::Sweep;
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{json_bytes, OutputSet};
use crate::run::Echo;

pub const SWEEP_HEADER: &str = "axis_value,z0,ft_tpm,ft_tpm_se,ft_weighted,ft_weighted_se,ft_no_info,ft_no_info_se,mean_i,mean_i_se,i_gain,i_loss,n_accepted,n_flagged";

/// One sweep.csv row. Estimators that a mode cannot produce are left empty.
#[derive(Debug, Serialize)]
struct Row {
    axis_value: f64,
    z0: f64,
    ft_tpm: Option<f64>,
    ft_tpm_se: Option<f64>,
    ft_weighted: Option<f64>,
    ft_weighted_se: Option<f64>,
    ft_no_info: Option<f64>,
    ft_no_info_se: Option<f64>,
    mean_i: f64,
    mean_i_se: f64,
    i_gain: Option<f64>,
    i_loss: Option<f64>,
    n_accepted: usize,
    n_flagged: usize,
}

/// Per-point values that do not fit the flat table.
#[derive(Debug, Serialize)]
struct PointMeta {
    axis_value: f64,
    ft_binned: Option<f64>,
    i_gain_se: Option<f64>,
    i_loss_se: Option<f64>,
    mean_work: f64,
    n_total: usize,
    clamp_events: u64,
}

#[derive(Debug, Serialize)]
struct SweepMeta {
    params: Echo,
    axis: SweepAxis,
    values: Vec<f64>,
    columns: Vec<&'static str>,
    points: Vec<PointMeta>,
}

/// Runs `cfg.n_traj` protocols at each value and writes `sweep.csv` with its
/// `sweep.meta.json` sidecar. Any failing point fails the whole command.
pub fn cmd_sweep(cfg: &RunConfig, axis: SweepAxis, values: &[f64]) -> Result<(Sweep, Vec<PathBuf>)> {
    cfg.validate()?;
    let p = cfg.params();
    let result = sweep(&p, axis, values, cfg.bootstrap_b)?;
    if let Some(bad) = result.points.iter().find(|pt| pt.error.is_some()) {
        bail!(
            "sweep point {} = {} failed: {}",
            axis_name(axis),
            bad.value,
            bad.error.as_deref().unwrap_or_default()
        );
    }

    let mut out = OutputSet::new(&cfg.output_dir)?;
    let mut csv = csv::Writer::from_writer(out.create("sweep.csv")?);
    let mut metas = Vec::with_capacity(result.points.len());
    for pt in &result.points {
        let s = pt.summary.as_ref().expect("failed points were rejected above");
        csv.serialize(Row {
            axis_value: pt.value,
            z0: pt.z0,
            ft_tpm: s.ft_tpm.map(|e| e.mean),
            ft_tpm_se: s.ft_tpm.map(|e| e.se),
            ft_weighted: s.ft_weighted.map(|e| e.mean),
            ft_weighted_se: s.ft_weighted.map(|e| e.se),
            ft_no_info: s.ft_no_info.map(|e| e.mean),
            ft_no_info_se: s.ft_no_info.map(|e| e.se),
            mean_i: s.info.mean_i,
            mean_i_se: s.info.se_i,
            i_gain: s.info.i_gain,
            i_loss: s.info.i_loss,
            n_accepted: s.n_accepted,
            n_flagged: s.n_flagged,
        })?;
        metas.push(PointMeta {
            axis_value: pt.value,
            ft_binned: s.ft_binned,
            i_gain_se: s.info.se_gain,
            i_loss_se: s.info.se_loss,
            mean_work: s.mean_work,
            n_total: s.n_total,
            clamp_events: s.clamp_events,
        });
    }
    csv.flush()?;
    drop(csv);

    let meta = SweepMeta {
        params: Echo::new(cfg)?,
        axis,
        values: values.to_vec(),
        columns: SWEEP_HEADER.split(',').collect(),
        points: metas,
    };
    out.write("sweep.meta.json", &json_bytes(&meta)?)?;
    let written = out.commit()?;
    Ok((result, written))
}

fn axis_name(axis: SweepAxis) -> &'static str {
    match axis {
        SweepAxis::Tau => "tau_us",
        SweepAxis::Beta => "beta",
    }
}
