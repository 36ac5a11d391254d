use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use qdemon_core::ft::{summarize_batch, BatchSummary};
use qdemon_core::protocol::run_protocol;
use qdemon_core::qubit::thermal_state;
use qdemon_core::sme::{SegmentOptions, Track};
use qdemon_core::{Bloch, Estimate, Outcome};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{json_bytes, OutputSet};
use crate::VERSION;

/// Trajectories simulated between two flushes of per-trajectory output.
const CHUNK: u64 = 1024;

/// Parameters as they appear in every output file. `output_dir` is left out
/// so that the same run written to two places produces the same bytes.
#[derive(Debug, Clone, Serialize)]
pub struct Echo {
    pub version: &'static str,
    pub config: serde_json::Value,
    pub derived: Derived,
}

/// Internal-unit values implied by the configuration.
#[derive(Debug, Clone, Serialize)]
pub struct Derived {
    pub omega_r_rad_per_us: f64,
    pub k_rad_per_us: f64,
    pub k_observed_rad_per_us: f64,
    pub k_hidden_rad_per_us: f64,
    pub dt_us: f64,
    pub n_steps: usize,
    /// tanh(β/2), the thermal polarization.
    pub z0: f64,
    /// S(ρ₀) and the lower trajectory bound S(ρ₀) − ln 2.
    pub s0: f64,
    pub s0_minus_ln2: f64,
}

impl Echo {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        let p = cfg.params();
        let mut config = serde_json::to_value(cfg)?;
        if let Some(map) = config.as_object_mut() {
            map.remove("output_dir");
        }
        let s0 = thermal_state(p.beta)?.entropy();
        Ok(Self {
            version: VERSION,
            config,
            derived: Derived {
                omega_r_rad_per_us: p.omega_r,
                k_rad_per_us: p.k,
                k_observed_rad_per_us: p.k_observed(),
                k_hidden_rad_per_us: p.k_hidden(),
                dt_us: p.dt,
                n_steps: p.n_steps()?,
                z0: (p.beta / 2.0).tanh(),
                s0,
                s0_minus_ln2: s0 - std::f64::consts::LN_2,
            },
        })
    }
}

#[derive(Serialize)]
struct Paths<'a> {
    times: &'a [f64],
    demon: &'a [Bloch],
    #[serde(rename = "true")]
    truth: Option<&'a [Bloch]>,
    omniscient: Option<&'a [Bloch]>,
    info_tilde: &'a [f64],
}

#[derive(Serialize)]
struct TrajectoryLine<'a> {
    version: &'static str,
    seed: u64,
    id: u64,
    j_init: u8,
    i_final: u8,
    work: f64,
    theta_fb: f64,
    theta_applied: f64,
    accepted: bool,
    degenerate_feedback: bool,
    info_fin: f64,
    info_flagged: bool,
    info_tilde_final: f64,
    demon_pre_fb: Bloch,
    demon_post_fb: Bloch,
    true_post_fb: Bloch,
    #[serde(skip_serializing_if = "Option::is_none")]
    paths: Option<Paths<'a>>,
}

#[derive(Serialize)]
struct BlochRow {
    id: u64,
    accepted: bool,
    x_pre: f64,
    y_pre: f64,
    z_pre: f64,
    x_post: f64,
    y_post: f64,
    z_post: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub version: &'static str,
    pub seed: u64,
    pub params: Echo,
    pub n_traj: usize,
    pub n_accepted: usize,
    /// Accepted runs whose information term needed a probability clamp.
    pub n_flagged: usize,
    pub n_degenerate_feedback: usize,
    pub clamp_events: u64,
    pub ft_tpm: Option<Estimate<f64>>,
    pub ft_weighted: Option<Estimate<f64>>,
    pub ft_no_info: Option<Estimate<f64>>,
    pub ft_binned: Option<f64>,
    pub mean_i: f64,
    pub mean_i_se: f64,
    pub i_gain: Option<f64>,
    pub i_gain_se: Option<f64>,
    pub i_loss: Option<f64>,
    pub i_loss_se: Option<f64>,
    pub mean_work: f64,
    pub flags: Vec<String>,
}

impl RunSummary {
    fn new(cfg: &RunConfig, echo: Echo, s: &BatchSummary<f64>, n_degenerate: usize) -> Self {
        let mut flags = Vec::new();
        if s.ft_tpm.is_none() {
            flags.push("two-point estimators unavailable in this mode".to_string());
        }
        if s.n_flagged > 0 {
            flags.push(format!("{} runs clamped a probability at 1e-12", s.n_flagged));
        }
        if s.clamp_events > 0 {
            flags.push(format!("{} steps clamped a state back onto the Bloch ball", s.clamp_events));
        }
        if n_degenerate > 0 {
            flags.push(format!("{n_degenerate} runs ended maximally mixed before feedback"));
        }
        Self {
            version: VERSION,
            seed: cfg.seed,
            params: echo,
            n_traj: s.n_total,
            n_accepted: s.n_accepted,
            n_flagged: s.n_flagged,
            n_degenerate_feedback: n_degenerate,
            clamp_events: s.clamp_events,
            ft_tpm: s.ft_tpm,
            ft_weighted: s.ft_weighted,
            ft_no_info: s.ft_no_info,
            ft_binned: s.ft_binned,
            mean_i: s.info.mean_i,
            mean_i_se: s.info.se_i,
            i_gain: s.info.i_gain,
            i_gain_se: s.info.se_gain,
            i_loss: s.info.i_loss,
            i_loss_se: s.info.se_loss,
            mean_work: s.mean_work,
            flags,
        }
    }
}

fn keep_last(track: &mut Track<f64>) {
    let n = track.path.len();
    track.path.drain(..n.saturating_sub(1));
}

/// Drops all but the final sample so that a long run keeps O(1) memory per
/// trajectory. Summaries only use final values.
fn thin(o: &mut Outcome) {
    let seg = &mut o.segment;
    let n = seg.times.len();
    seg.times.drain(..n.saturating_sub(1));
    keep_last(&mut seg.demon);
    if let Some(t) = seg.truth.as_mut() {
        keep_last(t);
    }
    if let Some(t) = seg.omniscient.as_mut() {
        keep_last(t);
    }
    let n = o.info_path.len();
    o.info_path.drain(..n.saturating_sub(1));
}

fn line<'a>(cfg: &RunConfig, id: u64, o: &'a Outcome) -> TrajectoryLine<'a> {
    let seg = &o.segment;
    TrajectoryLine {
        version: VERSION,
        seed: cfg.seed,
        id,
        j_init: o.j_init.label(),
        i_final: o.i_final.label(),
        work: o.work,
        theta_fb: o.theta_fb,
        theta_applied: o.theta_applied,
        accepted: o.accepted,
        degenerate_feedback: o.degenerate_feedback,
        info_fin: o.info_fin,
        info_flagged: o.info_flagged,
        info_tilde_final: o.info_tilde_final(),
        demon_pre_fb: o.demon_final_pre_fb,
        demon_post_fb: o.demon_final_post_fb,
        true_post_fb: o.true_final_post_fb,
        paths: cfg.emit_paths.then(|| Paths {
            times: &seg.times,
            demon: &seg.demon.path,
            truth: seg.truth.as_ref().map(|t| t.path.as_slice()),
            omniscient: seg.omniscient.as_ref().map(|t| t.path.as_slice()),
            info_tilde: &o.info_path,
        }),
    }
}

/// Simulates `cfg.n_traj` protocols and writes `trajectories.jsonl`,
/// `summary.json`, `bloch_points.csv` and the sidecar metadata files. On any
/// error nothing is left behind.
pub fn cmd_run(cfg: &RunConfig) -> Result<(RunSummary, Vec<PathBuf>)> {
    cfg.validate()?;
    let p = cfg.params();
    p.validate()?;
    let echo = Echo::new(cfg)?;
    let opts = if cfg.emit_paths {
        SegmentOptions::every(cfg.path_stride)
    } else {
        SegmentOptions::final_only()
    };

    let mut out = OutputSet::new(&cfg.output_dir)?;
    let mut jsonl = out.create("trajectories.jsonl")?;
    let mut points = csv::Writer::from_writer(out.create("bloch_points.csv")?);

    let n = cfg.n_traj as u64;
    let mut kept: Vec<Outcome> = Vec::with_capacity(cfg.n_traj);
    let mut start = 0;
    while start < n {
        let end = (start + CHUNK).min(n);
        let chunk = (start..end)
            .into_par_iter()
            .map(|i| run_protocol(&p, i, &opts).with_context(|| format!("trajectory {i}")))
            .collect::<Result<Vec<_>>>()?;
        for (id, mut o) in (start..end).zip(chunk) {
            serde_json::to_writer(&mut jsonl, &line(cfg, id, &o))?;
            jsonl.write_all(b"\n")?;
            points.serialize(BlochRow {
                id,
                accepted: o.accepted,
                x_pre: o.demon_final_pre_fb.x,
                y_pre: o.demon_final_pre_fb.y,
                z_pre: o.demon_final_pre_fb.z,
                x_post: o.demon_final_post_fb.x,
                y_post: o.demon_final_post_fb.y,
                z_post: o.demon_final_post_fb.z,
            })?;
            thin(&mut o);
            kept.push(o);
        }
        start = end;
    }
    jsonl.flush()?;
    drop(jsonl);
    points.flush()?;
    drop(points);

    let batch = summarize_batch(&p, &kept, cfg.bootstrap_b, 0)?;
    let n_degenerate = kept.iter().filter(|o| o.degenerate_feedback).count();
    let summary = RunSummary::new(cfg, echo.clone(), &batch, n_degenerate);
    out.write("summary.json", &json_bytes(&summary)?)?;
    out.write("trajectories.meta.json", &json_bytes(&echo)?)?;
    out.write("bloch_points.meta.json", &json_bytes(&echo)?)?;
    let written = out.commit()?;
    Ok((summary, written))
}
