//! Reduced-size versions of the consistency checks, runnable against any
//! configuration.

use std::fmt;

use anyhow::Result;
use qdemon_core::diagnostics::{feedback_validation, info_bounds, lindblad_oracle, purity_drift, step_halving};
use qdemon_core::ft::{ft_no_feedback_control, run_batch, summarize_batch};
use qdemon_core::sme::SegmentOptions;
use qdemon_core::{FeedbackMode, Mode, Params};
use rayon::prelude::*;

/// Trajectories per statistical check.
pub const CHECK_TRAJ: usize = 2000;
/// Trajectories for the per-step checks (purity, bounds).
pub const CHECK_TRAJ_DENSE: usize = 200;
/// Tolerance in standard errors.
pub const N_SE: f64 = 3.0;
/// Largest relative change of ⟨I⟩ and the FT estimate under dt → dt/2.
pub const HALVING_TOL: f64 = 0.01;
/// Below this size a statistical error is rounding noise.
pub const FLOAT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

#[derive(Debug, Clone)]
pub struct CheckRow {
    pub name: &'static str,
    pub status: Status,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct CheckReport {
    pub rows: Vec<CheckRow>,
}

impl CheckReport {
    fn push(&mut self, name: &'static str, passed: bool, detail: String) {
        let status = if passed { Status::Pass } else { Status::Fail };
        self.rows.push(CheckRow { name, status, detail });
    }

    fn skip(&mut self, name: &'static str, why: &str) {
        self.rows.push(CheckRow {
            name,
            status: Status::Skip,
            detail: why.to_string(),
        });
    }

    pub fn failures(&self) -> Vec<&'static str> {
        self.rows.iter().filter(|r| r.status == Status::Fail).map(|r| r.name).collect()
    }

    pub fn passed(&self) -> bool {
        self.failures().is_empty()
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(0);
        for r in &self.rows {
            let tag = match r.status {
                Status::Pass => "PASS",
                Status::Fail => "FAIL",
                Status::Skip => "SKIP",
            };
            writeln!(f, "{tag}  {:width$}  {}", r.name, r.detail)?;
        }
        Ok(())
    }
}

fn reduced(p: &Params, n: usize) -> Params {
    Params { n_traj: p.n_traj.min(n), ..*p }
}

/// `|a − b| ≤ N_SE · se`, with rounding noise treated as zero.
pub fn within(a: f64, b: f64, se: f64) -> bool {
    (a - b).abs() <= (N_SE * se).max(FLOAT_FLOOR)
}

/// Purity at unit efficiency must stay within 1e−3 and shrink under dt/2
/// until it reaches rounding level.
pub fn purity_passes(coarse: f64, fine: f64) -> bool {
    let rounding = 1e-9;
    coarse <= 1e-3 && (fine <= coarse / 2.0 || fine.max(coarse) <= rounding)
}

pub fn cmd_check(p: &Params, b: usize) -> Result<CheckReport> {
    p.validate()?;
    let mut report = CheckReport::default();

    let pure = Params { eta: 1.0, ..reduced(p, CHECK_TRAJ_DENSE / 4) };
    let coarse = purity_drift(&pure)?;
    let fine = purity_drift(&Params { dt: pure.dt / 2.0, ..pure })?;
    report.push(
        "purity",
        purity_passes(coarse, fine),
        format!("eta=1: max |len-1| = {coarse:.3e} (dt), {fine:.3e} (dt/2); margin {:.3e}", 1e-3 - coarse),
    );

    let oracle = lindblad_oracle(&reduced(p, CHECK_TRAJ), 20)?;
    let worst = oracle.iter().map(|pt| pt.deviation_in_se()).fold(0.0, f64::max);
    report.push(
        "lindblad-oracle",
        oracle.iter().all(|pt| within(pt.mean_z, pt.lindblad_z, pt.se)),
        format!("{} checkpoints, worst deviation {worst:.2} SE", oracle.len()),
    );

    let bounds = info_bounds(&reduced(p, CHECK_TRAJ_DENSE), 1e-9)?;
    report.push(
        "info-bounds",
        bounds.n_violations == 0,
        format!(
            "{} violations in {} points, min margin {:.3e}",
            bounds.n_violations, bounds.n_points, bounds.min_margin
        ),
    );

    let control = ft_no_feedback_control(&reduced(p, CHECK_TRAJ), b)?;
    report.push(
        "unital-control",
        within(control.mean, 1.0, control.se),
        format!("<exp(-bW)> = {:.5} +/- {:.5}", control.mean, control.se),
    );

    let bp = reduced(p, CHECK_TRAJ);
    let batch = run_batch(&bp, &SegmentOptions::final_only())?;
    let summary = summarize_batch(&bp, &batch, b, 0)?;
    match (summary.ft_tpm, summary.ft_weighted) {
        (Some(tpm), Some(w)) => {
            report.push(
                "ft-feedback",
                within(tpm.mean, 1.0, tpm.se),
                format!("<exp(-bW-I)> = {:.5} +/- {:.5}", tpm.mean, tpm.se),
            );
            let combined = (tpm.se * tpm.se + w.se * w.se).sqrt();
            report.push(
                "ft-weighted",
                within(w.mean, 1.0, w.se) && within(w.mean, tpm.mean, combined),
                format!("weighted = {:.5} +/- {:.2e}", w.mean, w.se),
            );
        }
        _ => {
            report.skip("ft-feedback", "needs hierarchy mode with the initial projection");
            report.skip("ft-weighted", "needs hierarchy mode with the initial projection");
        }
    }

    let fb = feedback_validation(&batch)?;
    let mut fb_ok = within(fb.demon_z, fb.projective_z, fb.combined_se());
    if p.feedback_mode == FeedbackMode::Ideal {
        fb_ok &= fb.max_abs_x <= 1e-12 && fb.min_z >= 0.0;
    }
    report.push(
        "feedback",
        fb_ok,
        format!(
            "demon z = {:.4}, projective z = {:.4}, max |x| = {:.1e}, min z = {:.3}",
            fb.demon_z, fb.projective_z, fb.max_abs_x, fb.min_z
        ),
    );

    if p.mode == Mode::Hierarchy && p.initial_projection {
        let h = step_halving(&reduced(p, CHECK_TRAJ))?;
        report.push(
            "convergence",
            h.mean_i_change() < HALVING_TOL && h.ft_change() < HALVING_TOL,
            format!(
                "dt -> dt/2 changes <I> by {:.3}% and the FT estimate by {:.3}%",
                100.0 * h.mean_i_change(),
                100.0 * h.ft_change()
            ),
        );
    } else {
        report.skip("convergence", "needs hierarchy mode with the initial projection");
    }

    let small = reduced(p, 64);
    let run_on = |threads: usize| -> Result<String> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
        let batch = pool.install(|| run_batch(&small, &SegmentOptions::final_only()))?;
        Ok(serde_json::to_string(&batch)?)
    };
    let reference = run_on(1)?;
    let same = [2usize, 3]
        .par_iter()
        .map(|&t| run_on(t).map(|s| s == reference))
        .collect::<Result<Vec<_>>>()?;
    report.push(
        "determinism",
        same.iter().all(|&s| s),
        format!("{} trajectories identical on 1, 2 and 3 workers", small.n_traj),
    );

    Ok(report)
}
