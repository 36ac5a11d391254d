//! Consistency experiments on the integrator and the protocol. Each routine
//! returns raw statistics; callers decide what tolerance to apply.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ft::{ft_tpm_values, info_batch, run_batch};
use crate::info::info_trajectory;
use crate::params::{FeedbackMode, Mode, SimParams};
use crate::protocol::{run_protocol_with, sample_initial, ProtocolOutcome};
use crate::qubit::{thermal_state, EnergyOutcome};
use crate::rng::{event_stream, noise_stream, BoxMuller, Coarsened};
use crate::scalar::Real;
use crate::sme::{lindblad_solution, run_monitored_segment, SegmentOptions};
use crate::stats::{mean, mean_and_se};

/// Worst Bloch-length deviation of the true track from 1.
pub fn purity_drift<T: Real>(p: &SimParams<T>) -> Result<T> {
    let p = SimParams { mode: Mode::Hierarchy, ..*p };
    let opts = SegmentOptions::every(1);
    let rho0 = thermal_state(p.beta)?;
    let worst = (0..p.n_traj as u64)
        .into_par_iter()
        .map(|i| {
            let mut events = event_stream(p.seed, i);
            let start = sample_initial(p.beta, &mut events).pole();
            let mut noise = BoxMuller::new(noise_stream(p.seed, i));
            let seg = run_monitored_segment(&p, start, rho0, &mut noise, &opts)?;
            let track = seg.truth.expect("hierarchy mode has a true track");
            Ok(track
                .path
                .iter()
                .map(|s| (s.length() - T::one()).abs())
                .fold(T::zero(), T::max))
        })
        .collect::<Result<Vec<T>>>()?;
    Ok(worst.into_iter().fold(T::zero(), T::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OraclePoint<T> {
    pub t: T,
    pub mean_z: T,
    pub se: T,
    pub lindblad_z: T,
}

impl<T: Real> OraclePoint<T> {
    pub fn deviation_in_se(&self) -> T {
        (self.mean_z - self.lindblad_z).abs() / self.se
    }
}

/// Trajectory-mean of the demon's z at `checkpoints` evenly spaced times
/// against the closed-form unconditioned solution from the thermal prior.
pub fn lindblad_oracle<T: Real>(p: &SimParams<T>, checkpoints: usize) -> Result<Vec<OraclePoint<T>>> {
    let n_steps = p.n_steps()?;
    let stride = (n_steps / checkpoints.max(1)).max(1);
    let p = SimParams { feedback_mode: FeedbackMode::Off, ..*p };
    let batch = run_batch(&p, &SegmentOptions::every(stride))?;
    let rho0 = thermal_state(p.beta)?;
    let times = batch[0].segment.times.clone();
    times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let zs: Vec<T> = batch.iter().map(|o| o.segment.demon.path[k].z).collect();
            let (mean_z, se) = mean_and_se(&zs)?;
            Ok(OraclePoint {
                t,
                mean_z,
                se,
                lindblad_z: lindblad_solution(&rho0, p.omega_r, p.k, t).z,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport<T> {
    pub n_trajectories: usize,
    pub n_points: usize,
    pub n_violations: usize,
    /// Smallest distance to either bound (negative when violated).
    pub min_margin: T,
}

/// Checks S(ρ₀) − ln 2 ≤ Ĩ(t) ≤ S(ρ₀) (with `slack`) at every step of every
/// trajectory.
pub fn info_bounds<T: Real>(p: &SimParams<T>, slack: T) -> Result<BoundsReport<T>> {
    let opts = SegmentOptions::every(1);
    let per_traj = (0..p.n_traj as u64)
        .into_par_iter()
        .map(|i| {
            let out = crate::protocol::run_protocol(p, i, &opts)?;
            let series = info_trajectory(&out.rho0, &out.segment.times, &out.segment.demon.path, None);
            let hi = series.s0;
            let lo = series.s0 - T::LN_2();
            let mut violations = 0usize;
            let mut margin = T::infinity();
            for &v in &series.i_tilde {
                if v > hi + slack || v < lo - slack {
                    violations += 1;
                }
                margin = margin.min(hi - v).min(v - lo);
            }
            Ok((series.i_tilde.len(), violations, margin))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundsReport {
        n_trajectories: per_traj.len(),
        n_points: per_traj.iter().map(|t| t.0).sum(),
        n_violations: per_traj.iter().map(|t| t.1).sum(),
        min_margin: per_traj.iter().map(|t| t.2).fold(T::infinity(), T::min),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalvingReport<T> {
    pub mean_i_coarse: T,
    pub mean_i_fine: T,
    pub ft_coarse: T,
    pub ft_fine: T,
}

impl<T: Real> HalvingReport<T> {
    pub fn mean_i_change(&self) -> T {
        ((self.mean_i_fine - self.mean_i_coarse) / self.mean_i_fine).abs()
    }

    pub fn ft_change(&self) -> T {
        ((self.ft_fine - self.ft_coarse) / self.ft_fine).abs()
    }
}

/// Runs the batch at `p.dt` and at `p.dt / 2` on the same Brownian paths
/// (the coarse run sums pairs of fine increments) and the same event draws.
pub fn step_halving<T: Real>(p: &SimParams<T>) -> Result<HalvingReport<T>> {
    let fine = SimParams { dt: p.dt / T::lit(2.0), ..*p };
    let run = |params: &SimParams<T>, coarsen: bool| -> Result<Vec<ProtocolOutcome<T>>> {
        (0..p.n_traj as u64)
            .into_par_iter()
            .map(|i| {
                let mut events = event_stream(p.seed, i);
                let base = BoxMuller::new(noise_stream(p.seed, i));
                let opts = SegmentOptions::final_only();
                if coarsen {
                    run_protocol_with(params, &mut Coarsened::new(base, 2), &mut events, &opts)
                } else {
                    let mut base = base;
                    run_protocol_with(params, &mut base, &mut events, &opts)
                }
            })
            .collect()
    };
    let coarse_batch = run(p, true)?;
    let fine_batch = run(&fine, false)?;
    let summarize = |batch: &[ProtocolOutcome<T>]| -> Result<(T, T)> {
        let finals: Vec<T> = info_batch(batch).iter().filter_map(|s| s.final_i()).collect();
        let (ft, _) = ft_tpm_values(batch, p.beta)?;
        Ok((mean(&finals), mean(&ft)))
    };
    let (mean_i_coarse, ft_coarse) = summarize(&coarse_batch)?;
    let (mean_i_fine, ft_fine) = summarize(&fine_batch)?;
    Ok(HalvingReport {
        mean_i_coarse,
        mean_i_fine,
        ft_coarse,
        ft_fine,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackReport<T> {
    /// Trajectory-mean of the demon's post-feedback z.
    pub demon_z: T,
    pub demon_z_se: T,
    /// ⟨z⟩ = P(0) − P(1) from the second projective outcomes.
    pub projective_z: T,
    pub projective_z_se: T,
    pub max_abs_x: T,
    pub min_z: T,
}

impl<T: Real> FeedbackReport<T> {
    pub fn combined_se(&self) -> T {
        (self.demon_z_se * self.demon_z_se + self.projective_z_se * self.projective_z_se).sqrt()
    }
}

/// Compares the demon's post-feedback ⟨z⟩ with the projective estimate.
pub fn feedback_validation<T: Real>(batch: &[ProtocolOutcome<T>]) -> Result<FeedbackReport<T>> {
    let kept: Vec<&ProtocolOutcome<T>> = batch.iter().filter(|o| o.accepted).collect();
    let demon: Vec<T> = kept.iter().map(|o| o.demon_final_post_fb.z).collect();
    let proj: Vec<T> = kept
        .iter()
        .map(|o| match o.i_final {
            EnergyOutcome::Ground => T::one(),
            EnergyOutcome::Excited => -T::one(),
        })
        .collect();
    let (demon_z, demon_z_se) = mean_and_se(&demon)?;
    let (projective_z, projective_z_se) = mean_and_se(&proj)?;
    Ok(FeedbackReport {
        demon_z,
        demon_z_se,
        projective_z,
        projective_z_se,
        max_abs_x: kept
            .iter()
            .map(|o| o.demon_final_post_fb.x.abs())
            .fold(T::zero(), T::max),
        min_z: kept
            .iter()
            .map(|o| o.demon_final_post_fb.z)
            .fold(T::infinity(), T::min),
    })
}
