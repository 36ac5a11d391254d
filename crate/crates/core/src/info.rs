//! Information exchanged with the detector along trajectories and on average.

use serde::{Deserialize, Serialize};

use crate::error::{DemonError, Result};
use crate::qubit::{BlochState, EnergyOutcome};
use crate::scalar::Real;
use crate::stats::mean_and_se_or_nan;

/// Floor applied to outcome probabilities inside estimators.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

/// Running information of one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoSeries<T> {
    pub times: Vec<T>,
    /// Ĩ(t) = S(ρ₀) − S(ρ_demon(t)).
    pub i_tilde: Vec<T>,
    pub s_demon: Vec<T>,
    pub s_omni: Option<Vec<T>>,
    /// S(ρ₀).
    pub s0: T,
}

impl<T: Real> InfoSeries<T> {
    pub fn final_i(&self) -> Option<T> {
        self.i_tilde.last().copied()
    }
}

/// Entropy bookkeeping along a demon path (and optionally the omniscient
/// path on the same grid).
pub fn info_trajectory<T: Real>(
    rho0: &BlochState<T>,
    times: &[T],
    demon_path: &[BlochState<T>],
    omni_path: Option<&[BlochState<T>]>,
) -> InfoSeries<T> {
    let s0 = rho0.entropy();
    let s_demon: Vec<T> = demon_path.iter().map(|s| s.entropy()).collect();
    let i_tilde = s_demon.iter().map(|&s| s0 - s).collect();
    InfoSeries {
        times: times.to_vec(),
        i_tilde,
        s_demon,
        s_omni: omni_path.map(|p| p.iter().map(|s| s.entropy()).collect()),
        s0,
    }
}

/// I = ln P_i(ρ_final) − ln P_j(ρ₀) with energy-basis probabilities.
pub fn info_outcome<T: Real>(
    j: EnergyOutcome,
    rho_final: &BlochState<T>,
    i: EnergyOutcome,
    rho0: &BlochState<T>,
) -> Result<T> {
    let pi = i.probability(rho_final);
    let pj = j.probability(rho0);
    for p in [pi, pj] {
        if !(p > T::zero()) {
            return Err(DemonError::DivergentInformation {
                probability: p.as_f64(),
            });
        }
    }
    Ok(pi.ln() - pj.ln())
}

/// [`info_outcome`] with both probabilities floored at [`PROBABILITY_FLOOR`];
/// the flag reports whether the floor was hit.
pub fn clamped_info_outcome<T: Real>(
    j: EnergyOutcome,
    rho_final: &BlochState<T>,
    i: EnergyOutcome,
    rho0: &BlochState<T>,
) -> (T, bool) {
    let floor = T::lit(PROBABILITY_FLOOR);
    let pi = i.probability(rho_final);
    let pj = j.probability(rho0);
    let flagged = pi < floor || pj < floor;
    (pi.max(floor).ln() - pj.max(floor).ln(), flagged)
}

/// Averages of the information over a batch of trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoSummary<T> {
    /// ⟨I⟩ at the final time.
    pub mean_i: T,
    pub se_i: T,
    pub i_gain: Option<T>,
    pub se_gain: Option<T>,
    pub i_loss: Option<T>,
    pub se_loss: Option<T>,
    pub n: usize,
    /// ⟨Ĩ(t)⟩ on the common sampling grid.
    pub mean_curve: Vec<T>,
    pub times: Vec<T>,
}

/// ⟨I⟩ = S(ρ₀) − ⟨S(ρ_t|r)⟩ and its standard error at the final time, plus
/// the mean curve over the common grid.
pub fn mean_info<T: Real>(batch: &[InfoSeries<T>]) -> Result<InfoSummary<T>> {
    let finals: Vec<T> = batch.iter().filter_map(InfoSeries::final_i).collect();
    let (mean_i, se_i) = mean_and_se_or_nan(&finals);
    let len = batch.iter().map(|s| s.i_tilde.len()).min().unwrap_or(0);
    let nf = T::from_usize(batch.len()).unwrap();
    let mean_curve = (0..len)
        .map(|t| batch.iter().fold(T::zero(), |acc, s| acc + s.i_tilde[t]) / nf)
        .collect();
    Ok(InfoSummary {
        mean_i,
        se_i,
        i_gain: None,
        se_gain: None,
        i_loss: None,
        se_loss: None,
        n: finals.len(),
        mean_curve,
        times: batch.first().map(|s| s.times[..len].to_vec()).unwrap_or_default(),
    })
}

/// Splits ⟨I⟩ into gain S(ρ₀) − ⟨S(ρ_omni)⟩ and loss ⟨S(ρ_demon)⟩ − ⟨S(ρ_omni)⟩
/// at the final time.
pub fn gain_loss<T: Real>(batch: &[InfoSeries<T>]) -> Result<InfoSummary<T>> {
    let mut summary = mean_info(batch)?;
    let mut gains = Vec::with_capacity(batch.len());
    let mut losses = Vec::with_capacity(batch.len());
    for s in batch {
        let omni = s
            .s_omni
            .as_ref()
            .and_then(|o| o.last().copied())
            .ok_or(DemonError::ModeMismatch("gain/loss needs the omniscient track"))?;
        let demon = *s.s_demon.last().unwrap();
        gains.push(s.s0 - omni);
        losses.push(demon - omni);
    }
    let (g, se_g) = mean_and_se_or_nan(&gains);
    let (l, se_l) = mean_and_se_or_nan(&losses);
    summary.i_gain = Some(g);
    summary.se_gain = Some(se_g);
    summary.i_loss = Some(l);
    summary.se_loss = Some(se_l);
    Ok(summary)
}
