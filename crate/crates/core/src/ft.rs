//! Fluctuation-theorem estimators with feedback, control identities and
//! parameter sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, DemonError, Result};
use crate::info::{gain_loss, info_trajectory, mean_info, InfoSeries, InfoSummary, PROBABILITY_FLOOR};
use crate::params::{FeedbackMode, Mode, SimParams};
use crate::protocol::{run_protocol, ProtocolOutcome};
use crate::qubit::{gibbs_weights, EnergyOutcome};
use crate::rng::bootstrap_stream;
use crate::scalar::Real;
use crate::sme::SegmentOptions;
use crate::stats::{mean, Estimate};

pub use crate::stats::bootstrap_se;

/// Runs `p.n_traj` protocols in parallel; element `i` is trajectory `i`
/// regardless of scheduling.
pub fn run_batch<T: Real>(p: &SimParams<T>, opts: &SegmentOptions) -> Result<Vec<ProtocolOutcome<T>>> {
    p.validate()?;
    (0..p.n_traj as u64)
        .into_par_iter()
        .map(|i| run_protocol(p, i, opts))
        .collect()
}

fn estimate<T: Real>(values: &[T], n_flagged: usize, b: usize, seed: u64, tag: u64) -> Result<Estimate<T>> {
    // a single sample has no spread to resample
    let se = if values.len() < 2 {
        T::nan()
    } else {
        bootstrap_se(values, b, &mut bootstrap_stream(seed, tag))?
    };
    Ok(Estimate {
        mean: mean(values),
        se,
        n: values.len(),
        n_flagged,
    })
}

fn accepted<T: Real>(batch: &[ProtocolOutcome<T>]) -> impl Iterator<Item = &ProtocolOutcome<T>> {
    batch.iter().filter(|o| o.accepted)
}

fn require_tpm<T: Real>(batch: &[ProtocolOutcome<T>]) -> Result<()> {
    if accepted(batch).any(|o| !o.tpm_recorded) {
        return Err(DemonError::ModeMismatch(
            "two-point-measurement estimator needs recorded initial outcomes",
        ));
    }
    Ok(())
}

/// Per-trajectory e^{−βW − I} from the realized outcomes.
pub fn ft_tpm_values<T: Real>(batch: &[ProtocolOutcome<T>], beta: T) -> Result<(Vec<T>, usize)> {
    require_tpm(batch)?;
    let mut flagged = 0;
    let values = accepted(batch)
        .filter(|o| {
            flagged += usize::from(o.info_flagged);
            !o.info_flagged
        })
        .map(|o| (-beta * o.work - o.info_fin).exp())
        .collect();
    Ok((values, flagged))
}

/// ⟨e^{−βW − I}⟩ with realized (j, i) outcomes; ΔF = 0.
pub fn ft_tpm<T: Real>(batch: &[ProtocolOutcome<T>], beta: T, b: usize, seed: u64) -> Result<Estimate<T>> {
    let (values, flagged) = ft_tpm_values(batch, beta)?;
    estimate(&values, flagged, b, seed, 1)
}

/// Per-trajectory Σ_i P_i(ρ_demon) e^{−β(E_i − E_j) − I_ij}, with P_i from the
/// demon's post-feedback state in place of the second projective outcome.
pub fn ft_weighted_values<T: Real>(batch: &[ProtocolOutcome<T>], beta: T) -> Result<(Vec<T>, usize)> {
    require_tpm(batch)?;
    let floor = T::lit(PROBABILITY_FLOOR);
    let mut flagged = 0;
    let mut values = Vec::with_capacity(batch.len());
    for o in accepted(batch) {
        let post = o.demon_final_post_fb;
        let pj = o.j_init.probability(&o.rho0);
        let outcomes = [EnergyOutcome::Ground, EnergyOutcome::Excited];
        if pj < floor || outcomes.iter().any(|i| i.probability(&post) < floor) {
            flagged += 1;
            continue;
        }
        let ej = o.j_init.energy::<T>();
        let v = outcomes.iter().fold(T::zero(), |acc, i| {
            let pi = i.probability(&post);
            let info = pi.ln() - pj.ln();
            acc + pi * (-beta * (i.energy::<T>() - ej) - info).exp()
        });
        values.push(v);
    }
    Ok((values, flagged))
}

pub fn ft_weighted<T: Real>(batch: &[ProtocolOutcome<T>], beta: T, b: usize, seed: u64) -> Result<Estimate<T>> {
    let (values, flagged) = ft_weighted_values(batch, beta)?;
    estimate(&values, flagged, b, seed, 2)
}

/// ⟨e^{−βW}⟩ on a batch, ignoring the information term.
pub fn ft_no_info<T: Real>(batch: &[ProtocolOutcome<T>], beta: T, b: usize, seed: u64) -> Result<Estimate<T>> {
    require_tpm(batch)?;
    let values: Vec<T> = accepted(batch).map(|o| (-beta * o.work).exp()).collect();
    estimate(&values, 0, b, seed, 3)
}

/// Runs the protocol with the feedback step skipped and returns ⟨e^{−βW}⟩.
pub fn ft_no_feedback_control<T: Real>(p: &SimParams<T>, b: usize) -> Result<Estimate<T>> {
    let p = SimParams {
        feedback_mode: FeedbackMode::Off,
        initial_projection: true,
        mode: Mode::Hierarchy,
        ..*p
    };
    let batch = run_batch(&p, &SegmentOptions::final_only())?;
    ft_no_info(&batch, p.beta, b, p.seed)
}

/// Two-point-measurement transition statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionTable<T> {
    /// counts[j][i] of j → i transitions among accepted runs.
    pub counts: [[usize; 2]; 2],
    /// Within-bin mean of e^{−I} for each j → i.
    pub mean_exp_neg_info: [[T; 2]; 2],
}

impl<T: Real> TransitionTable<T> {
    pub fn from_batch(batch: &[ProtocolOutcome<T>]) -> Self {
        let mut counts = [[0usize; 2]; 2];
        let mut sums = [[T::zero(); 2]; 2];
        for o in accepted(batch).filter(|o| !o.info_flagged) {
            let (j, i) = (o.j_init.label() as usize, o.i_final.label() as usize);
            counts[j][i] += 1;
            sums[j][i] = sums[j][i] + (-o.info_fin).exp();
        }
        let mut mean_exp_neg_info = [[T::zero(); 2]; 2];
        for j in 0..2 {
            for i in 0..2 {
                if counts[j][i] > 0 {
                    mean_exp_neg_info[j][i] = sums[j][i] / T::from_usize(counts[j][i]).unwrap();
                }
            }
        }
        Self { counts, mean_exp_neg_info }
    }

    /// Transition probability P(i | j).
    pub fn probability(&self, j: usize, i: usize) -> T {
        let row = self.counts[j][0] + self.counts[j][1];
        if row == 0 {
            T::zero()
        } else {
            T::from_usize(self.counts[j][i]).unwrap() / T::from_usize(row).unwrap()
        }
    }

    /// Σ_ij P_j(0) P(i|j) ⟨e^{−I}⟩_ij e^{−β(E_i − E_j)}.
    pub fn binned_ft(&self, beta: T) -> T {
        let (p0, p1) = gibbs_weights(beta);
        let pj = [p0, p1];
        let mut total = T::zero();
        for j in 0..2 {
            for i in 0..2 {
                let de = T::from_usize(i).unwrap() - T::from_usize(j).unwrap();
                total = total
                    + pj[j] * self.probability(j, i) * self.mean_exp_neg_info[j][i] * (-beta * de).exp();
            }
        }
        total
    }
}

/// Everything the run summary and a sweep row need from one batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary<T> {
    pub ft_tpm: Option<Estimate<T>>,
    pub ft_weighted: Option<Estimate<T>>,
    pub ft_no_info: Option<Estimate<T>>,
    pub ft_binned: Option<T>,
    pub info: InfoSummary<T>,
    pub mean_work: T,
    pub n_total: usize,
    pub n_accepted: usize,
    pub n_flagged: usize,
    pub clamp_events: u64,
}

/// Entropy series of every accepted outcome on its stored grid.
pub fn info_batch<T: Real>(batch: &[ProtocolOutcome<T>]) -> Vec<InfoSeries<T>> {
    accepted(batch)
        .map(|o| {
            let seg = &o.segment;
            info_trajectory(
                &o.rho0,
                &seg.times,
                &seg.demon.path,
                seg.omniscient.as_ref().map(|t| t.path.as_slice()),
            )
        })
        .collect()
}

/// Summarizes a batch. `tag` separates bootstrap streams of different
/// batches sharing a seed.
pub fn summarize_batch<T: Real>(
    p: &SimParams<T>,
    batch: &[ProtocolOutcome<T>],
    b: usize,
    tag: u64,
) -> Result<BatchSummary<T>> {
    let seed = p.seed.wrapping_add(tag.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let tpm = accepted(batch).all(|o| o.tpm_recorded) && accepted(batch).next().is_some();
    let (ft_tpm, ft_w, ft_ni, binned) = if tpm {
        (
            Some(ft_tpm(batch, p.beta, b, seed)?),
            Some(ft_weighted(batch, p.beta, b, seed)?),
            Some(ft_no_info(batch, p.beta, b, seed)?),
            Some(TransitionTable::from_batch(batch).binned_ft(p.beta)),
        )
    } else {
        (None, None, None, None)
    };
    let series = info_batch(batch);
    let info = if p.mode == Mode::Hierarchy {
        gain_loss(&series)?
    } else {
        mean_info(&series)?
    };
    let works: Vec<T> = accepted(batch).map(|o| o.work).collect();
    let n_flagged = ft_tpm
        .map(|e| e.n_flagged)
        .unwrap_or_else(|| accepted(batch).filter(|o| o.info_flagged).count());
    Ok(BatchSummary {
        ft_tpm,
        ft_weighted: ft_w,
        ft_no_info: ft_ni,
        ft_binned: binned,
        info,
        mean_work: mean(&works),
        n_total: batch.len(),
        n_accepted: works.len(),
        n_flagged,
        clamp_events: batch.iter().map(|o| o.segment.clamp_events as u64).sum(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Tau,
    Beta,
}

/// One row of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint<T> {
    pub value: T,
    pub z0: T,
    pub summary: Option<BatchSummary<T>>,
    /// Why the point failed, if it did.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary<T> {
    pub axis: SweepAxis,
    pub points: Vec<SweepPoint<T>>,
}

/// Runs `p.n_traj` protocols at every value of the chosen axis. Failing
/// points are recorded and the sweep moves on.
pub fn sweep<T: Real>(p: &SimParams<T>, axis: SweepAxis, values: &[T], b: usize) -> Result<SweepSummary<T>> {
    if values.is_empty() {
        return Err(invalid("values", "sweep needs at least one value"));
    }
    if values.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(invalid("values", "sweep values must be sorted ascending"));
    }
    let points = values
        .iter()
        .enumerate()
        .map(|(idx, &value)| {
            let point = match axis {
                SweepAxis::Tau => SimParams { tau: value, ..*p },
                SweepAxis::Beta => SimParams { beta: value, ..*p },
            };
            let z0 = (point.beta / T::lit(2.0)).tanh();
            let result = run_batch(&point, &SegmentOptions::final_only())
                .and_then(|batch| summarize_batch(&point, &batch, b, idx as u64 + 1));
            match result {
                Ok(summary) => SweepPoint { value, z0, summary: Some(summary), error: None },
                Err(e) => SweepPoint { value, z0, summary: None, error: Some(e.to_string()) },
            }
        })
        .collect();
    Ok(SweepSummary { axis, points })
}
