use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::Real;

/// Which state tracks a monitored segment propagates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// True state, omniscient two-channel filter and demon filter.
    Hierarchy,
    /// Demon filter alone, driven directly by its innovation process.
    FilterOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeedbackMode {
    /// The commanded rotation is applied exactly.
    Ideal,
    /// A uniformly random pulse is applied and post-selected within ±π/20.
    Randomized,
    /// No rotation (control runs).
    Off,
}

/// Which demon state the final-outcome probability of the information term
/// is read from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InfoTiming {
    PostFeedback,
    PreFeedback,
}

/// Physical and numerical parameters. Rates are angular (rad/μs), times in μs,
/// energies in units of the qubit quantum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams<T> {
    /// Rabi drive Ω_R.
    pub omega_r: T,
    /// Measurement strength k.
    pub k: T,
    /// Detector efficiency η ∈ (0, 1].
    pub eta: T,
    pub beta: T,
    /// Protocol duration τ.
    pub tau: T,
    pub dt: T,
    pub mode: Mode,
    pub feedback_mode: FeedbackMode,
    pub initial_projection: bool,
    pub info_timing: InfoTiming,
    pub n_traj: usize,
    pub seed: u64,
}

impl<T: Real> SimParams<T> {
    /// Ω_R/2π = 0.8 MHz, k/2π = 51 kHz, η = 0.3, β = 4, τ = 2 μs, dt = 1 ns.
    pub fn defaults() -> Self {
        let tau = T::TAU();
        Self {
            omega_r: tau * T::lit(0.8),
            k: tau * T::lit(0.051),
            eta: T::lit(0.3),
            beta: T::lit(4.0),
            tau: T::lit(2.0),
            dt: T::lit(1e-3),
            mode: Mode::Hierarchy,
            feedback_mode: FeedbackMode::Ideal,
            initial_projection: true,
            info_timing: InfoTiming::PostFeedback,
            n_traj: 20_000,
            seed: 0x5EED,
        }
    }

    /// Strength of the channel the demon observes, ηk.
    pub fn k_observed(&self) -> T {
        self.eta * self.k
    }

    /// Strength of the hidden channel, (1 − η)k, taken as k − ηk so the
    /// demon's unobserved dephasing equals it bit for bit.
    pub fn k_hidden(&self) -> T {
        self.k - self.k_observed()
    }

    /// Number of integration steps τ/dt; fails unless the ratio is integral.
    pub fn n_steps(&self) -> Result<usize> {
        step_count(self.tau, self.dt)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |name, v: T| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(invalid(name, "must be finite"))
            }
        };
        finite("omega_r", self.omega_r)?;
        finite("k", self.k)?;
        finite("eta", self.eta)?;
        finite("beta", self.beta)?;
        finite("tau", self.tau)?;
        finite("dt", self.dt)?;
        if self.omega_r < T::zero() {
            return Err(invalid("omega_r", "must be non-negative"));
        }
        if self.k < T::zero() {
            return Err(invalid("k", "must be non-negative"));
        }
        if !(self.eta > T::zero() && self.eta <= T::one()) {
            return Err(invalid("eta", "must lie in (0, 1]"));
        }
        if self.beta < T::zero() {
            return Err(invalid("beta", "must be non-negative"));
        }
        if self.dt <= T::zero() {
            return Err(invalid("dt", "must be positive"));
        }
        if self.tau < T::zero() {
            return Err(invalid("tau", "must be non-negative"));
        }
        self.n_steps()?;
        Ok(())
    }
}

/// τ/dt as an exact step count. A few ulps of slack absorb decimal
/// representation error (1.2 / 0.05 = 23.999999999999996).
pub fn step_count<T: Real>(tau: T, dt: T) -> Result<usize> {
    if !(dt > T::zero()) {
        return Err(invalid("dt", "must be positive"));
    }
    let ratio = tau / dt;
    let rounded = ratio.round();
    let slack = T::lit(4.0) * T::epsilon() * ratio.abs().max(T::one());
    if !ratio.is_finite() || (ratio - rounded).abs() > slack {
        return Err(invalid(
            "tau",
            format!("tau/dt = {ratio} is not an integer step count"),
        ));
    }
    rounded
        .to_usize()
        .ok_or_else(|| invalid("tau", "step count out of range"))
}
