//! Monte Carlo simulation of a continuously monitored, driven qubit used as a
//! quantum Maxwell's demon.
//!
//! The crate integrates single quantum trajectories of the diffusive
//! stochastic master equation, applies measurement-based feedback, accounts
//! work and information per trajectory, and estimates the fluctuation theorem
//! with feedback ⟨e^{−βW − I}⟩ = 1 together with the information gain/loss
//! split of ⟨I⟩.
//!
//! All numerics are generic over [`Real`] (`f32` or `f64`); the aliases below
//! fix the double-precision flavour used by the command-line runner.

pub mod diagnostics;
pub mod error;
pub mod ft;
pub mod info;
pub mod params;
pub mod protocol;
pub mod qubit;
pub mod rng;
pub mod scalar;
pub mod sme;
pub mod stats;

pub use error::{DemonError, Result};
pub use params::{FeedbackMode, InfoTiming, Mode, SimParams};
pub use qubit::{BlochState, EnergyOutcome};
pub use scalar::Real;
pub use stats::Estimate;

pub type Bloch = qubit::BlochState<f64>;
pub type Params = params::SimParams<f64>;
pub type Segment = sme::MonitoredSegment<f64>;
pub type Outcome = protocol::ProtocolOutcome<f64>;
pub type Series = info::InfoSeries<f64>;
pub type Summary = ft::BatchSummary<f64>;
pub type Sweep = ft::SweepSummary<f64>;

pub type Bloch32 = qubit::BlochState<f32>;
pub type Params32 = params::SimParams<f32>;
