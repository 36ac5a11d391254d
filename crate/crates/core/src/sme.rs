//! Diffusive stochastic master equation for a driven qubit under continuous
//! σz measurement, in Bloch coordinates.
//!
//! Unconditioned dynamics (drive Ω_R about y, measurement dephasing k):
//!
//! ```text
//! dx = (Ω_R z − 2k x) dt,   dy = −2k y dt,   dz = −Ω_R x dt
//! ```
//!
//! A measurement channel of strength `k_c` produces the record
//! `r dt = z dt + dW / sqrt(4 k_c)` and updates a filter through the innovation
//! `dV = sqrt(4 k_c) (r − z_est) dt`. To first order in dt the update is
//!
//! ```text
//! dx += −2 sqrt(k_c) x z dV,  dy += −2 sqrt(k_c) y z dV,  dz += 2 sqrt(k_c) (1 − z²) dV
//! ```
//!
//! The integrator applies that update through the Gaussian Kraus operator it
//! is the expansion of: with `λ = 4 k_c dt z_est + 2 sqrt(k_c) dV = 4 k_c r dt`,
//!
//! ```text
//! z' = (z + tanh λ) / (1 + z tanh λ),   x' = x sech λ / (1 + z tanh λ)
//! ```
//!
//! which keeps pure states pure and mixed states inside the Bloch ball. The
//! Kraus step carries the observed channels' share of the dephasing; the
//! unobserved share `exp(−2 k_unobserved dt)` and an exact rotation by Ω_R dt
//! complete the step (Lie splitting, first order in dt).

use serde::{Deserialize, Serialize};

use crate::error::{DemonError, Result};
use crate::params::{Mode, SimParams};
use crate::qubit::{rotate_y, BlochState};
use crate::rng::NoiseSource;
use crate::scalar::Real;

/// Bloch-length excess that counts as a clamp event rather than rounding.
const CLAMP_REPORT_SLACK: f64 = 1e-12;

/// One Euler step of the unconditioned (Lindblad) dynamics.
pub fn lindblad_step<T: Real>(s: &BlochState<T>, p: &SimParams<T>, dt: T) -> BlochState<T> {
    let two_k = T::lit(2.0) * p.k;
    BlochState {
        x: s.x + (p.omega_r * s.z - two_k * s.x) * dt,
        y: s.y - two_k * s.y * dt,
        z: s.z - p.omega_r * s.x * dt,
    }
}

/// Closed-form solution of the unconditioned dynamics after time `t`.
///
/// The (x, z) block is linear with generator A = [[−2k, Ω], [−Ω, 0]];
/// writing A = −k·1 + B with B² = (k² − Ω²)·1 gives exp(At) in closed form.
pub fn lindblad_solution<T: Real>(s: &BlochState<T>, omega: T, k: T, t: T) -> BlochState<T> {
    let d2 = k * k - omega * omega;
    let (c, sb) = if d2 > T::zero() {
        let d = d2.sqrt();
        ((d * t).cosh(), (d * t).sinh() / d)
    } else if d2 < T::zero() {
        let w = (-d2).sqrt();
        ((w * t).cos(), (w * t).sin() / w)
    } else {
        (T::one(), t)
    };
    let decay = (-k * t).exp();
    // B = [[−k, Ω], [−Ω, k]]
    let bx = -k * s.x + omega * s.z;
    let bz = -omega * s.x + k * s.z;
    BlochState {
        x: decay * (c * s.x + sb * bx),
        y: s.y * (-T::lit(2.0) * k * t).exp(),
        z: decay * (c * s.z + sb * bz),
    }
}

/// Exact Rabi rotation for a time `dt` (ground state turns toward +x).
pub fn drive<T: Real>(s: &BlochState<T>, omega: T, dt: T) -> BlochState<T> {
    rotate_y(s, -omega * dt)
}

/// Readout sample `r = z_true + dW / (sqrt(4 k_obs) dt)`.
pub fn sample_record<T: Real>(z_true: T, dw: T, k_obs: T, dt: T) -> Result<T> {
    if !(k_obs > T::zero()) {
        return Err(DemonError::NoSignal);
    }
    Ok(z_true + dw / ((T::lit(4.0) * k_obs).sqrt() * dt))
}

/// Innovation `dV = sqrt(4 k_obs) (r − z_est) dt`; inverts [`sample_record`]
/// when `z_est` is the state that generated the record.
pub fn innovation<T: Real>(r: T, z_est: T, k_obs: T, dt: T) -> T {
    (T::lit(4.0) * k_obs).sqrt() * (r - z_est) * dt
}

/// Kraus-form measurement update for a set of simultaneously read channels
/// `(k_c, dV_c)`, followed by extra dephasing for `k_unobserved`.
pub fn measurement_update<T: Real>(
    s: &BlochState<T>,
    channels: &[(T, T)],
    k_unobserved: T,
    dt: T,
) -> BlochState<T> {
    let coherence = (-T::lit(2.0) * k_unobserved.max(T::zero()) * dt).exp();
    kraus(s, kraus_exponent(s.z, channels, dt), coherence)
}

/// λ = Σ_c (4 k_c dt z + 2 sqrt(k_c) dV_c).
fn kraus_exponent<T: Real>(z: T, channels: &[(T, T)], dt: T) -> T {
    let four_dt = T::lit(4.0) * dt;
    let two = T::lit(2.0);
    channels
        .iter()
        .fold(T::zero(), |acc, &(kc, dv)| acc + (four_dt * kc * z + two * kc.sqrt() * dv))
}

fn kraus<T: Real>(s: &BlochState<T>, lambda: T, coherence: T) -> BlochState<T> {
    let t = lambda.tanh();
    let den = T::one() + s.z * t;
    // sech λ = sqrt(1 − tanh² λ)
    let c = coherence * (T::one() - t * t).sqrt() / den;
    BlochState {
        x: s.x * c,
        y: s.y * c,
        z: (s.z + t) / den,
    }
}

/// Result of one filter step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Filtered<T> {
    pub state: BlochState<T>,
    /// The Bloch length exceeded 1 beyond rounding and was renormalized.
    pub clamped: bool,
}

/// One full step of a single-channel filter: measurement update with
/// strength `k_obs` and innovation `dv`, unobserved dephasing `k − k_obs`,
/// then the drive.
pub fn filter_step<T: Real>(
    s: &BlochState<T>,
    dv: T,
    k_obs: T,
    p: &SimParams<T>,
    dt: T,
) -> Result<Filtered<T>> {
    if k_obs < T::zero() || !dv.is_finite() {
        return Err(DemonError::IntegrationDiverged { step: 0 });
    }
    let kernel = Kernel::new(p.omega_r, dt);
    let channels: &[(T, T)] = if k_obs > T::zero() { &[(k_obs, dv)] } else { &[] };
    let coherence = kernel.dephasing(p.k - k_obs);
    kernel
        .advance(s, channels, coherence)
        .ok_or(DemonError::IntegrationDiverged { step: 0 })
}

/// Per-step constants shared by every track of a segment.
#[derive(Debug, Clone, Copy)]
struct Kernel<T> {
    dt: T,
    /// sin and cos of the drive angle −Ω_R dt.
    sin: T,
    cos: T,
}

impl<T: Real> Kernel<T> {
    fn new(omega: T, dt: T) -> Self {
        let (sin, cos) = (-omega * dt).sin_cos();
        Self { dt, sin, cos }
    }

    fn dephasing(&self, k_unobserved: T) -> T {
        (-T::lit(2.0) * k_unobserved.max(T::zero()) * self.dt).exp()
    }

    fn advance(&self, s: &BlochState<T>, channels: &[(T, T)], coherence: T) -> Option<Filtered<T>> {
        self.step(s, kraus_exponent(s.z, channels, self.dt), coherence)
    }

    fn step(&self, s: &BlochState<T>, lambda: T, coherence: T) -> Option<Filtered<T>> {
        let m = kraus(s, lambda, coherence);
        let mut state = BlochState {
            x: m.x * self.cos - m.z * self.sin,
            y: m.y,
            z: m.x * self.sin + m.z * self.cos,
        };
        if !state.is_finite() {
            return None;
        }
        let excess = state.length() - T::one();
        state.clamp_to_ball();
        Some(Filtered {
            state,
            clamped: excess > T::lit(CLAMP_REPORT_SLACK),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentOptions {
    /// Store the tracks after every `path_stride`-th step (and always after
    /// the last one).
    pub path_stride: usize,
    /// Keep the per-step readout samples.
    pub keep_records: bool,
}

impl SegmentOptions {
    /// Only the final states are stored.
    pub fn final_only() -> Self {
        Self {
            path_stride: usize::MAX,
            keep_records: false,
        }
    }

    pub fn every(stride: usize) -> Self {
        Self {
            path_stride: stride.max(1),
            keep_records: false,
        }
    }
}

impl Default for SegmentOptions {
    fn default() -> Self {
        Self::final_only()
    }
}

/// Sampled states of one track.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track<T> {
    pub path: Vec<BlochState<T>>,
    pub last: BlochState<T>,
}

impl<T: Real> Track<T> {
    fn new(start: BlochState<T>, capacity: usize) -> Self {
        Self {
            path: Vec::with_capacity(capacity),
            last: start,
        }
    }
}

/// One monitored evolution: the readout records and the sampled tracks.
///
/// In hierarchy mode all three tracks share the sampling grid `times`; in
/// filter-only mode only `demon` is populated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitoredSegment<T> {
    pub mode: Mode,
    pub times: Vec<T>,
    /// Observed readout samples r₁, one per step (empty unless requested).
    pub records: Vec<T>,
    /// Hidden-channel samples r₂ (hierarchy mode, when requested).
    pub hidden_records: Vec<T>,
    pub truth: Option<Track<T>>,
    pub omniscient: Option<Track<T>>,
    pub demon: Track<T>,
    pub clamp_events: u32,
}

impl<T: Real> MonitoredSegment<T> {
    pub fn n_samples(&self) -> usize {
        self.times.len()
    }
}

/// Integrates one monitored segment of length `p.tau`.
///
/// `noise` supplies two normals per step in hierarchy mode (observed channel,
/// hidden channel) and one in filter-only mode.
pub fn run_monitored_segment<T: Real, N: NoiseSource>(
    p: &SimParams<T>,
    start_true: BlochState<T>,
    start_prior: BlochState<T>,
    noise: &mut N,
    opts: &SegmentOptions,
) -> Result<MonitoredSegment<T>> {
    p.validate()?;
    start_prior.validate()?;
    let n_steps = p.n_steps()?;
    let dt = p.dt;
    let sqrt_dt = dt.sqrt();
    let k1 = p.k_observed();
    let k2 = p.k_hidden();
    let stride = opts.path_stride.max(1);
    let capacity = n_steps / stride + 1;
    let hierarchy = p.mode == Mode::Hierarchy;

    if hierarchy {
        start_true.validate()?;
        if (start_true.length() - T::one()).abs() > T::lit(1e-9) {
            return Err(crate::error::invalid(
                "start_true",
                "hierarchy mode needs a pure starting state",
            ));
        }
    }

    let mut times = Vec::with_capacity(capacity);
    let mut records = Vec::new();
    let mut hidden_records = Vec::new();
    if opts.keep_records {
        records.reserve(n_steps);
        if hierarchy {
            hidden_records.reserve(n_steps);
        }
    }
    let mut truth = hierarchy.then(|| Track::new(start_true, capacity));
    let mut omni = hierarchy.then(|| Track::new(start_prior, capacity));
    let mut demon = Track::new(start_prior, capacity);
    let mut clamp_events = 0u32;

    let kernel = Kernel::new(p.omega_r, dt);
    // the true and omniscient tracks see every channel; the demon misses k2
    let full_coherence = kernel.dephasing(T::zero());
    let demon_coherence = kernel.dephasing(k2);
    let n_normals = if hierarchy { 2 } else { 1 };
    let mut xi = [0.0f64; 2];
    // per-channel constants: 4k dt and sqrt(4k)
    let four_dt = T::lit(4.0) * dt;
    let (a1, g1) = (four_dt * k1, (T::lit(4.0) * k1).sqrt());
    let (a2, g2) = (four_dt * k2, (T::lit(4.0) * k2).sqrt());
    let on1 = k1 > T::zero();
    let on2 = hierarchy && k2 > T::zero();
    // λ contribution of one channel given the track's z and innovation dV
    let lam = |a: T, g: T, z: T, dv: T| a * z + g * dv;

    let mut push = |f: Option<Filtered<T>>, step: usize| -> Result<BlochState<T>> {
        let f = f.ok_or(DemonError::IntegrationDiverged { step })?;
        clamp_events += u32::from(f.clamped);
        Ok(f.state)
    };

    for step in 1..=n_steps {
        noise.fill_step(&mut xi[..n_normals]);
        let dw1 = sqrt_dt * T::lit(xi[0]);

        if let (Some(truth), Some(omni)) = (truth.as_mut(), omni.as_mut()) {
            let dw2 = sqrt_dt * T::lit(xi[1]);
            let z_true = truth.last.z;
            let z_omni = omni.last.z;
            let z_demon = demon.last.z;

            // r = z + dW / (sqrt(4k) dt), dV = sqrt(4k) (r − ẑ) dt
            let r1 = if on1 { z_true + dw1 / (g1 * dt) } else { T::zero() };
            let r2 = if on2 { z_true + dw2 / (g2 * dt) } else { T::zero() };
            if !(r1.is_finite() && r2.is_finite()) {
                return Err(DemonError::IntegrationDiverged { step });
            }

            let mut l_true = T::zero();
            let mut l_omni = T::zero();
            let mut l_demon = T::zero();
            if on1 {
                l_true = l_true + lam(a1, g1, z_true, dw1);
                l_omni = l_omni + lam(a1, g1, z_omni, g1 * (r1 - z_omni) * dt);
                l_demon = l_demon + lam(a1, g1, z_demon, g1 * (r1 - z_demon) * dt);
            }
            if on2 {
                l_true = l_true + lam(a2, g2, z_true, dw2);
                l_omni = l_omni + lam(a2, g2, z_omni, g2 * (r2 - z_omni) * dt);
            }
            truth.last = push(kernel.step(&truth.last, l_true, full_coherence), step)?;
            omni.last = push(kernel.step(&omni.last, l_omni, full_coherence), step)?;
            demon.last = push(kernel.step(&demon.last, l_demon, demon_coherence), step)?;

            if opts.keep_records {
                if on1 {
                    records.push(r1);
                }
                if on2 {
                    hidden_records.push(r2);
                }
            }
        } else {
            let mut l_demon = T::zero();
            if on1 {
                l_demon = lam(a1, g1, demon.last.z, dw1);
                if opts.keep_records {
                    records.push(demon.last.z + dw1 / (g1 * dt));
                }
            }
            demon.last = push(kernel.step(&demon.last, l_demon, demon_coherence), step)?;
        }

        if step % stride == 0 || step == n_steps {
            times.push(T::from_usize(step).unwrap() * dt);
            demon.path.push(demon.last);
            if let Some(t) = truth.as_mut() {
                t.path.push(t.last);
            }
            if let Some(o) = omni.as_mut() {
                o.path.push(o.last);
            }
        }
    }

    Ok(MonitoredSegment {
        mode: p.mode,
        times,
        records,
        hidden_records,
        truth,
        omniscient: omni,
        demon,
        clamp_events,
    })
}
