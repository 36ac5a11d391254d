//! The five-step feedback experiment: thermal preparation, first energy
//! measurement, monitored driven evolution, feedback rotation, second energy
//! measurement.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::info::{clamped_info_outcome, info_trajectory};
use crate::params::{FeedbackMode, InfoTiming, Mode, SimParams};
use crate::qubit::{gibbs_weights, thermal_state, BlochState, EnergyOutcome};
use crate::rng::{event_stream, noise_stream, BoxMuller, NoiseSource};
use crate::scalar::Real;
use crate::sme::{run_monitored_segment, MonitoredSegment, SegmentOptions};

/// Half-width of the randomized-feedback acceptance window.
pub fn acceptance_window<T: Real>() -> T {
    T::PI() / T::lit(20.0)
}

/// Wraps an angle into (−π, π].
pub fn wrap_angle<T: Real>(a: T) -> T {
    let tau = T::TAU();
    let mut w = a - tau * (a / tau).round();
    if w <= -T::PI() {
        w = w + tau;
    } else if w > T::PI() {
        w = w - tau;
    }
    w
}

/// First projective measurement on the thermal state.
pub fn sample_initial<T: Real, R: Rng + ?Sized>(beta: T, rng: &mut R) -> EnergyOutcome {
    let (p0, _) = gibbs_weights(beta.max(T::zero()));
    let u: f64 = rng.random();
    if u < p0.as_f64() {
        EnergyOutcome::Ground
    } else {
        EnergyOutcome::Excited
    }
}

/// Feedback angle θ = atan2(x, z); `rotate_y(s, θ)` then points along +z.
///
/// The flag is set for the maximally mixed state, where every rotation is
/// equivalent and θ = 0 is returned.
pub fn feedback_angle<T: Real>(s: &BlochState<T>) -> (T, bool) {
    if s.x == T::zero() && s.z == T::zero() {
        (T::zero(), true)
    } else {
        (s.x.atan2(s.z), false)
    }
}

/// Chooses the rotation actually applied. Returns `(theta_applied, accepted)`.
pub fn apply_feedback<T: Real, R: Rng + ?Sized>(
    mode: FeedbackMode,
    theta_star: T,
    rng: &mut R,
) -> (T, bool) {
    match mode {
        FeedbackMode::Ideal => (theta_star, true),
        FeedbackMode::Off => (T::zero(), true),
        FeedbackMode::Randomized => {
            let u: f64 = rng.random();
            let phi = T::TAU() * T::lit(u);
            let accepted = wrap_angle(phi - theta_star).abs() <= acceptance_window();
            (phi, accepted)
        }
    }
}

/// Second projective measurement; returns the outcome and the collapsed state.
pub fn project_energy<T: Real, R: Rng + ?Sized>(
    true_state: &BlochState<T>,
    rng: &mut R,
) -> (EnergyOutcome, BlochState<T>) {
    let (p0, _) = true_state.energy_probs();
    let u: f64 = rng.random();
    let outcome = if u < p0.as_f64() {
        EnergyOutcome::Ground
    } else {
        EnergyOutcome::Excited
    };
    (outcome, outcome.pole())
}

/// One full protocol run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolOutcome<T> {
    pub j_init: EnergyOutcome,
    pub i_final: EnergyOutcome,
    /// Whether `j_init` is kept for two-point-measurement statistics.
    pub tpm_recorded: bool,
    /// E(i_final) − E(j_init).
    pub work: T,
    pub theta_fb: T,
    pub theta_applied: T,
    pub accepted: bool,
    /// The demon ended maximally mixed, so θ was arbitrary.
    pub degenerate_feedback: bool,
    pub rho0: BlochState<T>,
    pub demon_final_pre_fb: BlochState<T>,
    pub demon_final_post_fb: BlochState<T>,
    pub true_final_post_fb: BlochState<T>,
    pub omni_final_post_fb: Option<BlochState<T>>,
    /// ln P_i(ρ_demon) − ln P_j(ρ₀), probabilities clamped at 1e−12.
    pub info_fin: T,
    /// A probability in `info_fin` had to be clamped.
    pub info_flagged: bool,
    /// Ĩ(t) = S(ρ₀) − S(ρ_demon(t)) on the segment's sampling grid.
    pub info_path: Vec<T>,
    pub segment: MonitoredSegment<T>,
}

impl<T: Real> ProtocolOutcome<T> {
    /// Final Ĩ at t = τ.
    pub fn info_tilde_final(&self) -> T {
        self.rho0.entropy() - self.demon_final_pre_fb.entropy()
    }
}

/// Runs the protocol with explicit noise and event sources.
pub fn run_protocol_with<T: Real, N: NoiseSource, R: Rng>(
    p: &SimParams<T>,
    noise: &mut N,
    events: &mut R,
    opts: &SegmentOptions,
) -> Result<ProtocolOutcome<T>> {
    p.validate()?;
    let rho0 = thermal_state(p.beta)?;

    let j_init = sample_initial(p.beta, events);
    let segment = run_monitored_segment(p, j_init.pole(), rho0, noise, opts)?;

    let demon_pre = segment.demon.last;
    let (theta_fb, degenerate_feedback) = feedback_angle(&demon_pre);
    let (theta_applied, accepted) = apply_feedback(p.feedback_mode, theta_fb, events);

    let demon_post = demon_pre.rotate_y(theta_applied);
    let omni_post = segment
        .omniscient
        .as_ref()
        .map(|o| o.last.rotate_y(theta_applied));
    // Without the true track the demon's own state is the best model of the qubit.
    let true_post = match &segment.truth {
        Some(t) => t.last.rotate_y(theta_applied),
        None => demon_post,
    };
    let (i_final, _) = project_energy(&true_post, events);

    let info_state = match p.info_timing {
        InfoTiming::PostFeedback => demon_post,
        InfoTiming::PreFeedback => demon_pre,
    };
    let (info_fin, info_flagged) = clamped_info_outcome(j_init, &info_state, i_final, &rho0);
    let info_path = info_trajectory(&rho0, &segment.times, &segment.demon.path, None).i_tilde;

    Ok(ProtocolOutcome {
        j_init,
        i_final,
        tpm_recorded: p.initial_projection && p.mode == Mode::Hierarchy,
        work: i_final.energy::<T>() - j_init.energy::<T>(),
        theta_fb,
        theta_applied,
        accepted,
        degenerate_feedback,
        rho0,
        demon_final_pre_fb: demon_pre,
        demon_final_post_fb: demon_post,
        true_final_post_fb: true_post,
        omni_final_post_fb: omni_post,
        info_fin,
        info_flagged,
        info_path,
        segment,
    })
}

/// Runs trajectory `index` on its standard streams.
pub fn run_protocol<T: Real>(
    p: &SimParams<T>,
    index: u64,
    opts: &SegmentOptions,
) -> Result<ProtocolOutcome<T>> {
    let mut noise = BoxMuller::new(noise_stream(p.seed, index));
    let mut events = event_stream(p.seed, index);
    run_protocol_with(p, &mut noise, &mut events, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    type P = SimParams<f64>;
    type S = BlochState<f64>;

    #[test]
    fn initial_sampling_frequencies() {
        let (p0, _) = gibbs_weights(4.0f64);
        assert_abs_diff_eq!(p0, 0.982014, epsilon = 5e-7);
        let mut rng = stream(1, 0);
        let n = 100_000;
        for (beta, expected) in [(0.0, 0.5), (4.0, p0)] {
            let ground = (0..n)
                .filter(|_| sample_initial(beta, &mut rng) == EnergyOutcome::Ground)
                .count() as f64
                / n as f64;
            let se = (expected * (1.0 - expected) / n as f64).sqrt();
            assert!((ground - expected).abs() < 3.0 * se, "beta={beta}");
        }
        assert!((0..1000).all(|_| sample_initial(1e6, &mut rng) == EnergyOutcome::Ground));
    }

    #[test]
    fn feedback_angle_examples() {
        assert_eq!(feedback_angle(&S::ground()), (0.0, false));
        assert_abs_diff_eq!(feedback_angle(&S::excited()).0, PI, epsilon = 1e-15);
        assert_abs_diff_eq!(feedback_angle(&S::xz(1.0, 0.0)).0, PI / 2.0, epsilon = 1e-15);
        assert_eq!(feedback_angle(&S::maximally_mixed()), (0.0, true));
    }

    #[test]
    fn feedback_rotation_nulls_x() {
        for (x, z) in [(0.3, 0.4), (-0.7, 0.1), (0.2, -0.9), (-0.5, -0.5)] {
            let s = S::xz(x, z);
            let post = s.rotate_y(feedback_angle(&s).0);
            assert!(post.x.abs() <= 1e-12);
            assert_abs_diff_eq!(post.z, s.length(), epsilon = 1e-12);
        }
    }

    #[test]
    fn apply_feedback_modes() {
        let mut rng = stream(2, 0);
        assert_eq!(apply_feedback(FeedbackMode::Ideal, 1.2, &mut rng), (1.2, true));
        assert_eq!(apply_feedback(FeedbackMode::Off, 1.2, &mut rng), (0.0, true));
        let n = 200_000;
        let accepted = (0..n)
            .filter(|_| apply_feedback(FeedbackMode::Randomized, 1.2, &mut rng).1)
            .count() as f64
            / n as f64;
        let se = (0.05 * 0.95 / n as f64).sqrt();
        assert!((accepted - 0.05).abs() < 3.0 * se, "acceptance={accepted}");
    }

    #[test]
    fn acceptance_window_edges() {
        let theta: f64 = 1.2;
        let w = acceptance_window::<f64>();
        assert!(wrap_angle(theta + PI / 10.0 - theta).abs() > w);
        assert!(wrap_angle(theta + 0.99 * w - theta).abs() <= w);
        // wrap-around near 0 / 2π
        assert!(wrap_angle(2.0 * PI - 0.01 - 0.02).abs() <= w);
    }

    #[test]
    fn wrap_range() {
        for a in [-10.0, -PI, -1.0, 0.0, 1.0, PI, 3.5, 7.0, 100.0] {
            let w = wrap_angle(a);
            assert!(w > -PI && w <= PI, "{a} -> {w}");
            let turns = (a - w) / (2.0 * PI);
            assert!((turns - turns.round()).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_statistics() {
        let mut rng = stream(3, 0);
        assert!((0..1000).all(|_| project_energy(&S::ground(), &mut rng).0 == EnergyOutcome::Ground));
        assert!((0..1000).all(|_| project_energy(&S::excited(), &mut rng).0 == EnergyOutcome::Excited));
        let s = S::xz(0.0, 0.9640);
        let n = 100_000;
        let f = (0..n)
            .filter(|_| project_energy(&s, &mut rng).0 == EnergyOutcome::Ground)
            .count() as f64
            / n as f64;
        let p = 0.982;
        assert!((f - p).abs() < 3.0 * (p * (1.0 - p) / n as f64).sqrt());
    }

    #[test]
    fn static_protocol_has_no_work_or_information() {
        let p = P { omega_r: 0.0, k: 0.0, ..P::defaults() };
        for idx in 0..50 {
            let out = run_protocol(&p, idx, &SegmentOptions::default()).unwrap();
            // the demon stays at the thermal prior, already on +z
            assert_eq!(out.theta_applied, 0.0);
            assert_eq!(out.i_final, out.j_init);
            assert_eq!(out.work, 0.0);
            assert_eq!(out.info_fin, 0.0);
        }
    }

    #[test]
    fn work_convention() {
        let p = P { tau: 0.4, ..P::defaults() };
        let mut seen = [false; 3];
        for idx in 0..2000 {
            let out = run_protocol(&p, idx, &SegmentOptions::default()).unwrap();
            let expected = out.i_final.label() as f64 - out.j_init.label() as f64;
            assert_eq!(out.work, expected);
            seen[(expected + 1.0) as usize] = true;
        }
        assert!(seen[1]);
    }

    #[test]
    fn ideal_feedback_leaves_demon_on_positive_z() {
        let p = P { tau: 1.0, ..P::defaults() };
        for idx in 0..200 {
            let out = run_protocol(&p, idx, &SegmentOptions::default()).unwrap();
            assert!(out.accepted);
            assert!(out.demon_final_post_fb.x.abs() <= 1e-12);
            assert!(out.demon_final_post_fb.z >= 0.0);
        }
    }

    #[test]
    fn randomized_feedback_within_window() {
        let p = P { tau: 0.4, feedback_mode: FeedbackMode::Randomized, ..P::defaults() };
        let mut n_acc = 0;
        for idx in 0..2000 {
            let out = run_protocol(&p, idx, &SegmentOptions::default()).unwrap();
            if out.accepted {
                n_acc += 1;
                assert!(wrap_angle(out.theta_applied - out.theta_fb).abs() <= PI / 20.0);
            }
        }
        assert!(n_acc > 0 && n_acc < 2000);
    }

    #[test]
    fn reproducible_per_index() {
        let p = P { tau: 0.4, ..P::defaults() };
        let a = run_protocol(&p, 17, &SegmentOptions::every(10)).unwrap();
        let b = run_protocol(&p, 17, &SegmentOptions::every(10)).unwrap();
        assert_eq!(a, b);
        let c = run_protocol(&p, 18, &SegmentOptions::every(10)).unwrap();
        assert_ne!(a.segment.demon.last, c.segment.demon.last);
    }
}
