//! Two-level states in Bloch representation.
//!
//! Conventions: the ground state |0⟩ sits at z = +1 with energy 0, the excited
//! state |1⟩ at z = −1 with energy 1 (energies in units of the qubit quantum).
//! Entropies are in nats.

use serde::{Deserialize, Serialize};

use crate::error::{DemonError, Result};
use crate::scalar::Real;

/// Slack allowed on the Bloch length before a state is rejected as unphysical.
pub const BLOCH_SLACK: f64 = 1e-9;

/// Qubit density matrix ρ = (1 + x σx + y σy + z σz) / 2.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BlochState<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> BlochState<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    /// State in the X–Z plane.
    pub fn xz(x: T, z: T) -> Self {
        Self { x, y: T::zero(), z }
    }

    pub fn maximally_mixed() -> Self {
        Self::xz(T::zero(), T::zero())
    }

    pub fn ground() -> Self {
        Self::xz(T::zero(), T::one())
    }

    pub fn excited() -> Self {
        Self::xz(T::zero(), -T::one())
    }

    /// Bloch length ℓ = |r|.
    pub fn length(&self) -> T {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Checks positivity of the density matrix within [`BLOCH_SLACK`].
    pub fn validate(&self) -> Result<()> {
        let length = self.length();
        if !length.is_finite() || length > T::one() + T::lit(BLOCH_SLACK) {
            return Err(DemonError::StateInvalid {
                length: length.as_f64(),
            });
        }
        Ok(())
    }

    /// Rescales the vector to unit length when it pokes out of the ball.
    /// Returns `true` when a correction was applied.
    pub fn clamp_to_ball(&mut self) -> bool {
        let length = self.length();
        if length > T::one() {
            self.x = self.x / length;
            self.y = self.y / length;
            self.z = self.z / length;
            true
        } else {
            false
        }
    }

    pub fn eigen_probs(&self) -> Result<(T, T)> {
        eigen_probs(self)
    }

    pub fn energy_probs(&self) -> (T, T) {
        energy_probs(self)
    }

    pub fn entropy(&self) -> T {
        von_neumann_entropy(self)
    }

    pub fn purity(&self) -> T {
        purity(self)
    }

    pub fn rotate_y(&self, theta: T) -> Self {
        rotate_y(self, theta)
    }
}

/// Outcome of a projective measurement in the energy basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EnergyOutcome {
    Ground,
    Excited,
}

impl EnergyOutcome {
    pub fn from_label(label: u8) -> Option<Self> {
        match label {
            0 => Some(Self::Ground),
            1 => Some(Self::Excited),
            _ => None,
        }
    }

    pub fn label(self) -> u8 {
        match self {
            Self::Ground => 0,
            Self::Excited => 1,
        }
    }

    pub fn energy<T: Real>(self) -> T {
        match self {
            Self::Ground => T::zero(),
            Self::Excited => T::one(),
        }
    }

    /// Probability of this outcome for the given state.
    pub fn probability<T: Real>(self, s: &BlochState<T>) -> T {
        let (p0, p1) = energy_probs(s);
        match self {
            Self::Ground => p0,
            Self::Excited => p1,
        }
    }

    /// The pole the state collapses to.
    pub fn pole<T: Real>(self) -> BlochState<T> {
        match self {
            Self::Ground => BlochState::ground(),
            Self::Excited => BlochState::excited(),
        }
    }
}

/// Gibbs state at inverse temperature `beta` (z = tanh(β/2)).
pub fn thermal_state<T: Real>(beta: T) -> Result<BlochState<T>> {
    if !beta.is_finite() {
        return Err(crate::error::invalid("beta", "must be finite"));
    }
    if beta < T::zero() {
        return Err(crate::error::invalid("beta", "must be non-negative"));
    }
    Ok(BlochState::xz(T::zero(), (beta / T::lit(2.0)).tanh()))
}

/// Gibbs weights (P0, P1) = (1, e^{−β}) / (1 + e^{−β}).
pub fn gibbs_weights<T: Real>(beta: T) -> (T, T) {
    let boltz = (-beta).exp();
    let z = T::one() + boltz;
    (T::one() / z, boltz / z)
}

/// Probabilities in the basis where the state is diagonal, larger first.
pub fn eigen_probs<T: Real>(s: &BlochState<T>) -> Result<(T, T)> {
    s.validate()?;
    let l = s.length().min(T::one());
    let half = T::lit(0.5);
    Ok((half * (T::one() + l), half * (T::one() - l)))
}

/// Energy-basis probabilities (P0, P1) = ((1+z)/2, (1−z)/2).
pub fn energy_probs<T: Real>(s: &BlochState<T>) -> (T, T) {
    let half = T::lit(0.5);
    (half * (T::one() + s.z), half * (T::one() - s.z))
}

/// −p ln p with the 0 ln 0 = 0 convention.
fn plogp<T: Real>(p: T) -> T {
    if p <= T::zero() {
        T::zero()
    } else {
        -p * p.ln()
    }
}

/// Von Neumann entropy in nats. States marginally outside the ball are
/// treated as pure.
pub fn von_neumann_entropy<T: Real>(s: &BlochState<T>) -> T {
    let l = s.length().min(T::one());
    let half = T::lit(0.5);
    plogp(half * (T::one() + l)) + plogp(half * (T::one() - l))
}

/// Rotation about the y axis: x′ = x cosθ − z sinθ, z′ = x sinθ + z cosθ.
///
/// With this sense θ = atan2(x, z) carries any X–Z vector onto +z.
pub fn rotate_y<T: Real>(s: &BlochState<T>, theta: T) -> BlochState<T> {
    let (sin, cos) = theta.sin_cos();
    BlochState {
        x: s.x * cos - s.z * sin,
        y: s.y,
        z: s.x * sin + s.z * cos,
    }
}

/// Tr ρ² = (1 + ℓ²)/2.
pub fn purity<T: Real>(s: &BlochState<T>) -> T {
    let l2 = s.x * s.x + s.y * s.y + s.z * s.z;
    T::lit(0.5) * (T::one() + l2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{LN_2, PI};

    type S = BlochState<f64>;

    #[test]
    fn thermal_examples() {
        assert_eq!(thermal_state(0.0).unwrap(), S::xz(0.0, 0.0));
        assert_abs_diff_eq!(thermal_state(4.0).unwrap().z, 0.964028, epsilon = 5e-7);
        let cold = thermal_state(50.0).unwrap();
        assert!(1.0 - cold.z < 1e-21);
        assert!(thermal_state(f64::NAN).is_err());
        assert!(thermal_state(f64::INFINITY).is_err());
        assert!(thermal_state(-1.0).is_err());
    }

    #[test]
    fn eigen_prob_examples() {
        assert_eq!(eigen_probs(&S::xz(0.0, 0.0)).unwrap(), (0.5, 0.5));
        let (p, m) = eigen_probs(&S::xz(0.6, 0.8)).unwrap();
        assert_abs_diff_eq!(p, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m, 0.0, epsilon = 1e-15);
        let (p, m) = eigen_probs(&S::xz(0.3, 0.4)).unwrap();
        assert_abs_diff_eq!(p, 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(m, 0.25, epsilon = 1e-15);
        assert!(matches!(
            eigen_probs(&S::xz(0.8, 0.8)),
            Err(DemonError::StateInvalid { .. })
        ));
    }

    #[test]
    fn energy_prob_examples() {
        assert_eq!(energy_probs(&S::xz(0.0, 1.0)), (1.0, 0.0));
        assert_eq!(energy_probs(&S::xz(0.0, 0.5)), (0.75, 0.25));
        assert_eq!(energy_probs(&S::xz(0.0, -1.0)), (0.0, 1.0));
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(von_neumann_entropy(&S::xz(1.0, 0.0)), 0.0);
        assert_abs_diff_eq!(von_neumann_entropy(&S::xz(0.0, 0.0)), LN_2, epsilon = 1e-15);
        // -Σ p ln p at p0 = 1/(1+e^-4)
        let p0 = 1.0 / (1.0 + (-4.0f64).exp());
        let oracle = -p0 * p0.ln() - (1.0 - p0) * (1.0 - p0).ln();
        let s = von_neumann_entropy(&thermal_state(4.0).unwrap());
        assert_abs_diff_eq!(s, oracle, epsilon = 1e-14);
        assert_abs_diff_eq!(s, 0.090095, epsilon = 5e-7);
    }

    #[test]
    fn rotation_examples() {
        assert_eq!(rotate_y(&S::xz(0.0, 1.0), 0.0), S::xz(0.0, 1.0));
        let flipped = rotate_y(&S::xz(0.0, -1.0), PI);
        assert_abs_diff_eq!(flipped.x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(flipped.z, 1.0, epsilon = 1e-15);
        let up = rotate_y(&S::xz(1.0, 0.0), PI / 2.0);
        assert_abs_diff_eq!(up.x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(up.z, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn purity_examples() {
        assert_eq!(purity(&S::xz(0.0, 0.0)), 0.5);
        assert_eq!(purity(&S::xz(0.0, 1.0)), 1.0);
        assert_abs_diff_eq!(purity(&S::xz(0.3, 0.4)), 0.625, epsilon = 1e-15);
    }

    #[test]
    fn outcome_labels() {
        assert_eq!(EnergyOutcome::from_label(0), Some(EnergyOutcome::Ground));
        assert_eq!(EnergyOutcome::from_label(1), Some(EnergyOutcome::Excited));
        assert_eq!(EnergyOutcome::from_label(2), None);
        for o in [EnergyOutcome::Ground, EnergyOutcome::Excited] {
            assert_eq!(o.energy::<f64>(), o.label() as f64);
        }
    }

    #[test]
    fn works_in_single_precision() {
        let s = thermal_state(4.0f32).unwrap();
        assert!((von_neumann_entropy(&s) - 0.090095).abs() < 1e-5);
    }

    fn ball_state() -> impl Strategy<Value = S> {
        (0.0..=1.0f64, 0.0..(2.0 * PI)).prop_map(|(l, phi)| S::xz(l * phi.sin(), l * phi.cos()))
    }

    proptest! {
        #[test]
        fn rotation_preserves_length(s in ball_state(), theta in 0.0..(2.0 * PI)) {
            prop_assert!((rotate_y(&s, theta).length() - s.length()).abs() <= 1e-12);
        }

        #[test]
        fn probabilities_sum_to_one(s in ball_state()) {
            let (p, m) = eigen_probs(&s).unwrap();
            prop_assert!((p + m - 1.0).abs() <= 1e-15);
            let (p0, p1) = energy_probs(&s);
            prop_assert!((p0 + p1 - 1.0).abs() <= 1e-15);
        }

        #[test]
        fn entropy_is_bounded(s in ball_state()) {
            let h = von_neumann_entropy(&s);
            prop_assert!((0.0..=LN_2 + 1e-15).contains(&h));
        }

        #[test]
        fn entropy_vanishes_only_for_pure(l in 0.0..=1.0f64, phi in 0.0..(2.0 * PI)) {
            let s = S::xz(l * phi.sin(), l * phi.cos());
            let h = von_neumann_entropy(&s);
            if (1.0 - s.length()).abs() <= 1e-12 {
                prop_assert!(h < 1e-10);
            } else {
                prop_assert!(h > 0.0);
            }
        }

        #[test]
        fn thermal_matches_gibbs(beta in 0.0..60.0f64) {
            let (p0, p1) = energy_probs(&thermal_state(beta).unwrap());
            let e = (-beta).exp();
            prop_assert!((p0 - 1.0 / (1.0 + e)).abs() <= 1e-12);
            prop_assert!((p1 - e / (1.0 + e)).abs() <= 1e-12);
        }
    }
}
