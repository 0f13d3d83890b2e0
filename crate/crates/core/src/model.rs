//! Parameter sets, the periodic forcing, and the map from physical to
//! dimensionless parameters.
//!
//! In dimensionless time the forcing has period 2 and unit norm, and the
//! relative coordinate obeys `Z'' = f(t) + gbar` between impacts. Barriers sit
//! at `Z = +d/2` (bottom) and `Z = -d/2` (top).

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Standard gravity used when a configuration does not override it.
pub const STANDARD_GRAVITY: f64 = 9.8;

/// Dimensionless forcing period.
pub const FORCING_PERIOD: f64 = 2.0;

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_phase(phi: f64) -> f64 {
    let w = phi.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Signed distance between two phases, in `(-π, π]`.
pub fn phase_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

/// Dimensional description of the device and its excitation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Cylinder mass (kg).
    #[serde(rename = "M")]
    pub mass: f64,
    /// Cylinder length (m).
    pub s: f64,
    /// Angular forcing frequency (rad/s).
    pub omega: f64,
    /// Forcing strength norm (N).
    #[serde(rename = "F_norm")]
    pub force_norm: f64,
    /// Incline angle (rad), in `(0, π/2]`.
    pub beta: f64,
    #[serde(default = "default_gravity")]
    pub g: f64,
}

fn default_gravity() -> f64 {
    STANDARD_GRAVITY
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("M", self.mass),
            ("s", self.s),
            ("omega", self.omega),
            ("F_norm", self.force_norm),
            ("beta", self.beta),
            ("g", self.g),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Domain(format!(
                    "{name} must be positive, got {value}"
                )));
            }
        }
        if self.beta > PI / 2.0 + 1e-15 {
            return Err(Error::Domain(format!(
                "beta must lie in (0, pi/2], got {}",
                self.beta
            )));
        }
        Ok(())
    }

    /// Dimensionless cylinder length `s M ω² / (‖F‖ π²)`.
    pub fn dimensionless_length(&self) -> f64 {
        self.s * self.mass * self.omega * self.omega / (self.force_norm * PI * PI)
    }

    /// Dimensionless gravity term `M g sin β / ‖F‖`.
    pub fn dimensionless_gravity(&self) -> f64 {
        self.mass * self.g * self.beta.sin() / self.force_norm
    }

    /// Cylinder length that yields dimensionless length `d` with everything
    /// else held fixed.
    pub fn length_for(&self, d: f64) -> f64 {
        d * self.force_norm * PI * PI / (self.mass * self.omega * self.omega)
    }

    pub fn nondimensionalize(&self, r: f64, phi: f64) -> Result<SystemParams> {
        self.validate()?;
        SystemParams::new(
            r,
            self.dimensionless_length(),
            self.dimensionless_gravity(),
            phi,
        )
    }
}

/// Dimensionless parameters governing all dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Coefficient of restitution, `0 < r < 1`.
    pub r: f64,
    /// Dimensionless cylinder length.
    pub d: f64,
    /// Dimensionless gravity forcing.
    pub gbar: f64,
    /// Global forcing phase, stored in `[0, 2π)`.
    pub phi: f64,
}

impl SystemParams {
    pub fn new(r: f64, d: f64, gbar: f64, phi: f64) -> Result<Self> {
        let p = Self {
            r,
            d,
            gbar,
            phi: wrap_phase(phi),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0 && self.r < 1.0) {
            return Err(Error::Domain(format!(
                "r must lie in (0, 1), got {}",
                self.r
            )));
        }
        if !(self.d.is_finite() && self.d > 0.0) {
            return Err(Error::Domain(format!("d must be positive, got {}", self.d)));
        }
        if !(self.gbar.is_finite() && self.gbar >= 0.0) {
            return Err(Error::Domain(format!(
                "gbar must be non-negative, got {}",
                self.gbar
            )));
        }
        if !self.phi.is_finite() {
            return Err(Error::Domain("phi must be finite".into()));
        }
        Ok(())
    }

    pub fn with_d(&self, d: f64) -> Self {
        Self { d, ..*self }
    }

    pub fn with_phi(&self, phi: f64) -> Self {
        Self {
            phi: wrap_phase(phi),
            ..*self
        }
    }

    pub fn half_gap(&self) -> f64 {
        0.5 * self.d
    }
}

/// Distinguishes forcings for which closed-form specialized equations exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForcingKind {
    Cosine,
    General,
}

/// A period-2 forcing together with its first and second antiderivatives.
///
/// Implementations carry their own phase so that solvers which treat the
/// phase as an unknown can re-instantiate the family at a new phase.
pub trait Forcing: Clone + Send + Sync {
    fn kind(&self) -> ForcingKind {
        ForcingKind::General
    }
    fn phase(&self) -> f64;
    fn with_phase(&self, phi: f64) -> Self;
    fn f(&self, t: f64) -> f64;
    /// Antiderivative of `f`.
    fn f1(&self, t: f64) -> f64;
    /// Antiderivative of `f1`.
    fn f2(&self, t: f64) -> f64;
    fn period(&self) -> f64 {
        FORCING_PERIOD
    }
}

/// `f(t) = cos(πt + φ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CosineForcing {
    pub phi: f64,
}

pub fn cosine_forcing(phi: f64) -> CosineForcing {
    CosineForcing {
        phi: wrap_phase(phi),
    }
}

impl Forcing for CosineForcing {
    fn kind(&self) -> ForcingKind {
        ForcingKind::Cosine
    }

    fn phase(&self) -> f64 {
        self.phi
    }

    fn with_phase(&self, phi: f64) -> Self {
        cosine_forcing(phi)
    }

    #[inline]
    fn f(&self, t: f64) -> f64 {
        (PI * t + self.phi).cos()
    }

    #[inline]
    fn f1(&self, t: f64) -> f64 {
        (PI * t + self.phi).sin() / PI
    }

    #[inline]
    fn f2(&self, t: f64) -> f64 {
        -(PI * t + self.phi).cos() / (PI * PI)
    }
}

/// Identically zero forcing; only gravity acts. Used for limiting cases.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NoForcing {
    pub phi: f64,
}

impl Forcing for NoForcing {
    fn phase(&self) -> f64 {
        self.phi
    }

    fn with_phase(&self, phi: f64) -> Self {
        Self { phi }
    }

    fn f(&self, _t: f64) -> f64 {
        0.0
    }

    fn f1(&self, _t: f64) -> f64 {
        0.0
    }

    fn f2(&self, _t: f64) -> f64 {
        0.0
    }
}

/// Sets up physical parameters for the device used throughout the examples:
/// 124.5 g cylinder at the given incline, forcing strength and frequency.
pub fn reference_device(beta: f64, force_norm: f64, omega: f64) -> PhysicalParams {
    PhysicalParams {
        mass: 0.1245,
        s: 0.3,
        omega,
        force_norm,
        beta,
        g: STANDARD_GRAVITY,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn device(beta: f64, force: f64) -> PhysicalParams {
        reference_device(beta, force, 5.0 * PI)
    }

    #[test]
    fn gravity_term_for_thirty_degrees() {
        let p = device(PI / 6.0, 5.0);
        assert_relative_eq!(p.dimensionless_gravity(), 0.122010, epsilon = 1e-9);
    }

    #[test]
    fn gravity_term_vertical_device() {
        let p = device(PI / 2.0, 61.0);
        assert_relative_eq!(
            p.dimensionless_gravity(),
            0.1245 * 9.8 / 61.0,
            epsilon = 1e-15
        );
        assert_relative_eq!(p.dimensionless_gravity(), 0.0200016, epsilon = 1e-6);
    }

    #[test]
    fn gravity_vanishes_for_horizontal_limit() {
        let p = device(1e-300, 5.0);
        assert!(p.dimensionless_gravity().abs() < 1e-290);
    }

    #[test]
    fn length_formula_and_inverse() {
        let p = PhysicalParams {
            s: 0.27,
            ..device(PI / 6.0, 5.0)
        };
        let d = p.dimensionless_length();
        assert_relative_eq!(d, 0.27 * 0.1245 * 25.0 / 5.0, epsilon = 1e-12);
        assert_relative_eq!(p.length_for(d), 0.27, epsilon = 1e-14);
    }

    #[test]
    fn nondimensionalize_rejects_bad_input() {
        let mut p = device(PI / 6.0, 5.0);
        p.mass = 0.0;
        assert!(p.nondimensionalize(0.5, 0.0).is_err());
        let mut p = device(PI / 6.0, 5.0);
        p.beta = 2.0;
        assert!(p.nondimensionalize(0.5, 0.0).is_err());
        let p = device(PI / 6.0, 5.0);
        assert!(p.nondimensionalize(1.0, 0.0).is_err());
        let sp = p.nondimensionalize(0.5, 7.0).unwrap();
        assert_relative_eq!(sp.phi, 7.0 - TAU, epsilon = 1e-15);
    }

    #[test]
    fn cosine_forcing_at_zero_argument() {
        let phi = 0.7;
        let f = cosine_forcing(phi);
        let t = -phi / PI;
        assert_relative_eq!(f.f(t), 1.0, epsilon = 1e-15);
        assert!(f.f1(t).abs() < 1e-16);
        assert_relative_eq!(f.f2(t), -1.0 / (PI * PI), epsilon = 1e-15);
    }

    #[test]
    fn antiderivatives_match_central_differences() {
        let f = cosine_forcing(1.3);
        let h = 1e-4;
        for i in 0..50 {
            let t = i as f64 * 0.097 - 1.0;
            let d1 = (f.f1(t + h) - f.f1(t - h)) / (2.0 * h);
            let d2 = (f.f2(t + h) - f.f2(t - h)) / (2.0 * h);
            // central difference error is h²/6 |f'''| ≤ π² h² / 6
            assert!((d1 - f.f(t)).abs() < 2e-8);
            assert!((d2 - f.f1(t)).abs() < 2e-8);
        }
    }

    proptest! {
        #[test]
        fn cosine_forcing_bounded_and_periodic(t in -50.0f64..50.0, phi in 0.0f64..TAU) {
            let f = cosine_forcing(phi);
            prop_assert!(f.f(t).abs() <= 1.0);
            prop_assert!((f.f1(t + 2.0) - f.f1(t)).abs() < 1e-12);
            prop_assert!((f.f2(t + 2.0) - f.f2(t)).abs() < 1e-12);
        }

        #[test]
        fn length_invariant_under_joint_scaling(c in 0.1f64..10.0, s in 0.05f64..1.0, force in 1.0f64..80.0) {
            let base = PhysicalParams { s, ..device(PI / 4.0, force) };
            let scaled = PhysicalParams { s: s * c, force_norm: force * c, ..base };
            prop_assert!((base.dimensionless_length() - scaled.dimensionless_length()).abs()
                < 1e-12 * base.dimensionless_length());
        }

        #[test]
        fn gravity_decreases_with_forcing(f_lo in 1.0f64..50.0, extra in 0.01f64..50.0) {
            let lo = device(PI / 3.0, f_lo);
            let hi = device(PI / 3.0, f_lo + extra);
            prop_assert!(hi.dimensionless_gravity() < lo.dimensionless_gravity());
        }
    }
}
