//! Two-spin Heisenberg exchange gates and the antiferromagnetic pulse
//! duration that reproduces a ferromagnetic evolution.
//!
//! The exchange operator `S_1·S_2` has eigenvalue [`EPS_SINGLET`] on the
//! singlet and [`EPS_TRIPLET`] on the three triplets. Because the splitting is
//! `|Δε| = 1`, two-spin exchange evolution returns to the identity (up to a
//! global phase) whenever the accumulated angle grows by `2π`. A ferromagnetic
//! step `exp(+i J̃ t S·S)` is therefore the same operation as the
//! antiferromagnetic pulse `exp(-i J t' S·S)` with `J t' = 2π - J̃ t`.

use nalgebra::Matrix4;
use num_complex::Complex64;
use std::f64::consts::TAU;

use crate::error::{invalid, Error, Result};
use crate::statevec::TwoSiteGate;

/// Singlet eigenvalue of `S_1·S_2`.
pub const EPS_SINGLET: f64 = -0.75;
/// Triplet eigenvalue of `S_1·S_2`.
pub const EPS_TRIPLET: f64 = 0.25;
/// Singlet-triplet splitting `ε_s - ε_t`.
pub const DELTA_EPS: f64 = EPS_SINGLET - EPS_TRIPLET;

/// Relative slack accepted when checking a duration against the wrap period.
const PERIOD_SLACK: f64 = 1e-12;

/// `exp(-iθ S_1·S_2)` in the basis `|00>, |01>, |10>, |11>`.
///
/// Uses `S_1·S_2 = SWAP/2 - 1/4`, so the exponential is
/// `e^{iθ/4} [cos(θ/2) 1 - i sin(θ/2) SWAP]`. The global phase is kept.
pub fn exchange_unitary(theta: f64) -> Result<TwoSiteGate> {
    if !theta.is_finite() {
        return Err(invalid!("exchange angle must be finite, got {theta}"));
    }
    TwoSiteGate::new(exchange_matrix(theta))
}

pub(crate) fn exchange_matrix(theta: f64) -> Matrix4<Complex64> {
    let phase = Complex64::from_polar(1.0, theta / 4.0);
    let diag = phase * (theta / 2.0).cos();
    let off = phase * Complex64::new(0.0, -(theta / 2.0).sin());
    let mut m = Matrix4::zeros();
    m[(0, 0)] = phase * Complex64::from_polar(1.0, -theta / 2.0);
    m[(3, 3)] = m[(0, 0)];
    m[(1, 1)] = diag;
    m[(2, 2)] = diag;
    m[(1, 2)] = off;
    m[(2, 1)] = off;
    m
}

/// The ideal ferromagnetic step `exp(+i j_fm t S_1·S_2)`.
pub fn ferromagnetic_unitary(j_fm: f64, t: f64) -> Result<TwoSiteGate> {
    exchange_unitary(-j_fm * t)
}

/// Duration after which ferromagnetic evolution of strength `j_fm` wraps
/// once: `2π / (j_fm |Δε|)`.
pub fn wrap_period(j_fm: f64) -> f64 {
    TAU / (j_fm * DELTA_EPS.abs())
}

/// Antiferromagnetic pulse duration `t'` that reproduces a ferromagnetic
/// evolution of duration `t`:
///
/// `t' = (j_fm / j_afm) (2π / (j_fm |Δε|) - t)`
///
/// `t` must lie within one wrap period; see [`reduce_to_period`].
pub fn afm_duration_for_fm(t: f64, j_afm: f64, j_fm: f64) -> Result<f64> {
    if !(j_afm > 0.0 && j_afm.is_finite()) || !(j_fm > 0.0 && j_fm.is_finite()) {
        return Err(invalid!(
            "couplings must be positive and finite (j_afm = {j_afm}, j_fm = {j_fm})"
        ));
    }
    let period = wrap_period(j_fm);
    if t.is_nan() || t < 0.0 || t > period * (1.0 + PERIOD_SLACK) {
        return Err(Error::OutOfRange(format!(
            "duration {t} outside one wrap period [0, {period}]"
        )));
    }
    Ok(((j_fm / j_afm) * (period - t)).max(0.0))
}

/// Splits `t ≥ 0` into `(t mod period, number of whole periods)`. The
/// discarded periods only contribute a global phase.
pub fn reduce_to_period(t: f64, j_fm: f64) -> Result<(f64, u64)> {
    if !t.is_finite() || t < 0.0 {
        return Err(invalid!("duration must be finite and nonnegative, got {t}"));
    }
    if !(j_fm > 0.0 && j_fm.is_finite()) {
        return Err(invalid!("coupling must be positive, got {j_fm}"));
    }
    let period = wrap_period(j_fm);
    let wraps = (t / period).floor();
    let rest = t - wraps * period;
    Ok((rest.clamp(0.0, period), wraps as u64))
}

/// Phase `φ = b τ` consumed by [`StateVector::apply_single_site_phase`]
/// to realize `exp(-i b τ σ^z)`.
///
/// [`StateVector::apply_single_site_phase`]: crate::statevec::StateVector::apply_single_site_phase
pub fn field_phase(b: f64, tau: f64) -> f64 {
    b * tau
}
