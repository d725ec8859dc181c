//! Closed-form frequency-domain model of the twin-beam source.
//!
//! The nondegenerate parametric amplifier below threshold emits a pair of
//! beams whose joint quadratures are squeezed in the difference/sum
//! combinations and antisqueezed in the orthogonal ones. At normalized
//! analysis frequency ω = 2Ω/Γ (Γ the full cavity linewidth) and pump
//! amplitude σ relative to threshold, the per-beam-normalized spectra are
//!
//! ```text
//! s∓(σ, ω) = 1 ∓ 4σ / ((1 ± σ)² + ω²)
//! ```
//!
//! so s₋·s₊ = 1 identically: the lossless source stays minimum-uncertainty
//! at every frequency. Near threshold (1 − σ ≪ ω ≪ 1) the antisqueezing
//! diverges as 4/ω² while s₋ → 0, which is where the single-beam noise gain
//! G_q becomes huge and the dual-channel difference floor V₋ collapses —
//! the working regime of the whole communication scheme.
//!
//! Detection folds in the channel efficiency ξ (beams) and the message path
//! efficiency η (displacements) separately; a common-mode excess noise N_c,
//! perfectly correlated between the beams, inflates each beam's measured
//! noise without touching the difference current. This module is the
//! analytic oracle that the Monte-Carlo pipeline is checked against.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Source and channel parameters, shared by every scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NopaParams {
    /// Pump amplitude relative to threshold, in [0, 1).
    pub sigma: f64,
    /// Normalized analysis frequency ω = 2Ω/Γ, nonnegative.
    pub omega: f64,
    /// Overall channel efficiency ξ for the twin beams, in (0, 1].
    pub xi: f64,
    /// Propagation/detection efficiency η for the message, in (0, 1].
    pub eta: f64,
    /// Mirror power transmissivity |t|², in (0, 1).
    pub t2: f64,
    /// Common-mode excess noise N_c, fully correlated between the beams.
    pub n_common: f64,
}

impl Default for NopaParams {
    fn default() -> Self {
        NopaParams {
            sigma: 0.0,
            omega: 0.0,
            xi: 1.0,
            eta: 1.0,
            t2: 0.01,
            n_common: 0.0,
        }
    }
}

impl NopaParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "pump amplitude sigma = {} must be finite and nonnegative",
                self.sigma
            )));
        }
        if self.sigma >= 1.0 {
            return Err(Error::InvalidArgument(format!(
                "sigma = {} is at or above threshold; the below-threshold model stops there",
                self.sigma
            )));
        }
        if !(self.omega >= 0.0 && self.omega.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "analysis frequency omega = {} must be finite and nonnegative",
                self.omega
            )));
        }
        for (name, v) in [("xi", self.xi), ("eta", self.eta)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} = {v} outside (0, 1]"
                )));
            }
        }
        if !(self.t2 > 0.0 && self.t2 < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "mirror transmissivity t2 = {} outside (0, 1)",
                self.t2
            )));
        }
        if !(self.n_common >= 0.0 && self.n_common.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "common excess noise n_common = {} must be finite and nonnegative",
                self.n_common
            )));
        }
        Ok(())
    }
}

/// Spectral quantities at one analysis frequency.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SpectraSet {
    /// Squeezed spectrum s₋ (lossless, per beam pair combination).
    pub s_minus: f64,
    /// Antisqueezed spectrum s₊.
    pub s_plus: f64,
    /// Single-beam quantum noise gain G_q = (s₊ + s₋)/2 + N_c, lossless.
    pub g_q: f64,
    /// Detected noise gain ξ·G_q + (1 − ξ).
    pub g_q_d: f64,
    /// Difference-current variance V₋ = 2·s₋ (vacuum level 2), lossless.
    pub v_minus: f64,
    /// Detected difference variance ξ·V₋ + 2(1 − ξ).
    pub v_minus_d: f64,
    /// Variance U₋ʳ of the field reflected back from the coupling mirror:
    /// |r|² of the unit-variance message plus |t|² of the squeezed
    /// projection leaking out.
    pub u_r: f64,
}

/// Evaluate the closed-form spectra at the params' analysis frequency.
pub fn spectra(params: &NopaParams) -> Result<SpectraSet> {
    params.validate()?;
    let (sigma, omega) = (params.sigma, params.omega);
    let w2 = omega * omega;
    // s∓ = 1 ∓ 4σ/((1±σ)² + ω²), written as a single ratio: the subtraction
    // cancels catastrophically near threshold where s₋ ~ (1−σ)²/4
    let lo = (1.0 - sigma).powi(2) + w2;
    let hi = (1.0 + sigma).powi(2) + w2;
    let s_minus = lo / hi;
    let s_plus = hi / lo;
    let g_q = 0.5 * (s_plus + s_minus) + params.n_common;
    let v_minus = 2.0 * s_minus;
    let xi = params.xi;
    Ok(SpectraSet {
        s_minus,
        s_plus,
        g_q,
        g_q_d: xi * g_q + (1.0 - xi),
        v_minus,
        v_minus_d: xi * v_minus + 2.0 * (1.0 - xi),
        u_r: (1.0 - params.t2) + params.t2 * s_minus,
    })
}

/// SNR one of the beams alone offers an eavesdropper listening against the
/// single-beam noise gain: R_j = ξ·ε²/(2·G_q).
pub fn channel_snr(params: &NopaParams, epsilon: f64) -> Result<f64> {
    require_amplitude(epsilon)?;
    let sp = spectra(params)?;
    Ok(params.xi * epsilon * epsilon / (2.0 * sp.g_q))
}

/// SNR of the legitimate difference-current receiver: R_d = 2ηε²/V₋ᵈ.
pub fn receiver_snr(params: &NopaParams, epsilon: f64) -> Result<f64> {
    require_amplitude(epsilon)?;
    let sp = spectra(params)?;
    Ok(2.0 * params.eta * epsilon * epsilon / (sp.v_minus_d))
}

/// Full SNR budget for one parameter point.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SnrReport {
    /// SNR of the original message before the mirror, R₀ = ε²/|t|².
    pub r0: f64,
    /// Per-channel SNR available in beam A or B alone.
    pub r_ab: f64,
    /// Difference-current receiver SNR.
    pub r_d: f64,
    /// SNR recoverable from the field reflected at the mirror.
    pub r_r: f64,
    /// Signal transfer coefficient T_d = |r|²/U₋ʳ + 2η|t|²/V₋ᵈ,
    /// bounded by 1 for any classical (σ = 0) source and reaching 2 in the
    /// ideal quantum limit.
    pub t_d: f64,
    pub epsilon: f64,
}

/// Evaluate R₀, R_AB, R_d, R_r and the transfer coefficient T_d.
pub fn transfer_coefficients(params: &NopaParams, epsilon: f64) -> Result<SnrReport> {
    require_amplitude(epsilon)?;
    let sp = spectra(params)?;
    let e2 = epsilon * epsilon;
    let r2 = 1.0 - params.t2;
    let r0 = e2 / params.t2;
    Ok(SnrReport {
        r0,
        r_ab: channel_snr(params, epsilon)?,
        r_d: receiver_snr(params, epsilon)?,
        r_r: r0 * r2 / sp.u_r,
        t_d: r2 / sp.u_r + 2.0 * params.eta * params.t2 / sp.v_minus_d,
        epsilon,
    })
}

fn require_amplitude(epsilon: f64) -> Result<()> {
    if epsilon < 0.0 || !epsilon.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "message amplitude epsilon = {epsilon} must be finite and nonnegative"
        )));
    }
    Ok(())
}

/// Power ratio in decibels.
pub fn db(x: f64) -> Result<f64> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "db({x}) undefined: needs a positive finite power ratio"
        )));
    }
    Ok(10.0 * x.log10())
}

/// Inverse of [`db`].
pub fn undb(d: f64) -> f64 {
    10f64.powf(d / 10.0)
}
