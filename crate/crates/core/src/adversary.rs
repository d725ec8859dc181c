//! Eavesdropping strategies and the disturbance they leave behind.
//!
//! Eve works on the freshly encoded beams before they enter the lossy
//! channels, so her view of the message carries the same √(η/ξ) amplitude
//! pre-scale the encoder applied. Three strategies are modeled:
//!
//! * `tap`: split a fraction ρ off both beams with beamsplitters. The
//!   vacuum entering the open ports raises Bob's difference floor by
//!   ξρ(2 − V₋), so on twin beams (V₋ < 2) any tap strong enough to give
//!   Eve a usable SNR is visible in Bob's noise floor.
//! * `intercept_resend`: Eve detects both channels completely and
//!   retransmits coherent beams displaced to her outcomes. Bob's ensemble
//!   then carries her outcome statistics plus one unit of re-preparation
//!   vacuum per quadrature, which pins his arriving floor at V₋ + 2 or
//!   above; it can never reach a sub-vacuum value again.
//! * `qnd`: a back-action probe of one quadrature with readout noise m,
//!   at the minimum-product limit: the record picks up +m variance while
//!   the conjugate quadrature gains 1/m. The matched floor stays clean
//!   and the intrusion shows only in the orthogonal monitor.
//!
//! Bob's ensemble state after an intercept-resend is the average over
//! Eve's outcomes. Records Eve keeps are drawn from her exact outcome
//! distribution but are not sample-coupled to Bob's later photocurrents;
//! no quantity computed here conditions one party's samples on the
//! other's, so the marginals are the full story.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{draw_normal, make_vacuum, x_index, y_index, GaussianState};
use crate::nopa::{spectra, NopaParams, SpectraSet};
use crate::protocol::SpectralEstimate;

/// How Eve detects in an intercept-resend attack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResendPolicy {
    /// Homodyne each channel at fixed guessed phases.
    Fixed { delta_a: f64, delta_b: f64 },
    /// Coin-flip per call between the two reference LO pairs the
    /// receiver itself alternates over, (0, 0) and (π/2, 3π/2).
    RandomBasis,
    /// Measure both quadratures of each channel at once, paying one
    /// unit of vacuum noise per record.
    Heterodyne,
}

/// Eavesdropper configuration for a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum EveStrategy {
    None,
    Tap { rho: f64 },
    InterceptResend { policy: ResendPolicy },
    Qnd { m: f64 },
}

impl Default for EveStrategy {
    fn default() -> Self {
        EveStrategy::None
    }
}

impl EveStrategy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            EveStrategy::None | EveStrategy::InterceptResend { .. } => Ok(()),
            EveStrategy::Tap { rho } => {
                if (0.0..=1.0).contains(&rho) {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument(format!(
                        "tap fraction {rho} must lie in [0, 1]"
                    )))
                }
            }
            EveStrategy::Qnd { m } => {
                if m > 0.0 && m.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument(format!(
                        "readout noise {m} must be positive and finite"
                    )))
                }
            }
        }
    }
}

/// Eve's measurement record from one intercept-resend call: homodyne
/// currents per channel and their difference; the heterodyne policy also
/// keeps the orthogonal-quadrature records.
#[derive(Debug, Clone)]
pub struct EveRecord {
    pub phases: (f64, f64),
    pub i_a: Vec<f64>,
    pub i_b: Vec<f64>,
    pub i_minus: Vec<f64>,
    pub orth_a: Option<Vec<f64>>,
    pub orth_b: Option<Vec<f64>>,
}

/// Split a fraction ρ off both channels into Eve's modes. Returns the
/// reduced states (Bob's kept pair, Eve's tapped pair); each party's own
/// measurement statistics are exactly these marginals.
pub fn apply_tap(state: &GaussianState, rho: f64) -> Result<(GaussianState, GaussianState)> {
    if state.n_modes() != 2 {
        return Err(Error::InvalidArgument(
            "apply_tap expects the two-channel state".into(),
        ));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidArgument(format!(
            "tap fraction {rho} must lie in [0, 1]"
        )));
    }
    let joint = state
        .tensor(&make_vacuum(2)?)
        .beamsplitter(2, 0, 1.0 - rho, 0.0)?
        .beamsplitter(3, 1, 1.0 - rho, 0.0)?;
    Ok((joint.marginal(&[0, 1])?, joint.marginal(&[2, 3])?))
}

/// Eve's message SNR from a tap of fraction ρ taken before the channels:
/// 2ε²(η/ξ)ρ over her difference floor ρV₋ + 2(1−ρ).
pub fn eve_tap_snr(params: &NopaParams, epsilon: f64, rho: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidArgument(format!(
            "tap fraction {rho} must lie in [0, 1]"
        )));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "message amplitude {epsilon} must be finite and nonnegative"
        )));
    }
    let sp = spectra(params)?;
    let num = 2.0 * epsilon * epsilon * (params.eta / params.xi) * rho;
    Ok(num / (rho * sp.v_minus + 2.0 * (1.0 - rho)))
}

/// Bob's detected difference floor when a tap of fraction ρ sits between
/// the mirror and his channels: ξ(1−ρ)V₋ + 2(1 − ξ(1−ρ)); at ρ = 0 this
/// is the undisturbed v_minus_d.
pub fn tapped_bob_floor(params: &NopaParams, rho: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidArgument(format!(
            "tap fraction {rho} must lie in [0, 1]"
        )));
    }
    let sp = spectra(params)?;
    let kept = params.xi * (1.0 - rho);
    Ok(kept * sp.v_minus + 2.0 * (1.0 - kept))
}

/// Solution of the tap trade-off: the smallest fraction giving Eve the
/// target SNR, with the floor penalty Bob sees for it.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TapSolution {
    pub rho: f64,
    pub eve_snr: f64,
    pub bob_floor: f64,
    pub undisturbed_floor: f64,
}

/// Smallest ρ with eve_tap_snr ≥ snr_target, bisected to 1e-6. Errors
/// with `Infeasible` when even a full tap falls short of the target.
pub fn eve_min_rho(params: &NopaParams, epsilon: f64, snr_target: f64) -> Result<TapSolution> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "message amplitude {epsilon} must be positive and finite"
        )));
    }
    if !(snr_target >= 1.0 && snr_target.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "SNR target {snr_target} must be at least 1"
        )));
    }
    let full = eve_tap_snr(params, epsilon, 1.0)?;
    if full < snr_target {
        return Err(Error::Infeasible(format!(
            "full interception reaches SNR {full:.4}, below the target {snr_target}"
        )));
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if eve_tap_snr(params, epsilon, mid)? >= snr_target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(TapSolution {
        rho: hi,
        eve_snr: eve_tap_snr(params, epsilon, hi)?,
        bob_floor: tapped_bob_floor(params, hi)?,
        undisturbed_floor: tapped_bob_floor(params, 0.0)?,
    })
}

/// Eve detects both channels completely and retransmits coherent beams
/// displaced to her outcomes. Returns Bob's ensemble state (averaged over
/// Eve's outcomes) and Eve's sampled record of `n_samples` shots.
///
/// Homodyne policies preserve the measured quadratures' full joint
/// statistics (means, variances and the cross-channel correlation) plus
/// one re-preparation vacuum unit each, and reset the unmeasured
/// quadratures to mean-zero vacuum. Heterodyne keeps every mean and pays
/// the extra unit in all four quadratures.
pub fn intercept_resend(
    state: &GaussianState,
    policy: ResendPolicy,
    n_samples: usize,
    seed: u64,
) -> Result<(GaussianState, EveRecord)> {
    if state.n_modes() != 2 {
        return Err(Error::InvalidArgument(
            "intercept_resend expects the two-channel state".into(),
        ));
    }
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be positive".into()));
    }
    match policy {
        ResendPolicy::Fixed { delta_a, delta_b } => {
            resend_homodyne(state, delta_a, delta_b, n_samples, seed)
        }
        ResendPolicy::RandomBasis => {
            let mut coin = ChaCha12Rng::seed_from_u64(seed);
            let (da, db) = if coin.random::<bool>() {
                (std::f64::consts::FRAC_PI_2, 1.5 * std::f64::consts::PI)
            } else {
                (0.0, 0.0)
            };
            // outcomes draw from a decoupled stream so the coin does not
            // bias the first shot
            resend_homodyne(state, da, db, n_samples, seed ^ 0xD1B5_4A32_D192_ED03)
        }
        ResendPolicy::Heterodyne => resend_heterodyne(state, n_samples, seed),
    }
}

fn resend_homodyne(
    state: &GaussianState,
    delta_a: f64,
    delta_b: f64,
    n_samples: usize,
    seed: u64,
) -> Result<(GaussianState, EveRecord)> {
    let rotated = state.phase_rotate(0, delta_a)?.phase_rotate(1, delta_b)?;
    let (c, m) = (rotated.cov(), rotated.mean());
    let out_mean = DVector::from_column_slice(&[m[0], m[2]]);
    let out_cov = DMatrix::from_fn(2, 2, |r, k| c[(2 * r, 2 * k)]);
    let outcomes = draw_normal(&out_mean, &out_cov, n_samples, seed)?;

    let mut bob_mean = DVector::zeros(4);
    bob_mean[x_index(0)] = out_mean[0];
    bob_mean[x_index(1)] = out_mean[1];
    let mut bob_cov = DMatrix::identity(4, 4);
    for r in 0..2 {
        for k in 0..2 {
            bob_cov[(x_index(r), x_index(k))] += out_cov[(r, k)];
        }
    }
    let bob = GaussianState::from_parts(bob_mean, bob_cov)?
        .phase_rotate(0, -delta_a)?
        .phase_rotate(1, -delta_b)?;

    let i_a: Vec<f64> = outcomes.column(0).iter().copied().collect();
    let i_b: Vec<f64> = outcomes.column(1).iter().copied().collect();
    let i_minus = i_a.iter().zip(&i_b).map(|(a, b)| a - b).collect();
    Ok((
        bob,
        EveRecord {
            phases: (delta_a, delta_b),
            i_a,
            i_b,
            i_minus,
            orth_a: None,
            orth_b: None,
        },
    ))
}

fn resend_heterodyne(
    state: &GaussianState,
    n_samples: usize,
    seed: u64,
) -> Result<(GaussianState, EveRecord)> {
    let record_cov = state.cov() + DMatrix::identity(4, 4);
    let outcomes = draw_normal(state.mean(), &record_cov, n_samples, seed)?;
    let bob = GaussianState::from_parts(
        state.mean().clone(),
        state.cov() + DMatrix::identity(4, 4) * 2.0,
    )?;
    let pick = |j: usize| outcomes.column(j).iter().copied().collect::<Vec<f64>>();
    let (i_a, i_b) = (pick(x_index(0)), pick(x_index(1)));
    let i_minus = i_a.iter().zip(&i_b).map(|(a, b)| a - b).collect();
    Ok((
        bob,
        EveRecord {
            phases: (0.0, 0.0),
            i_a,
            i_b,
            i_minus,
            orth_a: Some(pick(y_index(0))),
            orth_b: Some(pick(y_index(1))),
        },
    ))
}

/// Eve's SNR when she intercepts both beams completely and homodynes the
/// message quadratures: 2ε²(η/ξ) over the bare difference floor V₋.
pub fn intercept_matched_snr(params: &NopaParams, epsilon: f64) -> Result<f64> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "message amplitude {epsilon} must be finite and nonnegative"
        )));
    }
    let sp = spectra(params)?;
    Ok(2.0 * epsilon * epsilon * (params.eta / params.xi) / sp.v_minus)
}

/// Eve's SNR under the heterodyne policy: half the matched homodyne
/// value, the 3 dB price of reading both quadratures at once.
pub fn intercept_heterodyne_snr(params: &NopaParams, epsilon: f64) -> Result<f64> {
    Ok(intercept_matched_snr(params, epsilon)? / 2.0)
}

/// Back-action probe of X of one mode at readout noise m: Eve's record
/// variance is Var(X) + m, the state keeps its X statistics and picks up
/// 1/m in Y. Returns the probed state and the record variance.
pub fn qnd_probe(state: &GaussianState, mode: usize, m: f64) -> Result<(GaussianState, f64)> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "readout noise {m} must be positive and finite"
        )));
    }
    if mode >= state.n_modes() {
        return Err(Error::InvalidArgument(format!(
            "mode {mode} out of range for {}-mode state",
            state.n_modes()
        )));
    }
    let record_var = state.cov()[(x_index(mode), x_index(mode))] + m;
    let mut cov = state.cov().clone();
    cov[(y_index(mode), y_index(mode))] += 1.0 / m;
    let after = GaussianState::from_parts(state.mean().clone(), cov)?;
    Ok((after, record_var))
}

/// Eve's per-channel message SNR from a QND record at readout noise m:
/// (η/ξ)ε²/2 over G_q + m.
pub fn qnd_record_snr(params: &NopaParams, epsilon: f64, m: f64) -> Result<f64> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "readout noise {m} must be positive and finite"
        )));
    }
    let sp = spectra(params)?;
    Ok((params.eta / params.xi) * epsilon * epsilon / 2.0 / (sp.g_q + m))
}

/// Outcome of Bob's noise-floor audit against the analytic expectations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DisturbanceReport {
    /// Measured matched-quadrature difference floor.
    pub bob_floor: f64,
    /// Measured orthogonal-combination floor, when monitored.
    pub bob_orth_floor: Option<f64>,
    /// Eve's SNR for the strategy under test, as bookkept by the runner;
    /// zero when no eavesdropper was simulated.
    pub eve_snr: f64,
    /// Analytic undisturbed floor both monitors are held against.
    pub baseline_floor: f64,
    pub floor_excess: bool,
    pub orth_excess: bool,
    /// Set when no orthogonal-quadrature estimate was supplied.
    pub orth_unchecked: bool,
    pub threshold_sigmas: f64,
}

/// Compare measured floors with the undisturbed expectation and flag
/// excesses beyond `threshold_sigmas` times the sampling error of a
/// variance estimate from `n_off` off-frame samples. Both quiet
/// combinations (difference of matched quadratures, sum of orthogonal
/// ones) share the baseline v_minus_d.
pub fn audit(
    matched: &SpectralEstimate,
    orth: Option<&SpectralEstimate>,
    expected: &SpectraSet,
    n_off: usize,
    threshold_sigmas: f64,
    eve_snr: f64,
) -> Result<DisturbanceReport> {
    if n_off < 2 {
        return Err(Error::InvalidArgument(
            "audit needs at least two off-frame samples".into(),
        ));
    }
    if !(threshold_sigmas > 0.0 && threshold_sigmas.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "threshold {threshold_sigmas} must be positive and finite"
        )));
    }
    let baseline = expected.v_minus_d;
    let sigma_stat = baseline * (2.0 / n_off as f64).sqrt();
    let limit = baseline + threshold_sigmas * sigma_stat;
    Ok(DisturbanceReport {
        bob_floor: matched.phi_minus,
        bob_orth_floor: orth.map(|e| e.phi_minus),
        eve_snr,
        baseline_floor: baseline,
        floor_excess: matched.phi_minus > limit,
        orth_excess: orth.map(|e| e.phi_minus > limit).unwrap_or(false),
        orth_unchecked: orth.is_none(),
        threshold_sigmas,
    })
}
