//! Random-phase-switching key distribution over the twin beams.
//!
//! The source state never changes; a basis is a bookkeeping choice of
//! which quadrature pair carries the round. Alice draws a basis and a bit,
//! encodes amplitude a₀ or a₁ along the basis's message phases, and Bob
//! independently draws one of the two LO pairs. Both quiet combinations
//! exist in the state at once, so matched frames read the message against
//! the squeezed floor while mismatched frames read the orthogonal quiet
//! combination, where the message mean is zero and nothing leaks.
//! Publishing the basis lists afterwards lets them keep the matched half.
//!
//! Basis phases follow one fixed pattern: the π/2 basis shifts channel A
//! by +π/2 and channel B by +3π/2, for quadrature labels, message phases
//! and LO pairs alike. With the reference message phases (0, π) this puts
//! the π/2-basis displacement on +Y of both channels, which is what the
//! (Y_A, −Y_B) detection pair adds up constructively.
//!
//! Each frame produces a single difference-current reading of the sideband
//! and the bit decision thresholds that one number, so the error rate is
//! the plain Gaussian tail against the full detected floor. Noise floors
//! are pooled within bit classes across frames: the sifted half monitors
//! the matched combination, the discarded half doubles as the
//! orthogonal-quadrature monitor. Per frame, a seeded generator is drawn
//! in a fixed order (Alice basis, Alice bit, Bob basis, Eve stream seed,
//! detection seed), so sessions are reproducible bit for bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::adversary::{
    apply_tap, audit, eve_tap_snr, intercept_heterodyne_snr, intercept_matched_snr,
    intercept_resend, qnd_probe, qnd_record_snr, DisturbanceReport, EveStrategy, ResendPolicy,
};
use crate::error::{Error, Result};
use crate::gaussian::GaussianState;
use crate::nopa::{spectra, NopaParams};
use crate::protocol::{
    build_source, detect, encode_at_mirror, frame_seed, transmit, MessageConfig, SourceMode,
    SpectralEstimate,
};

const HALF_PI: f64 = std::f64::consts::FRAC_PI_2;
const TAU: f64 = std::f64::consts::TAU;

/// The two quadrature designations the parties switch between.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// Message on the X quadratures, read as X_A − X_B.
    Zero,
    /// Message on the Y quadratures, read as Y_A + Y_B.
    QuarterTurn,
}

impl Basis {
    /// Quadrature-phase labels (θ_A, θ_B); they sum to 0 mod 2π in both
    /// bases, so the designated combination is always the squeezed one.
    pub fn quadrature_phases(self) -> (f64, f64) {
        match self {
            Basis::Zero => (0.0, 0.0),
            Basis::QuarterTurn => (HALF_PI, 1.5 * std::f64::consts::PI),
        }
    }

    /// Message phases (β_A, β_B): the reference pair (0, π) shifted by
    /// (+π/2, +3π/2) in the π/2 basis.
    pub fn message_phases(self) -> (f64, f64) {
        match self {
            Basis::Zero => (0.0, std::f64::consts::PI),
            Basis::QuarterTurn => (
                HALF_PI,
                (std::f64::consts::PI + 1.5 * std::f64::consts::PI).rem_euclid(TAU),
            ),
        }
    }

    /// Bob's LO pair; matches `quadrature_phases` so that a matched frame
    /// detects the designated combination.
    pub fn lo_phases(self) -> (f64, f64) {
        self.quadrature_phases()
    }
}

/// One protocol round as both parties see it after the public discussion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Frame {
    pub alice_basis: Basis,
    pub alice_bit: bool,
    pub bob_basis: Basis,
    /// Bob's difference-current reading for the frame.
    pub outcome_mean: f64,
    /// Exactly `alice_basis == bob_basis`.
    pub kept: bool,
}

/// Aggregate statistics of one session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SessionReport {
    pub n_frames: usize,
    pub sift_fraction: f64,
    /// Bit error rate over sifted frames.
    pub ber: f64,
    /// Pooled within-bit-class variance of Bob's readings over sifted
    /// frames; NaN when the session kept too little to estimate.
    pub measured_floor: f64,
    /// Same over discarded frames, the built-in orthogonal monitor.
    pub orth_floor: f64,
    pub eve_flags: DisturbanceReport,
}

/// Alice's per-frame draw: a uniform basis plus its quadrature and
/// message phases.
pub fn alice_choose<R: Rng + ?Sized>(rng: &mut R) -> (Basis, (f64, f64), (f64, f64)) {
    let basis = if rng.random::<bool>() {
        Basis::QuarterTurn
    } else {
        Basis::Zero
    };
    (basis, basis.quadrature_phases(), basis.message_phases())
}

/// Bob's per-frame draw: a uniform basis and the LO pair that reads it.
pub fn bob_choose<R: Rng + ?Sized>(rng: &mut R) -> (Basis, (f64, f64)) {
    let basis = if rng.random::<bool>() {
        Basis::QuarterTurn
    } else {
        Basis::Zero
    };
    (basis, basis.lo_phases())
}

/// Expected bit error rate of the midpoint detector on matched frames
/// with no eavesdropper: the Gaussian tail beyond half the detected mean
/// separation √2·√η·(a₁−a₀) against the floor v_minus_d.
pub fn expected_ber(params: &NopaParams, a0: f64, a1: f64) -> Result<f64> {
    check_alphabet(a0, a1)?;
    let sp = spectra(params)?;
    let separation = 2f64.sqrt() * params.eta.sqrt() * (a1 - a0);
    let z = separation / 2.0 / sp.v_minus_d.sqrt();
    let normal = Normal::standard();
    Ok(normal.cdf(-z))
}

fn check_alphabet(a0: f64, a1: f64) -> Result<()> {
    if !(a0 >= 0.0 && a1 > a0 && a1.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "alphabet needs a1 > a0 >= 0, got ({a0}, {a1})"
        )));
    }
    Ok(())
}

struct EveOutcome {
    state: GaussianState,
}

fn eve_intervene(state: &GaussianState, eve: &EveStrategy, seed: u64) -> Result<EveOutcome> {
    let state = match *eve {
        EveStrategy::None => state.clone(),
        EveStrategy::Tap { rho } => apply_tap(state, rho)?.0,
        EveStrategy::InterceptResend { policy } => intercept_resend(state, policy, 1, seed)?.0,
        EveStrategy::Qnd { m } => {
            // Eve guesses the X pair and probes both channels
            let (s, _) = qnd_probe(state, 0, m)?;
            qnd_probe(&s, 1, m)?.0
        }
    };
    Ok(EveOutcome { state })
}

/// Eve's analytic message SNR on the symbol separation, for the report's
/// bookkeeping; the audit flags are what Bob actually acts on.
fn eve_bookkept_snr(params: &NopaParams, eve: &EveStrategy, a0: f64, a1: f64) -> Result<f64> {
    let sep = a1 - a0;
    match *eve {
        EveStrategy::None => Ok(0.0),
        EveStrategy::Tap { rho } => eve_tap_snr(params, sep, rho),
        EveStrategy::InterceptResend {
            policy: ResendPolicy::Heterodyne,
        } => intercept_heterodyne_snr(params, sep),
        // fixed or coin-flipped homodyne: her matched-frame value
        EveStrategy::InterceptResend { .. } => intercept_matched_snr(params, sep),
        EveStrategy::Qnd { m } => qnd_record_snr(params, sep, m),
    }
}

/// Pooled within-class variance: classes are the two bit values, so the
/// message separation does not masquerade as noise. Returns the pooled
/// variance (NaN when no class has two members) and the total dof.
fn pooled_by_bit(entries: &[(bool, f64)]) -> (f64, usize) {
    let mut acc = 0.0;
    let mut dof = 0usize;
    for bit in [false, true] {
        let xs: Vec<f64> = entries
            .iter()
            .filter(|(b, _)| *b == bit)
            .map(|(_, x)| *x)
            .collect();
        if xs.len() >= 2 {
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            acc += xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>();
            dof += xs.len() - 1;
        }
    }
    if dof == 0 {
        (f64::NAN, 0)
    } else {
        (acc / dof as f64, dof)
    }
}

/// Run a full session and also return the per-frame log.
///
/// Chain per frame: Alice's choices → encode → optional Eve → channel
/// losses → Bob's LO choice → one detection shot → midpoint threshold.
/// Sifting keeps matched-basis frames; the discarded half doubles as the
/// orthogonal-quadrature monitor fed to the audit.
pub fn run_session_frames(
    params: &NopaParams,
    alphabet: (f64, f64),
    n_frames: usize,
    eve: &EveStrategy,
    seed: u64,
) -> Result<(SessionReport, Vec<Frame>)> {
    params.validate()?;
    eve.validate()?;
    let (a0, a1) = alphabet;
    check_alphabet(a0, a1)?;
    if n_frames == 0 {
        return Err(Error::InvalidArgument("n_frames must be positive".into()));
    }

    let source = build_source(params, SourceMode::Quantum)?;
    let sp = spectra(params)?;
    // detected symbol means Bob designs his threshold around, assuming an
    // undisturbed channel
    let mean_of = |a: f64| 2f64.sqrt() * params.eta.sqrt() * a;
    let threshold = 0.5 * (mean_of(a0) + mean_of(a1));

    let mut frames = Vec::with_capacity(n_frames);
    let mut kept_minus: Vec<(bool, f64)> = Vec::new();
    let mut kept_a: Vec<(bool, f64)> = Vec::new();
    let mut kept_b: Vec<(bool, f64)> = Vec::new();
    let mut disc_minus: Vec<(bool, f64)> = Vec::new();
    let mut disc_a: Vec<(bool, f64)> = Vec::new();
    let mut disc_b: Vec<(bool, f64)> = Vec::new();
    let mut errors = 0usize;

    for f in 0..n_frames {
        let mut rng = ChaCha12Rng::seed_from_u64(frame_seed(seed, f));
        let (alice_basis, _theta, beta) = alice_choose(&mut rng);
        let alice_bit: bool = rng.random();
        let (bob_basis, lo) = bob_choose(&mut rng);
        let eve_seed: u64 = rng.random();
        let detect_seed: u64 = rng.random();

        let amp = if alice_bit { a1 } else { a0 };
        let msg = MessageConfig {
            epsilon: amp,
            beta_a: beta.0,
            beta_b: beta.1,
            frame_pattern: vec![true],
            frames: 1,
            samples_per_frame: 1,
            ..MessageConfig::default()
        };
        let encoded = encode_at_mirror(&source, params, &msg, true)?;
        let intervened = eve_intervene(&encoded, eve, eve_seed)?;
        let sent = transmit(&intervened.state, params.xi, params.xi)?;
        let rec = detect(&sent, lo, 1, detect_seed)?;
        let outcome = rec.i_minus[0];

        let kept = alice_basis == bob_basis;
        if kept {
            kept_minus.push((alice_bit, outcome));
            kept_a.push((alice_bit, rec.i_a[0]));
            kept_b.push((alice_bit, rec.i_b[0]));
            if (outcome > threshold) != alice_bit {
                errors += 1;
            }
        } else {
            disc_minus.push((alice_bit, outcome));
            disc_a.push((alice_bit, rec.i_a[0]));
            disc_b.push((alice_bit, rec.i_b[0]));
        }
        frames.push(Frame {
            alice_basis,
            alice_bit,
            bob_basis,
            outcome_mean: outcome,
            kept,
        });
    }

    let (measured_floor, kept_dof) = pooled_by_bit(&kept_minus);
    let (orth_floor, _) = pooled_by_bit(&disc_minus);
    let matched_est = SpectralEstimate {
        psi_a: pooled_by_bit(&kept_a).0,
        psi_b: pooled_by_bit(&kept_b).0,
        phi_minus: measured_floor,
        psi_0a: 1.0,
        phi_0minus: 2.0,
        snr_measured: None,
    };
    let orth_est = (!disc_minus.is_empty()).then(|| SpectralEstimate {
        psi_a: pooled_by_bit(&disc_a).0,
        psi_b: pooled_by_bit(&disc_b).0,
        phi_minus: orth_floor,
        psi_0a: 1.0,
        phi_0minus: 2.0,
        snr_measured: None,
    });
    let eve_flags = audit(
        &matched_est,
        orth_est.as_ref(),
        &sp,
        kept_dof.max(2),
        3.0,
        eve_bookkept_snr(params, eve, a0, a1)?,
    )?;

    let kept_n = kept_minus.len();
    let report = SessionReport {
        n_frames,
        sift_fraction: kept_n as f64 / n_frames as f64,
        ber: if kept_n == 0 {
            0.0
        } else {
            errors as f64 / kept_n as f64
        },
        measured_floor,
        orth_floor,
        eve_flags,
    };
    Ok((report, frames))
}

/// Run a session and keep only the aggregate report.
pub fn run_session(
    params: &NopaParams,
    alphabet: (f64, f64),
    n_frames: usize,
    eve: &EveStrategy,
    seed: u64,
) -> Result<SessionReport> {
    run_session_frames(params, alphabet, n_frames, eve, seed).map(|(report, _)| report)
}
