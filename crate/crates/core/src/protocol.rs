//! End-to-end communication pipeline.
//!
//! One run walks the signal chain of the bench experiment: build the
//! two-beam source state at the chosen analysis frequency, superimpose the
//! coherent message on both beams at the coupling mirror, propagate each
//! beam through its lossy channel, detect with two balanced homodynes, and
//! form the difference current i₋ = i_A − i_B sample by sample. Spectral
//! densities and the message SNR are then estimated from the on/off frame
//! structure, the way a spectrum analyzer trace with a chopped signal is
//! read out.
//!
//! Conventions fixed here:
//! * The message couples to the *difference* quadrature: for the reference
//!   phases (β_A, β_B) = (0, π) the displacement is +ε/√2 on X_A and −ε/√2
//!   on X_B, so i₋ carries mean amplitude ε√2 while a common-mode message
//!   would cancel. Other β values rotate that displacement per channel.
//! * The beams see the channel efficiency ξ; the message path (mirror to
//!   photocurrent) has its own efficiency η. Both ride the same modes, so
//!   the encoder pre-scales the injected amplitude by √(η/ξ); after the
//!   √ξ channel attenuation the detected message amplitude is exactly
//!   √η·ε√2 and the measured SNR converges to 2ηε²/V₋ᵈ.
//! * Frames are independent sideband snapshots; frame f draws its samples
//!   from the derived seed `seed + f` (wrapping), which the generator
//!   expands into unrelated streams.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{
    make_epr, make_vacuum, sample_quadratures, x_index, y_index, GaussianState,
};
use crate::nopa::{spectra, NopaParams};

/// Which source feeds the two channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceMode {
    /// Amplifier off: independent vacua.
    Vacuum,
    /// Twin beams from the parametric amplifier, plus the common excess
    /// noise N_c from the params.
    Quantum,
    /// Classically correlated noise of strength N on both beams; however
    /// large N grows, the difference floor stays pinned at the vacuum
    /// level 2.
    ClassicalCorrelated(f64),
}

/// Message definition for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MessageConfig {
    /// Encoded amplitude ε after the mirror.
    pub epsilon: f64,
    /// Message phase on channel A, radians.
    pub beta_a: f64,
    /// Message phase on channel B, radians.
    pub beta_b: f64,
    /// On/off keying per frame, cycled over the run.
    pub frame_pattern: Vec<bool>,
    pub frames: usize,
    pub samples_per_frame: usize,
    /// Offset frequency Ω₀ of the single-sideband message, Hz. Metadata
    /// only: the simulated state *is* the sideband at Ω₀.
    pub omega0_label: f64,
}

impl Default for MessageConfig {
    fn default() -> Self {
        MessageConfig {
            epsilon: 1.0,
            beta_a: 0.0,
            beta_b: std::f64::consts::PI,
            frame_pattern: vec![false, true],
            frames: 100,
            samples_per_frame: 1000,
            omega0_label: 1.1e6,
        }
    }
}

impl MessageConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "message amplitude {} must be finite and nonnegative",
                self.epsilon
            )));
        }
        if self.frames == 0 || self.samples_per_frame == 0 {
            return Err(Error::InvalidArgument(
                "frames and samples_per_frame must be positive".into(),
            ));
        }
        if self.frame_pattern.is_empty() || self.frames % self.frame_pattern.len() != 0 {
            return Err(Error::InvalidArgument(format!(
                "frame pattern length {} must divide the {} frames",
                self.frame_pattern.len(),
                self.frames
            )));
        }
        Ok(())
    }

    /// Message bit of frame `f` (pattern cycled).
    pub fn bit(&self, f: usize) -> bool {
        self.frame_pattern[f % self.frame_pattern.len()]
    }
}

/// Homodyne record of one run: per-sample photocurrents and frame tags.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotocurrentRecord {
    pub i_a: Vec<f64>,
    pub i_b: Vec<f64>,
    /// Exactly i_a − i_b, element by element.
    pub i_minus: Vec<f64>,
    pub frame_index: Vec<u32>,
    pub lo_phases: (f64, f64),
}

/// Spectral densities and SNR read off a record, in vacuum units.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralEstimate {
    /// Channel-A photocurrent density Ψ_A over signal-off frames.
    pub psi_a: f64,
    pub psi_b: f64,
    /// Difference-current density Φ₋ over signal-off frames.
    pub phi_minus: f64,
    /// Vacuum reference for a single beam.
    pub psi_0a: f64,
    /// Vacuum reference for the difference current, 2·psi_0a exactly.
    pub phi_0minus: f64,
    /// Squared on-frame mean shift of i₋ over its off-frame variance;
    /// absent when the pattern never switches the message on.
    pub snr_measured: Option<f64>,
}

impl SpectralEstimate {
    /// Measured SNR, or the reason it is undefined.
    pub fn snr(&self) -> Result<f64> {
        self.snr_measured.ok_or_else(|| {
            Error::Estimation("no signal-on frames in the pattern, SNR undefined".into())
        })
    }
}

/// Derived seed for frame `f`: documented splitting rule `seed + f`
/// (wrapping); the generator expands nearby seeds into unrelated streams.
pub fn frame_seed(seed: u64, frame: usize) -> u64 {
    seed.wrapping_add(frame as u64)
}

/// Construct the joint two-channel source state.
pub fn build_source(params: &NopaParams, mode: SourceMode) -> Result<GaussianState> {
    params.validate()?;
    match mode {
        SourceMode::Vacuum => make_vacuum(2),
        SourceMode::Quantum => {
            let sp = spectra(params)?;
            let state = make_epr(sp.s_minus, sp.s_plus)?;
            add_correlated_noise(&state, params.n_common)
        }
        SourceMode::ClassicalCorrelated(n) => {
            add_correlated_noise(&make_vacuum(2)?, n)
        }
    }
}

/// Overlay common-mode noise of strength N on both beams with the same
/// correlation signs as the EPR pair (X correlated, Y anticorrelated), so
/// it cancels in both quiet combinations X_A−X_B and Y_A+Y_B.
fn add_correlated_noise(state: &GaussianState, n: f64) -> Result<GaussianState> {
    if n < 0.0 || !n.is_finite() {
        return Err(Error::Unphysical(format!(
            "correlated noise strength {n} must be finite and nonnegative"
        )));
    }
    if n == 0.0 {
        return Ok(state.clone());
    }
    let mut cov = state.cov().clone();
    for m in 0..2 {
        cov[(x_index(m), x_index(m))] += n;
        cov[(y_index(m), y_index(m))] += n;
    }
    cov[(x_index(0), x_index(1))] += n;
    cov[(x_index(1), x_index(0))] += n;
    cov[(y_index(0), y_index(1))] -= n;
    cov[(y_index(1), y_index(0))] -= n;
    GaussianState::from_parts(state.mean().clone(), cov)
}

/// Superimpose the message on both beams at the coupling mirror.
///
/// For frame_bit = 1, channel j is displaced by amplitude
/// (ε/√2)·√(η/ξ) along phase β_j; see the module docs for why the √(η/ξ)
/// pre-scale makes the detected message efficiency exactly η.
pub fn encode_at_mirror(
    state: &GaussianState,
    params: &NopaParams,
    msg: &MessageConfig,
    frame_bit: bool,
) -> Result<GaussianState> {
    msg.validate()?;
    if state.n_modes() != 2 {
        return Err(Error::InvalidArgument(
            "encode_at_mirror expects the two-channel state".into(),
        ));
    }
    if !frame_bit || msg.epsilon == 0.0 {
        return Ok(state.clone());
    }
    let amp = msg.epsilon / 2f64.sqrt() * (params.eta / params.xi).sqrt();
    let d = DVector::from_column_slice(&[
        amp * msg.beta_a.cos(),
        amp * msg.beta_a.sin(),
        amp * msg.beta_b.cos(),
        amp * msg.beta_b.sin(),
    ]);
    state.displace(&d)
}

/// Propagate both channels through their losses; symmetric ξ is the
/// common case, asymmetric values are allowed for what-if runs.
pub fn transmit(state: &GaussianState, xi_a: f64, xi_b: f64) -> Result<GaussianState> {
    state.loss_channel(0, xi_a)?.loss_channel(1, xi_b)
}

/// Balanced-homodyne both channels at the given LO phases and form the
/// difference current.
pub fn detect(
    state: &GaussianState,
    lo_phases: (f64, f64),
    n_samples: usize,
    seed: u64,
) -> Result<PhotocurrentRecord> {
    if state.n_modes() != 2 {
        return Err(Error::InvalidArgument(
            "detect expects the two-channel state".into(),
        ));
    }
    let batch = sample_quadratures(state, &[lo_phases.0, lo_phases.1], n_samples, seed)?;
    let i_a = batch.column(0);
    let i_b = batch.column(1);
    let i_minus = i_a.iter().zip(i_b.iter()).map(|(a, b)| a - b).collect();
    Ok(PhotocurrentRecord {
        i_a,
        i_b,
        i_minus,
        frame_index: vec![0; n_samples],
        lo_phases,
    })
}

/// Analytic variance of the difference current X_θa(A) − X_θb(B) for a
/// two-channel state; the exact counterpart of what `detect` samples.
pub fn difference_variance(state: &GaussianState, lo_phases: (f64, f64)) -> Result<f64> {
    let rotated = state
        .phase_rotate(0, lo_phases.0)?
        .phase_rotate(1, lo_phases.1)?;
    let c = rotated.cov();
    Ok(c[(0, 0)] + c[(2, 2)] - 2.0 * c[(0, 2)])
}

/// Run the whole chain frame by frame at matched reference phases:
/// build → encode(bit of frame) → transmit ξ → detect. Frames draw from
/// derived seeds, so runs are deterministic and frame order is immaterial.
pub fn run_message(
    params: &NopaParams,
    msg: &MessageConfig,
    mode: SourceMode,
    seed: u64,
) -> Result<PhotocurrentRecord> {
    run_message_at(params, msg, mode, (0.0, 0.0), seed)
}

/// Same chain with an explicit LO pair, for monitoring other quadrature
/// combinations; (π/2, 3π/2) reads the orthogonal quiet combination
/// Y_A + Y_B against the same floor.
pub fn run_message_at(
    params: &NopaParams,
    msg: &MessageConfig,
    mode: SourceMode,
    lo: (f64, f64),
    seed: u64,
) -> Result<PhotocurrentRecord> {
    msg.validate()?;
    let source = build_source(params, mode)?;
    let mut out = PhotocurrentRecord {
        i_a: Vec::with_capacity(msg.frames * msg.samples_per_frame),
        i_b: Vec::with_capacity(msg.frames * msg.samples_per_frame),
        i_minus: Vec::with_capacity(msg.frames * msg.samples_per_frame),
        frame_index: Vec::with_capacity(msg.frames * msg.samples_per_frame),
        lo_phases: lo,
    };
    for f in 0..msg.frames {
        let encoded = encode_at_mirror(&source, params, msg, msg.bit(f))?;
        let sent = transmit(&encoded, params.xi, params.xi)?;
        let rec = detect(&sent, lo, msg.samples_per_frame, frame_seed(seed, f))?;
        out.i_a.extend_from_slice(&rec.i_a);
        out.i_b.extend_from_slice(&rec.i_b);
        out.i_minus.extend_from_slice(&rec.i_minus);
        out.frame_index.extend(std::iter::repeat_n(f as u32, msg.samples_per_frame));
    }
    Ok(out)
}

fn variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
}

/// Estimate spectral densities and SNR from a record, splitting samples by
/// the on/off pattern. Off frames set the noise floors; the SNR is the
/// squared mean shift of i₋ during on frames over the off-frame variance.
pub fn estimate(record: &PhotocurrentRecord, frame_pattern: &[bool]) -> Result<SpectralEstimate> {
    if record.i_minus.is_empty() {
        return Err(Error::Estimation("empty photocurrent record".into()));
    }
    if frame_pattern.is_empty() {
        return Err(Error::InvalidArgument("empty frame pattern".into()));
    }
    if record.i_a.len() != record.i_minus.len() || record.i_b.len() != record.i_minus.len() {
        return Err(Error::InvalidArgument("ragged photocurrent record".into()));
    }
    let on_of = |s: usize| frame_pattern[record.frame_index[s] as usize % frame_pattern.len()];
    let (mut off, mut on): (Vec<usize>, Vec<usize>) = (Vec::new(), Vec::new());
    for s in 0..record.i_minus.len() {
        if on_of(s) {
            on.push(s)
        } else {
            off.push(s)
        }
    }
    if off.len() < 2 {
        return Err(Error::Estimation(
            "pattern leaves no signal-off frames to set the noise floor".into(),
        ));
    }
    let pick = |xs: &[f64], idx: &[usize]| idx.iter().map(|&i| xs[i]).collect::<Vec<f64>>();
    let off_minus = pick(&record.i_minus, &off);
    let phi_minus = variance(&off_minus);
    let snr_measured = if on.is_empty() {
        None
    } else {
        let mean_on = on.iter().map(|&i| record.i_minus[i]).sum::<f64>() / on.len() as f64;
        let mean_off = off_minus.iter().sum::<f64>() / off_minus.len() as f64;
        let shift = mean_on - mean_off;
        Some(shift * shift / phi_minus)
    };
    Ok(SpectralEstimate {
        psi_a: variance(&pick(&record.i_a, &off)),
        psi_b: variance(&pick(&record.i_b, &off)),
        phi_minus,
        psi_0a: 1.0,
        phi_0minus: 2.0,
        snr_measured,
    })
}

/// Result of a dense-coding run: two messages ride the two quadratures of
/// channel A and are read out on the two recombined output ports.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DenseCodingReport {
    /// Off-frame variance of the X-carrying output port.
    pub floor_x: f64,
    /// Off-frame variance of the Y-carrying output port.
    pub floor_y: f64,
    pub snr_x: Option<f64>,
    pub snr_y: Option<f64>,
}

/// Dense-coding variant: the full message amplitude ε displaces channel A
/// alone (components ε·cos β_A on X_A, ε·sin β_A on Y_A); channel B carries
/// no displacement and by itself no information. The receiver recombines
/// A and B on a balanced beamsplitter and homodynes the two outputs with
/// LO phases offset by π/2, recovering the X component on one port and the
/// Y component on the other, each against a squeezed floor.
pub fn dense_coding_run(
    params: &NopaParams,
    msg: &MessageConfig,
    seed: u64,
) -> Result<DenseCodingReport> {
    msg.validate()?;
    let source = build_source(params, SourceMode::Quantum)?;
    let gain = (params.eta / params.xi).sqrt();
    let spf = msg.samples_per_frame;
    let mut port_x: Vec<f64> = Vec::with_capacity(msg.frames * spf);
    let mut port_y: Vec<f64> = Vec::with_capacity(msg.frames * spf);
    let mut frame_of: Vec<u32> = Vec::with_capacity(msg.frames * spf);
    for f in 0..msg.frames {
        let mut state = source.clone();
        if msg.bit(f) && msg.epsilon > 0.0 {
            let d = DVector::from_column_slice(&[
                gain * msg.epsilon * msg.beta_a.cos(),
                gain * msg.epsilon * msg.beta_a.sin(),
                0.0,
                0.0,
            ]);
            state = state.displace(&d)?;
        }
        let sent = transmit(&state, params.xi, params.xi)?;
        // balanced recombination; port 1 carries (B−A)/√2 and reads X, port 0
        // carries (A+B)/√2 and reads Y — both are the quiet combinations
        let mixed = sent.beamsplitter(0, 1, 0.5, 0.0)?;
        let batch = sample_quadratures(
            &mixed,
            &[std::f64::consts::FRAC_PI_2, 0.0],
            spf,
            frame_seed(seed, f),
        )?;
        port_y.extend(batch.column(0));
        port_x.extend(batch.column(1));
        frame_of.extend(std::iter::repeat_n(f as u32, spf));
    }
    let split = |port: &[f64]| {
        let (mut on, mut off) = (Vec::new(), Vec::new());
        for (s, v) in port.iter().enumerate() {
            if msg.bit(frame_of[s] as usize) {
                on.push(*v)
            } else {
                off.push(*v)
            }
        }
        (on, off)
    };
    let branch = |port: &[f64]| -> Result<(f64, Option<f64>)> {
        let (on, off) = split(port);
        if off.len() < 2 {
            return Err(Error::Estimation(
                "pattern leaves no signal-off frames to set the noise floor".into(),
            ));
        }
        let floor = variance(&off);
        let snr = if on.is_empty() {
            None
        } else {
            let shift = on.iter().sum::<f64>() / on.len() as f64
                - off.iter().sum::<f64>() / off.len() as f64;
            Some(shift * shift / floor)
        };
        Ok((floor, snr))
    };
    let (floor_x, snr_x) = branch(&port_x)?;
    let (floor_y, snr_y) = branch(&port_y)?;
    Ok(DenseCodingReport {
        floor_x,
        floor_y,
        snr_x,
        snr_y,
    })
}
