//! Named end-to-end scenarios behind the command line.
//!
//! A scenario is one self-contained experiment described by a single JSON
//! config: which pipeline to run, the source/channel parameters, the
//! message, the eavesdropper, the sample budget and the seed. Running one
//! leaves behind `<scenario>_summary.json` plus one or more CSV tables in
//! the output directory; every numeric column that has a natural power
//! reading carries a `_db` twin. The seed is mandatory and every random
//! draw descends from it, so re-running an identical config reproduces the
//! artifacts byte for byte (schema_version 1).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::adversary::{eve_min_rho, eve_tap_snr, tapped_bob_floor, EveStrategy};
use crate::error::{Error, Result};
use crate::keyexchange::{expected_ber, run_session_frames, Basis};
use crate::nopa::{db, receiver_snr, spectra, transfer_coefficients, NopaParams};
use crate::protocol::{
    dense_coding_run, estimate, run_message, MessageConfig, PhotocurrentRecord, SourceMode,
};

/// The experiments the runner understands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// Analytic squeezing spectra and derived SNRs at one operating point.
    Spectra,
    /// Analytic signal-transfer coefficients of the tap mirror.
    Transfer,
    /// Sampled on/off message trace read against the squeezed difference
    /// floor, with a pump-off reference run at the same amplitude.
    Fig2,
    /// Same trace in the sub-unity-amplitude regime (|ε|² < 1), where only
    /// the correlated floor keeps the message resolvable.
    Fig3,
    /// Eavesdropper tap fraction scan plus the smallest fraction reaching
    /// a target SNR.
    TapSweep,
    /// Two-basis key distribution session with per-frame log.
    Keyexchange,
    /// Both quadratures of one channel used as independent message slots.
    DenseCoding,
}

impl ScenarioKind {
    /// Stem used for artifact file names; equals the config-file spelling.
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Spectra => "spectra",
            ScenarioKind::Transfer => "transfer",
            ScenarioKind::Fig2 => "fig2",
            ScenarioKind::Fig3 => "fig3",
            ScenarioKind::TapSweep => "tap_sweep",
            ScenarioKind::Keyexchange => "keyexchange",
            ScenarioKind::DenseCoding => "dense_coding",
        }
    }
}

fn default_n_samples() -> usize {
    100_000
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_snr_target() -> f64 {
    1.0
}

/// One run request, as read from a JSON config file. Unknown fields are
/// rejected so typos fail loudly instead of silently running defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    #[serde(default)]
    pub params: NopaParams,
    #[serde(default)]
    pub message: MessageConfig,
    #[serde(default)]
    pub eve: EveStrategy,
    /// Total sample budget: detection shots for the trace scenarios,
    /// protocol frames for keyexchange.
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    /// Root of all randomness. Mandatory: there is no wall-clock fallback.
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Eavesdropper SNR target for the tap_sweep feasibility solve.
    #[serde(default = "default_snr_target")]
    pub snr_target: f64,
    /// Symbol amplitudes (a0, a1) for keyexchange; (0, ε) when absent.
    #[serde(default)]
    pub alphabet: Option<(f64, f64)>,
    /// Tap fractions for tap_sweep; a uniform 21-point grid when absent.
    #[serde(default)]
    pub rho_grid: Option<Vec<f64>>,
}

impl ScenarioConfig {
    /// Parse a config document; malformed JSON, unknown fields and a
    /// missing seed are all config errors.
    pub fn from_json(text: &str) -> Result<ScenarioConfig> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("bad scenario config: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<ScenarioConfig> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.message.validate()?;
        self.eve.validate()?;
        if self.n_samples == 0 {
            return Err(Error::Config("n_samples must be positive".into()));
        }
        if let Some((a0, a1)) = self.alphabet {
            if !(a0.is_finite() && a1.is_finite() && a0 >= 0.0 && a1 > a0) {
                return Err(Error::Config(format!(
                    "alphabet ({a0}, {a1}) needs finite amplitudes with a1 > a0 >= 0"
                )));
            }
        }
        if let Some(grid) = &self.rho_grid {
            for &rho in grid {
                if !(0.0..=1.0).contains(&rho) {
                    return Err(Error::Config(format!("tap fraction {rho} outside [0, 1]")));
                }
            }
        }
        match self.scenario {
            ScenarioKind::Fig2 if self.message.epsilon <= 0.0 => Err(Error::Config(
                "fig2 needs a positive message amplitude".into(),
            )),
            ScenarioKind::Fig3 if !(self.message.epsilon > 0.0 && self.message.epsilon < 1.0) => {
                Err(Error::Config(format!(
                    "fig3 runs the sub-unity regime; message.epsilon = {} must lie in (0, 1)",
                    self.message.epsilon
                )))
            }
            _ => Ok(()),
        }
    }
}

/// Paths left behind by one run, plus the summary document as written.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub summary_path: PathBuf,
    pub table_paths: Vec<PathBuf>,
    pub summary: Value,
}

struct NamedTable {
    /// Suffix after the scenario stem, e.g. "trace" → `fig2_trace.csv`.
    name: &'static str,
    csv: String,
}

struct ScenarioOutput {
    summary: Value,
    tables: Vec<NamedTable>,
}

/// Execute the configured scenario and write its artifacts under
/// `out_dir`. Feasibility failures inside a scenario (an unreachable tap
/// target) surface as [`Error::Infeasible`]; everything written is
/// deterministic in (config, seed).
pub fn run(config: &ScenarioConfig) -> Result<RunArtifacts> {
    let output = execute(config)?;
    fs::create_dir_all(&config.out_dir)?;
    let stem = config.scenario.name();
    let summary_path = config.out_dir.join(format!("{stem}_summary.json"));
    let mut doc = serde_json::to_string_pretty(&output.summary)
        .map_err(|e| Error::Config(format!("summary encoding: {e}")))?;
    doc.push('\n');
    fs::write(&summary_path, doc)?;
    let mut table_paths = Vec::new();
    for table in &output.tables {
        let path = config.out_dir.join(format!("{stem}_{}.csv", table.name));
        fs::write(&path, &table.csv)?;
        table_paths.push(path);
    }
    Ok(RunArtifacts {
        summary_path,
        table_paths,
        summary: output.summary,
    })
}

fn execute(config: &ScenarioConfig) -> Result<ScenarioOutput> {
    config.validate()?;
    match config.scenario {
        ScenarioKind::Spectra => spectra_scenario(config),
        ScenarioKind::Transfer => transfer_scenario(config),
        ScenarioKind::Fig2 => trace_scenario(config, false),
        ScenarioKind::Fig3 => trace_scenario(config, true),
        ScenarioKind::TapSweep => tap_sweep_scenario(config),
        ScenarioKind::Keyexchange => keyexchange_scenario(config),
        ScenarioKind::DenseCoding => dense_coding_scenario(config),
    }
}

// ---- summary/table plumbing -------------------------------------------

fn to_json<T: Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::Config(format!("summary encoding: {e}")))
}

/// Insert a linear value and its decibel twin (null when undefined).
fn put_db(map: &mut Map<String, Value>, key: &str, x: f64) {
    map.insert(key.to_string(), Value::from(x));
    map.insert(
        format!("{key}_db"),
        db(x).map(Value::from).unwrap_or(Value::Null),
    );
}

fn preamble(config: &ScenarioConfig) -> Result<Map<String, Value>> {
    let mut m = Map::new();
    m.insert("schema_version".into(), json!(1));
    m.insert("scenario".into(), json!(config.scenario.name()));
    m.insert("seed".into(), json!(config.seed));
    m.insert("params".into(), to_json(&config.params)?);
    Ok(m)
}

fn table_error(e: impl std::fmt::Display) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

fn csv_document(header: &[String], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(table_error)?;
    for row in rows {
        w.write_record(row).map_err(table_error)?;
    }
    let bytes = w.into_inner().map_err(table_error)?;
    String::from_utf8(bytes).map_err(table_error)
}

fn cell(x: f64) -> String {
    format!("{x}")
}

fn db_cell(x: f64) -> String {
    db(x).map(|d| format!("{d}")).unwrap_or_default()
}

/// Single-row result table with `value, value_db` column pairs.
struct RowTable {
    header: Vec<String>,
    cells: Vec<String>,
}

impl RowTable {
    fn new() -> RowTable {
        RowTable {
            header: Vec::new(),
            cells: Vec::new(),
        }
    }

    fn push(&mut self, key: &str, value: String) {
        self.header.push(key.to_string());
        self.cells.push(value);
    }

    fn push_db(&mut self, key: &str, x: f64) {
        self.push(key, cell(x));
        self.push(&format!("{key}_db"), db_cell(x));
    }

    fn into_csv(self) -> Result<String> {
        csv_document(&self.header, std::slice::from_ref(&self.cells))
    }
}

// ---- analytic scenarios ------------------------------------------------

fn spectra_scenario(config: &ScenarioConfig) -> Result<ScenarioOutput> {
    let sp = spectra(&config.params)?;
    let eps = config.message.epsilon;
    let quantities: [(&str, f64); 9] = [
        ("s_minus", sp.s_minus),
        ("s_plus", sp.s_plus),
        ("g_q", sp.g_q),
        ("g_q_d", sp.g_q_d),
        ("v_minus", sp.v_minus),
        ("v_minus_d", sp.v_minus_d),
        ("u_r", sp.u_r),
        ("channel_snr", crate::nopa::channel_snr(&config.params, eps)?),
        ("receiver_snr", receiver_snr(&config.params, eps)?),
    ];
    let mut m = preamble(config)?;
    m.insert("epsilon".into(), json!(eps));
    let mut row = RowTable::new();
    for (key, x) in quantities {
        put_db(&mut m, key, x);
        row.push_db(key, x);
    }
    Ok(ScenarioOutput {
        summary: Value::Object(m),
        tables: vec![NamedTable {
            name: "table",
            csv: row.into_csv()?,
        }],
    })
}

fn transfer_scenario(config: &ScenarioConfig) -> Result<ScenarioOutput> {
    let rep = transfer_coefficients(&config.params, config.message.epsilon)?;
    let quantities: [(&str, f64); 5] = [
        ("r0", rep.r0),
        ("r_ab", rep.r_ab),
        ("r_d", rep.r_d),
        ("r_r", rep.r_r),
        ("t_d", rep.t_d),
    ];
    let mut m = preamble(config)?;
    m.insert("epsilon".into(), json!(rep.epsilon));
    let mut row = RowTable::new();
    for (key, x) in quantities {
        put_db(&mut m, key, x);
        row.push_db(key, x);
    }
    Ok(ScenarioOutput {
        summary: Value::Object(m),
        tables: vec![NamedTable {
            name: "table",
            csv: row.into_csv()?,
        }],
    })
}

// ---- sampled message traces ---------------------------------------------

/// Stream salt for the pump-off reference run, so its noise draws are
/// unrelated to the main run's at the same seed.
const REFERENCE_SEED_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

fn effective_spf(n_samples: usize, frames: usize) -> usize {
    (n_samples / frames).max(1)
}

fn trace_scenario(config: &ScenarioConfig, sub_unity: bool) -> Result<ScenarioOutput> {
    let mut msg = config.message.clone();
    msg.samples_per_frame = effective_spf(config.n_samples, msg.frames);

    let record = run_message(&config.params, &msg, SourceMode::Quantum, config.seed)?;
    let measured = estimate(&record, &msg.frame_pattern)?;
    let snr = measured.snr()?;

    // identical pipeline with the pump off: uncorrelated vacuum beams
    // carrying the same displacement, the noise floor every improvement
    // figure is quoted against
    let mut reference_params = config.params;
    reference_params.sigma = 0.0;
    reference_params.n_common = 0.0;
    let reference_record = run_message(
        &reference_params,
        &msg,
        SourceMode::Quantum,
        config.seed ^ REFERENCE_SEED_SALT,
    )?;
    let reference = estimate(&reference_record, &msg.frame_pattern)?;
    let reference_snr = reference.snr()?;

    let sp = spectra(&config.params)?;
    let mut m = preamble(config)?;
    m.insert("epsilon".into(), json!(msg.epsilon));
    m.insert("frames".into(), json!(msg.frames));
    m.insert("samples_per_frame".into(), json!(msg.samples_per_frame));
    m.insert(
        "n_samples".into(),
        json!(msg.frames * msg.samples_per_frame),
    );

    let mut measured_map = Map::new();
    put_db(&mut measured_map, "psi_a", measured.psi_a);
    put_db(&mut measured_map, "psi_b", measured.psi_b);
    put_db(&mut measured_map, "phi_minus", measured.phi_minus);
    put_db(&mut measured_map, "snr", snr);
    m.insert("measured".into(), Value::Object(measured_map));

    let mut reference_map = Map::new();
    put_db(&mut reference_map, "phi_minus", reference.phi_minus);
    put_db(&mut reference_map, "snr", reference_snr);
    m.insert("reference".into(), Value::Object(reference_map));

    put_db(&mut m, "improvement", snr / reference_snr);

    let mut analytic = Map::new();
    put_db(&mut analytic, "receiver_snr", receiver_snr(&config.params, msg.epsilon)?);
    put_db(
        &mut analytic,
        "reference_snr",
        receiver_snr(&reference_params, msg.epsilon)?,
    );
    put_db(&mut analytic, "improvement", 2.0 / sp.v_minus_d);
    m.insert("analytic".into(), Value::Object(analytic));

    if sub_unity {
        m.insert("epsilon_squared".into(), json!(msg.epsilon * msg.epsilon));
        m.insert("reference_snr_below_unity".into(), json!(reference_snr < 1.0));
        m.insert("quantum_snr_above_unity".into(), json!(snr > 1.0));
    }

    Ok(ScenarioOutput {
        summary: Value::Object(m),
        tables: vec![NamedTable {
            name: "trace",
            csv: trace_table(&record, &msg)?,
        }],
    })
}

/// Per-frame trace of total photocurrent power, in dB re the single-beam
/// vacuum floor; on-frames step up by the message power. Columns are part
/// of the output contract, as are the two constant reference columns.
fn trace_table(record: &PhotocurrentRecord, msg: &MessageConfig) -> Result<String> {
    let header: Vec<String> = [
        "frame_index",
        "psi_a_db",
        "psi_b_db",
        "phi_minus_db",
        "psi_0a_db",
        "phi_0minus_db",
        "message_bit",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let mut power = vec![[0.0_f64; 3]; msg.frames];
    let mut count = vec![0usize; msg.frames];
    for s in 0..record.i_minus.len() {
        let f = record.frame_index[s] as usize;
        power[f][0] += record.i_a[s] * record.i_a[s];
        power[f][1] += record.i_b[s] * record.i_b[s];
        power[f][2] += record.i_minus[s] * record.i_minus[s];
        count[f] += 1;
    }
    let psi_0a_db = format!("{:.4}", 0.0);
    let phi_0minus_db = format!("{:.4}", db(2.0)?);
    let mut rows = Vec::with_capacity(msg.frames);
    for f in 0..msg.frames {
        let n = count[f] as f64;
        let mut row = Vec::with_capacity(7);
        row.push(f.to_string());
        for p in power[f] {
            row.push(format!("{:.4}", db(p / n)?));
        }
        row.push(psi_0a_db.clone());
        row.push(phi_0minus_db.clone());
        row.push((msg.bit(f) as u8).to_string());
        rows.push(row);
    }
    csv_document(&header, &rows)
}

// ---- adversary trade-off ------------------------------------------------

fn default_rho_grid() -> Vec<f64> {
    (0..=20).map(|i| i as f64 / 20.0).collect()
}

fn tap_sweep_scenario(config: &ScenarioConfig) -> Result<ScenarioOutput> {
    let eps = config.message.epsilon;
    let grid = config
        .rho_grid
        .clone()
        .unwrap_or_else(default_rho_grid);
    let header: Vec<String> = ["rho", "eve_snr", "eve_snr_db", "bob_floor", "bob_floor_db"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut rows = Vec::with_capacity(grid.len());
    for &rho in &grid {
        let snr = eve_tap_snr(&config.params, eps, rho)?;
        let floor = tapped_bob_floor(&config.params, rho)?;
        rows.push(vec![
            cell(rho),
            cell(snr),
            db_cell(snr),
            cell(floor),
            db_cell(floor),
        ]);
    }

    let solution = eve_min_rho(&config.params, eps, config.snr_target)?;
    let mut m = preamble(config)?;
    m.insert("epsilon".into(), json!(eps));
    m.insert("snr_target".into(), json!(config.snr_target));
    m.insert("grid_points".into(), json!(grid.len()));
    let mut sol = Map::new();
    sol.insert("rho".into(), json!(solution.rho));
    put_db(&mut sol, "eve_snr", solution.eve_snr);
    put_db(&mut sol, "bob_floor", solution.bob_floor);
    put_db(&mut sol, "undisturbed_floor", solution.undisturbed_floor);
    m.insert("min_rho".into(), Value::Object(sol));

    Ok(ScenarioOutput {
        summary: Value::Object(m),
        tables: vec![NamedTable {
            name: "table",
            csv: csv_document(&header, &rows)?,
        }],
    })
}

// ---- key exchange --------------------------------------------------------

fn basis_cell(basis: Basis) -> &'static str {
    match basis {
        Basis::Zero => "zero",
        Basis::QuarterTurn => "quarter_turn",
    }
}

fn keyexchange_scenario(config: &ScenarioConfig) -> Result<ScenarioOutput> {
    let alphabet = config.alphabet.unwrap_or((0.0, config.message.epsilon));
    let n_frames = config.n_samples;
    let (report, frames) =
        run_session_frames(&config.params, alphabet, n_frames, &config.eve, config.seed)?;

    let sp = spectra(&config.params)?;
    let mut m = preamble(config)?;
    m.insert("eve".into(), to_json(&config.eve)?);
    m.insert("alphabet_a0".into(), json!(alphabet.0));
    m.insert("alphabet_a1".into(), json!(alphabet.1));
    m.insert("n_frames".into(), json!(report.n_frames));
    m.insert("sift_fraction".into(), json!(report.sift_fraction));
    m.insert("ber".into(), json!(report.ber));
    m.insert(
        "expected_ber".into(),
        json!(expected_ber(&config.params, alphabet.0, alphabet.1)?),
    );
    put_db(&mut m, "measured_floor", report.measured_floor);
    put_db(&mut m, "orth_floor", report.orth_floor);
    put_db(&mut m, "analytic_floor", sp.v_minus_d);
    put_db(&mut m, "eve_snr", report.eve_flags.eve_snr);
    let mut flags = Map::new();
    flags.insert("floor_excess".into(), json!(report.eve_flags.floor_excess));
    flags.insert("orth_excess".into(), json!(report.eve_flags.orth_excess));
    flags.insert(
        "orth_unchecked".into(),
        json!(report.eve_flags.orth_unchecked),
    );
    flags.insert(
        "baseline_floor".into(),
        json!(report.eve_flags.baseline_floor),
    );
    flags.insert(
        "threshold_sigmas".into(),
        json!(report.eve_flags.threshold_sigmas),
    );
    m.insert("flags".into(), Value::Object(flags));

    let header: Vec<String> = [
        "frame_index",
        "alice_basis",
        "alice_bit",
        "bob_basis",
        "kept",
        "outcome",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let rows: Vec<Vec<String>> = frames
        .iter()
        .enumerate()
        .map(|(f, frame)| {
            vec![
                f.to_string(),
                basis_cell(frame.alice_basis).to_string(),
                (frame.alice_bit as u8).to_string(),
                basis_cell(frame.bob_basis).to_string(),
                (frame.kept as u8).to_string(),
                cell(frame.outcome_mean),
            ]
        })
        .collect();

    Ok(ScenarioOutput {
        summary: Value::Object(m),
        tables: vec![NamedTable {
            name: "frames",
            csv: csv_document(&header, &rows)?,
        }],
    })
}

// ---- dense coding ---------------------------------------------------------

fn dense_coding_scenario(config: &ScenarioConfig) -> Result<ScenarioOutput> {
    let mut msg = config.message.clone();
    msg.samples_per_frame = effective_spf(config.n_samples, msg.frames);
    let report = dense_coding_run(&config.params, &msg, config.seed)?;
    let sp = spectra(&config.params)?;
    // each output port carries one quiet combination at half the two-beam
    // normalization, and each quadrature component of the message rides
    // against it
    let analytic_floor = sp.v_minus_d / 2.0;
    let base = config.params.eta * msg.epsilon * msg.epsilon / sp.v_minus_d;
    let analytic_snr_x = base * msg.beta_a.cos().powi(2);
    let analytic_snr_y = base * msg.beta_a.sin().powi(2);

    let mut m = preamble(config)?;
    m.insert("epsilon".into(), json!(msg.epsilon));
    m.insert("beta_a".into(), json!(msg.beta_a));
    m.insert("frames".into(), json!(msg.frames));
    m.insert("samples_per_frame".into(), json!(msg.samples_per_frame));
    put_db(&mut m, "floor_x", report.floor_x);
    put_db(&mut m, "floor_y", report.floor_y);
    match report.snr_x {
        Some(snr) => put_db(&mut m, "snr_x", snr),
        None => {
            m.insert("snr_x".into(), Value::Null);
        }
    }
    match report.snr_y {
        Some(snr) => put_db(&mut m, "snr_y", snr),
        None => {
            m.insert("snr_y".into(), Value::Null);
        }
    }
    let mut analytic = Map::new();
    put_db(&mut analytic, "floor", analytic_floor);
    put_db(&mut analytic, "snr_x", analytic_snr_x);
    put_db(&mut analytic, "snr_y", analytic_snr_y);
    m.insert("analytic".into(), Value::Object(analytic));

    let mut row = RowTable::new();
    row.push_db("floor_x", report.floor_x);
    row.push_db("floor_y", report.floor_y);
    row.push("snr_x", report.snr_x.map(cell).unwrap_or_default());
    row.push(
        "snr_x_db",
        report.snr_x.map(db_cell).unwrap_or_default(),
    );
    row.push("snr_y", report.snr_y.map(cell).unwrap_or_default());
    row.push(
        "snr_y_db",
        report.snr_y.map(db_cell).unwrap_or_default(),
    );
    row.push("analytic_floor", cell(analytic_floor));
    row.push("analytic_snr_x", cell(analytic_snr_x));
    row.push("analytic_snr_y", cell(analytic_snr_y));

    Ok(ScenarioOutput {
        summary: Value::Object(m),
        tables: vec![NamedTable {
            name: "table",
            csv: row.into_csv()?,
        }],
    })
}

// ---- parameter sweeps -----------------------------------------------------

/// Result of a sweep: one flattened summary row per grid point, first
/// column the axis value.
#[derive(Debug, Clone)]
pub struct SweepTable {
    pub scenario: ScenarioKind,
    pub axis: String,
    pub grid: Vec<f64>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl SweepTable {
    pub fn to_csv(&self) -> Result<String> {
        csv_document(&self.header, &self.rows)
    }

    /// Write `sweep_<axis>.csv` plus a small JSON summary beside it.
    pub fn write(&self, out_dir: &Path) -> Result<RunArtifacts> {
        fs::create_dir_all(out_dir)?;
        let table_path = out_dir.join(format!("sweep_{}.csv", self.axis));
        fs::write(&table_path, self.to_csv()?)?;
        let summary = json!({
            "schema_version": 1,
            "scenario": self.scenario.name(),
            "axis": self.axis,
            "grid": self.grid,
            "n_points": self.grid.len(),
            "columns": self.header,
        });
        let summary_path = out_dir.join(format!("sweep_{}_summary.json", self.axis));
        let mut doc = serde_json::to_string_pretty(&summary)
            .map_err(|e| Error::Config(format!("summary encoding: {e}")))?;
        doc.push('\n');
        fs::write(&summary_path, doc)?;
        Ok(RunArtifacts {
            summary_path,
            table_paths: vec![table_path],
            summary,
        })
    }
}

type AxisSetter = fn(&mut ScenarioConfig, f64) -> Result<()>;

fn axis_setter(axis: &str) -> Result<AxisSetter> {
    Ok(match axis {
        "sigma" => |c, v| {
            c.params.sigma = v;
            Ok(())
        },
        "omega" => |c, v| {
            c.params.omega = v;
            Ok(())
        },
        "xi" => |c, v| {
            c.params.xi = v;
            Ok(())
        },
        "eta" => |c, v| {
            c.params.eta = v;
            Ok(())
        },
        "t2" => |c, v| {
            c.params.t2 = v;
            Ok(())
        },
        "n_common" => |c, v| {
            c.params.n_common = v;
            Ok(())
        },
        "epsilon" => |c, v| {
            c.message.epsilon = v;
            Ok(())
        },
        "rho" => |c, v| match c.eve {
            EveStrategy::Tap { .. } => {
                c.eve = EveStrategy::Tap { rho: v };
                Ok(())
            }
            _ => Err(Error::Config(
                "sweep axis rho needs eve.variant = tap in the config".into(),
            )),
        },
        "m" => |c, v| match c.eve {
            EveStrategy::Qnd { .. } => {
                c.eve = EveStrategy::Qnd { m: v };
                Ok(())
            }
            _ => Err(Error::Config(
                "sweep axis m needs eve.variant = qnd in the config".into(),
            )),
        },
        other => {
            return Err(Error::Config(format!(
                "unknown sweep axis {other:?}; numeric axes are sigma, omega, xi, eta, t2, \
                 n_common, epsilon, rho, m"
            )))
        }
    })
}

/// Turn one JSON value into a flat CSV cell; nested objects join their key
/// paths with '_', arrays don't fit a cell and are dropped.
fn flatten_into(prefix: &str, value: &Value, out: &mut BTreeMap<String, String>) {
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}_{k}")
                };
                flatten_into(&key, v, out);
            }
        }
        Value::Null => {
            out.insert(prefix.to_string(), String::new());
        }
        Value::Bool(b) => {
            out.insert(prefix.to_string(), b.to_string());
        }
        Value::Number(n) => {
            out.insert(prefix.to_string(), n.to_string());
        }
        Value::String(s) => {
            out.insert(prefix.to_string(), s.clone());
        }
        Value::Array(_) => {}
    }
}

/// Re-run the configured scenario once per grid value of one numeric
/// parameter and collect the flattened summaries into a table. Points are
/// evaluated independently; an empty grid yields a header-only table.
pub fn sweep(config: &ScenarioConfig, axis: &str, grid: &[f64]) -> Result<SweepTable> {
    let set = axis_setter(axis)?;
    let mut header: Vec<String> = vec![axis.to_string()];
    let mut rows = Vec::with_capacity(grid.len());
    for &value in grid {
        let mut point = config.clone();
        set(&mut point, value)?;
        let output = execute(&point)?;
        let mut flat = BTreeMap::new();
        flatten_into("", &output.summary, &mut flat);
        if header.len() == 1 {
            header.extend(flat.keys().cloned());
        }
        let mut row = Vec::with_capacity(header.len());
        row.push(cell(value));
        for key in &header[1..] {
            row.push(flat.get(key).cloned().unwrap_or_default());
        }
        rows.push(row);
    }
    Ok(SweepTable {
        scenario: config.scenario,
        axis: axis.to_string(),
        grid: grid.to_vec(),
        header,
        rows,
    })
}
