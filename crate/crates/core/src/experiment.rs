//! Run directories: metrics CSVs, a config snapshot and a JSON manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{config_from_table, parse_value, set_dotted, RunConfig};
use crate::error::{Error, Result};
use crate::model::{corollary_bound, BoundConstants, BoundDiagnostics};
use crate::simulator::{run, RoundRecord, RunOutput};

pub const METRICS_FILE: &str = "metrics.csv";
pub const POWER_FILE: &str = "power_trace.csv";
pub const QUEUE_FILE: &str = "queues.csv";
pub const CONFIG_FILE: &str = "config.toml";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SWEEP_FILE: &str = "sweep.csv";

pub const METRICS_HEADER: [&str; 8] = [
    "t",
    "train_loss",
    "test_accuracy",
    "round_comm_time_s",
    "cumulative_comm_time_s",
    "selected_count",
    "sum_inv_q",
    "forced_selection_flag",
];

/// Sixteen significant digits; NaN stays `NaN`.
fn fmt(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.15e}")
    } else {
        v.to_string()
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Dataset {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

fn write_rows<I>(path: &Path, header: &[String], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Write the per-round metrics table.
pub fn export_csv(records: &[RoundRecord], path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::invalid("records", "nothing to export"));
    }
    let header: Vec<String> = METRICS_HEADER.iter().map(|s| s.to_string()).collect();
    write_rows(
        path,
        &header,
        records.iter().map(|r| {
            vec![
                r.t.to_string(),
                fmt(r.train_loss),
                fmt(r.test_accuracy),
                fmt(r.round_comm_time_s),
                fmt(r.cumulative_comm_time_s),
                r.selected_count.to_string(),
                fmt(r.sum_inv_q),
                u8::from(r.forced_selection).to_string(),
            ]
        }),
    )
}

/// Running mean of `P·q` per device, one row per round.
pub fn export_power_trace(records: &[RoundRecord], path: &Path) -> Result<()> {
    let devices = records.first().map_or(0, |r| r.mean_power.len());
    let mut header = vec!["t".to_string()];
    header.extend((0..devices).map(|n| format!("device_{n}")));
    write_rows(
        path,
        &header,
        records.iter().map(|r| {
            let mut row = vec![r.t.to_string()];
            row.extend(r.mean_power.iter().map(|&v| fmt(v)));
            row
        }),
    )
}

/// Queue backlogs for the rounds that carry a snapshot.
pub fn export_queue_snapshots(records: &[RoundRecord], path: &Path) -> Result<()> {
    let devices = records.first().map_or(0, |r| r.mean_power.len());
    let mut header = vec!["t".to_string()];
    header.extend((0..devices).map(|n| format!("device_{n}")));
    write_rows(
        path,
        &header,
        records.iter().filter_map(|r| {
            r.queue_snapshot.as_ref().map(|z| {
                let mut row = vec![r.t.to_string()];
                row.extend(z.iter().map(|&v| fmt(v)));
                row
            })
        }),
    )
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub run_id: String,
    pub seed: u64,
    pub code_version: String,
    pub started_at: String,
    pub finished_at: String,
    /// Parameter overrides applied on top of the config file, as `key=value`.
    pub overrides: Vec<String>,
    pub config_file: PathBuf,
    pub outputs: Vec<PathBuf>,
    pub rounds: usize,
    pub forced_rounds: usize,
    pub uniform_group_size: Option<f64>,
    pub payload_bits: f64,
    pub model_dim: usize,
    pub final_train_loss: f64,
    pub final_test_accuracy: f64,
    pub total_comm_time_s: f64,
    pub bound: Option<BoundDiagnostics>,
}

/// Load a config file, apply `key=value` overrides (values parsed as TOML).
pub fn load_with_overrides(path: &Path, overrides: &[(String, String)]) -> Result<(String, RunConfig)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut table: toml::Table = toml::from_str(&text).map_err(|e| Error::config("<document>", e.message()))?;
    for (key, value) in overrides {
        set_dotted(&mut table, key, parse_value(value))?;
    }
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    Ok((text, config_from_table(table, base)?))
}

fn ensure_writable(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let probe = dir.join(".write-probe");
    fs::write(&probe, b"").map_err(|e| Error::io(&probe, e))?;
    fs::remove_file(&probe).map_err(|e| Error::io(&probe, e))
}

fn bound_for(config: &RunConfig, output: &RunOutput) -> Result<Option<BoundDiagnostics>> {
    let Some(d) = config.diagnostics else {
        return Ok(None);
    };
    if !output.initial_loss.is_finite() {
        return Ok(None);
    }
    let best = output
        .records
        .iter()
        .map(|r| r.train_loss)
        .fold(output.initial_loss, f64::min);
    let constants = BoundConstants {
        smoothness: d.smoothness,
        grad_bound: d.grad_bound,
        learning_rate: config.fed.learning_rate,
        local_steps: config.fed.local_steps,
        rounds: config.fed.rounds,
        f_initial: output.initial_loss,
        f_star: d.f_star.unwrap_or(best),
    };
    let sum_inv_q =
        output.records.iter().map(|r| r.sum_inv_q).sum::<f64>() / output.records.len() as f64;
    Ok(Some(BoundDiagnostics {
        sum_inv_q,
        corollary_bound: corollary_bound(sum_inv_q, &constants)?,
    }))
}

/// Outcome of [`run_experiment`].
#[derive(Debug, Clone)]
pub struct Experiment {
    pub manifest: ExperimentManifest,
    pub output: RunOutput,
}

/// Run one configuration and write its artifacts into `out_dir`.
pub fn run_experiment(
    config_path: &Path,
    out_dir: &Path,
    seed: Option<u64>,
    overrides: &[(String, String)],
) -> Result<Experiment> {
    let mut all = overrides.to_vec();
    if let Some(seed) = seed {
        all.push(("seed".into(), seed.to_string()));
    }
    let (text, config) = load_with_overrides(config_path, &all)?;
    ensure_writable(out_dir)?;

    let started = chrono::Utc::now();
    log::info!(
        "running {} rounds with {} clients (seed {})",
        config.fed.rounds,
        config.fed.clients,
        config.fed.seed
    );
    let output = run(&config)?;
    let finished = chrono::Utc::now();

    let config_copy = out_dir.join(CONFIG_FILE);
    fs::write(&config_copy, text.as_bytes()).map_err(|e| Error::io(&config_copy, e))?;
    let metrics = out_dir.join(METRICS_FILE);
    export_csv(&output.records, &metrics)?;
    let power = out_dir.join(POWER_FILE);
    export_power_trace(&output.records, &power)?;
    let mut outputs = vec![config_copy, metrics, power];
    if output.records.iter().any(|r| r.queue_snapshot.is_some()) {
        let queues = out_dir.join(QUEUE_FILE);
        export_queue_snapshots(&output.records, &queues)?;
        outputs.push(queues);
    }

    let last = output.records.last().expect("at least one round");
    let manifest = ExperimentManifest {
        run_id: format!("{}-seed{}", started.format("%Y%m%dT%H%M%S%.9fZ"), config.fed.seed),
        seed: config.fed.seed,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        started_at: started.to_rfc3339(),
        finished_at: finished.to_rfc3339(),
        overrides: all.iter().map(|(k, v)| format!("{k}={v}")).collect(),
        config_file: config_path.to_path_buf(),
        outputs,
        rounds: output.records.len(),
        forced_rounds: output.forced_rounds(),
        uniform_group_size: output.uniform_m,
        payload_bits: output.channel.payload_bits,
        model_dim: output.model_dim,
        final_train_loss: last.train_loss,
        final_test_accuracy: last.test_accuracy,
        total_comm_time_s: last.cumulative_comm_time_s,
        bound: bound_for(&config, &output)?,
    };
    let path = out_dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Dataset {
        path: path.clone(),
        message: e.to_string(),
    })?;
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(Experiment { manifest, output })
}

/// Filesystem-safe directory name for one sweep point.
fn point_dir(param: &str, value: &str) -> String {
    let clean: String = format!("{param}={value}")
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "=.-_+".contains(c) { c } else { '_' })
        .collect();
    clean
}

/// Run `config_path` once per value of `param`, each in its own
/// subdirectory, and write a one-row-per-value summary table.
pub fn sweep(config_path: &Path, param: &str, values: &[String], out_dir: &Path) -> Result<Vec<Experiment>> {
    if values.is_empty() {
        return Err(Error::invalid("values", "sweep needs at least one value"));
    }
    ensure_writable(out_dir)?;
    let mut runs = Vec::with_capacity(values.len());
    for value in values {
        let dir = out_dir.join(point_dir(param, value));
        log::info!("sweep point {param} = {value}");
        runs.push(run_experiment(config_path, &dir, None, &[(param.to_string(), value.clone())])?);
    }
    let header: Vec<String> = [
        param,
        "final_train_loss",
        "final_test_accuracy",
        "total_comm_time_s",
        "mean_selected",
        "forced_rounds",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    write_rows(
        &out_dir.join(SWEEP_FILE),
        &header,
        values.iter().zip(&runs).map(|(v, e)| {
            let recs = &e.output.records;
            let mean_selected =
                recs.iter().map(|r| r.selected_count as f64).sum::<f64>() / recs.len() as f64;
            vec![
                v.clone(),
                fmt(e.manifest.final_train_loss),
                fmt(e.manifest.final_test_accuracy),
                fmt(e.manifest.total_comm_time_s),
                fmt(mean_selected),
                e.manifest.forced_rounds.to_string(),
            ]
        }),
    )?;
    Ok(runs)
}
