//! Run configuration: TOML documents, defaults, and validation.
//!
//! Unknown keys are rejected; every error names the offending key using its
//! dotted path (`policy.lambda`, `channel.sigma_profile`, ...).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::ChannelConfig;
use crate::data::{PartitionMode, DEFAULT_TEST_FRACTION};
use crate::error::{Error, Result};
use crate::model::FedConfig;
use crate::scheduler::LyapunovConfig;

pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_LOCAL_STEPS: usize = 10;
pub const DEFAULT_LEARNING_RATE: f64 = 0.01;
pub const DEFAULT_BATCH_SIZE: usize = 32;
pub const DEFAULT_BANDWIDTH: f64 = 22e6;
pub const DEFAULT_P_MAX: f64 = 100.0;
pub const DEFAULT_P_AVG: f64 = 1.0;
pub const DEFAULT_V: f64 = crate::scheduler::DEFAULT_V;
pub const DEFAULT_LAMBDA: f64 = 10.0;
pub const DEFAULT_WINDOW: usize = 500;
pub const DEFAULT_ESTIMATE_ROUNDS: usize = 2000;

// ---------------------------------------------------------------------------
// File layout
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    seed: Option<u64>,
    federated: RawFederated,
    #[serde(default)]
    channel: RawChannel,
    #[serde(default)]
    policy: RawPolicy,
    #[serde(default)]
    workload: RawWorkload,
    #[serde(default)]
    metrics: RawMetrics,
    #[serde(default)]
    diagnostics: Option<RawDiagnostics>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFederated {
    clients: usize,
    rounds: usize,
    #[serde(default = "d_local_steps")]
    local_steps: usize,
    #[serde(default = "d_learning_rate")]
    learning_rate: f64,
    #[serde(default = "d_batch_size")]
    batch_size: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SigmaGroup {
    count: usize,
    sigma: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawChannel {
    bandwidth: f64,
    noise_power: f64,
    payload_bits: Option<f64>,
    p_max: f64,
    p_avg: f64,
    sigma: Option<f64>,
    sigma_profile: Option<Vec<SigmaGroup>>,
}

impl Default for RawChannel {
    fn default() -> Self {
        Self {
            bandwidth: DEFAULT_BANDWIDTH,
            noise_power: 1.0,
            payload_bits: None,
            p_max: DEFAULT_P_MAX,
            p_avg: DEFAULT_P_AVG,
            sigma: None,
            sigma_profile: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    Lyapunov,
    Uniform,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawPolicy {
    kind: PolicyKind,
    v: f64,
    lambda: f64,
    q_min: f64,
    m: Option<f64>,
    estimate_rounds: usize,
}

impl Default for RawPolicy {
    fn default() -> Self {
        Self {
            kind: PolicyKind::Lyapunov,
            v: DEFAULT_V,
            lambda: DEFAULT_LAMBDA,
            q_min: crate::scheduler::DEFAULT_Q_MIN,
            m: None,
            estimate_rounds: DEFAULT_ESTIMATE_ROUNDS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// No training; only the channel and scheduler run.
    None,
    Quadratic,
    Logistic,
    Mlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum DataKind {
    Synthetic,
    Csv,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawWorkload {
    model: ModelKind,
    hidden: usize,
    l2: f64,
    data: DataKind,
    samples: usize,
    features: usize,
    classes: usize,
    heterogeneity: f64,
    separation: f64,
    test_fraction: f64,
    path: Option<PathBuf>,
    partition: PartitionMode,
}

impl Default for RawWorkload {
    fn default() -> Self {
        Self {
            model: ModelKind::Logistic,
            hidden: 16,
            l2: 0.0,
            data: DataKind::Synthetic,
            samples: 10_000,
            features: 10,
            classes: 10,
            heterogeneity: 0.0,
            separation: 1.0,
            test_fraction: DEFAULT_TEST_FRACTION,
            path: None,
            partition: PartitionMode::Iid,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawMetrics {
    eval_every: usize,
    window: usize,
    queue_snapshot_every: usize,
    track_grad_norm: bool,
}

impl Default for RawMetrics {
    fn default() -> Self {
        Self {
            eval_every: 1,
            window: DEFAULT_WINDOW,
            queue_snapshot_every: 0,
            track_grad_norm: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDiagnostics {
    smoothness: f64,
    grad_bound: f64,
    #[serde(default)]
    f_star: Option<f64>,
}

fn d_local_steps() -> usize {
    DEFAULT_LOCAL_STEPS
}
fn d_learning_rate() -> f64 {
    DEFAULT_LEARNING_RATE
}
fn d_batch_size() -> usize {
    DEFAULT_BATCH_SIZE
}

// ---------------------------------------------------------------------------
// Validated configuration
// ---------------------------------------------------------------------------

/// Number of devices the uniform baseline selects per round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GroupSize {
    Fixed(f64),
    /// Match the adaptive policy's mean `Σq`, estimated over this many rounds.
    Estimate { rounds: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Policy {
    Lyapunov(LyapunovConfig),
    /// `reference` is the adaptive configuration the group size is matched to.
    Uniform { m: GroupSize, reference: LyapunovConfig },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DataSource {
    Synthetic {
        samples: usize,
        features: usize,
        classes: usize,
        heterogeneity: f64,
        separation: f64,
    },
    Csv { path: PathBuf, partition: PartitionMode },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadConfig {
    pub model: ModelKind,
    pub hidden: usize,
    pub l2: f64,
    pub data: DataSource,
    pub test_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsConfig {
    /// Evaluate loss/accuracy every this many rounds; skipped rounds repeat
    /// the latest value. The final round is always evaluated.
    pub eval_every: usize,
    pub window: usize,
    /// Store per-device queue backlogs every this many rounds (0 = never).
    pub queue_snapshot_every: usize,
    pub track_grad_norm: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsConfig {
    pub smoothness: f64,
    pub grad_bound: f64,
    /// Defaults to the best training loss seen.
    pub f_star: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub fed: FedConfig,
    /// `payload_bits` is `None` until resolved against the model dimension.
    pub channel: ChannelConfig,
    pub payload_bits: Option<f64>,
    pub policy: Policy,
    pub workload: WorkloadConfig,
    pub metrics: MetricsConfig,
    pub diagnostics: Option<DiagnosticsConfig>,
}

impl RunConfig {
    /// Channel parameters with `ℓ = 32·d` filled in when no payload was given.
    pub fn resolved_channel(&self, model_dim: usize) -> ChannelConfig {
        let mut channel = self.channel.clone();
        channel.payload_bits = self
            .payload_bits
            .unwrap_or(32.0 * model_dim.max(1) as f64);
        channel
    }

    pub fn lyapunov(&self) -> LyapunovConfig {
        match self.policy {
            Policy::Lyapunov(c) => c,
            Policy::Uniform { reference, .. } => reference,
        }
    }
}

fn check(ok: bool, key: &str, message: impl Into<String>) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(key, message))
    }
}

fn positive(v: f64, key: &str) -> Result<()> {
    check(v > 0.0 && v.is_finite(), key, format!("must be positive and finite, got {v}"))
}

impl RawConfig {
    fn validate(self, base_dir: &Path) -> Result<RunConfig> {
        let f = &self.federated;
        check(f.clients >= 1, "federated.clients", "must be at least 1")?;
        check(f.rounds >= 1, "federated.rounds", "must be at least 1")?;
        check(f.local_steps >= 1, "federated.local_steps", "must be at least 1")?;
        positive(f.learning_rate, "federated.learning_rate")?;
        check(f.batch_size >= 1, "federated.batch_size", "must be at least 1")?;
        let fed = FedConfig {
            clients: f.clients,
            local_steps: f.local_steps,
            rounds: f.rounds,
            learning_rate: f.learning_rate,
            batch_size: f.batch_size,
            seed: self.seed.unwrap_or(DEFAULT_SEED),
        };

        let c = &self.channel;
        positive(c.bandwidth, "channel.bandwidth")?;
        positive(c.noise_power, "channel.noise_power")?;
        positive(c.p_max, "channel.p_max")?;
        positive(c.p_avg, "channel.p_avg")?;
        check(c.p_avg <= c.p_max, "channel.p_avg", "must not exceed channel.p_max")?;
        if let Some(bits) = c.payload_bits {
            positive(bits, "channel.payload_bits")?;
        }
        let sigma = match (&c.sigma, &c.sigma_profile) {
            (Some(_), Some(_)) => {
                return Err(Error::config(
                    "channel.sigma_profile",
                    "give either channel.sigma or channel.sigma_profile, not both",
                ))
            }
            (Some(s), None) => {
                positive(*s, "channel.sigma")?;
                vec![*s; fed.clients]
            }
            (None, None) => vec![1.0; fed.clients],
            (None, Some(groups)) => {
                let mut sigma = Vec::with_capacity(fed.clients);
                for g in groups {
                    positive(g.sigma, "channel.sigma_profile")?;
                    sigma.extend(std::iter::repeat_n(g.sigma, g.count));
                }
                check(
                    sigma.len() == fed.clients,
                    "channel.sigma_profile",
                    format!("counts sum to {}, expected {} clients", sigma.len(), fed.clients),
                )?;
                sigma
            }
        };
        let channel = ChannelConfig {
            p_avg: vec![c.p_avg; sigma.len()],
            sigma,
            noise_power: c.noise_power,
            bandwidth: c.bandwidth,
            payload_bits: c.payload_bits.unwrap_or(f64::NAN),
            p_max: c.p_max,
        };

        let p = &self.policy;
        positive(p.v, "policy.v")?;
        positive(p.lambda, "policy.lambda")?;
        check(p.q_min > 0.0 && p.q_min <= 1.0, "policy.q_min", "must lie in (0, 1]")?;
        let lyapunov = LyapunovConfig {
            v: p.v,
            lambda: p.lambda,
            q_min: p.q_min,
        };
        let policy = match p.kind {
            PolicyKind::Lyapunov => {
                check(p.m.is_none(), "policy.m", "only applies to kind = \"uniform\"")?;
                Policy::Lyapunov(lyapunov)
            }
            PolicyKind::Uniform => {
                let m = match p.m {
                    Some(m) => {
                        check(
                            m > 0.0 && m <= fed.clients as f64,
                            "policy.m",
                            format!("must lie in (0, {}], got {m}", fed.clients),
                        )?;
                        GroupSize::Fixed(m)
                    }
                    None => {
                        check(p.estimate_rounds >= 1, "policy.estimate_rounds", "must be at least 1")?;
                        GroupSize::Estimate {
                            rounds: p.estimate_rounds,
                        }
                    }
                };
                Policy::Uniform {
                    m,
                    reference: lyapunov,
                }
            }
        };

        let w = &self.workload;
        check(
            (0.0..1.0).contains(&w.test_fraction),
            "workload.test_fraction",
            "must lie in [0, 1)",
        )?;
        check(w.l2 >= 0.0 && w.l2.is_finite(), "workload.l2", "must be non-negative")?;
        if w.model == ModelKind::Mlp {
            check(w.hidden >= 1, "workload.hidden", "must be at least 1")?;
        }
        let data = match w.data {
            DataKind::Synthetic => {
                check(w.features >= 1, "workload.features", "must be at least 1")?;
                check(w.classes >= 1, "workload.classes", "must be at least 1")?;
                check(
                    w.samples >= fed.clients,
                    "workload.samples",
                    format!("{} samples cannot cover {} clients", w.samples, fed.clients),
                )?;
                check(
                    (0.0..=1.0).contains(&w.heterogeneity),
                    "workload.heterogeneity",
                    "must lie in [0, 1]",
                )?;
                positive(w.separation, "workload.separation")?;
                check(w.path.is_none(), "workload.path", "only applies to data = \"csv\"")?;
                DataSource::Synthetic {
                    samples: w.samples,
                    features: w.features,
                    classes: w.classes,
                    heterogeneity: w.heterogeneity,
                    separation: w.separation,
                }
            }
            DataKind::Csv => {
                let path = w
                    .path
                    .clone()
                    .ok_or_else(|| Error::config("workload.path", "required when data = \"csv\""))?;
                let path = if path.is_relative() { base_dir.join(path) } else { path };
                DataSource::Csv {
                    path,
                    partition: w.partition,
                }
            }
        };
        let workload = WorkloadConfig {
            model: w.model,
            hidden: w.hidden,
            l2: w.l2,
            data,
            test_fraction: w.test_fraction,
        };

        let m = &self.metrics;
        check(m.eval_every >= 1, "metrics.eval_every", "must be at least 1")?;
        check(m.window >= 1, "metrics.window", "must be at least 1")?;
        let metrics = MetricsConfig {
            eval_every: m.eval_every,
            window: m.window,
            queue_snapshot_every: m.queue_snapshot_every,
            track_grad_norm: m.track_grad_norm,
        };

        let diagnostics = match &self.diagnostics {
            Some(d) => {
                positive(d.smoothness, "diagnostics.smoothness")?;
                positive(d.grad_bound, "diagnostics.grad_bound")?;
                Some(DiagnosticsConfig {
                    smoothness: d.smoothness,
                    grad_bound: d.grad_bound,
                    f_star: d.f_star,
                })
            }
            None => None,
        };

        Ok(RunConfig {
            fed,
            payload_bits: c.payload_bits,
            channel,
            policy,
            workload,
            metrics,
            diagnostics,
        })
    }
}

/// Parse and validate a TOML document. Relative data paths resolve against
/// `base_dir`.
pub fn parse_config_str(text: &str, base_dir: &Path) -> Result<RunConfig> {
    let value: toml::Table = toml::from_str(text).map_err(|e| Error::config("<document>", e.message()))?;
    config_from_table(value, base_dir)
}

/// Validate an already-parsed TOML table.
pub fn config_from_table(table: toml::Table, base_dir: &Path) -> Result<RunConfig> {
    let raw: RawConfig = serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| {
        let key = e.path().to_string();
        Error::config(if key == "." { "<document>".into() } else { key }, e.into_inner().to_string())
    })?;
    raw.validate(base_dir)
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_config_str(&text, base)
}

/// Set a dotted key (`policy.v`) in a TOML table, creating tables on the way.
pub fn set_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| Error::config(key, "empty key"))?;
    let mut cursor = table;
    for part in parts {
        let entry = cursor
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cursor = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(key, format!("`{part}` is not a table")))?;
    }
    cursor.insert(last.to_string(), value);
    Ok(())
}

/// Interpret a command-line value as TOML (`1e3`, `true`, `"iid"`), falling
/// back to a bare string.
pub fn parse_value(text: &str) -> toml::Value {
    let wrapped = format!("v = {text}");
    toml::from_str::<toml::Table>(&wrapped)
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(text.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[federated]\nclients = 4\nrounds = 3\n";

    fn parse(text: &str) -> Result<RunConfig> {
        parse_config_str(text, Path::new("."))
    }

    fn key_of(err: Error) -> String {
        match err {
            Error::Config { key, .. } => key,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_defaults() {
        let cfg = parse(MINIMAL).unwrap();
        assert_eq!(cfg.fed.local_steps, 10);
        assert_eq!(cfg.fed.learning_rate, 0.01);
        assert_eq!(cfg.fed.batch_size, 32);
        assert_eq!(cfg.metrics.window, 500);
        assert_eq!(cfg.lyapunov().v, 1000.0);
        assert_eq!(cfg.channel.bandwidth, 22e6);
        assert_eq!(cfg.channel.p_max, 100.0);
        assert_eq!(cfg.channel.p_avg, vec![1.0; 4]);
        assert!(matches!(cfg.policy, Policy::Lyapunov(_)));
        assert_eq!(cfg.payload_bits, None);
        assert_eq!(cfg.resolved_channel(10).payload_bits, 320.0);
    }

    #[test]
    fn negative_lambda_names_key() {
        let err = parse(&format!("{MINIMAL}[policy]\nlambda = -1.0\n")).unwrap_err();
        assert_eq!(key_of(err), "policy.lambda");
    }

    #[test]
    fn unknown_key_rejected() {
        let err = parse(&format!("{MINIMAL}[policy]\nlamda = 10.0\n")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("lamda"), "{msg}");
        let err = parse(&format!("{MINIMAL}bogus = 1\n")).unwrap_err();
        assert!(err.to_string().contains("bogus"));
    }

    #[test]
    fn missing_required_key_named() {
        let err = parse("[federated]\nclients = 4\n").unwrap_err();
        assert!(err.to_string().contains("rounds"), "{err}");
    }

    #[test]
    fn type_mismatch_names_key() {
        let err = parse("[federated]\nclients = 4\nrounds = \"many\"\n").unwrap_err();
        assert_eq!(key_of(err), "federated.rounds");
    }

    #[test]
    fn sigma_profile_must_match_clients() {
        let text = "[federated]\nclients = 10\nrounds = 1\n[channel]\nsigma_profile = [{count = 1, sigma = 0.2}, {count = 4, sigma = 0.75}, {count = 5, sigma = 1.2}]\n";
        let cfg = parse(text).unwrap();
        assert_eq!(cfg.channel.sigma[0], 0.2);
        assert_eq!(cfg.channel.sigma[9], 1.2);
        let bad = text.replace("count = 5", "count = 4");
        assert_eq!(key_of(parse(&bad).unwrap_err()), "channel.sigma_profile");
    }

    #[test]
    fn uniform_policy_variants() {
        let cfg = parse(&format!("{MINIMAL}[policy]\nkind = \"uniform\"\nm = 2.5\n")).unwrap();
        assert!(matches!(cfg.policy, Policy::Uniform { m: GroupSize::Fixed(m), .. } if m == 2.5));
        let cfg = parse(&format!("{MINIMAL}[policy]\nkind = \"uniform\"\n")).unwrap();
        assert!(matches!(cfg.policy, Policy::Uniform { m: GroupSize::Estimate { rounds: 2000 }, .. }));
        let err = parse(&format!("{MINIMAL}[policy]\nkind = \"uniform\"\nm = 9.0\n")).unwrap_err();
        assert_eq!(key_of(err), "policy.m");
    }

    #[test]
    fn p_avg_above_peak_rejected() {
        let err = parse(&format!("{MINIMAL}[channel]\np_avg = 200.0\n")).unwrap_err();
        assert_eq!(key_of(err), "channel.p_avg");
    }

    #[test]
    fn dotted_override() {
        let mut table: toml::Table = toml::from_str(MINIMAL).unwrap();
        set_dotted(&mut table, "policy.v", parse_value("1e5")).unwrap();
        set_dotted(&mut table, "workload.partition", parse_value("by-label-shard")).unwrap();
        let cfg = config_from_table(table, Path::new(".")).unwrap();
        assert_eq!(cfg.lyapunov().v, 1e5);
        assert_eq!(parse_value("3"), toml::Value::Integer(3));
        assert_eq!(parse_value("true"), toml::Value::Boolean(true));
    }
}
