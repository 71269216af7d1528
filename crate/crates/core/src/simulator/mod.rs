//! The round loop: channel draws, scheduling, local training over the
//! selected devices, serial (TDMA) uplink timing, aggregation and metrics.
//!
//! Rounds are sequential. Inside a round, local updates run in parallel, but
//! every client draws from its own seeded stream and results are combined
//! in client order, so output depends only on the configuration and seed.

pub mod metrics;

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use crate::channel::{sample_gain, ChannelConfig};
use crate::config::{DataSource, GroupSize, ModelKind, Policy, RunConfig};
use crate::data::{
    generate_synthetic, load_csv_dataset, CsvSchema, FederatedDataset, PartitionMode, Sample,
    SyntheticSpec,
};
use crate::error::{Error, Result};
use crate::model::{
    aggregate, local_update, AnyModel, Client, ClientObjective, Model, ParamVector, Quadratic,
    SoftmaxRegression, TwoLayerNet,
};
use crate::rng::{device_streams, stream, Purpose};
use crate::scheduler::{estimate_mean_selected, uniform_baseline, LyapunovScheduler, ScheduleDecision};

pub use metrics::{
    constraint_convergence_trace, moving_average, round_to_target, settling_round, time_to_target,
    Metric,
};

/// Metrics emitted after each round's aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub t: usize,
    /// `f(x_{t+1})`; NaN when the run trains nothing.
    pub train_loss: f64,
    /// Holdout accuracy (training accuracy if there is no holdout); NaN for
    /// non-classifiers.
    pub test_accuracy: f64,
    pub round_comm_time_s: f64,
    pub cumulative_comm_time_s: f64,
    pub selected_count: usize,
    /// `(1/N)·Σₙ 1/qₙᵗ` for this round.
    pub sum_inv_q: f64,
    /// No device was sampled and the largest-`q` device was forced in.
    pub forced_selection: bool,
    pub queue_snapshot: Option<Vec<f64>>,
    /// Per device, `(1/(t+1))·Σ_{τ≤t} Pₙ(τ)·qₙ^τ`.
    pub mean_power: Vec<f64>,
    /// `‖∇f(x_{t+1})‖²` when tracking is enabled.
    pub grad_norm_sq: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<RoundRecord>,
    /// `f(x₀)`; NaN when the run trains nothing.
    pub initial_loss: f64,
    /// Group size used by the uniform baseline, if that policy ran.
    pub uniform_m: Option<f64>,
    /// Channel parameters with the payload size resolved.
    pub channel: ChannelConfig,
    pub model_dim: usize,
}

impl RunOutput {
    pub fn forced_rounds(&self) -> usize {
        self.records.iter().filter(|r| r.forced_selection).count()
    }
}

struct Workload {
    model: Arc<AnyModel>,
    data: FederatedDataset,
}

impl Workload {
    fn build(config: &RunConfig) -> Result<Option<Self>> {
        let w = &config.workload;
        if w.model == ModelKind::None {
            return Ok(None);
        }
        let clients = config.fed.clients;
        let seed = config.fed.seed;
        let data = match &w.data {
            DataSource::Synthetic {
                samples,
                features,
                classes,
                heterogeneity,
                separation,
            } => {
                let spec = SyntheticSpec {
                    samples: *samples,
                    dim: *features,
                    classes: *classes,
                    clients,
                    heterogeneity: *heterogeneity,
                    separation: *separation,
                    test_fraction: w.test_fraction,
                };
                generate_synthetic(&spec, seed)?
            }
            DataSource::Csv { path, partition } => {
                let data = load_csv_dataset(
                    path,
                    &CsvSchema {
                        mode: *partition,
                        clients,
                        test_fraction: w.test_fraction,
                        seed,
                    },
                )?;
                if *partition == PartitionMode::BySource && data.num_clients() != clients {
                    return Err(Error::config(
                        "federated.clients",
                        format!("{} has {} sources, expected {clients}", path.display(), data.num_clients()),
                    ));
                }
                data
            }
        };
        let model = match w.model {
            ModelKind::Quadratic => AnyModel::Quadratic(Quadratic { dim: data.dim }),
            ModelKind::Logistic => AnyModel::Logistic(SoftmaxRegression {
                features: data.dim,
                classes: data.classes,
                l2: w.l2,
            }),
            ModelKind::Mlp => AnyModel::Mlp(TwoLayerNet {
                features: data.dim,
                hidden: w.hidden,
                classes: data.classes,
            }),
            ModelKind::None => unreachable!(),
        };
        Ok(Some(Self {
            model: Arc::new(model),
            data,
        }))
    }

    /// `f(x) = (1/N)·Σₙ fₙ(x)` and optionally `∇f(x)`.
    fn global_loss(&self, clients: &[Client], x: &[f64], with_grad: bool) -> (f64, Option<f64>) {
        let parts: Vec<(f64, Option<Vec<f64>>)> = clients
            .par_iter()
            .map(|c| {
                if with_grad {
                    let mut g = vec![0.0; x.len()];
                    let l = c.objective.full_gradient(x, &mut g);
                    (l, Some(g))
                } else {
                    (c.objective.loss(x), None)
                }
            })
            .collect();
        let n = parts.len() as f64;
        let loss = parts.iter().map(|p| p.0).sum::<f64>() / n;
        let grad_norm_sq = with_grad.then(|| {
            let mut g = vec![0.0; x.len()];
            for (_, part) in &parts {
                for (a, b) in g.iter_mut().zip(part.as_ref().unwrap()) {
                    *a += b / n;
                }
            }
            g.iter().map(|v| v * v).sum()
        });
        (loss, grad_norm_sq)
    }

    fn accuracy(&self, x: &[f64]) -> f64 {
        let pool: Vec<&Sample> = if self.data.test.is_empty() {
            self.data.clients.iter().flatten().collect()
        } else {
            self.data.test.iter().collect()
        };
        let hits: Vec<Option<bool>> = pool
            .par_iter()
            .map(|s| self.model.predict(x, &s.features).map(|p| p == s.label))
            .collect();
        if hits.iter().any(Option::is_none) || hits.is_empty() {
            return f64::NAN;
        }
        hits.iter().filter(|h| **h == Some(true)).count() as f64 / hits.len() as f64
    }
}

enum Scheduler {
    Lyapunov(LyapunovScheduler),
    Uniform { m: f64 },
}

/// Channel parameters for `config`, building the workload only when the
/// payload has to be derived from the model size.
pub fn channel_for(config: &RunConfig) -> Result<ChannelConfig> {
    let dim = match config.payload_bits {
        Some(_) => 0,
        None => Workload::build(config)?.map_or(0, |w| w.model.dim()),
    };
    let channel = config.resolved_channel(dim);
    channel.validate()?;
    Ok(channel)
}

/// Simulate `config.fed.rounds` rounds.
pub fn run(config: &RunConfig) -> Result<RunOutput> {
    config.fed.validate()?;
    let devices = config.fed.clients;
    let seed = config.fed.seed;

    let workload = Workload::build(config)?;
    let model_dim = workload.as_ref().map_or(0, |w| w.model.dim());
    let channel = config.resolved_channel(model_dim);
    channel.validate()?;
    if channel.devices() != devices {
        return Err(Error::config(
            "channel.sigma_profile",
            format!("{} channel profiles for {devices} clients", channel.devices()),
        ));
    }

    let mut scheduler = match config.policy {
        Policy::Lyapunov(c) => Scheduler::Lyapunov(LyapunovScheduler::new(&c, &channel)?),
        Policy::Uniform { m, reference } => {
            let m = match m {
                GroupSize::Fixed(m) => m,
                GroupSize::Estimate { rounds } => {
                    let m = estimate_mean_selected(&reference, &channel, rounds, seed)?;
                    log::info!("estimated uniform group size M = {m:.4}");
                    m
                }
            };
            Scheduler::Uniform { m }
        }
    };
    let uniform_m = match scheduler {
        Scheduler::Uniform { m } => Some(m),
        Scheduler::Lyapunov(_) => None,
    };

    let mut clients: Vec<Client> = match &workload {
        Some(w) => {
            let data = w.data.clients.iter();
            data.zip(device_streams(seed, Purpose::Minibatch, devices))
                .enumerate()
                .map(|(n, (samples, rng))| {
                    Client::new(
                        ClientObjective {
                            id: n,
                            model: Arc::clone(&w.model),
                            data: Arc::new(samples.clone()),
                            batch_size: config.fed.batch_size,
                        },
                        rng,
                    )
                })
                .collect()
        }
        None => Vec::new(),
    };

    let mut x = match &workload {
        Some(w) => w.model.init(&mut stream(seed, Purpose::ModelInit, 0)),
        None => ParamVector::zeros(0),
    };
    let track_grad = config.metrics.track_grad_norm;
    let initial_loss = workload
        .as_ref()
        .map_or(f64::NAN, |w| w.global_loss(&clients, &x, false).0);

    let mut channel_rngs = device_streams(seed, Purpose::Channel, devices);
    let mut selection_rngs = device_streams(seed, Purpose::Selection, devices);
    let mut baseline_rng = stream(seed, Purpose::Baseline, 0);
    let mut forced_rng = stream(seed, Purpose::Forced, 0);

    let rounds = config.fed.rounds;
    let mut records = Vec::with_capacity(rounds);
    let mut power_sums = vec![0.0; devices];
    let mut cumulative = 0.0;
    let mut last_eval = (initial_loss, f64::NAN, None);
    let mut gains = vec![0.0; devices];

    for t in 0..rounds {
        for (n, rng) in channel_rngs.iter_mut().enumerate() {
            gains[n] = sample_gain(&channel, n, t, rng).gain;
        }
        let mut decisions: Vec<ScheduleDecision> = match &scheduler {
            Scheduler::Lyapunov(s) => s.decide_round(t, &gains, &mut selection_rngs),
            Scheduler::Uniform { m } => {
                uniform_baseline(t, *m, &channel.p_avg, channel.p_max, &mut baseline_rng)
                    .map_err(|e| e.in_round(t))?
            }
        };

        let forced = !decisions.iter().any(|d| d.selected);
        if forced {
            let top = decisions.iter().map(|d| d.q).fold(f64::NEG_INFINITY, f64::max);
            let ties: Vec<usize> = decisions
                .iter()
                .filter(|d| d.q == top)
                .map(|d| d.device)
                .collect();
            let pick = ties[forced_rng.random_range(0..ties.len())];
            decisions[pick].selected = true;
            log::debug!("round {t}: no device sampled, forcing device {pick}");
        }

        let mut round_time = 0.0;
        for d in decisions.iter().filter(|d| d.selected) {
            if !(d.p > 0.0) {
                return Err(Error::ZeroPowerTransmission { device: d.device }.in_round(t));
            }
            round_time += channel
                .tx_time_seconds(gains[d.device], d.p)
                .map_err(|e| e.in_round(t))?;
        }
        cumulative += round_time;

        let probs: Vec<f64> = decisions.iter().map(|d| d.q).collect();
        if let Some(w) = &workload {
            let lr = config.fed.learning_rate;
            let steps = config.fed.local_steps;
            let deltas: Vec<Option<ParamVector>> = clients
                .par_iter_mut()
                .zip(&decisions)
                .map(|(client, d)| {
                    d.selected
                        .then(|| local_update(&x, client, d.device, steps, lr))
                        .transpose()
                })
                .collect::<Result<_>>()
                .map_err(|e| e.in_round(t))?;
            x = aggregate(&x, &deltas, &probs).map_err(|e| e.in_round(t))?;
            if !x.is_finite() {
                return Err(Error::invalid("learning_rate", "global model diverged to non-finite values").in_round(t));
            }
            if t % config.metrics.eval_every == 0 || t + 1 == rounds {
                let (loss, g) = w.global_loss(&clients, &x, track_grad);
                last_eval = (loss, w.accuracy(&x), g);
            }
        }

        if let Scheduler::Lyapunov(s) = &mut scheduler {
            s.commit(&decisions);
        }
        for d in &decisions {
            power_sums[d.device] += d.p * d.q;
        }
        let elapsed = (t + 1) as f64;
        let snapshot_every = config.metrics.queue_snapshot_every;
        let queue_snapshot = match &scheduler {
            Scheduler::Lyapunov(s) if snapshot_every > 0 && t % snapshot_every == 0 => {
                Some(s.queues().as_slice().to_vec())
            }
            _ => None,
        };

        records.push(RoundRecord {
            t,
            train_loss: last_eval.0,
            test_accuracy: last_eval.1,
            round_comm_time_s: round_time,
            cumulative_comm_time_s: cumulative,
            selected_count: decisions.iter().filter(|d| d.selected).count(),
            sum_inv_q: probs.iter().map(|q| 1.0 / q).sum::<f64>() / devices as f64,
            forced_selection: forced,
            queue_snapshot,
            mean_power: power_sums.iter().map(|s| s / elapsed).collect(),
            grad_norm_sq: last_eval.2,
        });
    }

    Ok(RunOutput {
        records,
        initial_loss,
        uniform_m,
        channel,
        model_dim,
    })
}
