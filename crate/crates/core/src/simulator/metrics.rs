//! Post-processing of round records.

use super::RoundRecord;

/// Trailing mean over the last `min(window, t + 1)` points.
pub fn moving_average(series: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(series.len());
    let mut sum = 0.0;
    for (t, &v) in series.iter().enumerate() {
        sum += v;
        if t >= window {
            sum -= series[t - window];
        }
        out.push(sum / (t + 1).min(window) as f64);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// Reached once the smoothed accuracy is at or above the target.
    TestAccuracy,
    /// Reached once the smoothed loss is at or below the target.
    TrainLoss,
}

/// Cumulative communication time at the first round where the smoothed
/// metric reaches `target`.
pub fn time_to_target(records: &[RoundRecord], metric: Metric, target: f64, window: usize) -> Option<f64> {
    round_to_target(records, metric, target, window).map(|t| records[t].cumulative_comm_time_s)
}

/// Index of the first record where the smoothed metric reaches `target`.
pub fn round_to_target(records: &[RoundRecord], metric: Metric, target: f64, window: usize) -> Option<usize> {
    let raw: Vec<f64> = records
        .iter()
        .map(|r| match metric {
            Metric::TestAccuracy => r.test_accuracy,
            Metric::TrainLoss => r.train_loss,
        })
        .collect();
    moving_average(&raw, window)
        .iter()
        .position(|&v| match metric {
            Metric::TestAccuracy => v >= target,
            Metric::TrainLoss => v <= target,
        })
}

/// Running time-average of `P·q` for device `n`, one value per round.
pub fn constraint_convergence_trace(records: &[RoundRecord], n: usize) -> Vec<f64> {
    records.iter().map(|r| r.mean_power[n]).collect()
}

/// First round from which `trace` stays inside `[lo, hi]` to the end.
pub fn settling_round(trace: &[f64], lo: f64, hi: f64) -> Option<usize> {
    let mut start = None;
    for (t, &v) in trace.iter().enumerate() {
        if (lo..=hi).contains(&v) {
            start.get_or_insert(t);
        } else {
            start = None;
        }
    }
    start
}
