//! Per-round drift-plus-penalty minimization.
//!
//! For device `n` with gain `g = |hₙ(t)|²` and queue backlog `Z`, each round
//! minimizes over `q ∈ [q_min, 1]`, `P ∈ (0, P_max]`
//!
//! ```text
//! f(q, P) = V·( 1/(N·q) + λ·ℓ·q / (B·log₂(1 + g·P/N₀)) ) + Z·(P·q − P̄)
//! ```
//!
//! `∂f/∂P = q·(Z − V·λ·ℓ·g·ln2 / (N₀·B·x·ln²x))` with `x = 1 + g·P/N₀`, so the
//! stationary power solves `x·ln²x = A`, `A = V·λ·ℓ·g·ln2 / (N₀·B·Z)`, which
//! is `x = exp(2·W₀(√(A/4)))` and does not depend on `q`. For fixed `q` the
//! objective is strictly convex in `P`; for fixed `P` it is strictly convex
//! in `q`. The box minimum is therefore the stationary `P` clipped to
//! `P_max`, paired with the stationary `q` for that power clipped to
//! `[q_min, 1]`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{queue::VirtualQueues, ScheduleDecision};
use crate::channel::{capacity, sample_gain, ChannelConfig};
use crate::error::{Error, Result};
use crate::lambertw::lambert_w0;
use crate::rng::{device_streams, Purpose, StreamRng};

use std::f64::consts::LN_2;

pub const DEFAULT_V: f64 = 1000.0;
pub const DEFAULT_Q_MIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovConfig {
    /// Drift-penalty weight `V`.
    pub v: f64,
    /// Convergence-bound vs. airtime weight `λ`.
    pub lambda: f64,
    /// Floor on selection probabilities.
    pub q_min: f64,
}

impl LyapunovConfig {
    pub fn new(v: f64, lambda: f64) -> Self {
        Self {
            v,
            lambda,
            q_min: DEFAULT_Q_MIN,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v > 0.0 && self.v.is_finite()) {
            return Err(Error::invalid("v", format!("must be positive, got {}", self.v)));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(
                "lambda",
                format!("must be positive, got {}", self.lambda),
            ));
        }
        if !(self.q_min > 0.0 && self.q_min <= 1.0) {
            return Err(Error::invalid(
                "q_min",
                format!("must lie in (0, 1], got {}", self.q_min),
            ));
        }
        Ok(())
    }

    /// The scalar problem device `n` solves each round.
    pub fn device_problem(&self, channel: &ChannelConfig, n: usize) -> DeviceProblem {
        DeviceProblem {
            devices: channel.devices() as f64,
            v: self.v,
            lambda: self.lambda,
            q_min: self.q_min,
            payload_bits: channel.payload_bits,
            bandwidth: channel.bandwidth,
            noise_power: channel.noise_power,
            p_max: channel.p_max,
            p_avg: channel.p_avg[n],
        }
    }
}

/// Everything device `n` needs to pick `(q, P)` for one round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceProblem {
    /// `N`, as a float.
    pub devices: f64,
    pub v: f64,
    pub lambda: f64,
    pub q_min: f64,
    pub payload_bits: f64,
    pub bandwidth: f64,
    pub noise_power: f64,
    pub p_max: f64,
    pub p_avg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolutionKind {
    /// Both partial derivatives vanish.
    Interior,
    /// Stationary power, probability pinned at a bound of `[q_min, 1]`.
    PowerStationary,
    /// Peak power with the best probability for it.
    PeakPower,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Solution {
    pub q: f64,
    pub p: f64,
    pub objective: f64,
    pub kind: SolutionKind,
}

impl DeviceProblem {
    fn capacity(&self, gain: f64, p: f64) -> f64 {
        capacity(self.bandwidth, self.noise_power, gain, p)
    }

    fn objective_unchecked(&self, q: f64, p: f64, gain: f64, z: f64) -> f64 {
        let convergence = 1.0 / (self.devices * q);
        let airtime = self.lambda * self.payload_bits * q / self.capacity(gain, p);
        self.v * (convergence + airtime) + z * (p * q - self.p_avg)
    }

    /// `V·(1/(Nq) + λℓq/capacity) + Z·(Pq − P̄)`.
    pub fn objective(&self, q: f64, p: f64, gain: f64, z: f64) -> Result<f64> {
        if !(q > 0.0 && q <= 1.0) {
            return Err(Error::invalid("q", format!("must lie in (0, 1], got {q}")));
        }
        if !(p > 0.0 && p <= self.p_max) {
            return Err(Error::invalid(
                "P",
                format!("must lie in (0, {}], got {p}", self.p_max),
            ));
        }
        Ok(self.objective_unchecked(q, p, gain, z))
    }

    /// Analytic `(∂f/∂q, ∂f/∂P)`.
    pub fn gradient(&self, q: f64, p: f64, gain: f64, z: f64) -> [f64; 2] {
        let snr_slope = gain / self.noise_power;
        let x = 1.0 + snr_slope * p;
        let s = (snr_slope * p).ln_1p();
        let k = self.v * self.lambda * self.payload_bits / self.bandwidth;
        let dq = -self.v / (self.devices * q * q) + k * LN_2 / s + z * p;
        let dp = q * (z - k * LN_2 * snr_slope / (x * s * s));
        [dq, dp]
    }

    /// Analytic Hessian `[[f_qq, f_qP], [f_Pq, f_PP]]`.
    pub fn hessian(&self, q: f64, p: f64, gain: f64, z: f64) -> [[f64; 2]; 2] {
        let a = gain / self.noise_power;
        let x = 1.0 + a * p;
        let s = (a * p).ln_1p();
        let k = self.v * self.lambda * self.payload_bits / self.bandwidth;
        let f_qq = 2.0 * self.v / (self.devices * q * q * q);
        let f_qp = z - k * LN_2 * a / (x * s * s);
        let f_pp = q * k * LN_2 * a * a * (s + 2.0) / (x * x * s * s * s);
        [[f_qq, f_qp], [f_qp, f_pp]]
    }

    /// `A = V·λ·ℓ·g·ln2 / (N₀·B·Z)`.
    pub fn lambert_argument(&self, gain: f64, z: f64) -> f64 {
        self.v * self.lambda * self.payload_bits * gain * LN_2
            / (self.noise_power * self.bandwidth * z)
    }

    /// Stationary power in `P`, independent of `q`.
    ///
    /// Returns `None` when there is no interior critical point: an empty
    /// queue makes the objective strictly decreasing in `P`, so the caller
    /// should use `P_max`. The value may exceed `P_max`.
    pub fn optimal_power(&self, gain: f64, z: f64) -> Option<f64> {
        if !(z > 0.0 && gain > 0.0) {
            return None;
        }
        let a = self.lambert_argument(gain, z);
        if !a.is_finite() {
            return None;
        }
        let w = lambert_w0((a / 4.0).sqrt()).ok()?.w;
        // N₀/g·((A/4)·W⁻² − 1) == N₀/g·(e^{2W} − 1), the latter without cancellation.
        Some(self.noise_power / gain * (2.0 * w).exp_m1())
    }

    /// Unclamped stationary probability for power `p`:
    /// `(λℓN/capacity + (N/V)·Z·P)^{-1/2}`.
    pub fn optimal_q(&self, gain: f64, p: f64, z: f64) -> Result<f64> {
        if !(p > 0.0) {
            return Err(Error::invalid("P", format!("must be positive, got {p}")));
        }
        let inner = self.lambda * self.payload_bits * self.devices / self.capacity(gain, p)
            + self.devices / self.v * z * p;
        Ok(inner.sqrt().recip())
    }

    fn clamp_q(&self, q: f64) -> f64 {
        if q.is_nan() {
            return self.q_min;
        }
        q.clamp(self.q_min, 1.0)
    }

    fn is_positive_definite(h: [[f64; 2]; 2]) -> bool {
        let [[a, b], [_, d]] = h;
        // a·d − b² > 0 with the b² term bounded relative to a·d.
        a > 0.0 && d > 0.0 && b * b < a * d * (1.0 - 1e-12)
    }

    /// Deterministic part of a decision: the minimizing `(q, P)`.
    pub fn solve(&self, gain: f64, z: f64) -> Solution {
        let q_peak = self.clamp_q(
            self.optimal_q(gain, self.p_max, z)
                .expect("p_max is positive"),
        );
        let mut best = Solution {
            q: q_peak,
            p: self.p_max,
            objective: self.objective_unchecked(q_peak, self.p_max, gain, z),
            kind: SolutionKind::PeakPower,
        };

        let Some(p_opt) = self.optimal_power(gain, z) else {
            return best;
        };
        if !(p_opt > 0.0 && p_opt <= self.p_max) {
            return best;
        }
        let Ok(q_opt) = self.optimal_q(gain, p_opt, z) else {
            return best;
        };
        let candidate = if q_opt >= self.q_min
            && q_opt <= 1.0
            && Self::is_positive_definite(self.hessian(q_opt, p_opt, gain, z))
        {
            Solution {
                q: q_opt,
                p: p_opt,
                objective: self.objective_unchecked(q_opt, p_opt, gain, z),
                kind: SolutionKind::Interior,
            }
        } else {
            let q = self.clamp_q(q_opt);
            Solution {
                q,
                p: p_opt,
                objective: self.objective_unchecked(q, p_opt, gain, z),
                kind: SolutionKind::PowerStationary,
            }
        };
        if candidate.objective < best.objective {
            best = candidate;
        }
        best
    }

    /// Solve, then draw the Bernoulli(q) participation indicator.
    pub fn decide<R: Rng + ?Sized>(
        &self,
        device: usize,
        round: usize,
        gain: f64,
        z: f64,
        rng: &mut R,
    ) -> ScheduleDecision {
        let s = self.solve(gain, z);
        ScheduleDecision {
            device,
            round,
            q: s.q,
            p: s.p,
            selected: rng.random_bool(s.q),
            objective_value: Some(s.objective),
        }
    }
}

/// Runs the scheduler over all devices and owns the virtual queues.
#[derive(Debug, Clone)]
pub struct LyapunovScheduler {
    problems: Vec<DeviceProblem>,
    queues: VirtualQueues,
}

impl LyapunovScheduler {
    pub fn new(config: &LyapunovConfig, channel: &ChannelConfig) -> Result<Self> {
        config.validate()?;
        channel.validate()?;
        let problems = (0..channel.devices())
            .map(|n| config.device_problem(channel, n))
            .collect();
        Ok(Self {
            problems,
            queues: VirtualQueues::new(channel.devices()),
        })
    }

    pub fn queues(&self) -> &VirtualQueues {
        &self.queues
    }

    pub fn problem(&self, n: usize) -> &DeviceProblem {
        &self.problems[n]
    }

    /// One decision per device from the current backlogs.
    pub fn decide_round(
        &self,
        round: usize,
        gains: &[f64],
        selection_rngs: &mut [StreamRng],
    ) -> Vec<ScheduleDecision> {
        self.problems
            .iter()
            .zip(gains)
            .zip(selection_rngs.iter_mut())
            .enumerate()
            .map(|(n, ((problem, &gain), rng))| {
                problem.decide(n, round, gain, self.queues.get(n), rng)
            })
            .collect()
    }

    /// End-of-round queue update from the scheduled `(P, q)`.
    pub fn commit(&mut self, decisions: &[ScheduleDecision]) {
        for d in decisions {
            let p_avg = self.problems[d.device].p_avg;
            self.queues.update(d.device, d.p, d.q, p_avg);
        }
    }
}

/// Mean of `Σₙ qₙᵗ` over `rounds` closed-loop scheduler rounds with fresh
/// channel draws. Used to size the matched uniform baseline.
pub fn estimate_mean_selected(
    config: &LyapunovConfig,
    channel: &ChannelConfig,
    rounds: usize,
    seed: u64,
) -> Result<f64> {
    if rounds == 0 {
        return Err(Error::invalid("rounds", "need at least one round"));
    }
    let mut scheduler = LyapunovScheduler::new(config, channel)?;
    let devices = channel.devices();
    let mut channel_rngs = device_streams(seed, Purpose::Channel, devices);
    let mut selection_rngs = device_streams(seed, Purpose::Selection, devices);
    let mut gains = vec![0.0; devices];
    let mut total = 0.0;
    for t in 0..rounds {
        for (n, rng) in channel_rngs.iter_mut().enumerate() {
            gains[n] = sample_gain(channel, n, t, rng).gain;
        }
        let decisions = scheduler.decide_round(t, &gains, &mut selection_rngs);
        total += decisions.iter().map(|d| d.q).sum::<f64>();
        scheduler.commit(&decisions);
    }
    Ok(total / rounds as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;

    fn wifi(devices: usize) -> ChannelConfig {
        ChannelConfig::homogeneous(devices, 1.0, 1.0, 22e6, 32.0 * 1e4, 100.0, 1.0)
    }

    fn problem(v: f64, lambda: f64) -> DeviceProblem {
        LyapunovConfig::new(v, lambda).device_problem(&wifi(100), 0)
    }

    /// Written out independently of `objective_unchecked`.
    fn objective_oracle(p: &DeviceProblem, q: f64, pw: f64, gain: f64, z: f64) -> f64 {
        let rate = p.bandwidth * (1.0 + gain * pw / p.noise_power).log2();
        p.v / (p.devices * q) + p.v * p.lambda * p.payload_bits * q / rate
            + z * pw * q
            - z * p.p_avg
    }

    /// Five-point central difference.
    fn derivative(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
    }

    #[test]
    fn objective_rejects_out_of_domain() {
        let p = problem(1000.0, 10.0);
        assert!(p.objective(0.0, 1.0, 1.0, 0.0).is_err());
        assert!(p.objective(0.5, 0.0, 1.0, 0.0).is_err());
        assert!(p.objective(1.5, 1.0, 1.0, 0.0).is_err());
        assert!(p.objective(0.5, 101.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn objective_at_threshold_snr() {
        let p = problem(1000.0, 10.0);
        let spectral = p.lambda * p.payload_bits * p.devices / p.bandwidth;
        let gain = spectral.exp2() - 1.0;
        let expected = p.v * (1.0 / p.devices + p.lambda * p.payload_bits / (p.bandwidth * spectral));
        let got = p.objective(1.0, 1.0, gain, 0.0).unwrap();
        assert!((got - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn objective_homogeneous_in_v_without_backlog() {
        let a = problem(10.0, 10.0).objective(0.3, 5.0, 2.0, 0.0).unwrap();
        let b = problem(20.0, 10.0).objective(0.3, 5.0, 2.0, 0.0).unwrap();
        assert!((b - 2.0 * a).abs() <= 1e-12 * b);
    }

    #[test]
    fn power_for_a_equal_four() {
        // With A = 4 the Lambert argument is 1 and W₀(1) is the omega constant.
        let p = problem(1000.0, 10.0);
        let gain = 2.0;
        let z = p.v * p.lambda * p.payload_bits * gain * LN_2 / (p.noise_power * p.bandwidth * 4.0);
        assert!((p.lambert_argument(gain, z) - 4.0).abs() < 1e-12);
        let omega = 0.567_143_290_409_783_8_f64;
        let expected = p.noise_power / gain * (omega.powi(-2) - 1.0);
        let got = p.optimal_power(gain, z).unwrap();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
        assert!((got * gain - 2.108_954_763_58).abs() < 1e-9);
    }

    #[test]
    fn optimal_power_matches_lambert_form() {
        let p = problem(1000.0, 100.0);
        for &(gain, z) in &[(0.5, 3.0), (10.0, 0.2), (1000.0, 50.0), (0.004, 90.0)] {
            let a = p.lambert_argument(gain, z);
            let w = lambert_w0((a / 4.0).sqrt()).unwrap().w;
            let literal = p.noise_power / gain * (a / 4.0 / (w * w) - 1.0);
            let got = p.optimal_power(gain, z).unwrap();
            assert!((got - literal).abs() <= 1e-9 * literal.abs().max(1e-6));
        }
    }

    #[test]
    fn no_interior_power_without_backlog() {
        assert!(problem(1000.0, 10.0).optimal_power(2.0, 0.0).is_none());
    }

    #[test]
    fn power_stationary_by_finite_differences() {
        let p = problem(1000.0, 10.0);
        for &(gain, z, q) in &[(0.5, 3.0, 0.4), (10.0, 0.2, 0.9), (2.0, 50.0, 0.05)] {
            let p_opt = p.optimal_power(gain, z).unwrap();
            let h = 1e-4 * p_opt;
            let d = derivative(|x| objective_oracle(&p, q, x, gain, z), p_opt, h);
            assert!(d.abs() < 1e-6, "dP = {d} at gain {gain} z {z}");
        }
    }

    #[test]
    fn weak_drive_heavy_backlog_gives_small_power() {
        // Tiny V·λ·ℓ·g against a large queue: the stationary power stays
        // positive but small, and the grid minimum sits next to it.
        let p = LyapunovConfig::new(1.0, 10.0).device_problem(&wifi(100), 0);
        let gain = p.noise_power * (0.25f64.exp2() - 1.0) / p.p_max;
        let z = 100.0;
        let p_opt = p.optimal_power(gain, z).unwrap();
        assert!(p_opt > 0.0 && p_opt < p.p_max / 10.0);
        let s = p.solve(gain, z);
        let mut grid_best = f64::INFINITY;
        let mut grid_p = 0.0;
        for i in 1..=200 {
            let pw = p.p_max * i as f64 / 200.0;
            let q = p.clamp_q(p.optimal_q(gain, pw, z).unwrap());
            let v = objective_oracle(&p, q, pw, gain, z);
            if v < grid_best {
                grid_best = v;
                grid_p = pw;
            }
        }
        assert!(s.objective <= grid_best + 1e-9 * grid_best.abs());
        assert!((grid_p - p_opt).abs() <= p.p_max / 200.0);
    }

    #[test]
    fn q_is_one_at_threshold_capacity() {
        let p = problem(1000.0, 10.0);
        let spectral = p.lambda * p.payload_bits * p.devices / p.bandwidth;
        let gain = spectral.exp2() - 1.0;
        assert!((p.optimal_q(gain, 1.0, 0.0).unwrap() - 1.0).abs() < 1e-12);
        let gain4 = (4.0 * spectral).exp2() - 1.0;
        let q = p.optimal_q(gain4, 1.0, 0.0).unwrap();
        assert!((q - 2.0).abs() < 1e-12);
        assert_eq!(p.clamp_q(q), 1.0);
    }

    #[test]
    fn q_stationary_by_finite_differences() {
        let p = problem(1000.0, 100.0);
        for &(gain, z) in &[(0.5, 3.0), (10.0, 0.2), (2.0, 50.0)] {
            let p_opt = p.optimal_power(gain, z).unwrap();
            let q_opt = p.optimal_q(gain, p_opt, z).unwrap();
            let d = derivative(|q| objective_oracle(&p, q, p_opt, gain, z), q_opt, 1e-4 * q_opt);
            assert!(d.abs() < 1e-6, "dq = {d}");
        }
    }

    #[test]
    fn analytic_gradient_and_hessian_match_differences() {
        let p = problem(1000.0, 10.0);
        let (q, pw, gain, z) = (0.3, 7.0, 1.7, 4.0);
        let [gq, gp] = p.gradient(q, pw, gain, z);
        let fq = derivative(|x| objective_oracle(&p, x, pw, gain, z), q, 1e-4);
        let fp = derivative(|x| objective_oracle(&p, q, x, gain, z), pw, 1e-3);
        assert!((gq - fq).abs() <= 1e-6 * gq.abs().max(1.0));
        assert!((gp - fp).abs() <= 1e-6 * gp.abs().max(1.0));
        let h = p.hessian(q, pw, gain, z);
        let hqq = derivative(|x| p.gradient(x, pw, gain, z)[0], q, 1e-4);
        let hpp = derivative(|x| p.gradient(q, x, gain, z)[1], pw, 1e-3);
        let hqp = derivative(|x| p.gradient(q, x, gain, z)[0], pw, 1e-3);
        assert!((h[0][0] - hqq).abs() <= 1e-6 * hqq.abs());
        assert!((h[1][1] - hpp).abs() <= 1e-6 * hpp.abs().max(1e-9));
        assert!((h[0][1] - hqp).abs() <= 1e-6 * hqp.abs().max(1.0));
    }

    #[test]
    fn empty_queue_matches_initialization_rule() {
        let p = problem(1000.0, 10.0);
        let mut rng = stream(1, Purpose::Selection, 0);
        for gain in [0.01, 0.5, 2.0, 40.0, 1023.0] {
            let d = p.decide(0, 0, gain, 0.0, &mut rng);
            let init = ((p.bandwidth * (1.0 + gain * p.p_max / p.noise_power).log2())
                / (p.devices * p.lambda * p.payload_bits))
                .sqrt()
                .clamp(0.0, 1.0);
            assert_eq!(d.p, p.p_max);
            assert!((d.q - init.max(p.q_min)).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_inputs_identical_decisions() {
        let cfg = LyapunovConfig::new(1000.0, 10.0);
        let ch = wifi(2);
        let a = cfg.device_problem(&ch, 0).solve(3.0, 7.0);
        let b = cfg.device_problem(&ch, 1).solve(3.0, 7.0);
        assert_eq!(a, b);
    }

    #[test]
    fn beats_dense_grid_on_fixed_cases() {
        for &(v, lambda, gain, z) in &[
            (1.0, 10.0, 0.3, 20.0),
            (1000.0, 10.0, 2.0, 5.0),
            (1e5, 100.0, 50.0, 0.5),
            (1000.0, 100.0, 0.01, 80.0),
        ] {
            let p = problem(v, lambda);
            let s = p.solve(gain, z);
            let mut grid = f64::INFINITY;
            for i in 1..=200 {
                let pw = p.p_max * i as f64 / 200.0;
                for j in 0..200 {
                    let q = p.q_min + (1.0 - p.q_min) * j as f64 / 199.0;
                    grid = grid.min(objective_oracle(&p, q, pw, gain, z));
                }
            }
            assert!(s.objective <= grid + 1e-9 * grid.abs(), "{s:?} vs grid {grid}");
        }
    }

    #[test]
    fn estimate_with_vanishing_lambda_selects_everyone() {
        let ch = wifi(8);
        let cfg = LyapunovConfig::new(1000.0, 1e-12);
        let m = estimate_mean_selected(&cfg, &ch, 50, 3).unwrap();
        assert!((m - 8.0).abs() < 1e-9, "m = {m}");
    }

    #[test]
    fn estimate_is_deterministic() {
        let ch = wifi(10);
        let cfg = LyapunovConfig::new(1000.0, 10.0);
        let a = estimate_mean_selected(&cfg, &ch, 200, 9).unwrap();
        let b = estimate_mean_selected(&cfg, &ch, 200, 9).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert!(estimate_mean_selected(&cfg, &ch, 0, 9).is_err());
    }

    #[test]
    fn queues_stay_nonnegative_in_closed_loop() {
        let ch = wifi(5);
        let cfg = LyapunovConfig::new(10.0, 10.0);
        let mut sched = LyapunovScheduler::new(&cfg, &ch).unwrap();
        let mut ch_rngs = device_streams(4, Purpose::Channel, 5);
        let mut sel = device_streams(4, Purpose::Selection, 5);
        for t in 0..500 {
            let gains: Vec<f64> = ch_rngs
                .iter_mut()
                .enumerate()
                .map(|(n, r)| sample_gain(&ch, n, t, r).gain)
                .collect();
            let d = sched.decide_round(t, &gains, &mut sel);
            sched.commit(&d);
            assert!(sched.queues().as_slice().iter().all(|&z| z >= 0.0));
        }
    }

    proptest! {
        #[test]
        fn q_nonincreasing_in_backlog_and_lambda(
            gain in 1e-3f64..1e3,
            p in 1e-2f64..100.0,
            z in 0.0f64..100.0,
            dz in 0.0f64..50.0,
            lambda in 1.0f64..100.0,
            dl in 0.0f64..100.0,
        ) {
            let a = problem(1000.0, lambda);
            let b = problem(1000.0, lambda + dl);
            let q = a.optimal_q(gain, p, z).unwrap();
            prop_assert!(a.optimal_q(gain, p, z + dz).unwrap() <= q);
            prop_assert!(b.optimal_q(gain, p, z).unwrap() <= q);
        }

        #[test]
        fn decision_separable(
            gain in 1e-3f64..1e3,
            z in 0.0f64..100.0,
            other_gain in 1e-3f64..1e3,
            other_z in 0.0f64..100.0,
        ) {
            let cfg = LyapunovConfig::new(1000.0, 10.0);
            let ch = wifi(3);
            let lone = cfg.device_problem(&ch, 0).solve(gain, z);
            // Device 0's problem carries no state from other devices.
            let _ = cfg.device_problem(&ch, 1).solve(other_gain, other_z);
            prop_assert_eq!(lone, cfg.device_problem(&ch, 0).solve(gain, z));
        }

        #[test]
        fn solution_inside_box(gain in 1e-3f64..1e3, z in 0.0f64..1e4, v in 1.0f64..1e5) {
            let p = problem(v, 10.0);
            let s = p.solve(gain, z);
            prop_assert!(s.q >= p.q_min && s.q <= 1.0);
            prop_assert!(s.p > 0.0 && s.p <= p.p_max);
            prop_assert!(s.objective.is_finite());
        }
    }
}
