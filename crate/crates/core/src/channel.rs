//! Rayleigh block-fading uplink: gain draws, capacity and transmit time.

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest spectral efficiency the link can use (1024-QAM), bits/s/Hz.
pub const MAX_SPECTRAL_EFFICIENCY: f64 = 10.0;
/// Lowest coded rate available at peak power, bits/s/Hz.
pub const MIN_SPECTRAL_EFFICIENCY: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    /// Rayleigh scale per device.
    pub sigma: Vec<f64>,
    /// Noise power `N₀` (normalized watts).
    pub noise_power: f64,
    /// Bandwidth in Hz.
    pub bandwidth: f64,
    /// Bits per model upload.
    pub payload_bits: f64,
    pub p_max: f64,
    /// Time-average power budget per device.
    pub p_avg: Vec<f64>,
}

impl ChannelConfig {
    /// Same `σ` and `P̄` for every device.
    pub fn homogeneous(
        devices: usize,
        sigma: f64,
        noise_power: f64,
        bandwidth: f64,
        payload_bits: f64,
        p_max: f64,
        p_avg: f64,
    ) -> Self {
        Self {
            sigma: vec![sigma; devices],
            noise_power,
            bandwidth,
            payload_bits,
            p_max,
            p_avg: vec![p_avg; devices],
        }
    }

    pub fn devices(&self) -> usize {
        self.sigma.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma.is_empty() {
            return Err(Error::invalid("sigma", "at least one device is required"));
        }
        if self.p_avg.len() != self.sigma.len() {
            return Err(Error::invalid(
                "p_avg",
                format!("{} budgets for {} devices", self.p_avg.len(), self.sigma.len()),
            ));
        }
        if let Some(s) = self.sigma.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::invalid("sigma", format!("must be positive, got {s}")));
        }
        positive("noise_power", self.noise_power)?;
        positive("bandwidth", self.bandwidth)?;
        positive("payload_bits", self.payload_bits)?;
        positive("p_max", self.p_max)?;
        for &p in &self.p_avg {
            if !(p > 0.0 && p <= self.p_max) {
                return Err(Error::invalid(
                    "p_avg",
                    format!("must lie in (0, p_max = {}], got {p}", self.p_max),
                ));
            }
        }
        Ok(())
    }

    /// Smallest gain a draw is clamped to: `(2^0.25 − 1)·N₀/P_max`.
    pub fn gain_lo(&self) -> f64 {
        (MIN_SPECTRAL_EFFICIENCY.exp2() - 1.0) * self.noise_power / self.p_max
    }

    /// Largest gain a draw for device `n` is clamped to: `(2^10 − 1)·N₀/P̄ₙ`.
    pub fn gain_hi(&self, n: usize) -> f64 {
        (MAX_SPECTRAL_EFFICIENCY.exp2() - 1.0) * self.noise_power / self.p_avg[n]
    }

    /// Link capacity in bits/s at power `p`.
    pub fn capacity_bps(&self, gain: f64, p: f64) -> Result<f64> {
        if !(p >= 0.0) {
            return Err(Error::invalid("P", format!("transmit power must be >= 0, got {p}")));
        }
        Ok(capacity(self.bandwidth, self.noise_power, gain, p))
    }

    /// Seconds to push one payload at power `p`.
    pub fn tx_time_seconds(&self, gain: f64, p: f64) -> Result<f64> {
        if !(p > 0.0) {
            return Err(Error::invalid(
                "P",
                format!("a transmitting device needs positive power, got {p}"),
            ));
        }
        Ok(self.payload_bits / capacity(self.bandwidth, self.noise_power, gain, p))
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be positive and finite, got {v}")))
    }
}

/// `B·log₂(1 + gain·P/N₀)`, evaluated through `ln_1p` so tiny SNRs keep precision.
pub(crate) fn capacity(bandwidth: f64, noise: f64, gain: f64, p: f64) -> f64 {
    bandwidth * (gain * p / noise).ln_1p() / std::f64::consts::LN_2
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSample {
    pub device: usize,
    pub round: usize,
    /// `|h|²`, after clamping.
    pub gain: f64,
}

/// Unclamped `|h|²` for a Rayleigh(σ) envelope: exponential with mean `2σ²`.
pub fn rayleigh_power<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> f64 {
    let e: f64 = rng.sample(Exp1);
    2.0 * sigma * sigma * e
}

pub fn sample_gain<R: Rng + ?Sized>(
    config: &ChannelConfig,
    device: usize,
    round: usize,
    rng: &mut R,
) -> ChannelSample {
    let raw = rayleigh_power(config.sigma[device], rng);
    ChannelSample {
        device,
        round,
        gain: raw.clamp(config.gain_lo(), config.gain_hi(device)),
    }
}
