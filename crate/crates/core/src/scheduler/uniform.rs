//! Uniform selection matched to the mean group size `M` of the adaptive policy.

use rand::seq::index::sample;
use rand::Rng;

use super::ScheduleDecision;
use crate::error::{Error, Result};

/// `⌊M⌋` with probability `⌈M⌉ − M`, otherwise `⌈M⌉`, so the mean is `M`.
pub fn draw_group_size<R: Rng + ?Sized>(m: f64, rng: &mut R) -> usize {
    let lo = m.floor();
    let hi = m.ceil();
    if lo == hi {
        return lo as usize;
    }
    if rng.random_bool(hi - m) {
        lo as usize
    } else {
        hi as usize
    }
}

/// Selects a uniformly random subset of `M′` devices. Every device records
/// `q = M/N` and the power it would use, `P̄ₙ·N/M′` (capped at `P_max`).
pub fn uniform_baseline<R: Rng + ?Sized>(
    round: usize,
    m: f64,
    p_avg: &[f64],
    p_max: f64,
    rng: &mut R,
) -> Result<Vec<ScheduleDecision>> {
    let devices = p_avg.len();
    if !(m > 0.0 && m <= devices as f64) {
        return Err(Error::invalid(
            "m",
            format!("group size must lie in (0, {devices}], got {m}"),
        ));
    }
    let group = draw_group_size(m, rng);
    let q = m / devices as f64;
    let mut selected = vec![false; devices];
    for i in sample(rng, devices, group) {
        selected[i] = true;
    }
    let share = devices as f64 / group.max(1) as f64;
    Ok(p_avg
        .iter()
        .zip(selected)
        .enumerate()
        .map(|(n, (&avg, selected))| ScheduleDecision {
            device: n,
            round,
            q,
            p: (avg * share).min(p_max),
            selected,
            objective_value: None,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    #[test]
    fn integer_group_is_exact() {
        let mut rng = stream(1, Purpose::Baseline, 0);
        let avg = vec![1.0; 10];
        for t in 0..200 {
            let d = uniform_baseline(t, 3.0, &avg, 100.0, &mut rng).unwrap();
            assert_eq!(d.iter().filter(|d| d.selected).count(), 3);
            for x in &d {
                assert!((x.p - 10.0 / 3.0).abs() < 1e-12);
                assert!((x.q - 0.3).abs() < 1e-15);
                // P·M′/N = P̄
                assert!((x.p * 3.0 / 10.0 - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fractional_group_mean() {
        let mut rng = stream(2, Purpose::Baseline, 0);
        let avg = vec![1.0; 10];
        let rounds = 100_000;
        let total: usize = (0..rounds)
            .map(|t| {
                uniform_baseline(t, 2.5, &avg, 100.0, &mut rng)
                    .unwrap()
                    .iter()
                    .filter(|d| d.selected)
                    .count()
            })
            .sum();
        let mean = total as f64 / rounds as f64;
        assert!((mean - 2.5).abs() / 2.5 < 0.01, "mean {mean}");
    }

    #[test]
    fn rejects_bad_group_size() {
        let mut rng = stream(3, Purpose::Baseline, 0);
        assert!(uniform_baseline(0, 0.0, &[1.0; 4], 100.0, &mut rng).is_err());
        assert!(uniform_baseline(0, -1.0, &[1.0; 4], 100.0, &mut rng).is_err());
        assert!(uniform_baseline(0, 4.5, &[1.0; 4], 100.0, &mut rng).is_err());
    }
}
