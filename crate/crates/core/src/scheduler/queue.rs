/// `max(Z + P·q − P̄, 0)`. Driven by the expected power `P·q`, not the
/// realized selection.
pub fn queue_update(z: f64, p: f64, q: f64, p_avg: f64) -> f64 {
    debug_assert!(z >= 0.0);
    (z + p * q - p_avg).max(0.0)
}

/// Per-device power-debt queues, all starting empty.
#[derive(Debug, Clone, PartialEq)]
pub struct VirtualQueues {
    z: Vec<f64>,
}

impl VirtualQueues {
    pub fn new(devices: usize) -> Self {
        Self {
            z: vec![0.0; devices],
        }
    }

    pub fn get(&self, n: usize) -> f64 {
        self.z[n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.z
    }

    pub fn update(&mut self, n: usize, p: f64, q: f64, p_avg: f64) {
        self.z[n] = queue_update(self.z[n], p, q, p_avg);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(queue_update(0.0, 0.5, 1.0, 1.0), 0.0);
        assert!((queue_update(2.0, 1.5, 1.0, 1.0) - 2.5).abs() < 1e-15);
        assert!((queue_update(0.3, 1.0, 1.0, 1.0) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn starts_empty() {
        let q = VirtualQueues::new(4);
        assert!(q.as_slice().iter().all(|&z| z == 0.0));
    }
}
