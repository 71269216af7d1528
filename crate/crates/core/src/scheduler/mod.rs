//! Device scheduling: the drift-plus-penalty policy with virtual power
//! queues, and the matched uniform-selection baseline.

mod lyapunov;
mod queue;
mod uniform;

pub use lyapunov::{
    estimate_mean_selected, DeviceProblem, DEFAULT_Q_MIN, DEFAULT_V, LyapunovConfig, LyapunovScheduler, Solution,
    SolutionKind,
};
pub use queue::{queue_update, VirtualQueues};
pub use uniform::{draw_group_size, uniform_baseline};

/// Per-device, per-round scheduling outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleDecision {
    pub device: usize,
    pub round: usize,
    /// Selection probability `q ∈ [q_min, 1]`.
    pub q: f64,
    /// Transmit power used if selected.
    pub p: f64,
    pub selected: bool,
    /// Per-device drift-plus-penalty value at `(q, p)`; absent for the baseline.
    pub objective_value: Option<f64>,
}
