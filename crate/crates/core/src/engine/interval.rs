//! Feedback function for the marker movement interval Δt.

use super::EngineConfig;

/// Clamped EWMA of observed alignment times, scaled by `beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalPolicy {
    pub delta_t_min_ms: u64,
    pub delta_t_max_ms: u64,
    pub ewma_alpha: f64,
    pub beta: f64,
    /// `None` until the first observation.
    pub ewma_us: Option<f64>,
}

impl IntervalPolicy {
    pub fn from_config(cfg: &EngineConfig) -> Self {
        IntervalPolicy {
            delta_t_min_ms: cfg.delta_t_min_ms,
            delta_t_max_ms: cfg.delta_t_max_ms,
            ewma_alpha: cfg.ewma_alpha,
            beta: cfg.beta,
            ewma_us: None,
        }
    }

    fn interval_ms(&self, ewma_us: f64) -> u64 {
        let raw = (self.beta * ewma_us / 1000.0).round();
        if raw.is_nan() || raw <= self.delta_t_min_ms as f64 {
            self.delta_t_min_ms
        } else if raw >= self.delta_t_max_ms as f64 {
            self.delta_t_max_ms
        } else {
            raw as u64
        }
    }
}

/// Folds one alignment time into the policy and returns the next Δt in ms.
pub fn adapt_interval(mut policy: IntervalPolicy, t_i_us: i64) -> (IntervalPolicy, u64) {
    let t = t_i_us.max(0) as f64;
    let ewma = match policy.ewma_us {
        None => t,
        Some(prev) => policy.ewma_alpha * t + (1.0 - policy.ewma_alpha) * prev,
    };
    policy.ewma_us = Some(ewma);
    let next = policy.interval_ms(ewma);
    (policy, next)
}

/// Pluggable interval feedback used by the engine in scheduled mode.
pub trait IntervalFeedback: Send {
    /// Current Δt in milliseconds.
    fn current_ms(&self) -> u64;
    /// Records an alignment time and returns the updated Δt.
    fn observe(&mut self, t_i_us: i64) -> u64;
}

/// Constant Δt; observations are ignored.
#[derive(Debug, Clone, Copy)]
pub struct FixedInterval(pub u64);

impl IntervalFeedback for FixedInterval {
    fn current_ms(&self) -> u64 {
        self.0
    }
    fn observe(&mut self, _t_i_us: i64) -> u64 {
        self.0
    }
}

/// [`adapt_interval`] behind the feedback trait, starting from a fixed Δt
/// until the first observation arrives.
#[derive(Debug, Clone, Copy)]
pub struct EwmaInterval {
    policy: IntervalPolicy,
    current_ms: u64,
}

impl EwmaInterval {
    pub fn new(policy: IntervalPolicy, initial_ms: u64) -> Self {
        let current_ms = initial_ms.clamp(policy.delta_t_min_ms, policy.delta_t_max_ms);
        EwmaInterval { policy, current_ms }
    }

    pub fn policy(&self) -> &IntervalPolicy {
        &self.policy
    }
}

impl IntervalFeedback for EwmaInterval {
    fn current_ms(&self) -> u64 {
        self.current_ms
    }
    fn observe(&mut self, t_i_us: i64) -> u64 {
        let (policy, next) = adapt_interval(self.policy, t_i_us);
        self.policy = policy;
        self.current_ms = next;
        next
    }
}

pub fn feedback_from_config(cfg: &EngineConfig) -> Box<dyn IntervalFeedback> {
    if cfg.adaptive_interval {
        Box::new(EwmaInterval::new(
            IntervalPolicy::from_config(cfg),
            cfg.delta_t_ms,
        ))
    } else {
        Box::new(FixedInterval(cfg.delta_t_ms))
    }
}
