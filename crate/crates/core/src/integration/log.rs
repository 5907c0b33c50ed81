use serde::{Deserialize, Serialize};

use super::select::gate_probability;

/// Per-mechanism step counts. Each environment step bumps exactly one.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub policy_only: u64,
    pub expert_only: u64,
    pub gate_draws: u64,
    pub argmax: u64,
    pub thompson_draws: u64,
    pub handoff_tests: u64,
    pub warm_start_tests: u64,
    pub residual_adds: u64,
    /// Expert steps that fill the buffer before learning starts.
    pub prefill: u64,
}

impl Counters {
    pub fn total(&self) -> u64 {
        self.as_array().iter().sum()
    }

    /// Number of distinct mechanisms that ever fired.
    pub fn mechanisms_used(&self) -> usize {
        self.as_array().iter().filter(|&&c| c > 0).count()
    }

    fn as_array(&self) -> [u64; 9] {
        [
            self.policy_only,
            self.expert_only,
            self.gate_draws,
            self.argmax,
            self.thompson_draws,
            self.handoff_tests,
            self.warm_start_tests,
            self.residual_adds,
            self.prefill,
        ]
    }
}

/// Gate statistics over one block of training steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateWindow {
    pub start_step: usize,
    pub steps: u64,
    pub expert_picks: u64,
    pub policy_picks: u64,
    pub p_max: f64,
    pub p_min: f64,
    pub p_sum: f64,
    pub delta_max: f64,
}

impl GateWindow {
    fn new(start_step: usize) -> Self {
        Self {
            start_step,
            steps: 0,
            expert_picks: 0,
            policy_picks: 0,
            p_max: f64::NEG_INFINITY,
            p_min: f64::INFINITY,
            p_sum: 0.0,
            delta_max: f64::NEG_INFINITY,
        }
    }

    pub fn policy_rate(&self) -> f64 {
        self.policy_picks as f64 / self.steps as f64
    }
}

/// One decimated per-step sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateSample {
    pub step: usize,
    pub p: f64,
    pub b: bool,
    pub delta: f64,
}

pub const HISTOGRAM_BINS: usize = 20;

/// Everything the gate reports during training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateLog {
    pub window: usize,
    pub decimation: usize,
    pub windows: Vec<GateWindow>,
    pub samples: Vec<GateSample>,
    /// Counts of `p` over equal-width bins of [0, 1].
    pub histogram: Vec<u64>,
    pub p_max: f64,
}

impl GateLog {
    pub fn new(window: usize, decimation: usize) -> Self {
        Self {
            window: window.max(1),
            decimation: decimation.max(1),
            windows: Vec::new(),
            samples: Vec::new(),
            histogram: vec![0; HISTOGRAM_BINS],
            p_max: f64::NEG_INFINITY,
        }
    }

    pub fn record(&mut self, step: usize, p: f64, b: bool, delta: f64) {
        let start = step / self.window * self.window;
        if self.windows.last().is_none_or(|w| w.start_step != start) {
            self.windows.push(GateWindow::new(start));
        }
        let w = self.windows.last_mut().expect("window just pushed");
        w.steps += 1;
        if b {
            w.expert_picks += 1;
        } else {
            w.policy_picks += 1;
        }
        w.p_max = w.p_max.max(p);
        w.p_min = w.p_min.min(p);
        w.p_sum += p;
        w.delta_max = w.delta_max.max(delta);
        self.p_max = self.p_max.max(p);
        let bin = ((p * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1);
        self.histogram[bin] += 1;
        if step % self.decimation == 0 {
            self.samples.push(GateSample { step, p, b, delta });
        }
    }

    pub fn total_steps(&self) -> u64 {
        self.windows.iter().map(|w| w.steps).sum()
    }
}

/// Outcome of checking one window against the coverage bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageCheck {
    pub start_step: usize,
    pub policy_rate: f64,
    /// `1 - p_max` of the window.
    pub floor: f64,
    pub slack: f64,
    /// `p_max <= sigma(delta_max / tau)` up to rounding.
    pub p_max_consistent: bool,
    pub ok: bool,
}

/// One-sided Azuma-Hoeffding slack for the mean of `n` bounded increments
/// at confidence `1 - alpha`.
pub fn hoeffding_slack(n: u64, alpha: f64) -> f64 {
    ((1.0 / alpha).ln() / (2.0 * n as f64)).sqrt()
}

/// Policy picks in a window are Bernoulli with success chance at least
/// `1 - p_max`, so their rate must clear that floor minus sampling slack.
pub fn coverage_check(w: &GateWindow, tau: f64, alpha: f64) -> CoverageCheck {
    let floor = 1.0 - w.p_max;
    let slack = hoeffding_slack(w.steps, alpha);
    let policy_rate = w.policy_rate();
    let p_max_consistent = w.p_max <= gate_probability(w.delta_max, tau) + 1e-9;
    CoverageCheck {
        start_step: w.start_step,
        policy_rate,
        floor,
        slack,
        p_max_consistent,
        ok: p_max_consistent && policy_rate >= floor - slack,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn windows_split_on_boundaries() {
        let mut log = GateLog::new(10, 4);
        for step in 5..25 {
            log.record(step, 0.25, step % 2 == 0, 0.0);
        }
        let starts: Vec<_> = log.windows.iter().map(|w| w.start_step).collect();
        assert_eq!(starts, vec![0, 10, 20]);
        assert_eq!(log.windows[0].steps, 5);
        assert_eq!(log.total_steps(), 20);
        assert_eq!(log.samples.len(), 5);
        assert_eq!(log.histogram[5], 20);
    }

    #[test]
    fn slack_shrinks() {
        assert!(hoeffding_slack(1000, 0.01) < hoeffding_slack(100, 0.01));
        assert!((hoeffding_slack(1000, 0.01) - 0.04799).abs() < 1e-4);
    }
}
