use serde::{Deserialize, Serialize};

/// Welford running mean and variance per component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningNorm {
    pub count: u64,
    pub mean: Vec<f64>,
    pub m2: Vec<f64>,
    pub eps: f64,
}

impl RunningNorm {
    pub const DEFAULT_EPS: f64 = 1e-6;

    pub fn new(dim: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
            eps: Self::DEFAULT_EPS,
        }
    }

    pub fn update(&mut self, x: &[f64]) {
        self.count += 1;
        let n = self.count as f64;
        for i in 0..self.mean.len() {
            let d = x[i] - self.mean[i];
            self.mean[i] += d / n;
            self.m2[i] += d * (x[i] - self.mean[i]);
        }
    }

    /// Population standard deviation (zero before two samples).
    pub fn std(&self) -> Vec<f64> {
        if self.count < 2 {
            return vec![0.0; self.mean.len()];
        }
        self.m2.iter().map(|m| (m / self.count as f64).sqrt()).collect()
    }

    /// `(x - mean) / max(std, eps)`; before any data the input passes through.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        if self.count == 0 {
            return x.to_vec();
        }
        let n = self.count as f64;
        x.iter()
            .enumerate()
            .map(|(i, v)| {
                let sd = if self.count < 2 { 0.0 } else { (self.m2[i] / n).sqrt() };
                (v - self.mean[i]) / sd.max(self.eps)
            })
            .collect()
    }
}
