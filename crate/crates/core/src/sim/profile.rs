use alloc::vec::Vec;

use super::SimError;

/// Link rate used where a profile says "no limit".
pub const DEFAULT_LINK_RATE: f64 = 20e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rate {
    Unlimited,
    /// bit/s
    Limited(f64),
}

/// Piecewise-constant available rate over time.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkProfile {
    // (start_s, rate); starts strictly increasing from 0
    steps: Vec<(f64, Rate)>,
    link_rate: f64,
}

impl NetworkProfile {
    pub fn new(steps: Vec<(f64, Rate)>, link_rate: f64) -> Result<Self, SimError> {
        let bad = |m: &str| Err(SimError::InvalidScript(m.into()));
        if steps.first().map(|s| s.0) != Some(0.0) {
            return bad("profile must start at t = 0");
        }
        if steps.windows(2).any(|w| !(w[1].0 > w[0].0)) || steps.iter().any(|s| !s.0.is_finite()) {
            return bad("profile step times must be strictly increasing");
        }
        let positive = |r: f64| r > 0.0 && r.is_finite();
        if !positive(link_rate) || steps.iter().any(|s| matches!(s.1, Rate::Limited(r) if !positive(r))) {
            return bad("rates must be positive");
        }
        Ok(NetworkProfile { steps, link_rate })
    }

    pub fn constant(rate: Rate) -> Self {
        NetworkProfile { steps: alloc::vec![(0.0, rate)], link_rate: DEFAULT_LINK_RATE }
    }

    pub fn steps(&self) -> &[(f64, Rate)] {
        &self.steps
    }

    pub fn link_rate(&self) -> f64 {
        self.link_rate
    }

    fn step_index(&self, t: f64) -> usize {
        self.steps.partition_point(|s| s.0 <= t).saturating_sub(1)
    }

    /// Effective rate in bit/s at `t`.
    pub fn rate_at(&self, t: f64) -> f64 {
        match self.steps[self.step_index(t)].1 {
            Rate::Unlimited => self.link_rate,
            Rate::Limited(r) => r.min(self.link_rate),
        }
    }

    /// First step boundary strictly after `t`.
    pub fn next_change(&self, t: f64) -> Option<f64> {
        self.steps.get(self.step_index(t) + 1).map(|s| s.0)
    }

    /// Time at which `bits` sent from `start` finish transmitting.
    pub fn finish_time(&self, start: f64, bits: f64) -> f64 {
        let mut t = start;
        let mut left = bits;
        loop {
            let r = self.rate_at(t);
            match self.next_change(t) {
                Some(next) if left > r * (next - t) => {
                    left -= r * (next - t);
                    t = next;
                }
                _ => return t + left / r,
            }
        }
    }
}
