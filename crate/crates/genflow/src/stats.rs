//! Run instrumentation: counters, potential traces, and bit-size
//! observations collected while the algorithm runs.

use num::Zero;

use crate::rational::{bit_magnitude, Int, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckMode {
    Off,
    /// Assert the full invariant battery after every algorithmic step.
    Full,
}

#[derive(Debug, Clone)]
pub struct Stats {
    pub path_augmentations: u64,
    pub null_augmentations: u64,
    pub helpful_augmentations: u64,
    pub unhelpful_augmentations: u64,
    pub label_updates: u64,
    pub contractions: u64,
    pub ppn_calls: u64,
    pub reduce_calls: u64,
    /// Anchor selections that fell back to the interval endpoint because
    /// no grid point was available.
    pub anchor_fallbacks: u64,
    /// PPN returns whose plentiful node was not on the anchor grid.
    pub nonanchor_returns: u64,
    /// Largest label value observed at checkpoints.
    pub max_label_value: Rational,
    /// Largest |numerator| or denominator of any label at checkpoints.
    pub max_label_bits: Int,
    /// Fast mode: largest heap+arc operation count between augmentations.
    pub max_ops_per_segment: u64,
    pub psi_trace: Vec<Rational>,
    pub xi_trace: Vec<Rational>,
}

impl Default for Stats {
    fn default() -> Self {
        Stats {
            path_augmentations: 0,
            null_augmentations: 0,
            helpful_augmentations: 0,
            unhelpful_augmentations: 0,
            label_updates: 0,
            contractions: 0,
            ppn_calls: 0,
            reduce_calls: 0,
            anchor_fallbacks: 0,
            nonanchor_returns: 0,
            max_label_value: Rational::zero(),
            max_label_bits: Int::zero(),
            max_ops_per_segment: 0,
            psi_trace: Vec::new(),
            xi_trace: Vec::new(),
        }
    }
}

impl Stats {
    pub fn augmentations(&self) -> u64 {
        self.path_augmentations + self.null_augmentations
    }

    pub fn observe_label(&mut self, mu: &Rational) {
        if *mu > self.max_label_value {
            self.max_label_value = mu.clone();
        }
        let bits = bit_magnitude(mu);
        if bits > self.max_label_bits {
            self.max_label_bits = bits;
        }
    }
}
