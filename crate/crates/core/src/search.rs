//! Search ladders and horizons shared by all finite-horizon checks.

use crate::logmath::TestTuning;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    /// Number of sequence indices inspected by linear scans.
    pub horizon: usize,
    /// Horizon for scans that are quadratic in the index.
    pub triangular_horizon: usize,
    pub window: usize,
    pub margin: f64,
    /// Slack for "ratio tends to one".
    pub eta: f64,
    pub mu_max: u64,
    /// Seminorm indices probed for "for all m" statements.
    pub probes: Vec<u64>,
    pub lag_ladder: Vec<usize>,
    /// Constants `C` are searched in `{2^0, ..., 2^c_max_log2}`.
    pub c_max_log2: u32,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            horizon: 100_000,
            triangular_horizon: 2_000,
            window: 64,
            margin: 0.05,
            eta: 1e-3,
            mu_max: 1 << 16,
            probes: (1..=6).collect(),
            lag_ladder: vec![1, 2, 4, 8, 16, 32, 64],
            c_max_log2: 16,
        }
    }
}

impl SearchConfig {
    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn tuning(&self) -> TestTuning {
        TestTuning {
            window: self.window,
            margin: self.margin,
        }
    }

    /// Ascending candidate indices `μ` for a given `m`, capped at `mu_max`.
    pub fn mu_ladder(&self, m: u64) -> Vec<u64> {
        let mut out = vec![1, m, m + 1, m.saturating_mul(2), m.saturating_mul(4)];
        out.push(m.saturating_mul(m));
        if m < 63 {
            out.push(1u64 << m);
        }
        let mut p = 1u64;
        while p <= self.mu_max {
            out.push(p);
            p <<= 1;
        }
        out.retain(|&mu| mu >= 1 && mu <= self.mu_max);
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn c_grid(&self) -> Vec<f64> {
        (0..=self.c_max_log2).map(|k| 2f64.powi(k as i32)).collect()
    }

    /// Smallest grid constant dominating `ln_sup`, if any.
    pub fn c_witness(&self, ln_sup: f64) -> Option<f64> {
        self.c_grid().into_iter().find(|c| c.ln() >= ln_sup - 1e-12)
    }

    /// Schedule `N_j = 2^j` up to the horizon, plus the horizon itself.
    pub fn schedule(&self) -> Vec<usize> {
        power_schedule(self.horizon)
    }
}

pub fn power_schedule(horizon: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut n = 1usize;
    while n <= horizon {
        out.push(n);
        n <<= 1;
    }
    if out.last() != Some(&horizon) && horizon > 0 {
        out.push(horizon);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mu_ladder_contains_four_m_and_is_sorted() {
        let cfg = SearchConfig::default();
        for m in 1..=8 {
            let ladder = cfg.mu_ladder(m);
            assert!(ladder.contains(&(4 * m)));
            assert!(ladder.windows(2).all(|p| p[0] < p[1]));
            assert!(*ladder.last().unwrap() <= cfg.mu_max);
        }
    }

    #[test]
    fn c_witness_rounds_up_to_power_of_two() {
        let cfg = SearchConfig::default();
        assert_eq!(cfg.c_witness(-3.0), Some(1.0));
        assert_eq!(cfg.c_witness(3f64.ln()), Some(4.0));
        assert_eq!(cfg.c_witness(100.0), None);
    }

    #[test]
    fn schedule_is_dyadic() {
        assert_eq!(power_schedule(10), vec![1, 2, 4, 8, 10]);
        assert_eq!(power_schedule(8), vec![1, 2, 4, 8]);
    }
}
