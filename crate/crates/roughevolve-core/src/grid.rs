//! Dyadic time grids on `[0, T]`.
//!
//! Every path object in the crate lives on a grid `t_i = T·i/M` with
//! `M = 2^m` intervals. Keeping the mesh dyadic makes window halving/doubling,
//! dyadic sewing partitions, and binary Chen reconstruction exact index
//! arithmetic instead of floating-point bookkeeping.

use crate::{Error, Result};

/// A uniform dyadic grid `0 = t_0 < t_1 < … < t_M = T`, `M = 2^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    log2_intervals: u32,
}

impl TimeGrid {
    /// Grid with `2^m` intervals on `[0, horizon]`.
    pub fn dyadic(horizon: f64, m: u32) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::invalid(format!(
                "grid horizon must be positive and finite, got {horizon}"
            )));
        }
        if m > 26 {
            return Err(Error::invalid(format!(
                "grid refinement 2^{m} exceeds the supported range (m <= 26)"
            )));
        }
        Ok(TimeGrid { horizon, log2_intervals: m })
    }

    /// Final time `T`.
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of intervals `M = 2^m`.
    pub fn intervals(&self) -> usize {
        1usize << self.log2_intervals
    }

    /// Number of nodes `M + 1`.
    pub fn nodes(&self) -> usize {
        self.intervals() + 1
    }

    /// `log2(M)`.
    pub fn log2_intervals(&self) -> u32 {
        self.log2_intervals
    }

    /// Mesh width `T / M`.
    pub fn mesh(&self) -> f64 {
        self.horizon / self.intervals() as f64
    }

    /// Node time `t_i = T·i/M`.
    pub fn node(&self, i: usize) -> f64 {
        debug_assert!(i <= self.intervals());
        self.horizon * (i as f64) / (self.intervals() as f64)
    }

    /// All node times.
    pub fn node_times(&self) -> Vec<f64> {
        (0..self.nodes()).map(|i| self.node(i)).collect()
    }

    /// Index of the node closest to `t`; errors if `t` is not a node
    /// (relative tolerance `1e-12·T`).
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let raw = t / self.mesh();
        let i = raw.round();
        if (raw - i).abs() > 1e-12 * self.intervals() as f64 || i < 0.0 || i > self.intervals() as f64
        {
            return Err(Error::invalid(format!("time {t} is not a grid node")));
        }
        Ok(i as usize)
    }

    /// Grid with the same horizon and `factor` times as many intervals
    /// (`factor` must be a power of two).
    pub fn refine(&self, factor: usize) -> Result<Self> {
        if !factor.is_power_of_two() {
            return Err(Error::invalid(format!(
                "refinement factor must be a power of two, got {factor}"
            )));
        }
        TimeGrid::dyadic(self.horizon, self.log2_intervals + factor.trailing_zeros())
    }

    /// Dyadic lags (in index units) `1, 2, 4, …, M`, optionally capped.
    pub fn dyadic_lags(&self) -> Vec<usize> {
        (0..=self.log2_intervals).map(|j| 1usize << j).collect()
    }

    /// True if `other` has the same horizon and refinement.
    pub fn same_as(&self, other: &TimeGrid) -> bool {
        self.log2_intervals == other.log2_intervals && self.horizon == other.horizon
    }
}

/// Deterministic strided pair set for two-parameter sups.
///
/// Exact `O(M²)` enumeration is affordable only for small grids; beyond
/// `full_threshold` intervals the set contains every pair `(i, i+lag)` with a
/// dyadic lag, which still probes all scales. Pairs are `(s_idx, t_idx)` with
/// `s_idx < t_idx`.
pub fn pair_set(intervals: usize, full_threshold: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    if intervals <= full_threshold {
        for i in 0..intervals {
            for j in (i + 1)..=intervals {
                pairs.push((i, j));
            }
        }
    } else {
        let mut lag = 1usize;
        while lag <= intervals {
            for i in 0..=(intervals - lag) {
                pairs.push((i, i + lag));
            }
            lag *= 2;
        }
    }
    pairs
}

/// At most `max_anchors` left endpoints, evenly strided, all distinct,
/// starting from `min_index`.
pub fn strided_anchors(intervals: usize, min_index: usize, max_anchors: usize) -> Vec<usize> {
    let hi = intervals.saturating_sub(1);
    if hi < min_index {
        return vec![];
    }
    let count = (hi - min_index + 1).min(max_anchors.max(1));
    let span = (hi - min_index) as f64;
    let mut out: Vec<usize> = (0..count)
        .map(|j| min_index + (span * j as f64 / (count.max(2) - 1) as f64).round() as usize)
        .collect();
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_are_uniform_and_dyadic() {
        let g = TimeGrid::dyadic(2.0, 3).unwrap();
        assert_eq!(g.intervals(), 8);
        assert_eq!(g.nodes(), 9);
        assert_eq!(g.node(0), 0.0);
        assert_eq!(g.node(8), 2.0);
        assert_eq!(g.node(4), 1.0);
        assert_eq!(g.mesh(), 0.25);
    }

    #[test]
    fn index_lookup_roundtrips() {
        let g = TimeGrid::dyadic(1.0, 5).unwrap();
        for i in 0..=g.intervals() {
            assert_eq!(g.index_of(g.node(i)).unwrap(), i);
        }
        assert!(g.index_of(0.017).is_err());
    }

    #[test]
    fn refine_multiplies_intervals() {
        let g = TimeGrid::dyadic(1.0, 4).unwrap();
        let f = g.refine(16).unwrap();
        assert_eq!(f.intervals(), 16 * 16);
        assert_eq!(f.horizon(), 1.0);
        assert!(g.refine(3).is_err());
    }

    #[test]
    fn pair_set_full_vs_strided() {
        let full = pair_set(8, 1024);
        assert_eq!(full.len(), 8 * 9 / 2);
        let strided = pair_set(2048, 1024);
        assert!(strided.iter().all(|&(i, j)| j > i && (j - i).is_power_of_two()));
        assert!(strided.len() < 2048 * 12);
    }

    #[test]
    fn anchors_are_bounded_and_sorted() {
        let a = strided_anchors(4096, 1, 64);
        assert!(a.len() <= 64);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(*a.first().unwrap(), 1);
    }
}
