//! Dot-product reservoir representation: the fixed-length feature vector the
//! readout consumes, independent of series length.
//!
//! Layout for node indices i, j in 1..=n_x (0-based flat index):
//!
//! ```text
//! r[(i-1)*n_x + j - 1] = sum_k x(k)_i * x(k-1)_j     (dot-product block)
//! r[n_x^2 + i - 1]     = sum_k x(k)_i                (sum block)
//! ```
//!
//! Accumulation is a rank-1 update per step, so the forward path never needs
//! more than two consecutive states.

use crate::error::{Error, Result};
use crate::reservoir::ReservoirTrace;

/// Flat index of the dot-product feature for nodes (i, j), both 1-based.
#[inline]
pub fn dot_index(i: usize, j: usize, n_x: usize) -> usize {
    debug_assert!(i >= 1 && i <= n_x && j >= 1 && j <= n_x);
    (i - 1) * n_x + j - 1
}

/// Flat index of the sum feature for node i, 1-based.
#[inline]
pub fn sum_index(i: usize, n_x: usize) -> usize {
    debug_assert!(i >= 1 && i <= n_x);
    n_x * n_x + i - 1
}

/// Feature vector of length n_x * (n_x + 1).
#[derive(Debug, Clone, PartialEq)]
pub struct Dprr {
    n_x: usize,
    values: Vec<f64>,
}

impl Dprr {
    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Streaming accumulator: feed (x(k), x(k-1)) pairs in order.
#[derive(Debug, Clone)]
pub struct DprrAccumulator {
    n_x: usize,
    values: Vec<f64>,
}

impl DprrAccumulator {
    pub fn new(n_x: usize) -> DprrAccumulator {
        DprrAccumulator {
            n_x,
            values: vec![0.0; n_x * (n_x + 1)],
        }
    }

    /// Rank-1 update for one step: r_dot += curr ⊗ prev, r_sum += curr.
    pub fn step(&mut self, curr: &[f64], prev: &[f64]) {
        let n_x = self.n_x;
        debug_assert_eq!(curr.len(), n_x);
        debug_assert_eq!(prev.len(), n_x);
        for (i, &ci) in curr.iter().enumerate() {
            let row = &mut self.values[i * n_x..(i + 1) * n_x];
            for (slot, &pj) in row.iter_mut().zip(prev) {
                *slot += ci * pj;
            }
        }
        for (i, &ci) in curr.iter().enumerate() {
            self.values[n_x * n_x + i] += ci;
        }
    }

    pub fn finish(self) -> Dprr {
        Dprr {
            n_x: self.n_x,
            values: self.values,
        }
    }
}

/// Features from a retained full trace. Truncated traces lack the history
/// needed here; their features come from the streaming pass instead.
pub fn accumulate_dprr(trace: &ReservoirTrace) -> Result<Dprr> {
    match trace {
        ReservoirTrace::Full { states } => {
            let n_x = states[0].len();
            let mut acc = DprrAccumulator::new(n_x);
            for pair in states.windows(2) {
                acc.step(&pair[1], &pair[0]);
            }
            Ok(acc.finish())
        }
        ReservoirTrace::Truncated { .. } => Err(Error::InvalidData(
            "feature accumulation from a stored trace requires full mode".into(),
        )),
    }
}

/// Run the reservoir and accumulate features in a single streaming pass.
pub fn forward(
    params: &crate::reservoir::ReservoirParams,
    sample: &crate::dataset::Sample,
    mode: crate::reservoir::TraceMode,
) -> Result<(ReservoirTrace, Dprr)> {
    let mut acc = DprrAccumulator::new(params.n_x());
    let trace =
        crate::reservoir::run_with_observer(params, sample, mode, |curr, prev| {
            acc.step(curr, prev);
        })?;
    Ok((trace, acc.finish()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Sample;
    use crate::reservoir::{Mask, NonlinearityKind, ReservoirParams, TraceMode};
    use crate::rng::SplitMix64;

    /// Brute-force evaluation of the defining sums, one feature at a time.
    #[allow(clippy::needless_range_loop)]
    fn brute_force(states: &[Vec<f64>]) -> Vec<f64> {
        let n_x = states[0].len();
        let t = states.len() - 1;
        let mut r = vec![0.0; n_x * (n_x + 1)];
        for i in 1..=n_x {
            for j in 1..=n_x {
                let mut sum = 0.0;
                for k in 1..=t {
                    sum += states[k][i - 1] * states[k - 1][j - 1];
                }
                r[dot_index(i, j, n_x)] = sum;
            }
            let mut sum = 0.0;
            for k in 1..=t {
                sum += states[k][i - 1];
            }
            r[sum_index(i, n_x)] = sum;
        }
        r
    }

    fn random_trace(rng: &mut SplitMix64, t: usize, n_x: usize) -> ReservoirTrace {
        let mut states = vec![vec![0.0; n_x]];
        for _ in 0..t {
            states.push((0..n_x).map(|_| rng.uniform(-1.0, 1.0)).collect());
        }
        ReservoirTrace::Full { states }
    }

    #[test]
    fn index_layout_hand_cases() {
        assert_eq!(dot_index(1, 1, 30), 0);
        assert_eq!(dot_index(2, 3, 30), 32);
        assert_eq!(sum_index(1, 30), 900);
        assert_eq!(sum_index(30, 30), 929);
    }

    #[test]
    fn zero_trace_gives_zero_features() {
        let trace = ReservoirTrace::Full {
            states: vec![vec![0.0; 3]; 5],
        };
        let r = accumulate_dprr(&trace).unwrap();
        assert!(r.values().iter().all(|&v| v == 0.0));
        assert_eq!(r.len(), 12);
    }

    #[test]
    fn single_node_hand_sums() {
        // x(0)=0, x(1)=1.0, x(2)=1.8: dot = 1.8*1.0, sum = 1.0+1.8.
        let trace = ReservoirTrace::Full {
            states: vec![vec![0.0], vec![1.0], vec![1.8]],
        };
        let r = accumulate_dprr(&trace).unwrap();
        assert_eq!(r.values(), &[1.8, 2.8]);
    }

    #[test]
    fn streaming_equals_brute_force() {
        let mut rng = SplitMix64::new(23);
        for _ in 0..20 {
            let n_x = 1 + rng.below(8);
            let t = 1 + rng.below(40);
            let trace = random_trace(&mut rng, t, n_x);
            let streamed = accumulate_dprr(&trace).unwrap();
            if let ReservoirTrace::Full { states } = &trace {
                let direct = brute_force(states);
                for (s, d) in streamed.values().iter().zip(&direct) {
                    assert!((s - d).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn forward_streaming_agrees_with_trace_accumulation() {
        let mut rng = SplitMix64::new(29);
        for trial in 0..20 {
            let n_x = 1 + rng.below(6);
            let n_u = 1 + rng.below(3);
            let t = 1 + rng.below(20);
            let mask = Mask::generate(trial, n_x, n_u);
            let params = ReservoirParams::new(
                rng.uniform(0.05, 0.5),
                rng.uniform(0.05, 0.5),
                NonlinearityKind::Linear,
                mask,
            );
            let sample = Sample {
                label: 0,
                series: (0..t)
                    .map(|_| (0..n_u).map(|_| rng.uniform(-1.0, 1.0)).collect())
                    .collect(),
            };
            let (full_trace, from_full) = forward(&params, &sample, TraceMode::Full).unwrap();
            let (_, from_truncated) = forward(&params, &sample, TraceMode::Truncated).unwrap();
            let from_trace = accumulate_dprr(&full_trace).unwrap();
            assert_eq!(from_full, from_truncated);
            assert_eq!(from_full, from_trace);
        }
    }

    #[test]
    fn length_is_independent_of_series_length() {
        let mut rng = SplitMix64::new(33);
        let short = random_trace(&mut rng, 5, 4);
        let long = random_trace(&mut rng, 50, 4);
        assert_eq!(
            accumulate_dprr(&short).unwrap().len(),
            accumulate_dprr(&long).unwrap().len()
        );
    }

    #[test]
    fn single_step_trace_has_zero_dot_block() {
        // T = 1: dot block pairs x(1) with x(0) = 0; sum block equals x(1).
        let states = vec![vec![0.0, 0.0], vec![0.7, -0.3]];
        let r = accumulate_dprr(&ReservoirTrace::Full { states }).unwrap();
        assert_eq!(&r.values()[..4], &[0.0, 0.0, 0.0, 0.0]);
        assert_eq!(&r.values()[4..], &[0.7, -0.3]);
    }

    #[test]
    fn truncated_trace_is_rejected() {
        let trace = ReservoirTrace::Truncated {
            prev: vec![0.0],
            last: vec![1.0],
        };
        assert!(accumulate_dprr(&trace).is_err());
    }
}
