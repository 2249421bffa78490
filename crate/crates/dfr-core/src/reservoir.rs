//! Input masking and the modular delayed-feedback reservoir recurrence.
//!
//! The reservoir holds `n_x` virtual nodes on a ring. Each input step k is
//! expanded by a fixed bipolar mask into one drive value per node, and the
//! nodes update in order:
//!
//! ```text
//! x(k)_n = a * g(j(k)_n + x(k-1)_n) + b * pred(k, n)
//! ```
//!
//! where `pred(k, n)` is the previous node on the ring: `x(k)_{n-1}` for
//! n > 1 and `x(k-1)_{n_x}` for n = 1 (the delay line is continuous across
//! input steps). Only the two scalars `a` and `b` are trained.

use serde::{Deserialize, Serialize};

use crate::dataset::Sample;
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Fixed bipolar input mask: `n_x` rows by `n_u` columns of entries in {-1, +1}.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    seed: u64,
    n_x: usize,
    n_u: usize,
    entries: Vec<f64>, // row-major
}

impl Mask {
    /// Entry (n, u) is +1 iff bit 0 of the (n*n_u + u)-th SplitMix64 output
    /// for `seed` is 1. Deterministic and portable across implementations.
    pub fn generate(seed: u64, n_x: usize, n_u: usize) -> Mask {
        assert!(n_x >= 1 && n_u >= 1);
        let mut rng = SplitMix64::new(seed);
        let entries = (0..n_x * n_u)
            .map(|_| if rng.next_u64() & 1 == 1 { 1.0 } else { -1.0 })
            .collect();
        Mask {
            seed,
            n_x,
            n_u,
            entries,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Node count (rows).
    pub fn n_nodes(&self) -> usize {
        self.n_x
    }

    /// Input width (columns).
    pub fn n_inputs(&self) -> usize {
        self.n_u
    }

    #[inline]
    pub fn entry(&self, n: usize, u: usize) -> f64 {
        self.entries[n * self.n_u + u]
    }

    /// Drive vector j = mask * u. Panics if `input` has the wrong width.
    pub fn apply(&self, input: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_x];
        self.apply_into(input, &mut out);
        out
    }

    pub fn apply_into(&self, input: &[f64], out: &mut [f64]) {
        assert_eq!(input.len(), self.n_u, "input width must match mask");
        assert_eq!(out.len(), self.n_x);
        for (n, o) in out.iter_mut().enumerate() {
            let row = &self.entries[n * self.n_u..(n + 1) * self.n_u];
            *o = row.iter().zip(input).map(|(m, u)| m * u).sum();
        }
    }
}

/// Block nonlinearity f_a(z) = a * g(z).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonlinearityKind {
    /// g(z) = z. The default.
    #[default]
    Linear,
    /// g(z) = z / (1 + z^p), p even so the denominator never vanishes.
    MackeyGlass { p: u32 },
}

/// Value and partials of f_a(z) = a * g(z) at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NlEval {
    /// a * g(z)
    pub value: f64,
    /// d/dz = a * g'(z)
    pub d_dz: f64,
    /// d/da = g(z)
    pub d_da: f64,
}

impl NonlinearityKind {
    pub fn validate(&self) -> Result<()> {
        match self {
            NonlinearityKind::Linear => Ok(()),
            NonlinearityKind::MackeyGlass { p } => {
                if *p >= 2 && p.is_multiple_of(2) {
                    Ok(())
                } else {
                    Err(Error::InvalidData(format!(
                        "mackey-glass exponent must be even and >= 2, got {p}"
                    )))
                }
            }
        }
    }

    /// g(z): the unscaled block function.
    #[inline]
    pub fn g(&self, z: f64) -> f64 {
        match self {
            NonlinearityKind::Linear => z,
            NonlinearityKind::MackeyGlass { p } => z / (1.0 + z.powi(*p as i32)),
        }
    }

    /// f_a(z) = a * g(z), forward path only.
    #[inline]
    pub fn apply(&self, a: f64, z: f64) -> f64 {
        a * self.g(z)
    }

    /// Value plus both partials.
    ///
    /// For mackey-glass, g'(z) = (1 + (1 - p) z^p) / (1 + z^p)^2.
    #[inline]
    pub fn eval(&self, a: f64, z: f64) -> NlEval {
        match self {
            NonlinearityKind::Linear => NlEval {
                value: a * z,
                d_dz: a,
                d_da: z,
            },
            NonlinearityKind::MackeyGlass { p } => {
                let zp = z.powi(*p as i32);
                let den = 1.0 + zp;
                let g = z / den;
                let gp = (1.0 + (1.0 - f64::from(*p)) * zp) / (den * den);
                NlEval {
                    value: a * g,
                    d_dz: a * gp,
                    d_da: g,
                }
            }
        }
    }
}

/// Reservoir configuration: the two trained scalars plus the fixed structure.
#[derive(Debug, Clone, PartialEq)]
pub struct ReservoirParams {
    /// Nonlinearity gain (trained).
    pub a: f64,
    /// Ring coupling gain (trained).
    pub b: f64,
    pub kind: NonlinearityKind,
    pub mask: Mask,
}

impl ReservoirParams {
    pub fn new(a: f64, b: f64, kind: NonlinearityKind, mask: Mask) -> ReservoirParams {
        ReservoirParams { a, b, kind, mask }
    }

    pub fn n_x(&self) -> usize {
        self.mask.n_nodes()
    }
}

/// How much state history a forward pass retains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceMode {
    /// All T+1 state vectors, x(0) through x(T). Needed for full BPTT.
    Full,
    /// Only x(T-1) and x(T).
    Truncated,
}

/// Per-sample forward record.
#[derive(Debug, Clone, PartialEq)]
pub enum ReservoirTrace {
    /// `states[k]` = x(k) for k = 0..=T; `states[0]` is the zero vector.
    Full { states: Vec<Vec<f64>> },
    Truncated { prev: Vec<f64>, last: Vec<f64> },
}

impl ReservoirTrace {
    pub fn mode(&self) -> TraceMode {
        match self {
            ReservoirTrace::Full { .. } => TraceMode::Full,
            ReservoirTrace::Truncated { .. } => TraceMode::Truncated,
        }
    }

    /// Number of state vectors held, the quantity the memory contract bounds:
    /// T+1 in full mode, 2 in truncated mode.
    pub fn stored_states(&self) -> usize {
        match self {
            ReservoirTrace::Full { states } => states.len(),
            ReservoirTrace::Truncated { .. } => 2,
        }
    }

    /// x(T)
    pub fn last(&self) -> &[f64] {
        match self {
            ReservoirTrace::Full { states } => states.last().expect("non-empty trace"),
            ReservoirTrace::Truncated { last, .. } => last,
        }
    }

    /// x(T-1)
    pub fn prev(&self) -> &[f64] {
        match self {
            ReservoirTrace::Full { states } => &states[states.len() - 2],
            ReservoirTrace::Truncated { prev, .. } => prev,
        }
    }
}

/// One recurrence step: fill `out` with x(k) from x(k-1) and the drive j(k).
/// Returns the 1-based node index of the first non-finite value, if any.
#[inline]
fn step(
    params: &ReservoirParams,
    drive: &[f64],
    prev: &[f64],
    out: &mut [f64],
) -> std::result::Result<(), usize> {
    let n_x = prev.len();
    for n in 0..n_x {
        let z = drive[n] + prev[n];
        let ring = if n == 0 { prev[n_x - 1] } else { out[n - 1] };
        let x = params.kind.apply(params.a, z) + params.b * ring;
        if !x.is_finite() {
            return Err(n + 1);
        }
        out[n] = x;
    }
    Ok(())
}

/// Drive the recurrence over a sample, invoking `observe(x(k), x(k-1))` after
/// each step. The observer is how the streaming feature accumulation hooks in
/// without the trace having to retain history.
pub fn run_with_observer<F>(
    params: &ReservoirParams,
    sample: &Sample,
    mode: TraceMode,
    mut observe: F,
) -> Result<ReservoirTrace>
where
    F: FnMut(&[f64], &[f64]),
{
    let n_x = params.n_x();
    if sample.series.is_empty() {
        return Err(Error::InvalidData("sample has an empty series".into()));
    }
    for (k, row) in sample.series.iter().enumerate() {
        if row.len() != params.mask.n_inputs() {
            return Err(Error::DimensionMismatch(format!(
                "sample row {k} has {} features, mask expects {}",
                row.len(),
                params.mask.n_inputs()
            )));
        }
    }

    let mut drive = vec![0.0; n_x];
    match mode {
        TraceMode::Full => {
            let mut states = Vec::with_capacity(sample.series.len() + 1);
            states.push(vec![0.0; n_x]);
            for (i, row) in sample.series.iter().enumerate() {
                params.mask.apply_into(row, &mut drive);
                let mut next = vec![0.0; n_x];
                step(params, &drive, states.last().unwrap(), &mut next)
                    .map_err(|n| Error::Divergence { k: i + 1, n })?;
                observe(&next, states.last().unwrap());
                states.push(next);
            }
            Ok(ReservoirTrace::Full { states })
        }
        TraceMode::Truncated => {
            let mut prev = vec![0.0; n_x];
            let mut curr = vec![0.0; n_x];
            for (i, row) in sample.series.iter().enumerate() {
                if i > 0 {
                    std::mem::swap(&mut prev, &mut curr);
                }
                params.mask.apply_into(row, &mut drive);
                step(params, &drive, &prev, &mut curr)
                    .map_err(|n| Error::Divergence { k: i + 1, n })?;
                observe(&curr, &prev);
            }
            Ok(ReservoirTrace::Truncated { prev, last: curr })
        }
    }
}

/// Forward pass retaining state per `mode`.
pub fn run_reservoir(
    params: &ReservoirParams,
    sample: &Sample,
    mode: TraceMode,
) -> Result<ReservoirTrace> {
    run_with_observer(params, sample, mode, |_, _| {})
}
