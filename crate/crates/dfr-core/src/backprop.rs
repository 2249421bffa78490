//! Gradients of the loss with respect to the two reservoir scalars.
//!
//! The adjoint of state x(k)_n collects three paths: the direct consumption
//! by every feature it enters (the bp value), the ring path to its coupling
//! successor, and the next-step path through the nonlinearity argument:
//!
//! ```text
//! a(k, n) = bpv(k, n) + b * a(succ(k, n)) + f'(z(k+1)_n) * a(k+1, n)
//! succ(k, n) = (k, n+1) for n < n_x, (k+1, 1) for n = n_x
//! ```
//!
//! swept k = T..1 with n descending inside each k, which is exactly the
//! transpose of the forward dependency order. The truncated variant keeps
//! only the k = T slice and therefore needs just x(T-1) and x(T).

use crate::dataset::Sample;
use crate::dprr::{self, dot_index, sum_index};
use crate::error::{Error, Result};
use crate::head::{forward_head, loss, OutputHead};
use crate::reservoir::{ReservoirParams, ReservoirTrace, TraceMode};

/// Gradients with respect to the nonlinearity gain and ring coupling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReservoirGrads {
    pub d_a: f64,
    pub d_b: f64,
}

impl ReservoirGrads {
    pub fn is_finite(&self) -> bool {
        self.d_a.is_finite() && self.d_b.is_finite()
    }
}

/// Nominal arithmetic cost of one nonlinearity evaluation, for the operation
/// counters. Constant per call by construction.
fn eval_cost(params: &ReservoirParams) -> u64 {
    match params.kind {
        crate::reservoir::NonlinearityKind::Linear => 1,
        crate::reservoir::NonlinearityKind::MackeyGlass { .. } => 8,
    }
}

/// Adjoint injected into x(k)_n by the feature layer (1-based k and n):
/// sum_j x(k-1)_j dr[(n-1)n_x+j] + sum_i x(k+1)_i dr[(i-1)n_x+n] + dr[n_x^2+n],
/// with the middle term dropped at k = T.
pub fn dprr_bp_value(k: usize, n: usize, trace: &ReservoirTrace, dr: &[f64]) -> f64 {
    match trace {
        ReservoirTrace::Full { states } => {
            let n_x = states[0].len();
            let t = states.len() - 1;
            assert!(k >= 1 && k <= t, "step {k} outside 1..={t}");
            bpv_full(states, k, n, n_x, t, dr, &mut 0)
        }
        ReservoirTrace::Truncated { .. } => {
            panic!("bp value over all steps requires a full trace")
        }
    }
}

#[inline]
fn bpv_full(
    states: &[Vec<f64>],
    k: usize,
    n: usize,
    n_x: usize,
    t: usize,
    dr: &[f64],
    ops: &mut u64,
) -> f64 {
    let mut value = 0.0;
    let prev = &states[k - 1];
    for j in 1..=n_x {
        value += prev[j - 1] * dr[dot_index(n, j, n_x)];
    }
    if k < t {
        let next = &states[k + 1];
        for i in 1..=n_x {
            value += next[i - 1] * dr[dot_index(i, n, n_x)];
        }
        *ops += 2 * n_x as u64;
    }
    value += dr[sum_index(n, n_x)];
    *ops += 2 * n_x as u64 + 1;
    value
}

fn check_dims(params: &ReservoirParams, sample: &Sample, dr: &[f64]) -> Result<()> {
    let n_x = params.n_x();
    if dr.len() != n_x * (n_x + 1) {
        return Err(Error::DimensionMismatch(format!(
            "feature gradient has {} entries, expected {}",
            dr.len(),
            n_x * (n_x + 1)
        )));
    }
    if sample.series.is_empty() {
        return Err(Error::InvalidData("sample has an empty series".into()));
    }
    Ok(())
}

/// Full backpropagation through time. `trace` must be the full-mode record of
/// `run_reservoir(params, sample)`.
pub fn full_bptt(
    params: &ReservoirParams,
    sample: &Sample,
    trace: &ReservoirTrace,
    dr: &[f64],
) -> Result<ReservoirGrads> {
    full_bptt_counted(params, sample, trace, dr).map(|(g, _)| g)
}

/// As `full_bptt`, also returning the backward-phase arithmetic-operation
/// count.
pub fn full_bptt_counted(
    params: &ReservoirParams,
    sample: &Sample,
    trace: &ReservoirTrace,
    dr: &[f64],
) -> Result<(ReservoirGrads, u64)> {
    check_dims(params, sample, dr)?;
    let states = match trace {
        ReservoirTrace::Full { states } => states,
        ReservoirTrace::Truncated { .. } => {
            return Err(Error::InvalidData(
                "full backpropagation requires a full trace".into(),
            ))
        }
    };
    let n_x = params.n_x();
    let t = states.len() - 1;
    if t != sample.series.len() || states.iter().any(|s| s.len() != n_x) {
        return Err(Error::DimensionMismatch(
            "trace does not match params/sample".into(),
        ));
    }

    // Drive rows j(k), k = 1..=T, recomputed from the sample.
    let drives: Vec<Vec<f64>> = sample.series.iter().map(|row| params.mask.apply(row)).collect();
    let drive = |k: usize| -> &[f64] { &drives[k - 1] };

    let mut ops: u64 = 0;
    let nl_cost = eval_cost(params);
    let mut adj_next = vec![0.0; n_x]; // adjoint row k+1
    let mut adj = vec![0.0; n_x]; // adjoint row k, filled n descending
    let mut d_a = 0.0;
    let mut d_b = 0.0;

    for k in (1..=t).rev() {
        for idx in (0..n_x).rev() {
            let n = idx + 1;
            let mut value = bpv_full(states, k, n, n_x, t, dr, &mut ops);
            // Ring successor: (k, n+1) inside the step, (k+1, 1) across it.
            let succ = if idx + 1 < n_x { adj[idx + 1] } else { adj_next[0] };
            value += params.b * succ;
            ops += 2;
            // Next-step path through z(k+1)_n = j(k+1)_n + x(k)_n.
            if k < t {
                let z_next = drive(k + 1)[idx] + states[k][idx];
                value += params.kind.eval(params.a, z_next).d_dz * adj_next[idx];
                ops += 3 + nl_cost;
            }
            adj[idx] = value;

            let z = drive(k)[idx] + states[k - 1][idx];
            d_a += params.kind.eval(params.a, z).d_da * value;
            let pred = if idx == 0 {
                states[k - 1][n_x - 1]
            } else {
                states[k][idx - 1]
            };
            d_b += pred * value;
            ops += 5 + nl_cost;
        }
        std::mem::swap(&mut adj_next, &mut adj);
    }

    Ok((ReservoirGrads { d_a, d_b }, ops))
}

/// Truncated backpropagation: only the final step's adjoints, computed from
/// x(T-1), x(T) and the last input row. Backward cost is independent of T.
pub fn truncated_bp(
    params: &ReservoirParams,
    trace: &ReservoirTrace,
    sample: &Sample,
    dr: &[f64],
) -> Result<ReservoirGrads> {
    truncated_bp_counted(params, trace, sample, dr).map(|(g, _)| g)
}

/// As `truncated_bp`, also returning the backward-phase arithmetic-operation
/// count.
pub fn truncated_bp_counted(
    params: &ReservoirParams,
    trace: &ReservoirTrace,
    sample: &Sample,
    dr: &[f64],
) -> Result<(ReservoirGrads, u64)> {
    check_dims(params, sample, dr)?;
    let n_x = params.n_x();
    let (prev, last) = (trace.prev(), trace.last());
    if prev.len() != n_x || last.len() != n_x {
        return Err(Error::DimensionMismatch(
            "trace does not match params/sample".into(),
        ));
    }
    let last_row = sample.series.last().expect("non-empty series");
    if last_row.len() != params.mask.n_inputs() {
        return Err(Error::DimensionMismatch(format!(
            "sample has {} features, mask expects {}",
            last_row.len(),
            params.mask.n_inputs()
        )));
    }
    let drive = params.mask.apply(last_row);

    let mut ops: u64 = 0;
    let nl_cost = eval_cost(params);
    let mut adj = vec![0.0; n_x];
    let mut d_a = 0.0;
    let mut d_b = 0.0;

    for idx in (0..n_x).rev() {
        let n = idx + 1;
        // bp value: sum_j x(T-1)_j dr[(n-1)n_x+j] + dr[n_x^2+n].
        let mut value = 0.0;
        for j in 1..=n_x {
            value += prev[j - 1] * dr[dot_index(n, j, n_x)];
        }
        value += dr[sum_index(n, n_x)];
        ops += 2 * n_x as u64 + 1;
        // a(n) = bp value + b * a(n+1), with a(n_x + 1) = 0.
        let succ = if idx + 1 < n_x { adj[idx + 1] } else { 0.0 };
        value += params.b * succ;
        ops += 2;
        adj[idx] = value;

        let z = drive[idx] + prev[idx];
        d_a += params.kind.eval(params.a, z).d_da * value;
        let pred = if idx == 0 { prev[n_x - 1] } else { last[idx - 1] };
        d_b += pred * value;
        ops += 5 + nl_cost;
    }

    Ok((ReservoirGrads { d_a, d_b }, ops))
}

/// Loss of the whole pipeline (reservoir -> features -> head) on one sample.
pub fn pipeline_loss(
    params: &ReservoirParams,
    sample: &Sample,
    head: &OutputHead,
) -> Result<f64> {
    let (_, features) = dprr::forward(params, sample, TraceMode::Truncated)?;
    Ok(loss(&forward_head(head, features.values()), sample.label))
}

/// Central finite differences of the pipeline loss in the two reservoir
/// scalars. The independent oracle for both backpropagation variants.
pub fn finite_diff_grads(
    params: &ReservoirParams,
    sample: &Sample,
    head: &OutputHead,
    h: f64,
) -> Result<ReservoirGrads> {
    assert!(h > 0.0);
    let mut perturbed = params.clone();
    perturbed.a = params.a + h;
    let la_plus = pipeline_loss(&perturbed, sample, head)?;
    perturbed.a = params.a - h;
    let la_minus = pipeline_loss(&perturbed, sample, head)?;
    perturbed.a = params.a;
    perturbed.b = params.b + h;
    let lb_plus = pipeline_loss(&perturbed, sample, head)?;
    perturbed.b = params.b - h;
    let lb_minus = pipeline_loss(&perturbed, sample, head)?;
    Ok(ReservoirGrads {
        d_a: (la_plus - la_minus) / (2.0 * h),
        d_b: (lb_plus - lb_minus) / (2.0 * h),
    })
}
