//! Grid-search baseline over the two reservoir scalars, with the
//! regularization sweep inside each cell and the escalation protocol that
//! grows the grid until a target accuracy is reached.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::dprr;
use crate::error::{Error, Result};
use crate::head::{select_beta, DEFAULT_BETAS};
use crate::reservoir::{Mask, ReservoirParams, TraceMode};
use crate::trainer::{evaluate_head, ReservoirConfig};

/// Search ranges the baseline sweeps by default.
pub fn default_a_range() -> (f64, f64) {
    (10f64.powf(-3.75), 10f64.powf(-0.25))
}

pub fn default_b_range() -> (f64, f64) {
    (10f64.powf(-2.75), 10f64.powf(-0.25))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub a_range: (f64, f64),
    pub b_range: (f64, f64),
    /// Divisions per axis; the grid evaluates divisions^2 cells.
    pub divisions: usize,
    pub betas: Vec<f64>,
    pub reservoir: ReservoirConfig,
}

impl GridConfig {
    pub fn new(reservoir: ReservoirConfig, divisions: usize) -> GridConfig {
        GridConfig {
            a_range: default_a_range(),
            b_range: default_b_range(),
            divisions,
            betas: DEFAULT_BETAS.to_vec(),
            reservoir,
        }
    }

    fn validate(&self) -> Result<()> {
        for (lo, hi) in [self.a_range, self.b_range] {
            if !(lo > 0.0 && hi > lo) {
                return Err(Error::InvalidData(format!(
                    "grid range must be positive with lo < hi, got [{lo}, {hi}]"
                )));
            }
        }
        if self.divisions == 0 {
            return Err(Error::InvalidData("divisions must be >= 1".into()));
        }
        if self.betas.is_empty() {
            return Err(Error::InvalidData("empty beta list".into()));
        }
        Ok(())
    }
}

/// Divide [lo, hi] into `divisions` equal sections in log10 space and return
/// the midpoint of each section.
pub fn grid_points(range: (f64, f64), divisions: usize) -> Vec<f64> {
    let (lo, hi) = range;
    let (log_lo, log_hi) = (lo.log10(), hi.log10());
    let width = (log_hi - log_lo) / divisions as f64;
    (0..divisions)
        .map(|m| 10f64.powf(log_lo + (m as f64 + 0.5) * width))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub a_index: usize,
    pub b_index: usize,
    pub a: f64,
    pub b: f64,
    /// Winning regularization, absent when the cell diverged.
    pub beta: Option<f64>,
    pub train_loss: Option<f64>,
    pub test_accuracy: f64,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub divisions: usize,
    /// Row-major over (a_index, b_index).
    pub cells: Vec<GridCell>,
    /// Index of the best cell under the tie rule.
    pub best: usize,
    pub seconds: f64,
}

impl GridResult {
    pub fn best_cell(&self) -> &GridCell {
        &self.cells[self.best]
    }
}

/// Tie rule: higher accuracy, then smaller a index, then smaller b index,
/// then larger regularization.
fn better(candidate: &GridCell, incumbent: &GridCell) -> bool {
    if candidate.test_accuracy != incumbent.test_accuracy {
        return candidate.test_accuracy > incumbent.test_accuracy;
    }
    if candidate.a_index != incumbent.a_index {
        return candidate.a_index < incumbent.a_index;
    }
    if candidate.b_index != incumbent.b_index {
        return candidate.b_index < incumbent.b_index;
    }
    candidate.beta.unwrap_or(f64::NEG_INFINITY) > incumbent.beta.unwrap_or(f64::NEG_INFINITY)
}

fn eval_cell(dataset: &Dataset, config: &GridConfig, cell: &mut GridCell) -> Result<()> {
    let mask = Mask::generate(
        config.reservoir.mask_seed,
        config.reservoir.n_x,
        dataset.n_features,
    );
    let params = ReservoirParams::new(cell.a, cell.b, config.reservoir.kind, mask);

    let features: Result<Vec<Vec<f64>>> = dataset
        .train
        .iter()
        .map(|sample| {
            let (_, feats) = dprr::forward(&params, sample, TraceMode::Truncated)?;
            Ok(feats.values().to_vec())
        })
        .collect();
    let outcome = features.and_then(|rows| {
        let labels: Vec<usize> = dataset.train.iter().map(|s| s.label).collect();
        let selection = select_beta(&rows, &labels, dataset.n_classes, &config.betas)?;
        let (accuracy, _) = evaluate_head(&params, &selection.head, &dataset.test)?;
        Ok((selection, accuracy))
    });
    match outcome {
        Ok((selection, accuracy)) => {
            cell.beta = Some(selection.beta);
            cell.train_loss = Some(selection.loss);
            cell.test_accuracy = accuracy;
            Ok(())
        }
        // A cell whose dynamics blow up scores zero instead of aborting the grid.
        Err(Error::Divergence { .. }) | Err(Error::Solver(_)) => {
            cell.diverged = true;
            cell.test_accuracy = 0.0;
            Ok(())
        }
        Err(e) => Err(e),
    }
}

/// Evaluate every (a, b) cell: reservoir + features over all samples, the
/// regularization sweep on the train features, accuracy on the test split.
pub fn grid_search(dataset: &Dataset, config: &GridConfig) -> Result<GridResult> {
    config.validate()?;
    dataset.validate()?;
    config.reservoir.kind.validate()?;
    let start = Instant::now();

    let points_a = grid_points(config.a_range, config.divisions);
    let points_b = grid_points(config.b_range, config.divisions);
    let mut cells: Vec<GridCell> = Vec::with_capacity(config.divisions * config.divisions);
    for (a_index, &a) in points_a.iter().enumerate() {
        for (b_index, &b) in points_b.iter().enumerate() {
            cells.push(GridCell {
                a_index,
                b_index,
                a,
                b,
                beta: None,
                train_loss: None,
                test_accuracy: 0.0,
                diverged: false,
            });
        }
    }

    cells
        .par_iter_mut()
        .try_for_each(|cell| eval_cell(dataset, config, cell))?;

    let mut best = 0;
    for (i, cell) in cells.iter().enumerate().skip(1) {
        if better(cell, &cells[best]) {
            best = i;
        }
    }
    Ok(GridResult {
        divisions: config.divisions,
        cells,
        best,
        seconds: start.elapsed().as_secs_f64().max(1e-9),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelOutcome {
    pub divisions: usize,
    pub best_accuracy: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Escalation {
    /// Whether some level reached the target accuracy.
    pub reached: bool,
    /// Divisions of `result`: the first sufficient level, or the best seen.
    pub divisions: usize,
    pub result: GridResult,
    pub levels: Vec<LevelOutcome>,
    /// Total cells evaluated: sum of d^2 over the levels run.
    pub cells_evaluated: u64,
    pub seconds: f64,
}

/// Increase the per-axis divisions from 1 until the best test accuracy
/// reaches `target_accuracy`, re-running the whole grid each level.
pub fn escalate(
    dataset: &Dataset,
    base: &GridConfig,
    target_accuracy: f64,
    max_divisions: usize,
) -> Result<Escalation> {
    if max_divisions == 0 {
        return Err(Error::InvalidData("max divisions must be >= 1".into()));
    }
    let start = Instant::now();
    let mut levels = Vec::new();
    let mut cells_evaluated = 0u64;
    let mut best_seen: Option<GridResult> = None;

    for divisions in 1..=max_divisions {
        let config = GridConfig {
            divisions,
            ..base.clone()
        };
        let result = grid_search(dataset, &config)?;
        cells_evaluated += (divisions * divisions) as u64;
        let accuracy = result.best_cell().test_accuracy;
        levels.push(LevelOutcome {
            divisions,
            best_accuracy: accuracy,
            seconds: result.seconds,
        });
        let reached = accuracy >= target_accuracy;
        let strictly_better = best_seen
            .as_ref()
            .is_none_or(|b| accuracy > b.best_cell().test_accuracy);
        if strictly_better {
            best_seen = Some(result);
        }
        if reached {
            let result = best_seen.take().expect("level just stored");
            // `result` is the sufficient level: it was strictly better or the
            // earlier equal-accuracy level already met the target and returned.
            return Ok(Escalation {
                reached: true,
                divisions: result.divisions,
                result,
                levels,
                cells_evaluated,
                seconds: start.elapsed().as_secs_f64().max(1e-9),
            });
        }
    }

    let result = best_seen.expect("at least one level ran");
    Ok(Escalation {
        reached: false,
        divisions: result.divisions,
        result,
        levels,
        cells_evaluated,
        seconds: start.elapsed().as_secs_f64().max(1e-9),
    })
}
