//! Memory accounting for the truncated-backprop storage claim, and the
//! train-vs-grid-search experiment runner.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::Result;
use crate::gridsearch::{default_a_range, default_b_range, escalate, Escalation, GridConfig};
use crate::trainer::{train, ReservoirConfig, TrainConfig, TrainedModel};

/// Stored-value counts for one task shape.
///
/// Counts cover the reservoir states retained for backpropagation, the
/// feature vector, and the readout weights:
///
/// ```text
/// n_r        = n_x * (n_x + 1)
/// weights    = n_y * (n_r + 1)
/// naive      = T * n_x + n_r + weights      (full backpropagation)
/// simplified = 2 * n_x + n_r + weights      (truncated: two states)
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryReport {
    pub series_len: usize,
    pub n_x: usize,
    pub n_y: usize,
    pub naive: u64,
    pub simplified: u64,
    /// (naive - simplified) / naive, in [0, 1).
    pub reduction: f64,
}

impl MemoryReport {
    /// Reduction as a rounded integer percentage.
    pub fn reduction_percent(&self) -> u32 {
        (self.reduction * 100.0).round() as u32
    }
}

pub fn memory_counts(series_len: usize, n_x: usize, n_y: usize) -> MemoryReport {
    assert!(series_len >= 1 && n_x >= 1 && n_y >= 1);
    let n_r = (n_x * (n_x + 1)) as u64;
    let weights = n_y as u64 * (n_r + 1);
    let naive = (series_len * n_x) as u64 + n_r + weights;
    let simplified = (2 * n_x) as u64 + n_r + weights;
    MemoryReport {
        series_len,
        n_x,
        n_y,
        naive,
        simplified,
        reduction: (naive - simplified) as f64 / naive as f64,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub reservoir: ReservoirConfig,
    pub train: TrainConfig,
    pub a_range: (f64, f64),
    pub b_range: (f64, f64),
    /// Escalation stops after this many divisions per axis.
    pub max_divisions: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            reservoir: ReservoirConfig::default(),
            train: TrainConfig::default(),
            a_range: default_a_range(),
            b_range: default_b_range(),
            max_divisions: 20,
        }
    }
}

/// Head-to-head outcome: gradient training timed against the escalating grid
/// search targeting the same accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub dataset: String,
    pub bp_accuracy: f64,
    pub bp_seconds: f64,
    /// Divisions of the grid level reported by the escalation.
    pub grid_divisions: usize,
    /// Whether the grid reached the gradient-trained accuracy at all.
    pub grid_reached: bool,
    pub grid_accuracy: f64,
    pub grid_seconds: f64,
    /// grid_seconds / bp_seconds.
    pub speedup: f64,
    pub memory: MemoryReport,
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<ExperimentReport> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Everything `run_experiment` produces, including the artifacts the report
/// summarizes.
pub struct ExperimentOutcome {
    pub report: ExperimentReport,
    pub model: TrainedModel,
    pub escalation: Escalation,
}

/// Train (timed), then escalate the grid search against the trained accuracy
/// (timed), then assemble the report. Deterministic apart from wall-clock
/// fields.
pub fn run_experiment(dataset: &Dataset, config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let bp_start = Instant::now();
    let model = train(dataset, &config.reservoir, &config.train)?;
    let bp_seconds = bp_start.elapsed().as_secs_f64().max(1e-9);
    let (bp_accuracy, _) = model.evaluate(&dataset.test)?;

    let grid_base = GridConfig {
        a_range: config.a_range,
        b_range: config.b_range,
        divisions: 1,
        betas: config.train.betas.clone(),
        reservoir: config.reservoir.clone(),
    };
    let escalation = escalate(dataset, &grid_base, bp_accuracy, config.max_divisions)?;

    let memory = memory_counts(dataset.max_len(), config.reservoir.n_x, dataset.n_classes);
    let report = ExperimentReport {
        dataset: dataset.name.clone(),
        bp_accuracy,
        bp_seconds,
        grid_divisions: escalation.divisions,
        grid_reached: escalation.reached,
        grid_accuracy: escalation.result.best_cell().test_accuracy,
        grid_seconds: escalation.seconds,
        speedup: escalation.seconds / bp_seconds,
        memory,
    };
    Ok(ExperimentOutcome {
        report,
        model,
        escalation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, SynthSpec, SynthTask};
    use crate::reservoir::NonlinearityKind;
    use crate::trainer::evaluate_head;

    /// (series length, class count) pairs with the stored-value totals the
    /// accounting must reproduce, at n_x = 30.
    pub const REFERENCE_ROWS: [(&str, usize, usize, u64, u64, u32); 12] = [
        ("ARAB", 93, 10, 13030, 10300, 21),
        ("AUS", 136, 95, 93455, 89435, 4),
        ("CHAR", 205, 20, 25700, 19610, 24),
        ("CMU", 580, 2, 20192, 2852, 86),
        ("ECG", 152, 2, 7352, 2852, 61),
        ("JPVOW", 29, 9, 10179, 9369, 8),
        ("KICK", 841, 2, 28022, 2852, 90),
        ("LIB", 45, 15, 16245, 14955, 8),
        ("NET", 994, 13, 42853, 13093, 69),
        ("UWAV", 315, 8, 17828, 8438, 53),
        ("WAF", 198, 2, 8732, 2852, 67),
        ("WALK", 1918, 2, 60332, 2852, 95),
    ];

    #[test]
    fn reference_rows_reproduce_exactly() {
        for (name, t, n_y, naive, simplified, percent) in REFERENCE_ROWS {
            let report = memory_counts(t, 30, n_y);
            assert_eq!(report.naive, naive, "{name} naive");
            assert_eq!(report.simplified, simplified, "{name} simplified");
            assert_eq!(report.reduction_percent(), percent, "{name} reduction");
        }
    }

    #[test]
    fn worked_example_is_eighty_percent() {
        let report = memory_counts(500, 30, 3);
        assert_eq!(report.naive, 18723);
        assert_eq!(report.simplified, 3783);
        assert!((report.reduction * 100.0 - 79.8).abs() < 0.05);
        assert_eq!(report.reduction_percent(), 80);
    }

    #[test]
    fn reduction_monotone_in_shape() {
        // Longer series help, more classes hurt, at fixed n_x.
        let mut prev = -1.0;
        for t in [10, 50, 100, 500, 2000] {
            let r = memory_counts(t, 30, 4).reduction;
            assert!(r > prev);
            prev = r;
        }
        let mut prev = 2.0;
        for n_y in [2, 5, 10, 50] {
            let r = memory_counts(200, 30, n_y).reduction;
            assert!(r < prev);
            prev = r;
        }
    }

    #[test]
    fn experiment_report_round_trips_through_json() {
        let report = ExperimentReport {
            dataset: "round-trip".into(),
            bp_accuracy: 0.9375,
            bp_seconds: 1.25,
            grid_divisions: 3,
            grid_reached: true,
            grid_accuracy: 0.9375,
            grid_seconds: 12.5,
            speedup: 10.0,
            memory: memory_counts(64, 30, 2),
        };
        let text = report.to_json().unwrap();
        assert_eq!(ExperimentReport::from_json(&text).unwrap(), report);
    }

    #[test]
    fn desk_scale_experiment_is_consistent() {
        let dataset = generate_synthetic(&SynthSpec {
            task: SynthTask::FrequencyPair,
            per_class: 6,
            len: 16,
            n_features: 1,
            noise: 0.1,
            seed: 17,
        })
        .unwrap();
        let config = ExperimentConfig {
            reservoir: ReservoirConfig {
                n_x: 5,
                kind: NonlinearityKind::Linear,
                mask_seed: 4,
            },
            train: TrainConfig {
                epochs: 3,
                ..TrainConfig::default()
            },
            max_divisions: 4,
            ..ExperimentConfig::default()
        };
        let outcome = run_experiment(&dataset, &config).unwrap();
        let report = &outcome.report;
        assert!(report.bp_seconds > 0.0 && report.grid_seconds > 0.0);
        assert!((report.speedup - report.grid_seconds / report.bp_seconds).abs() < 1e-12);
        // Recomputation oracle for the reported accuracy.
        let (acc, _) =
            evaluate_head(&outcome.model.params, &outcome.model.head, &dataset.test).unwrap();
        assert_eq!(report.bp_accuracy, acc);
        assert_eq!(report.memory.series_len, 16);
        if report.grid_reached {
            assert!(report.grid_accuracy >= report.bp_accuracy);
            assert_eq!(
                outcome.escalation.cells_evaluated,
                (1..=report.grid_divisions as u64).map(|d| d * d).sum::<u64>()
            );
        }
    }
}
