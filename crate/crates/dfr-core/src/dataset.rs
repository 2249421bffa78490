//! Labeled multivariate time-series datasets: JSON container, deterministic
//! synthetic generators for desk-scale verification, and train-split
//! standardization.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// One labeled series: `T` rows of `n_features` values each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub label: usize,
    pub series: Vec<Vec<f64>>,
}

impl Sample {
    /// Series length T.
    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }
}

/// A named dataset with train/test splits.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub n_features: usize,
    pub n_classes: usize,
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
}

impl Dataset {
    /// Longest series length over both splits.
    pub fn max_len(&self) -> usize {
        self.train
            .iter()
            .chain(self.test.iter())
            .map(Sample::len)
            .max()
            .unwrap_or(0)
    }

    /// Check every container invariant, naming the offending sample on failure.
    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 2 {
            return Err(Error::InvalidData(format!(
                "n_classes must be >= 2, got {}",
                self.n_classes
            )));
        }
        if self.n_features < 1 {
            return Err(Error::InvalidData("n_features must be >= 1".into()));
        }
        if self.train.is_empty() || self.test.is_empty() {
            return Err(Error::InvalidData("both splits must be non-empty".into()));
        }
        for (split, samples) in [("train", &self.train), ("test", &self.test)] {
            for (idx, sample) in samples.iter().enumerate() {
                if sample.label >= self.n_classes {
                    return Err(Error::InvalidData(format!(
                        "{split} sample {idx}: label {} out of range (n_classes {})",
                        sample.label, self.n_classes
                    )));
                }
                if sample.series.is_empty() {
                    return Err(Error::InvalidData(format!(
                        "{split} sample {idx}: empty series"
                    )));
                }
                for (row_idx, row) in sample.series.iter().enumerate() {
                    if row.len() != self.n_features {
                        return Err(Error::InvalidData(format!(
                            "{split} sample {idx}: row {row_idx} has {} entries, expected {}",
                            row.len(),
                            self.n_features
                        )));
                    }
                    if let Some(col) = row.iter().position(|v| !v.is_finite()) {
                        return Err(Error::InvalidData(format!(
                            "{split} sample {idx}: non-finite value at row {row_idx}, column {col}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

// On-disk layout: {"name", "n_features", "n_classes", "splits": {"train", "test"}}.
#[derive(Serialize, Deserialize)]
struct DatasetFile {
    name: String,
    n_features: usize,
    n_classes: usize,
    splits: SplitsFile,
}

#[derive(Serialize, Deserialize)]
struct SplitsFile {
    train: Vec<Sample>,
    test: Vec<Sample>,
}

impl From<&Dataset> for DatasetFile {
    fn from(d: &Dataset) -> Self {
        DatasetFile {
            name: d.name.clone(),
            n_features: d.n_features,
            n_classes: d.n_classes,
            splits: SplitsFile {
                train: d.train.clone(),
                test: d.test.clone(),
            },
        }
    }
}

impl From<DatasetFile> for Dataset {
    fn from(f: DatasetFile) -> Self {
        Dataset {
            name: f.name,
            n_features: f.n_features,
            n_classes: f.n_classes,
            train: f.splits.train,
            test: f.splits.test,
        }
    }
}

/// Canonical serialization of a dataset (pretty JSON plus trailing newline).
///
/// `load_dataset` followed by `dataset_to_string` reproduces a canonical file
/// byte for byte.
pub fn dataset_to_string(dataset: &Dataset) -> Result<String> {
    dataset.validate()?;
    let mut s = serde_json::to_string_pretty(&DatasetFile::from(dataset))?;
    s.push('\n');
    Ok(s)
}

pub fn dataset_from_str(text: &str) -> Result<Dataset> {
    let file: DatasetFile = serde_json::from_str(text)?;
    let dataset = Dataset::from(file);
    dataset.validate()?;
    Ok(dataset)
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    dataset_from_str(&text)
}

pub fn write_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    std::fs::write(path, dataset_to_string(dataset)?)?;
    Ok(())
}

/// Two-class synthetic tasks the desk-scale experiments run on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthTask {
    /// Classes differ by frequency: 2 vs 5 cycles per series.
    FrequencyPair,
    /// Classes differ by amplitude: 0.5 vs 1.0, both at 2 cycles per series.
    AmplitudePair,
}

impl SynthTask {
    pub fn slug(&self) -> &'static str {
        match self {
            SynthTask::FrequencyPair => "frequency-pair",
            SynthTask::AmplitudePair => "amplitude-pair",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub task: SynthTask,
    /// Samples per class per split.
    pub per_class: usize,
    /// Series length T.
    pub len: usize,
    pub n_features: usize,
    /// Standard deviation of the additive Gaussian noise.
    pub noise: f64,
    pub seed: u64,
}

fn synth_signal(task: SynthTask, class: usize, k: usize, len: usize) -> f64 {
    let phase = |cycles: f64| (2.0 * std::f64::consts::PI * cycles * k as f64 / len as f64).sin();
    match task {
        SynthTask::FrequencyPair => {
            let cycles = if class == 0 { 2.0 } else { 5.0 };
            phase(cycles)
        }
        SynthTask::AmplitudePair => {
            let amp = if class == 0 { 0.5 } else { 1.0 };
            amp * phase(2.0)
        }
    }
}

/// Deterministic synthetic dataset: a pure function of the spec.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<Dataset> {
    if spec.len < 8 {
        return Err(Error::InvalidData(format!(
            "synthetic series length must be >= 8, got {}",
            spec.len
        )));
    }
    if !spec.noise.is_finite() || spec.noise < 0.0 {
        return Err(Error::InvalidData(format!(
            "noise must be finite and >= 0, got {}",
            spec.noise
        )));
    }
    if spec.per_class == 0 || spec.n_features == 0 {
        return Err(Error::InvalidData(
            "per_class and n_features must be >= 1".into(),
        ));
    }

    let mut rng = SplitMix64::new(spec.seed);
    let make_split = |rng: &mut SplitMix64| -> Vec<Sample> {
        let mut samples = Vec::with_capacity(2 * spec.per_class);
        for class in 0..2 {
            for _ in 0..spec.per_class {
                let series = (0..spec.len)
                    .map(|k| {
                        let clean = synth_signal(spec.task, class, k, spec.len);
                        (0..spec.n_features)
                            .map(|_| {
                                if spec.noise > 0.0 {
                                    clean + spec.noise * rng.normal()
                                } else {
                                    clean
                                }
                            })
                            .collect()
                    })
                    .collect();
                samples.push(Sample {
                    label: class,
                    series,
                });
            }
        }
        samples
    };
    let train = make_split(&mut rng);
    let test = make_split(&mut rng);

    let dataset = Dataset {
        name: format!("{}-seed{}", spec.task.slug(), spec.seed),
        n_features: spec.n_features,
        n_classes: 2,
        train,
        test,
    };
    dataset.validate()?;
    Ok(dataset)
}

/// Per-feature standardization statistics, computed over the train split only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    /// Train-split mean and population standard deviation per feature,
    /// pooled over every time step of every train sample.
    pub fn from_train_split(dataset: &Dataset) -> NormStats {
        let d = dataset.n_features;
        let mut mean = vec![0.0; d];
        let mut count = 0usize;
        for sample in &dataset.train {
            for row in &sample.series {
                for (m, v) in mean.iter_mut().zip(row) {
                    *m += v;
                }
            }
            count += sample.series.len();
        }
        for m in &mut mean {
            *m /= count as f64;
        }
        let mut var = vec![0.0; d];
        for sample in &dataset.train {
            for row in &sample.series {
                for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                    let dev = v - m;
                    *s += dev * dev;
                }
            }
        }
        let std = var.iter().map(|s| (s / count as f64).sqrt()).collect();
        NormStats { mean, std }
    }

    /// Shift/scale one value of feature `f`. Constant features (std 0) pass
    /// through untouched.
    #[inline]
    pub fn apply(&self, f: usize, value: f64) -> f64 {
        if self.std[f] == 0.0 {
            value
        } else {
            (value - self.mean[f]) / self.std[f]
        }
    }
}

/// Standardize both splits using train-split statistics.
pub fn normalize(dataset: &Dataset) -> (Dataset, NormStats) {
    let stats = NormStats::from_train_split(dataset);
    let transform = |samples: &[Sample]| {
        samples
            .iter()
            .map(|s| Sample {
                label: s.label,
                series: s
                    .series
                    .iter()
                    .map(|row| {
                        row.iter()
                            .enumerate()
                            .map(|(f, &v)| stats.apply(f, v))
                            .collect()
                    })
                    .collect(),
            })
            .collect()
    };
    let normalized = Dataset {
        name: dataset.name.clone(),
        n_features: dataset.n_features,
        n_classes: dataset.n_classes,
        train: transform(&dataset.train),
        test: transform(&dataset.test),
    };
    (normalized, stats)
}
