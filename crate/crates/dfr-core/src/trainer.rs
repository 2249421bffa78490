//! Gradient training protocol: per-sample SGD over the two reservoir scalars
//! and the readout, a staged learning-rate schedule, and a closed-form ridge
//! refit of the readout once the reservoir parameters have settled.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Sample};
use crate::dprr;
use crate::error::{Error, Result};
use crate::head::{
    forward_head, head_gradients, loss, mean_loss, ridge_fit, select_beta, BetaSelection,
    OutputHead, DEFAULT_BETAS,
};
use crate::reservoir::{Mask, NonlinearityKind, ReservoirParams, TraceMode};
use crate::rng::SplitMix64;

/// Fixed reservoir structure: everything except the two trained scalars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReservoirConfig {
    pub n_x: usize,
    pub kind: NonlinearityKind,
    pub mask_seed: u64,
}

impl Default for ReservoirConfig {
    fn default() -> Self {
        ReservoirConfig {
            n_x: 30,
            kind: NonlinearityKind::Linear,
            mask_seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub init_a: f64,
    pub init_b: f64,
    pub lr_res_base: f64,
    pub lr_out_base: f64,
    /// Epochs at whose start the reservoir learning rate is multiplied by 0.1.
    pub res_drop_epochs: Vec<usize>,
    /// Same for the output learning rate.
    pub out_drop_epochs: Vec<usize>,
    pub betas: Vec<f64>,
    pub bp_mode: TraceMode,
    pub shuffle_seed: u64,
    /// Both reservoir scalars are kept inside this interval after each update.
    pub clamp: (f64, f64),
    /// When set, the regularization sweep scores candidates on this held-out
    /// fraction of the train features instead of the fitting rows.
    pub beta_holdout: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 25,
            init_a: 0.01,
            init_b: 0.01,
            lr_res_base: 1.0,
            lr_out_base: 1.0,
            res_drop_epochs: vec![5, 10, 15, 20],
            out_drop_epochs: vec![10, 15, 20],
            betas: DEFAULT_BETAS.to_vec(),
            bp_mode: TraceMode::Truncated,
            shuffle_seed: 1,
            clamp: (1e-6, 0.99),
            beta_holdout: None,
        }
    }
}

/// Learning rates in effect during `epoch` (1-based). A drop listed for
/// epoch m takes effect from the start of epoch m.
pub fn lr_schedule(config: &TrainConfig, epoch: usize) -> (f64, f64) {
    let drops = |epochs: &[usize]| epochs.iter().filter(|&&m| m <= epoch).count() as i32;
    (
        config.lr_res_base * 0.1f64.powi(drops(&config.res_drop_epochs)),
        config.lr_out_base * 0.1f64.powi(drops(&config.out_drop_epochs)),
    )
}

/// Per-epoch running metrics, recorded as the samples were visited.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub mean_loss: f64,
    pub accuracy: f64,
    pub lr_res: f64,
    pub lr_out: f64,
    /// Updates that hit the parameter clamp.
    pub clamped: u64,
    /// Samples skipped by the divergence guard.
    pub skipped: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub params: ReservoirParams,
    /// Ridge-refit readout actually used for prediction.
    pub head: OutputHead,
    /// Readout as the gradient phase left it, kept for ablation.
    pub sgd_head: OutputHead,
    pub beta: f64,
    /// Mean cross-entropy of the refit head on its selection split.
    pub refit_loss: f64,
    pub history: Vec<EpochStats>,
    /// Largest number of state vectors any sample's forward pass retained:
    /// T+1 in full mode, 2 in truncated mode.
    pub peak_stored_states: usize,
}

impl TrainedModel {
    pub fn evaluate(&self, samples: &[Sample]) -> Result<(f64, f64)> {
        evaluate_head(&self.params, &self.head, samples)
    }
}

/// Accuracy (argmax, ties toward the lowest class) and mean cross-entropy of
/// a readout over a split. Samples are scored in parallel with an ordered,
/// sequential reduction so results stay bitwise reproducible.
pub fn evaluate_head(
    params: &ReservoirParams,
    head: &OutputHead,
    samples: &[Sample],
) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::InvalidData("cannot evaluate an empty split".into()));
    }
    let scored: Result<Vec<(bool, f64)>> = samples
        .par_iter()
        .map(|sample| {
            let (_, feats) = dprr::forward(params, sample, TraceMode::Truncated)?;
            let pred = forward_head(head, feats.values());
            Ok((pred.argmax() == sample.label, loss(&pred, sample.label)))
        })
        .collect();
    let scored = scored?;
    let correct = scored.iter().filter(|(hit, _)| *hit).count();
    let total: f64 = scored.iter().map(|(_, l)| l).sum();
    let n = samples.len() as f64;
    Ok((correct as f64 / n, total / n))
}

/// Train-split feature rows under fixed reservoir parameters.
fn feature_rows(params: &ReservoirParams, samples: &[Sample]) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    let rows: Result<Vec<Vec<f64>>> = samples
        .par_iter()
        .map(|sample| {
            let (_, feats) = dprr::forward(params, sample, TraceMode::Truncated)?;
            Ok(feats.values().to_vec())
        })
        .collect();
    Ok((rows?, samples.iter().map(|s| s.label).collect()))
}

fn select_beta_holdout(
    rows: &[Vec<f64>],
    labels: &[usize],
    n_y: usize,
    betas: &[f64],
    fraction: f64,
    rng: &mut SplitMix64,
) -> Result<BetaSelection> {
    if !(0.0..1.0).contains(&fraction) || fraction == 0.0 {
        return Err(Error::InvalidData(format!(
            "holdout fraction must be in (0, 1), got {fraction}"
        )));
    }
    let s = rows.len();
    let n_hold = ((s as f64 * fraction).round() as usize).clamp(1, s.saturating_sub(1));
    if s - n_hold == 0 {
        return Err(Error::InvalidData(
            "holdout fraction leaves no fitting rows".into(),
        ));
    }
    let mut order: Vec<usize> = (0..s).collect();
    rng.shuffle(&mut order);
    let pick = |idxs: &[usize]| -> (Vec<Vec<f64>>, Vec<usize>) {
        (
            idxs.iter().map(|&i| rows[i].clone()).collect(),
            idxs.iter().map(|&i| labels[i]).collect(),
        )
    };
    let (fit_rows, fit_labels) = pick(&order[..s - n_hold]);
    let (hold_rows, hold_labels) = pick(&order[s - n_hold..]);

    let mut best: Option<(f64, f64)> = None; // (beta, holdout loss)
    for &beta in betas {
        let head = ridge_fit(&fit_rows, &fit_labels, n_y, beta)?;
        let l = mean_loss(&head, &hold_rows, &hold_labels);
        let replace = match best {
            None => true,
            Some((bb, bl)) => l < bl || (l == bl && beta > bb),
        };
        if replace {
            best = Some((beta, l));
        }
    }
    let (beta, hold_loss) = best.ok_or_else(|| Error::InvalidData("empty beta list".into()))?;
    // Refit on every row with the winning candidate.
    let head = ridge_fit(rows, labels, n_y, beta)?;
    Ok(BetaSelection {
        beta,
        head,
        loss: hold_loss,
    })
}

/// Run the full protocol: SGD over (a, b, W, bias) with the staged schedule,
/// then the ridge refit of the readout under the final reservoir parameters.
pub fn train(
    dataset: &Dataset,
    reservoir: &ReservoirConfig,
    config: &TrainConfig,
) -> Result<TrainedModel> {
    if config.epochs == 0 {
        return Err(Error::InvalidData("epochs must be >= 1".into()));
    }
    if config.clamp.0 > config.clamp.1 {
        return Err(Error::InvalidData("clamp bounds out of order".into()));
    }
    reservoir.kind.validate()?;
    dataset.validate()?;

    let mask = Mask::generate(reservoir.mask_seed, reservoir.n_x, dataset.n_features);
    let mut params = ReservoirParams::new(config.init_a, config.init_b, reservoir.kind, mask);
    let n_r = reservoir.n_x * (reservoir.n_x + 1);
    let mut head = OutputHead::zeros(dataset.n_classes, n_r);

    let mut rng = SplitMix64::new(config.shuffle_seed);
    let mut order: Vec<usize> = (0..dataset.train.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut peak_stored_states = 0usize;
    let (clamp_lo, clamp_hi) = config.clamp;

    for epoch in 1..=config.epochs {
        let (lr_res_scheduled, lr_out) = lr_schedule(config, epoch);
        let mut lr_res = lr_res_scheduled;
        rng.shuffle(&mut order);

        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        let mut clamped = 0u64;
        let mut skipped = 0u64;

        for &i in &order {
            let sample = &dataset.train[i];
            let (trace, feats) = match dprr::forward(&params, sample, config.bp_mode) {
                Ok(fwd) => fwd,
                Err(Error::Divergence { .. }) => {
                    skipped += 1;
                    lr_res *= 0.5;
                    continue;
                }
                Err(e) => return Err(e),
            };
            peak_stored_states = peak_stored_states.max(trace.stored_states());

            let pred = forward_head(&head, feats.values());
            let sample_loss = loss(&pred, sample.label);
            let grads = head_gradients(&pred, sample.label, feats.values(), &head);
            let res_grads = match config.bp_mode {
                TraceMode::Truncated => {
                    crate::backprop::truncated_bp(&params, &trace, sample, &grads.d_features)?
                }
                TraceMode::Full => {
                    crate::backprop::full_bptt(&params, sample, &trace, &grads.d_features)?
                }
            };

            let finite = sample_loss.is_finite()
                && res_grads.is_finite()
                && grads.d_bias.iter().all(|v| v.is_finite())
                && grads.d_weights.iter().flatten().all(|v| v.is_finite());
            if !finite {
                skipped += 1;
                lr_res *= 0.5;
                continue;
            }

            loss_sum += sample_loss;
            if pred.argmax() == sample.label {
                correct += 1;
            }

            for (w_row, g_row) in head.weights.iter_mut().zip(&grads.d_weights) {
                for (w, g) in w_row.iter_mut().zip(g_row) {
                    *w -= lr_out * g;
                }
            }
            for (b, g) in head.bias.iter_mut().zip(&grads.d_bias) {
                *b -= lr_out * g;
            }

            let a_new = params.a - lr_res * res_grads.d_a;
            let b_new = params.b - lr_res * res_grads.d_b;
            let a_clamped = a_new.clamp(clamp_lo, clamp_hi);
            let b_clamped = b_new.clamp(clamp_lo, clamp_hi);
            clamped += u64::from(a_clamped != a_new) + u64::from(b_clamped != b_new);
            params.a = a_clamped;
            params.b = b_clamped;
        }

        let processed = order.len() as u64 - skipped;
        if processed == 0 {
            return Err(Error::TrainingDiverged { epoch });
        }
        history.push(EpochStats {
            mean_loss: loss_sum / processed as f64,
            accuracy: correct as f64 / processed as f64,
            lr_res: lr_res_scheduled,
            lr_out,
            clamped,
            skipped,
        });
    }

    let (rows, labels) = feature_rows(&params, &dataset.train)?;
    let selection = match config.beta_holdout {
        None => select_beta(&rows, &labels, dataset.n_classes, &config.betas)?,
        Some(fraction) => select_beta_holdout(
            &rows,
            &labels,
            dataset.n_classes,
            &config.betas,
            fraction,
            &mut rng,
        )?,
    };

    Ok(TrainedModel {
        params,
        head: selection.head,
        sgd_head: head,
        beta: selection.beta,
        refit_loss: selection.loss,
        history,
        peak_stored_states,
    })
}

/// Serialized model: enough to rebuild the full pipeline. The mask is stored
/// as its seed plus dimensions and regenerated on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub a: f64,
    pub b: f64,
    pub kind: NonlinearityKind,
    pub mask_seed: u64,
    pub n_x: usize,
    pub n_u: usize,
    pub n_y: usize,
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub beta: f64,
    /// Whether the training data was standardized; evaluation must match.
    pub normalize: bool,
}

impl ModelFile {
    pub fn from_model(model: &TrainedModel, normalize: bool) -> ModelFile {
        ModelFile {
            a: model.params.a,
            b: model.params.b,
            kind: model.params.kind,
            mask_seed: model.params.mask.seed(),
            n_x: model.params.n_x(),
            n_u: model.params.mask.n_inputs(),
            n_y: model.head.n_classes(),
            weights: model.head.weights.clone(),
            bias: model.head.bias.clone(),
            beta: model.beta,
            normalize,
        }
    }

    pub fn into_parts(self) -> (ReservoirParams, OutputHead) {
        let mask = Mask::generate(self.mask_seed, self.n_x, self.n_u);
        (
            ReservoirParams::new(self.a, self.b, self.kind, mask),
            OutputHead {
                weights: self.weights,
                bias: self.bias,
            },
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<ModelFile> {
        let text = std::fs::read_to_string(path)?;
        let model: ModelFile = serde_json::from_str(&text)?;
        if model.weights.len() != model.n_y
            || model.weights.iter().any(|r| r.len() != model.n_x * (model.n_x + 1))
            || model.bias.len() != model.n_y
        {
            return Err(Error::InvalidData(
                "model weight dimensions are inconsistent".into(),
            ));
        }
        model.kind.validate()?;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, SynthSpec, SynthTask};

    fn small_dataset() -> Dataset {
        generate_synthetic(&SynthSpec {
            task: SynthTask::FrequencyPair,
            per_class: 8,
            len: 16,
            n_features: 1,
            noise: 0.1,
            seed: 3,
        })
        .unwrap()
    }

    fn small_reservoir() -> ReservoirConfig {
        ReservoirConfig {
            n_x: 5,
            kind: NonlinearityKind::Linear,
            mask_seed: 2,
        }
    }

    #[test]
    fn schedule_hand_values() {
        let cfg = TrainConfig::default();
        assert_eq!(lr_schedule(&cfg, 1), (1.0, 1.0));
        assert_eq!(lr_schedule(&cfg, 4), (1.0, 1.0));
        assert_eq!(lr_schedule(&cfg, 5), (0.1, 1.0));
        assert_eq!(lr_schedule(&cfg, 10), (0.1 * 0.1, 0.1));
        let (res, out) = lr_schedule(&cfg, 25);
        assert!((res - 1e-4).abs() < 1e-18);
        assert!((out - 1e-3).abs() < 1e-17);
    }

    #[test]
    fn zero_learning_rate_leaves_parameters_at_init() {
        let mut cfg = TrainConfig {
            epochs: 1,
            lr_res_base: 0.0,
            lr_out_base: 0.0,
            ..TrainConfig::default()
        };
        cfg.betas = vec![1.0];
        let model = train(&small_dataset(), &small_reservoir(), &cfg).unwrap();
        assert_eq!(model.params.a, 0.01);
        assert_eq!(model.params.b, 0.01);
        assert!(model.sgd_head.weights.iter().flatten().all(|&w| w == 0.0));
        assert!(model.sgd_head.bias.iter().all(|&b| b == 0.0));
        assert_eq!(model.history.len(), 1);
    }

    #[test]
    fn zero_reservoir_rate_freezes_reservoir_only() {
        let cfg = TrainConfig {
            epochs: 3,
            lr_res_base: 0.0,
            ..TrainConfig::default()
        };
        let model = train(&small_dataset(), &small_reservoir(), &cfg).unwrap();
        assert_eq!(model.params.a, 0.01);
        assert_eq!(model.params.b, 0.01);
        // The readout did move.
        assert!(model.sgd_head.weights.iter().flatten().any(|&w| w != 0.0));
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = TrainConfig {
            epochs: 4,
            ..TrainConfig::default()
        };
        let ds = small_dataset();
        let a = train(&ds, &small_reservoir(), &cfg).unwrap();
        let b = train(&ds, &small_reservoir(), &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.params.a.to_bits(), b.params.a.to_bits());
        assert_eq!(a.beta, b.beta);
    }

    #[test]
    fn parameters_stay_clamped_under_aggressive_rates() {
        let cfg = TrainConfig {
            epochs: 3,
            lr_res_base: 50.0,
            ..TrainConfig::default()
        };
        let model = train(&small_dataset(), &small_reservoir(), &cfg).unwrap();
        assert!(model.params.a >= 1e-6 && model.params.a <= 0.99);
        assert!(model.params.b >= 1e-6 && model.params.b <= 0.99);
        let clamped: u64 = model.history.iter().map(|e| e.clamped).sum();
        assert!(clamped > 0, "expected clamping under lr 50");
    }

    #[test]
    fn history_length_matches_epochs() {
        let cfg = TrainConfig {
            epochs: 7,
            ..TrainConfig::default()
        };
        let model = train(&small_dataset(), &small_reservoir(), &cfg).unwrap();
        assert_eq!(model.history.len(), 7);
    }

    #[test]
    fn stored_state_instrumentation_matches_mode() {
        let ds = small_dataset(); // every sample has T = 16
        let truncated = train(
            &ds,
            &small_reservoir(),
            &TrainConfig {
                epochs: 1,
                ..TrainConfig::default()
            },
        )
        .unwrap();
        assert_eq!(truncated.peak_stored_states, 2);
        let full = train(
            &ds,
            &small_reservoir(),
            &TrainConfig {
                epochs: 1,
                bp_mode: TraceMode::Full,
                ..TrainConfig::default()
            },
        )
        .unwrap();
        assert_eq!(full.peak_stored_states, 17);
    }

    #[test]
    fn evaluate_uniform_head_predicts_class_zero() {
        let ds = small_dataset();
        let mask = Mask::generate(2, 5, 1);
        let params = ReservoirParams::new(0.01, 0.01, NonlinearityKind::Linear, mask);
        let head = OutputHead::zeros(2, 30);
        let (acc, l) = evaluate_head(&params, &head, &ds.test).unwrap();
        let class0 = ds.test.iter().filter(|s| s.label == 0).count() as f64;
        assert_eq!(acc, class0 / ds.test.len() as f64);
        assert!((l - 2.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn evaluate_matches_recount_oracle() {
        let ds = small_dataset();
        let cfg = TrainConfig {
            epochs: 2,
            ..TrainConfig::default()
        };
        let model = train(&ds, &small_reservoir(), &cfg).unwrap();
        let (acc, mean_l) = model.evaluate(&ds.test).unwrap();
        // Brute-force recount, sequentially.
        let mut hits = 0usize;
        let mut total = 0.0;
        for s in &ds.test {
            let (_, feats) = dprr::forward(&model.params, s, TraceMode::Truncated).unwrap();
            let pred = forward_head(&model.head, feats.values());
            if pred.argmax() == s.label {
                hits += 1;
            }
            total += loss(&pred, s.label);
        }
        assert_eq!(acc, hits as f64 / ds.test.len() as f64);
        assert!((mean_l - total / ds.test.len() as f64).abs() < 1e-12);
    }

    #[test]
    fn divergence_guard_skips_and_survives() {
        // A huge raw value saturates the mackey-glass block, so the forward
        // pass (and the final refit) stay finite, but its derivative factor
        // is inf/inf = NaN. The guard must skip that sample's update every
        // epoch and training must still produce a model.
        let mut ds = small_dataset();
        ds.train[0].series[3][0] = 1e200;
        let reservoir = ReservoirConfig {
            n_x: 5,
            kind: NonlinearityKind::MackeyGlass { p: 2 },
            mask_seed: 2,
        };
        let cfg = TrainConfig {
            epochs: 2,
            bp_mode: TraceMode::Full,
            betas: vec![1.0],
            ..TrainConfig::default()
        };
        let model = train(&ds, &reservoir, &cfg).unwrap();
        for epoch in &model.history {
            assert_eq!(epoch.skipped, 1, "poisoned sample skips every epoch");
        }
    }

    #[test]
    fn all_divergent_epoch_is_an_error() {
        // Two features of 1e308 overflow the drive wherever the mask row is
        // not mixed-sign, so every sample diverges at step 1.
        let mut ds = small_dataset();
        ds.n_features = 2;
        for s in ds.train.iter_mut().chain(ds.test.iter_mut()) {
            for row in &mut s.series {
                *row = vec![1e308, 1e308];
            }
        }
        let mask = Mask::generate(2, 5, 2);
        assert!(
            (0..5).any(|n| mask.entry(n, 0) == mask.entry(n, 1)),
            "seed must yield a non-mixed mask row"
        );
        let cfg = TrainConfig {
            epochs: 1,
            ..TrainConfig::default()
        };
        match train(&ds, &small_reservoir(), &cfg) {
            Err(Error::TrainingDiverged { epoch }) => assert_eq!(epoch, 1),
            other => panic!("expected TrainingDiverged, got {other:?}"),
        }
    }

    #[test]
    fn variable_series_lengths_train_and_evaluate() {
        // Feature length is T-independent, so samples of different lengths
        // (including T = 1) can share one model.
        let mut ds = small_dataset();
        ds.train[0].series.truncate(1);
        ds.train[3].series.truncate(9);
        ds.test[1].series.truncate(4);
        ds.validate().unwrap();
        let cfg = TrainConfig {
            epochs: 2,
            bp_mode: TraceMode::Full,
            ..TrainConfig::default()
        };
        let model = train(&ds, &small_reservoir(), &cfg).unwrap();
        // Longest train sample has T = 16, so full mode retained 17 states.
        assert_eq!(model.peak_stored_states, 17);
        let (acc, _) = model.evaluate(&ds.test).unwrap();
        assert!((0.0..=1.0).contains(&acc));
    }

    #[test]
    fn empty_split_is_rejected() {
        let mask = Mask::generate(2, 5, 1);
        let params = ReservoirParams::new(0.01, 0.01, NonlinearityKind::Linear, mask);
        let head = OutputHead::zeros(2, 30);
        assert!(evaluate_head(&params, &head, &[]).is_err());
    }

    #[test]
    fn holdout_beta_selection_runs() {
        let cfg = TrainConfig {
            epochs: 2,
            beta_holdout: Some(0.25),
            ..TrainConfig::default()
        };
        let model = train(&small_dataset(), &small_reservoir(), &cfg).unwrap();
        assert!(DEFAULT_BETAS.contains(&model.beta));
    }

    #[test]
    fn inconsistent_model_file_is_rejected() {
        let ds = small_dataset();
        let cfg = TrainConfig {
            epochs: 1,
            ..TrainConfig::default()
        };
        let model = train(&ds, &small_reservoir(), &cfg).unwrap();
        let mut file = ModelFile::from_model(&model, true);
        file.weights[0].pop();
        let dir = std::env::temp_dir().join("dfr-badmodel-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.json");
        file.save(&path).unwrap();
        assert!(ModelFile::load(&path).is_err());
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn model_file_round_trips() {
        let ds = small_dataset();
        let cfg = TrainConfig {
            epochs: 2,
            ..TrainConfig::default()
        };
        let model = train(&ds, &small_reservoir(), &cfg).unwrap();
        let file = ModelFile::from_model(&model, true);
        let dir = std::env::temp_dir().join("dfr-model-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.json");
        file.save(&path).unwrap();
        let loaded = ModelFile::load(&path).unwrap();
        assert_eq!(file, loaded);
        let (params, head) = loaded.into_parts();
        assert_eq!(params, model.params);
        assert_eq!(head, model.head);
        std::fs::remove_dir_all(&dir).ok();
    }
}
