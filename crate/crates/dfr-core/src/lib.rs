//! Delayed-feedback reservoir classifiers trained by backpropagation and
//! gradient descent.
//!
//! The reservoir is the modular single-delay-line model: a ring of virtual
//! nodes driven through a fixed bipolar mask, with exactly two trained
//! scalars (the nonlinearity gain and the ring coupling). Per-sample features
//! are the dot-product representation — lagged node products plus node sums —
//! whose length does not depend on the series length, and a softmax readout
//! sits on top.
//!
//! Training backpropagates the cross-entropy through the readout, the feature
//! sums, and the recursive reservoir. Two variants are provided: full
//! backpropagation through time over the retained state history, and the
//! truncated variant that uses the final two states only, making the backward
//! cost and state storage independent of the series length. A log-space grid
//! search with an escalation protocol serves as the baseline the trainer is
//! benchmarked against, and the memory accounting quantifies what truncation
//! saves.

pub mod backprop;
pub mod dataset;
pub mod dprr;
pub mod error;
pub mod gridsearch;
pub mod head;
pub mod report;
pub mod reservoir;
pub mod rng;
pub mod trainer;

pub use backprop::{
    dprr_bp_value, finite_diff_grads, full_bptt, pipeline_loss, truncated_bp, ReservoirGrads,
};
pub use dataset::{
    generate_synthetic, load_dataset, normalize, write_dataset, Dataset, NormStats, Sample,
    SynthSpec, SynthTask,
};
pub use dprr::{accumulate_dprr, Dprr};
pub use error::{Error, Result};
pub use gridsearch::{escalate, grid_points, grid_search, Escalation, GridConfig, GridResult};
pub use head::{
    forward_head, head_gradients, loss, ridge_fit, select_beta, OutputHead, Prediction,
    DEFAULT_BETAS,
};
pub use report::{memory_counts, run_experiment, ExperimentConfig, ExperimentReport, MemoryReport};
pub use reservoir::{
    run_reservoir, Mask, NonlinearityKind, ReservoirParams, ReservoirTrace, TraceMode,
};
pub use trainer::{
    evaluate_head, lr_schedule, train, ModelFile, ReservoirConfig, TrainConfig, TrainedModel,
};
