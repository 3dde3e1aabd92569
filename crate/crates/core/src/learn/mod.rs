//! Learning protocols: sequential parity feedback and kernel SVM classification.

pub mod metrics;
pub mod pipeline;
pub mod sequential;
pub mod smo;

pub use metrics::{evaluate, Metrics};
pub use pipeline::{
    grid_search, rbf_baseline_run, split_indices, train_eval, GridCell, GridResult, TrainConfig, TrainOutcome,
    TrainReport, TrainedModel,
};
pub use sequential::{sequential_run, EpochRecord, Evaluation, GradientMode, SequentialConfig};
pub use smo::{smo_train, svm_decision_values, svm_predict, SmoParams, SmoReport, SvmModel};
