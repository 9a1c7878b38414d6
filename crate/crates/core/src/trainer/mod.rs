//! Dataset views per model variant, the training loop, verification metrics
//! and the threshold sweep. Distances are squared L2 throughout.

mod dataset;
mod eval;
mod train;

pub use dataset::{
    augment_items, build_variant_dataset, check_items, split_identities, DatasetItem, Phase, VariantView,
};
pub use eval::{
    build_eval_pairs, evaluate, linear_grid, metrics_from_distances, pair_distances, sweep_distances,
    sweep_threshold, EvalMetrics, EvalPairs, SweepResult,
};
pub use train::{train, LossKind, TrainConfig, TrainReport};
