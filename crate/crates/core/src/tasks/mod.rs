//! The three downstream tasks end to end: label generation, model
//! architectures, training loops (including the hybrid power-allocation
//! schedule), and metrics.

mod codebook;
mod metrics;
mod power;
mod train;

pub use codebook::{beam_oracle, build_codebook, Codebook};
pub use metrics::weighted_f1;
pub use power::{
    evaluate_se, group_users, load_label_cache, noise_power_for_snr, save_label_cache,
    GroupingConfig, LabelCache, PowerInstance, PowerNet, PowerNetConfig, WBPL_MAGIC,
};
pub use train::{
    allocate_all, beam_features, classifier_f1, los_features, mean_se_over_epa, power_features,
    predict_classes, train_beam, train_los, train_power, EpochMetric, FeatureNoise, FeatureSet,
    PowerTrainConfig, PowerTrainData, TrainConfig,
};
