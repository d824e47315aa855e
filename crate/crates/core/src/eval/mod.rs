//! Proxy classifiers, metrics and statistics for comparing validation
//! strategies.

pub mod classify;
pub mod features;
pub mod metrics;
pub mod pipeline;
pub mod wilcoxon;

pub use classify::{predict_knn, KNearestNeighbors, NearestCentroid, TrainingSample};
pub use features::{extract_features, FeatureSet, MinMaxScaler, WindowExtractor};
pub use metrics::{evaluate, gap_analysis, render_table, ConfusionMatrix, EvalReport, GapReport};
pub use pipeline::{evaluate_split, Classifier, Masking, ProxySetup, SplitEvaluation, ValidationSpec};
pub use wilcoxon::{wilcoxon_signed_rank, wilcoxon_signed_rank_two_tailed, PValueMethod, WilcoxonResult};
