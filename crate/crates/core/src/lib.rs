//! Distribution-based quality assessment for single-image super-resolution.
//!
//! LR patches are clustered into groups; within each group the distribution
//! of one selected HR pixel (under the LR patch center) is compared between
//! the ground-truth and the generated image, and the per-group distances are
//! averaged. The crate also carries the evaluation tooling around the metric:
//! back-projection error, Glicko ratings of pairwise votes, correlation
//! reports, and a differentiable sliced Wasserstein loss.

pub mod analysis;
pub mod distributions;
pub mod error;
pub mod grouping;
pub mod imageio;
pub mod metric;
pub mod rating;
pub mod synthetic;

pub use analysis::{
    correlation_report, linfit, pearson, select_comparison_region, CorrelationReport, MethodScore, MethodScoreTable,
};
pub use distributions::{
    histogram, js_divergence, kl_divergence, sliced_w2, sliced_w2_grad, tv_distance, w1_distance, Distance,
    Histogram256,
};
pub use error::{Error, Result};
pub use grouping::{build_grouping, first_principal_component, kmeans, GroupingMode, GroupingModel, KMeansFit};
pub use imageio::{
    downsample, extract_dataset, extract_patch_pairs, load_image, save_image, GrayImage, ImageTriple, Kernel,
    PatchGeometry, PatchPairSet, PixelChoice, PixelOffset,
};
pub use metric::{
    back_projection_error, compute_instance_metric, compute_metric, compute_metric_on_pairs, compute_metric_per_image,
    compute_metric_with_grouping, metric_with_subsampling, GroupCount, GroupDistance, InstanceSamples, MetricConfig,
    MetricReport, SubsampleStats,
};
pub use rating::{
    conservative_ranking, glicko_update, rate_tournament, GlickoParams, PlayerRating, RatingPeriod, VoteRecord,
};
