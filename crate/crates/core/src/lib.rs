//! Meta-analysis by combining one-sided p-value functions.
//!
//! Study-level p-value functions are pooled with the Edgington, Fisher,
//! Pearson, Tippett or Wilkinson rule. Inference (median estimate,
//! confidence interval, confidence curve, AUCC and skewness measures) is
//! read off the combined function. Classical inverse-variance comparators
//! and a simulation harness are included.

pub mod classic;
pub mod combine;
pub mod effects;
pub mod error;
pub mod exact_binary;
pub mod heterogeneity;
pub mod infer;
pub mod metrics;
pub mod quad;
pub mod roots;
pub mod simulate;
pub mod special;

pub use classic::{
    dl_random_effects, fixed_effect, hartung_knapp, AnyMethod, ClassicMethod, ClassicResult,
};
pub use combine::{combine_p, make_pfunction, Method, PValueFunction};
pub use effects::{one_sided_p, z_statistic, Counts, OneSided, Orientation, Study};
pub use error::{Error, Result};
pub use exact_binary::{exact_midp, make_exact_pfunction, Table2x2};
pub use heterogeneity::{cochran_q, HeterogeneityEstimate, Tau2Method};
pub use infer::{
    analyze, aucc, aucc_ratio, centrality, confidence_density, confidence_interval,
    median_estimate, Grid, MetaResult,
};
pub use metrics::{beta_skewness, cohen_kappa, gamma_weighted_skewness, pearson_correlation};
pub use simulate::{run_scenario, Adjust, MethodSummary, SimScenario, SimSummary};
