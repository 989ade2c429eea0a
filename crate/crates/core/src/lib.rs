//! Fréchet Distance evaluation for retrieval systems.
//!
//! Relevant-judged documents and retrieved documents are mapped through an
//! embedding store, a multivariate Gaussian is fitted to each pool, and the
//! Fréchet Distance between the two Gaussians scores the run (lower is
//! better). Classical MRR@k / nDCG@k, qrel sparsification, the unjudged-only
//! (URR) protocol, bootstrap intervals and Kendall τ-b between metrics are
//! provided alongside.
//!
//! Data-parallel loops (bootstrap resamples, per-run metrics) go through
//! [`exec::Exec`], which uses rayon when the `parallel` feature is enabled
//! and falls back to plain iteration otherwise.

pub mod error;
pub mod exec;
pub mod gaussian;
pub mod metrics;
pub mod pipeline;
pub mod report;
pub mod store;
pub mod synthetic;
pub mod trec;

pub use error::{Error, Result};
pub use exec::Exec;
pub use gaussian::{fit_gaussian, frechet_distance, matrix_sqrt_psd, FdOutcome, GaussianStats};
pub use metrics::{mrr_at_k, ndcg_at_k, Gain, MetricConfig, MetricScores};
pub use pipeline::{
    bootstrap_fd, bootstrap_metric, compare_systems, fd_at_k, fd_urr_at_k, kendall_tau,
    sparsify_qrels, BootstrapConfig, BootstrapResult, CompareConfig, CorrelationResult, FdMode,
    FdOptions, FdResult, MetricId, MetricKind,
};
pub use report::EvalReport;
pub use store::{gather, load_store, EmbeddingStore};
pub use trec::{parse_qrels, parse_run, truncate, Qrels, QuerySet, RunEntry, RunFile};
