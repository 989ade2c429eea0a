//! Evaluation procedures built on the metric and FD primitives.

mod bootstrap;
mod compare;
mod fd;
mod kendall;
mod sparsify;

pub use bootstrap::{bootstrap_fd, bootstrap_metric, percentile, BootstrapConfig, BootstrapResult};
pub use compare::{
    compare_systems, evaluate_system, CompareConfig, MetricId, MetricKind, SystemEval,
};
pub use fd::{fd_at_k, fd_urr_at_k, retrieved_pool_ids, FdMode, FdOptions, FdResult, DEFAULT_MAX_MISSING_RATE};
pub use kendall::{kendall_tau, CorrelationResult, APPROXIMATE_BELOW};
pub use sparsify::{sparsify_qrels, sparsify_qrels_with, SparsifyConfig, SparsifyOutcome};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Generator derived from `(seed, domain, key)`; independent of call order.
pub(crate) fn keyed_rng(seed: u64, domain: &str, key: &[u8]) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((domain.len() as u64).to_le_bytes());
    h.update(domain.as_bytes());
    h.update(key);
    let digest: [u8; 32] = h.finalize().into();
    ChaCha8Rng::from_seed(digest)
}

/// Arithmetic mean computed as offsets from the first value, so a constant
/// input returns that constant exactly.
pub(crate) fn stable_mean(values: &[f64]) -> f64 {
    match values.first() {
        None => f64::NAN,
        Some(&first) => {
            let offset: f64 = values.iter().map(|v| v - first).sum();
            first + offset / values.len() as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn keyed_rng_depends_on_every_input() {
        let draw = |s, d, k: &[u8]| keyed_rng(s, d, k).random::<u64>();
        let base = draw(1, "a", b"q1");
        assert_eq!(base, draw(1, "a", b"q1"));
        assert_ne!(base, draw(2, "a", b"q1"));
        assert_ne!(base, draw(1, "b", b"q1"));
        assert_ne!(base, draw(1, "a", b"q2"));
    }

    #[test]
    fn stable_mean_constant() {
        assert_eq!(stable_mean(&[0.1; 7]), 0.1);
        assert!((stable_mean(&[1.0, 2.0, 4.0]) - 7.0 / 3.0).abs() < 1e-15);
    }
}
