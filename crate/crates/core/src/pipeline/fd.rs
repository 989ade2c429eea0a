//! Pooled FD@k over a query set, standard and unjudged-only (URR).
//!
//! The query set is every qrels query with at least one document at or above
//! the relevance threshold. Pool A holds the embeddings of those relevant
//! documents, pool B the top-k retrieved documents of the same queries. Both
//! pools are multisets over (query, doc) occurrences.

use std::collections::HashSet;

use indexmap::IndexMap;
use nalgebra::DMatrix;
use serde::Serialize;

use crate::gaussian::{fit_gaussian, frechet_distance_detailed, FdOutcome};
use crate::store::{gather, EmbeddingStore};
use crate::trec::{Qrels, RunEntry, RunFile};
use crate::{Error, Result};

pub const DEFAULT_MAX_MISSING_RATE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FdMode {
    Standard,
    /// Judged documents (any grade) are removed before taking the top k.
    Urr,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FdOptions {
    pub k: usize,
    pub relevance_threshold: u32,
    /// Abort when more than this fraction of pool rows lack an embedding.
    pub max_missing_rate: f64,
}

impl FdOptions {
    pub fn at(k: usize) -> Self {
        Self {
            k,
            ..Self::default()
        }
    }
}

impl Default for FdOptions {
    fn default() -> Self {
        Self {
            k: 10,
            relevance_threshold: 1,
            max_missing_rate: DEFAULT_MAX_MISSING_RATE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FdResult {
    pub value: f64,
    pub k: usize,
    pub mode: FdMode,
    /// Queries contributing at least one retrieved row.
    pub queries_used: usize,
    /// Queries in the set whose (filtered) ranking was empty or absent.
    pub queries_skipped: usize,
    pub relevant_pool_size: usize,
    pub retrieved_pool_size: usize,
    pub missing_embedding_count: usize,
    pub regularized: bool,
    pub warnings: Vec<String>,
}

/// Embedded rows of one query, gathered once and reused across resamples.
#[derive(Debug)]
pub(crate) struct QueryRows {
    pub relevant: DMatrix<f64>,
    pub retrieved: DMatrix<f64>,
}

#[derive(Debug)]
pub(crate) struct PreparedPools {
    pub dim: usize,
    pub queries: Vec<QueryRows>,
    pub missing: usize,
    pub skipped: usize,
}

impl PreparedPools {
    pub fn build(
        run: &RunFile,
        qrels: &Qrels,
        store: &EmbeddingStore,
        opts: &FdOptions,
        mode: FdMode,
    ) -> Result<Self> {
        if opts.k == 0 {
            return Err(Error::InvalidInput("cutoff k must be at least 1".into()));
        }
        let mut queries = Vec::new();
        let mut missing = 0;
        let mut total = 0;
        let mut skipped = 0;
        for (qid, judged) in qrels.queries() {
            let relevant = qrels.relevant(qid, opts.relevance_threshold);
            if relevant.is_empty() {
                continue;
            }
            let ranking = run.ranking(qid).unwrap_or_default();
            let retrieved = retrieved_for(ranking, judged, opts.k, mode);
            if retrieved.is_empty() {
                skipped += 1;
            }
            let (rel_rows, rel_missing) = gather(store, &relevant);
            let (ret_rows, ret_missing) = gather(store, &retrieved);
            missing += rel_missing.len() + ret_missing.len();
            total += relevant.len() + retrieved.len();
            queries.push(QueryRows {
                relevant: rel_rows,
                retrieved: ret_rows,
            });
        }
        if total > 0 && missing as f64 > opts.max_missing_rate * total as f64 {
            return Err(Error::MissingEmbeddings {
                missing,
                total,
                max_rate: opts.max_missing_rate,
            });
        }
        Ok(Self {
            dim: store.dim(),
            queries,
            missing,
            skipped,
        })
    }

    /// FD over the queries at `picks` (repeats allowed).
    pub fn fd(&self, picks: impl Iterator<Item = usize> + Clone) -> Result<(FdOutcome, usize, usize)> {
        let a = stack(self.dim, picks.clone().map(|i| &self.queries[i].relevant));
        let b = stack(self.dim, picks.map(|i| &self.queries[i].retrieved));
        for (pool, m) in [("relevant", &a), ("retrieved", &b)] {
            if m.nrows() < 2 {
                return Err(Error::PoolTooSmall {
                    pool,
                    size: m.nrows(),
                });
            }
        }
        let outcome = frechet_distance_detailed(&fit_gaussian(&a)?, &fit_gaussian(&b)?)?;
        Ok((outcome, a.nrows(), b.nrows()))
    }
}

fn retrieved_for<'a>(
    ranking: &'a [RunEntry],
    judged: &IndexMap<String, u32>,
    k: usize,
    mode: FdMode,
) -> Vec<&'a str> {
    ranking
        .iter()
        .filter(|e| mode == FdMode::Standard || !judged.contains_key(&e.docid))
        .take(k)
        .map(|e| e.docid.as_str())
        .collect()
}

fn stack<'a>(dim: usize, parts: impl Iterator<Item = &'a DMatrix<f64>> + Clone) -> DMatrix<f64> {
    let rows = parts.clone().map(DMatrix::nrows).sum();
    let mut out = DMatrix::zeros(rows, dim);
    let mut at = 0;
    for part in parts {
        out.rows_mut(at, part.nrows()).copy_from(part);
        at += part.nrows();
    }
    out
}

fn evaluate(
    run: &RunFile,
    qrels: &Qrels,
    store: &EmbeddingStore,
    opts: &FdOptions,
    mode: FdMode,
) -> Result<FdResult> {
    let pools = PreparedPools::build(run, qrels, store, opts, mode)?;
    let (outcome, relevant_pool_size, retrieved_pool_size) = pools.fd(0..pools.queries.len())?;
    Ok(FdResult {
        value: outcome.value,
        k: opts.k,
        mode,
        queries_used: pools.queries.len() - pools.skipped,
        queries_skipped: pools.skipped,
        relevant_pool_size,
        retrieved_pool_size,
        missing_embedding_count: pools.missing,
        regularized: outcome.regularized(),
        warnings: outcome.warnings,
    })
}

/// FD between the relevant pool and the pooled top-k retrieved documents.
pub fn fd_at_k(
    run: &RunFile,
    qrels: &Qrels,
    store: &EmbeddingStore,
    opts: &FdOptions,
) -> Result<FdResult> {
    evaluate(run, qrels, store, opts, FdMode::Standard)
}

/// FD against the first k documents per query that carry no judgment.
pub fn fd_urr_at_k(
    run: &RunFile,
    qrels: &Qrels,
    store: &EmbeddingStore,
    opts: &FdOptions,
) -> Result<FdResult> {
    evaluate(run, qrels, store, opts, FdMode::Urr)
}

/// Distinct doc-ids that enter the retrieved pool.
pub fn retrieved_pool_ids(
    run: &RunFile,
    qrels: &Qrels,
    opts: &FdOptions,
    mode: FdMode,
) -> HashSet<String> {
    let mut out = HashSet::new();
    for (qid, judged) in qrels.queries() {
        if qrels.relevant(qid, opts.relevance_threshold).is_empty() {
            continue;
        }
        let ranking = run.ranking(qid).unwrap_or_default();
        out.extend(retrieved_for(ranking, judged, opts.k, mode).into_iter().map(str::to_owned));
    }
    out
}
