//! Grade-priority sparsification of relevance judgments.
//!
//! Each query keeps at most `max_per_query` relevant documents, filled from
//! the highest grade downwards. The tier that overflows the remaining quota
//! is sampled uniformly without replacement using a generator keyed by
//! `(seed, qid)`, so the choice for one query does not depend on any other.

use std::collections::BTreeMap;

use rand::seq::index;
use serde::Serialize;

use super::keyed_rng;
use crate::trec::Qrels;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SparsifyConfig {
    pub max_per_query: usize,
    pub seed: u64,
    /// Lowest grade eligible to be kept.
    pub relevance_threshold: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparsifyOutcome {
    pub qrels: Qrels,
    /// Kept documents per grade, over all queries.
    pub tier_usage: BTreeMap<u32, usize>,
    /// Queries where a tier had to be sampled.
    pub sampled_queries: usize,
}

/// Keeps up to `max_per_query` documents per query, highest grades first;
/// grade-0 judgments are dropped.
pub fn sparsify_qrels(qrels: &Qrels, max_per_query: usize, seed: u64) -> Result<Qrels> {
    sparsify_qrels_with(
        qrels,
        &SparsifyConfig {
            max_per_query,
            seed,
            relevance_threshold: 1,
        },
    )
    .map(|o| o.qrels)
}

pub fn sparsify_qrels_with(qrels: &Qrels, cfg: &SparsifyConfig) -> Result<SparsifyOutcome> {
    if cfg.max_per_query == 0 {
        return Err(Error::InvalidInput("max_per_query must be at least 1".into()));
    }
    let threshold = cfg.relevance_threshold.max(1);
    let mut out = Qrels::new();
    let mut tier_usage = BTreeMap::new();
    let mut sampled_queries = 0;

    for (qid, judged) in qrels.queries() {
        // (file position, grade) of every eligible doc
        let mut tiers: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for (pos, (_, &grade)) in judged.iter().enumerate() {
            if grade >= threshold {
                tiers.entry(grade).or_default().push(pos);
            }
        }
        let mut kept: Vec<usize> = Vec::new();
        let mut rng = None;
        for (&grade, members) in tiers.iter().rev() {
            let room = cfg.max_per_query - kept.len();
            if room == 0 {
                break;
            }
            let take = if members.len() <= room {
                members.clone()
            } else {
                let rng = rng.get_or_insert_with(|| keyed_rng(cfg.seed, "sparsify", qid.as_bytes()));
                sampled_queries += 1;
                index::sample(rng, members.len(), room)
                    .into_iter()
                    .map(|i| members[i])
                    .collect()
            };
            *tier_usage.entry(grade).or_default() += take.len();
            kept.extend(take);
        }
        kept.sort_unstable();
        for pos in kept {
            let (docid, &grade) = judged.get_index(pos).expect("position from same map");
            out.insert(qid, docid, grade)?;
        }
    }
    Ok(SparsifyOutcome {
        qrels: out,
        tier_usage,
        sampled_queries,
    })
}
