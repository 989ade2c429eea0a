//! Multi-metric evaluation of several systems and Kendall τ between the
//! system orderings each metric induces.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::Serialize;

use super::fd::{fd_at_k, fd_urr_at_k, FdOptions, FdResult, DEFAULT_MAX_MISSING_RATE};
use super::kendall::kendall_tau;
use crate::exec::Exec;
use crate::metrics::{mrr_at_k, ndcg_at_k, Gain, MetricConfig};
use crate::report::{CorrelationEntry, EvalReport};
use crate::store::EmbeddingStore;
use crate::trec::{Qrels, RunFile};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum MetricKind {
    Mrr,
    Ndcg,
    Fd,
    FdUrr,
}

impl MetricKind {
    pub const ALL: [MetricKind; 4] = [MetricKind::Mrr, MetricKind::Ndcg, MetricKind::Fd, MetricKind::FdUrr];

    fn label(self) -> &'static str {
        match self {
            MetricKind::Mrr => "MRR",
            MetricKind::Ndcg => "nDCG",
            MetricKind::Fd => "FD",
            MetricKind::FdUrr => "FD-URR",
        }
    }

    /// Whether larger values mean a better system.
    pub fn higher_is_better(self) -> bool {
        matches!(self, MetricKind::Mrr | MetricKind::Ndcg)
    }
}

/// A metric at a cutoff, displayed as e.g. `FD@10` or `FD-URR@1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MetricId {
    pub kind: MetricKind,
    pub k: usize,
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.kind.label(), self.k)
    }
}

impl FromStr for MetricId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("unknown metric {s:?}"));
        let (label, k) = s.rsplit_once('@').ok_or_else(bad)?;
        let kind = MetricKind::ALL
            .into_iter()
            .find(|m| m.label().eq_ignore_ascii_case(label))
            .ok_or_else(bad)?;
        let k = k.parse().ok().filter(|&k| k >= 1).ok_or_else(bad)?;
        Ok(MetricId { kind, k })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareConfig {
    pub cutoffs: Vec<usize>,
    pub kinds: Vec<MetricKind>,
    pub relevance_threshold: u32,
    pub gain: Gain,
    pub max_missing_rate: f64,
    pub exec: Exec,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            cutoffs: vec![10],
            kinds: vec![MetricKind::Mrr, MetricKind::Ndcg, MetricKind::Fd],
            relevance_threshold: 1,
            gain: Gain::Linear,
            max_missing_rate: DEFAULT_MAX_MISSING_RATE,
            exec: Exec::default(),
        }
    }
}

impl CompareConfig {
    /// Every configured metric, kinds outermost.
    pub fn metric_ids(&self) -> Vec<MetricId> {
        self.kinds
            .iter()
            .flat_map(|&kind| self.cutoffs.iter().map(move |&k| MetricId { kind, k }))
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.cutoffs.is_empty() || self.kinds.is_empty() {
            return Err(Error::InvalidInput("at least one metric and cutoff required".into()));
        }
        if self.cutoffs.contains(&0) {
            return Err(Error::InvalidInput("cutoff k must be at least 1".into()));
        }
        if self.relevance_threshold == 0 {
            return Err(Error::InvalidInput("relevance threshold must be at least 1".into()));
        }
        Ok(())
    }
}

/// All configured metrics for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemEval {
    pub name: String,
    pub values: IndexMap<MetricId, f64>,
    /// Per-query scores of the averaged metrics (MRR, nDCG).
    pub per_query: IndexMap<MetricId, BTreeMap<String, f64>>,
    pub fd: IndexMap<MetricId, FdResult>,
    pub ndcg_excluded: usize,
    pub run_warnings: Vec<String>,
}

pub fn evaluate_system(
    run: &RunFile,
    qrels: &Qrels,
    store: &EmbeddingStore,
    cfg: &CompareConfig,
) -> Result<SystemEval> {
    cfg.validate()?;
    let mut eval = SystemEval {
        name: run.tag.clone(),
        values: IndexMap::new(),
        per_query: IndexMap::new(),
        fd: IndexMap::new(),
        ndcg_excluded: 0,
        run_warnings: run.warnings().to_vec(),
    };
    for id in cfg.metric_ids() {
        let metric_cfg = MetricConfig {
            k: id.k,
            relevance_threshold: cfg.relevance_threshold,
            gain: cfg.gain,
        };
        let fd_opts = FdOptions {
            k: id.k,
            relevance_threshold: cfg.relevance_threshold,
            max_missing_rate: cfg.max_missing_rate,
        };
        match id.kind {
            MetricKind::Mrr | MetricKind::Ndcg => {
                let scores = if id.kind == MetricKind::Mrr {
                    mrr_at_k(run, qrels, &metric_cfg)
                } else {
                    let s = ndcg_at_k(run, qrels, &metric_cfg);
                    eval.ndcg_excluded = s.excluded.len();
                    s
                };
                eval.values.insert(id, scores.mean);
                eval.per_query.insert(id, scores.per_query);
            }
            MetricKind::Fd | MetricKind::FdUrr => {
                let r = if id.kind == MetricKind::Fd {
                    fd_at_k(run, qrels, store, &fd_opts)?
                } else {
                    fd_urr_at_k(run, qrels, store, &fd_opts)?
                };
                eval.values.insert(id, r.value);
                eval.fd.insert(id, r);
            }
        }
    }
    Ok(eval)
}

/// Evaluates every run and correlates every pair of metrics (diagonal
/// included) over the systems.
pub fn compare_systems(
    runs: &[RunFile],
    qrels: &Qrels,
    store: &EmbeddingStore,
    cfg: &CompareConfig,
) -> Result<EvalReport> {
    if runs.len() < 2 {
        return Err(Error::Insufficient(format!(
            "comparison needs at least 2 runs, got {}",
            runs.len()
        )));
    }
    cfg.validate()?;
    let evals = cfg
        .exec
        .try_map_range(runs.len(), |i| evaluate_system(&runs[i], qrels, store, cfg))?;

    let ids = cfg.metric_ids();
    let column = |id: &MetricId| evals.iter().map(|e| e.values[id]).collect::<Vec<f64>>();
    let mut correlations = Vec::new();
    for (i, a) in ids.iter().enumerate() {
        for b in &ids[i..] {
            let entry = match kendall_tau(&column(a), &column(b)) {
                Ok(r) => CorrelationEntry::from_result(*a, *b, &r),
                Err(Error::Degenerate(why)) => CorrelationEntry::undefined(*a, *b, evals.len(), why),
                Err(e) => return Err(e),
            };
            correlations.push(entry);
        }
    }
    let mut report = EvalReport::new(evals, cfg, store);
    report.set_correlations(correlations);
    Ok(report)
}
