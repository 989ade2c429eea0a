//! MRR@k and graded nDCG@k.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::trec::{Qrels, RunFile};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gain {
    /// `g = grade`, as in trec_eval.
    #[default]
    Linear,
    /// `g = 2^grade − 1`.
    Exponential,
}

impl Gain {
    pub fn apply(self, grade: u32) -> f64 {
        match self {
            Gain::Linear => f64::from(grade),
            Gain::Exponential => 2f64.powi(grade as i32) - 1.0,
        }
    }
}

impl std::str::FromStr for Gain {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "linear" => Ok(Gain::Linear),
            "exp" | "exponential" => Ok(Gain::Exponential),
            other => Err(format!("unknown gain {other:?}, expected linear or exp")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub k: usize,
    /// Grades at or above this count as relevant for MRR.
    pub relevance_threshold: u32,
    pub gain: Gain,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            k: 10,
            relevance_threshold: 1,
            gain: Gain::Linear,
        }
    }
}

impl MetricConfig {
    pub fn at(k: usize) -> Self {
        Self {
            k,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        if self.k == 0 {
            return Err(crate::Error::InvalidInput("cutoff k must be at least 1".into()));
        }
        if self.relevance_threshold == 0 {
            return Err(crate::Error::InvalidInput(
                "relevance threshold must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricScores {
    pub mean: f64,
    pub per_query: BTreeMap<String, f64>,
    /// Queries left out of the mean (nDCG: no positive-gain judgments).
    pub excluded: Vec<String>,
}

fn mean_of(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Reciprocal rank of the first doc with grade ≥ threshold in the top k,
/// averaged over every query in `qrels`. Queries missing from the run score 0.
pub fn mrr_at_k(run: &RunFile, qrels: &Qrels, cfg: &MetricConfig) -> MetricScores {
    let per_query: BTreeMap<String, f64> = qrels
        .queries()
        .map(|(qid, judged)| {
            let rr = run
                .ranking(qid)
                .unwrap_or_default()
                .iter()
                .take(cfg.k)
                .position(|e| judged.get(&e.docid).is_some_and(|&g| g >= cfg.relevance_threshold))
                .map_or(0.0, |pos| 1.0 / (pos + 1) as f64);
            (qid.to_owned(), rr)
        })
        .collect();
    MetricScores {
        mean: mean_of(per_query.values().copied()),
        per_query,
        excluded: Vec::new(),
    }
}

fn discount(position: usize) -> f64 {
    // position is 0-based; rank r = position + 1 gets 1 / log2(r + 1)
    1.0 / ((position + 2) as f64).log2()
}

/// Graded nDCG@k over every query in `qrels` with a positive ideal DCG.
pub fn ndcg_at_k(run: &RunFile, qrels: &Qrels, cfg: &MetricConfig) -> MetricScores {
    let mut per_query = BTreeMap::new();
    let mut excluded = Vec::new();
    for (qid, judged) in qrels.queries() {
        let mut ideal: Vec<f64> = judged.values().map(|&g| cfg.gain.apply(g)).collect();
        ideal.sort_by(|a, b| b.total_cmp(a));
        let idcg: f64 = ideal
            .iter()
            .take(cfg.k)
            .enumerate()
            .map(|(i, g)| g * discount(i))
            .sum();
        if idcg <= 0.0 {
            excluded.push(qid.to_owned());
            continue;
        }
        let dcg: f64 = run
            .ranking(qid)
            .unwrap_or_default()
            .iter()
            .take(cfg.k)
            .enumerate()
            .map(|(i, e)| judged.get(&e.docid).map_or(0.0, |&g| cfg.gain.apply(g)) * discount(i))
            .sum();
        per_query.insert(qid.to_owned(), dcg / idcg);
    }
    MetricScores {
        mean: mean_of(per_query.values().copied()),
        per_query,
        excluded,
    }
}
