//! Evaluation report: JSON serialization and a plain-text table.
//!
//! JSON numbers are rounded to 10 significant digits; the text table uses
//! three decimals. Reports carry no timestamps, so identical inputs produce
//! byte-identical output.

use std::fmt::Write as _;

use indexmap::IndexMap;
use serde::Serialize;
use serde_json::Value;

use crate::metrics::Gain;
use crate::pipeline::{CompareConfig, CorrelationResult, FdResult, MetricId, SystemEval};
use crate::store::EmbeddingStore;

pub const JSON_SIGNIFICANT_DIGITS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationEntry {
    pub a: String,
    pub b: String,
    pub tau: Option<f64>,
    pub p_value: Option<f64>,
    pub n_systems: usize,
    pub approximate: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CorrelationEntry {
    pub fn from_result(a: MetricId, b: MetricId, r: &CorrelationResult) -> Self {
        Self {
            a: a.to_string(),
            b: b.to_string(),
            tau: Some(r.tau),
            p_value: Some(r.p_value),
            n_systems: r.n_systems,
            approximate: r.approximate,
            note: None,
        }
    }

    pub fn undefined(a: MetricId, b: MetricId, n_systems: usize, why: String) -> Self {
        Self {
            a: a.to_string(),
            b: b.to_string(),
            tau: None,
            p_value: None,
            n_systems,
            approximate: true,
            note: Some(why),
        }
    }

    pub fn key(&self) -> String {
        format!("{}|{}", self.a, self.b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StoreProvenance {
    pub encoder: String,
    pub dim: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settings {
    pub metrics: Vec<String>,
    pub cutoffs: Vec<usize>,
    pub relevance_threshold: u32,
    pub gain: Gain,
    pub max_missing_rate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub store: StoreProvenance,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FdDiagnostics {
    pub missing_embeddings: usize,
    pub regularized: bool,
    pub queries_used: usize,
    pub queries_skipped: usize,
    pub relevant_pool_size: usize,
    pub retrieved_pool_size: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl From<&FdResult> for FdDiagnostics {
    fn from(r: &FdResult) -> Self {
        Self {
            missing_embeddings: r.missing_embedding_count,
            regularized: r.regularized,
            queries_used: r.queries_used,
            queries_skipped: r.queries_skipped,
            relevant_pool_size: r.relevant_pool_size,
            retrieved_pool_size: r.retrieved_pool_size,
            warnings: r.warnings.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemDiagnostics {
    pub fd: IndexMap<String, FdDiagnostics>,
    pub ndcg_excluded_queries: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub run_warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub systems: IndexMap<String, IndexMap<String, f64>>,
    pub correlations: IndexMap<String, CorrelationEntry>,
    pub settings: Settings,
    pub diagnostics: IndexMap<String, SystemDiagnostics>,
}

/// Makes system names unique by suffixing repeats with `#2`, `#3`, ...
fn unique_name(taken: &IndexMap<String, IndexMap<String, f64>>, base: &str) -> String {
    let base = if base.is_empty() { "run" } else { base };
    if !taken.contains_key(base) {
        return base.to_owned();
    }
    (2..)
        .map(|i| format!("{base}#{i}"))
        .find(|n| !taken.contains_key(n))
        .expect("unbounded suffixes")
}

impl EvalReport {
    pub fn new(evals: Vec<SystemEval>, cfg: &CompareConfig, store: &EmbeddingStore) -> Self {
        let mut systems = IndexMap::new();
        let mut diagnostics = IndexMap::new();
        for eval in evals {
            let name = unique_name(&systems, &eval.name);
            let values = eval.values.iter().map(|(id, v)| (id.to_string(), *v)).collect();
            let diag = SystemDiagnostics {
                fd: eval.fd.iter().map(|(id, r)| (id.to_string(), r.into())).collect(),
                ndcg_excluded_queries: eval.ndcg_excluded,
                run_warnings: eval.run_warnings,
            };
            systems.insert(name.clone(), values);
            diagnostics.insert(name, diag);
        }
        Self {
            systems,
            correlations: IndexMap::new(),
            settings: Settings {
                metrics: cfg.metric_ids().iter().map(ToString::to_string).collect(),
                cutoffs: cfg.cutoffs.clone(),
                relevance_threshold: cfg.relevance_threshold,
                gain: cfg.gain,
                max_missing_rate: cfg.max_missing_rate,
                seed: None,
                store: StoreProvenance {
                    encoder: store.encoder().to_owned(),
                    dim: store.dim(),
                    count: store.count(),
                },
            },
            diagnostics,
        }
    }

    pub fn set_correlations(&mut self, entries: Vec<CorrelationEntry>) {
        self.correlations = entries.into_iter().map(|e| (e.key(), e)).collect();
    }

    pub fn metric(&self, system: &str, metric: &str) -> Option<f64> {
        self.systems.get(system)?.get(metric).copied()
    }

    /// τ between two metrics, in either order.
    pub fn tau(&self, a: &str, b: &str) -> Option<f64> {
        self.correlations
            .get(&format!("{a}|{b}"))
            .or_else(|| self.correlations.get(&format!("{b}|{a}")))
            .and_then(|e| e.tau)
    }

    /// Square τ matrix over `settings.metrics`.
    pub fn tau_matrix(&self) -> Vec<Vec<Option<f64>>> {
        let m = &self.settings.metrics;
        m.iter().map(|a| m.iter().map(|b| self.tau(a, b)).collect()).collect()
    }

    pub fn to_json_value(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("report is always serializable");
        round_floats(&mut v);
        v
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json_value()).expect("serializable");
        s.push('\n');
        s
    }

    /// One row per system, one column per metric, three decimals.
    pub fn render_table(&self) -> String {
        let metrics = &self.settings.metrics;
        let name_w = self.systems.keys().map(String::len).chain([6]).max().unwrap_or(6);
        let col_w: Vec<usize> = metrics.iter().map(|m| m.len().max(8)).collect();
        let mut out = String::new();
        let _ = write!(out, "{:<name_w$}", "System");
        for (m, w) in metrics.iter().zip(&col_w) {
            let _ = write!(out, "  {m:>w$}");
        }
        out.push('\n');
        for (name, values) in &self.systems {
            let _ = write!(out, "{name:<name_w$}");
            for (m, w) in metrics.iter().zip(&col_w) {
                match values.get(m) {
                    Some(v) => {
                        let _ = write!(out, "  {v:>w$.3}");
                    }
                    None => {
                        let _ = write!(out, "  {:>w$}", "-");
                    }
                }
            }
            out.push('\n');
        }
        let off_diagonal: Vec<&CorrelationEntry> =
            self.correlations.values().filter(|e| e.a != e.b).collect();
        if !off_diagonal.is_empty() {
            out.push_str("\nKendall tau-b\n");
            for e in off_diagonal {
                let pair = format!("{} vs {}", e.a, e.b);
                match (e.tau, e.p_value) {
                    (Some(t), Some(p)) => {
                        let _ = writeln!(out, "{pair:<28}  {t:>7.3}  p={p:.3}");
                    }
                    _ => {
                        let _ = writeln!(out, "{pair:<28}  {:>7}", "n/a");
                    }
                }
            }
        }
        out
    }
}

/// Rounds to `JSON_SIGNIFICANT_DIGITS` significant digits.
pub fn round_significant(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", JSON_SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .expect("formatted float parses")
}

/// Applies [`round_significant`] to every non-integer number in a JSON tree.
pub fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let r = round_significant(n.as_f64().expect("f64 number"));
            if let Some(num) = serde_json::Number::from_f64(r) {
                *n = num;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}
