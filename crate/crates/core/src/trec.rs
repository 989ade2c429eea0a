//! TREC qrels and run files.
//!
//! Qrels lines are `<qid> <iter> <docid> <grade>` and run lines are
//! `<qid> Q0 <docid> <rank> <score> <tag>`. Fields are separated by any run
//! of whitespace; blank lines and lines starting with `#` are skipped.

use std::fmt::Write as _;
use std::io::BufRead;

use indexmap::IndexMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    FieldCount { expected: usize, found: usize },
    BadGrade(String),
    NegativeGrade(i64),
    BadRank(String),
    BadScore(String),
    DuplicateJudgment { qid: String, docid: String },
    DuplicateDoc { qid: String, docid: String },
    DuplicateRank { qid: String, rank: u32 },
    Encoding,
}

impl std::fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParseErrorKind::FieldCount { expected, found } => {
                write!(f, "expected {expected} fields, found {found}")
            }
            ParseErrorKind::BadGrade(s) => write!(f, "grade {s:?} is not an integer"),
            ParseErrorKind::NegativeGrade(g) => write!(f, "grade {g} is negative"),
            ParseErrorKind::BadRank(s) => write!(f, "rank {s:?} is not a positive integer"),
            ParseErrorKind::BadScore(s) => write!(f, "score {s:?} is not a finite number"),
            ParseErrorKind::DuplicateJudgment { qid, docid } => {
                write!(f, "duplicate judgment for ({qid}, {docid})")
            }
            ParseErrorKind::DuplicateDoc { qid, docid } => {
                write!(f, "document {docid} appears twice for query {qid}")
            }
            ParseErrorKind::DuplicateRank { qid, rank } => {
                write!(f, "rank {rank} appears twice for query {qid}")
            }
            ParseErrorKind::Encoding => write!(f, "line is not valid UTF-8"),
        }
    }
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {kind}")]
    Line { line: usize, kind: ParseErrorKind },
    #[error("read failed: {0}")]
    Io(#[from] std::io::Error),
}

impl ParseError {
    pub fn line(&self) -> Option<usize> {
        match self {
            ParseError::Line { line, .. } => Some(*line),
            ParseError::Io(_) => None,
        }
    }

    pub fn kind(&self) -> Option<&ParseErrorKind> {
        match self {
            ParseError::Line { kind, .. } => Some(kind),
            ParseError::Io(_) => None,
        }
    }
}

fn line_err(line: usize, kind: ParseErrorKind) -> ParseError {
    ParseError::Line { line, kind }
}

/// Iterates `(line_number, fields)` over the meaningful lines of a stream.
fn records<R: BufRead>(
    source: R,
) -> impl Iterator<Item = Result<(usize, Vec<String>), ParseError>> {
    source
        .split(b'\n')
        .enumerate()
        .filter_map(|(idx, raw)| {
            let lineno = idx + 1;
            let raw = match raw {
                Ok(raw) => raw,
                Err(e) => return Some(Err(ParseError::Io(e))),
            };
            let text = match std::str::from_utf8(&raw) {
                Ok(t) => t.trim(),
                Err(_) => return Some(Err(line_err(lineno, ParseErrorKind::Encoding))),
            };
            if text.is_empty() || text.starts_with('#') {
                return None;
            }
            let fields = text.split_whitespace().map(str::to_owned).collect();
            Some(Ok((lineno, fields)))
        })
}

/// Graded relevance judgments keyed by query then document.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    entries: IndexMap<String, IndexMap<String, u32>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a judgment, rejecting duplicates and malformed ids.
    pub fn insert(&mut self, qid: &str, docid: &str, grade: u32) -> crate::Result<()> {
        if !valid_id(qid) || !valid_id(docid) {
            return Err(crate::Error::InvalidInput(format!(
                "ids must be non-empty without whitespace: ({qid:?}, {docid:?})"
            )));
        }
        let docs = self.entries.entry(qid.to_owned()).or_default();
        if docs.contains_key(docid) {
            return Err(crate::Error::InvalidInput(format!(
                "duplicate judgment for ({qid}, {docid})"
            )));
        }
        docs.insert(docid.to_owned(), grade);
        Ok(())
    }

    pub fn grade(&self, qid: &str, docid: &str) -> Option<u32> {
        self.entries.get(qid)?.get(docid).copied()
    }

    pub fn query(&self, qid: &str) -> Option<&IndexMap<String, u32>> {
        self.entries.get(qid)
    }

    pub fn queries(&self) -> impl Iterator<Item = (&str, &IndexMap<String, u32>)> {
        self.entries.iter().map(|(q, d)| (q.as_str(), d))
    }

    pub fn query_ids(&self) -> QuerySet {
        QuerySet {
            ids: self.entries.keys().cloned().collect(),
        }
    }

    pub fn n_queries(&self) -> usize {
        self.entries.len()
    }

    pub fn n_judgments(&self) -> usize {
        self.entries.values().map(IndexMap::len).sum()
    }

    /// Documents judged `>= threshold` for `qid`, in file order.
    pub fn relevant(&self, qid: &str, threshold: u32) -> Vec<&str> {
        self.entries
            .get(qid)
            .map(|docs| {
                docs.iter()
                    .filter(|(_, &g)| g >= threshold)
                    .map(|(d, _)| d.as_str())
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Union of two judgment sets. Fails on any shared (qid, docid) pair.
    pub fn merge(mut self, other: Qrels) -> crate::Result<Qrels> {
        for (qid, docs) in other.entries {
            for (docid, grade) in docs {
                self.insert(&qid, &docid, grade)?;
            }
        }
        Ok(self)
    }

    /// Serializes as `<qid> 0 <docid> <grade>` lines in insertion order.
    pub fn to_trec_string(&self) -> String {
        let mut out = String::new();
        for (qid, docs) in &self.entries {
            for (docid, grade) in docs {
                let _ = writeln!(out, "{qid} 0 {docid} {grade}");
            }
        }
        out
    }
}

fn valid_id(s: &str) -> bool {
    !s.is_empty() && !s.chars().any(char::is_whitespace)
}

pub fn parse_qrels<R: BufRead>(source: R) -> Result<Qrels, ParseError> {
    let mut qrels = Qrels::new();
    for rec in records(source) {
        let (lineno, fields) = rec?;
        if fields.len() < 4 {
            return Err(line_err(
                lineno,
                ParseErrorKind::FieldCount {
                    expected: 4,
                    found: fields.len(),
                },
            ));
        }
        let grade: i64 = fields[3]
            .parse()
            .map_err(|_| line_err(lineno, ParseErrorKind::BadGrade(fields[3].clone())))?;
        if grade < 0 {
            return Err(line_err(lineno, ParseErrorKind::NegativeGrade(grade)));
        }
        let grade = u32::try_from(grade)
            .map_err(|_| line_err(lineno, ParseErrorKind::BadGrade(fields[3].clone())))?;
        let docs = qrels.entries.entry(fields[0].clone()).or_default();
        if docs.contains_key(&fields[2]) {
            return Err(line_err(
                lineno,
                ParseErrorKind::DuplicateJudgment {
                    qid: fields[0].clone(),
                    docid: fields[2].clone(),
                },
            ));
        }
        docs.insert(fields[2].clone(), grade);
    }
    Ok(qrels)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunEntry {
    pub docid: String,
    pub rank: u32,
    pub score: f64,
}

/// One system's ranked output, per query sorted by rank ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct RunFile {
    pub tag: String,
    rankings: IndexMap<String, Vec<RunEntry>>,
    warnings: Vec<String>,
}

impl RunFile {
    pub fn new(tag: impl Into<String>) -> Self {
        Self {
            tag: tag.into(),
            rankings: IndexMap::new(),
            warnings: Vec::new(),
        }
    }

    /// Builds a run from docids in rank order; ranks start at 1 and scores
    /// decrease by one per position.
    pub fn from_ranked_lists<Q, D>(
        tag: impl Into<String>,
        lists: impl IntoIterator<Item = (Q, Vec<D>)>,
    ) -> Self
    where
        Q: Into<String>,
        D: Into<String>,
    {
        let mut run = RunFile::new(tag);
        for (qid, docs) in lists {
            let n = docs.len();
            let entries = docs
                .into_iter()
                .enumerate()
                .map(|(i, d)| RunEntry {
                    docid: d.into(),
                    rank: i as u32 + 1,
                    score: (n - i) as f64,
                })
                .collect();
            run.rankings.insert(qid.into(), entries);
        }
        run
    }

    pub fn ranking(&self, qid: &str) -> Option<&[RunEntry]> {
        self.rankings.get(qid).map(Vec::as_slice)
    }

    pub fn rankings(&self) -> impl Iterator<Item = (&str, &[RunEntry])> {
        self.rankings.iter().map(|(q, e)| (q.as_str(), e.as_slice()))
    }

    pub fn n_queries(&self) -> usize {
        self.rankings.len()
    }

    /// Non-fatal issues found while parsing (mixed tags, score inversions).
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Serializes as `<qid> Q0 <docid> <rank> <score> <tag>` lines.
    pub fn to_trec_string(&self) -> String {
        let mut out = String::new();
        for (qid, entries) in &self.rankings {
            for e in entries {
                let _ = writeln!(out, "{qid} Q0 {} {} {} {}", e.docid, e.rank, e.score, self.tag);
            }
        }
        out
    }
}

pub fn parse_run<R: BufRead>(source: R) -> Result<RunFile, ParseError> {
    let mut tag: Option<String> = None;
    let mut mixed_tags = false;
    let mut rankings: IndexMap<String, Vec<(usize, RunEntry)>> = IndexMap::new();

    for rec in records(source) {
        let (lineno, fields) = rec?;
        if fields.len() != 6 {
            return Err(line_err(
                lineno,
                ParseErrorKind::FieldCount {
                    expected: 6,
                    found: fields.len(),
                },
            ));
        }
        let rank: u32 = fields[3]
            .parse()
            .ok()
            .filter(|&r| r >= 1)
            .ok_or_else(|| line_err(lineno, ParseErrorKind::BadRank(fields[3].clone())))?;
        let score: f64 = fields[4]
            .parse()
            .ok()
            .filter(|s: &f64| s.is_finite())
            .ok_or_else(|| line_err(lineno, ParseErrorKind::BadScore(fields[4].clone())))?;
        match &tag {
            None => tag = Some(fields[5].clone()),
            Some(t) if *t != fields[5] => mixed_tags = true,
            Some(_) => {}
        }
        let list = rankings.entry(fields[0].clone()).or_default();
        if list.iter().any(|(_, e)| e.docid == fields[2]) {
            return Err(line_err(
                lineno,
                ParseErrorKind::DuplicateDoc {
                    qid: fields[0].clone(),
                    docid: fields[2].clone(),
                },
            ));
        }
        if list.iter().any(|(_, e)| e.rank == rank) {
            return Err(line_err(
                lineno,
                ParseErrorKind::DuplicateRank {
                    qid: fields[0].clone(),
                    rank,
                },
            ));
        }
        list.push((
            lineno,
            RunEntry {
                docid: fields[2].clone(),
                rank,
                score,
            },
        ));
    }

    let mut warnings = Vec::new();
    if mixed_tags {
        warnings.push("run file mixes several system tags; using the first".to_owned());
    }
    let rankings = rankings
        .into_iter()
        .map(|(qid, mut list)| {
            list.sort_by_key(|(_, e)| e.rank);
            if let Some(w) = list.windows(2).find(|w| w[1].1.score > w[0].1.score) {
                warnings.push(format!(
                    "query {qid}: score increases at line {} although rank order is authoritative",
                    w[1].0
                ));
            }
            (qid, list.into_iter().map(|(_, e)| e).collect())
        })
        .collect();
    for w in &warnings {
        log::warn!("{w}");
    }

    Ok(RunFile {
        tag: tag.unwrap_or_default(),
        rankings,
        warnings,
    })
}

/// Keeps at most the first `k` entries of every ranking.
pub fn truncate(run: &RunFile, k: usize) -> RunFile {
    let rankings = run
        .rankings
        .iter()
        .map(|(q, list)| (q.clone(), list.iter().take(k).cloned().collect()))
        .collect();
    RunFile {
        tag: run.tag.clone(),
        rankings,
        warnings: run.warnings.clone(),
    }
}

/// Ordered, duplicate-free list of query ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QuerySet {
    ids: Vec<String>,
}

impl QuerySet {
    pub fn new(ids: impl IntoIterator<Item = impl Into<String>>) -> crate::Result<Self> {
        let ids: Vec<String> = ids.into_iter().map(Into::into).collect();
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(crate::Error::InvalidInput(format!("duplicate query id {dup}")));
        }
        Ok(Self { ids })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn qrels(s: &str) -> Result<Qrels, ParseError> {
        parse_qrels(s.as_bytes())
    }

    fn run(s: &str) -> Result<RunFile, ParseError> {
        parse_run(s.as_bytes())
    }

    #[test]
    fn qrels_single_line() {
        let q = qrels("q1 0 d7 1").unwrap();
        assert_eq!(q.grade("q1", "d7"), Some(1));
        assert_eq!(q.n_judgments(), 1);
    }

    #[test]
    fn qrels_two_lines_same_query() {
        let q = qrels("q1 0 d7 3\nq1 0 d9 2").unwrap();
        assert_eq!(q.grade("q1", "d7"), Some(3));
        assert_eq!(q.grade("q1", "d9"), Some(2));
        assert_eq!(q.n_queries(), 1);
    }

    #[test]
    fn qrels_bad_grade_reports_line() {
        let e = qrels("q1 0 d7 x").unwrap_err();
        assert_eq!(e.line(), Some(1));
        assert_eq!(e.kind(), Some(&ParseErrorKind::BadGrade("x".into())));
    }

    #[test]
    fn qrels_negative_and_short_lines() {
        let e = qrels("q1 0 d1 1\n\nq1 0 d2 -1").unwrap_err();
        assert_eq!(e.line(), Some(3));
        assert_eq!(e.kind(), Some(&ParseErrorKind::NegativeGrade(-1)));

        let e = qrels("q1 0 d1").unwrap_err();
        assert!(matches!(
            e.kind(),
            Some(ParseErrorKind::FieldCount { expected: 4, found: 3 })
        ));
    }

    #[test]
    fn qrels_duplicate_is_error() {
        let e = qrels("q1 0 d1 1\nq1 0 d1 2").unwrap_err();
        assert_eq!(e.line(), Some(2));
        assert!(matches!(e.kind(), Some(ParseErrorKind::DuplicateJudgment { .. })));
    }

    #[test]
    fn qrels_tolerant_whitespace_and_comments() {
        let q = qrels("# header\n  q1\t0   d1 7  \n\n").unwrap();
        assert_eq!(q.grade("q1", "d1"), Some(7));
    }

    #[test]
    fn run_single_line() {
        let r = run("q1 Q0 d3 1 12.5 bm25").unwrap();
        assert_eq!(r.tag, "bm25");
        assert_eq!(
            r.ranking("q1").unwrap(),
            &[RunEntry {
                docid: "d3".into(),
                rank: 1,
                score: 12.5
            }]
        );
    }

    #[test]
    fn run_resorted_by_rank() {
        let r = run("q1 Q0 a 2 1.0 t\nq1 Q0 b 1 2.0 t").unwrap();
        let ranks: Vec<u32> = r.ranking("q1").unwrap().iter().map(|e| e.rank).collect();
        assert_eq!(ranks, [1, 2]);
        assert!(r.warnings().is_empty());
    }

    #[test]
    fn run_duplicate_doc() {
        let e = run("q1 Q0 d3 1 12.5 bm25\nq1 Q0 d3 2 11.0 bm25").unwrap_err();
        assert_eq!(e.line(), Some(2));
        assert!(matches!(e.kind(), Some(ParseErrorKind::DuplicateDoc { .. })));
    }

    #[test]
    fn run_errors() {
        let e = run("q1 Q0 d3 x 1.0 t").unwrap_err();
        assert!(matches!(e.kind(), Some(ParseErrorKind::BadRank(_))));
        let e = run("q1 Q0 d3 0 1.0 t").unwrap_err();
        assert!(matches!(e.kind(), Some(ParseErrorKind::BadRank(_))));
        let e = run("q1 Q0 d3 1 abc t").unwrap_err();
        assert!(matches!(e.kind(), Some(ParseErrorKind::BadScore(_))));
        let e = run("q1 Q0 d3 1 1.0").unwrap_err();
        assert!(matches!(e.kind(), Some(ParseErrorKind::FieldCount { .. })));
    }

    #[test]
    fn run_warnings() {
        let r = run("q1 Q0 a 1 1.0 x\nq1 Q0 b 2 5.0 y").unwrap();
        assert_eq!(r.tag, "x");
        assert_eq!(r.warnings().len(), 2);
    }

    #[test]
    fn truncate_cases() {
        let ten = RunFile::from_ranked_lists("t", [("q", (0..10).map(|i| format!("d{i}")).collect())]);
        let one = truncate(&ten, 1);
        assert_eq!(one.ranking("q").unwrap().len(), 1);
        assert_eq!(one.ranking("q").unwrap()[0].rank, 1);

        let three = RunFile::from_ranked_lists("t", [("q", vec!["a", "b", "c"])]);
        assert_eq!(truncate(&three, 10), three);

        let empty = RunFile::from_ranked_lists("t", [("q", Vec::<String>::new())]);
        assert!(truncate(&empty, 5).ranking("q").unwrap().is_empty());
    }

    #[test]
    fn query_set_rejects_duplicates() {
        assert!(QuerySet::new(["a", "b"]).is_ok());
        assert!(QuerySet::new(["a", "a"]).is_err());
    }

    fn arb_run() -> impl Strategy<Value = RunFile> {
        prop::collection::vec(
            prop::collection::vec((-1e6f64..1e6f64, 0u8..3), 0..8),
            1..5,
        )
        .prop_map(|queries| {
            let mut text = String::new();
            for (qi, docs) in queries.iter().enumerate() {
                for (di, (score, gap)) in docs.iter().enumerate() {
                    let rank = di * 3 + *gap as usize + 1;
                    text.push_str(&format!("q{qi} Q0 d{di} {rank} {score} sys\n"));
                }
            }
            parse_run(text.as_bytes()).unwrap()
        })
    }

    proptest! {
        #[test]
        fn run_round_trip(r in arb_run()) {
            let again = parse_run(r.to_trec_string().as_bytes()).unwrap();
            prop_assert_eq!(again.rankings, r.rankings);
            prop_assert_eq!(again.tag, r.tag);
        }

        #[test]
        fn truncate_idempotent(r in arb_run(), k in 1usize..10) {
            let once = truncate(&r, k);
            prop_assert_eq!(truncate(&once, k), once);
        }

        #[test]
        fn qrels_concat_is_merge(
            a in prop::collection::btree_map("qa[0-9]", prop::collection::btree_map("d[0-9]{1,2}", 0u32..5, 1..4), 0..4),
            b in prop::collection::btree_map("qb[0-9]", prop::collection::btree_map("d[0-9]{1,2}", 0u32..5, 1..4), 0..4),
        ) {
            let render = |m: &std::collections::BTreeMap<String, std::collections::BTreeMap<String, u32>>| {
                m.iter()
                    .flat_map(|(q, ds)| ds.iter().map(move |(d, g)| format!("{q} 0 {d} {g}\n")))
                    .collect::<String>()
            };
            let (ta, tb) = (render(&a), render(&b));
            let joined = parse_qrels(format!("{ta}{tb}").as_bytes()).unwrap();
            let merged = parse_qrels(ta.as_bytes()).unwrap().merge(parse_qrels(tb.as_bytes()).unwrap()).unwrap();
            prop_assert_eq!(joined, merged);
        }
    }
}
