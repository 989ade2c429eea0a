//! Document embedding stores.
//!
//! A store is a directory with three files:
//!
//! * `meta.json`: `{"dim": p, "count": n, "encoder": "..."}` (extra keys allowed)
//! * `ids.tsv`: `n` doc-ids, one per line, line `i` names row `i`
//! * `vectors.f32`: `n * p` little-endian f32 values, row-major
//!
//! Vectors are kept as f32 and promoted to f64 by [`gather`].

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const META_FILE: &str = "meta.json";
pub const IDS_FILE: &str = "ids.tsv";
pub const VECTORS_FILE: &str = "vectors.f32";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("missing store file {0}")]
    MissingFile(PathBuf),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid meta.json: {0}")]
    Meta(String),
    #[error("ids.tsv has {found} ids but meta declares count {expected}")]
    IdCount { expected: usize, found: usize },
    #[error("vectors.f32 has {found} bytes, expected {expected} (count {count} x dim {dim} x 4)")]
    PayloadSize {
        expected: u64,
        found: u64,
        count: usize,
        dim: usize,
    },
    #[error("non-finite value in embedding of {docid} at component {component}")]
    NonFinite { docid: String, component: usize },
    #[error("duplicate doc-id {0}")]
    DuplicateId(String),
    #[error("invalid doc-id {0:?}")]
    InvalidId(String),
    #[error("dim must be positive")]
    ZeroDim,
}

impl StoreError {
    /// True for errors caused by the filesystem rather than the contents.
    pub fn is_io(&self) -> bool {
        matches!(self, StoreError::MissingFile(_) | StoreError::Io { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreMeta {
    pub dim: usize,
    pub count: usize,
    pub encoder: String,
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

/// Immutable doc-id → vector lookup table.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    meta: StoreMeta,
    ids: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f32>,
}

impl EmbeddingStore {
    /// Builds an in-memory store, validating every invariant.
    pub fn from_rows(
        encoder: impl Into<String>,
        dim: usize,
        ids: Vec<String>,
        data: Vec<f32>,
    ) -> Result<Self, StoreError> {
        let meta = StoreMeta {
            dim,
            count: ids.len(),
            encoder: encoder.into(),
            extra: Default::default(),
        };
        Self::validated(meta, ids, data)
    }

    fn validated(meta: StoreMeta, ids: Vec<String>, data: Vec<f32>) -> Result<Self, StoreError> {
        if meta.dim == 0 {
            return Err(StoreError::ZeroDim);
        }
        if ids.len() != meta.count {
            return Err(StoreError::IdCount {
                expected: meta.count,
                found: ids.len(),
            });
        }
        let expected = (meta.count * meta.dim) as u64 * 4;
        if data.len() as u64 * 4 != expected {
            return Err(StoreError::PayloadSize {
                expected,
                found: data.len() as u64 * 4,
                count: meta.count,
                dim: meta.dim,
            });
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (row, id) in ids.iter().enumerate() {
            if id.is_empty() || id.chars().any(char::is_whitespace) {
                return Err(StoreError::InvalidId(id.clone()));
            }
            if index.insert(id.clone(), row).is_some() {
                return Err(StoreError::DuplicateId(id.clone()));
            }
            let vec = &data[row * meta.dim..(row + 1) * meta.dim];
            if let Some(component) = vec.iter().position(|v| !v.is_finite()) {
                return Err(StoreError::NonFinite {
                    docid: id.clone(),
                    component,
                });
            }
        }
        Ok(Self {
            meta,
            ids,
            index,
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.meta.dim
    }

    pub fn count(&self) -> usize {
        self.meta.count
    }

    pub fn encoder(&self) -> &str {
        &self.meta.encoder
    }

    pub fn meta(&self) -> &StoreMeta {
        &self.meta
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn contains(&self, docid: &str) -> bool {
        self.index.contains_key(docid)
    }

    pub fn get(&self, docid: &str) -> Option<&[f32]> {
        let row = *self.index.get(docid)?;
        Some(&self.data[row * self.meta.dim..(row + 1) * self.meta.dim])
    }

    /// Writes the store in the directory layout described at module level.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<(), StoreError> {
        let dir = dir.as_ref();
        let io = |path: PathBuf| move |source| StoreError::Io { path, source };
        fs::create_dir_all(dir).map_err(io(dir.to_path_buf()))?;

        let meta = serde_json::to_string_pretty(&self.meta)
            .map_err(|e| StoreError::Meta(e.to_string()))?;
        let meta_path = dir.join(META_FILE);
        fs::write(&meta_path, meta + "\n").map_err(io(meta_path.clone()))?;

        let ids_path = dir.join(IDS_FILE);
        let mut ids = self.ids.join("\n");
        if !ids.is_empty() {
            ids.push('\n');
        }
        fs::write(&ids_path, ids).map_err(io(ids_path.clone()))?;

        let vec_path = dir.join(VECTORS_FILE);
        let bytes: Vec<u8> = self.data.iter().flat_map(|v| v.to_le_bytes()).collect();
        fs::write(&vec_path, bytes).map_err(io(vec_path.clone()))?;
        Ok(())
    }
}

fn read_file(path: PathBuf) -> Result<Vec<u8>, StoreError> {
    fs::read(&path).map_err(|source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            StoreError::MissingFile(path)
        } else {
            StoreError::Io { path, source }
        }
    })
}

pub fn load_store(dir: impl AsRef<Path>) -> Result<EmbeddingStore, StoreError> {
    let dir = dir.as_ref();
    let meta_bytes = read_file(dir.join(META_FILE))?;
    let meta: StoreMeta =
        serde_json::from_slice(&meta_bytes).map_err(|e| StoreError::Meta(e.to_string()))?;

    let ids_bytes = read_file(dir.join(IDS_FILE))?;
    let ids_text = String::from_utf8(ids_bytes)
        .map_err(|_| StoreError::Meta("ids.tsv is not valid UTF-8".into()))?;
    let ids: Vec<String> = ids_text
        .lines()
        .map(|l| l.trim_end_matches('\r').to_owned())
        .collect();

    let payload = read_file(dir.join(VECTORS_FILE))?;
    let expected = (meta.count as u64) * (meta.dim as u64) * 4;
    if payload.len() as u64 != expected {
        return Err(StoreError::PayloadSize {
            expected,
            found: payload.len() as u64,
            count: meta.count,
            dim: meta.dim,
        });
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    EmbeddingStore::validated(meta, ids, data)
}

/// Stacks the embeddings of `docids` into an `n x dim` f64 matrix.
///
/// Rows follow input order; ids absent from the store are skipped and
/// returned in `missing`, also in input order.
pub fn gather<S: AsRef<str>>(store: &EmbeddingStore, docids: &[S]) -> (DMatrix<f64>, Vec<String>) {
    let dim = store.dim();
    let mut rows: Vec<&[f32]> = Vec::with_capacity(docids.len());
    let mut missing = Vec::new();
    for id in docids {
        match store.get(id.as_ref()) {
            Some(v) => rows.push(v),
            None => missing.push(id.as_ref().to_owned()),
        }
    }
    let matrix = DMatrix::from_fn(rows.len(), dim, |r, c| f64::from(rows[r][c]));
    (matrix, missing)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn write_raw(dir: &Path, meta: &str, ids: &str, payload: &[u8]) {
        fs::write(dir.join(META_FILE), meta).unwrap();
        fs::write(dir.join(IDS_FILE), ids).unwrap();
        fs::write(dir.join(VECTORS_FILE), payload).unwrap();
    }

    fn le(values: &[f32]) -> Vec<u8> {
        values.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    const META_4_2: &str = r#"{"dim": 4, "count": 2, "encoder": "toy"}"#;

    #[test]
    fn loads_two_vectors() {
        let tmp = tempfile::tempdir().unwrap();
        let payload = le(&[1., 2., 3., 4., 5., 6., 7., 8.]);
        assert_eq!(payload.len(), 32);
        write_raw(tmp.path(), META_4_2, "d1\nd2\n", &payload);
        let s = load_store(tmp.path()).unwrap();
        assert_eq!((s.dim(), s.count()), (4, 2));
        assert_eq!(s.get("d2").unwrap(), &[5., 6., 7., 8.]);
        assert_eq!(s.encoder(), "toy");
    }

    #[test]
    fn short_payload_is_size_error() {
        let tmp = tempfile::tempdir().unwrap();
        write_raw(tmp.path(), META_4_2, "d1\nd2\n", &[0u8; 28]);
        assert!(matches!(
            load_store(tmp.path()),
            Err(StoreError::PayloadSize { expected: 32, found: 28, .. })
        ));
    }

    #[test]
    fn nan_names_doc() {
        let tmp = tempfile::tempdir().unwrap();
        let payload = le(&[1., 2., 3., 4., 5., f32::NAN, 7., 8.]);
        write_raw(tmp.path(), META_4_2, "d1\nd2\n", &payload);
        match load_store(tmp.path()) {
            Err(StoreError::NonFinite { docid, component }) => {
                assert_eq!(docid, "d2");
                assert_eq!(component, 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn other_failures() {
        let tmp = tempfile::tempdir().unwrap();
        assert!(load_store(tmp.path()).unwrap_err().is_io());

        write_raw(tmp.path(), META_4_2, "d1\nd1\n", &[0u8; 32]);
        assert!(matches!(load_store(tmp.path()), Err(StoreError::DuplicateId(id)) if id == "d1"));

        write_raw(tmp.path(), META_4_2, "d1\n", &[0u8; 32]);
        assert!(matches!(load_store(tmp.path()), Err(StoreError::IdCount { .. })));

        write_raw(tmp.path(), "{\"dim\": 4}", "d1\nd2\n", &[0u8; 32]);
        assert!(matches!(load_store(tmp.path()), Err(StoreError::Meta(_))));
    }

    #[test]
    fn gather_cases() {
        let s = EmbeddingStore::from_rows("t", 2, vec!["d1".into(), "d2".into()], vec![1., 2., 3., 4.])
            .unwrap();
        let (m, missing) = gather(&s, &["d1", "d2"]);
        assert_eq!(m.shape(), (2, 2));
        assert!(missing.is_empty());

        let (m, missing) = gather(&s, &["d1", "dX"]);
        assert_eq!(m.shape(), (1, 2));
        assert_eq!(missing, ["dX"]);

        let (m, missing) = gather::<&str>(&s, &[]);
        assert_eq!(m.shape(), (0, 2));
        assert!(missing.is_empty());
    }

    #[test]
    fn write_then_load_is_identical() {
        let tmp = tempfile::tempdir().unwrap();
        let s = EmbeddingStore::from_rows("enc", 3, vec!["a".into(), "b".into()], vec![0.5; 6]).unwrap();
        s.write(tmp.path()).unwrap();
        let a = load_store(tmp.path()).unwrap();
        let b = load_store(tmp.path()).unwrap();
        assert_eq!(a, s);
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn gather_concatenates(
            a in prop::collection::vec(0usize..8, 0..6),
            b in prop::collection::vec(0usize..8, 0..6),
        ) {
            let ids: Vec<String> = (0..5).map(|i| format!("d{i}")).collect();
            let data: Vec<f32> = (0..15).map(|i| i as f32 * 0.25).collect();
            let s = EmbeddingStore::from_rows("t", 3, ids, data).unwrap();
            let name = |v: &Vec<usize>| v.iter().map(|i| format!("d{i}")).collect::<Vec<_>>();
            let (na, nb) = (name(&a), name(&b));
            let both: Vec<String> = na.iter().chain(&nb).cloned().collect();
            let (mab, miss_ab) = gather(&s, &both);
            let (ma, miss_a) = gather(&s, &na);
            let (mb, miss_b) = gather(&s, &nb);
            let stacked = DMatrix::from_fn(ma.nrows() + mb.nrows(), 3, |r, c| {
                if r < ma.nrows() { ma[(r, c)] } else { mb[(r - ma.nrows(), c)] }
            });
            prop_assert_eq!(mab, stacked);
            prop_assert_eq!(miss_ab, [miss_a, miss_b].concat());
        }
    }
}
