//! Planted-geometry fixtures.
//!
//! Every query gets a topic center `m_q ~ N(0, spread²·I)`. Its judged
//! documents are drawn from `N(m_q, noise²·I)`. System `s` retrieves fresh
//! documents from `N(m_q + shift_s·u, noise²·I)` for a fixed unit vector `u`,
//! so the retrieved pool differs from the relevant pool by a pure mean shift.
//! Optionally system `s` also places the query's first relevant document at
//! rank `s + 1`, giving MRR = 1/(s + 1).

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::store::EmbeddingStore;
use crate::trec::{Qrels, RunFile};

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedConfig {
    pub n_queries: usize,
    pub dim: usize,
    /// Relevant docs per query; grades cycle 3, 2, 1.
    pub relevant_per_query: usize,
    /// Grade-0 judged docs per query, placed right after the relevant doc.
    pub judged_nonrelevant_per_query: usize,
    /// Fresh documents retrieved per query and system.
    pub depth: usize,
    pub topic_spread: f64,
    pub noise: f64,
    /// Mean-shift norm of each system.
    pub shifts: Vec<f64>,
    /// Put the first relevant doc at rank `system_index + 1`.
    pub plant_relevant: bool,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self {
            n_queries: 200,
            dim: 8,
            relevant_per_query: 1,
            judged_nonrelevant_per_query: 0,
            depth: 10,
            topic_spread: 1.0,
            noise: 0.5,
            shifts: vec![0.0, 1.0, 2.0],
            plant_relevant: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedWorld {
    pub qrels: Qrels,
    pub runs: Vec<RunFile>,
    pub store: EmbeddingStore,
    pub direction: DVector<f64>,
}

pub fn planted_world(cfg: &PlantedConfig) -> PlantedWorld {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let p = cfg.dim;
    let spread = Normal::new(0.0, cfg.topic_spread).expect("finite spread");
    let noise = Normal::new(0.0, cfg.noise).expect("finite noise");

    let raw: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
    let direction = DVector::from_vec(raw).normalize();

    let mut ids = Vec::new();
    let mut data: Vec<f32> = Vec::new();
    let mut qrels = Qrels::new();
    let mut lists: Vec<Vec<(String, Vec<String>)>> = vec![Vec::new(); cfg.shifts.len()];

    let mut emit = |id: String, center: &DVector<f64>, rng: &mut ChaCha8Rng| {
        data.extend(center.iter().map(|c| (c + noise.sample(rng)) as f32));
        ids.push(id.clone());
        id
    };

    for q in 0..cfg.n_queries {
        let qid = format!("q{q}");
        let center = DVector::from_fn(p, |_, _| spread.sample(&mut rng));
        let mut relevant = Vec::new();
        for j in 0..cfg.relevant_per_query {
            let id = emit(format!("{qid}-rel{j}"), &center, &mut rng);
            let grade = 3 - (j % 3) as u32;
            qrels.insert(&qid, &id, grade).expect("fresh ids");
            relevant.push(id);
        }
        let mut judged_zero = Vec::new();
        for j in 0..cfg.judged_nonrelevant_per_query {
            let id = emit(format!("{qid}-nrel{j}"), &center, &mut rng);
            qrels.insert(&qid, &id, 0).expect("fresh ids");
            judged_zero.push(id);
        }
        for (s, &shift) in cfg.shifts.iter().enumerate() {
            let shifted = &center + &direction * shift;
            let mut ranking: Vec<String> = (0..cfg.depth)
                .map(|r| emit(format!("{qid}-s{s}-r{r}"), &shifted, &mut rng))
                .collect();
            if cfg.plant_relevant {
                if let Some(rel) = relevant.first() {
                    let at = s.min(ranking.len());
                    ranking.insert(at, rel.clone());
                    for (off, z) in judged_zero.iter().enumerate() {
                        ranking.insert((at + 1 + off).min(ranking.len()), z.clone());
                    }
                }
            }
            lists[s].push((qid.clone(), ranking));
        }
    }

    let runs = lists
        .into_iter()
        .enumerate()
        .map(|(s, l)| RunFile::from_ranked_lists(format!("shift{s}"), l))
        .collect();
    let store = EmbeddingStore::from_rows("planted", p, ids, data).expect("generated store is valid");
    PlantedWorld {
        qrels,
        runs,
        store,
        direction,
    }
}
