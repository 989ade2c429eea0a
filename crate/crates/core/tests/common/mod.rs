//! Test-only oracles and fixture writers, independent of the library's
//! numerics and store writer.

#![allow(dead_code)]

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Mat = Vec<Vec<f64>>;

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    let (n, m, p) = (a.len(), b.len(), b[0].len());
    (0..n)
        .map(|i| (0..p).map(|j| (0..m).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}

pub fn transpose(a: &Mat) -> Mat {
    (0..a[0].len()).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

/// Lower-triangular `L` with `L Lᵀ = a` for symmetric positive definite `a`.
pub fn cholesky(a: &Mat) -> Mat {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                assert!(d > 0.0, "matrix not positive definite");
                l[i][j] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    l
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(a: &Mat) -> Vec<f64> {
    let n = a.len();
    let mut m = a.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        let scale: f64 = (0..n).map(|i| m[i][i] * m[i][i]).sum();
        if off <= 1e-30 * scale.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    (0..n).map(|i| m[i][i]).collect()
}

/// FD from its textbook definition. With `Σ_a = L Lᵀ`, `Lᵀ Σ_b L` is similar
/// to `Σ_a Σ_b`, so `Tr((Σ_a Σ_b)^{1/2})` is the sum of the square roots of
/// its eigenvalues.
pub fn oracle_fd(mu_a: &[f64], cov_a: &Mat, mu_b: &[f64], cov_b: &Mat) -> f64 {
    let mean: f64 = mu_a.iter().zip(mu_b).map(|(x, y)| (x - y).powi(2)).sum();
    let l = cholesky(cov_a);
    let inner = matmul(&matmul(&transpose(&l), cov_b), &l);
    let cross: f64 = jacobi_eigenvalues(&inner).iter().map(|v| v.max(0.0).sqrt()).sum();
    let tr = |m: &Mat| (0..m.len()).map(|i| m[i][i]).sum::<f64>();
    mean + tr(cov_a) + tr(cov_b) - 2.0 * cross
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
    (0..r).map(|_| (0..c).map(|_| StandardNormal.sample(rng)).collect()).collect()
}

/// `AᵀA / p` for a random `(p+2) x p` matrix: symmetric positive definite.
pub fn random_spd(rng: &mut ChaCha8Rng, p: usize) -> Mat {
    let a = normal_mat(rng, p + 2, p);
    let mut m = matmul(&transpose(&a), &a);
    for row in &mut m {
        for v in row.iter_mut() {
            *v /= p as f64;
        }
    }
    m
}

/// Writes the store layout byte by byte.
pub fn write_store_raw(dir: &Path, encoder: &str, ids: &[String], rows: &[Vec<f32>]) {
    fs::create_dir_all(dir).unwrap();
    let dim = rows.first().map_or(0, Vec::len);
    fs::write(
        dir.join("meta.json"),
        format!("{{\"dim\": {dim}, \"count\": {}, \"encoder\": \"{encoder}\"}}", ids.len()),
    )
    .unwrap();
    let mut id_text = String::new();
    for id in ids {
        id_text.push_str(id);
        id_text.push('\n');
    }
    fs::write(dir.join("ids.tsv"), id_text).unwrap();
    let mut bytes = Vec::with_capacity(rows.len() * dim * 4);
    for row in rows {
        for v in row {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(dir.join("vectors.f32"), bytes).unwrap();
}

/// Prints a single acceptance line and fails the test when `pass` is false.
pub fn verdict(name: &str, pass: bool, detail: impl std::fmt::Display) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("[{tag}] {name}: {detail}");
    assert!(pass, "{name} failed: {detail}");
}
