//! Kendall τ-b with the normal-approximation p-value.

use serde::Serialize;
use statrs::function::erf::erfc;

use crate::{Error, Result};

/// Below this many systems the p-value is flagged as approximate.
pub const APPROXIMATE_BELOW: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationResult {
    pub tau: f64,
    pub p_value: f64,
    pub n_systems: usize,
    /// The normal approximation is coarse for few systems.
    pub approximate: bool,
}

/// Sizes of groups of equal values, for tie corrections.
fn tie_groups(values: &[f64]) -> Vec<u64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted
        .chunk_by(|a, b| a == b)
        .map(|g| g.len() as u64)
        .filter(|&t| t > 1)
        .collect()
}

pub fn kendall_tau(a: &[f64], b: &[f64]) -> Result<CorrelationResult> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput(format!(
            "kendall_tau length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Insufficient("kendall_tau needs at least 2 items".into()));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::InvalidInput("kendall_tau input contains NaN".into()));
    }

    let (mut concordant, mut discordant) = (0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let s = (a[i] - a[j]).signum() * (b[i] - b[j]).signum();
            let tied = a[i] == a[j] || b[i] == b[j];
            if !tied {
                if s > 0.0 {
                    concordant += 1;
                } else {
                    discordant += 1;
                }
            }
        }
    }

    let nf = n as f64;
    let n0 = nf * (nf - 1.0) / 2.0;
    let ties_a = tie_groups(a);
    let ties_b = tie_groups(b);
    let pairs = |ts: &[u64]| ts.iter().map(|&t| (t * (t - 1) / 2) as f64).sum::<f64>();
    let (n1, n2) = (pairs(&ties_a), pairs(&ties_b));
    if n1 == n0 || n2 == n0 {
        return Err(Error::Degenerate(
            "kendall_tau undefined: every value tied in one input".into(),
        ));
    }
    let s = (concordant - discordant) as f64;
    let tau = (s / ((n0 - n1) * (n0 - n2)).sqrt()).clamp(-1.0, 1.0);

    // Variance of S under independence with ties.
    let sum = |ts: &[u64], f: &dyn Fn(f64) -> f64| ts.iter().map(|&t| f(t as f64)).sum::<f64>();
    let v0 = nf * (nf - 1.0) * (2.0 * nf + 5.0);
    let vt = sum(&ties_a, &|t| t * (t - 1.0) * (2.0 * t + 5.0));
    let vu = sum(&ties_b, &|t| t * (t - 1.0) * (2.0 * t + 5.0));
    let v1 = sum(&ties_a, &|t| t * (t - 1.0)) * sum(&ties_b, &|t| t * (t - 1.0))
        / (2.0 * nf * (nf - 1.0));
    let v2 = if n > 2 {
        sum(&ties_a, &|t| t * (t - 1.0) * (t - 2.0)) * sum(&ties_b, &|t| t * (t - 1.0) * (t - 2.0))
            / (9.0 * nf * (nf - 1.0) * (nf - 2.0))
    } else {
        0.0
    };
    let var = (v0 - vt - vu) / 18.0 + v1 + v2;
    let z = s / var.sqrt();
    let p_value = erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0);

    Ok(CorrelationResult {
        tau,
        p_value,
        n_systems: n,
        approximate: n < APPROXIMATE_BELOW,
    })
}
