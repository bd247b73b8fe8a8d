//! Separation, ε-closeness via bottleneck matching, and small analytic bounds.

use serde::Serialize;

use crate::special::ln_gamma;
use crate::{Error, Result};

/// Squared Euclidean distance.
#[inline]
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

fn check_dims(points: &[Vec<f64>]) -> Result<usize> {
    let d = points.first().map_or(0, |p| p.len());
    match points.iter().find(|p| p.len() != d) {
        Some(p) => Err(Error::DimensionMismatch { expected: d, found: p.len() }),
        None => Ok(d),
    }
}

/// Minimum pairwise distance; +∞ for fewer than two points.
pub fn separation(points: &[Vec<f64>]) -> Result<f64> {
    check_dims(points)?;
    let mut best = f64::INFINITY;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            best = best.min(dist2(&points[i], &points[j]));
        }
    }
    Ok(best.sqrt())
}

/// Outcome of an ε-closeness query.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchingResult {
    pub matched: bool,
    /// `permutation[i]` is the index in `b` matched to `a[i]`; absent when not matched.
    pub permutation: Option<Vec<usize>>,
    /// Bottleneck cost of the optimal matching.
    pub max_distance: f64,
}

/// Bottleneck matching between equal-size point sets.
///
/// Returns the optimal matching and its cost regardless of `eps`.
pub fn bottleneck_matching(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<(Vec<usize>, f64)> {
    if a.len() != b.len() {
        return Err(Error::SizeMismatch { left: a.len(), right: b.len() });
    }
    let da = check_dims(a)?;
    let db = check_dims(b)?;
    if !a.is_empty() && da != db {
        return Err(Error::DimensionMismatch { expected: da, found: db });
    }
    let k = a.len();
    if k == 0 {
        return Ok((Vec::new(), 0.0));
    }
    let cost: Vec<Vec<f64>> = a.iter().map(|p| b.iter().map(|q| dist(p, q)).collect()).collect();
    let mut levels: Vec<f64> = cost.iter().flatten().copied().collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();

    // Smallest level admitting a perfect matching; the largest always does.
    let (mut lo, mut hi) = (0usize, levels.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if perfect_matching(&cost, levels[mid]).is_some() {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let best = perfect_matching(&cost, levels[lo]).expect("feasible level");
    Ok((best, levels[lo]))
}

/// Kuhn's augmenting-path matching restricted to edges with cost ≤ `limit`.
fn perfect_matching(cost: &[Vec<f64>], limit: f64) -> Option<Vec<usize>> {
    let k = cost.len();
    let mut owner: Vec<Option<usize>> = vec![None; k];
    for i in 0..k {
        let mut seen = vec![false; k];
        if !augment(i, cost, limit, &mut seen, &mut owner) {
            return None;
        }
    }
    let mut perm = vec![0; k];
    for (j, o) in owner.iter().enumerate() {
        perm[o.expect("perfect")] = j;
    }
    Some(perm)
}

fn augment(i: usize, cost: &[Vec<f64>], limit: f64, seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
    for j in 0..cost.len() {
        if cost[i][j] <= limit && !seen[j] {
            seen[j] = true;
            let free = match owner[j] {
                None => true,
                Some(other) => augment(other, cost, limit, seen, owner),
            };
            if free {
                owner[j] = Some(i);
                return true;
            }
        }
    }
    false
}

/// Whether some permutation matches `a` to `b` with every pair within `eps`.
pub fn epsilon_close(a: &[Vec<f64>], b: &[Vec<f64>], eps: f64) -> Result<MatchingResult> {
    let (perm, max_distance) = bottleneck_matching(a, b)?;
    let matched = max_distance <= eps;
    Ok(MatchingResult {
        matched,
        permutation: matched.then_some(perm),
        max_distance,
    })
}

/// max{Δ/2, Δ·j^{1/d}/4}: lower bound on the j-th smallest norm of a Δ-separated set.
pub fn norm_lower_bound(delta: f64, d: usize, j: usize) -> Result<f64> {
    if j < 2 {
        return Err(Error::Precondition(format!("norm_lower_bound needs j >= 2, got {j}")));
    }
    Ok((delta / 2.0).max(delta * (j as f64).powf(1.0 / d as f64) / 4.0))
}

/// ln of the volume of the radius-r ball in R^d.
pub fn ln_ball_volume(d: usize, r: f64) -> f64 {
    let h = d as f64 / 2.0;
    h * std::f64::consts::PI.ln() + d as f64 * r.ln() - ln_gamma(h + 1.0)
}

/// π^{d/2} r^d / Γ(d/2 + 1).
pub fn ball_volume(d: usize, r: f64) -> f64 {
    if r == 0.0 {
        return 0.0;
    }
    ln_ball_volume(d, r).exp()
}
