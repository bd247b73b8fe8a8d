//! Moment-matched hard instances in one dimension and their TV certificates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{ball_volume, bottleneck_matching, separation};
use crate::mixture::{FamilyId, MixtureModel};
use crate::optim::{coordinate_descent, nelder_mead};
use crate::quad::integrate_with_breaks;
use crate::rng::RngStream;
use crate::special::ln_factorial;
use crate::sum::Neumaier;
use crate::{Error, Result};

/// Accept a direction once the squared scaled-moment residual drops below this.
pub const SEARCH_TOLERANCE: f64 = 1e-18;
/// Per-moment tolerance on points scaled into [-1, 1].
pub const MOMENT_TOLERANCE: f64 = 1e-9;
const TV_QUAD_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundParams {
    #[serde(rename = "C")]
    pub c: f64,
    pub k: f64,
    pub d: usize,
    pub t: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub delta: f64,
}

/// t = 4C ln k, R = √(C ln k)/10, Δ = Rd/(6et), after checking the lower-bound hypotheses.
pub fn lower_bound_params(k: f64, d: usize, c: f64) -> Result<LowerBoundParams> {
    if !(c >= 100.0) {
        return Err(Error::Hypothesis(format!("C >= 100 violated: C = {c}")));
    }
    if d == 0 {
        return Err(Error::Hypothesis("d >= 1 violated".into()));
    }
    let ln_k = k.ln();
    let lnln = ln_k.ln();
    let df = d as f64;
    if !(lnln > 0.0) || df > ln_k / lnln {
        return Err(Error::Hypothesis(format!("d <= ln k / ln ln k violated: d = {d}, k = {k}")));
    }
    let lhs = (8.0 * std::f64::consts::E * c).ln();
    let rhs = (1.0 - (-1.0f64).exp()) * ln_k / df;
    if lhs > rhs {
        return Err(Error::Hypothesis(format!("ln(8eC) <= (1 - 1/e) ln k / d violated: {lhs} > {rhs}")));
    }
    let t = 4.0 * c * ln_k;
    let r = (c * ln_k).sqrt() / 10.0;
    let delta = r * df / (6.0 * std::f64::consts::E * t);
    Ok(LowerBoundParams { c, k, d, t, r, delta })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardInstancePair {
    #[serde(rename = "mu_P")]
    pub mu_p: Vec<f64>,
    #[serde(rename = "mu_Q")]
    pub mu_q: Vec<f64>,
    pub t: usize,
    pub delta: f64,
    #[serde(rename = "R")]
    pub r: f64,
    /// |m_j(P) - m_j(Q)| for j = 1..=t, points scaled by `moment_scale`.
    pub moment_residuals: Vec<f64>,
    pub moment_scale: f64,
    pub param_distance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tv_numeric: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tv_upper_bound: Option<TvBound>,
}

impl HardInstancePair {
    /// Unit-variance Gaussian mixtures over the two point sets.
    pub fn models(&self) -> Result<(MixtureModel, MixtureModel)> {
        Ok((
            MixtureModel::new_1d(FamilyId::Gaussian, &self.mu_p)?,
            MixtureModel::new_1d(FamilyId::Gaussian, &self.mu_q)?,
        ))
    }

    /// Fills both TV numbers; a bound whose hypotheses fail is left empty.
    pub fn with_tv(mut self, eps_tail: f64) -> Result<Self> {
        self.tv_numeric = Some(tv_numeric(&self)?);
        self.tv_upper_bound = tv_upper_bound(&self, eps_tail).ok();
        Ok(self)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("pair serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidModel(e.to_string()))
    }
}

/// N grid points spaced 3Δ and centred at 0.
pub fn base_grid(n: usize, delta: f64) -> Vec<f64> {
    let mid = (n as f64 - 1.0) / 2.0;
    (0..n).map(|i| (i as f64 - mid) * 3.0 * delta).collect()
}

/// (μ + c(y)y, μ - c(y)y) with c(y) = Δ / max|y_i|; negating y swaps the pair exactly.
pub fn pair_from_direction(base: &[f64], y: &[f64], delta: f64) -> (Vec<f64>, Vec<f64>) {
    let peak = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let c = delta / peak;
    let p = base.iter().zip(y).map(|(m, v)| m + c * v).collect();
    let q = base.iter().zip(y).map(|(m, v)| m - c * v).collect();
    (p, q)
}

/// Power-sum moment differences m_j(P) - m_j(Q), j = 1..=t, of the points divided by `scale`.
pub fn moment_differences(p: &[f64], q: &[f64], t: usize, scale: f64) -> Vec<f64> {
    let n = p.len() as f64;
    (1..=t)
        .map(|j| {
            let mut acc = Neumaier::new();
            for (a, b) in p.iter().zip(q) {
                acc.add((a / scale).powi(j as i32));
                acc.add(-(b / scale).powi(j as i32));
            }
            acc.value() / n
        })
        .collect()
}

/// Search controls for the antipodal moment-matching search.
#[derive(Debug, Clone, Copy)]
pub struct SearchOptions {
    pub starts: usize,
    pub seed: u64,
    pub nm_iters: u64,
    /// Smallest coordinate-descent step.
    pub min_step: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { starts: 32, seed: 0x5eed_4a2d, nm_iters: 4000, min_step: 1e-16 }
    }
}

pub fn build_moment_matched_pair(n: usize, t: usize, delta: f64, r: f64) -> Result<HardInstancePair> {
    build_moment_matched_pair_with(n, t, delta, r, &SearchOptions::default())
}

/// Antipodal search for a perturbation of the 3Δ grid whose first t moments agree on both sides.
///
/// Requires t + 1 <= N <= R/(3Δ): the sphere S^{N-1} must carry t antipodal moment equations.
pub fn build_moment_matched_pair_with(
    n: usize,
    t: usize,
    delta: f64,
    r: f64,
    opts: &SearchOptions,
) -> Result<HardInstancePair> {
    if !(delta > 0.0 && r > delta && r.is_finite()) {
        return Err(Error::Precondition(format!("need R > delta > 0, got R = {r}, delta = {delta}")));
    }
    if t == 0 {
        return Err(Error::Precondition("t >= 1 required".into()));
    }
    if t + 1 > n {
        return Err(Error::Precondition(format!("t + 1 = {} > N = {n}", t + 1)));
    }
    let cap = r / (3.0 * delta);
    if n as f64 > cap * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!("N = {n} > R/(3 delta) = {cap}")));
    }
    let base = base_grid(n, delta);
    let scale = base.iter().fold(0.0f64, |m, v| m.max(v.abs())) + delta;
    let objective = |y: &[f64]| -> f64 {
        if y.iter().all(|v| *v == 0.0) {
            return f64::INFINITY;
        }
        let (p, q) = pair_from_direction(&base, y, delta);
        moment_differences(&p, &q, t, scale).iter().map(|v| v * v).sum()
    };

    let results: Vec<(f64, Vec<f64>)> = (0..opts.starts.max(1))
        .into_par_iter()
        .map(|s| {
            let y0: Vec<f64> = if s == 0 {
                (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect()
            } else {
                let mut rng = RngStream::new(opts.seed, s as u64);
                (0..n).map(|_| rng.normal()).collect()
            };
            let y0 = normalize(&y0);
            if objective(&y0) < SEARCH_TOLERANCE {
                return (objective(&y0), y0);
            }
            let (y1, _) = nelder_mead(objective, &y0, 0.25, opts.nm_iters, 1e-30);
            let (y2, g2) = coordinate_descent(objective, &normalize(&y1), 1e-3, opts.min_step, SEARCH_TOLERANCE * 1e-3);
            (g2, normalize(&y2))
        })
        .collect();
    let (_, (best_g, best_y)) = results
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0).then(a.0.cmp(&b.0)))
        .expect("at least one start");
    if !(*best_g < SEARCH_TOLERANCE) {
        return Err(Error::SearchExhausted { best: *best_g, starts: opts.starts });
    }
    let (mu_p, mu_q) = pair_from_direction(&base, best_y, delta);
    let pair = finish_pair(mu_p, mu_q, t, delta, r, scale)?;
    Ok(pair)
}

fn normalize(y: &[f64]) -> Vec<f64> {
    let peak = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return y.to_vec();
    }
    y.iter().map(|v| v / peak).collect()
}

/// Re-verifies separation, moment match, bottleneck distance and the 2R containment.
fn finish_pair(mu_p: Vec<f64>, mu_q: Vec<f64>, t: usize, delta: f64, r: f64, scale: f64) -> Result<HardInstancePair> {
    let slack = 1e-12 * scale.max(1.0);
    let as_rows = |v: &[f64]| v.iter().map(|x| vec![*x]).collect::<Vec<_>>();
    let (rp, rq) = (as_rows(&mu_p), as_rows(&mu_q));
    for (name, set) in [("P", &rp), ("Q", &rq)] {
        if set.len() > 1 && separation(set)? < delta - slack {
            return Err(Error::InvalidModel(format!("set {name} is not delta-separated")));
        }
    }
    let residuals: Vec<f64> = moment_differences(&mu_p, &mu_q, t, scale).iter().map(|v| v.abs()).collect();
    if residuals.iter().any(|v| !(*v <= MOMENT_TOLERANCE)) {
        return Err(Error::InvalidModel(format!("moment residuals {residuals:?} exceed tolerance")));
    }
    let (_, param_distance) = bottleneck_matching(&rp, &rq)?;
    if param_distance < delta - slack {
        return Err(Error::InvalidModel(format!("parameter distance {param_distance} < delta")));
    }
    if mu_p.iter().chain(&mu_q).any(|x| x.abs() > 2.0 * r) {
        return Err(Error::InvalidModel("point outside the 2R ball".into()));
    }
    Ok(HardInstancePair {
        mu_p,
        mu_q,
        t,
        delta,
        r,
        moment_residuals: residuals,
        moment_scale: scale,
        param_distance,
        tv_numeric: None,
        tv_upper_bound: None,
    })
}

/// ‖P̃ - Q̃‖₂² ≤ 4e^{-t²/(80R²)} + 2(t/4R)^d (2R)^{2t}/t!, evaluated in log space.
pub fn l2_sq_bound(t: usize, r: f64, d: usize) -> f64 {
    let tf = t as f64;
    let head = 4.0 * (-tf * tf / (80.0 * r * r)).exp();
    if r == 0.0 {
        return head;
    }
    let ln_tail = std::f64::consts::LN_2 + d as f64 * (tf / (4.0 * r)).ln() + 2.0 * tf * (2.0 * r).ln() - ln_factorial(tf);
    head + ln_tail.exp()
}

/// d_TV ≤ ε + √Vol_d(R')/2 · ‖P̃ - Q̃‖₂ with R' = 2R + √d + √(2 ln(1/ε)).
pub fn tv_from_l2(l2_sq: f64, r: f64, d: usize, eps_tail: f64) -> f64 {
    let r_prime = 2.0 * r + (d as f64).sqrt() + (2.0 * (1.0 / eps_tail).ln()).sqrt();
    eps_tail + ball_volume(d, r_prime).sqrt() / 2.0 * l2_sq.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TvBound {
    /// Smallest R with every point inside B(0, 2R).
    pub r_eff: f64,
    pub eps_tail: f64,
    pub l2_sq: f64,
    pub tv: f64,
    /// True when the bound is at least 1 and certifies nothing.
    pub vacuous: bool,
}

/// TV certificate for a matched pair at radius R_eff = max|μ|/2.
pub fn tv_upper_bound(pair: &HardInstancePair, eps_tail: f64) -> Result<TvBound> {
    if !(eps_tail > 0.0 && eps_tail < 1.0) {
        return Err(Error::Precondition(format!("eps_tail must lie in (0, 1), got {eps_tail}")));
    }
    if pair.moment_residuals.iter().any(|v| !(*v <= MOMENT_TOLERANCE)) || pair.moment_residuals.len() < pair.t {
        return Err(Error::Precondition("moments are not matched to tolerance".into()));
    }
    let r_eff = pair.mu_p.iter().chain(&pair.mu_q).fold(0.0f64, |m, x| m.max(x.abs())) / 2.0;
    let d = 1usize;
    if (pair.t as f64) < 4.0 * r_eff * (5.0 * d as f64).sqrt() {
        return Err(Error::Hypothesis(format!(
            "t/(4R) >= sqrt(5d) violated: t = {}, R = {r_eff}",
            pair.t
        )));
    }
    let l2_sq = l2_sq_bound(pair.t, r_eff, d);
    let tv = tv_from_l2(l2_sq, r_eff, d, eps_tail);
    Ok(TvBound { r_eff, eps_tail, l2_sq, tv, vacuous: tv >= 1.0 })
}

/// ½∫|p̃ - q̃| for unit-variance Gaussian mixtures over two point sets.
pub fn tv_numeric_sets(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.is_empty() || q.is_empty() {
        return Err(Error::InvalidModel("empty point set".into()));
    }
    let density = |set: &[f64], x: f64| {
        set.iter().map(|m| (-(x - m) * (x - m) / 2.0).exp()).sum::<f64>()
            / (set.len() as f64 * (2.0 * std::f64::consts::PI).sqrt())
    };
    let mut breaks: Vec<f64> = p.iter().chain(q).copied().collect();
    breaks.sort_by(f64::total_cmp);
    let (lo, hi) = (breaks[0] - 10.0, breaks[breaks.len() - 1] + 10.0);
    breaks.insert(0, lo);
    breaks.push(hi);
    breaks.dedup();
    let (v, _) = integrate_with_breaks(|x| 0.5 * (density(p, x) - density(q, x)).abs(), &breaks, TV_QUAD_TOL)?;
    Ok(v)
}

pub fn tv_numeric(pair: &HardInstancePair) -> Result<f64> {
    tv_numeric_sets(&pair.mu_p, &pair.mu_q)
}
