//! Gaussian-truncated Fourier tester for spherical Gaussian mixtures.
//!
//! Given samples X and a reference point μ*, the statistic averages
//!
//! ```text
//! 2^{d/2} k e^{‖ξ‖²/4} e^{-‖X-μ*‖²/2} e^{iξᵀ(X-μ*)} 1{‖ξ‖ ≤ M},   ξ ~ N(0, σ²I_d)
//! ```
//!
//! whose expectation is Σ_j e^{-a‖μ_j-μ*‖²/4} (a = σ²/2 + 1) up to a
//! truncation term. The tester accepts iff the real part reaches θ.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{dist2, norm2};
use crate::quad::ln_truncated_radial_expectation;
use crate::rng::RngStream;
use crate::sampling::SampleSource;
use crate::special::{chi_square_cdf, chi_square_sf};
use crate::sum::ComplexMoments;
use crate::{Error, Result};

/// Default cap on the per-call sample budget.
pub const DEFAULT_BUDGET_CAP: u64 = 1_000_000_000;

/// Largest log-magnitude whose exponential is finite.
const LN_MAX: f64 = 709.0;

/// Samples per RNG substream block; fixes the combination order of partial sums.
pub const BLOCK: usize = 8192;
const BATCH_BLOCKS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Constants exactly as in the analysis; budgets are astronomically large.
    Paper,
    /// Small tuned constants for runs that must terminate.
    Practical,
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "paper" => Ok(Profile::Paper),
            "practical" => Ok(Profile::Practical),
            other => Err(Error::Precondition(format!("unknown profile {other:?}"))),
        }
    }
}

/// Named constants of a parameter profile.
///
/// `c_sigma`: σ²/2+1 = c_sigma/Δ²·(min{d, ln k} + ln(Δ/ε)).
/// `c_m`: M² = c_m·σ²·(d + ln Ŝ₂ + ln(1/γ)), floored at 5dσ².
/// `c_gamma`: γ = (σ²/2+1)ε²/c_gamma.
/// `c_n`: sample-count multiplier (Hoeffding for paper, second moment for practical).
/// `c_vote`: learner repetitions R = ceil(c_vote·ln N).
/// `pre_ratio`, `pre_root`: precondition ε < min{Δ/pre_ratio, Δ/(pre_root·√min{d, ln k})}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constants {
    pub c_sigma: f64,
    pub c_m: f64,
    pub c_gamma: f64,
    pub c_n: f64,
    pub c_vote: f64,
    pub pre_ratio: f64,
    pub pre_root: f64,
}

/// Two-sided Hoeffding at failure 1/6 for a variable in [-B, B]: N ≥ 2 ln 12·(B/γ)².
pub fn hoeffding_c_n() -> f64 {
    2.0 * 12f64.ln()
}

impl Constants {
    pub fn for_profile(profile: Profile) -> Self {
        match profile {
            Profile::Paper => Constants {
                c_sigma: 512.0,
                c_m: 5.0,
                c_gamma: 64.0,
                c_n: hoeffding_c_n(),
                c_vote: 5.0,
                pre_ratio: 100.0,
                pre_root: 32.0,
            },
            Profile::Practical => Constants {
                c_sigma: 3.9,
                c_m: 0.5,
                c_gamma: 6.5,
                c_n: 1.0,
                c_vote: 5.0,
                pre_ratio: 8.0,
                pre_root: 8.0,
            },
        }
    }
}

/// Closed-form quantities behind a parameter choice, before the budget cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Derivation {
    /// σ²/2 + 1.
    pub a: f64,
    pub sigma2: f64,
    pub m2: f64,
    pub gamma: f64,
    pub theta: f64,
    /// 10·min{k, 1 + (32d/Δ²)^{d/2+1}}.
    pub s2_hat: f64,
    /// ln of the required sample count.
    pub ln_n: f64,
}

/// Everything a tester call needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TesterParams {
    pub k: usize,
    pub d: usize,
    pub sigma: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub gamma: f64,
    pub theta: f64,
    #[serde(rename = "N")]
    pub n: u64,
    pub profile: Profile,
    pub constants: Constants,
}

impl TesterParams {
    /// Hand-set parameters; checks M² ≥ 5dσ², γ > 0, N ≥ 1.
    #[allow(clippy::too_many_arguments)]
    pub fn explicit(k: usize, d: usize, sigma: f64, m: f64, gamma: f64, theta: f64, n: u64) -> Result<Self> {
        let p = TesterParams {
            k,
            d,
            sigma,
            m,
            gamma,
            theta,
            n,
            profile: Profile::Practical,
            constants: Constants::for_profile(Profile::Practical),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.d == 0 {
            return Err(Error::Precondition("k and d must be positive".into()));
        }
        if !(self.sigma >= 0.0 && self.m >= 0.0) {
            return Err(Error::Precondition("sigma and M must be nonnegative".into()));
        }
        if self.m * self.m < 5.0 * self.d as f64 * self.sigma * self.sigma * (1.0 - 1e-12) {
            return Err(Error::Precondition(format!(
                "M^2/sigma^2 = {:.4} < 5d = {}",
                (self.m / self.sigma).powi(2),
                5 * self.d
            )));
        }
        if !(self.gamma > 0.0) || self.n == 0 {
            return Err(Error::Precondition("gamma must be positive and N >= 1".into()));
        }
        Ok(())
    }

    /// σ²/2 + 1.
    pub fn a(&self) -> f64 {
        self.sigma * self.sigma / 2.0 + 1.0
    }

    /// Per-term magnitude bound 2^{d/2} k e^{M²/4}, in logs.
    pub fn ln_term_bound(&self) -> f64 {
        0.5 * self.d as f64 * std::f64::consts::LN_2 + (self.k as f64).ln() + self.m * self.m / 4.0
    }
}

/// ε < min{Δ/pre_ratio, Δ/(pre_root·√min{d, ln k})}.
pub(crate) fn check_separation_precondition(
    k: usize,
    d: usize,
    delta: f64,
    eps: f64,
    c: &Constants,
) -> Result<()> {
    if !(delta > 0.0 && delta.is_finite() && eps > 0.0) {
        return Err(Error::Precondition("need finite delta > 0 and eps > 0".into()));
    }
    if k == 0 || d == 0 {
        return Err(Error::Precondition("k and d must be positive".into()));
    }
    let ratio_bound = delta / c.pre_ratio;
    if eps >= ratio_bound {
        return Err(Error::Precondition(format!(
            "eps = {eps} must be < delta/{} = {ratio_bound}",
            c.pre_ratio
        )));
    }
    let lm = (d as f64).min((k as f64).ln());
    if lm > 0.0 {
        let root_bound = delta / (c.pre_root * lm.sqrt());
        if eps >= root_bound {
            return Err(Error::Precondition(format!(
                "eps = {eps} must be < delta/({}*sqrt(min(d, ln k))) = {root_bound}",
                c.pre_root
            )));
        }
    }
    Ok(())
}

/// θ = ½[e^{-aε²/16} + e^{-aε²/4}].
pub fn threshold(a: f64, eps: f64) -> f64 {
    let u = a * eps * eps;
    0.5 * ((-u / 16.0).exp() + (-u / 4.0).exp())
}

/// ln E[e^{‖ξ‖²/2} 1{‖ξ‖ ≤ M}] for ξ ~ N(0, σ²I_d).
pub fn ln_weight_moment(d: usize, sigma: f64, m: f64) -> Result<f64> {
    ln_truncated_radial_expectation(d, sigma, m, |r| 0.5 * r * r)
}

/// Evaluates the closed forms for (k, d, Δ, ε) under `c`.
///
/// Pure formula evaluation: the separation precondition is checked by
/// [`select_params_with`], not here, so boundary instances can be audited.
pub fn derive(k: usize, d: usize, delta: f64, eps: f64, profile: Profile, c: &Constants) -> Result<Derivation> {
    if !(delta > 0.0 && delta.is_finite() && eps > 0.0 && k > 0 && d > 0) {
        return Err(Error::Precondition("need k, d >= 1, finite delta > 0, eps > 0".into()));
    }
    let df = d as f64;
    let kf = k as f64;
    let lm = df.min(kf.ln());
    let a_formula = c.c_sigma / (delta * delta) * (lm + (delta / eps).ln());
    // σ² = 0 (no frequency spread) once the formula asks for a < 1.
    let a = a_formula.max(1.0);
    let sigma2 = 2.0 * (a - 1.0);
    let gamma = a * eps * eps / c.c_gamma;
    let s2_hat = 10.0 * kf.min(1.0 + (32.0 * df / (delta * delta)).powf(df / 2.0 + 1.0));
    let m2 = (c.c_m * sigma2 * (df + s2_hat.ln() - gamma.ln())).max(5.0 * df * sigma2);
    let theta = match profile {
        Profile::Paper => threshold(a, eps),
        // At μ* = μ_j the expected statistic is exactly the kept frequency mass
        // P(χ²_d ≤ M²/σ²); near the 5dσ² floor that loss is comparable to 1 - θ.
        Profile::Practical if sigma2 > 0.0 => threshold(a, eps) * chi_square_cdf(d, m2 / sigma2),
        Profile::Practical => threshold(a, eps),
    };
    let ln_n = match profile {
        Profile::Paper => {
            let ln_b = 0.5 * df * std::f64::consts::LN_2 + kf.ln() + m2 / 4.0;
            c.c_n.ln() + 2.0 * (ln_b - gamma.ln())
        }
        Profile::Practical => {
            // Second moment of one isolated component at μ*: k (2/√3)^d W.
            let ln_w = ln_weight_moment(d, sigma2.sqrt(), m2.sqrt())?;
            let ln_v = kf.ln() + df * (2.0 / 3f64.sqrt()).ln() + ln_w;
            c.c_n.ln() + ln_v - 2.0 * gamma.ln()
        }
    };
    Ok(Derivation { a, sigma2, m2, gamma, theta, s2_hat, ln_n })
}

/// Parameters for the default constants of `profile` and the default budget cap.
pub fn select_params(k: usize, d: usize, delta: f64, eps: f64, profile: Profile) -> Result<TesterParams> {
    select_params_with(k, d, delta, eps, profile, &Constants::for_profile(profile), DEFAULT_BUDGET_CAP)
}

pub fn select_params_with(
    k: usize,
    d: usize,
    delta: f64,
    eps: f64,
    profile: Profile,
    constants: &Constants,
    budget_cap: u64,
) -> Result<TesterParams> {
    check_separation_precondition(k, d, delta, eps, constants)?;
    let der = derive(k, d, delta, eps, profile, constants)?;
    let n = budgeted_count(der.ln_n, budget_cap)?;
    let params = TesterParams {
        k,
        d,
        sigma: der.sigma2.sqrt(),
        m: der.m2.sqrt(),
        gamma: der.gamma,
        theta: der.theta,
        n,
        profile,
        constants: *constants,
    };
    params.validate()?;
    Ok(params)
}

/// ceil(e^{ln_n}), or SampleBudgetExceeded above `cap`.
pub(crate) fn budgeted_count(ln_n: f64, cap: u64) -> Result<u64> {
    if !(ln_n <= (cap as f64).ln()) {
        return Err(Error::SampleBudgetExceeded { required: ln_n.exp(), cap });
    }
    Ok((ln_n.exp().ceil() as u64).max(1))
}

/// Monte Carlo estimate of T with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: Complex64,
    /// sqrt((Var Re + Var Im)/N); NaN when squared terms would overflow.
    pub stderr: f64,
    pub n_used: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Accept,
    Reject,
}

/// Tester outcome. `decision` is Accept iff `re_statistic >= theta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub decision: Decision,
    pub re_statistic: f64,
    pub im_statistic: f64,
    pub theta: f64,
    /// Target estimation error γ.
    pub gamma: f64,
    pub n_used: u64,
}

impl Verdict {
    pub fn from_statistic(stat: Complex64, theta: f64, gamma: f64, n_used: u64) -> Self {
        let decision = if stat.re >= theta { Decision::Accept } else { Decision::Reject };
        Verdict { decision, re_statistic: stat.re, im_statistic: stat.im, theta, gamma, n_used }
    }

    pub fn statistic(&self) -> Complex64 {
        Complex64::new(self.re_statistic, self.im_statistic)
    }

    pub fn accepted(&self) -> bool {
        self.decision == Decision::Accept
    }
}

/// Draws `params.n` samples from `source` and averages the truncated statistic.
///
/// Frequencies for block b come from `rng.substream(b)`, so the result is
/// independent of the rayon pool size.
pub fn estimate_t<S: SampleSource + ?Sized>(
    source: &mut S,
    mu_star: &[f64],
    params: &TesterParams,
    rng: &RngStream,
) -> Result<Estimate> {
    let d = params.d;
    if source.dim() != d || mu_star.len() != d {
        return Err(Error::DimensionMismatch { expected: d, found: mu_star.len().max(source.dim()) });
    }
    params.validate()?;
    let ln_bound = params.ln_term_bound();
    if ln_bound > LN_MAX {
        return Err(Error::Overflow { log_magnitude: ln_bound });
    }
    let with_squares = 2.0 * ln_bound <= LN_MAX;
    let c0 = ln_bound - params.m * params.m / 4.0;
    let kernel = TermKernel { d, sigma: params.sigma, m2: params.m * params.m, c0, mu_star };

    let total = params.n as usize;
    let mut acc = ComplexMoments::default();
    let mut buf = Vec::new();
    let mut block = 0usize;
    while block * BLOCK < total {
        let first = block * BLOCK;
        let count = (total - first).min(BLOCK * BATCH_BLOCKS);
        buf.resize(count * d, 0.0);
        source.fill(&mut buf)?;
        let partials: Vec<ComplexMoments> = buf
            .par_chunks(BLOCK * d)
            .enumerate()
            .map(|(i, xs)| kernel.block(xs, &mut rng.substream((block + i) as u64), with_squares))
            .collect();
        for p in &partials {
            acc.merge(p);
        }
        block += count.div_ceil(BLOCK);
    }
    Ok(Estimate {
        value: acc.mean(),
        stderr: if with_squares { acc.stderr() } else { f64::NAN },
        n_used: acc.n,
    })
}

struct TermKernel<'a> {
    d: usize,
    sigma: f64,
    m2: f64,
    c0: f64,
    mu_star: &'a [f64],
}

impl TermKernel<'_> {
    fn block(&self, xs: &[f64], rng: &mut RngStream, with_squares: bool) -> ComplexMoments {
        let mut acc = ComplexMoments::default();
        let mut xi = [0.0; 8];
        let mut xi_heap = vec![0.0; if self.d > 8 { self.d } else { 0 }];
        let xi: &mut [f64] = if self.d > 8 { &mut xi_heap } else { &mut xi[..self.d] };
        for x in xs.chunks_exact(self.d) {
            let mut xi2 = 0.0;
            for v in xi.iter_mut() {
                *v = self.sigma * rng.normal();
                xi2 += *v * *v;
            }
            if xi2 > self.m2 {
                acc.push_zero();
                continue;
            }
            let mut y2 = 0.0;
            let mut phase = 0.0;
            for ((xv, mv), fv) in x.iter().zip(self.mu_star).zip(xi.iter()) {
                let y = xv - mv;
                y2 += y * y;
                phase += fv * y;
            }
            let ln_mag = self.c0 + xi2 / 4.0 - y2 / 2.0;
            debug_assert!(ln_mag <= self.c0 + self.m2 / 4.0 + 1e-9);
            let mag = ln_mag.exp();
            let (s, c) = phase.sin_cos();
            if with_squares {
                acc.push(mag * c, mag * s);
            } else {
                acc.re.add(mag * c);
                acc.im.add(mag * s);
                acc.n += 1;
            }
        }
        acc
    }
}

/// Runs one tester call: estimate T at μ* and threshold its real part at θ.
pub fn test<S: SampleSource + ?Sized>(
    source: &mut S,
    mu_star: &[f64],
    params: &TesterParams,
    rng: &RngStream,
) -> Result<Verdict> {
    let est = estimate_t(source, mu_star, params, rng)?;
    Ok(Verdict::from_statistic(est.value, params.theta, params.gamma, est.n_used))
}

/// Σ_j e^{-(σ²/2+1)‖μ_j − μ*‖²/4}.
pub fn analytic_main_term(means: &[Vec<f64>], mu_star: &[f64], sigma: f64) -> f64 {
    let a = sigma * sigma / 2.0 + 1.0;
    means.iter().map(|m| (-a * dist2(m, mu_star) / 4.0).exp()).sum()
}

/// e^{-M²/(5σ²)}·Σ_j e^{-‖μ_j − μ*‖²/4}: bound on the truncation bias when M² ≥ 5dσ².
pub fn truncation_bound(means: &[Vec<f64>], mu_star: &[f64], sigma: f64, m: f64) -> f64 {
    let tail = if sigma == 0.0 { 0.0 } else { (-(m * m) / (5.0 * sigma * sigma)).exp() };
    tail * means.iter().map(|mu| (-dist2(mu, mu_star) / 4.0).exp()).sum::<f64>()
}

/// Exact S1, S2 sums with their claimed bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SBounds {
    pub s1: f64,
    pub s2: f64,
    pub s1_bound: f64,
    pub s2_bound: f64,
    /// Whether (σ²/2+1)Δ² ≥ 100·min{ln k, d}; the S1 bound is only claimed then.
    pub s1_hypothesis: bool,
}

impl SBounds {
    pub fn s1_holds(&self) -> bool {
        !self.s1_hypothesis || self.s1 <= self.s1_bound
    }

    pub fn s2_holds(&self) -> bool {
        self.s2 <= self.s2_bound
    }
}

/// S1 = Σ_{j≥2} e^{-a‖μ_j‖²/4} and S2 = Σ_j e^{-‖μ_j‖²/4} with means sorted by norm.
pub fn s_bounds(means: &[Vec<f64>], sigma: f64, delta: f64, d: usize, k: usize) -> SBounds {
    let a = sigma * sigma / 2.0 + 1.0;
    let mut norms: Vec<f64> = means.iter().map(|m| norm2(m)).collect();
    norms.sort_by(f64::total_cmp);
    let s1 = norms.iter().skip(1).map(|n| (-a * n / 4.0).exp()).sum();
    let s2 = norms.iter().map(|n| (-n / 4.0).exp()).sum();
    let (df, kf) = (d as f64, k as f64);
    let s1_bound = 2.0 * (-a * delta * delta / 64.0).exp() * kf.min(2f64.powi(d as i32));
    let s2_bound = 10.0 * kf.min(1.0 + (32.0 * df / (delta * delta)).powf(df / 2.0 + 1.0));
    let s1_hypothesis = a * delta * delta >= 100.0 * kf.ln().min(df);
    SBounds { s1, s2, s1_bound, s2_bound, s1_hypothesis }
}

/// Exact P(χ²_d ≥ t) against e^{-t/5}; requires t ≥ 5d.
pub fn chi_square_tail_check(d: usize, t: f64) -> Result<bool> {
    if d == 0 || t < 5.0 * d as f64 {
        return Err(Error::Precondition(format!("chi-square tail check needs t >= 5d, got d={d}, t={t}")));
    }
    Ok(chi_square_sf(d, t) <= (-t / 5.0).exp())
}
