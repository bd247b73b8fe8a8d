//! General location families: characteristic-function registry, the
//! CF-deconvolution tester and learner, and the exponential/MLR reductions.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::learner::{candidate_budget_capped_with, vote_and_cluster, vote_count, LearnResult, LearnerConfig, VotePlan};
use crate::mixture::FamilyId;
use crate::quad::ln_truncated_radial_expectation;
use crate::rng::RngStream;
use crate::sampling::{base_cdf, mlr_pair, SampleSource};
use crate::special::{chi_square_cdf, chi_square_quantile, gamma_complex};
use crate::sum::ComplexMoments;
use crate::tester::{budgeted_count, check_separation_precondition, hoeffding_c_n, Constants, Profile, Verdict, BLOCK};
use crate::{Error, Result};

const BATCH_BLOCKS: usize = 32;

/// ln(πr / sinh πr), stable for large r; 0 at r = 0.
fn ln_logistic_modulus(r: f64) -> f64 {
    let x = PI * r.abs();
    if x < 1e-8 {
        return -x * x / 6.0;
    }
    // sinh x = e^x (1 - e^{-2x}) / 2
    x.ln() - x - (-(-2.0 * x).exp()).ln_1p() + std::f64::consts::LN_2
}

/// ln |CF(ξ)| as a function of r = ‖ξ‖; every registry family is radial and decreasing.
pub fn ln_cf_modulus(family: FamilyId, r: f64) -> f64 {
    let r = r.abs();
    match family {
        FamilyId::Gaussian => -0.5 * r * r,
        FamilyId::Cauchy => -r,
        FamilyId::Logistic => ln_logistic_modulus(r),
        FamilyId::Laplace => -(r * r).ln_1p(),
        // |Γ(1 - iξ)|² = πξ / sinh πξ
        FamilyId::Gumbel | FamilyId::Exponential => 0.5 * ln_logistic_modulus(r),
    }
}

/// Scalar CF of the location-0 base law; Exponential uses its Gumbel image under x ↦ -ln x.
pub fn cf_1d(family: FamilyId, xi: f64) -> Complex64 {
    match family {
        FamilyId::Gaussian => Complex64::new((-0.5 * xi * xi).exp(), 0.0),
        FamilyId::Cauchy => Complex64::new((-xi.abs()).exp(), 0.0),
        FamilyId::Logistic => Complex64::new(ln_logistic_modulus(xi).exp(), 0.0),
        FamilyId::Laplace => Complex64::new(1.0 / (1.0 + xi * xi), 0.0),
        FamilyId::Gumbel | FamilyId::Exponential => gamma_complex(Complex64::new(1.0, -xi)),
    }
}

/// E[e^{iξᵀX}] for the base law of `family`.
pub fn cf_evaluate(family: FamilyId, xi: &[f64]) -> Result<Complex64> {
    if xi.is_empty() {
        return Err(Error::DimensionMismatch { expected: 1, found: 0 });
    }
    if family == FamilyId::Gaussian {
        let r2: f64 = xi.iter().map(|x| x * x).sum();
        return Ok(Complex64::new((-0.5 * r2).exp(), 0.0));
    }
    if xi.len() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, found: xi.len() });
    }
    Ok(cf_1d(family, xi[0]))
}

/// min_{‖ξ‖ ≤ M} |CF(ξ)|, attained at ‖ξ‖ = M for every registry family.
pub fn cf_min_modulus(family: FamilyId, m: f64) -> Result<f64> {
    if !(m >= 0.0) {
        return Err(Error::Precondition(format!("M must be nonnegative, got {m}")));
    }
    let v = ln_cf_modulus(family, m).exp();
    if !(v >= f64::MIN_POSITIVE) {
        return Err(Error::ModulusUnderflow { m });
    }
    Ok(v)
}

/// Human-readable registry row for `families list`.
#[derive(Debug, Clone, Serialize)]
pub struct FamilyInfo {
    pub id: FamilyId,
    pub density: &'static str,
    pub cf: &'static str,
    pub reductions: &'static str,
}

pub fn registry() -> Vec<FamilyInfo> {
    FamilyId::ALL
        .into_iter()
        .map(|id| {
            let (density, cf, reductions) = match id {
                FamilyId::Gaussian => (
                    "(2π)^{-d/2} exp(-‖x-μ‖²/2)",
                    "exp(-‖ξ‖²/2)",
                    "target of the MLR reduction",
                ),
                FamilyId::Cauchy => ("1/(π(1+(x-μ)²))", "exp(-|ξ|)", "none"),
                FamilyId::Logistic => (
                    "e^{-(x-μ)}/(1+e^{-(x-μ)})²",
                    "πξ/sinh(πξ)",
                    "none",
                ),
                FamilyId::Laplace => ("exp(-|x-μ|)/2", "1/(1+ξ²)", "none"),
                FamilyId::Gumbel => (
                    "exp(-(x-μ) - e^{-(x-μ)})",
                    "Γ(1-iξ)",
                    "target of the exponential reduction",
                ),
                FamilyId::Exponential => (
                    "λ exp(-λx), x ≥ 0, stored parameter ln λ",
                    "λ/(λ-iξ)",
                    "x ↦ -ln x gives Gumbel(ln λ)",
                ),
            };
            FamilyInfo { id, density, cf, reductions }
        })
        .collect()
}

/// Default constants of the general tester.
///
/// Paper: σ² = 512/Δ²·(min{d, ln k} + ln(Δ/ε)), M² = 10σ²(d + ln k + ln(Δ/ε)), γ = σ²ε²/32.
pub fn general_constants(profile: Profile) -> Constants {
    match profile {
        Profile::Paper => Constants {
            c_sigma: 512.0,
            c_m: 10.0,
            c_gamma: 32.0,
            c_n: hoeffding_c_n(),
            c_vote: 5.0,
            pre_ratio: 32.0,
            pre_root: 32.0,
        },
        Profile::Practical => Constants {
            c_sigma: 1.95,
            c_m: 1.5,
            c_gamma: 3.25,
            c_n: 1.0,
            c_vote: 5.0,
            pre_ratio: 8.0,
            pre_root: 8.0,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralTesterParams {
    pub family: FamilyId,
    pub k: usize,
    pub d: usize,
    pub sigma: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub gamma: f64,
    pub theta: f64,
    #[serde(rename = "N")]
    pub n: u64,
    /// Lower bound on |CF| over the ball of radius M.
    pub delta_m: f64,
    pub profile: Profile,
    pub constants: Constants,
}

/// Closed-form quantities of the general tester before the budget cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeneralDerivation {
    pub sigma2: f64,
    pub m2: f64,
    pub gamma: f64,
    pub theta: f64,
    pub delta_m: f64,
    pub ln_n: f64,
}

/// θ = ½[e^{-σ²ε²/8} + e^{-σ²ε²/2}].
pub fn general_threshold(sigma2: f64, eps: f64) -> f64 {
    let u = sigma2 * eps * eps;
    0.5 * ((-u / 8.0).exp() + (-u / 2.0).exp())
}

/// Evaluates the general closed forms; the separation precondition is not checked here.
pub fn general_derive(
    k: usize,
    d: usize,
    delta: f64,
    eps: f64,
    family: FamilyId,
    profile: Profile,
    c: &Constants,
) -> Result<GeneralDerivation> {
    if !(delta > 0.0 && delta.is_finite() && eps > 0.0 && k > 0 && d > 0) {
        return Err(Error::Precondition("need k, d >= 1, finite delta > 0, eps > 0".into()));
    }
    if !family.supports_dim(d) {
        return Err(Error::Precondition(format!("family {family} requires d = 1")));
    }
    let (df, kf) = (d as f64, k as f64);
    let log_ratio = (delta / eps).ln();
    let sigma2 = c.c_sigma / (delta * delta) * (df.min(kf.ln()) + log_ratio);
    let m2 = (c.c_m * sigma2 * (df + kf.ln() + log_ratio)).max(5.0 * df * sigma2);
    let gamma = sigma2 * eps * eps / c.c_gamma;
    let theta = general_threshold(sigma2, eps);
    let m2 = match profile {
        Profile::Paper => m2,
        // Truncation mass at most half the acceptance gap 1 - θ.
        Profile::Practical => m2.max(sigma2 * chi_square_quantile(d, 1.0 - 0.5 * (1.0 - theta))),
    };
    let delta_m = cf_min_modulus(family, m2.sqrt())?;
    let ln_n = match profile {
        Profile::Paper => c.c_n.ln() + 2.0 * (kf.ln() - delta_m.ln() - gamma.ln()),
        Profile::Practical => {
            // Exact second moment k²·E[|CF(ξ)|^{-2} 1{‖ξ‖ ≤ M}].
            let ln_w = ln_truncated_radial_expectation(d, sigma2.sqrt(), m2.sqrt(), |r| {
                -2.0 * ln_cf_modulus(family, r)
            })?;
            c.c_n.ln() + 2.0 * kf.ln() + ln_w - 2.0 * gamma.ln()
        }
    };
    Ok(GeneralDerivation { sigma2, m2, gamma, theta, delta_m, ln_n })
}

pub fn general_select_params(
    k: usize,
    d: usize,
    delta: f64,
    eps: f64,
    family: FamilyId,
    profile: Profile,
) -> Result<GeneralTesterParams> {
    general_select_params_with(
        k,
        d,
        delta,
        eps,
        family,
        profile,
        &general_constants(profile),
        crate::tester::DEFAULT_BUDGET_CAP,
    )
}

#[allow(clippy::too_many_arguments)]
pub fn general_select_params_with(
    k: usize,
    d: usize,
    delta: f64,
    eps: f64,
    family: FamilyId,
    profile: Profile,
    constants: &Constants,
    budget_cap: u64,
) -> Result<GeneralTesterParams> {
    check_separation_precondition(k, d, delta, eps, constants)?;
    let der = general_derive(k, d, delta, eps, family, profile, constants)?;
    let n = budgeted_count(der.ln_n, budget_cap)?;
    Ok(GeneralTesterParams {
        family,
        k,
        d,
        sigma: der.sigma2.sqrt(),
        m: der.m2.sqrt(),
        gamma: der.gamma,
        theta: der.theta,
        n,
        delta_m: der.delta_m,
        profile,
        constants: *constants,
    })
}

/// Averages k·e^{iξᵀ(X-μ*)}/CF(ξ)·1{‖ξ‖ ≤ M}; for Exponential, X is first mapped to -ln X.
pub fn general_estimate_t<S: SampleSource + ?Sized>(
    source: &mut S,
    mu_star: &[f64],
    params: &GeneralTesterParams,
    rng: &RngStream,
) -> Result<crate::tester::Estimate> {
    let d = params.d;
    if source.dim() != d || mu_star.len() != d {
        return Err(Error::DimensionMismatch { expected: d, found: mu_star.len().max(source.dim()) });
    }
    if !(params.delta_m > 0.0) || params.m * params.m < 5.0 * d as f64 * params.sigma * params.sigma * (1.0 - 1e-12) {
        return Err(Error::Precondition("invalid general tester parameters".into()));
    }
    let total = params.n as usize;
    let mut acc = ComplexMoments::default();
    let mut buf = Vec::new();
    let mut block = 0usize;
    while block * BLOCK < total {
        let count = (total - block * BLOCK).min(BLOCK * BATCH_BLOCKS);
        buf.resize(count * d, 0.0);
        source.fill(&mut buf)?;
        if params.family == FamilyId::Exponential {
            for x in buf.iter_mut() {
                *x = reduce_exponential(*x)?;
            }
        }
        let partials: Vec<ComplexMoments> = buf
            .par_chunks(BLOCK * d)
            .enumerate()
            .map(|(i, xs)| general_block(xs, mu_star, params, &mut rng.substream((block + i) as u64)))
            .collect();
        for p in &partials {
            acc.merge(p);
        }
        block += count.div_ceil(BLOCK);
    }
    Ok(crate::tester::Estimate { value: acc.mean(), stderr: acc.stderr(), n_used: acc.n })
}

fn general_block(xs: &[f64], mu_star: &[f64], p: &GeneralTesterParams, rng: &mut RngStream) -> ComplexMoments {
    let d = p.d;
    let m2 = p.m * p.m;
    let kf = p.k as f64;
    let mut acc = ComplexMoments::default();
    let mut xi = vec![0.0; d];
    for x in xs.chunks_exact(d) {
        let mut r2 = 0.0;
        for v in xi.iter_mut() {
            *v = p.sigma * rng.normal();
            r2 += *v * *v;
        }
        if r2 > m2 {
            acc.push_zero();
            continue;
        }
        let phase: f64 = x.iter().zip(mu_star).zip(&xi).map(|((a, b), f)| f * (a - b)).sum();
        let (s, c) = phase.sin_cos();
        let z = match p.family {
            FamilyId::Gaussian => Complex64::new(c, s) * (kf * (0.5 * r2).exp()),
            FamilyId::Gumbel | FamilyId::Exponential => kf * Complex64::new(c, s) / cf_1d(p.family, xi[0]),
            f => Complex64::new(c, s) * (kf * (-ln_cf_modulus(f, xi[0])).exp()),
        };
        acc.push(z.re, z.im);
    }
    acc
}

pub fn general_test<S: SampleSource + ?Sized>(
    source: &mut S,
    mu_star: &[f64],
    params: &GeneralTesterParams,
    rng: &RngStream,
) -> Result<Verdict> {
    let est = general_estimate_t(source, mu_star, params, rng)?;
    Ok(Verdict::from_statistic(est.value, params.theta, params.gamma, est.n_used))
}

/// δ = P(‖X‖ ≤ ε/2) for the base law (Gumbel image for Exponential).
pub fn hit_probability(family: FamilyId, d: usize, eps: f64) -> f64 {
    let h = eps / 2.0;
    match family {
        FamilyId::Gaussian => chi_square_cdf(d, h * h),
        FamilyId::Exponential => base_cdf(FamilyId::Gumbel, h) - base_cdf(FamilyId::Gumbel, -h),
        f => base_cdf(f, h) - base_cdf(f, -h),
    }
}

/// (δ, N) with N = ceil(2k ln k / δ); ln 2 stands in for ln k when k = 1.
pub fn general_candidate_budget(k: usize, family: FamilyId, d: usize, eps: f64) -> (f64, u64) {
    let delta = hit_probability(family, d, eps);
    let kf = k as f64;
    (delta, (2.0 * kf * (k.max(2) as f64).ln() / delta).ceil() as u64)
}

/// Learns the k locations of a `family` mixture (ln λ for Exponential).
pub fn general_learn<S: SampleSource + ?Sized>(
    source: &mut S,
    family: FamilyId,
    config: &LearnerConfig,
    rng: &RngStream,
) -> Result<LearnResult> {
    let constants = config.constants.unwrap_or_else(|| general_constants(config.profile));
    check_separation_precondition(config.k, config.d, config.delta, config.eps, &constants)?;
    if source.dim() != config.d {
        return Err(Error::DimensionMismatch { expected: config.d, found: source.dim() });
    }
    let params = general_select_params_with(
        config.k,
        config.d,
        config.delta,
        config.eps,
        family,
        config.profile,
        &constants,
        config.tester_budget_cap,
    )?;
    let (_, n_candidates) = general_candidate_budget(config.k, family, config.d, config.eps);
    candidate_budget_capped_with(n_candidates, config.candidate_cap)?;
    let plan = VotePlan {
        k: config.k,
        d: config.d,
        eps: config.eps,
        n_candidates,
        votes: vote_count(config.vote_multiplier, n_candidates),
        samples_per_call: params.n,
        sample_budget: config.sample_budget,
    };
    if family == FamilyId::Exponential {
        // Candidates live in the reduced (Gumbel) coordinates.
        let mut reduced = ReducedExponential { inner: source };
        return vote_and_cluster(&mut reduced, &plan, rng, |src, c, r| {
            general_test(src.inner, c, &params, r)
        });
    }
    vote_and_cluster(source, &plan, rng, |src, c, r| general_test(src, c, &params, r))
}

/// Candidate stream for the exponential family: draws raw samples and reduces them.
struct ReducedExponential<'a, S: SampleSource + ?Sized> {
    inner: &'a mut S,
}

impl<S: SampleSource + ?Sized> SampleSource for ReducedExponential<'_, S> {
    fn dim(&self) -> usize {
        1
    }

    fn fill(&mut self, out: &mut [f64]) -> Result<()> {
        self.inner.fill(out)?;
        for x in out.iter_mut() {
            *x = reduce_exponential(*x)?;
        }
        Ok(())
    }
}

#[inline]
fn reduce_exponential(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("exponential reduction needs x > 0, got {x}")));
    }
    Ok(-x.ln())
}

/// x ↦ -ln x; Exp(λ) samples become Gumbel samples with location ln λ.
pub fn exponential_reduction(samples: &[f64]) -> Result<Vec<f64>> {
    samples.iter().map(|&x| reduce_exponential(x)).collect()
}

/// Keeps pairs with |x| ≥ 1 and emits y/x + N(0, 1 - 1/x²): a unit-variance mixture at the weights.
pub fn mlr_reduction(pairs: &[(f64, f64)], rng: &mut RngStream) -> Vec<f64> {
    pairs.iter().filter_map(|&(x, y)| mlr_map(x, y, rng)).collect()
}

#[inline]
fn mlr_map(x: f64, y: f64, rng: &mut RngStream) -> Option<f64> {
    if x.abs() < 1.0 {
        return None;
    }
    let var = 1.0 - 1.0 / (x * x);
    let noise = if var > 0.0 { var.sqrt() * rng.normal() } else { 0.0 };
    Some(y / x + noise)
}

/// Reduced MLR samples drawn on demand from fresh (x, y) pairs.
#[derive(Debug, Clone)]
pub struct MlrSource {
    pub weights: Vec<f64>,
    pairs: RngStream,
    noise: RngStream,
    /// Pairs drawn so far, kept or not.
    pub pairs_drawn: u64,
}

impl MlrSource {
    pub fn new(weights: Vec<f64>, rng: RngStream) -> Self {
        let noise = rng.substream(1);
        Self { weights, pairs: rng.substream(0), noise, pairs_drawn: 0 }
    }
}

impl SampleSource for MlrSource {
    fn dim(&self) -> usize {
        1
    }

    fn fill(&mut self, out: &mut [f64]) -> Result<()> {
        for o in out.iter_mut() {
            *o = loop {
                let (x, y) = mlr_pair(&self.weights, &mut self.pairs);
                self.pairs_drawn += 1;
                if let Some(v) = mlr_map(x, y, &mut self.noise) {
                    break v;
                }
            };
        }
        Ok(())
    }
}
