//! Self-checks over randomized fixtures: each check reports a measured value against its bound.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::family::{cf_evaluate, exponential_reduction, general_constants, general_derive};
use crate::geometry::{norm2, norm_lower_bound};
use crate::mixture::{FamilyId, MixtureModel};
use crate::rng::RngStream;
use crate::sampling::{generate_separated_means, sample, MixtureSource};
use crate::special::chi_square_sf;
use crate::tester::{analytic_main_term, derive, estimate_t, s_bounds, truncation_bound, Constants, Profile, TesterParams};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    S1s2,
    Norm,
    Chi2,
    Cf,
    Oracle,
    Formula,
}

impl Suite {
    pub const ALL: [Suite; 6] = [Suite::S1s2, Suite::Norm, Suite::Chi2, Suite::Cf, Suite::Oracle, Suite::Formula];

    pub fn name(self) -> &'static str {
        match self {
            Suite::S1s2 => "s1s2",
            Suite::Norm => "norm",
            Suite::Chi2 => "chi2",
            Suite::Cf => "cf",
            Suite::Oracle => "oracle",
            Suite::Formula => "formula",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Domain(format!("unknown suite {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Random fixtures per claim suite.
    pub fixtures: usize,
    pub oracle_runs: usize,
    pub oracle_n: u64,
    pub cf_samples: usize,
    /// Gaussian paper-profile constants under audit.
    pub constants: Constants,
    /// General-family paper-profile constants under audit.
    pub general_constants: Constants,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            fixtures: 1000,
            oracle_runs: 20,
            oracle_n: 200_000,
            cf_samples: 1_000_000,
            constants: Constants::for_profile(Profile::Paper),
            general_constants: general_constants(Profile::Paper),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    pub passed: bool,
}

impl Check {
    fn at_most(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Self { name: name.into(), measured, bound, passed: measured <= bound }
    }

    fn at_least(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Self { name: name.into(), measured, bound, passed: measured >= bound }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub passed: bool,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub passed: bool,
    pub suites: Vec<SuiteReport>,
}

pub fn run(suites: &[Suite], opts: &VerifyOptions) -> Result<VerifyReport> {
    let reports = suites.iter().map(|&s| run_suite(s, opts)).collect::<Result<Vec<_>>>()?;
    Ok(VerifyReport { seed: opts.seed, passed: reports.iter().all(|r| r.passed), suites: reports })
}

pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> Result<SuiteReport> {
    let checks = match suite {
        Suite::S1s2 => s1s2(opts)?,
        Suite::Norm => norm(opts)?,
        Suite::Chi2 => chi2(),
        Suite::Cf => cf(opts)?,
        Suite::Oracle => oracle(opts)?,
        Suite::Formula => formula(opts)?,
    };
    Ok(SuiteReport { suite, passed: checks.iter().all(|c| c.passed), checks })
}

/// Δ-separated means around a random origin, so the nearest mean is not at 0.
fn random_fixture(rng: &mut RngStream, k: usize, d: usize, delta: f64) -> Result<Vec<Vec<f64>>> {
    let radius = 2.0 * delta * (k as f64).powf(1.0 / d as f64);
    let means = generate_separated_means(k, d, delta, radius, rng)?;
    let origin: Vec<f64> = (0..d).map(|_| radius * (2.0 * rng.uniform_open() - 1.0)).collect();
    Ok(means.into_iter().map(|m| m.iter().zip(&origin).map(|(a, b)| a - b).collect()).collect())
}

fn s1s2(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let c = &opts.constants;
    let mut rng = RngStream::new(opts.seed, 0x51);
    let (mut gate_failures, mut s1_ratio, mut s2_ratio) = (0usize, 0.0f64, 0.0f64);
    for _ in 0..opts.fixtures {
        let k = (256f64.ln() * rng.uniform_open()).exp().floor().max(1.0) as usize;
        let d = 1 + rng.index(10);
        let delta = 0.5 + 3.5 * rng.uniform_open();
        let m = (d as f64).min((k as f64).ln());
        let eps_max = (delta / c.pre_ratio).min(if m > 0.0 { delta / (c.pre_root * m.sqrt()) } else { f64::INFINITY });
        let eps = eps_max * (0.05 + 0.94 * rng.uniform_open());
        let der = derive(k, d, delta, eps, Profile::Paper, c)?;
        let means = random_fixture(&mut rng, k, d, delta)?;
        let b = s_bounds(&means, der.sigma2.sqrt(), delta, d, k);
        if !b.s1_hypothesis {
            gate_failures += 1;
        } else if b.s1 > 0.0 {
            s1_ratio = s1_ratio.max(b.s1 / b.s1_bound);
        }
        s2_ratio = s2_ratio.max(b.s2 / b.s2_bound);
    }
    Ok(vec![
        Check::at_most("S1 hypothesis failures under the selected sigma", gate_failures as f64, 0.0),
        Check::at_most("max S1 / S1 bound", s1_ratio, 1.0),
        Check::at_most("max S2 / S2 bound", s2_ratio, 1.0),
    ])
}

fn norm(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut rng = RngStream::new(opts.seed, 0x52);
    let mut worst = f64::INFINITY;
    for _ in 0..opts.fixtures {
        let k = 2 + rng.index(63);
        let d = 1 + rng.index(5);
        let delta = 0.5 + 3.5 * rng.uniform_open();
        let means = random_fixture(&mut rng, k, d, delta)?;
        let mut norms: Vec<f64> = means.iter().map(|m| norm2(m).sqrt()).collect();
        norms.sort_by(f64::total_cmp);
        for (i, r) in norms.iter().enumerate().skip(1) {
            worst = worst.min(r / norm_lower_bound(delta, d, i + 1)?);
        }
    }
    Ok(vec![Check::at_least("min j-th norm / lower bound", worst, 1.0 - 1e-12)])
}

fn chi2() -> Vec<Check> {
    let mut worst = 0.0f64;
    for d in 1..=10usize {
        for step in 0..=60 {
            let t = 5.0 * d as f64 + step as f64 * 0.25 * d as f64;
            worst = worst.max(chi_square_sf(d, t) / (-t / 5.0).exp());
        }
    }
    vec![Check::at_most("max P(chi2_d >= t) / e^{-t/5}, d <= 10, t in [5d, 20d]", worst, 1.0)]
}

fn cf(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut rng = RngStream::new(opts.seed, 0x53);
    let (mut at_zero, mut modulus, mut symmetry, mut empirical, mut gumbel) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let n = opts.cf_samples;
    for f in FamilyId::ALL {
        at_zero = at_zero.max((cf_evaluate(f, &[0.0])? - Complex64::new(1.0, 0.0)).norm());
        for _ in 0..1000 {
            let xi = 60.0 * rng.uniform_open() - 30.0;
            let a = cf_evaluate(f, &[xi])?;
            modulus = modulus.max(a.norm());
            symmetry = symmetry.max((cf_evaluate(f, &[-xi])? - a.conj()).norm());
        }
        let model = MixtureModel::new_1d(f, &[0.0])?;
        let mut xs: Vec<f64> = sample(&model, n, &mut rng).into_iter().map(|x| x[0]).collect();
        if f == FamilyId::Exponential {
            xs = exponential_reduction(&xs)?;
        }
        for xi in [0.5, 1.0, 2.0] {
            let emp = xs.iter().map(|&x| Complex64::new(0.0, xi * x).exp()).sum::<Complex64>() / n as f64;
            empirical = empirical.max((emp - cf_evaluate(f, &[xi])?).norm());
        }
    }
    for i in 1..=2000 {
        let xi = i as f64 * 0.01;
        let exact = (std::f64::consts::PI * xi / (std::f64::consts::PI * xi).sinh()).sqrt();
        gumbel = gumbel.max((cf_evaluate(FamilyId::Gumbel, &[xi])?.norm() - exact).abs());
    }
    Ok(vec![
        Check::at_most("max |CF(0) - 1|", at_zero, 1e-12),
        Check::at_most("max |CF(xi)|", modulus, 1.0 + 1e-12),
        Check::at_most("max |CF(-xi) - conj CF(xi)|", symmetry, 1e-12),
        Check::at_most("max |empirical CF - CF| at xi in {0.5, 1, 2}", empirical, 6.0 / (n as f64).sqrt()),
        Check::at_most("max ||Gamma(1 - i xi)| - sqrt(pi xi / sinh pi xi)| on (0, 20]", gumbel, 1e-10),
    ])
}

/// Fraction of seeded runs with |T̂ - main term| ≤ 3·stderr + truncation bound.
pub fn oracle_pass_fraction(k: usize, d: usize, runs: usize, n: u64, seed: u64) -> Result<f64> {
    let mut rng = RngStream::new(seed, 0x54 + (k * 10 + d) as u64);
    let means = generate_separated_means(k, d, 2.0, 6.0, &mut rng)?;
    let mu_star = means[0].clone();
    let (sigma, m) = (1.0, (10.0 * d as f64).sqrt());
    let params = TesterParams::explicit(k, d, sigma, m, 0.01, 0.9, n)?;
    let main = analytic_main_term(&means, &mu_star, sigma);
    let trunc = truncation_bound(&means, &mu_star, sigma, m);
    let model = MixtureModel::new(FamilyId::Gaussian, means)?;
    let mut ok = 0usize;
    for r in 0..runs as u64 {
        let mut src = MixtureSource::new(model.clone(), rng.substream(2 * r));
        let est = estimate_t(&mut src, &mu_star, &params, &rng.substream(2 * r + 1))?;
        ok += ((est.value - Complex64::new(main, 0.0)).norm() <= 3.0 * est.stderr + trunc) as usize;
    }
    Ok(ok as f64 / runs as f64)
}

fn oracle(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for k in [1, 3, 5] {
        for d in [1, 2] {
            let frac = oracle_pass_fraction(k, d, opts.oracle_runs, opts.oracle_n, opts.seed)?;
            checks.push(Check::at_least(format!("k={k} d={d}: fraction within 3 stderr + truncation"), frac, 0.99));
        }
    }
    Ok(checks)
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

/// Configured constants must reproduce the closed forms with the literal proof constants.
fn formula(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let (k, d, delta, eps) = (3usize, 1usize, 10.0f64, 0.1f64);
    let lr = (delta / eps).ln();
    let m = 1f64.min(3f64.ln());
    let tol = 1e-12;

    let a = 512.0 / (delta * delta) * (m + lr);
    let gamma = a * eps * eps / 64.0;
    let theta = 0.5 * ((-a * eps * eps / 16.0).exp() + (-a * eps * eps / 4.0).exp());
    let s2_hat = 10.0 * 3f64.min(1.0 + (32.0 / (delta * delta)).powf(1.5));
    let m2 = 5.0 * 2.0 * (a - 1.0) * (1.0 + s2_hat.ln() - gamma.ln());
    let g = derive(k, d, delta, eps, Profile::Paper, &opts.constants)?;

    let s2 = 512.0 / (delta * delta) * (m + lr);
    let gm2 = 10.0 * s2 * (1.0 + 3f64.ln() + lr);
    let ggamma = s2 * eps * eps / 32.0;
    let gtheta = 0.5 * ((-s2 * eps * eps / 8.0).exp() + (-s2 * eps * eps / 2.0).exp());
    let h = general_derive(k, d, delta, eps, FamilyId::Cauchy, Profile::Paper, &opts.general_constants)?;

    Ok(vec![
        Check::at_most("gaussian sigma^2/2 + 1 relative error", rel(g.a, a), tol),
        Check::at_most("gaussian gamma relative error", rel(g.gamma, gamma), tol),
        Check::at_most("gaussian theta relative error", rel(g.theta, theta), tol),
        Check::at_most("gaussian M^2 relative error", rel(g.m2, m2), tol),
        Check::at_most("general sigma^2 relative error", rel(h.sigma2, s2), tol),
        Check::at_most("general M^2 relative error", rel(h.m2, gm2), tol),
        Check::at_most("general gamma relative error", rel(h.gamma, ggamma), tol),
        Check::at_most("general theta relative error", rel(h.theta, gtheta), tol),
    ])
}
