//! Separated-mean fixtures and i.i.d. sampling from every registry family.

use std::f64::consts::PI;

use crate::geometry::dist2;
use crate::mixture::{FamilyId, MixtureModel};
use crate::rng::RngStream;
use crate::special::normal_cdf;
use crate::{Error, Result};

/// Proposal cap for [`generate_separated_means`].
pub const MAX_PROPOSALS: u64 = 1_000_000;

/// Draws k points in the radius ball with pairwise distance ≥ `delta`.
///
/// Sequential rejection sampling; fails fast when the packing bound
/// k·(Δ/2)^d ≤ (radius + Δ/2)^d is violated.
pub fn generate_separated_means(
    k: usize,
    d: usize,
    delta: f64,
    radius: f64,
    rng: &mut RngStream,
) -> Result<Vec<Vec<f64>>> {
    if k == 0 || d == 0 || !(delta >= 0.0) || !(radius >= 0.0) {
        return Err(Error::Precondition("need k, d >= 1 and nonnegative delta, radius".into()));
    }
    let needed = k as f64 * (delta / 2.0).powi(d as i32);
    let available = (radius + delta / 2.0).powi(d as i32);
    if needed > available {
        return Err(Error::PackingInfeasible { needed, available });
    }
    let delta2 = delta * delta;
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut proposals = 0u64;
    while out.len() < k {
        if proposals == MAX_PROPOSALS {
            return Err(Error::RetryCapExceeded { cap: MAX_PROPOSALS });
        }
        proposals += 1;
        let p = uniform_in_ball(d, radius, rng);
        if out.iter().all(|q| dist2(q, &p) >= delta2) {
            out.push(p);
        }
    }
    Ok(out)
}

fn uniform_in_ball(d: usize, radius: f64, rng: &mut RngStream) -> Vec<f64> {
    if d == 1 {
        return vec![radius * (2.0 * rng.uniform_open() - 1.0)];
    }
    let mut v: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let r = radius * rng.uniform_open().powf(1.0 / d as f64);
    v.iter_mut().for_each(|x| *x *= r / n);
    v
}

/// One draw from the location-0 base distribution (rate 1 for exponential).
#[inline]
pub fn base_draw(family: FamilyId, rng: &mut RngStream) -> f64 {
    match family {
        FamilyId::Gaussian => rng.normal(),
        FamilyId::Cauchy => (PI * (rng.uniform_open() - 0.5)).tan(),
        FamilyId::Logistic => {
            let u = rng.uniform_open();
            (u / (1.0 - u)).ln()
        }
        FamilyId::Laplace => {
            let u = rng.uniform_open();
            if u < 0.5 {
                (2.0 * u).ln()
            } else {
                -(2.0 * (1.0 - u)).ln()
            }
        }
        FamilyId::Gumbel => -(-rng.uniform_open().ln()).ln(),
        FamilyId::Exponential => -rng.uniform_open().ln(),
    }
}

/// Writes one mixture draw into `out` (length d).
#[inline]
pub fn draw_into(model: &MixtureModel, rng: &mut RngStream, out: &mut [f64]) {
    let j = rng.index(model.k);
    let mu = &model.means[j];
    match model.family {
        FamilyId::Exponential => {
            out[0] = base_draw(FamilyId::Exponential, rng) / mu[0].exp();
        }
        FamilyId::Gaussian => {
            for (o, m) in out.iter_mut().zip(mu) {
                *o = m + rng.normal();
            }
        }
        f => out[0] = mu[0] + base_draw(f, rng),
    }
}

/// n i.i.d. draws; row-major, each of length d.
pub fn sample(model: &MixtureModel, n: usize, rng: &mut RngStream) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let mut x = vec![0.0; model.d];
            draw_into(model, rng, &mut x);
            x
        })
        .collect()
}

/// n draws of (X, Y) with X ~ N(0,1), j uniform, Y ~ N(w_j X, 1).
pub fn sample_mlr(weights: &[f64], n: usize, rng: &mut RngStream) -> Vec<(f64, f64)> {
    (0..n).map(|_| mlr_pair(weights, rng)).collect()
}

#[inline]
pub(crate) fn mlr_pair(weights: &[f64], rng: &mut RngStream) -> (f64, f64) {
    let x = rng.normal();
    let w = weights[rng.index(weights.len())];
    (x, w * x + rng.normal())
}

/// CDF of the location-0 base distribution (rate 1 for exponential).
pub fn base_cdf(family: FamilyId, x: f64) -> f64 {
    match family {
        FamilyId::Gaussian => normal_cdf(x),
        FamilyId::Cauchy => 0.5 + x.atan() / PI,
        FamilyId::Logistic => 1.0 / (1.0 + (-x).exp()),
        FamilyId::Laplace => {
            if x < 0.0 {
                0.5 * x.exp()
            } else {
                1.0 - 0.5 * (-x).exp()
            }
        }
        FamilyId::Gumbel => (-(-x).exp()).exp(),
        FamilyId::Exponential => {
            if x <= 0.0 {
                0.0
            } else {
                -(-x).exp_m1()
            }
        }
    }
}

/// CDF of a one-dimensional mixture.
pub fn mixture_cdf(model: &MixtureModel, x: f64) -> f64 {
    let total: f64 = model
        .means
        .iter()
        .map(|m| match model.family {
            FamilyId::Exponential => base_cdf(FamilyId::Exponential, x * m[0].exp()),
            f => base_cdf(f, x - m[0]),
        })
        .sum();
    total / model.k as f64
}

/// Kolmogorov–Smirnov statistic of `xs` against `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(xs: &[f64], cdf: F) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

/// A stream of d-dimensional samples consumed by the testers.
pub trait SampleSource {
    fn dim(&self) -> usize;

    /// Fills `out` with `out.len() / dim` consecutive samples, row-major.
    fn fill(&mut self, out: &mut [f64]) -> Result<()>;
}

/// Fresh i.i.d. draws from a model.
#[derive(Debug, Clone)]
pub struct MixtureSource {
    pub model: MixtureModel,
    rng: RngStream,
}

impl MixtureSource {
    pub fn new(model: MixtureModel, rng: RngStream) -> Self {
        Self { model, rng }
    }
}

impl SampleSource for MixtureSource {
    fn dim(&self) -> usize {
        self.model.d
    }

    fn fill(&mut self, out: &mut [f64]) -> Result<()> {
        for x in out.chunks_exact_mut(self.model.d) {
            draw_into(&self.model, &mut self.rng, x);
        }
        Ok(())
    }
}

/// A finite recorded sample set, consumed front to back.
#[derive(Debug, Clone)]
pub struct RecordedSource {
    data: Vec<f64>,
    d: usize,
    pos: usize,
}

impl RecordedSource {
    pub fn new(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(1, |r| r.len());
        if let Some(r) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, found: r.len() });
        }
        Ok(Self { data: rows.concat(), d, pos: 0 })
    }

    pub fn remaining(&self) -> usize {
        (self.data.len() - self.pos) / self.d
    }
}

impl SampleSource for RecordedSource {
    fn dim(&self) -> usize {
        self.d
    }

    fn fill(&mut self, out: &mut [f64]) -> Result<()> {
        if self.pos + out.len() > self.data.len() {
            return Err(Error::InsufficientSamples {
                needed: (out.len() / self.d) as u64,
                available: self.remaining() as u64,
            });
        }
        out.copy_from_slice(&self.data[self.pos..self.pos + out.len()]);
        self.pos += out.len();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::separation;

    #[test]
    fn separated_means_examples() {
        let mut rng = RngStream::new(1, 0);
        let m = generate_separated_means(3, 1, 2.0, 10.0, &mut rng).unwrap();
        assert_eq!(m.len(), 3);
        assert!(separation(&m).unwrap() >= 2.0);
        assert!(m.iter().all(|p| p[0].abs() <= 10.0));

        let m = generate_separated_means(5, 2, 1.0, 10.0, &mut rng).unwrap();
        assert!(separation(&m).unwrap() >= 1.0);
        assert!(m.iter().all(|p| p[0].hypot(p[1]) <= 10.0));

        let e = generate_separated_means(100, 1, 1.0, 10.0, &mut rng).unwrap_err();
        assert_eq!(e, Error::PackingInfeasible { needed: 50.0, available: 10.5 });
    }

    #[test]
    fn retry_cap_reported() {
        // Admissible by the packing bound, but sequential rejection jams long before 21 points.
        let mut rng = RngStream::new(2, 0);
        let e = generate_separated_means(21, 1, 1.0, 10.0, &mut rng).unwrap_err();
        assert_eq!(e, Error::RetryCapExceeded { cap: MAX_PROPOSALS });
    }

    #[test]
    fn gaussian_moments() {
        let model = MixtureModel::new_1d(FamilyId::Gaussian, &[0.0]).unwrap();
        let xs = sample(&model, 1_000_000, &mut RngStream::new(3, 0));
        let n = xs.len() as f64;
        let mean = xs.iter().map(|x| x[0]).sum::<f64>() / n;
        let var = xs.iter().map(|x| (x[0] - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.01);
        assert!((var - 1.0).abs() < 0.02);
    }

    #[test]
    fn cauchy_median() {
        let model = MixtureModel::new_1d(FamilyId::Cauchy, &[5.0]).unwrap();
        let mut xs: Vec<f64> = sample(&model, 1_000_000, &mut RngStream::new(4, 0))
            .into_iter()
            .map(|x| x[0])
            .collect();
        xs.sort_by(f64::total_cmp);
        assert!((xs[xs.len() / 2] - 5.0).abs() < 0.05);
    }

    #[test]
    fn symmetric_two_component() {
        let model = MixtureModel::new_1d(FamilyId::Gaussian, &[-10.0, 10.0]).unwrap();
        let xs = sample(&model, 100_000, &mut RngStream::new(5, 0));
        let frac = xs.iter().filter(|x| x[0] > 0.0).count() as f64 / xs.len() as f64;
        assert!((frac - 0.5).abs() < 0.01);
    }

    #[test]
    fn ks_against_closed_form_cdfs() {
        for (i, fam) in FamilyId::ALL.into_iter().enumerate() {
            let loc = if fam == FamilyId::Exponential { 0.7 } else { 1.3 };
            let model = MixtureModel::new_1d(fam, &[loc, loc + 4.0]).unwrap();
            let xs: Vec<f64> = sample(&model, 100_000, &mut RngStream::new(6, i as u64))
                .into_iter()
                .map(|x| x[0])
                .collect();
            let ks = ks_statistic(&xs, |x| mixture_cdf(&model, x));
            assert!(ks < 0.01, "{fam}: KS {ks}");
        }
    }

    #[test]
    fn mlr_slopes() {
        let mut rng = RngStream::new(8, 0);
        let slope = |pairs: &[(f64, f64)]| {
            let sxy: f64 = pairs.iter().map(|(x, y)| x * y).sum();
            let sxx: f64 = pairs.iter().map(|(x, _)| x * x).sum();
            sxy / sxx
        };
        let p = sample_mlr(&[2.0], 1_000_000, &mut rng);
        assert!((slope(&p) - 2.0).abs() < 0.02);
        let p = sample_mlr(&[-3.0, 3.0], 1_000_000, &mut rng);
        assert!(slope(&p).abs() < 0.05);
        let p = sample_mlr(&[0.0], 200_000, &mut rng);
        let n = p.len() as f64;
        let sd = (p.iter().map(|(_, y)| y * y).sum::<f64>() / n).sqrt();
        assert!((sd - 1.0).abs() < 0.01);
    }

    #[test]
    fn deterministic_streams() {
        let model = MixtureModel::new_1d(FamilyId::Logistic, &[0.0, 3.0]).unwrap();
        let a = sample(&model, 1000, &mut RngStream::new(9, 1));
        let b = sample(&model, 1000, &mut RngStream::new(9, 1));
        assert!(a.iter().zip(&b).all(|(x, y)| x[0].to_bits() == y[0].to_bits()));
    }

    #[test]
    fn recorded_source_exhausts() {
        let mut s = RecordedSource::new(&[vec![1.0], vec![2.0]]).unwrap();
        let mut buf = [0.0; 2];
        s.fill(&mut buf).unwrap();
        assert_eq!(buf, [1.0, 2.0]);
        assert!(matches!(s.fill(&mut buf[..1]), Err(Error::InsufficientSamples { .. })));
    }
}
