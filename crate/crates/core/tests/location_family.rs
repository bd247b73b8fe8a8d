use num_complex::Complex64;
use proptest::prelude::*;
use specmix_core::family::*;
use specmix_core::geometry::epsilon_close;
use specmix_core::learner::LearnerConfig;
use specmix_core::mixture::{FamilyId, MixtureModel};
use specmix_core::rng::RngStream;
use specmix_core::sampling::{sample, MixtureSource};
use specmix_core::tester::{self, Constants, Profile};

fn arm(model: &MixtureModel, mu: f64, p: &GeneralTesterParams, trials: u64, seed: u64) -> u32 {
    (0..trials)
        .map(|t| {
            let mut src = MixtureSource::new(model.clone(), RngStream::new(seed + t, 0));
            general_test(&mut src, &[mu], p, &RngStream::new(seed + t, 1)).unwrap().accepted() as u32
        })
        .sum()
}

#[test]
fn cauchy_accept_and_reject_arms() {
    let model = MixtureModel::new_1d(FamilyId::Cauchy, &[0.0, 2.0, 4.0]).unwrap();
    let p = general_select_params(3, 1, 2.0, 0.2, FamilyId::Cauchy, Profile::Practical).unwrap();
    let accepted = arm(&model, 0.0, &p, 100, 1000);
    let rejected = 100 - arm(&model, 1.0, &p, 100, 2000);
    assert!(accepted >= 90, "accept arm {accepted}/100");
    assert!(rejected >= 90, "reject arm {rejected}/100");
}

#[test]
fn gaussian_general_path_agrees_with_gaussian_tester() {
    let means = [0.0, 2.0, 4.0];
    let model = MixtureModel::new_1d(FamilyId::Gaussian, &means).unwrap();
    let gp = general_select_params(3, 1, 2.0, 0.2, FamilyId::Gaussian, Profile::Practical).unwrap();
    let tp = tester::select_params(3, 1, 2.0, 0.2, Profile::Practical).unwrap();
    let mut agree = 0;
    let mut total = 0;
    for (mu, expect) in [(0.0, true), (1.0, false)] {
        for s in 0..8u64 {
            let mut a = MixtureSource::new(model.clone(), RngStream::new(s, 0));
            let mut b = MixtureSource::new(model.clone(), RngStream::new(s, 0));
            let g = general_test(&mut a, &[mu], &gp, &RngStream::new(s, 1)).unwrap().accepted();
            let t = tester::test(&mut b, &[mu], &tp, &RngStream::new(s, 1)).unwrap().accepted();
            agree += (g == t && g == expect) as u32;
            total += 1;
        }
    }
    assert!(agree >= total - 1, "agreement {agree}/{total}");
}

#[test]
fn laplace_learns_with_resolving_constants() {
    // Large enough σ that neighbour leakage k·e^{-σ²Δ²/2} sits far below the ε gap.
    let truth = [-6.0, 0.0, 6.0];
    let model = MixtureModel::new_1d(FamilyId::Laplace, &truth).unwrap();
    let mut config = LearnerConfig::new(3, 1, 6.0, 0.6, Profile::Practical);
    config.constants = Some(Constants { c_sigma: 8.0, c_gamma: 8.0, c_n: 5.0, ..general_constants(Profile::Practical) });
    let mut ok = 0;
    for s in 0..3 {
        let mut src = MixtureSource::new(model.clone(), RngStream::new(s, 0));
        if let Ok(res) = general_learn(&mut src, FamilyId::Laplace, &config, &RngStream::new(s, 1)) {
            ok += epsilon_close(&res.means_hat, &model.means, 0.6).unwrap().matched as u32;
        }
    }
    assert!(ok >= 2, "{ok}/3");
}

#[test]
fn exponential_learns_single_rate() {
    let ln_lambda = 1.0;
    let model = MixtureModel::new_1d(FamilyId::Exponential, &[ln_lambda]).unwrap();
    let config = LearnerConfig::new(1, 1, 4.0, 0.4, Profile::Practical);
    // Each run misses with probability about 1/4 (no candidate within ε/2).
    let mut ok = 0;
    for s in 0..6 {
        let mut src = MixtureSource::new(model.clone(), RngStream::new(s, 0));
        if let Ok(res) = general_learn(&mut src, FamilyId::Exponential, &config, &RngStream::new(s, 1)) {
            ok += ((res.means_hat[0][0] - ln_lambda).abs() <= 0.4) as u32;
        }
    }
    assert!(ok >= 3, "{ok}/6");
}

#[test]
fn empirical_cf_matches_registry() {
    let n = 1_000_000;
    for f in FamilyId::ALL {
        let model = MixtureModel::new_1d(f, &[0.0]).unwrap();
        let mut xs: Vec<f64> = sample(&model, n, &mut RngStream::new(40, f as u64)).into_iter().map(|x| x[0]).collect();
        if f == FamilyId::Exponential {
            xs = exponential_reduction(&xs).unwrap();
        }
        for xi in [0.5, 1.0, 2.0] {
            let emp: Complex64 = xs.iter().map(|&x| Complex64::new(0.0, xi * x).exp()).sum::<Complex64>() / n as f64;
            let cf = cf_evaluate(f, &[xi]).unwrap();
            assert!((emp - cf).norm() <= 3.0 * 2.0 / (n as f64).sqrt(), "{f} ξ={xi}: {emp} vs {cf}");
        }
    }
}

#[test]
fn gumbel_modulus_identity() {
    for i in 1..=2000 {
        let xi = i as f64 * 0.01;
        let g = cf_evaluate(FamilyId::Gumbel, &[xi]).unwrap().norm();
        let exact = (std::f64::consts::PI * xi / (std::f64::consts::PI * xi).sinh()).sqrt();
        assert!((g - exact).abs() <= 1e-10, "ξ={xi}: {g} vs {exact}");
    }
}

#[test]
fn registry_lists_all_families() {
    let r = registry();
    assert_eq!(r.len(), FamilyId::ALL.len());
    assert!(r.iter().all(|f| !f.cf.is_empty() && !f.density.is_empty()));
}

proptest! {
    #[test]
    fn cf_registry_properties(fi in 0usize..6, xi in -30.0f64..30.0) {
        let f = FamilyId::ALL[fi];
        prop_assert!((cf_evaluate(f, &[0.0]).unwrap() - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        let a = cf_evaluate(f, &[xi]).unwrap();
        let b = cf_evaluate(f, &[-xi]).unwrap();
        prop_assert!(a.norm() <= 1.0 + 1e-12);
        prop_assert!((b - a.conj()).norm() <= 1e-12 * (1.0 + a.norm()));
    }

    #[test]
    fn gaussian_cf_is_radial(xs in prop::collection::vec(-3.0f64..3.0, 1..5)) {
        let r2: f64 = xs.iter().map(|x| x * x).sum();
        let cf = cf_evaluate(FamilyId::Gaussian, &xs).unwrap();
        prop_assert!((cf.re - (-0.5 * r2).exp()).abs() < 1e-14 && cf.im == 0.0);
    }

    #[test]
    fn paper_sigma_eps_product_at_most_one(
        k in 1usize..200, d in 1usize..20, delta in 0.1f64..50.0, frac in 0.001f64..0.999,
    ) {
        // σ²ε² = 512 r² (m + ln 1/r) with r = ε/Δ, m = min{d, ln k}; at most 1 once r ≤ 1/64 and m ≤ 3.
        let c = general_constants(Profile::Paper);
        let m = (d as f64).min((k as f64).ln());
        prop_assume!(m <= 3.0);
        let eps = frac * delta / 64.0;
        let g = general_derive(k, d, delta, eps, FamilyId::Gaussian, Profile::Paper, &c);
        if let Ok(g) = g {
            prop_assert!(g.sigma2 * eps * eps <= 1.0, "σ²ε² = {}", g.sigma2 * eps * eps);
            prop_assert!(g.m2 >= 5.0 * d as f64 * g.sigma2 * (1.0 - 1e-12));
        }
    }
}

#[test]
fn sigma_eps_product_can_exceed_one_inside_precondition() {
    // k=3, d=1, ε/Δ = 0.6549/32 satisfies ε < Δ/32 yet σ²ε² > 1.
    let (delta, r) = (20.0, 0.6549 / 32.0);
    let c = general_constants(Profile::Paper);
    let g = general_derive(3, 1, delta, r * delta, FamilyId::Cauchy, Profile::Paper, &c).unwrap();
    let oracle = 512.0 * r * r * (1.0 + (1.0 / r).ln());
    assert!((g.sigma2 * (r * delta).powi(2) / oracle - 1.0).abs() < 1e-12);
    assert!(oracle > 1.04);
}
