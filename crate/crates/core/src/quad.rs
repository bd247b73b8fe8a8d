//! Globally adaptive Gauss–Kronrod (7/15) quadrature.

use crate::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const MAX_INTERVALS: usize = 20_000;

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    Segment {
        a,
        b,
        value: kronrod * h,
        error: ((kronrod - gauss) * h).abs(),
    }
}

/// Integrates `f` over `[a, b]` to absolute tolerance `abs_tol`.
///
/// Returns the value and the summed error estimate.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> Result<(f64, f64)> {
    integrate_with_breaks(f, &[a, b], abs_tol)
}

/// As [`integrate`], seeding the subdivision with the sorted `breaks`.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    breaks: &[f64],
    abs_tol: f64,
) -> Result<(f64, f64)> {
    let mut segs: Vec<Segment> = breaks
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| gk15(&f, w[0], w[1]))
        .collect();
    loop {
        let total_err: f64 = segs.iter().map(|s| s.error).sum();
        if total_err <= abs_tol {
            let value = segs.iter().map(|s| s.value).collect::<crate::sum::Neumaier>();
            return Ok((value.value(), total_err));
        }
        if segs.len() >= MAX_INTERVALS {
            return Err(Error::Quadrature { estimate: total_err });
        }
        let (idx, _) = segs
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .expect("at least one segment");
        let s = segs.swap_remove(idx);
        let mid = 0.5 * (s.a + s.b);
        if mid <= s.a || mid >= s.b {
            return Err(Error::Quadrature { estimate: total_err });
        }
        segs.push(gk15(&f, s.a, mid));
        segs.push(gk15(&f, mid, s.b));
    }
}


/// ln E[h(‖ξ‖)·1{‖ξ‖ ≤ m}] for ξ ~ N(0, σ²I_d), given `ln_h`.
///
/// Integrates over the chi density in the log domain so that huge
/// weights such as e^{‖ξ‖²/2} stay representable.
pub fn ln_truncated_radial_expectation<H: Fn(f64) -> f64>(
    d: usize,
    sigma: f64,
    m: f64,
    ln_h: H,
) -> Result<f64> {
    if sigma == 0.0 {
        return Ok(ln_h(0.0));
    }
    let upper = m / sigma;
    let df = d as f64;
    let norm = (df / 2.0 - 1.0) * std::f64::consts::LN_2 + crate::special::ln_gamma(df / 2.0);
    let g = |u: f64| {
        let radial = if d == 1 { 0.0 } else { (df - 1.0) * u.ln() };
        radial - 0.5 * u * u - norm + ln_h(sigma * u)
    };
    const GRID: usize = 4000;
    let peak = (0..=GRID)
        .map(|i| g(upper * i as f64 / GRID as f64))
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if !peak.is_finite() {
        return Ok(f64::NEG_INFINITY);
    }
    let breaks: Vec<f64> = (0..=64).map(|i| upper * i as f64 / 64.0).collect();
    let (v, _) = integrate_with_breaks(|u| (g(u) - peak).exp(), &breaks, 1e-12 * upper.max(1.0))?;
    Ok(peak + v.ln())
}
