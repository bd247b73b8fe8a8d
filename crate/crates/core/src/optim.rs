//! Local minimizers used by the moment-matching search.

use argmin::core::{CostFunction, Error as ArgminError, Executor, State};
use argmin::solver::neldermead::NelderMead;

struct Objective<F> {
    f: F,
}

impl<F: Fn(&[f64]) -> f64> CostFunction for Objective<F> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> Result<f64, ArgminError> {
        Ok((self.f)(p))
    }
}

/// Nelder–Mead from `x0` with an axis-aligned initial simplex of edge `step`.
///
/// Returns the best vertex and its value; non-finite objective values rank last.
pub fn nelder_mead<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], step: f64, max_iters: u64, sd_tol: f64) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut simplex = vec![x0.to_vec()];
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += step;
        simplex.push(v);
    }
    let guarded = move |x: &[f64]| {
        let v = f(x);
        if v.is_finite() { v } else { f64::MAX }
    };
    let start = guarded(x0);
    let solver = match NelderMead::new(simplex).with_sd_tolerance(sd_tol) {
        Ok(s) => s,
        Err(_) => return (x0.to_vec(), start),
    };
    let run = Executor::new(Objective { f: guarded }, solver)
        .configure(|s| s.max_iters(max_iters))
        .run();
    match run {
        Ok(res) => {
            let state = res.state();
            match state.get_best_param() {
                Some(p) if state.get_best_cost() <= start => (p.clone(), state.get_best_cost()),
                _ => (x0.to_vec(), start),
            }
        }
        Err(_) => (x0.to_vec(), start),
    }
}

/// Pattern search along each axis: tries ±h per coordinate, halving h after a sweep without progress.
pub fn coordinate_descent<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], step: f64, min_step: f64, target: f64) -> (Vec<f64>, f64) {
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let mut h = step;
    while h >= min_step && fx > target {
        let mut improved = false;
        for i in 0..x.len() {
            for dir in [1.0, -1.0] {
                let old = x[i];
                x[i] = old + dir * h;
                let v = f(&x);
                if v < fx {
                    fx = v;
                    improved = true;
                    break;
                }
                x[i] = old;
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    (x, fx)
}
