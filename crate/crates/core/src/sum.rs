//! Compensated summation via error-free TwoSum transforms.

use num_complex::Complex64;

/// Running sum plus accumulated rounding error; robust when addends exceed the running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `x`, carrying the exact rounding error of the sum (branch-free TwoSum).
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        let bp = t - self.sum;
        self.comp += (self.sum - (t - bp)) + (x - bp);
        self.sum = t;
    }

    /// Folds another accumulator in; order matters only at the last bit.
    pub fn merge(&mut self, other: &Neumaier) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for Neumaier {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Neumaier::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated accumulator for complex terms.
///
/// The squared parts feed only the standard error and use plain sums.
#[derive(Debug, Clone, Copy, Default)]
pub struct ComplexMoments {
    pub re: Neumaier,
    pub im: Neumaier,
    pub re2: f64,
    pub im2: f64,
    pub n: u64,
}

impl ComplexMoments {
    #[inline]
    pub fn push(&mut self, re: f64, im: f64) {
        self.re.add(re);
        self.im.add(im);
        self.re2 += re * re;
        self.im2 += im * im;
        self.n += 1;
    }

    /// Counts a term that contributes exactly zero.
    #[inline]
    pub fn push_zero(&mut self) {
        self.n += 1;
    }

    pub fn merge(&mut self, other: &ComplexMoments) {
        self.re.merge(&other.re);
        self.im.merge(&other.im);
        self.re2 += other.re2;
        self.im2 += other.im2;
        self.n += other.n;
    }

    pub fn mean(&self) -> Complex64 {
        let n = self.n as f64;
        Complex64::new(self.re.value() / n, self.im.value() / n)
    }

    /// Standard error of the complex mean, sqrt((Var Re + Var Im)/n).
    pub fn stderr(&self) -> f64 {
        let n = self.n as f64;
        let m = self.mean();
        let var_re = (self.re2 / n - m.re * m.re).max(0.0);
        let var_im = (self.im2 / n - m.im * m.im).max(0.0);
        ((var_re + var_im) / (n - 1.0).max(1.0)).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_cancelled_terms() {
        let xs = [1e100, 1.0, -1e100, 1.0];
        let acc: Neumaier = xs.iter().copied().collect();
        assert_eq!(acc.value(), 2.0);
        assert_eq!(xs.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn many_small_terms() {
        let acc: Neumaier = std::iter::repeat_n(0.1, 10_000_000).collect();
        assert!((acc.value() - 1_000_000.0).abs() < 1e-8);
    }
}
