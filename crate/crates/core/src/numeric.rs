// Copyright 2026 The conjleak Authors
// SPDX-License-Identifier: Apache-2.0

//! Small numeric helpers shared by the likelihood models.

/// Clamp applied to every probability before a logarithm is taken.
pub const EPS: f64 = 1e-6;

/// Tolerance for "sums to one" checks on probability tables.
pub const SUM_TOL: f64 = 1e-9;

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn powi(x: f64, k: u32) -> f64 {
    let mut acc = 1.0;
    for _ in 0..k {
        acc *= x;
    }
    acc
}

/// Clamp into `[EPS, 1 - EPS]` so that `ln(p)` and `ln(1 - p)` stay finite.
#[inline]
pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(EPS, 1.0 - EPS)
}

/// Negative binomial log-likelihood of observing a fraction `observed` of
/// `trials` successes under success probability `p`, without the constant
/// binomial coefficient.
#[inline]
pub fn binomial_nll(trials: f64, observed: f64, p: f64) -> f64 {
    let p = clamp_prob(p);
    -trials * (observed * ln(p) + (1.0 - observed) * ln(1.0 - p))
}

/// Neumaier compensated summation.
///
/// Probability tables hold hundreds of thousands of tiny entries; naive
/// summation drifts by far more than the 1e-9 normalization tolerance.
#[derive(Debug, Default, Clone, Copy)]
pub struct StableSum {
    sum: f64,
    comp: f64,
}

impl StableSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn stable_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut s = StableSum::new();
    for v in values {
        s.add(v);
    }
    s.value()
}

/// Binomial coefficient as `u64`, saturating on overflow.
pub fn choose(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = match acc.checked_mul(n - i) {
            Some(v) => v / (i + 1),
            None => return u64::MAX,
        };
    }
    acc
}
