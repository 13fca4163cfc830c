use num_complex::Complex64;

use super::{McEstimate, Quantity};

/// One-pass mean and variance.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Welford {
    pub n: usize,
    pub mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Welford) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = (self.n + other.n) as f64;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n;
        self.m2 += other.m2 + d * d * self.n as f64 * other.n as f64 / n;
        self.n += other.n;
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        (self.variance() / self.n as f64).sqrt()
    }

    pub fn estimate(&self, quantity: Quantity, scale: f64) -> McEstimate {
        McEstimate {
            quantity,
            estimate: scale * self.mean,
            std_error: scale * self.std_error(),
            trials: self.n,
        }
    }
}

/// One-pass mean and variance `E|z - E z|^2` of a complex sample.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ComplexMoments {
    pub n: usize,
    pub mean: Complex64,
    m2: f64,
}

impl ComplexMoments {
    pub fn push(&mut self, z: Complex64) {
        self.n += 1;
        let d = z - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += (d.conj() * (z - self.mean)).re;
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    /// Unbiased estimate of `|E z|^2`.
    pub fn squared_mean(&self) -> f64 {
        self.mean.norm_sqr() - self.variance() / self.n as f64
    }
}

/// Batch-means estimate: the spread of per-batch statistics gives the error.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BatchStats {
    values: Vec<f64>,
    trials: usize,
}

impl BatchStats {
    pub fn push(&mut self, value: f64, trials: usize) {
        self.values.push(value);
        self.trials += trials;
    }

    pub fn estimate(&self, quantity: Quantity, scale: f64) -> McEstimate {
        let mut w = Welford::default();
        for &v in &self.values {
            w.push(v);
        }
        McEstimate {
            quantity,
            estimate: scale * w.mean,
            std_error: scale * w.std_error(),
            trials: self.trials,
        }
    }
}
