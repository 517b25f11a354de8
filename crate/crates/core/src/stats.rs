//! Estimator plumbing shared by the Monte Carlo experiments.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Running count, mean and variance of a sample.
///
/// Sums are taken relative to the first value pushed, so a constant sample
/// has exactly its value as mean and zero variance.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    shift: f64,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        if self.count == 0 {
            self.shift = x;
        }
        let d = x - self.shift;
        self.count += 1;
        self.sum += d;
        self.sum_sq += d * d;
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            f64::NAN
        } else {
            self.shift + self.sum / self.count as f64
        }
    }

    /// Unbiased sample standard deviation (0 for fewer than two points).
    pub fn std_dev(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        let var = (self.sum_sq - self.sum * self.sum / n) / (n - 1.0);
        var.max(0.0).sqrt()
    }

    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            return f64::NAN;
        }
        self.std_dev() / (self.count as f64).sqrt()
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Moments::default();
        for x in iter {
            m.push(x);
        }
        m
    }
}

/// A proportion with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Proportion {
    pub successes: u64,
    pub trials: u64,
}

impl Proportion {
    pub fn new(successes: u64, trials: u64) -> Self {
        Proportion { successes, trials }
    }

    pub fn value(&self) -> f64 {
        if self.trials == 0 {
            f64::NAN
        } else {
            self.successes as f64 / self.trials as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        let p = self.value();
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}

/// Pearson chi-square goodness-of-fit p-value for observed counts against
/// expected probabilities.
pub fn chi_square_p_value(observed: &[u64], probs: &[f64]) -> f64 {
    assert_eq!(observed.len(), probs.len());
    let total: u64 = observed.iter().sum();
    let stat: f64 = observed
        .iter()
        .zip(probs)
        .map(|(&o, &p)| {
            let e = p * total as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    let dof = (observed.len() - 1) as f64;
    ChiSquared::new(dof).expect("dof >= 1").sf(stat)
}

/// Asymptotic Kolmogorov survival function `Q(lambda)`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = 2.0 * (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// One-sample Kolmogorov–Smirnov p-value against a continuous CDF.
pub fn ks_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    let sn = n.sqrt();
    kolmogorov_q((sn + 0.12 + 0.11 / sn) * d)
}

/// Two-sample Kolmogorov–Smirnov p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n1, n2) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < xs.len() && j < ys.len() {
        let x = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= x {
            i += 1;
        }
        while j < ys.len() && ys[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n1 - j as f64 / n2).abs());
    }
    let ne = (n1 * n2 / (n1 + n2)).sqrt();
    kolmogorov_q((ne + 0.12 + 0.11 / ne) * d)
}

/// Weighted least-squares fit of `y = slope * x` through the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OriginFit {
    pub slope: f64,
    pub slope_std_error: f64,
    /// Coefficient of determination against the weighted mean of `y`.
    pub r_squared: f64,
}

pub fn fit_through_origin(x: &[f64], y: &[f64], weights: &[f64]) -> OriginFit {
    assert!(x.len() == y.len() && y.len() == weights.len() && !x.is_empty());
    let sxx: f64 = x.iter().zip(weights).map(|(x, w)| w * x * x).sum();
    let sxy: f64 = x
        .iter()
        .zip(y)
        .zip(weights)
        .map(|((x, y), w)| w * x * y)
        .sum();
    let slope = sxy / sxx;
    let wsum: f64 = weights.iter().sum();
    let ybar: f64 = y.iter().zip(weights).map(|(y, w)| w * y).sum::<f64>() / wsum;
    let ssr: f64 = x
        .iter()
        .zip(y)
        .zip(weights)
        .map(|((x, y), w)| w * (y - slope * x).powi(2))
        .sum();
    let sst: f64 = y
        .iter()
        .zip(weights)
        .map(|(y, w)| w * (y - ybar).powi(2))
        .sum();
    let r_squared = if sst > 0.0 { 1.0 - ssr / sst } else { 1.0 };
    OriginFit {
        slope,
        // With inverse-variance weights the slope variance is 1 / sxx.
        slope_std_error: (1.0 / sxx).sqrt(),
        r_squared,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    NonDecreasing,
    NonIncreasing,
    /// Consecutive levels agree within error.
    Stable,
}

/// One level of a refinement ladder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderPoint {
    pub eps: f64,
    pub value: f64,
    pub std_error: f64,
}

/// Trend verdict over consecutive ladder levels, allowing each step
/// to go the wrong way by at most `z` combined standard errors.
pub fn monotone_within_error(points: &[LadderPoint], direction: Direction, z: f64) -> bool {
    points.windows(2).all(|w| {
        let slack = z * (w[0].std_error.powi(2) + w[1].std_error.powi(2)).sqrt();
        match direction {
            Direction::NonDecreasing => w[1].value >= w[0].value - slack,
            Direction::NonIncreasing => w[1].value <= w[0].value + slack,
            Direction::Stable => (w[1].value - w[0].value).abs() <= slack,
        }
    })
}
