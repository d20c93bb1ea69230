//! Numerical statistics helpers: exact binomial intervals, histogramming and
//! least-squares Gaussian fits.

use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

/// Confidence level equivalent to ±1σ of a normal distribution.
pub const ONE_SIGMA_CONFIDENCE: f64 = 0.682_689_492_137_085_9;

/// Exact (Clopper-Pearson) equal-tailed binomial interval for
/// `successes / trials`.
pub fn clopper_pearson(successes: u64, trials: u64, confidence: f64) -> Result<(f64, f64)> {
    if trials == 0 || successes > trials {
        return Err(Error::InvalidCounts(format!(
            "{successes} successes out of {trials} trials"
        )));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::param(
            "confidence",
            format!("must lie in (0, 1), got {confidence}"),
        ));
    }
    let tail = 0.5 * (1.0 - confidence);
    let (k, n) = (successes as f64, trials as f64);
    // P(X >= k | p) = I_p(k, n - k + 1) rises with p
    let lo = if successes == 0 {
        0.0
    } else {
        bisect_increasing(|p| beta_reg(k, n - k + 1.0, p), tail)
    };
    // P(X <= k | p) = 1 - I_p(k + 1, n - k) falls with p
    let hi = if successes == trials {
        1.0
    } else {
        bisect_increasing(|p| beta_reg(k + 1.0, n - k, p), 1.0 - tail)
    };
    Ok((lo, hi))
}

/// 1σ uncertainty of a binomial proportion: half-width of the
/// [`ONE_SIGMA_CONFIDENCE`] Clopper-Pearson interval.
pub fn clopper_pearson_sigma(successes: u64, trials: u64) -> Result<f64> {
    let (lo, hi) = clopper_pearson(successes, trials, ONE_SIGMA_CONFIDENCE)?;
    Ok(0.5 * (hi - lo))
}

/// Solves `f(p) = target` on `[0, 1]` for monotonically increasing `f`.
fn bisect_increasing<F: Fn(f64) -> f64>(f: F, target: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample standard deviation; zero for fewer than two values.
pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Linear-interpolated quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub centers: Vec<f64>,
    pub counts: Vec<f64>,
    pub width: f64,
}

const MAX_BINS: usize = 512;

/// Freedman-Diaconis histogram. Values living on a lattice get a bin width
/// rounded to a whole number of lattice steps so that no bin is starved.
/// Returns `None` when fewer than three bins would result.
pub fn freedman_diaconis_histogram(values: &[f64]) -> Option<Histogram> {
    if values.len() < 4 {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let mut width = 2.0 * iqr / (values.len() as f64).cbrt();
    if !(width > 0.0) || !(max > min) {
        return None;
    }
    let gap = sorted
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|g| *g > 1e-12 * (max - min))
        .fold(f64::INFINITY, f64::min);
    let mut origin = min;
    let distinct = sorted
        .windows(2)
        .filter(|w| w[1] - w[0] > 1e-12 * (max - min))
        .count()
        + 1;
    if gap.is_finite() && distinct < values.len() / 2 {
        width = (width / gap).round().max(1.0) * gap;
        origin = min - 0.5 * gap;
    }
    let bins = (((max - origin) / width).floor() as usize + 1).min(MAX_BINS);
    if bins < 3 {
        return None;
    }
    let width = width.max((max - origin) / bins as f64 * (1.0 + 1e-12));
    let mut counts = vec![0.0; bins];
    for v in &sorted {
        let b = (((v - origin) / width) as usize).min(bins - 1);
        counts[b] += 1.0;
    }
    let centers = (0..bins)
        .map(|b| origin + (b as f64 + 0.5) * width)
        .collect();
    Some(Histogram {
        centers,
        counts,
        width,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianFit {
    pub amplitude: f64,
    pub mean: f64,
    pub sigma: f64,
}

impl GaussianFit {
    pub fn eval(&self, x: f64) -> f64 {
        let z = (x - self.mean) / self.sigma;
        self.amplitude * (-0.5 * z * z).exp()
    }
}

/// Levenberg-Marquardt least-squares fit of `A exp(-(x-μ)²/2σ²)` to
/// histogram counts.
pub fn fit_gaussian(hist: &Histogram, guess: GaussianFit) -> Option<GaussianFit> {
    let residual_ss = |g: &GaussianFit| -> f64 {
        hist.centers
            .iter()
            .zip(&hist.counts)
            .map(|(x, c)| {
                let r = c - g.eval(*x);
                r * r
            })
            .sum()
    };
    let mut fit = guess;
    let mut cost = residual_ss(&fit);
    let mut lambda = 1e-3;
    for _ in 0..200 {
        let mut jtj = [[0.0f64; 3]; 3];
        let mut jtr = [0.0f64; 3];
        for (x, c) in hist.centers.iter().zip(&hist.counts) {
            let z = (x - fit.mean) / fit.sigma;
            let e = (-0.5 * z * z).exp();
            let model = fit.amplitude * e;
            let grad = [e, model * z / fit.sigma, model * z * z / fit.sigma];
            let r = c - model;
            for i in 0..3 {
                jtr[i] += grad[i] * r;
                for j in 0..3 {
                    jtj[i][j] += grad[i] * grad[j];
                }
            }
        }
        let mut improved = false;
        while lambda < 1e12 {
            let mut a = jtj;
            for (i, row) in a.iter_mut().enumerate() {
                row[i] += lambda * jtj[i][i].max(1e-300);
            }
            let Some(step) = solve3(a, jtr) else {
                lambda *= 10.0;
                continue;
            };
            let trial = GaussianFit {
                amplitude: fit.amplitude + step[0],
                mean: fit.mean + step[1],
                sigma: (fit.sigma + step[2]).abs(),
            };
            let trial_cost = residual_ss(&trial);
            if trial.sigma > 0.0 && trial_cost.is_finite() && trial_cost <= cost {
                let rel = (cost - trial_cost) / cost.max(1e-300);
                fit = trial;
                cost = trial_cost;
                lambda = (lambda / 10.0).max(1e-12);
                improved = rel > 1e-12;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (fit.sigma.is_finite() && fit.sigma > 0.0).then_some(fit)
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|i, j| a[*i][col].abs().total_cmp(&a[*j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            let pivot_row = a[col];
            for (x, p) in a[row][col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= f * p;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Width of a Gaussian fitted to the histogram of `values`, or `None` when
/// the histogram is too degenerate to fit.
pub fn fitted_gaussian_sigma(values: &[f64]) -> Option<f64> {
    let hist = freedman_diaconis_histogram(values)?;
    let guess = GaussianFit {
        amplitude: hist.counts.iter().copied().fold(0.0, f64::max),
        mean: mean(values),
        sigma: sample_std(values),
    };
    fit_gaussian(&hist, guess).map(|g| g.sigma)
}
