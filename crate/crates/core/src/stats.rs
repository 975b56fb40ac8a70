//! Small statistics toolkit: uniformity tests, penalized logistic regression
//! and ordinary least squares.

use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::gamma::ln_gamma;

/// Largest outcome space the exact multinomial test will enumerate.
pub const EXACT_ENUMERATION_BUDGET: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UniformityMethod {
    ExactMultinomial,
    PearsonChiSquare,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformityTest {
    pub p_value: f64,
    pub method: UniformityMethod,
    /// Pearson statistic, reported for both methods.
    pub chi_square: f64,
}

fn log_binomial(n: f64, k: f64) -> f64 {
    ln_gamma(n + 1.0) - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0)
}

/// Number of count vectors with `total` items over `cells` categories.
pub fn outcome_space(total: u64, cells: usize) -> f64 {
    if cells <= 1 {
        return 1.0;
    }
    log_binomial(total as f64 + cells as f64 - 1.0, cells as f64 - 1.0).exp()
}

pub fn pearson_chi_square(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum()
}

/// Tests `counts` against the uniform distribution over its cells. Exact
/// when the outcome space fits the enumeration budget, Pearson chi-square
/// otherwise. `None` when there is nothing to test.
pub fn uniformity_test(counts: &[u64]) -> Option<UniformityTest> {
    let total: u64 = counts.iter().sum();
    if total == 0 || counts.len() < 2 {
        return None;
    }
    let chi_square = pearson_chi_square(counts);
    if outcome_space(total, counts.len()) <= EXACT_ENUMERATION_BUDGET {
        Some(UniformityTest {
            p_value: exact_multinomial_p(counts),
            method: UniformityMethod::ExactMultinomial,
            chi_square,
        })
    } else {
        let dist = ChiSquared::new((counts.len() - 1) as f64).expect("df >= 1");
        Some(UniformityTest {
            p_value: dist.sf(chi_square).clamp(0.0, 1.0),
            method: UniformityMethod::PearsonChiSquare,
            chi_square,
        })
    }
}

/// Probability, under the uniform multinomial, of all outcomes no more
/// likely than the observed one.
pub fn exact_multinomial_p(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let cells = counts.len();
    let lfact: Vec<f64> = (0..=total).map(|k| ln_gamma(k as f64 + 1.0)).collect();
    let base = lfact[total as usize] - total as f64 * (cells as f64).ln();
    let observed: f64 = base - counts.iter().map(|&c| lfact[c as usize]).sum::<f64>();
    let threshold = observed + 1e-7;

    struct Walk<'a> {
        lfact: &'a [f64],
        threshold: f64,
        acc: f64,
    }
    impl Walk<'_> {
        fn go(&mut self, remaining: u64, cells_left: usize, logp: f64) {
            if cells_left == 1 {
                let lp = logp - self.lfact[remaining as usize];
                if lp <= self.threshold {
                    self.acc += lp.exp();
                }
                return;
            }
            for k in 0..=remaining {
                self.go(remaining - k, cells_left - 1, logp - self.lfact[k as usize]);
            }
        }
    }
    let mut walk = Walk {
        lfact: &lfact,
        threshold,
        acc: 0.0,
    };
    walk.go(total, cells, base);
    walk.acc.clamp(0.0, 1.0)
}

/// Binomial outcomes observed at one covariate value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinomialPoint {
    pub x: f64,
    pub successes: u64,
    pub trials: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticFit {
    pub intercept: f64,
    pub slope: f64,
    pub iterations: usize,
}

impl LogisticFit {
    pub fn predict(&self, x: f64) -> f64 {
        1.0 / (1.0 + (-(self.intercept + self.slope * x)).exp())
    }

    /// Covariate value where the fitted probability is one half.
    pub fn crossing(&self) -> Option<f64> {
        let c = -self.intercept / self.slope;
        (self.slope > 0.0 && c.is_finite()).then_some(c)
    }
}

/// Ridge weight on the slope; keeps the fit finite under complete
/// separation, where the unpenalized maximum likelihood diverges.
pub const LOGISTIC_SLOPE_PENALTY: f64 = 1e-3;

fn penalized_loglik(points: &[BinomialPoint], b0: f64, b1: f64) -> f64 {
    let mut ll = 0.0;
    for p in points {
        let eta = b0 + b1 * p.x;
        // log(sigmoid(eta)) and log(1 - sigmoid(eta)), overflow-safe.
        let log_p = -softplus(-eta);
        let log_q = -softplus(eta);
        ll += p.successes as f64 * log_p + (p.trials - p.successes) as f64 * log_q;
    }
    ll - 0.5 * LOGISTIC_SLOPE_PENALTY * b1 * b1
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Maximum likelihood logistic regression of success probability on `x`,
/// with a small ridge penalty on the slope. `None` when the outcomes carry
/// no information about a crossing (no trials, or all outcomes equal).
pub fn fit_logistic(points: &[BinomialPoint]) -> Option<LogisticFit> {
    let trials: u64 = points.iter().map(|p| p.trials).sum();
    let successes: u64 = points.iter().map(|p| p.successes).sum();
    if trials == 0 || successes == 0 || successes == trials {
        return None;
    }
    let (mut b0, mut b1) = (0.0f64, 0.0f64);
    let mut ll = penalized_loglik(points, b0, b1);
    for it in 0..500 {
        let (mut g0, mut g1) = (0.0, -LOGISTIC_SLOPE_PENALTY * b1);
        let (mut h00, mut h01, mut h11) = (0.0, 0.0, LOGISTIC_SLOPE_PENALTY);
        for p in points {
            let prob = 1.0 / (1.0 + (-(b0 + b1 * p.x)).exp());
            let resid = p.successes as f64 - p.trials as f64 * prob;
            let w = p.trials as f64 * prob * (1.0 - prob);
            g0 += resid;
            g1 += resid * p.x;
            h00 += w;
            h01 += w * p.x;
            h11 += w * p.x * p.x;
        }
        let det = h00 * h11 - h01 * h01;
        if det.abs() < 1e-300 {
            break;
        }
        let d0 = (h11 * g0 - h01 * g1) / det;
        let d1 = (h00 * g1 - h01 * g0) / det;
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let (n0, n1) = (b0 + scale * d0, b1 + scale * d1);
            let nll = penalized_loglik(points, n0, n1);
            if nll >= ll - 1e-12 {
                b0 = n0;
                b1 = n1;
                ll = nll;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        let size = (scale * d0).abs().max((scale * d1).abs());
        if !accepted || size < 1e-10 {
            return Some(LogisticFit {
                intercept: b0,
                slope: b1,
                iterations: it + 1,
            });
        }
    }
    Some(LogisticFit {
        intercept: b0,
        slope: b1,
        iterations: 500,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
}

/// Ordinary least squares of `ys` on `xs` with the classical slope
/// standard error.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    let n = xs.len();
    if n < 3 || ys.len() != n {
        return None;
    }
    let mx = mean(xs)?;
    let my = mean(ys)?;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let slope_se = (rss / (n - 2) as f64 / sxx).sqrt();
    Some(LinearFit {
        slope,
        intercept,
        slope_se,
    })
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len().is_multiple_of(2) {
        (v[mid - 1] + v[mid]) / 2.0
    } else {
        v[mid]
    })
}

/// Linear-interpolated quantile of already sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64))
}
