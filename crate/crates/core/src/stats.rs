//! Small statistical helpers shared by the samplers and the test suites.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// Cells whose expected count falls below this are pooled.
pub const MIN_EXPECTED: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

impl ChiSquare {
    pub fn passes(&self, significance: f64) -> bool {
        self.p_value > significance
    }
}

fn survival(statistic: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    ChiSquared::new(dof as f64)
        .expect("positive degrees of freedom")
        .sf(statistic)
}

/// Pearson goodness-of-fit of `observed` counts against cell probabilities.
///
/// Cells with expected count below [`MIN_EXPECTED`] are pooled into one
/// cell; if the pool itself is still too small it is folded into the
/// smallest regular cell. Any count in a zero-probability cell yields
/// `p = 0`.
pub fn chi_square_gof(observed: &[u64], probs: &[f64]) -> ChiSquare {
    assert_eq!(observed.len(), probs.len());
    let n: u64 = observed.iter().sum();
    let n = n as f64;
    if observed.iter().zip(probs).any(|(&o, &p)| p <= 0.0 && o > 0) {
        return ChiSquare {
            statistic: f64::INFINITY,
            dof: 0,
            p_value: 0.0,
        };
    }
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut pool_obs, mut pool_exp) = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(probs) {
        let e = p * n;
        if e < MIN_EXPECTED {
            pool_obs += o as f64;
            pool_exp += e;
        } else {
            cells.push((o as f64, e));
        }
    }
    if pool_exp > 0.0 {
        if pool_exp >= MIN_EXPECTED || cells.is_empty() {
            cells.push((pool_obs, pool_exp));
        } else {
            let smallest = cells
                .iter_mut()
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("non-empty");
            smallest.0 += pool_obs;
            smallest.1 += pool_exp;
        }
    }
    let statistic: f64 = cells.iter().map(|&(o, e)| (o - e) * (o - e) / e).sum();
    let dof = cells.len().saturating_sub(1);
    ChiSquare {
        statistic,
        dof,
        p_value: survival(statistic, dof),
    }
}

/// Pearson test of equal success probability in two binomial samples.
pub fn chi_square_two_sample(
    success_a: u64,
    total_a: u64,
    success_b: u64,
    total_b: u64,
) -> ChiSquare {
    let table = [
        [success_a as f64, (total_a - success_a) as f64],
        [success_b as f64, (total_b - success_b) as f64],
    ];
    let n = (total_a + total_b) as f64;
    let rows = [total_a as f64, total_b as f64];
    let cols = [table[0][0] + table[1][0], table[0][1] + table[1][1]];
    let mut statistic = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let e = rows[i] * cols[j] / n;
            if e > 0.0 {
                statistic += (table[i][j] - e).powi(2) / e;
            }
        }
    }
    let dof = if cols.iter().all(|&c| c > 0.0) { 1 } else { 0 };
    ChiSquare {
        statistic,
        dof,
        p_value: survival(statistic, dof),
    }
}

/// Mean with a standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    /// Lower end of a one-sided interval at the given confidence.
    pub fn lower_bound(&self, confidence: f64) -> f64 {
        self.mean - normal_quantile(confidence) * self.stderr
    }
}

/// Batch-means estimate: split `series` into `batches` contiguous blocks
/// (trailing remainder dropped) and use the spread of block means.
pub fn batch_means(series: &[f64], batches: usize) -> Estimate {
    let batches = batches.max(1).min(series.len().max(1));
    let len = series.len() / batches;
    if len == 0 {
        return Estimate {
            mean: series.iter().sum::<f64>() / series.len().max(1) as f64,
            stderr: f64::INFINITY,
        };
    }
    let means: Vec<f64> = series
        .chunks_exact(len)
        .take(batches)
        .map(|c| c.iter().sum::<f64>() / len as f64)
        .collect();
    mean_and_stderr(&means)
}

/// Sample mean and standard error of the mean of independent values.
pub fn mean_and_stderr(values: &[f64]) -> Estimate {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    if values.len() < 2 {
        return Estimate {
            mean,
            stderr: f64::INFINITY,
        };
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    Estimate {
        mean,
        stderr: (var / m).sqrt(),
    }
}

pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}
