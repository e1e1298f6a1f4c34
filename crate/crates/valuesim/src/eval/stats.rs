//! Paired significance testing between per-respondent metric vectors.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Outcome of a two-sided paired t-test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t_statistic: f64,
    pub degrees_of_freedom: f64,
    pub p_value: f64,
    pub mean_difference: f64,
    pub n_pairs: usize,
}

/// Two-sided paired t-test on matched samples `a` and `b`.
///
/// Computes differences `d_i = a_i - b_i`, then
/// `t = mean(d) / (sd(d) / sqrt(n))` with the n-1 sample standard deviation
/// and n-1 degrees of freedom. Errors if the samples are mismatched in
/// length, have fewer than two pairs, or have zero-variance differences
/// (including identical inputs), where the statistic is undefined.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    if a.len() != b.len() {
        return Err(Error::Validation(format!(
            "paired samples differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::DegenerateTest(format!(
            "paired t-test needs at least 2 pairs, got {n}"
        )));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let ss: f64 = diffs.iter().map(|d| (d - mean) * (d - mean)).sum();
    let sd = (ss / (n as f64 - 1.0)).sqrt();
    if sd == 0.0 {
        return Err(Error::DegenerateTest(
            "differences have zero variance; the t statistic is undefined".to_string(),
        ));
    }
    let t = mean / (sd / (n as f64).sqrt());
    let df = n as f64 - 1.0;
    let dist = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| Error::DegenerateTest(format!("invalid t distribution: {e}")))?;
    let p = 2.0 * (1.0 - dist.cdf(t.abs()));
    Ok(TTestResult {
        t_statistic: t,
        degrees_of_freedom: df,
        p_value: p,
        mean_difference: mean,
        n_pairs: n,
    })
}
