//! Pearson's r and mean squared error, generic over the scalar type.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Pearson correlation coefficient. Returns `Ok(None)` when undefined:
/// fewer than two points, or either sequence has zero variance. Undefined
/// is an explicit marker, never a NaN.
pub fn pearson_r<F: Real>(x: &[F], y: &[F]) -> Result<Option<F>> {
    if x.len() != y.len() {
        return Err(Error::Argument(format!(
            "pearson_r length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 2 {
        return Ok(None);
    }
    let nf = F::from_count(n);
    let mean_x = x.iter().copied().sum::<F>() / nf;
    let mean_y = y.iter().copied().sum::<F>() / nf;
    let mut cov = F::zero();
    let mut var_x = F::zero();
    let mut var_y = F::zero();
    for (&xi, &yi) in x.iter().zip(y) {
        let dx = xi - mean_x;
        let dy = yi - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x.is_zero() || var_y.is_zero() {
        return Ok(None);
    }
    Ok(Some(cov / (var_x * var_y).sqrt()))
}

/// Mean squared error between predictions and gold labels.
pub fn mse<F: Real>(pred: &[F], gold: &[F]) -> Result<F> {
    if pred.len() != gold.len() {
        return Err(Error::Argument(format!(
            "mse length mismatch: {} vs {}",
            pred.len(),
            gold.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Argument("mse of empty sequences".into()));
    }
    let sum = pred
        .iter()
        .zip(gold)
        .map(|(&p, &g)| (p - g) * (p - g))
        .sum::<F>();
    Ok(sum / F::from_count(pred.len()))
}

/// Min, max, mean, and population standard deviation of a score sequence.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SummaryStats<F> {
    pub min: F,
    pub max: F,
    pub mean: F,
    pub std: F,
}

/// Population statistics (std divides by n).
pub fn summary_stats<F: Real>(values: &[F]) -> Result<SummaryStats<F>> {
    if values.is_empty() {
        return Err(Error::Argument("summary of empty sequence".into()));
    }
    let nf = F::from_count(values.len());
    let mean = values.iter().copied().sum::<F>() / nf;
    let var = values
        .iter()
        .map(|&v| (v - mean) * (v - mean))
        .sum::<F>()
        / nf;
    let (mut min, mut max) = (values[0], values[0]);
    for &v in values {
        if v < min {
            min = v;
        }
        if v > max {
            max = v;
        }
    }
    Ok(SummaryStats {
        min,
        max,
        mean,
        std: var.sqrt(),
    })
}
