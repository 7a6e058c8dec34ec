use crate::error::HarnessError;

/// Error statistics of repeated estimates against one reference value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    /// Mean of `|v - truth| / |truth|`, or of `|v - truth|` in absolute mode.
    pub mean_rel_err: f64,
    pub p05: f64,
    pub p95: f64,
    pub bias: f64,
    pub mse: f64,
    /// Set when `truth == 0` and errors are absolute.
    pub absolute: bool,
}

/// Percentiles are of the per-trial errors, by linear interpolation
/// between order statistics.
pub fn summarize(values: &[f64], truth: f64) -> Result<Summary, HarnessError> {
    if values.is_empty() {
        return Err(HarnessError::Validation("summary needs at least one value".into()));
    }
    let absolute = truth == 0.0;
    let scale = if absolute { 1.0 } else { truth.abs() };
    let mut errs: Vec<f64> = values.iter().map(|v| (v - truth).abs() / scale).collect();
    let n = values.len() as f64;
    let mean_rel_err = errs.iter().sum::<f64>() / n;
    let bias = values.iter().sum::<f64>() / n - truth;
    let mse = values.iter().map(|v| (v - truth) * (v - truth)).sum::<f64>() / n;
    errs.sort_by(f64::total_cmp);
    Ok(Summary {
        mean_rel_err,
        p05: percentile(&errs, 0.05),
        p95: percentile(&errs, 0.95),
        bias,
        mse,
        absolute,
    })
}

/// `q`-quantile of sorted data, interpolating at position `(n - 1) q`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Sample mean and its standard error.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (m, 0.0);
    }
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Empirical MSE and its standard error from per-trial errors.
pub fn mse_se(errors: &[f64]) -> (f64, f64) {
    let sq: Vec<f64> = errors.iter().map(|e| e * e).collect();
    mean_se(&sq)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_values() {
        let s = summarize(&[1.0, 3.0], 2.0).unwrap();
        assert_eq!((s.mean_rel_err, s.bias, s.mse), (0.5, 0.0, 1.0));
        assert!(!s.absolute);
    }

    #[test]
    fn exact_values() {
        let s = summarize(&[4.0; 7], 4.0).unwrap();
        assert_eq!((s.mean_rel_err, s.p05, s.p95, s.bias, s.mse), (0.0, 0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn zero_truth_is_absolute() {
        let s = summarize(&[-1.0, 1.0], 0.0).unwrap();
        assert!(s.absolute);
        assert_eq!(s.mean_rel_err, 1.0);
        assert!(summarize(&[], 1.0).is_err());
    }

    #[test]
    fn percentile_interpolates() {
        let v: Vec<f64> = (0..=10).map(f64::from).collect();
        assert_eq!(percentile(&v, 0.05), 0.5);
        assert_eq!(percentile(&v, 0.95), 9.5);
        assert_eq!(percentile(&[3.0], 0.3), 3.0);
    }
}
