use crate::error::{Error, Result};

/// Aggregate L1 error in percent: `100 * sum|model - baseline| / sum|baseline|`.
pub fn error_metrics(model: &[f64], baseline: &[f64]) -> Result<f64> {
    if model.len() != baseline.len() {
        return Err(Error::LengthMismatch(model.len(), baseline.len()));
    }
    let scale: f64 = baseline.iter().map(|b| b.abs()).sum();
    if scale == 0.0 {
        return Err(Error::ZeroBaseline);
    }
    let err: f64 = model.iter().zip(baseline).map(|(m, b)| (m - b).abs()).sum();
    Ok(100.0 * err / scale)
}

/// Root-mean-square of `actual - target`.
pub fn rms_error(actual: &[f64], target: &[f64]) -> Result<f64> {
    if actual.len() != target.len() {
        return Err(Error::LengthMismatch(actual.len(), target.len()));
    }
    if actual.is_empty() {
        return Ok(0.0);
    }
    let ss: f64 = actual
        .iter()
        .zip(target)
        .map(|(a, t)| (a - t).powi(2))
        .sum();
    Ok((ss / actual.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identical_series() {
        let s = [1.0, -2.0, 3.0];
        assert_eq!(error_metrics(&s, &s).unwrap(), 0.0);
    }

    #[test]
    fn scaled_series() {
        let b = [-100.0, -250.0, 40.0, 0.0];
        let m: Vec<f64> = b.iter().map(|v| v * 1.05).collect();
        assert_abs_diff_eq!(error_metrics(&m, &b).unwrap(), 5.0, epsilon = 1e-9);
    }

    #[test]
    fn zero_baseline_is_an_error() {
        assert!(matches!(
            error_metrics(&[1.0, 2.0], &[0.0, 0.0]),
            Err(Error::ZeroBaseline)
        ));
        assert!(error_metrics(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn rms() {
        assert_abs_diff_eq!(
            rms_error(&[1.0, -1.0, 3.0, 3.0], &[0.0; 4]).unwrap(),
            5.0f64.sqrt(),
            epsilon = 1e-12
        );
    }
}
