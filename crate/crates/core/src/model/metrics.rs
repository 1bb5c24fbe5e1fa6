#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("measurement {index} is zero")]
    ZeroMeasurement { index: usize },
    #[error("length mismatch: {0} predictions vs {1} measurements")]
    Length(usize, usize),
    #[error("need at least two points")]
    TooFew,
    #[error("zero variance")]
    ZeroVariance,
}

/// Mean of |(pred − meas)/meas|.
pub fn nmae(pred: &[f64], meas: &[f64]) -> Result<f64, MetricError> {
    if pred.len() != meas.len() {
        return Err(MetricError::Length(pred.len(), meas.len()));
    }
    if meas.is_empty() {
        return Err(MetricError::TooFew);
    }
    let mut s = 0.0;
    for (i, (p, m)) in pred.iter().zip(meas).enumerate() {
        if *m == 0.0 {
            return Err(MetricError::ZeroMeasurement { index: i });
        }
        s += ((p - m) / m).abs();
    }
    Ok(s / meas.len() as f64)
}

/// Sample Pearson correlation.
pub fn pearson_r(pred: &[f64], meas: &[f64]) -> Result<f64, MetricError> {
    if pred.len() != meas.len() {
        return Err(MetricError::Length(pred.len(), meas.len()));
    }
    let n = pred.len();
    if n < 2 {
        return Err(MetricError::TooFew);
    }
    let mp = pred.iter().sum::<f64>() / n as f64;
    let mm = meas.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (p, m) in pred.iter().zip(meas) {
        sxy += (p - mp) * (m - mm);
        sxx += (p - mp).powi(2);
        syy += (m - mm).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(MetricError::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nmae_examples() {
        assert_eq!(nmae(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), 0.0);
        assert!((nmae(&[1.1, 2.2, 3.3], &[1.0, 2.0, 3.0]).unwrap() - 0.1).abs() < 1e-12);
        assert!((nmae(&[8.0, 12.0], &[10.0, 10.0]).unwrap() - 0.2).abs() < 1e-12);
        assert_eq!(nmae(&[1.0], &[0.0]), Err(MetricError::ZeroMeasurement { index: 0 }));
    }

    #[test]
    fn pearson_examples() {
        let m = [1.0, 2.0, 4.0, 7.0];
        let p: Vec<f64> = m.iter().map(|v| 2.0 * v).collect();
        assert!((pearson_r(&p, &m).unwrap() - 1.0).abs() < 1e-12);
        let p: Vec<f64> = m.iter().map(|v| 5.0 - v).collect();
        assert!((pearson_r(&p, &m).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(pearson_r(&[1.0, 1.0], &[1.0, 2.0]), Err(MetricError::ZeroVariance));
    }
}
