//! Scalar summaries the scenarios report: RMS errors, trailing-window
//! trend slopes, extrema.

/// Root-mean-square of a slice.
pub fn rms(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt()
}

/// Ordinary least-squares slope of values against times. This is the drift
/// measure: a bounded error series has a slope near zero, an accumulating
/// one does not.
pub fn linear_trend_slope(times: &[f64], values: &[f64]) -> f64 {
    assert_eq!(times.len(), values.len());
    let n = times.len() as f64;
    if times.len() < 2 {
        return 0.0;
    }
    let t_mean = times.iter().sum::<f64>() / n;
    let v_mean = values.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (t, v) in times.iter().zip(values) {
        num += (t - t_mean) * (v - v_mean);
        den += (t - t_mean) * (t - t_mean);
    }
    num / den
}

/// Pairs (time, value) restricted to `t >= t_min`.
pub fn tail<'a>(times: &'a [f64], values: &'a [f64], t_min: f64) -> (Vec<f64>, Vec<f64>) {
    let mut ts = Vec::new();
    let mut vs = Vec::new();
    for (&t, &v) in times.iter().zip(values) {
        if t >= t_min {
            ts.push(t);
            vs.push(v);
        }
    }
    (ts, vs)
}

pub fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn slope_of_line_is_recovered() {
        let times: Vec<f64> = (0..100).map(|i| i as f64 * 0.5).collect();
        let values: Vec<f64> = times.iter().map(|t| 3.0 - 0.25 * t).collect();
        assert_relative_eq!(linear_trend_slope(&times, &values), -0.25, epsilon = 1e-12);
    }

    #[test]
    fn slope_of_bounded_oscillation_is_small() {
        let times: Vec<f64> = (0..10_000).map(|i| i as f64 * 0.1).collect();
        let values: Vec<f64> = times.iter().map(|t| t.sin()).collect();
        assert!(linear_trend_slope(&times, &values).abs() < 1e-4);
    }

    #[test]
    fn rms_and_max_abs() {
        assert_relative_eq!(rms(&[3.0, 4.0, 0.0]), (25.0f64 / 3.0).sqrt());
        assert_relative_eq!(max_abs(&[-3.0, 2.0]), 3.0);
    }

    #[test]
    fn tail_filters_by_time() {
        let (ts, vs) = tail(&[0.0, 1.0, 2.0], &[5.0, 6.0, 7.0], 1.0);
        assert_eq!(ts, vec![1.0, 2.0]);
        assert_eq!(vs, vec![6.0, 7.0]);
    }
}
