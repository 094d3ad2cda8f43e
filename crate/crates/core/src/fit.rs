//! Least-squares growth fits and spread statistics.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares `y ≈ intercept + slope·x`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidParameter("fit needs at least two paired points".into()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("fit data must be finite".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("fit abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LinearFit {
        slope,
        intercept,
        r2,
    })
}

/// Fit of `log y` against `log x`.
pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.iter().chain(ys).any(|v| *v <= 0.0) {
        return Err(Error::InvalidParameter("log-log fit needs positive data".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    linear_fit(&lx, &ly)
}

/// Per-step growth factor `2^slope` of a `log₂ y` against `n` fit.
pub fn exponential_rate(ns: &[f64], ys: &[f64]) -> Result<(f64, LinearFit)> {
    if ys.iter().any(|v| *v <= 0.0) {
        return Err(Error::InvalidParameter("rate fit needs positive data".into()));
    }
    let ly: Vec<f64> = ys.iter().map(|y| y.log2()).collect();
    let fit = linear_fit(ns, &ly)?;
    Ok((fit.slope.exp2(), fit))
}

/// `max/min` of a family of positive values; infinite if any value is not positive.
pub fn spread(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 1.0;
    }
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let f = linear_fit(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.intercept - 1.0).abs() < 1e-14);
        assert!((f.r2 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn power_law_slope() {
        let xs: Vec<f64> = (1..20).map(|k| k as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(0.5)).collect();
        assert!((loglog_fit(&xs, &ys).unwrap().slope - 0.5).abs() < 1e-12);
        let (rate, _) = exponential_rate(&[1.0, 2.0, 3.0], &[2.0, 4.0, 8.0]).unwrap();
        assert!((rate - 2.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(linear_fit(&[1.0], &[1.0]).is_err());
        assert!(linear_fit(&[1.0, 1.0], &[1.0, 2.0]).is_err());
        assert!(loglog_fit(&[1.0, 2.0], &[0.0, 1.0]).is_err());
        assert_eq!(spread(&[2.0, 8.0, 4.0]), 4.0);
        assert_eq!(spread(&[0.0, 1.0]), f64::INFINITY);
    }
}
