//! Small statistics helpers: sample means with standard errors and the
//! weighted log-log slope fit used by the rate experiments.

use serde::Serialize;

use crate::error::{Error, Result};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Mean and standard error of the mean. The standard error is zero for a
/// single value.
pub fn mean_se(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::Empty("value list"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Ok((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

/// Standard error of a binomial frequency `p̂` from `n` trials.
pub fn binomial_se(p_hat: f64, n: usize) -> f64 {
    (p_hat * (1.0 - p_hat) / n as f64).max(0.0).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Grid points that entered the fit.
    pub points_used: usize,
    pub dropped_first: bool,
    /// Points skipped because their mean was not positive.
    pub skipped_nonpositive: usize,
}

/// Weighted least-squares fit of `ln mean` on `ln n`.
///
/// Each point is weighted by the inverse of its delta-method variance
/// `(se / mean)²`. When any standard error is zero the fit falls back to equal
/// weights with a residual-based slope error.
pub fn fit_loglog(ns: &[f64], means: &[f64], ses: &[f64], drop_first: bool) -> Result<SlopeFit> {
    if ns.len() != means.len() || ns.len() != ses.len() {
        return Err(Error::InvalidParameter("slope fit inputs differ in length".into()));
    }
    let start = usize::from(drop_first);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut vars = Vec::new();
    let mut skipped = 0;
    for i in start..ns.len() {
        if !(means[i] > 0.0) || !(ns[i] > 0.0) {
            skipped += 1;
            continue;
        }
        xs.push(ns[i].ln());
        ys.push(means[i].ln());
        vars.push((ses[i] / means[i]).powi(2));
    }
    if xs.len() < 2 {
        return Err(Error::TooFewSamples(xs.len()));
    }
    let weighted = vars.iter().all(|&v| v > 0.0 && v.is_finite());
    let w: Vec<f64> = if weighted { vars.iter().map(|v| 1.0 / v).collect() } else { vec![1.0; xs.len()] };
    let sw: f64 = w.iter().sum();
    let xbar = xs.iter().zip(&w).map(|(x, w)| x * w).sum::<f64>() / sw;
    let ybar = ys.iter().zip(&w).map(|(y, w)| y * w).sum::<f64>() / sw;
    let sxx: f64 = xs.iter().zip(&w).map(|(x, w)| w * (x - xbar).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("slope fit needs at least two distinct n".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).zip(&w).map(|((x, y), w)| w * (x - xbar) * (y - ybar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let slope_se = if weighted {
        (1.0 / sxx).sqrt()
    } else if xs.len() > 2 {
        let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
        (rss / (xs.len() as f64 - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(SlopeFit {
        slope,
        intercept,
        slope_se,
        ci_low: slope - Z95 * slope_se,
        ci_high: slope + Z95 * slope_se,
        points_used: xs.len(),
        dropped_first: drop_first,
        skipped_nonpositive: skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_se() {
        let (m, se) = mean_se(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_se(&[7.0]).unwrap(), (7.0, 0.0));
        assert!(mean_se(&[]).is_err());
    }

    #[test]
    fn exact_power_law_is_recovered() {
        let ns: Vec<f64> = (6..=12).map(|e| 2f64.powi(e)).collect();
        let means: Vec<f64> = ns.iter().map(|n| 3.0 * n.powf(-0.8)).collect();
        let ses: Vec<f64> = means.iter().map(|m| 0.1 * m).collect();
        let fit = fit_loglog(&ns, &means, &ses, false).unwrap();
        assert!((fit.slope + 0.8).abs() < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-10);
        assert!(fit.ci_low < fit.slope && fit.slope < fit.ci_high);
        let dropped = fit_loglog(&ns, &means, &ses, true).unwrap();
        assert_eq!(dropped.points_used, 6);
    }

    #[test]
    fn weights_follow_delta_method() {
        // A wildly noisy last point should barely move the weighted slope.
        let ns = [10.0, 100.0, 1000.0, 10000.0];
        let means = [1.0, 0.1, 0.01, 1.0];
        let ses = [1e-4, 1e-5, 1e-6, 1e3];
        let fit = fit_loglog(&ns, &means, &ses, false).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-3);
    }

    #[test]
    fn nonpositive_points_are_skipped() {
        let fit = fit_loglog(&[1.0, 2.0, 4.0], &[-1.0, 0.5, 0.25], &[0.0; 3], false).unwrap();
        assert_eq!(fit.skipped_nonpositive, 1);
        assert!((fit.slope + 1.0).abs() < 1e-12);
        assert!(fit_loglog(&[1.0, 2.0], &[0.0, 1.0], &[0.1, 0.1], false).is_err());
    }
}
