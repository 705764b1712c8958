//! Small numerical helpers shared across modules.

/// Equality tolerance used for argmin/argmax tie-breaking and value merging.
pub const TIE_TOL: f64 = 1e-12;

/// `ln Σ exp(x_i)` with max subtraction. Returns `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(xs: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let s: f64 = xs.into_iter().map(|x| (x - max).exp()).sum();
    max + s.ln()
}

/// Result of a straight-line least-squares fit `y ≈ intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination. Defined as 1 when the fit is exact.
    pub r2: f64,
    /// Standard error of the slope under the supplied weights (inverse variances),
    /// or the residual-variance estimate for an unweighted fit.
    pub slope_std_error: f64,
}

/// Ordinary least squares.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let ws = vec![1.0; xs.len()];
    let mut fit = fit_line_weighted(xs, ys, &ws)?;
    // unweighted: scale the standard error by the residual variance
    let n = xs.len() as f64;
    if xs.len() > 2 {
        let sres: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| (y - fit.intercept - fit.slope * x).powi(2))
            .sum();
        fit.slope_std_error *= (sres / (n - 2.0)).sqrt();
    } else {
        fit.slope_std_error = 0.0;
    }
    Some(fit)
}

/// Weighted least squares with weights `w_i` (inverse variances).
pub fn fit_line_weighted(xs: &[f64], ys: &[f64], ws: &[f64]) -> Option<LineFit> {
    if xs.len() < 2 || xs.len() != ys.len() || xs.len() != ws.len() {
        return None;
    }
    let sw: f64 = ws.iter().sum();
    let xbar = xs.iter().zip(ws).map(|(x, w)| w * x).sum::<f64>() / sw;
    let ybar = ys.iter().zip(ws).map(|(y, w)| w * y).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for ((x, y), w) in xs.iter().zip(ys).zip(ws) {
        sxx += w * (x - xbar) * (x - xbar);
        sxy += w * (x - xbar) * (y - ybar);
        syy += w * (y - ybar) * (y - ybar);
    }
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let sres: f64 = xs
        .iter()
        .zip(ys)
        .zip(ws)
        .map(|((x, y), w)| w * (y - intercept - slope * x).powi(2))
        .sum();
    let r2 = if sres <= 1e-24 * (1.0 + syy) || syy == 0.0 {
        1.0
    } else {
        (1.0 - sres / syy).clamp(0.0, 1.0)
    };
    Some(LineFit {
        slope,
        intercept,
        r2,
        slope_std_error: (1.0 / sxx).sqrt(),
    })
}

/// Scientific notation with 17 significant digits (`-1.2345678901234567e-3`);
/// non-finite values print as `inf`, `-inf`, `NaN`.
pub fn format_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Binomial coefficient C(n, k) in u128, saturating at `u128::MAX`.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Total variation distance between two equal-length probability vectors.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Least-squares projection of `g` onto span{1, v} over the indices in `idx`,
/// with weights `w`. Returns the residual vector (zero outside `idx`).
pub(crate) fn affine_residual(g: &[f64], v: &[f64], w: &[f64], idx: &[usize]) -> Vec<f64> {
    let sw: f64 = idx.iter().map(|&i| w[i]).sum();
    let mut out = vec![0.0; g.len()];
    if sw <= 0.0 {
        return out;
    }
    let gbar = idx.iter().map(|&i| w[i] * g[i]).sum::<f64>() / sw;
    let vbar = idx.iter().map(|&i| w[i] * v[i]).sum::<f64>() / sw;
    let svv: f64 = idx.iter().map(|&i| w[i] * (v[i] - vbar).powi(2)).sum();
    let sgv: f64 = idx
        .iter()
        .map(|&i| w[i] * (v[i] - vbar) * (g[i] - gbar))
        .sum();
    let beta = if svv > 1e-300 { sgv / svv } else { 0.0 };
    for &i in idx {
        out[i] = g[i] - gbar - beta * (v[i] - vbar);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_handles_extremes() {
        assert_eq!(log_sum_exp(Vec::<f64>::new()), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(vec![f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
        let v = log_sum_exp(vec![1000.0, 1000.0]);
        assert!((v - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(503, 3), 21_084_251);
        assert_eq!(binomial(3, 5), 0);
    }

    #[test]
    fn exact_line_has_unit_r2() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 5.0, 7.0];
        let f = fit_line(&xs, &ys).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14);
        assert!((f.intercept - 1.0).abs() < 1e-14);
        assert_eq!(f.r2, 1.0);
    }

    #[test]
    fn constant_response_fits_flat() {
        let f = fit_line(&[1.0, 2.0, 3.0], &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(f.slope, 0.0);
        assert_eq!(f.r2, 1.0);
    }

    #[test]
    fn float_text_round_trips() {
        for x in [0.1, -1.0 / 3.0, 6.02214076e23, 5e-324, f64::MAX, 0.0] {
            assert_eq!(format_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(format_f64(0.5), "5.0000000000000000e-1");
        assert_eq!(format_f64(f64::NEG_INFINITY), "-inf");
    }
}
