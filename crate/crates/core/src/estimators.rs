//! Estimators of (an upper bound on) the proportion of true nulls.

use crate::error::{Error, Result};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoreyConfig {
    pub lambda: f64,
}

impl StoreyConfig {
    pub fn new(lambda: f64) -> Result<Self> {
        let cfg = Self { lambda };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.lambda > 0.0 && self.lambda < 1.0 {
            Ok(())
        } else {
            Err(Error::config(format!("Storey lambda must lie in (0, 1), got {}", self.lambda)))
        }
    }
}

impl Default for StoreyConfig {
    fn default() -> Self {
        Self { lambda: 0.5 }
    }
}

/// `l` is the log exponent in the spacing width `m^{4/5} (ln m)^{-2l}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpacingConfig {
    pub l: f64,
}

impl SpacingConfig {
    pub fn new(l: f64) -> Result<Self> {
        let cfg = Self { l };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.l > 0.0 && self.l.is_finite() {
            Ok(())
        } else {
            Err(Error::config(format!("spacing exponent l must be positive, got {}", self.l)))
        }
    }

    /// Spacing width `r_m = max(1, floor(m^{4/5} (ln m)^{-2l}))`, or `None`
    /// when the expression is not finite (m = 1).
    pub fn width(&self, m: usize) -> Option<usize> {
        let mf = m as f64;
        let r = mf.powf(0.8) * mf.ln().powf(-2.0 * self.l);
        if r.is_finite() {
            Some((r.floor() as usize).max(1))
        } else {
            None
        }
    }
}

impl Default for SpacingConfig {
    fn default() -> Self {
        Self { l: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimator {
    Storey(StoreyConfig),
    Spacing(SpacingConfig),
}

impl Estimator {
    pub fn estimate(&self, pvalues: &[f64]) -> Result<f64> {
        match self {
            Estimator::Storey(cfg) => storey_estimate(pvalues, cfg),
            Estimator::Spacing(cfg) => spacing_estimate(pvalues, cfg),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Storey(_) => "storey",
            Estimator::Spacing(_) => "spacing",
        }
    }
}

impl Default for Estimator {
    fn default() -> Self {
        Estimator::Storey(StoreyConfig::default())
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Estimator::Storey(c) => write!(f, "storey(lambda={})", c.lambda),
            Estimator::Spacing(c) => write!(f, "spacing(l={})", c.l),
        }
    }
}

/// Empirical CDF: the fraction of p-values at most `t`.
pub fn empirical_cdf(pvalues: &[f64], t: f64) -> Result<f64> {
    if pvalues.is_empty() {
        return Err(Error::input("empirical CDF of an empty sample"));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::input(format!("ECDF argument must lie in [0, 1], got {t}")));
    }
    let below = pvalues.iter().filter(|&&p| p <= t).count();
    Ok(below as f64 / pvalues.len() as f64)
}

/// `min{(1 - G_m(lambda)) / (1 - lambda), 1}`.
pub fn storey_estimate(pvalues: &[f64], cfg: &StoreyConfig) -> Result<f64> {
    cfg.validate()?;
    let g = empirical_cdf(pvalues, cfg.lambda)?;
    Ok(((1.0 - g) / (1.0 - cfg.lambda)).min(1.0))
}

/// `min{2 r_m / (m V_m), 1}` where `V_m` is the widest `2 r_m`-spacing of the
/// order statistics. Returns 1 when `m < 2 r_m + 2` leaves no spacing to take.
pub fn spacing_estimate(pvalues: &[f64], cfg: &SpacingConfig) -> Result<f64> {
    cfg.validate()?;
    if pvalues.is_empty() {
        return Err(Error::input("spacing estimate of an empty sample"));
    }
    let m = pvalues.len();
    let r = match cfg.width(m) {
        Some(r) if m >= 2 * r + 2 => r,
        _ => return Ok(1.0),
    };
    let mut sorted = pvalues.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    // 1-based j in [r+1, m-r]  ->  P_(j+r) - P_(j-r)  ->  sorted[i + 2r] - sorted[i], i = j-r-1.
    let v = sorted
        .windows(2 * r + 1)
        .map(|w| w[2 * r] - w[0])
        .fold(0.0f64, f64::max);
    Ok((2.0 * r as f64 / (m as f64 * v)).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Literal evaluation of the spacing formula with 1-based order statistics.
    fn spacing_oracle(p: &[f64], l: f64) -> f64 {
        let m = p.len();
        let mf = m as f64;
        let rf = (mf.powf(0.8) / mf.ln().powf(2.0 * l)).floor();
        if !rf.is_finite() {
            return 1.0;
        }
        let r = (rf as usize).max(1);
        if m < 2 * r + 2 {
            return 1.0;
        }
        let mut s = p.to_vec();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let order = |k: usize| s[k - 1];
        let mut v: f64 = 0.0;
        for j in (r + 1)..=(m - r) {
            v = v.max(order(j + r) - order(j - r));
        }
        (2.0 * r as f64 / (mf * v)).min(1.0)
    }

    #[test]
    fn ecdf_examples() {
        assert!((empirical_cdf(&[0.2, 0.4, 0.6], 0.5).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(empirical_cdf(&[0.2, 0.4, 0.6], 1.0).unwrap(), 1.0);
        assert_eq!(empirical_cdf(&[0.2, 0.4, 0.6], 0.0).unwrap(), 0.0);
        assert!(empirical_cdf(&[], 0.5).is_err());
        assert!(empirical_cdf(&[0.1], 1.5).is_err());
    }

    #[test]
    fn storey_examples() {
        let cfg = StoreyConfig::new(0.5).unwrap();
        assert_eq!(storey_estimate(&[0.1, 0.2, 0.6, 0.8], &cfg).unwrap(), 1.0);
        assert_eq!(storey_estimate(&[0.9, 0.95], &cfg).unwrap(), 1.0);
        let mut p = vec![0.01; 9];
        p.push(0.99);
        assert!((storey_estimate(&p, &cfg).unwrap() - 0.2).abs() < 1e-12);
        assert!(storey_estimate(&[], &cfg).is_err());
    }

    #[test]
    fn storey_rejects_bad_lambda() {
        assert!(StoreyConfig::new(0.0).is_err());
        assert!(StoreyConfig::new(1.0).is_err());
        let bad = StoreyConfig { lambda: 1.0 };
        assert!(matches!(storey_estimate(&[0.5], &bad), Err(Error::Config(_))));
    }

    #[test]
    fn spacing_width() {
        let cfg = SpacingConfig::new(0.5).unwrap();
        assert_eq!(cfg.width(1000), Some(36));
        assert_eq!(cfg.width(3), Some(2));
        assert_eq!(cfg.width(1), None);
        assert!(SpacingConfig::new(0.0).is_err());
    }

    #[test]
    fn spacing_degenerate() {
        let cfg = SpacingConfig::new(0.5).unwrap();
        assert_eq!(spacing_estimate(&[0.1, 0.5, 0.9], &cfg).unwrap(), 1.0);
        assert_eq!(spacing_estimate(&[0.3], &cfg).unwrap(), 1.0);
        assert!(spacing_estimate(&[], &cfg).is_err());
    }

    #[test]
    fn spacing_uniform_grid() {
        let cfg = SpacingConfig::new(0.5).unwrap();
        let m = 1000;
        let p: Vec<f64> = (1..=m).map(|j| j as f64 / (m + 1) as f64).collect();
        // r_m = 36, V_m = 72/1001, ratio 1.001 before clamping.
        assert_eq!(spacing_oracle(&p, 0.5), 1.0);
        assert_eq!(spacing_estimate(&p, &cfg).unwrap(), 1.0);
    }

    #[test]
    fn spacing_concentrated_fixture() {
        // Golden value from `spacing_oracle`: V_m = 7.2e-5, 2r/(mV) = 1000, clamped.
        const GOLDEN: f64 = 1.0;
        let cfg = SpacingConfig::new(0.5).unwrap();
        let m = 1000;
        let p: Vec<f64> = (1..=m).map(|j| 0.001 * j as f64 / m as f64).collect();
        assert_eq!(spacing_oracle(&p, 0.5), GOLDEN);
        assert_eq!(spacing_estimate(&p, &cfg).unwrap(), GOLDEN);
    }

    #[test]
    fn spacing_detects_alternatives() {
        // 30% of mass piled near zero, the rest uniform: the widest spacing
        // lives in the uniform part, so the estimate is close to 0.7.
        let cfg = SpacingConfig::new(0.5).unwrap();
        let m = 10_000;
        let p: Vec<f64> = (0..m)
            .map(|i| {
                if i < 3000 {
                    1e-6 * (i + 1) as f64
                } else {
                    (i - 2999) as f64 / 7001.0
                }
            })
            .collect();
        let est = spacing_estimate(&p, &cfg).unwrap();
        assert!((est - spacing_oracle(&p, 0.5)).abs() < 1e-12);
        assert!((est - 0.7).abs() < 0.01, "{est}");
    }

    proptest! {
        #[test]
        fn prop_estimates_in_unit_interval(p in prop::collection::vec(0.0..=1.0f64, 1..400), lambda in 0.05..0.95f64) {
            let s = storey_estimate(&p, &StoreyConfig::new(lambda).unwrap()).unwrap();
            let v = spacing_estimate(&p, &SpacingConfig::default()).unwrap();
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert!((0.0..=1.0).contains(&v));
        }

        #[test]
        fn prop_spacing_matches_oracle(p in prop::collection::vec(0.0..=1.0f64, 1..400)) {
            let v = spacing_estimate(&p, &SpacingConfig::default()).unwrap();
            prop_assert_eq!(v, spacing_oracle(&p, 0.5));
        }

        #[test]
        fn prop_spacing_permutation_invariant(mut p in prop::collection::vec(0.0..=1.0f64, 1..400)) {
            let cfg = SpacingConfig::default();
            let a = spacing_estimate(&p, &cfg).unwrap();
            p.reverse();
            let k = p.len() / 3;
            p.rotate_left(k);
            prop_assert_eq!(a, spacing_estimate(&p, &cfg).unwrap());
        }

        #[test]
        fn prop_storey_nonincreasing_in_mass_below_lambda(n in 10usize..200, below in 0usize..10) {
            // Moving one p-value from above lambda to below never raises the estimate.
            let cfg = StoreyConfig::default();
            let below = below.min(n - 1);
            let mut p: Vec<f64> = (0..n).map(|i| if i < below { 0.1 } else { 0.9 }).collect();
            let before = storey_estimate(&p, &cfg).unwrap();
            p[below] = 0.1;
            prop_assert!(storey_estimate(&p, &cfg).unwrap() <= before);
        }
    }
}
