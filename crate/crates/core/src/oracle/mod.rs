//! Asymptotic quantities for the Gaussian two-group model.
//!
//! `alt_cdf` is the CDF of a two-sided p-value under the alternative,
//! averaged over the distribution of `mu`. The limiting BH threshold is the
//! largest crossing of `F(t)` with the line `beta * t`.

pub mod fixture;

use crate::datagen::AlternativeModel;
use crate::error::{Error, Result};
use crate::normal;

const QUAD_TOL: f64 = 1e-10;
const MAX_QUAD_DEPTH: u32 = 48;
const SCAN_STEP: f64 = 1e-4;
const BISECT_TOL: f64 = 1e-10;

/// One population: null proportion `r0` and alternative model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureSpec {
    pub r0: f64,
    pub alt: AlternativeModel,
}

impl MixtureSpec {
    pub fn new(r0: f64, alt: AlternativeModel) -> Result<Self> {
        if !(0.0..1.0).contains(&r0) {
            return Err(Error::input(format!("r0 must lie in [0, 1), got {r0}")));
        }
        alt.validate()?;
        Ok(Self { r0, alt })
    }

    /// `G(t; r0) = r0 t + (1 - r0) F(t)`.
    pub fn cdf(&self, t: f64) -> Result<f64> {
        Ok(self.r0 * t + (1.0 - self.r0) * alt_cdf(&self.alt, t)?)
    }
}

/// A network of populations; node `i` receives a fraction `weights[i]` of
/// all p-values.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkMixtureSpec {
    pub weights: Vec<f64>,
    pub nodes: Vec<MixtureSpec>,
}

impl NetworkMixtureSpec {
    pub fn new(weights: Vec<f64>, nodes: Vec<MixtureSpec>) -> Result<Self> {
        if weights.is_empty() || weights.len() != nodes.len() {
            return Err(Error::input("need one weight per node and at least one node"));
        }
        if weights.iter().any(|&w| w < 0.0) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::input("node weights must be nonnegative and sum to 1"));
        }
        Ok(Self { weights, nodes })
    }

    /// A single-population network.
    pub fn single(spec: MixtureSpec) -> Self {
        Self {
            weights: vec![1.0],
            nodes: vec![spec],
        }
    }

    /// Global null proportion `sum_i q_i r0_i`.
    pub fn r0_star(&self) -> f64 {
        self.weights.iter().zip(&self.nodes).map(|(q, s)| q * s.r0).sum()
    }

    /// Alternative CDF of the pooled network: the alternative-mass-weighted
    /// average of the per-node alternative CDFs.
    pub fn alt_cdf(&self, t: f64) -> Result<f64> {
        let r1_star = 1.0 - self.r0_star();
        let mut acc = 0.0;
        for (q, s) in self.weights.iter().zip(&self.nodes) {
            let w = q * (1.0 - s.r0);
            if w > 0.0 {
                acc += w * alt_cdf(&s.alt, t)?;
            }
        }
        Ok(acc / r1_star)
    }
}

/// `beta(alpha; r0) = (1/alpha - r0) / (1 - r0)`.
pub fn beta(alpha: f64, r0: f64) -> Result<f64> {
    crate::testing::validate_alpha(alpha)?;
    if !(0.0..1.0).contains(&r0) {
        return Err(Error::input(format!("beta needs r0 in [0, 1), got {r0}")));
    }
    Ok((1.0 / alpha - r0) / (1.0 - r0))
}

/// Upper critical value `z_{t/2} = Phi^{-1}(1 - t/2)`, computed from the lower
/// tail to keep precision for small `t`.
fn upper_critical(t: f64) -> f64 {
    -normal::quantile(0.5 * t)
}

/// `P(two-sided p <= t | mu) = Phi(mu - z) + Phi(-mu - z)`.
fn rejection_prob(mu: f64, z: f64) -> f64 {
    normal::sf(z - mu) + normal::sf(z + mu)
}

fn check_t(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::input(format!("p-value level must lie in [0, 1], got {t}")))
    }
}

/// Alternative p-value CDF `F(t)`, integrating over `mu` by adaptive Simpson
/// on each support interval.
pub fn alt_cdf(alt: &AlternativeModel, t: f64) -> Result<f64> {
    check_t(t)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    if t == 1.0 {
        return Ok(1.0);
    }
    let z = upper_critical(t);
    let intervals = alt.intervals();
    let mut total = 0.0;
    for &(a, b) in &intervals {
        total += if b > a {
            let f = |mu: f64| rejection_prob(mu, z);
            adaptive_simpson(&f, a, b, QUAD_TOL * (b - a))? / (b - a)
        } else {
            rejection_prob(a, z)
        };
    }
    Ok((total / intervals.len() as f64).clamp(0.0, 1.0))
}

/// Same quantity as [`alt_cdf`] through the antiderivative
/// `int Phi = x Phi(x) + phi(x)`; no quadrature involved.
pub fn alt_cdf_closed_form(alt: &AlternativeModel, t: f64) -> Result<f64> {
    check_t(t)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    if t == 1.0 {
        return Ok(1.0);
    }
    let z = upper_critical(t);
    let antiderivative = |x: f64| x * normal::cdf(x) + normal::pdf(x);
    let intervals = alt.intervals();
    let mut total = 0.0;
    for &(a, b) in &intervals {
        total += if b > a {
            let up = antiderivative(b - z) - antiderivative(a - z);
            let down = antiderivative(-z - a) - antiderivative(-z - b);
            (up + down) / (b - a)
        } else {
            normal::cdf(a - z) + normal::cdf(-a - z)
        };
    }
    Ok((total / intervals.len() as f64).clamp(0.0, 1.0))
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, MAX_QUAD_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if !delta.is_finite() {
        return Err(Error::Numeric(format!("non-finite integrand on [{a}, {b}]")));
    }
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::Numeric(format!("quadrature did not converge on [{a}, {b}]")));
    }
    Ok(simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
}

/// Largest `t` in `(0, 1/beta]` with `F(t) = beta t`, or 0 when `F` never
/// reaches the line.
///
/// Scans down from `1/beta` (no crossing can lie above it since `F <= 1`),
/// then bisects the first bracketing cell. The scan step is `1e-4`, shrunk
/// to keep at least 1000 cells below `1/beta`.
pub fn tau_star_with<F>(cdf: F, beta: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(beta >= 1.0 && beta.is_finite()) {
        return Err(Error::input(format!("slope must be finite and >= 1, got {beta}")));
    }
    let gap = |t: f64| -> Result<f64> {
        let d = cdf(t)? - beta * t;
        if d.is_nan() {
            Err(Error::Numeric(format!("F(t) - beta t is NaN at t={t}")))
        } else {
            Ok(d)
        }
    };
    let upper = 1.0 / beta;
    let step = SCAN_STEP.min(upper / 1000.0);
    if gap(upper)? >= 0.0 {
        return Ok(upper);
    }
    let mut hi = upper;
    let mut k = 1u64;
    loop {
        let lo = upper - k as f64 * step;
        if lo <= 0.0 {
            return Ok(0.0);
        }
        let d = gap(lo)?;
        if d == 0.0 {
            return Ok(lo);
        }
        if d > 0.0 {
            return bisect(&gap, lo, hi);
        }
        hi = lo;
        k += 1;
    }
}

/// Bisection on `[lo, hi]` with `gap(lo) > 0 > gap(hi)`.
fn bisect<G: Fn(f64) -> Result<f64>>(gap: &G, mut lo: f64, mut hi: f64) -> Result<f64> {
    while hi - lo > BISECT_TOL {
        let mid = 0.5 * (lo + hi);
        if gap(mid)? >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Limiting BH threshold `tau(alpha; r0)` for one population.
pub fn tau_star(alpha: f64, r0: f64, alt: &AlternativeModel) -> Result<f64> {
    let b = beta(alpha, r0)?;
    tau_star_with(|t| alt_cdf(alt, t), b)
}

/// Almost-sure limits of (FDP, TDP) for BH at level `alpha` on the pooled
/// network: `r0* tau / G(tau)` and `F(tau)`. Returns `(0, 0)` when the
/// limiting threshold is 0.
pub fn limit_fdr_power(spec: &NetworkMixtureSpec, alpha: f64) -> Result<(f64, f64)> {
    let r0 = spec.r0_star();
    let b = beta(alpha, r0)?;
    let tau = tau_star_with(|t| spec.alt_cdf(t), b)?;
    if tau == 0.0 {
        return Ok((0.0, 0.0));
    }
    let f = spec.alt_cdf(tau)?;
    let g = r0 * tau + (1.0 - r0) * f;
    Ok((r0 * tau / g, f))
}

/// Limit of Storey's estimator, `(1 - G(lambda; r0)) / (1 - lambda)` clamped
/// to [0, 1].
pub fn storey_limit(spec: &MixtureSpec, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::input(format!("lambda must lie in (0, 1), got {lambda}")));
    }
    Ok(((1.0 - spec.cdf(lambda)?) / (1.0 - lambda)).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mu3() -> AlternativeModel {
        AlternativeModel::fixed(3.0).unwrap()
    }

    #[test]
    fn beta_examples() {
        assert_eq!(beta(0.2, 0.0).unwrap(), 5.0);
        assert!((beta(0.2, 0.8).unwrap() - 21.0).abs() < 1e-12);
        assert_eq!(beta(1.0, 0.37).unwrap(), 1.0);
        assert!(beta(0.2, 1.0).is_err());
        assert!(beta(0.0, 0.5).is_err());
    }

    #[test]
    fn alt_cdf_endpoints_and_point_mass() {
        let alt = AlternativeModel::symmetric(3.0).unwrap();
        assert_eq!(alt_cdf(&alt, 0.0).unwrap(), 0.0);
        assert_eq!(alt_cdf(&alt, 1.0).unwrap(), 1.0);
        assert!(alt_cdf(&alt, 1.5).is_err());
        // Phi(1.040036) + Phi(-4.959964), from an independent erf table.
        let expected = 0.850_838_415_795_804_4 + 3.525_312_515_873_46e-7;
        assert!((alt_cdf(&mu3(), 0.05).unwrap() - expected).abs() < 1e-10);
    }

    #[test]
    fn alt_cdf_routes_agree() {
        for alt in [
            mu3(),
            AlternativeModel::symmetric(2.0).unwrap(),
            AlternativeModel::symmetric(3.0).unwrap(),
            AlternativeModel::symmetric(5.0).unwrap(),
            AlternativeModel::new(2.7, 0.5, false).unwrap(),
        ] {
            for i in 1..200 {
                let t = i as f64 / 200.0;
                let q = alt_cdf(&alt, t).unwrap();
                let c = alt_cdf_closed_form(&alt, t).unwrap();
                assert!((q - c).abs() < 1e-10, "{alt:?} t={t}: {q} vs {c}");
            }
            for t in [1e-12, 1e-8, 1e-5] {
                assert!((alt_cdf(&alt, t).unwrap() - alt_cdf_closed_form(&alt, t).unwrap()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn alt_cdf_reflection_symmetric() {
        let one_sided = AlternativeModel::new(3.0, 0.5, false).unwrap();
        let two_sided = AlternativeModel::symmetric(3.0).unwrap();
        for t in [0.001, 0.05, 0.3] {
            assert!((alt_cdf(&one_sided, t).unwrap() - alt_cdf(&two_sided, t).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn alt_cdf_monotone_on_grid() {
        let alt = AlternativeModel::symmetric(2.0).unwrap();
        let mut prev = 0.0;
        for i in 0..=1000 {
            let f = alt_cdf(&alt, i as f64 / 1000.0).unwrap();
            assert!(f >= prev - 1e-12);
            prev = f;
        }
        assert_eq!(prev, 1.0);
    }

    #[test]
    fn tau_sqrt_stub() {
        let tau = tau_star_with(|t| Ok(t.sqrt()), 5.0).unwrap();
        assert!((tau - 0.04).abs() < 1e-9);
    }

    #[test]
    fn tau_no_crossing() {
        // F(t) = t^2 stays below 5t on (0, 1/5].
        assert_eq!(tau_star_with(|t| Ok(t * t), 5.0).unwrap(), 0.0);
    }

    #[test]
    fn tau_picks_largest_crossing() {
        // F(t) - 2t has roots at 0.1 and 0.3 (and 0); expect 0.3.
        let f = |t: f64| Ok(2.0 * t + (t - 0.1) * (0.3 - t) * t);
        let tau = tau_star_with(f, 2.0).unwrap();
        assert!((tau - 0.3).abs() < 1e-9, "{tau}");
    }

    #[test]
    fn tau_at_alpha_one_is_one() {
        assert_eq!(tau_star(1.0, 0.5, &mu3()).unwrap(), 1.0);
    }

    #[test]
    fn tau_fixed_point() {
        for (alpha, r0, alt) in [
            (0.2, 0.8, mu3()),
            (0.2, 0.5, AlternativeModel::symmetric(2.0).unwrap()),
            (0.05, 0.9, AlternativeModel::symmetric(3.0).unwrap()),
        ] {
            let b = beta(alpha, r0).unwrap();
            let tau = tau_star(alpha, r0, &alt).unwrap();
            assert!(tau > 0.0);
            assert!((alt_cdf(&alt, tau).unwrap() - b * tau).abs() <= 1e-8);
        }
    }

    #[test]
    fn limits_with_stub_cdf() {
        // No nulls: FDR limit 0; with F = sqrt(t) power is sqrt(0.04) = 0.2.
        let tau = tau_star_with(|t| Ok(t.sqrt()), beta(0.2, 0.0).unwrap()).unwrap();
        assert!((tau.sqrt() - 0.2).abs() < 1e-9);
        let spec = NetworkMixtureSpec::single(MixtureSpec::new(0.0, mu3()).unwrap());
        let (fdr, power) = limit_fdr_power(&spec, 0.2).unwrap();
        assert_eq!(fdr, 0.0);
        assert!(power > 0.0);
    }

    #[test]
    fn fdr_limit_equals_r0_alpha() {
        // At the crossing G(tau) = tau / alpha, so r0 tau / G(tau) = r0 alpha.
        let spec = NetworkMixtureSpec::new(
            vec![0.5, 0.5],
            vec![
                MixtureSpec::new(0.9, AlternativeModel::symmetric(3.0).unwrap()).unwrap(),
                MixtureSpec::new(0.7, AlternativeModel::symmetric(2.5).unwrap()).unwrap(),
            ],
        )
        .unwrap();
        let (fdr, power) = limit_fdr_power(&spec, 0.2).unwrap();
        assert!((fdr - 0.8 * 0.2).abs() < 1e-8, "{fdr}");
        assert!(power > 0.0 && power < 1.0);
    }

    #[test]
    fn network_validation() {
        let s = MixtureSpec::new(0.5, mu3()).unwrap();
        assert!(NetworkMixtureSpec::new(vec![0.5, 0.6], vec![s, s]).is_err());
        assert!(NetworkMixtureSpec::new(vec![1.0], vec![s, s]).is_err());
        assert!(MixtureSpec::new(1.0, mu3()).is_err());
    }

    #[test]
    fn storey_limit_examples() {
        // F(lambda) = 1 leaves exactly r0.
        let strong = AlternativeModel::fixed(40.0).unwrap();
        let s = MixtureSpec::new(0.8, strong).unwrap();
        assert!((storey_limit(&s, 0.5).unwrap() - 0.8).abs() < 1e-12);

        let s = MixtureSpec::new(0.5, mu3()).unwrap();
        let f = alt_cdf_closed_form(&mu3(), 0.5).unwrap();
        let expected = 0.5 + 0.5 * (1.0 - f) / 0.5;
        assert!((storey_limit(&s, 0.5).unwrap() - expected).abs() < 1e-10);
        assert!(storey_limit(&s, 1.0).is_err());
    }
}
