//! Benjamini-Hochberg, Bonferroni, and per-trial error/power bookkeeping.

use crate::error::{Error, Result};

/// One node's p-values together with ground-truth labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PValueBatch {
    pvalues: Vec<f64>,
    is_null: Vec<bool>,
}

impl PValueBatch {
    pub fn new(pvalues: Vec<f64>, is_null: Vec<bool>) -> Result<Self> {
        if pvalues.len() != is_null.len() {
            return Err(Error::input(format!(
                "{} p-values but {} labels",
                pvalues.len(),
                is_null.len()
            )));
        }
        validate_pvalues(&pvalues)?;
        Ok(Self { pvalues, is_null })
    }

    /// A batch where every hypothesis is a true null.
    pub fn all_null(pvalues: Vec<f64>) -> Result<Self> {
        let n = pvalues.len();
        Self::new(pvalues, vec![true; n])
    }

    pub fn pvalues(&self) -> &[f64] {
        &self.pvalues
    }

    pub fn is_null(&self) -> &[bool] {
        &self.is_null
    }

    pub fn len(&self) -> usize {
        self.pvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pvalues.is_empty()
    }

    pub fn m0(&self) -> usize {
        self.is_null.iter().filter(|&&n| n).count()
    }

    pub fn m1(&self) -> usize {
        self.len() - self.m0()
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<bool>) {
        (self.pvalues, self.is_null)
    }
}

/// Outcome of one BH run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BhResult {
    /// Number of rejections.
    pub k_hat: usize,
    /// `alpha * k_hat / m`, or 0 when nothing is rejected.
    pub threshold: f64,
    /// Original indices of the rejected p-values, ascending.
    pub rejected: Vec<usize>,
}

impl BhResult {
    pub fn empty() -> Self {
        Self::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialMetrics {
    pub rejections: usize,
    pub false_rejections: usize,
    pub fdp: f64,
    pub tdp: f64,
}

impl TrialMetrics {
    /// Builds metrics from raw counts `R`, `V` and the number of true
    /// alternatives `m1`.
    pub fn from_counts(rejections: usize, false_rejections: usize, m1: usize) -> Self {
        debug_assert!(false_rejections <= rejections);
        let fdp = false_rejections as f64 / rejections.max(1) as f64;
        let tdp = (rejections - false_rejections) as f64 / m1.max(1) as f64;
        Self {
            rejections,
            false_rejections,
            fdp,
            tdp,
        }
    }
}

pub(crate) fn validate_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::input(format!("alpha must lie in (0, 1], got {alpha}")))
    }
}

pub(crate) fn validate_pvalues(pvalues: &[f64]) -> Result<()> {
    match pvalues.iter().position(|p| !(0.0..=1.0).contains(p)) {
        None => Ok(()),
        Some(i) => Err(Error::input(format!(
            "p-value at index {i} is outside [0, 1]: {}",
            pvalues[i]
        ))),
    }
}

/// Step-up critical value `alpha * k / m`. Every comparison and the reported
/// threshold go through this one expression so that rounding is consistent.
#[inline]
fn critical_value(alpha: f64, k: usize, m: usize) -> f64 {
    alpha * k as f64 / m as f64
}

/// The BH step-up procedure at level `alpha`.
///
/// `k_hat = max{k : p_(k) <= alpha * k / m}` and the rejected set is every
/// index whose p-value is at most the resulting threshold, so ties at the
/// boundary are treated alike.
pub fn bh_procedure(pvalues: &[f64], alpha: f64) -> Result<BhResult> {
    validate_alpha(alpha)?;
    validate_pvalues(pvalues)?;
    let m = pvalues.len();
    if m == 0 {
        return Ok(BhResult::empty());
    }

    // p_(k) <= alpha*k/m <= alpha, so only values up to alpha can matter and
    // they occupy the lowest ranks.
    let mut candidates: Vec<f64> = pvalues.iter().copied().filter(|&p| p <= alpha).collect();
    candidates.sort_unstable_by(f64::total_cmp);

    let k_hat = (1..=candidates.len())
        .rev()
        .find(|&k| candidates[k - 1] <= critical_value(alpha, k, m))
        .unwrap_or(0);
    if k_hat == 0 {
        return Ok(BhResult::empty());
    }

    let threshold = critical_value(alpha, k_hat, m);
    let rejected: Vec<usize> = pvalues
        .iter()
        .enumerate()
        .filter(|(_, &p)| p <= threshold)
        .map(|(i, _)| i)
        .collect();
    debug_assert_eq!(rejected.len(), k_hat);
    Ok(BhResult {
        k_hat,
        threshold,
        rejected,
    })
}

/// Indices with `p <= alpha / m`.
pub fn bonferroni(pvalues: &[f64], alpha: f64) -> Result<Vec<usize>> {
    validate_alpha(alpha)?;
    validate_pvalues(pvalues)?;
    if pvalues.is_empty() {
        return Ok(Vec::new());
    }
    let cutoff = critical_value(alpha, 1, pvalues.len());
    Ok(pvalues
        .iter()
        .enumerate()
        .filter(|(_, &p)| p <= cutoff)
        .map(|(i, _)| i)
        .collect())
}

pub fn trial_metrics(batch: &PValueBatch, result: &BhResult) -> Result<TrialMetrics> {
    let m = batch.len();
    let mut false_rejections = 0;
    for &i in &result.rejected {
        if i >= m {
            return Err(Error::Consistency(format!(
                "rejected index {i} out of range for batch of {m}"
            )));
        }
        if batch.is_null[i] {
            false_rejections += 1;
        }
    }
    Ok(TrialMetrics::from_counts(
        result.rejected.len(),
        false_rejections,
        batch.m1(),
    ))
}

/// Mean FDP and mean TDP over trials: the Monte-Carlo FDR and power.
pub fn aggregate_metrics(trials: &[TrialMetrics]) -> Result<(f64, f64)> {
    if trials.is_empty() {
        return Err(Error::input("cannot aggregate zero trials"));
    }
    let n = trials.len() as f64;
    let fdr = trials.iter().map(|t| t.fdp).sum::<f64>() / n;
    let power = trials.iter().map(|t| t.tdp).sum::<f64>() / n;
    Ok((fdr, power))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Direct transcription of the max-k definition: try every k in 0..=m.
    fn brute_force_k_hat(pvalues: &[f64], alpha: f64) -> usize {
        let m = pvalues.len();
        let mut sorted = pvalues.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut best = 0;
        for k in 1..=m {
            if sorted[k - 1] <= alpha * k as f64 / m as f64 {
                best = k;
            }
        }
        best
    }

    #[test]
    fn bh_hand_example() {
        let r = bh_procedure(&[0.01, 0.04, 0.10, 0.50], 0.2).unwrap();
        assert_eq!(r.k_hat, 3);
        assert!((r.threshold - 0.15).abs() < 1e-15);
        assert_eq!(r.rejected, vec![0, 1, 2]);
    }

    #[test]
    fn bh_empty_and_none() {
        assert_eq!(bh_procedure(&[], 0.2).unwrap(), BhResult::empty());
        let r = bh_procedure(&[0.5, 0.9], 0.2).unwrap();
        assert_eq!(r.k_hat, 0);
        assert_eq!(r.threshold, 0.0);
        assert!(r.rejected.is_empty());
    }

    #[test]
    fn bh_zero_pvalues_rejected() {
        let r = bh_procedure(&[0.0, 0.0, 0.0], 0.05).unwrap();
        assert_eq!(r.k_hat, 3);
    }

    #[test]
    fn bh_ties_straddling_rank_all_rejected() {
        // p_(2) = 0.1 <= 0.2*2/4; the tie at p_(3) = 0.1 is also rejected,
        // and k_hat becomes 3 because 0.1 <= 0.15.
        let r = bh_procedure(&[0.1, 0.01, 0.1, 0.9], 0.2).unwrap();
        assert_eq!(r.k_hat, 3);
        assert_eq!(r.rejected, vec![0, 1, 2]);
    }

    #[test]
    fn bh_at_alpha_one_rejects_everything() {
        let r = bh_procedure(&[0.3, 0.99, 0.7], 1.0).unwrap();
        assert_eq!(r.k_hat, 3);
    }

    #[test]
    fn bh_rejects_bad_input() {
        assert!(matches!(bh_procedure(&[0.1], 0.0), Err(Error::InvalidInput(_))));
        assert!(matches!(bh_procedure(&[0.1], 1.5), Err(Error::InvalidInput(_))));
        assert!(matches!(bh_procedure(&[0.1], f64::NAN), Err(Error::InvalidInput(_))));
        assert!(matches!(bh_procedure(&[1.2], 0.1), Err(Error::InvalidInput(_))));
        assert!(matches!(bh_procedure(&[f64::NAN], 0.1), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn bonferroni_examples() {
        assert_eq!(bonferroni(&[0.01, 0.04], 0.05).unwrap(), vec![0]);
        assert!(bonferroni(&[], 0.05).unwrap().is_empty());
        assert_eq!(bonferroni(&[0.2], 0.2).unwrap(), vec![0]);
        assert!(bonferroni(&[-0.1], 0.2).is_err());
    }

    #[test]
    fn metrics_examples() {
        let all_null = PValueBatch::all_null(vec![0.5; 10]).unwrap();
        let r = BhResult {
            k_hat: 2,
            threshold: 0.1,
            rejected: vec![3, 7],
        };
        let t = trial_metrics(&all_null, &r).unwrap();
        assert_eq!((t.rejections, t.false_rejections), (2, 2));
        assert_eq!(t.fdp, 1.0);
        assert_eq!(t.tdp, 0.0);

        let t = trial_metrics(&all_null, &BhResult::empty()).unwrap();
        assert_eq!((t.fdp, t.tdp), (0.0, 0.0));

        let mixed = PValueBatch::new(vec![0.5, 0.001, 0.6, 0.002], vec![true, false, true, false])
            .unwrap();
        let r = BhResult {
            k_hat: 2,
            threshold: 0.01,
            rejected: vec![1, 3],
        };
        let t = trial_metrics(&mixed, &r).unwrap();
        assert_eq!(t.false_rejections, 0);
        assert_eq!((t.fdp, t.tdp), (0.0, 1.0));
    }

    #[test]
    fn metrics_out_of_range_index() {
        let b = PValueBatch::all_null(vec![0.5; 3]).unwrap();
        let r = BhResult {
            k_hat: 1,
            threshold: 0.1,
            rejected: vec![3],
        };
        assert!(matches!(trial_metrics(&b, &r), Err(Error::Consistency(_))));
    }

    #[test]
    fn batch_validation() {
        assert!(PValueBatch::new(vec![0.1, 0.2], vec![true]).is_err());
        assert!(PValueBatch::new(vec![1.1], vec![true]).is_err());
        let b = PValueBatch::new(vec![0.1, 0.2, 0.3], vec![true, false, true]).unwrap();
        assert_eq!((b.m0(), b.m1()), (2, 1));
    }

    #[test]
    fn aggregate_examples() {
        let t = |fdp| TrialMetrics {
            rejections: 1,
            false_rejections: 0,
            fdp,
            tdp: 0.5,
        };
        let (fdr, power) = aggregate_metrics(&[t(0.1), t(0.3)]).unwrap();
        assert!((fdr - 0.2).abs() < 1e-15);
        assert_eq!(power, 0.5);
        assert_eq!(aggregate_metrics(&[t(0.7)]).unwrap(), (0.7, 0.5));
        let (fdr, _) = aggregate_metrics(&vec![t(0.05); 200]).unwrap();
        assert!((fdr - 0.05).abs() < 1e-12);
        assert!(aggregate_metrics(&[]).is_err());
    }

    #[test]
    fn bh_matches_brute_force_on_small_grid() {
        // Exhaustive for m <= 3 over the 21-point grid, sampled for larger m
        // (the acceptance suite runs the full m <= 12 sweep).
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 * 0.05).collect();
        for m in 0..=3usize {
            let total = grid.len().pow(m as u32);
            for code in 0..total {
                let mut c = code;
                let p: Vec<f64> = (0..m)
                    .map(|_| {
                        let v = grid[c % grid.len()];
                        c /= grid.len();
                        v
                    })
                    .collect();
                for alpha in [0.05, 0.2, 0.5, 1.0] {
                    assert_eq!(bh_procedure(&p, alpha).unwrap().k_hat, brute_force_k_hat(&p, alpha));
                }
            }
        }
    }

    fn pvalue_vec() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(prop_oneof![0.0..=1.0f64, (0..=20u32).prop_map(|i| i as f64 * 0.05)], 0..60)
    }

    proptest! {
        #[test]
        fn prop_monotone_in_alpha(p in pvalue_vec(), a in 0.001..1.0f64, b in 0.001..1.0f64) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(bh_procedure(&p, lo).unwrap().k_hat <= bh_procedure(&p, hi).unwrap().k_hat);
        }

        #[test]
        fn prop_permutation_invariant(p in pvalue_vec(), alpha in 0.01..1.0f64, seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut perm: Vec<usize> = (0..p.len()).collect();
            perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let shuffled: Vec<f64> = perm.iter().map(|&i| p[i]).collect();
            let a = bh_procedure(&p, alpha).unwrap();
            let b = bh_procedure(&shuffled, alpha).unwrap();
            prop_assert_eq!(a.k_hat, b.k_hat);
            prop_assert_eq!(a.threshold, b.threshold);
            let mut mapped: Vec<usize> = b.rejected.iter().map(|&j| perm[j]).collect();
            mapped.sort_unstable();
            prop_assert_eq!(mapped, a.rejected);
        }

        #[test]
        fn prop_step_up_self_consistent(p in pvalue_vec(), alpha in 0.01..1.0f64) {
            let r = bh_procedure(&p, alpha).unwrap();
            prop_assert_eq!(r.rejected.len(), r.k_hat);
            prop_assert_eq!(r.k_hat, brute_force_k_hat(&p, alpha));
            for (i, &pi) in p.iter().enumerate() {
                let rejected = r.rejected.binary_search(&i).is_ok();
                prop_assert_eq!(rejected, r.k_hat > 0 && pi <= r.threshold);
            }
            if r.k_hat > 0 {
                prop_assert_eq!(r.threshold, alpha * r.k_hat as f64 / p.len() as f64);
            }
        }

        #[test]
        fn prop_bonferroni_subset_of_bh(p in pvalue_vec(), alpha in 0.01..1.0f64) {
            let bh = bh_procedure(&p, alpha).unwrap();
            for i in bonferroni(&p, alpha).unwrap() {
                prop_assert!(bh.rejected.binary_search(&i).is_ok());
            }
        }
    }
}
