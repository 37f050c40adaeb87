//! Per-sample loss history and naive-sample marking.
//!
//! Each unlabeled sample keeps an exponential moving average `h` of its unthresholded
//! consistency loss. Once per epoch the history is split into two groups and the low-loss
//! group is marked naive.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample as sample_indices;
use rand::Rng;

use crate::error::{Result, SaaError};
use crate::scalar::Scalar;

pub const DEFAULT_OTSU_BINS: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleRecord<T> {
    pub h: T,
    pub naive: bool,
    pub observed: u64,
}

/// EMA loss history and naive markers indexed by sample id `0..len`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleHistory<T> {
    decay: T,
    records: Vec<SampleRecord<T>>,
}

impl<T: Scalar> SampleHistory<T> {
    pub fn new(len: usize, decay: T) -> Result<Self> {
        if !(decay >= T::zero() && decay < T::one()) {
            return Err(SaaError::invalid(format!("history decay {decay} outside [0, 1)")));
        }
        Ok(SampleHistory {
            decay,
            records: vec![SampleRecord { h: T::zero(), naive: false, observed: 0 }; len],
        })
    }

    pub fn from_records(decay: T, records: Vec<SampleRecord<T>>) -> Result<Self> {
        let mut store = Self::new(0, decay)?;
        if records.iter().any(|r| !(r.h.is_finite() && r.h >= T::zero())) {
            return Err(SaaError::invalid("history values must be finite and non-negative"));
        }
        store.records = records;
        Ok(store)
    }

    pub fn decay(&self) -> T {
        self.decay
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[SampleRecord<T>] {
        &self.records
    }

    pub fn get(&self, id: usize) -> Option<&SampleRecord<T>> {
        self.records.get(id)
    }

    pub fn is_naive(&self, id: usize) -> bool {
        self.records.get(id).is_some_and(|r| r.naive)
    }

    /// First observation initializes `h`; later ones apply `h ← d·h + (1 − d)·loss`.
    pub fn record_loss(&mut self, id: usize, loss: T) -> Result<()> {
        if !loss.is_finite() || loss < T::zero() {
            return Err(SaaError::invalid(format!("loss {loss} for sample {id} must be finite and ≥ 0")));
        }
        let decay = self.decay;
        let rec = self
            .records
            .get_mut(id)
            .ok_or_else(|| SaaError::invalid(format!("sample id {id} is not registered")))?;
        rec.h = if rec.observed == 0 { loss } else { decay * rec.h + (T::one() - decay) * loss };
        rec.observed += 1;
        Ok(())
    }

    pub fn naive_count(&self) -> usize {
        self.records.iter().filter(|r| r.naive).count()
    }

    /// Fraction of registered samples currently marked naive.
    pub fn naive_fraction(&self) -> f64 {
        if self.records.is_empty() {
            0.0
        } else {
            self.naive_count() as f64 / self.records.len() as f64
        }
    }

    /// Recomputes every marker under `policy`. Samples never observed are left unmarked
    /// (except under [`SelectionPolicy::All`]) and excluded from threshold estimation.
    pub fn update_markers<R: Rng + ?Sized>(
        &mut self,
        policy: &SelectionPolicy,
        bins: usize,
        rng: &mut R,
    ) -> Result<MarkerUpdate<T>> {
        policy.validate()?;
        let observed: Vec<usize> = (0..self.records.len()).filter(|&i| self.records[i].observed > 0).collect();
        let before: Vec<bool> = self.records.iter().map(|r| r.naive).collect();
        for r in &mut self.records {
            r.naive = false;
        }
        let mut threshold = None;
        let mut degenerate = false;
        match *policy {
            SelectionPolicy::None => {}
            SelectionPolicy::All => self.records.iter_mut().for_each(|r| r.naive = true),
            SelectionPolicy::Otsu => {
                let values: Vec<T> = observed.iter().map(|&i| self.records[i].h).collect();
                if !values.is_empty() {
                    let split = otsu_threshold(&values, bins)?;
                    threshold = Some(split.threshold);
                    degenerate = split.degenerate;
                    if !split.degenerate {
                        self.mark_at_most(&observed, split.threshold);
                    }
                }
            }
            SelectionPolicy::FixedThreshold(tau) => {
                let tau = T::lit(tau);
                threshold = Some(tau);
                self.mark_at_most(&observed, tau);
            }
            SelectionPolicy::FixedProportion(p) => {
                let count = (p * observed.len() as f64).floor() as usize;
                let mut order = observed.clone();
                order.sort_by(|&a, &b| {
                    self.records[a].h.partial_cmp(&self.records[b].h).expect("finite history").then(a.cmp(&b))
                });
                for &i in &order[..count] {
                    self.records[i].naive = true;
                }
                threshold = order[..count].last().map(|&i| self.records[i].h);
            }
            SelectionPolicy::RandomFraction(p) => {
                let count = (p * observed.len() as f64).floor() as usize;
                for k in sample_indices(rng, observed.len(), count) {
                    self.records[observed[k]].naive = true;
                }
            }
        }
        let flips = before.iter().zip(&self.records).filter(|(b, r)| **b != r.naive).count();
        Ok(MarkerUpdate { naive_count: self.naive_count(), threshold, degenerate, flips })
    }

    fn mark_at_most(&mut self, ids: &[usize], tau: T) {
        for &i in ids {
            self.records[i].naive = self.records[i].h <= tau;
        }
    }
}

/// Outcome of one marker refresh.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarkerUpdate<T> {
    pub naive_count: usize,
    pub threshold: Option<T>,
    /// Otsu saw a single distinct value; nothing was marked.
    pub degenerate: bool,
    /// Markers that changed value.
    pub flips: usize,
}

/// How naive samples are chosen each epoch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SelectionPolicy {
    Otsu,
    FixedThreshold(f64),
    FixedProportion(f64),
    All,
    None,
    RandomFraction(f64),
}

impl SelectionPolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SelectionPolicy::FixedThreshold(t) if !(t >= 0.0 && t.is_finite()) => {
                Err(SaaError::config(format!("fixed threshold {t} must be finite and ≥ 0")))
            }
            SelectionPolicy::FixedProportion(p) | SelectionPolicy::RandomFraction(p) if !(0.0..=1.0).contains(&p) => {
                Err(SaaError::config(format!("proportion {p} outside [0, 1]")))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for SelectionPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectionPolicy::Otsu => f.write_str("otsu"),
            SelectionPolicy::FixedThreshold(t) => write!(f, "fixed:{t}"),
            SelectionPolicy::FixedProportion(p) => write!(f, "prop:{p}"),
            SelectionPolicy::All => f.write_str("all"),
            SelectionPolicy::None => f.write_str("none"),
            SelectionPolicy::RandomFraction(p) => write!(f, "random:{p}"),
        }
    }
}

impl FromStr for SelectionPolicy {
    type Err = SaaError;

    /// Accepts `otsu`, `all`, `none`, `fixed:<τ>`, `prop:<p>` and `random:<p>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let arg = |rest: &str| {
            rest.parse::<f64>()
                .map_err(|_| SaaError::config(format!("policy `{s}`: `{rest}` is not a number")))
        };
        let policy = match s.split_once(':') {
            None => match s {
                "otsu" => SelectionPolicy::Otsu,
                "all" => SelectionPolicy::All,
                "none" => SelectionPolicy::None,
                _ => return Err(SaaError::config(format!("unknown selection policy `{s}`"))),
            },
            Some(("fixed", rest)) => SelectionPolicy::FixedThreshold(arg(rest)?),
            Some(("prop", rest)) => SelectionPolicy::FixedProportion(arg(rest)?),
            Some(("random", rest)) => SelectionPolicy::RandomFraction(arg(rest)?),
            Some(_) => return Err(SaaError::config(format!("unknown selection policy `{s}`"))),
        };
        policy.validate()?;
        Ok(policy)
    }
}

/// Result of [`otsu_threshold`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OtsuSplit<T> {
    pub threshold: T,
    /// Index `k ∈ [1, bins)` of the chosen edge; 0 when degenerate.
    pub edge: usize,
    pub degenerate: bool,
}

/// Histogram bin of `v` among `bins` equal-width bins over `[lo, hi]`.
pub fn histogram_bin<T: Scalar>(v: T, lo: T, hi: T, bins: usize) -> usize {
    let pos = ((v - lo) / (hi - lo) * T::from_usize_lossy(bins)).floor();
    pos.to_usize().unwrap_or(0).min(bins - 1)
}

/// Otsu split of `values`.
///
/// Values are histogrammed into `bins` equal-width bins over `[min, max]`. For each interior
/// edge `k` the lower class is bins `[0, k)`; the edge maximizing the between-class variance
/// `ω₀ω₁(μ₀ − μ₁)²` wins, ties going to the lowest edge. Class means use bin levels, and the
/// comparison is carried out in exact integer arithmetic. The returned threshold is the
/// edge value `min + k·(max − min)/bins`.
pub fn otsu_threshold<T: Scalar>(values: &[T], bins: usize) -> Result<OtsuSplit<T>> {
    if values.is_empty() {
        return Err(SaaError::invalid("Otsu threshold of an empty set"));
    }
    if bins < 2 {
        return Err(SaaError::invalid(format!("Otsu needs at least 2 bins, got {bins}")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(SaaError::invalid("Otsu input contains non-finite values"));
    }
    let lo = values.iter().copied().fold(T::infinity(), T::min);
    let hi = values.iter().copied().fold(T::neg_infinity(), T::max);
    if lo == hi {
        return Ok(OtsuSplit { threshold: lo, edge: 0, degenerate: true });
    }

    let mut hist = vec![0u64; bins];
    for &v in values {
        hist[histogram_bin(v, lo, hi, bins)] += 1;
    }
    let total_n: u64 = hist.iter().sum();
    let total_s: u128 = hist.iter().enumerate().map(|(b, &n)| b as u128 * n as u128).sum();

    // Score of edge k is (S0·N1 − S1·N0)² / (N0·N1); compare as fractions.
    let mut best: Option<(usize, u128, u128)> = None;
    let (mut n0, mut s0) = (0u64, 0u128);
    for k in 1..bins {
        n0 += hist[k - 1];
        s0 += (k as u128 - 1) * hist[k - 1] as u128;
        let n1 = total_n - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let s1 = total_s - s0;
        let diff = (s0 * n1 as u128).abs_diff(s1 * n0 as u128);
        let (num, den) = (diff * diff, n0 as u128 * n1 as u128);
        let better = match best {
            None => true,
            Some((_, bn, bd)) => wide_mul_cmp(num, bd, bn, den) == std::cmp::Ordering::Greater,
        };
        if better {
            best = Some((k, num, den));
        }
    }
    let (edge, _, _) = best.expect("min and max fall in different bins");
    let threshold = lo + (hi - lo) * T::from_usize_lossy(edge) / T::from_usize_lossy(bins);
    Ok(OtsuSplit { threshold, edge, degenerate: false })
}

/// Compares `a·b` with `c·d` without overflow.
fn wide_mul_cmp(a: u128, b: u128, c: u128, d: u128) -> std::cmp::Ordering {
    fn wide(x: u128, y: u128) -> (u128, u128) {
        let mask = u64::MAX as u128;
        let (x0, x1) = (x & mask, x >> 64);
        let (y0, y1) = (y & mask, y >> 64);
        let p00 = x0 * y0;
        let p01 = x0 * y1;
        let p10 = x1 * y0;
        let p11 = x1 * y1;
        let mid = (p00 >> 64) + (p01 & mask) + (p10 & mask);
        let lo = (p00 & mask) | (mid << 64);
        let hi = p11 + (p01 >> 64) + (p10 >> 64) + (mid >> 64);
        (hi, lo)
    }
    wide(a, b).cmp(&wide(c, d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    fn rng() -> crate::rng::StreamRng {
        stream(0, Purpose::Markers, 0, 0)
    }

    #[test]
    fn record_loss_initializes_then_averages() {
        let mut h = SampleHistory::<f64>::new(2, 0.999).unwrap();
        h.record_loss(0, 0.7).unwrap();
        assert_eq!(h.get(0).unwrap().h, 0.7);
        let mut h = SampleHistory::<f64>::new(1, 0.999).unwrap();
        h.record_loss(0, 0.5).unwrap();
        h.record_loss(0, 0.1).unwrap();
        assert!((h.get(0).unwrap().h - 0.4996).abs() < 1e-15);
        assert_eq!(h.get(0).unwrap().observed, 2);
    }

    #[test]
    fn record_loss_rejects_bad_input() {
        let mut h = SampleHistory::<f32>::new(2, 0.9).unwrap();
        assert!(h.record_loss(2, 0.1).is_err());
        assert!(h.record_loss(0, f32::NAN).is_err());
        assert!(h.record_loss(0, -0.1).is_err());
        assert!(SampleHistory::<f32>::new(2, 1.0).is_err());
    }

    #[test]
    fn otsu_on_bimodal_set() {
        let split = otsu_threshold(&[0.1f64, 0.1, 0.9, 0.9], 256).unwrap();
        assert!(!split.degenerate);
        assert!(split.threshold > 0.1 && split.threshold < 0.9);
    }

    #[test]
    fn otsu_degenerate_and_invalid() {
        let split = otsu_threshold(&[0.5f64; 4], 256).unwrap();
        assert!(split.degenerate);
        assert_eq!(split.threshold, 0.5);
        assert!(otsu_threshold::<f64>(&[], 256).is_err());
        assert!(otsu_threshold(&[1.0f64, f64::INFINITY], 256).is_err());
    }

    #[test]
    fn otsu_six_values_threshold_between_clusters() {
        let split = otsu_threshold(&[0.0f64, 0.1, 0.15, 0.7, 0.8, 0.9], 256).unwrap();
        assert!(split.threshold > 0.15 && split.threshold <= 0.7, "{split:?}");
    }

    #[test]
    fn wide_compare() {
        use std::cmp::Ordering::*;
        let big = u128::MAX / 3;
        assert_eq!(wide_mul_cmp(big, 6, big, 5), Greater);
        assert_eq!(wide_mul_cmp(big, 5, 5, big), Equal);
        assert_eq!(wide_mul_cmp(2, 3, 1, 7), Less);
    }

    fn store_with(values: &[f64]) -> SampleHistory<f64> {
        let mut s = SampleHistory::new(values.len(), 0.9).unwrap();
        for (i, &v) in values.iter().enumerate() {
            s.record_loss(i, v).unwrap();
        }
        s
    }

    #[test]
    fn policies_mark_expected_samples() {
        let values: Vec<f64> = (0..10).map(|i| (9 - i) as f64 * 0.1).collect();
        let mut s = store_with(&values);
        assert_eq!(s.update_markers(&SelectionPolicy::None, 256, &mut rng()).unwrap().naive_count, 0);
        assert_eq!(s.naive_fraction(), 0.0);
        assert_eq!(s.update_markers(&SelectionPolicy::All, 256, &mut rng()).unwrap().naive_count, 10);
        assert_eq!(s.naive_fraction(), 1.0);

        s.update_markers(&SelectionPolicy::FixedProportion(0.5), 256, &mut rng()).unwrap();
        let marked: Vec<usize> = (0..10).filter(|&i| s.is_naive(i)).collect();
        assert_eq!(marked, vec![5, 6, 7, 8, 9]);

        let up = s.update_markers(&SelectionPolicy::FixedThreshold(0.25), 256, &mut rng()).unwrap();
        assert_eq!(up.naive_count, 3);

        let up = s.update_markers(&SelectionPolicy::RandomFraction(0.3), 256, &mut rng()).unwrap();
        assert_eq!(up.naive_count, 3);
    }

    #[test]
    fn otsu_marks_low_cluster() {
        let mut s = store_with(&[0.1, 0.9, 0.1, 0.9]);
        let up = s.update_markers(&SelectionPolicy::Otsu, 256, &mut rng()).unwrap();
        assert_eq!(up.naive_count, 2);
        assert!(s.is_naive(0) && s.is_naive(2) && !s.is_naive(1));
        let mut flat = store_with(&[0.3; 5]);
        let up = flat.update_markers(&SelectionPolicy::Otsu, 256, &mut rng()).unwrap();
        assert!(up.degenerate);
        assert_eq!(flat.naive_fraction(), 0.0);
    }

    #[test]
    fn unobserved_samples_stay_unmarked() {
        let mut s = SampleHistory::<f64>::new(12, 0.9).unwrap();
        for i in 0..6 {
            s.record_loss(i, if i < 3 { 0.01 } else { 2.0 }).unwrap();
        }
        s.update_markers(&SelectionPolicy::Otsu, 256, &mut rng()).unwrap();
        assert_eq!(s.naive_count(), 3);
        assert_eq!(s.naive_fraction(), 0.25);
    }

    #[test]
    fn policy_strings_round_trip() {
        for s in ["otsu", "all", "none", "fixed:0.001", "prop:0.25", "random:0.5"] {
            let p: SelectionPolicy = s.parse().unwrap();
            assert_eq!(p.to_string(), s);
        }
        assert!("prop:1.5".parse::<SelectionPolicy>().is_err());
        assert!("median".parse::<SelectionPolicy>().is_err());
        assert!("fixed:abc".parse::<SelectionPolicy>().is_err());
    }
}
