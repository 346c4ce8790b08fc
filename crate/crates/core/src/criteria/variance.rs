//! Variance-based criteria: the reduction-ratio estimator, VRC
//! (Calinski–Harabasz), Marriott, Krzanowski–Lai and Pham et al.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{select, Criterion, CriterionResult, Direction, Flag};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::profile::SseProfile;

fn require_k1(name: &'static str, profile: &SseProfile) -> Result<f64> {
    if profile.k_min != 1 {
        return Err(Error::undefined(name, "profile must start at k = 1"));
    }
    Ok(profile.entries[0].sse)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionPoint {
    pub k: usize,
    pub sse: f64,
    /// Expected SSE given the best solution at smaller k.
    pub sse_hat: f64,
    /// `sqrt(sse / sse_hat)`; below 1 means better than expected.
    pub ratio: f64,
}

/// Observed versus expected standard deviation for k ≥ 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionCurve {
    pub n: usize,
    pub points: Vec<ReductionPoint>,
    pub threshold: f64,
    /// The curve stopped early because the expected SSE reached zero.
    pub truncated: bool,
}

/// Computes, for every k ≥ 2 in the profile,
///
/// ```text
/// sse_hat_k = (N - k) / k · min_{j < k} j / (N - j) · SSE_j
/// ratio_k   = sqrt(SSE_k / sse_hat_k)
/// ```
///
/// The running minimum compares each k with the best solution so far. Once
/// `sse_hat_k` hits zero the curve is truncated.
pub fn reduction_curve(profile: &SseProfile) -> Result<ReductionCurve> {
    require_k1("reduction", profile)?;
    let n = profile.n as f64;
    let sse = profile.sse_values();
    let mut best = f64::INFINITY;
    let mut points = Vec::new();
    let mut truncated = false;
    for (i, &s) in sse.iter().enumerate() {
        let k = i + 1;
        if k >= 2 {
            let sse_hat = (n - k as f64) / k as f64 * best;
            if sse_hat.is_nan() || sse_hat <= 0.0 {
                truncated = true;
                break;
            }
            points.push(ReductionPoint {
                k,
                sse: s,
                sse_hat,
                ratio: (s / sse_hat).sqrt(),
            });
        }
        if (k as f64) < n {
            best = best.min(k as f64 / (n - k as f64) * s);
        }
    }
    Ok(ReductionCurve {
        n: profile.n,
        points,
        threshold: 1.0,
        truncated,
    })
}

impl ReductionCurve {
    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn ratio(&self, k: usize) -> Option<f64> {
        self.points.iter().find(|p| p.k == k).map(|p| p.ratio)
    }

    pub fn min_ratio(&self) -> Option<f64> {
        self.points.iter().map(|p| p.ratio).reduce(f64::min)
    }

    fn scores(&self) -> Vec<Option<f64>> {
        let k_max = self.points.last().map_or(1, |p| p.k);
        let mut scores = vec![None; k_max];
        for p in &self.points {
            scores[p.k - 1] = Some(p.ratio);
        }
        scores
    }

    /// CSV with columns `k,sse,sse_hat,ratio`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "k,sse,sse_hat,ratio")?;
        for p in &self.points {
            writeln!(out, "{},{},{},{}", p.k, p.sse, p.sse_hat, p.ratio)?;
        }
        Ok(())
    }
}

/// The k with the smallest ratio. If no ratio is below the threshold, k = 1
/// is selected and the result flagged unclustered.
pub fn select_max_reduction(curve: &ReductionCurve) -> Result<CriterionResult> {
    let scores = curve.scores();
    if curve.points.is_empty() {
        return Err(Error::undefined("max_reduction", "empty reduction curve"));
    }
    let (k, _) = select(1, &scores, Direction::Min).expect("non-empty");
    let unclustered = curve.min_ratio().is_some_and(|m| m >= curve.threshold);
    let selected = if unclustered { 1 } else { k };
    Ok(CriterionResult::new(Criterion::MaxReduction, 1, scores, selected)
        .flag(Flag::Unclustered, unclustered)
        .flag(Flag::Unstable, curve.truncated))
}

/// The largest k whose ratio is below the threshold; k = 1 (unclustered) if none is.
pub fn select_last_reduction(curve: &ReductionCurve) -> Result<CriterionResult> {
    let scores = curve.scores();
    if curve.points.is_empty() {
        return Err(Error::undefined("last_reduction", "empty reduction curve"));
    }
    let last = curve.points.iter().rev().find(|p| p.ratio < curve.threshold).map(|p| p.k);
    Ok(CriterionResult::new(Criterion::LastReduction, 1, scores, last.unwrap_or(1))
        .flag(Flag::Unclustered, last.is_none())
        .flag(Flag::Unstable, curve.truncated))
}

/// Variance ratio criterion `((SSE_1 - SSE_k) / (k - 1)) / (SSE_k / (N - k))`,
/// maximized over k ≥ 2. The range ends before the first zero SSE.
pub fn vrc(profile: &SseProfile) -> Result<CriterionResult> {
    let sse1 = require_k1("vrc", profile)?;
    let n = profile.n as f64;
    let sse = profile.sse_values();
    let mut scores = vec![None; sse.len()];
    for (i, &s) in sse.iter().enumerate().skip(1) {
        if s == 0.0 {
            break;
        }
        let k = (i + 1) as f64;
        scores[i] = Some(((sse1 - s) / (k - 1.0)) / (s / (n - k)));
    }
    let (k, _) = select(1, &scores, Direction::Max)
        .ok_or_else(|| Error::undefined("vrc", "needs some k >= 2 with non-zero SSE"))?;
    let defined: Vec<f64> = scores.iter().flatten().copied().collect();
    let flat = defined.iter().all(|&v| v == defined[0]) && defined.len() > 1;
    let unclustered = flat || defined.iter().all(|&v| v <= 0.0);
    Ok(CriterionResult::new(Criterion::Vrc, 1, scores, k).flag(Flag::Unclustered, unclustered))
}

/// Pooled within-cluster scatter matrix `Σ_clusters Σ (x - c)(x - c)^T`,
/// with `c` the centroid of each cluster's members.
pub fn pooled_scatter(dataset: &Dataset, assignment: &[usize], k: usize) -> DMatrix<f64> {
    let d = dataset.d();
    let mut means = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in dataset.points().zip(assignment) {
        counts[a] += 1;
        for (m, v) in means[a].iter_mut().zip(p) {
            *m += v;
        }
    }
    for (m, &c) in means.iter_mut().zip(&counts) {
        if c > 0 {
            m.iter_mut().for_each(|v| *v /= c as f64);
        }
    }
    let mut w = DMatrix::zeros(d, d);
    let mut diff = vec![0.0; d];
    for (p, &a) in dataset.points().zip(assignment) {
        for j in 0..d {
            diff[j] = p[j] - means[a][j];
        }
        for r in 0..d {
            for c in r..d {
                w[(r, c)] += diff[r] * diff[c];
            }
        }
    }
    for r in 0..d {
        for c in 0..r {
            w[(r, c)] = w[(c, r)];
        }
    }
    w
}

/// `ln |W|` via Cholesky; `None` when W is singular.
pub fn log_det(w: &DMatrix<f64>) -> Option<f64> {
    let chol = w.clone().cholesky()?;
    let l = chol.l();
    let logdet = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
    logdet.is_finite().then_some(logdet)
}

/// Marriott: `M_k = k^2 |W_k|`, minimized over k ≥ 2.
///
/// Flagged unclustered when no k beats the single-cluster value `|W_1|`.
/// Comparisons run on `ln M_k`, so tiny determinants do not underflow.
pub fn marriott(dataset: &Dataset, profile: &SseProfile) -> Result<CriterionResult> {
    let w1 = pooled_scatter(dataset, &vec![0; dataset.n()], 1);
    let log_w1 = log_det(&w1).ok_or(Error::ZeroGeneralizedVariance)?;

    let mut logs = vec![None; profile.len()];
    let mut truncated = false;
    for (i, e) in profile.entries.iter().enumerate() {
        let assignment = e.assignment.as_ref().ok_or(Error::MissingAssignments(e.k))?;
        if e.k == 1 {
            logs[i] = Some(log_w1);
            continue;
        }
        match log_det(&pooled_scatter(dataset, assignment, e.k)) {
            Some(ld) => logs[i] = Some(2.0 * (e.k as f64).ln() + ld),
            None => {
                truncated = true;
                break;
            }
        }
    }
    let start = if profile.k_min == 1 && profile.len() > 1 { 1 } else { 0 };
    let mut candidates = logs.clone();
    candidates[..start].iter_mut().for_each(|v| *v = None);
    let (k, _) = select(profile.k_min, &candidates, Direction::Min)
        .ok_or_else(|| Error::undefined("marriott", "no k with a non-singular scatter matrix"))?;
    let best = candidates[k - profile.k_min].expect("selected score");
    let scores = logs.iter().map(|l| l.map(f64::exp)).collect();
    Ok(CriterionResult::new(Criterion::Marriott, profile.k_min, scores, k)
        .flag(Flag::Unclustered, best >= log_w1)
        .flag(Flag::Unstable, truncated))
}

/// Krzanowski–Lai: `Diff_k = (k-1)^(2/d) SSE_{k-1} - k^(2/d) SSE_k` and
/// `KL(k) = |Diff_k / Diff_{k+1}|`, maximized. Zero `Diff_{k+1}` is skipped
/// and flags the result unstable.
#[allow(clippy::needless_range_loop)]
pub fn krzanowski_lai(profile: &SseProfile, d: usize) -> Result<CriterionResult> {
    let sse = profile.sse_values();
    let n = sse.len();
    if n < 3 {
        return Err(Error::undefined("kl", "needs at least 3 profile points"));
    }
    let exponent = 2.0 / d as f64;
    let diff = |i: usize| {
        let k = (profile.k_min + i) as f64;
        (k - 1.0).powf(exponent) * sse[i - 1] - k.powf(exponent) * sse[i]
    };
    let mut scores = vec![None; n];
    let mut skipped = false;
    for i in 1..n - 1 {
        let next = diff(i + 1);
        if next == 0.0 {
            skipped = true;
            continue;
        }
        scores[i] = Some((diff(i) / next).abs());
    }
    let result = select(profile.k_min, &scores, Direction::Max);
    let (k, unstable) = match result {
        Some((k, _)) => (k, skipped),
        None => (profile.k_min + 1, true),
    };
    Ok(CriterionResult::new(Criterion::KrzanowskiLai, profile.k_min, scores, k).flag(Flag::Unstable, unstable))
}

/// Pham weights: `α_2 = 1 - 3/(4d)`, `α_k = 5/6 α_{k-1} + 1/6`.
pub fn pham_alpha(k: usize, d: usize) -> f64 {
    assert!(k >= 2, "alpha is defined for k >= 2");
    let mut alpha = 1.0 - 3.0 / (4.0 * d as f64);
    for _ in 2..k {
        alpha = 5.0 / 6.0 * alpha + 1.0 / 6.0;
    }
    alpha
}

/// Pham et al.: `f(k) = SSE_k / (α_k SSE_{k-1})` for k ≥ 2, minimized.
/// Flagged unclustered when the minimum is at or above `threshold`.
pub fn pham(profile: &SseProfile, d: usize, threshold: f64) -> Result<CriterionResult> {
    let sse = profile.sse_values();
    let mut scores = vec![None; sse.len()];
    for i in 1..sse.len() {
        let k = profile.k_min + i;
        if k < 2 {
            continue;
        }
        if sse[i - 1] == 0.0 {
            return Err(Error::undefined("pham", format!("SSE is zero at k = {}", k - 1)));
        }
        scores[i] = Some(sse[i] / (pham_alpha(k, d) * sse[i - 1]));
    }
    let (k, _) = select(profile.k_min, &scores, Direction::Min)
        .ok_or_else(|| Error::undefined("pham", "needs two consecutive k >= 1"))?;
    let min = scores[k - profile.k_min].expect("selected score");
    Ok(CriterionResult::new(Criterion::Pham, profile.k_min, scores, k).flag(Flag::Unclustered, min >= threshold))
}

#[cfg(test)]
mod tests {
    use super::*;

    const HAND: [f64; 6] = [1000.0, 500.0, 100.0, 90.0, 82.0, 75.0];

    fn hand() -> SseProfile {
        SseProfile::from_sse(100, 2, 1, &HAND).unwrap()
    }

    #[test]
    fn reduction_hand_values() {
        let c = reduction_curve(&hand()).unwrap();
        // Direct evaluation of the estimator.
        let r2 = (500.0f64 / (98.0 / 2.0 * 1000.0 / 99.0)).sqrt();
        let r3 = (100.0f64 / (97.0 / 3.0 * 1000.0 / 99.0)).sqrt();
        let r4 = (90.0f64 / (96.0 / 4.0 * 300.0 / 97.0)).sqrt();
        assert!((c.ratio(2).unwrap() - r2).abs() < 1e-12);
        assert!((c.ratio(3).unwrap() - r3).abs() < 1e-12);
        assert!((c.ratio(4).unwrap() - r4).abs() < 1e-12);
        assert!((r2 - 1.0051).abs() < 1e-4 && (r3 - 0.5533).abs() < 1e-4 && (r4 - 1.101).abs() < 1e-3);
        assert_eq!(select_max_reduction(&c).unwrap().selected_k, 3);
        assert_eq!(select_last_reduction(&c).unwrap().selected_k, 3);
    }

    #[test]
    fn constant_sse_never_reduces() {
        let p = SseProfile::from_sse(50, 2, 1, &[10.0; 6]).unwrap();
        let c = reduction_curve(&p).unwrap();
        let expected = (10.0f64 / (48.0 / 2.0 * 10.0 / 49.0)).sqrt();
        assert!((c.ratio(2).unwrap() - expected).abs() < 1e-12);
        assert!(c.points.iter().all(|p| p.ratio > 1.0));
        let max = select_max_reduction(&c).unwrap();
        let last = select_last_reduction(&c).unwrap();
        assert_eq!((max.selected_k, last.selected_k), (1, 1));
        assert!(max.has(Flag::Unclustered) && last.has(Flag::Unclustered));
    }

    #[test]
    fn reduction_truncates_at_k_equals_n() {
        let p = SseProfile::from_sse(4, 1, 1, &[101.0, 1.0, 0.5, 0.0]).unwrap();
        let c = reduction_curve(&p).unwrap();
        assert!(c.truncated);
        assert_eq!(c.points.last().unwrap().k, 3);
        assert!(reduction_curve(&SseProfile::from_sse(100, 2, 2, &HAND[1..]).unwrap()).is_err());
    }

    #[test]
    fn vrc_examples() {
        let r = vrc(&hand()).unwrap();
        assert_eq!(r.selected_k, 3);
        assert!((r.score(3).unwrap() - 436.5).abs() < 1e-9);
        let flat = vrc(&SseProfile::from_sse(100, 2, 1, &[10.0; 5]).unwrap()).unwrap();
        assert_eq!(flat.selected_k, 2);
        assert!(flat.has(Flag::Unclustered));
    }

    #[test]
    fn kl_examples() {
        let r = krzanowski_lai(&hand(), 2).unwrap();
        assert_eq!(r.selected_k, 3);
        assert!((r.score(3).unwrap() - 700.0 / 60.0).abs() < 1e-9);
        assert_eq!(r.score(2), Some(0.0));

        let inv: Vec<f64> = (1..=6).map(|k| 720.0 / k as f64).collect();
        let r = krzanowski_lai(&SseProfile::from_sse(100, 2, 1, &inv).unwrap(), 2).unwrap();
        assert!(r.scores.iter().all(Option::is_none));
        assert!(r.has(Flag::Unstable));
        assert!(krzanowski_lai(&SseProfile::from_sse(100, 2, 1, &HAND[..2]).unwrap(), 2).is_err());
    }

    #[test]
    fn pham_examples() {
        assert!((pham_alpha(2, 2) - 0.625).abs() < 1e-15);
        assert!((pham_alpha(3, 2) - 0.6875).abs() < 1e-15);
        assert!((pham_alpha(4, 2) - (5.0 / 6.0 * 0.6875 + 1.0 / 6.0)).abs() < 1e-15);
        assert!((pham_alpha(4, 2) - 0.7396).abs() < 1e-4);
        let r = pham(&hand(), 2, 1.0).unwrap();
        assert_eq!(r.selected_k, 3);
        assert!((r.score(3).unwrap() - 100.0 / (0.6875 * 500.0)).abs() < 1e-12);
        assert!((r.score(3).unwrap() - 0.291).abs() < 1e-3);
        assert!(!r.has(Flag::Unclustered));
    }

    #[test]
    fn marriott_one_dimensional() {
        let ds = Dataset::from_1d(&[0.0, 0.1, 10.0, 10.1]).unwrap();
        let p = crate::profile::build_profile(
            &ds,
            &crate::profile::ProfileOptions::new(1, 2).keep_assignments(true),
        )
        .unwrap();
        let r = marriott(&ds, &p).unwrap();
        assert_eq!(r.selected_k, 2);
        assert!((r.score(1).unwrap() - 100.01).abs() < 1e-9);
        assert!((r.score(2).unwrap() - 0.04).abs() < 1e-9);
        assert!(!r.has(Flag::Unclustered));
    }

    #[test]
    fn marriott_needs_variance_and_assignments() {
        let ds = Dataset::from_rows(&[[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]]).unwrap();
        let p = crate::profile::build_profile(
            &ds,
            &crate::profile::ProfileOptions::new(1, 2).keep_assignments(true),
        )
        .unwrap();
        assert!(matches!(marriott(&ds, &p), Err(Error::ZeroGeneralizedVariance)));
        let ds = Dataset::from_1d(&[0.0, 1.0, 5.0]).unwrap();
        let p = crate::profile::build_profile(&ds, &crate::profile::ProfileOptions::new(1, 2)).unwrap();
        assert!(matches!(marriott(&ds, &p), Err(Error::MissingAssignments(1))));
    }
}
