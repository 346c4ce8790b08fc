//! Information criteria over a spherical, shared-variance Gaussian mixture
//! fitted by the k-means solution of each k.
//!
//! Two likelihoods are provided: the one used by X-means (Pelleg & Moore),
//! and the corrected derivation of Foglia & Hancock. AIC shares the
//! corrected likelihood with a smaller penalty.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{select, Criterion, CriterionResult, Direction, Flag};
use crate::error::{Error, Result};
use crate::kmeans::cluster_sizes;
use crate::profile::SseProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BicVariant {
    Original,
    Fixed,
    Aic,
}

impl BicVariant {
    fn criterion(self) -> Criterion {
        match self {
            BicVariant::Original => Criterion::Bic,
            BicVariant::Fixed => Criterion::BicFixed,
            BicVariant::Aic => Criterion::Aic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BicScore {
    pub k: usize,
    pub log_likelihood: f64,
    pub penalty: f64,
    pub bic: f64,
}

/// Free parameters: k - 1 mixing weights, k·d center coordinates, one variance.
pub fn free_parameters(k: usize, d: usize) -> usize {
    (k - 1) + k * d + 1
}

fn n_log_n(n: f64) -> f64 {
    if n > 0.0 {
        n * n.ln()
    } else {
        0.0
    }
}

/// Log-likelihood of one k-means solution. `None` when the variance
/// estimate is zero or undefined.
pub fn log_likelihood(sse: f64, sizes: &[usize], d: usize, variant: BicVariant) -> Option<f64> {
    let n: usize = sizes.iter().sum();
    let k = sizes.len();
    if n <= k {
        return None;
    }
    let (nf, kf, df) = (n as f64, k as f64, d as f64);
    // Σ n_i log(n_i / N): the mixing-weight term, common to both sources.
    let mixing: f64 = sizes.iter().map(|&ni| n_log_n(ni as f64) - ni as f64 * nf.ln()).sum();
    match variant {
        BicVariant::Original => {
            // X-means: σ² = SSE / (N - k), without the dimensionality.
            let var = sse / (nf - kf);
            if var.is_nan() || var <= 0.0 {
                return None;
            }
            // Per cluster: -n_i/2 log 2π - n_i d/2 log σ² - (n_i - k)/2.
            // The last term sums to -(N - k²)/2, which rewards large k.
            let per_cluster: f64 = sizes
                .iter()
                .map(|&ni| {
                    let ni = ni as f64;
                    -ni / 2.0 * (2.0 * PI).ln() - ni * df / 2.0 * var.ln() - (ni - kf) / 2.0
                })
                .sum();
            Some(mixing + per_cluster)
        }
        BicVariant::Fixed | BicVariant::Aic => {
            // Foglia & Hancock: σ² = SSE / (d (N - k)), the per-coordinate MLE.
            let var = sse / (df * (nf - kf));
            if var.is_nan() || var <= 0.0 {
                return None;
            }
            // d-dimensional density: -N d/2 log(2π σ²) - SSE / (2σ²),
            // where SSE / (2σ²) = d (N - k) / 2.
            Some(mixing - nf * df / 2.0 * (2.0 * PI * var).ln() - df * (nf - kf) / 2.0)
        }
    }
}

pub fn penalty(k: usize, n: usize, d: usize, variant: BicVariant) -> f64 {
    let p = free_parameters(k, d) as f64;
    match variant {
        BicVariant::Aic => p,
        _ => p / 2.0 * (n as f64).ln(),
    }
}

/// Per-k scores up to the first k whose variance estimate is zero.
/// The second value is that k, if the profile reaches one.
pub fn bic_scores(profile: &SseProfile, variant: BicVariant) -> Result<(Vec<BicScore>, Option<usize>)> {
    let mut scores = Vec::new();
    for e in &profile.entries {
        let assignment = e.assignment.as_ref().ok_or(Error::MissingAssignments(e.k))?;
        let sizes = cluster_sizes(assignment, e.k);
        match log_likelihood(e.sse, &sizes, profile.d, variant) {
            Some(l) => {
                let penalty = penalty(e.k, profile.n, profile.d, variant);
                scores.push(BicScore {
                    k: e.k,
                    log_likelihood: l,
                    penalty,
                    bic: l - penalty,
                });
            }
            None => return Ok((scores, Some(e.k))),
        }
    }
    Ok((scores, None))
}

/// Maximizes BIC (or AIC) over the profile.
///
/// A k with zero error fits perfectly and has unbounded likelihood: the
/// range ends there, that k is selected, and the result is flagged unstable.
pub fn bic(profile: &SseProfile, variant: BicVariant) -> Result<CriterionResult> {
    let (scores, zero_at) = bic_scores(profile, variant)?;
    let mut curve = vec![None; profile.len()];
    for s in &scores {
        curve[s.k - profile.k_min] = Some(s.bic);
    }
    let criterion = variant.criterion();
    if let Some(k) = zero_at {
        return Ok(CriterionResult::new(criterion, profile.k_min, curve, k).flag(Flag::Unstable, true));
    }
    let (k, _) = select(profile.k_min, &curve, Direction::Max)
        .ok_or_else(|| Error::undefined(criterion.name(), "no k with a defined likelihood"))?;
    Ok(CriterionResult::new(criterion, profile.k_min, curve, k))
}
