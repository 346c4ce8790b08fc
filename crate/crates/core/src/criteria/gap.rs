//! Gap statistic with uniform reference sets drawn from the bounding box.

use std::io::Write;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{Criterion, CriterionResult, Flag};
use crate::dataset::{BoundingBox, Dataset};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::profile::{build_profile, ProfileOptions, SseProfile};
use crate::rng::{self, stream};

pub const DEFAULT_REFERENCES: usize = 10;

/// `n` uniform points in `bbox`, generated as `lo + u · extent` so that a
/// translated box yields the translated sample. Zero-width axes stay constant.
pub fn reference_sample(bbox: &BoundingBox, n: usize, seed: u64) -> Result<Dataset> {
    let d = bbox.dim();
    let extent = bbox.extent();
    let mut rng = rng::rng_for(seed, &[stream::REFERENCE_DATA]);
    let mut values = Vec::with_capacity(n * d);
    for _ in 0..n {
        for (lo, w) in bbox.lo.iter().zip(&extent) {
            let u: f64 = rng.random();
            values.push(lo + u * w);
        }
    }
    Dataset::from_flat(values, d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapResult {
    pub k_min: usize,
    /// `E[log SSE'_k] - log SSE_k`, `None` where some SSE is zero.
    pub gap: Vec<Option<f64>>,
    /// Standard deviation of `log SSE'_k` inflated by `sqrt(1 + 1/B)`.
    pub sd: Vec<Option<f64>>,
    pub references: usize,
    pub reference_seed: u64,
    pub selected_k: usize,
    pub unstable: bool,
}

impl GapResult {
    pub fn k_max(&self) -> usize {
        self.k_min + self.gap.len() - 1
    }

    pub fn gap_at(&self, k: usize) -> Option<f64> {
        k.checked_sub(self.k_min).and_then(|i| self.gap.get(i)).copied().flatten()
    }

    pub fn sd_at(&self, k: usize) -> Option<f64> {
        k.checked_sub(self.k_min).and_then(|i| self.sd.get(i)).copied().flatten()
    }

    /// The result restricted to `k <= k_max`, with the selection rule re-applied.
    /// Reference profiles truncate exactly, so this equals a run at the smaller range.
    pub fn truncated(&self, k_max: usize) -> Result<GapResult> {
        if k_max < self.k_min || k_max > self.k_max() {
            return Err(Error::InvalidArgument(format!(
                "cannot truncate gap result over [{}, {}] at {k_max}",
                self.k_min,
                self.k_max()
            )));
        }
        let len = k_max - self.k_min + 1;
        let gap = self.gap[..len].to_vec();
        let sd = self.sd[..len].to_vec();
        let rule = one_standard_error_rule(self.k_min, &gap, &sd);
        Ok(GapResult {
            k_min: self.k_min,
            selected_k: rule.unwrap_or(k_max),
            unstable: rule.is_none() || gap.iter().any(Option::is_none),
            gap,
            sd,
            references: self.references,
            reference_seed: self.reference_seed,
        })
    }

    pub fn to_criterion_result(&self) -> CriterionResult {
        CriterionResult::new(Criterion::Gap, self.k_min, self.gap.clone(), self.selected_k)
            .flag(Flag::Unstable, self.unstable)
    }

    /// CSV with columns `k,gap,sd`; undefined values are left empty.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "k,gap,sd")?;
        for (i, (g, s)) in self.gap.iter().zip(&self.sd).enumerate() {
            let cell = |v: &Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{}", self.k_min + i, cell(g), cell(s))?;
        }
        Ok(())
    }
}

/// Smallest k with `Gap_k ≥ Gap_{k+1} - s_{k+1}`; `None` if no k qualifies.
pub fn one_standard_error_rule(k_min: usize, gap: &[Option<f64>], sd: &[Option<f64>]) -> Option<usize> {
    (0..gap.len().saturating_sub(1)).find_map(|i| match (gap[i], gap[i + 1], sd[i + 1]) {
        (Some(g), Some(next), Some(s)) if g >= next - s => Some(k_min + i),
        _ => None,
    })
}

/// Runs the gap statistic with `references` reference sets. Each reference
/// set is clustered with the profile's restart count over the same k range.
pub fn gap_statistic(
    dataset: &Dataset,
    profile: &SseProfile,
    references: usize,
    seed: u64,
    exec: Execution,
) -> Result<GapResult> {
    if references < 2 {
        return Err(Error::InvalidArgument("the gap statistic needs at least 2 reference sets".into()));
    }
    if dataset.n() != profile.n || dataset.d() != profile.d {
        return Err(Error::DimensionMismatch {
            expected: profile.n,
            found: dataset.n(),
        });
    }
    let bbox = dataset.bounding_box();
    let log_refs: Vec<Vec<f64>> = exec.try_map_indexed(references, |b| {
        let b = b as u64;
        let reference = reference_sample(&bbox, dataset.n(), rng::derive_seed(seed, &[b]))?;
        let opts = ProfileOptions::new(profile.k_min, profile.k_max)
            .restarts(profile.restarts)
            .seed(rng::derive_seed(seed, &[stream::REFERENCE_PROFILE, b]))
            .exec(exec);
        let p = build_profile(&reference, &opts)?;
        Ok::<_, Error>(p.sse_values().into_iter().map(f64::ln).collect())
    })?;

    let bf = references as f64;
    let inflate = (1.0 + 1.0 / bf).sqrt();
    let mut gap = Vec::with_capacity(profile.len());
    let mut sd = Vec::with_capacity(profile.len());
    let mut undefined = false;
    for (i, e) in profile.entries.iter().enumerate() {
        let logs: Vec<f64> = log_refs.iter().map(|r| r[i]).collect();
        if e.sse <= 0.0 || logs.iter().any(|v| !v.is_finite()) {
            gap.push(None);
            sd.push(None);
            undefined = true;
            continue;
        }
        let mean = logs.iter().sum::<f64>() / bf;
        let var = logs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / bf;
        gap.push(Some(mean - e.sse.ln()));
        sd.push(Some(var.sqrt() * inflate));
    }
    let rule = one_standard_error_rule(profile.k_min, &gap, &sd);
    Ok(GapResult {
        k_min: profile.k_min,
        selected_k: rule.unwrap_or(profile.k_max),
        unstable: rule.is_none() || undefined,
        gap,
        sd,
        references,
        reference_seed: seed,
    })
}

/// Runs the gap statistic once per seed and flags every run unstable when
/// the selections disagree.
pub fn gap_across_seeds(
    dataset: &Dataset,
    profile: &SseProfile,
    references: usize,
    seeds: &[u64],
    exec: Execution,
) -> Result<Vec<GapResult>> {
    let mut runs = seeds
        .iter()
        .map(|&s| gap_statistic(dataset, profile, references, s, exec))
        .collect::<Result<Vec<_>>>()?;
    mark_seed_instability(&mut runs);
    Ok(runs)
}

/// Flags every run unstable if their selections are not all equal.
pub fn mark_seed_instability(runs: &mut [GapResult]) {
    if runs.windows(2).any(|w| w[0].selected_k != w[1].selected_k) {
        runs.iter_mut().for_each(|r| r.unstable = true);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_sample_respects_box() {
        let ds = Dataset::from_rows(&[[0.0, 0.0], [2.0, 4.0]]).unwrap();
        let s = reference_sample(&ds.bounding_box(), 500, 9).unwrap();
        assert!(s.points().all(|p| (0.0..=2.0).contains(&p[0]) && (0.0..=4.0).contains(&p[1])));
        assert_eq!(s, reference_sample(&ds.bounding_box(), 500, 9).unwrap());

        let unit = BoundingBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let four = reference_sample(&unit, 4, 1).unwrap();
        assert_eq!(four.n(), 4);
        assert_eq!(four, reference_sample(&unit, 4, 1).unwrap());

        let flat = BoundingBox::new(vec![0.0, 3.0], vec![1.0, 3.0]).unwrap();
        let s = reference_sample(&flat, 50, 2).unwrap();
        assert!(s.points().all(|p| p[1] == 3.0));
    }

    #[test]
    fn one_standard_error_rule_uses_next_k() {
        let gap = [Some(0.1), Some(0.5), Some(0.55), Some(0.4)];
        let sd = [Some(0.01), Some(0.01), Some(0.1), Some(0.1)];
        // k=1: 0.1 < 0.5 - 0.01; k=2: 0.5 ≥ 0.55 - 0.1.
        assert_eq!(one_standard_error_rule(1, &gap, &sd), Some(2));
        let rising = [Some(0.1), Some(0.2), Some(0.3)];
        let tiny = [Some(0.0); 3];
        assert_eq!(one_standard_error_rule(1, &rising, &tiny), None);
    }

    #[test]
    fn needs_two_references() {
        let ds = Dataset::from_1d(&[0.0, 1.0, 5.0, 6.0]).unwrap();
        let p = build_profile(&ds, &ProfileOptions::new(1, 2)).unwrap();
        assert!(gap_statistic(&ds, &p, 1, 0, Execution::Sequential).is_err());
        let r = gap_statistic(&ds, &p, 3, 0, Execution::Sequential).unwrap();
        assert_eq!(r, gap_statistic(&ds, &p, 3, 0, Execution::Parallel).unwrap());
        let mut csv = Vec::new();
        r.write_csv(&mut csv).unwrap();
        assert!(String::from_utf8(csv).unwrap().starts_with("k,gap,sd\n1,"));
    }
}
