//! The SSE-over-k profile consumed by every criterion.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::kmeans::{self, ClusteringSolution};
use crate::numeric::squared_distance;

/// Per-k entry of a profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileEntry {
    pub k: usize,
    pub sse: f64,
    pub centers: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assignment: Option<Vec<usize>>,
}

/// Best-of-restarts SSE for each `k` in `[k_min, k_max]`, non-increasing in k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SseProfile {
    pub n: usize,
    pub d: usize,
    pub k_min: usize,
    pub k_max: usize,
    pub restarts: usize,
    pub master_seed: u64,
    pub entries: Vec<ProfileEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProfileOptions {
    pub k_min: usize,
    pub k_max: usize,
    pub restarts: usize,
    pub master_seed: u64,
    pub keep_assignments: bool,
    pub exec: Execution,
}

impl ProfileOptions {
    pub fn new(k_min: usize, k_max: usize) -> Self {
        ProfileOptions {
            k_min,
            k_max,
            restarts: 10,
            master_seed: 0,
            keep_assignments: false,
            exec: Execution::default(),
        }
    }

    pub fn restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }

    pub fn keep_assignments(mut self, keep: bool) -> Self {
        self.keep_assignments = keep;
        self
    }

    pub fn exec(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }
}

/// Index and squared error of the worst-fit point (lowest index on ties).
fn worst_point(dataset: &Dataset, sol: &ClusteringSolution) -> (usize, f64) {
    let mut worst = (0, f64::NEG_INFINITY);
    for (i, p) in dataset.points().enumerate() {
        let err = squared_distance(p, &sol.centers[sol.assignment[i]]);
        if err > worst.1 {
            worst = (i, err);
        }
    }
    worst
}

/// Best-of-restarts solutions for every k in the range, with monotone repair.
///
/// Restarts for all `(k, restart)` pairs run as independent jobs. Afterwards,
/// in increasing k, any `SSE_{k+1} > SSE_k` is patched by one extra Lloyd run
/// seeded from the k-solution's centers plus its worst-fit point; the better
/// of the two (k+1)-solutions is kept. This is a lower-bound patch, not a
/// global-optimality guarantee. Repair for k+1 only looks at k, so a profile
/// truncated at some k is identical to one built with that k as `k_max`.
pub fn build_solutions(dataset: &Dataset, opts: &ProfileOptions) -> Result<Vec<ClusteringSolution>> {
    let n = dataset.n();
    if opts.k_min == 0 || opts.k_min > opts.k_max {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= k_min <= k_max, got [{}, {}]",
            opts.k_min, opts.k_max
        )));
    }
    if opts.k_max > n {
        return Err(Error::KOutOfRange { k: opts.k_max, n });
    }
    if opts.restarts == 0 {
        return Err(Error::InvalidArgument("restarts must be at least 1".into()));
    }
    let ks = opts.k_max - opts.k_min + 1;
    let runs = opts.exec.try_map_indexed(ks * opts.restarts, |job| {
        let k = opts.k_min + job / opts.restarts;
        let r = job % opts.restarts;
        kmeans::single_run(dataset, k, kmeans::restart_seed(opts.master_seed, k, r))
    })?;
    let mut runs = runs.into_iter();
    let mut solutions: Vec<ClusteringSolution> = (0..ks)
        .map(|_| kmeans::pick_best(runs.by_ref().take(opts.restarts).collect()))
        .collect();

    for i in 1..solutions.len() {
        if solutions[i].sse > solutions[i - 1].sse {
            let prev = &solutions[i - 1];
            let (worst, _) = worst_point(dataset, prev);
            let mut init = prev.centers.clone();
            init.push(dataset.point(worst).to_vec());
            let mut patched = kmeans::lloyd(dataset, &init)?;
            patched.seed = prev.seed;
            log::debug!(
                "monotone repair at k = {}: {} -> {}",
                patched.k,
                solutions[i].sse,
                patched.sse
            );
            if patched.sse < solutions[i].sse {
                solutions[i] = patched;
            }
        }
    }
    Ok(solutions)
}

impl SseProfile {
    pub fn from_solutions(
        dataset: &Dataset,
        solutions: &[ClusteringSolution],
        restarts: usize,
        master_seed: u64,
        keep_assignments: bool,
    ) -> Result<Self> {
        let first = solutions
            .first()
            .ok_or_else(|| Error::InvalidArgument("no solutions".into()))?;
        let entries = solutions
            .iter()
            .map(|s| ProfileEntry {
                k: s.k,
                sse: s.sse,
                centers: s.centers.clone(),
                assignment: keep_assignments.then(|| s.assignment.clone()),
            })
            .collect();
        let profile = SseProfile {
            n: dataset.n(),
            d: dataset.d(),
            k_min: first.k,
            k_max: first.k + solutions.len() - 1,
            restarts,
            master_seed,
            entries,
        };
        profile.validate()?;
        Ok(profile)
    }

    /// Builds a profile directly from its SSE sequence (no centers). Handy for
    /// criteria that depend only on `(sse, n, d)`.
    pub fn from_sse(n: usize, d: usize, k_min: usize, sse: &[f64]) -> Result<Self> {
        let entries = sse
            .iter()
            .enumerate()
            .map(|(i, &s)| ProfileEntry {
                k: k_min + i,
                sse: s,
                centers: Vec::new(),
                assignment: None,
            })
            .collect();
        let profile = SseProfile {
            n,
            d,
            k_min,
            k_max: (k_min + sse.len()).saturating_sub(1),
            restarts: 0,
            master_seed: 0,
            entries,
        };
        profile.validate()?;
        Ok(profile)
    }

    fn validate(&self) -> Result<()> {
        if self.entries.is_empty() || self.k_min == 0 {
            return Err(Error::InvalidArgument("profile needs k_min >= 1 and at least one entry".into()));
        }
        if self.k_max != self.k_min + self.entries.len() - 1 {
            return Err(Error::InvalidArgument("profile k range does not match its entries".into()));
        }
        for (i, e) in self.entries.iter().enumerate() {
            if e.k != self.k_min + i {
                return Err(Error::InvalidArgument(format!("profile entry {i} has k = {}", e.k)));
            }
            if !(e.sse.is_finite() && e.sse >= 0.0) {
                return Err(Error::InvalidArgument(format!("SSE at k = {} is not finite and >= 0", e.k)));
            }
            if e.k > self.n {
                return Err(Error::KOutOfRange { k: e.k, n: self.n });
            }
            if let Some(a) = &e.assignment {
                if a.len() != self.n || a.iter().any(|&c| c >= e.k) {
                    return Err(Error::InvalidArgument(format!("bad assignment at k = {}", e.k)));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ks(&self) -> std::ops::RangeInclusive<usize> {
        self.k_min..=self.k_max
    }

    pub fn sse_values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.sse).collect()
    }

    pub fn entry(&self, k: usize) -> Option<&ProfileEntry> {
        k.checked_sub(self.k_min).and_then(|i| self.entries.get(i))
    }

    pub fn sse(&self, k: usize) -> Option<f64> {
        self.entry(k).map(|e| e.sse)
    }

    pub fn has_assignments(&self) -> bool {
        self.entries.iter().all(|e| e.assignment.is_some())
    }

    pub fn is_monotone(&self) -> bool {
        self.entries.windows(2).all(|w| w[1].sse <= w[0].sse)
    }

    /// The sub-profile with `k <= k_max`.
    pub fn truncated(&self, k_max: usize) -> Result<SseProfile> {
        if k_max < self.k_min || k_max > self.k_max {
            return Err(Error::InvalidArgument(format!(
                "cannot truncate [{}, {}] at {k_max}",
                self.k_min, self.k_max
            )));
        }
        let mut out = self.clone();
        out.entries.truncate(k_max - self.k_min + 1);
        out.k_max = k_max;
        Ok(out)
    }

    /// Drops retained assignments.
    pub fn without_assignments(&self) -> SseProfile {
        let mut out = self.clone();
        out.entries.iter_mut().for_each(|e| e.assignment = None);
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<SseProfile> {
        let profile: SseProfile = serde_json::from_str(text)?;
        profile.validate()?;
        Ok(profile)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<SseProfile> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Profile over `[k_min, k_max]` (see [`build_solutions`]).
pub fn build_profile(dataset: &Dataset, opts: &ProfileOptions) -> Result<SseProfile> {
    let solutions = build_solutions(dataset, opts)?;
    SseProfile::from_solutions(
        dataset,
        &solutions,
        opts.restarts,
        opts.master_seed,
        opts.keep_assignments,
    )
}

/// Root-mean-squared deviation `sqrt(SSE_k / (N - k))`.
///
/// At `k = N` this is 0 when the SSE is 0 and an error otherwise.
pub fn rmsd(profile: &SseProfile, k: usize) -> Result<f64> {
    let sse = profile.sse(k).ok_or(Error::KOutOfRange { k, n: profile.n })?;
    rmsd_of(sse, profile.n, k)
}

pub fn rmsd_of(sse: f64, n: usize, k: usize) -> Result<f64> {
    if k > n {
        return Err(Error::KOutOfRange { k, n });
    }
    if k == n {
        return if sse == 0.0 {
            Ok(0.0)
        } else {
            Err(Error::undefined("rmsd", "k = N with non-zero SSE"))
        };
    }
    Ok((sse / (n - k) as f64).sqrt())
}
