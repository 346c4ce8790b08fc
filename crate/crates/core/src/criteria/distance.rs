//! Distance-based indices evaluated on the retained assignment of each k.

use serde::{Deserialize, Serialize};

use super::{select, Criterion, CriterionResult, Direction, Flag};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::kmeans::cluster_sizes;
use crate::numeric::{compensated_sum, distance, squared_distance};
use crate::profile::SseProfile;
use crate::rng::{self, stream};

/// Euclidean distances between the rows of a dataset, either stored as a
/// condensed upper triangle or recomputed on each access. Both forms call
/// the same distance kernel, so they agree bitwise.
#[derive(Debug, Clone)]
pub struct PairwiseDistanceView<'a> {
    data: &'a Dataset,
    condensed: Option<Vec<f64>>,
}

impl<'a> PairwiseDistanceView<'a> {
    pub fn on_demand(data: &'a Dataset) -> Self {
        PairwiseDistanceView { data, condensed: None }
    }

    pub fn materialized(data: &'a Dataset, exec: Execution) -> Self {
        let n = data.n();
        let rows = exec.map_indexed(n, |i| {
            let p = data.point(i);
            (i + 1..n).map(|j| distance(p, data.point(j))).collect::<Vec<f64>>()
        });
        PairwiseDistanceView {
            data,
            condensed: Some(rows.concat()),
        }
    }

    pub fn n(&self) -> usize {
        self.data.n()
    }

    pub fn dataset(&self) -> &'a Dataset {
        self.data
    }

    pub fn is_materialized(&self) -> bool {
        self.condensed.is_some()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        match &self.condensed {
            Some(c) => {
                let (a, b) = if i < j { (i, j) } else { (j, i) };
                let n = self.n();
                c[a * (2 * n - a - 1) / 2 + (b - a - 1)]
            }
            None => distance(self.data.point(i), self.data.point(j)),
        }
    }
}

fn infer_k(assignment: &[usize]) -> usize {
    assignment.iter().max().map_or(0, |m| m + 1)
}

fn require_two_clusters(name: &'static str, sizes: &[usize]) -> Result<()> {
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(Error::undefined(name, "needs at least two non-empty clusters"));
    }
    Ok(())
}

fn check_len(view_n: usize, assignment: &[usize]) -> Result<()> {
    if assignment.len() != view_n {
        return Err(Error::DimensionMismatch {
            expected: view_n,
            found: assignment.len(),
        });
    }
    Ok(())
}

/// Smallest cross-cluster point distance over the largest cluster diameter.
pub fn dunn(view: &PairwiseDistanceView, assignment: &[usize], exec: Execution) -> Result<f64> {
    let n = view.n();
    check_len(n, assignment)?;
    require_two_clusters("dunn", &cluster_sizes(assignment, infer_k(assignment)))?;
    let rows = exec.map_indexed(n, |i| {
        let mut separation = f64::INFINITY;
        let mut diameter = 0.0f64;
        for j in i + 1..n {
            let dist = view.get(i, j);
            if assignment[i] == assignment[j] {
                diameter = diameter.max(dist);
            } else {
                separation = separation.min(dist);
            }
        }
        (separation, diameter)
    });
    let (separation, diameter) = rows
        .into_iter()
        .fold((f64::INFINITY, 0.0f64), |(s, d), (rs, rd)| (s.min(rs), d.max(rd)));
    if diameter <= 0.0 {
        return Err(Error::UndefinedDiameter);
    }
    Ok(separation / diameter)
}

/// `(1/k) Σ_i max_{j≠i} (S_i + S_j) / M_ij` with RMS radii `S_i` and center
/// distances `M_ij`. Empty clusters are ignored.
pub fn davies_bouldin(dataset: &Dataset, assignment: &[usize], centers: &[Vec<f64>]) -> Result<f64> {
    check_len(dataset.n(), assignment)?;
    let k = centers.len();
    let sizes = cluster_sizes(assignment, k);
    require_two_clusters("db", &sizes)?;
    let mut sse = vec![0.0; k];
    for (p, &a) in dataset.points().zip(assignment) {
        sse[a] += squared_distance(p, &centers[a]);
    }
    let live: Vec<usize> = (0..k).filter(|&i| sizes[i] > 0).collect();
    let radius: Vec<f64> = (0..k)
        .map(|i| if sizes[i] > 0 { (sse[i] / sizes[i] as f64).sqrt() } else { 0.0 })
        .collect();
    let mut worst = Vec::with_capacity(live.len());
    for &i in &live {
        let mut w = f64::NEG_INFINITY;
        for &j in &live {
            if i == j {
                continue;
            }
            let m = distance(&centers[i], &centers[j]);
            if m <= 0.0 {
                return Err(Error::CoincidentCenters(i.min(j), i.max(j)));
            }
            w = w.max((radius[i] + radius[j]) / m);
        }
        worst.push(w);
    }
    Ok(compensated_sum(worst.iter().copied()) / live.len() as f64)
}

fn combine(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m > 0.0 {
        (b - a) / m
    } else {
        0.0
    }
}

/// Average silhouette width. Singletons score 0.
pub fn silhouette(view: &PairwiseDistanceView, assignment: &[usize], exec: Execution) -> Result<f64> {
    let n = view.n();
    check_len(n, assignment)?;
    let k = infer_k(assignment);
    let sizes = cluster_sizes(assignment, k);
    require_two_clusters("silhouette", &sizes)?;
    let s = exec.map_indexed(n, |i| {
        let own = assignment[i];
        if sizes[own] == 1 {
            return 0.0;
        }
        let mut sums = vec![0.0; k];
        for j in 0..n {
            sums[assignment[j]] += view.get(i, j);
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        combine(a, b)
    });
    Ok(compensated_sum(s) / n as f64)
}

/// Silhouette with distances to cluster centers in place of mean distances.
pub fn simplified_silhouette(dataset: &Dataset, assignment: &[usize], centers: &[Vec<f64>]) -> Result<f64> {
    check_len(dataset.n(), assignment)?;
    let k = centers.len();
    let sizes = cluster_sizes(assignment, k);
    require_two_clusters("simplified_silhouette", &sizes)?;
    let s = dataset.points().zip(assignment).map(|(p, &own)| {
        if sizes[own] == 1 {
            return 0.0;
        }
        let a = distance(p, &centers[own]);
        let b = (0..k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| distance(p, &centers[c]))
            .fold(f64::INFINITY, f64::min);
        combine(a, b)
    });
    Ok(compensated_sum(s) / dataset.n() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceIndex {
    Dunn,
    DaviesBouldin,
    Silhouette,
    SimplifiedSilhouette,
}

impl DistanceIndex {
    pub fn criterion(self) -> Criterion {
        match self {
            DistanceIndex::Dunn => Criterion::Dunn,
            DistanceIndex::DaviesBouldin => Criterion::DaviesBouldin,
            DistanceIndex::Silhouette => Criterion::Silhouette,
            DistanceIndex::SimplifiedSilhouette => Criterion::SimplifiedSilhouette,
        }
    }

    pub fn from_criterion(c: Criterion) -> Option<Self> {
        match c {
            Criterion::Dunn => Some(DistanceIndex::Dunn),
            Criterion::DaviesBouldin => Some(DistanceIndex::DaviesBouldin),
            Criterion::Silhouette => Some(DistanceIndex::Silhouette),
            Criterion::SimplifiedSilhouette => Some(DistanceIndex::SimplifiedSilhouette),
            _ => None,
        }
    }

    fn direction(self) -> Direction {
        match self {
            DistanceIndex::DaviesBouldin => Direction::Min,
            _ => Direction::Max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepOptions {
    pub exec: Execution,
    /// Silhouette refuses datasets larger than this...
    pub silhouette_max_n: usize,
    /// ...unless a seed for a uniform subsample of `silhouette_max_n` points is given.
    pub subsample_seed: Option<u64>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            exec: Execution::default(),
            silhouette_max_n: 20_000,
            subsample_seed: None,
        }
    }
}

fn subsample_indices(n: usize, size: usize, seed: u64) -> Vec<usize> {
    let mut rng = rng::rng_for(seed, &[stream::SUBSAMPLE]);
    let mut idx: Vec<usize> = rand::seq::index::sample(&mut rng, n, size).into_vec();
    idx.sort_unstable();
    idx
}

fn is_degenerate(e: &Error) -> bool {
    matches!(
        e,
        Error::Undefined { .. } | Error::UndefinedDiameter | Error::CoincidentCenters(..)
    )
}

/// Evaluates one index for every k ≥ 2 of the profile and selects the best.
///
/// A k where the index is undefined (zero diameters, coincident centers)
/// gets no score and flags the result unstable.
pub fn sweep_distance_criterion(
    view: &PairwiseDistanceView,
    profile: &SseProfile,
    which: DistanceIndex,
    opts: &SweepOptions,
) -> Result<CriterionResult> {
    let data = view.dataset();
    if data.n() != profile.n || data.d() != profile.d {
        return Err(Error::DimensionMismatch {
            expected: profile.n,
            found: data.n(),
        });
    }
    for e in &profile.entries {
        if e.k >= 2 && e.assignment.is_none() {
            return Err(Error::MissingAssignments(e.k));
        }
    }

    let subset = if which == DistanceIndex::Silhouette && data.n() > opts.silhouette_max_n {
        let seed = opts.subsample_seed.ok_or(Error::TooLarge {
            n: data.n(),
            max_n: opts.silhouette_max_n,
        })?;
        let idx = subsample_indices(data.n(), opts.silhouette_max_n, seed);
        Some((data.select(&idx)?, idx))
    } else {
        None
    };
    let sub_view = subset.as_ref().map(|(d, _)| PairwiseDistanceView::on_demand(d));

    let evaluate = |i: usize| -> Result<Option<f64>> {
        let e = &profile.entries[i];
        if e.k < 2 {
            return Ok(None);
        }
        let assignment = e.assignment.as_deref().expect("checked above");
        let value = match which {
            DistanceIndex::Dunn => dunn(view, assignment, opts.exec),
            DistanceIndex::DaviesBouldin => davies_bouldin(data, assignment, &e.centers),
            DistanceIndex::SimplifiedSilhouette => simplified_silhouette(data, assignment, &e.centers),
            DistanceIndex::Silhouette => match (&subset, &sub_view) {
                (Some((_, idx)), Some(sv)) => {
                    let sub: Vec<usize> = idx.iter().map(|&j| assignment[j]).collect();
                    silhouette(sv, &sub, opts.exec)
                }
                _ => silhouette(view, assignment, opts.exec),
            },
        };
        match value {
            Ok(v) => Ok(Some(v)),
            Err(err) if is_degenerate(&err) => Ok(None),
            Err(err) => Err(err),
        }
    };
    let scores = opts.exec.try_map_indexed(profile.len(), evaluate)?;
    let criterion = which.criterion();
    let evaluable = profile.entries.iter().filter(|e| e.k >= 2).count();
    let missing = evaluable - scores.iter().flatten().count();
    let (k, _) = select(profile.k_min, &scores, which.direction())
        .ok_or_else(|| Error::undefined(criterion.name(), "no k >= 2 where the index is defined"))?;
    Ok(CriterionResult::new(criterion, profile.k_min, scores, k).flag(Flag::Unstable, missing > 0))
}
