//! Lloyd's algorithm with k-means++ seeding and seeded restarts.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::numeric::{compensated_sum, squared_distance, CompensatedSum};
use crate::rng::{self, stream};

pub const MAX_ITERATIONS: usize = 1000;

/// One k-means solution: centers, assignment, and its sum of squared errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringSolution {
    pub k: usize,
    pub centers: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
    pub sse: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl ClusteringSolution {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        cluster_sizes(&self.assignment, self.k)
    }
}

pub(crate) fn cluster_sizes(assignment: &[usize], k: usize) -> Vec<usize> {
    let mut sizes = vec![0usize; k];
    for &a in assignment {
        sizes[a] += 1;
    }
    sizes
}

fn check_centers(dataset: &Dataset, centers: &[Vec<f64>]) -> Result<()> {
    if centers.is_empty() {
        return Err(Error::InvalidArgument("at least one center is required".into()));
    }
    if let Some(c) = centers.iter().find(|c| c.len() != dataset.d()) {
        return Err(Error::DimensionMismatch {
            expected: dataset.d(),
            found: c.len(),
        });
    }
    Ok(())
}

/// Nearest center index and squared distance; ties go to the lowest index.
#[inline]
fn nearest(point: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = 0;
    let mut best_dist = squared_distance(point, &centers[0]);
    for (j, c) in centers.iter().enumerate().skip(1) {
        let dist = squared_distance(point, c);
        if dist < best_dist {
            best = j;
            best_dist = dist;
        }
    }
    (best, best_dist)
}

/// SSE of the data against the nearest of `centers`.
pub fn sse(dataset: &Dataset, centers: &[Vec<f64>]) -> Result<f64> {
    check_centers(dataset, centers)?;
    Ok(compensated_sum(dataset.points().map(|p| nearest(p, centers).1)))
}

/// SSE of a fixed assignment, each point measured against its own center.
pub fn assignment_sse(dataset: &Dataset, centers: &[Vec<f64>], assignment: &[usize]) -> f64 {
    compensated_sum(
        dataset
            .points()
            .zip(assignment)
            .map(|(p, &a)| squared_distance(p, &centers[a])),
    )
}

/// How initial centers are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Seeding {
    /// Plain k-means++: each new center is one draw proportional to D².
    PlusPlus,
    /// Greedy k-means++: `2 + ln k` candidates are drawn proportional to D²
    /// and the one that lowers the seeding potential most is kept.
    #[default]
    GreedyPlusPlus,
}

impl Seeding {
    fn candidates(self, k: usize) -> usize {
        match self {
            Seeding::PlusPlus => 1,
            Seeding::GreedyPlusPlus => 2 + (k as f64).ln().floor() as usize,
        }
    }
}

/// One D²-weighted draw among unchosen rows with positive weight.
fn draw_weighted(weights: &[f64], chosen: &[bool], total: f64, rng: &mut rng::Rng) -> usize {
    let target = rng.random::<f64>() * total;
    let mut acc = CompensatedSum::default();
    let mut last_positive = None;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 || chosen[i] {
            continue;
        }
        last_positive = Some(i);
        acc.add(w);
        if acc.value() > target {
            return i;
        }
    }
    // Rounding can leave the target just past the final bucket.
    last_positive.expect("positive weight exists")
}

/// Plain k-means++ seeding; see [`seed_centers`].
pub fn seed_plus_plus(dataset: &Dataset, k: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    seed_centers(dataset, k, seed, Seeding::PlusPlus)
}

/// k-means++ seeding: the first center is a uniformly drawn point, further
/// centers are drawn with probability proportional to the squared distance
/// to the closest center chosen so far (best of several draws for
/// [`Seeding::GreedyPlusPlus`]). Centers are distinct data rows; once every
/// remaining row has zero distance (duplicates), the rest are drawn
/// uniformly among unchosen rows.
pub fn seed_centers(dataset: &Dataset, k: usize, seed: u64, seeding: Seeding) -> Result<Vec<Vec<f64>>> {
    let n = dataset.n();
    if k == 0 || k > n {
        return Err(Error::KOutOfRange { k, n });
    }
    let mut rng = rng::rng_for(seed, &[]);
    let mut chosen = vec![false; n];
    let mut centers = Vec::with_capacity(k);
    let trials = seeding.candidates(k);

    let first = rng.random_range(0..n);
    chosen[first] = true;
    centers.push(dataset.point(first).to_vec());
    let mut weights: Vec<f64> = dataset
        .points()
        .map(|p| squared_distance(p, &centers[0]))
        .collect();
    weights[first] = 0.0;

    while centers.len() < k {
        let total = compensated_sum(weights.iter().copied());
        let (pick, updated) = if total > 0.0 {
            let mut best: Option<(f64, usize, Vec<f64>)> = None;
            for _ in 0..trials {
                let candidate = draw_weighted(&weights, &chosen, total, &mut rng);
                let c = dataset.point(candidate);
                let next: Vec<f64> = weights
                    .iter()
                    .zip(dataset.points())
                    .map(|(&w, p)| w.min(squared_distance(p, c)))
                    .collect();
                let potential = compensated_sum(next.iter().copied());
                if best.as_ref().is_none_or(|b| potential < b.0) {
                    best = Some((potential, candidate, next));
                }
            }
            let (_, pick, next) = best.expect("at least one trial");
            (pick, next)
        } else {
            let remaining: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            (remaining[rng.random_range(0..remaining.len())], weights.clone())
        };
        chosen[pick] = true;
        weights = updated;
        weights[pick] = 0.0;
        centers.push(dataset.point(pick).to_vec());
    }
    Ok(centers)
}

fn centroids(dataset: &Dataset, assignment: &[usize], k: usize, previous: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = dataset.d();
    let mut sums = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in dataset.points().zip(assignment) {
        counts[a] += 1;
        for (s, v) in sums[a].iter_mut().zip(p) {
            *s += v;
        }
    }
    sums.into_iter()
        .zip(counts)
        .enumerate()
        .map(|(j, (mut s, c))| {
            if c == 0 {
                previous[j].clone()
            } else {
                s.iter_mut().for_each(|v| *v /= c as f64);
                s
            }
        })
        .collect()
}

/// Fills empty clusters by moving the worst-fit point (largest squared error,
/// lowest index on ties) of a cluster with at least two members into a new
/// singleton cluster. Returns whether anything changed.
fn repair_empty_clusters(
    dataset: &Dataset,
    centers: &mut [Vec<f64>],
    assignment: &mut [usize],
) -> bool {
    let k = centers.len();
    let mut changed = false;
    loop {
        let sizes = cluster_sizes(assignment, k);
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return changed;
        };
        let mut worst: Option<(usize, f64)> = None;
        for (i, p) in dataset.points().enumerate() {
            let a = assignment[i];
            if sizes[a] < 2 {
                continue;
            }
            let err = squared_distance(p, &centers[a]);
            if worst.is_none_or(|(_, w)| err > w) {
                worst = Some((i, err));
            }
        }
        let (i, _) = worst.expect("k <= n leaves a cluster with two members");
        let donor = assignment[i];
        assignment[i] = empty;
        centers[empty] = dataset.point(i).to_vec();
        // Donor centroid after losing the point.
        let members: Vec<&[f64]> = dataset
            .points()
            .zip(assignment.iter())
            .filter(|(_, &a)| a == donor)
            .map(|(p, _)| p)
            .collect();
        let mut c = vec![0.0; dataset.d()];
        for p in &members {
            for (cv, v) in c.iter_mut().zip(*p) {
                *cv += v;
            }
        }
        c.iter_mut().for_each(|v| *v /= members.len() as f64);
        centers[donor] = c;
        changed = true;
    }
}

/// Lloyd's alternating optimization from the given initial centers.
///
/// Each pass assigns every point to its nearest center (ties to the lowest
/// index) and then moves each center to the centroid of its points. The loop
/// stops after a pass that changes no assignment, or after
/// [`MAX_ITERATIONS`] passes with a warning.
pub fn lloyd(dataset: &Dataset, initial_centers: &[Vec<f64>]) -> Result<ClusteringSolution> {
    lloyd_seeded(dataset, initial_centers, 0)
}

fn lloyd_seeded(dataset: &Dataset, initial_centers: &[Vec<f64>], seed: u64) -> Result<ClusteringSolution> {
    check_centers(dataset, initial_centers)?;
    let k = initial_centers.len();
    if k > dataset.n() {
        return Err(Error::KOutOfRange { k, n: dataset.n() });
    }
    let mut centers = initial_centers.to_vec();
    let mut assignment = vec![usize::MAX; dataset.n()];
    let mut iterations = 0;
    #[cfg(debug_assertions)]
    let mut last_sse = f64::INFINITY;

    loop {
        let mut changes = 0usize;
        for (i, p) in dataset.points().enumerate() {
            let (best, _) = nearest(p, &centers);
            if assignment[i] != best {
                assignment[i] = best;
                changes += 1;
            }
        }
        if changes == 0 {
            break;
        }
        if iterations == MAX_ITERATIONS {
            log::warn!("lloyd: k = {k} did not converge within {MAX_ITERATIONS} iterations");
            break;
        }
        iterations += 1;
        centers = centroids(dataset, &assignment, k, &centers);
        repair_empty_clusters(dataset, &mut centers, &mut assignment);

        #[cfg(debug_assertions)]
        {
            let current = assignment_sse(dataset, &centers, &assignment);
            debug_assert!(
                current <= last_sse * (1.0 + 1e-12) + 1e-300,
                "SSE increased from {last_sse} to {current}"
            );
            last_sse = current;
        }
    }

    let sse = assignment_sse(dataset, &centers, &assignment);
    Ok(ClusteringSolution {
        k,
        centers,
        assignment,
        sse,
        iterations,
        seed,
    })
}

/// Seed for restart `restart` of the `k`-cluster runs under `master_seed`.
pub fn restart_seed(master_seed: u64, k: usize, restart: usize) -> u64 {
    rng::derive_seed(master_seed, &[stream::RESTART, k as u64, restart as u64])
}

/// One Lloyd run from the default seeding.
pub fn single_run(dataset: &Dataset, k: usize, seed: u64) -> Result<ClusteringSolution> {
    single_run_with(dataset, k, seed, Seeding::default())
}

pub fn single_run_with(dataset: &Dataset, k: usize, seed: u64, seeding: Seeding) -> Result<ClusteringSolution> {
    let init = seed_centers(dataset, k, seed, seeding)?;
    lloyd_seeded(dataset, &init, seed)
}

/// Picks the lowest-SSE solution, lowest restart index on ties.
pub(crate) fn pick_best(runs: Vec<ClusteringSolution>) -> ClusteringSolution {
    let mut best: Option<ClusteringSolution> = None;
    for run in runs {
        match &best {
            Some(b) if run.sse >= b.sse => {}
            _ => best = Some(run),
        }
    }
    best.expect("at least one restart")
}

/// Best of `restarts` seeded runs. Restart seeds depend only on
/// `(master_seed, k, restart)`, so the result is independent of scheduling.
pub fn best_of_restarts(
    dataset: &Dataset,
    k: usize,
    restarts: usize,
    master_seed: u64,
    exec: Execution,
) -> Result<ClusteringSolution> {
    if restarts == 0 {
        return Err(Error::InvalidArgument("restarts must be at least 1".into()));
    }
    let runs = exec.try_map_indexed(restarts, |r| {
        single_run(dataset, k, restart_seed(master_seed, k, r))
    })?;
    Ok(pick_best(runs))
}
