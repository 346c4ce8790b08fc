//! Acceptance suite. Runs every criterion and prints one PASS/FAIL line each.
//!
//! A failure makes the process exit non-zero unless the criterion is listed
//! in `KNOWN_UNATTAINABLE`, whose failure is explained in the printed line
//! and in the README.

use std::fmt::Write as _;
use std::process::Command;
use std::time::{Duration, Instant};

use kselect_core::criteria::distance::PairwiseDistanceView;
use kselect_core::criteria::{elbow, variance, Criterion, CriterionResult};
use kselect_core::dataset::{generate, Family, GeneratorSpec, Placement};
use kselect_core::kmeans::best_of_restarts;
use kselect_core::profile::{build_profile, ProfileOptions};
use kselect_core::report::{run_criteria, CriteriaOptions, Inputs};
use kselect_core::rng::rng_for;
use kselect_core::{Dataset, Execution, SseProfile};
use rand::Rng as _;

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

/// The uniform band of criterion 2 requires ratio_2 <= 1.05, but a uniform
/// square split in two halves has ratio_2 = sqrt(1.25 (N-1)/(N-2)) ≈ 1.118.
const KNOWN_UNATTAINABLE: [usize; 1] = [2];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn profile(data: &Dataset, k_max: usize, seed: u64) -> SseProfile {
    build_profile(
        data,
        &ProfileOptions::new(1, k_max).restarts(10).seed(seed).keep_assignments(true),
    )
    .expect("profile")
}

fn selections(data: &Dataset, p: &SseProfile, criteria: &[Criterion], gap_seed: u64) -> Vec<(Criterion, Option<usize>)> {
    let opts = CriteriaOptions {
        gap_seeds: vec![gap_seed],
        ..CriteriaOptions::default()
    };
    let view = PairwiseDistanceView::materialized(data, Execution::default());
    run_criteria(criteria, &Inputs::new(p).data(data).distances(&view), &opts)
        .expect("criteria")
        .into_iter()
        .map(|e| (e.criterion, e.selected_k()))
        .collect()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let criteria = [
        Criterion::Jump,
        Criterion::Curvature,
        Criterion::Vrc,
        Criterion::Pham,
        Criterion::BicFixed,
        Criterion::Silhouette,
        Criterion::SimplifiedSilhouette,
        Criterion::DaviesBouldin,
        Criterion::Gap,
        Criterion::MaxReduction,
        Criterion::LastReduction,
    ];
    let mut hits = vec![0usize; criteria.len()];
    for seed in SEEDS {
        let data = generate(&GeneratorSpec::new(Family::WellSeparated, 1000, seed)).unwrap();
        let p = profile(&data, 10, seed);
        for (i, (_, k)) in selections(&data, &p, &criteria, seed).into_iter().enumerate() {
            hits[i] += usize::from(k == Some(3));
        }
    }
    let elapsed = start.elapsed();
    let mut detail = String::new();
    for (c, h) in criteria.iter().zip(&hits) {
        let _ = write!(detail, "{}={h}/5 ", c.name());
    }
    let _ = write!(detail, "in {:.1}s", elapsed.as_secs_f64());
    outcome(hits.iter().all(|&h| h >= 4) && elapsed < Duration::from_secs(60), detail)
}

fn criterion_2() -> Outcome {
    let mut normal_ratio = 0;
    let mut normal_bic = 0;
    let mut normal_gap = 0;
    let mut uniform_ok = 0;
    let mut uniform_range = (f64::INFINITY, f64::NEG_INFINITY);
    for seed in SEEDS {
        let data = generate(&GeneratorSpec::new(Family::Normal, 1000, seed)).unwrap();
        let p = profile(&data, 10, seed);
        let curve = variance::reduction_curve(&p).unwrap();
        normal_ratio += usize::from(curve.min_ratio().unwrap() >= 0.99);
        let sel = selections(&data, &p, &[Criterion::BicFixed, Criterion::Gap], seed);
        normal_bic += usize::from(sel[0].1 == Some(1));
        normal_gap += usize::from(sel[1].1 == Some(1));

        let data = generate(&GeneratorSpec::new(Family::Uniform, 1000, seed)).unwrap();
        let p = profile(&data, 10, seed);
        let curve = variance::reduction_curve(&p).unwrap();
        let ratios: Vec<f64> = curve.points.iter().map(|p| p.ratio).collect();
        for &r in &ratios {
            uniform_range = (uniform_range.0.min(r), uniform_range.1.max(r));
        }
        uniform_ok += usize::from(ratios.iter().all(|r| (0.90..=1.05).contains(r)));
    }
    let normal_pass = normal_ratio >= 4 && normal_bic >= 4 && normal_gap >= 4;
    let uniform_pass = uniform_ok == SEEDS.len();
    let detail = format!(
        "normal: min ratio>=0.99 {normal_ratio}/5, bic_fixed=1 {normal_bic}/5, gap=1 {normal_gap}/5 [{}]; \
         uniform: ratios in [0.90,1.05] for k<=10 on {uniform_ok}/5 seeds, observed range [{:.3}, {:.3}] [{}]",
        if normal_pass { "ok" } else { "failed" },
        uniform_range.0,
        uniform_range.1,
        if uniform_pass {
            "ok"
        } else {
            "unattainable: ratio_2 of a uniform square is sqrt(1.25) ≈ 1.118"
        },
    );
    outcome(normal_pass && uniform_pass, detail)
}

fn criterion_3() -> Outcome {
    let mut hits = [0usize; 3];
    for seed in SEEDS {
        let spec = GeneratorSpec::new(Family::ManyBlobs, 2500, seed).placement(Placement::Grid);
        let data = generate(&spec).unwrap();
        let p = profile(&data, 50, seed);
        let sel = selections(&data, &p, &[Criterion::Vrc, Criterion::BicFixed, Criterion::LastReduction], seed);
        for (h, (_, k)) in hits.iter_mut().zip(sel) {
            *h += usize::from(k == Some(25));
        }
    }
    let spec = GeneratorSpec::new(Family::ManyBlobs, 1000, 1).placement(Placement::Random);
    let data = generate(&spec).unwrap();
    let p = profile(&data, 50, 1);
    let curve = variance::reduction_curve(&p).unwrap();
    let max = variance::select_max_reduction(&curve).unwrap().selected_k;
    let last = variance::select_last_reduction(&curve).unwrap().selected_k;
    let detail = format!(
        "grid: vrc={}/5 bic_fixed={}/5 last_reduction={}/5 at k=25; random: max_reduction={max} last_reduction={last}",
        hits[0], hits[1], hits[2]
    );
    outcome(hits.iter().all(|&h| h == 5) && max < last, detail)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-6 * b.abs().max(f64::MIN_POSITIVE)
}

fn criterion_4() -> Outcome {
    let sse = [1000.0, 500.0, 100.0, 90.0, 82.0, 75.0];
    let p = SseProfile::from_sse(100, 2, 1, &sse).unwrap();
    let mut failures = Vec::new();
    let mut check = |name: &str, r: CriterionResult, oracle: Option<f64>| {
        let score_ok = oracle.is_none_or(|o| r.score(3).is_some_and(|s| close(s, o)));
        if r.selected_k != 3 || !score_ok {
            failures.push(format!("{name}: k={} score={:?} oracle={oracle:?}", r.selected_k, r.score(3)));
        }
    };
    let n: f64 = 100.0;
    // Direct evaluations at k = 3.
    check("jump", elbow::jump(&p, None).unwrap(), Some(1.0 / 100.0 - 1.0 / 500.0));
    check(
        "curvature",
        elbow::zhang_curvature(&p).unwrap(),
        Some((500.0 - 100.0) / (100.0 - 90.0) - 1.0),
    );
    check("vrc", variance::vrc(&p).unwrap(), Some((900.0 / 2.0) / (100.0 / 97.0)));
    check(
        "kl",
        variance::krzanowski_lai(&p, 2).unwrap(),
        Some(((2.0_f64 * 500.0 - 3.0 * 100.0) / (3.0 * 100.0 - 4.0 * 90.0)).abs()),
    );
    let alpha3 = 5.0 / 6.0 * (1.0 - 3.0 / 8.0) + 1.0 / 6.0;
    check("pham", variance::pham(&p, 2, 1.0).unwrap(), Some(100.0 / (alpha3 * 500.0)));
    let chord = |x0: f64, y0: f64, x1: f64, y1: f64, x: f64, y: f64| {
        ((y1 - y0) * x - (x1 - x0) * y + x1 * y0 - y1 * x0).abs() / ((y1 - y0).powi(2) + (x1 - x0).powi(2)).sqrt()
    };
    check(
        "pyclustering",
        elbow::pyclustering_elbow(&p).unwrap(),
        Some(chord(1.0, 1000.0, 6.0, 75.0, 3.0, 100.0)),
    );
    let (x, y): (f64, f64) = ((3.0 - 1.0) / 5.0, (100.0 - 75.0) / 925.0);
    check(
        "auto_elbow",
        elbow::auto_elbow(&p).unwrap(),
        Some(((x - 1.0).powi(2) + (y - 1.0).powi(2)) / (x * x + 2.0 * y * y)),
    );
    let curve = variance::reduction_curve(&p).unwrap();
    let ratio3 = (100.0 / ((n - 3.0) / 3.0 * (1000.0 / (n - 1.0)).min(2.0 * 500.0 / (n - 2.0)))).sqrt();
    if !curve.ratio(3).is_some_and(|r| close(r, ratio3)) {
        failures.push(format!("ratio_3 {:?} vs {ratio3}", curve.ratio(3)));
    }
    let pinned = [
        ("curvature score", elbow::zhang_curvature(&p).unwrap().score(3), 39.0, 1e-9),
        ("vrc score", variance::vrc(&p).unwrap().score(3), 436.5, 1e-4),
        ("kl score", variance::krzanowski_lai(&p, 2).unwrap().score(3), 11.67, 1e-3),
        ("pham score", variance::pham(&p, 2, 1.0).unwrap().score(3), 0.291, 1e-3),
        ("ratio_3", curve.ratio(3), 0.5533, 1e-4),
        ("pyclustering score", elbow::pyclustering_elbow(&p).unwrap().score(3), 2.865, 1e-3),
        ("auto_elbow score", elbow::auto_elbow(&p).unwrap().score(3), 8.09, 1e-3),
    ];
    for (name, got, want, tol) in pinned {
        if !got.is_some_and(|g| ((g - want) / want).abs() <= tol) {
            failures.push(format!("{name}: {got:?} vs rounded {want}"));
        }
    }
    let pass = failures.is_empty();
    let detail = if pass {
        "jump, curvature, vrc, kl, pham, ratio_3, pyclustering, auto_elbow match their oracles".to_string()
    } else {
        failures.join("; ")
    };
    outcome(pass, detail)
}

/// Global optimum over all k^N labelings.
fn exhaustive_sse(data: &Dataset, k: usize) -> f64 {
    let n = data.n();
    let d = data.d();
    let mut labels = vec![0usize; n];
    let mut best = f64::INFINITY;
    loop {
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(data.point(i)) {
                *s += v;
            }
        }
        let mut sse = 0.0;
        for (i, &l) in labels.iter().enumerate() {
            for (j, v) in data.point(i).iter().enumerate() {
                let diff = v - sums[l][j] / counts[l] as f64;
                sse += diff * diff;
            }
        }
        best = best.min(sse);
        let mut pos = 0;
        loop {
            if pos == n {
                return best;
            }
            labels[pos] += 1;
            if labels[pos] < k {
                break;
            }
            labels[pos] = 0;
            pos += 1;
        }
    }
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let mut rng = rng_for(2024, &[]);
    let mut worst = 0.0f64;
    let mut mismatches = Vec::new();
    for case in 0..25 {
        let n = rng.random_range(3..=10);
        let d = rng.random_range(1..=2);
        let k = rng.random_range(1..=3.min(n));
        let values: Vec<f64> = (0..n * d).map(|_| rng.random_range(-5.0..5.0)).collect();
        let data = Dataset::from_flat(values, d).unwrap();
        let oracle = exhaustive_sse(&data, k);
        let found = best_of_restarts(&data, k, 50, case, Execution::default()).unwrap().sse;
        let rel = (found - oracle).abs() / oracle.max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
        if rel > 1e-9 {
            mismatches.push(format!("case {case} (n={n}, d={d}, k={k}): {found} vs {oracle}"));
        }
    }
    let elapsed = start.elapsed();
    let pass = mismatches.is_empty() && elapsed < Duration::from_secs(10);
    let detail = if mismatches.is_empty() {
        format!("25 instances, worst relative gap {worst:.1e}, {:.2}s", elapsed.as_secs_f64())
    } else {
        mismatches.join("; ")
    };
    outcome(pass, detail)
}

fn scaled_profile(p: &SseProfile, alpha: f64) -> SseProfile {
    let mut q = p.clone();
    for e in &mut q.entries {
        e.sse *= alpha * alpha;
        e.centers.iter_mut().flatten().for_each(|v| *v *= alpha);
    }
    q
}

fn criterion_6() -> Outcome {
    let mut failures = Vec::new();
    let mut profiles_checked = 0;
    let scale_criteria = [
        Criterion::Jump,
        Criterion::Curvature,
        Criterion::Vrc,
        Criterion::KrzanowskiLai,
        Criterion::Pham,
        Criterion::MaxReduction,
        Criterion::LastReduction,
        Criterion::Marriott,
        Criterion::BicFixed,
        Criterion::Dunn,
        Criterion::DaviesBouldin,
        Criterion::Silhouette,
        Criterion::SimplifiedSilhouette,
    ];
    for (i, family) in Family::ALL.into_iter().enumerate() {
        let seed = 40 + i as u64;
        let data = generate(&GeneratorSpec::new(family, 400, seed)).unwrap();
        let p = profile(&data, 12, seed);
        profiles_checked += 1;
        if !p.is_monotone() {
            failures.push(format!("{}: profile not monotone", family.name()));
        }

        let shifted = data.map_coords(|axis, v| v + 1234.5 - 77.0 * axis as f64).unwrap();
        let q = profile(&shifted, 12, seed);
        profiles_checked += 1;
        for (a, b) in p.sse_values().iter().zip(q.sse_values()) {
            if (a - b).abs() > 1e-9 * a.abs().max(1e-300) {
                failures.push(format!("{}: translated SSE {a} vs {b}", family.name()));
                break;
            }
        }

        let alpha = 3.7;
        let scaled = data.map_coords(|_, v| v * alpha).unwrap();
        let q = scaled_profile(&p, alpha);
        let a = selections(&data, &p, &scale_criteria, seed);
        let b = selections(&scaled, &q, &scale_criteria, seed);
        for ((c, ka), (_, kb)) in a.iter().zip(&b) {
            if ka != kb {
                failures.push(format!("{} {}: {ka:?} vs scaled {kb:?}", family.name(), c.name()));
            }
        }
    }
    let pass = failures.is_empty();
    let detail = if pass {
        format!(
            "translation (1e-9), scaling by 3.7 for {} criteria, monotone SSE on {profiles_checked} profiles",
            scale_criteria.len()
        )
    } else {
        failures.join("; ")
    };
    outcome(pass, detail)
}

fn criterion_7() -> Outcome {
    let spec = GeneratorSpec::new(Family::ManyBlobs, 1000, 1).placement(Placement::Random);
    let data = generate(&spec).unwrap();
    let full = profile(&data, 100, 1);
    let half = full.truncated(50).unwrap();
    let pairs = [
        ("auto_elbow", elbow::auto_elbow(&half).unwrap(), elbow::auto_elbow(&full).unwrap()),
        ("kneedle", elbow::kneedle(&half, 1.0).unwrap(), elbow::kneedle(&full, 1.0).unwrap()),
        (
            "pyclustering",
            elbow::pyclustering_elbow(&half).unwrap(),
            elbow::pyclustering_elbow(&full).unwrap(),
        ),
    ];
    let changed = pairs.iter().any(|(_, a, b)| a.selected_k != b.selected_k);
    let detail = pairs
        .iter()
        .map(|(n, a, b)| format!("{n}: {} (k<=50) vs {} (k<=100)", a.selected_k, b.selected_k))
        .collect::<Vec<_>>()
        .join(", ");
    outcome(changed, detail)
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("table.md");
    let start = Instant::now();
    let status = Command::new(env!("CARGO_BIN_EXE_kselect"))
        .args(["table", "--seed", "1", "--restarts", "10", "--out"])
        .arg(&out)
        .status()
        .expect("run kselect");
    let elapsed = start.elapsed();
    if !status.success() {
        return outcome(false, format!("table exited with {status}"));
    }
    let text = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| l.starts_with("| ")).skip(1).collect();
    let cells: Vec<Vec<&str>> = rows
        .iter()
        .map(|r| r.trim_matches('|').split('|').skip(1).map(str::trim).collect())
        .collect();
    let complete = cells.iter().all(|c| c.len() == 10 && c.iter().all(|v| !v.is_empty() && *v != "err"));
    let pass = rows.len() == Criterion::TABLE.len() && complete && elapsed < Duration::from_secs(600);
    outcome(
        pass,
        format!(
            "{} rows x {} columns, complete={complete}, {:.0}s",
            rows.len(),
            cells.first().map_or(0, Vec::len),
            elapsed.as_secs_f64()
        ),
    )
}

type Check = (usize, &'static str, fn() -> Outcome);

fn main() {
    let filter: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let suite: [Check; 8] = [
        (1, "well-separated recovery", criterion_1),
        (2, "unclustered detection", criterion_2),
        (3, "many-blobs structure", criterion_3),
        (4, "hand-oracle equivalence", criterion_4),
        (5, "brute-force optimality", criterion_5),
        (6, "invariance suites", criterion_6),
        (7, "range sensitivity", criterion_7),
        (8, "table end-to-end", criterion_8),
    ];
    let mut unexpected = 0;
    for (id, name, run) in suite {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let o = run();
        let status = match (o.pass, KNOWN_UNATTAINABLE.contains(&id)) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known unattainable)",
            (false, false) => {
                unexpected += 1;
                "FAIL"
            }
        };
        println!("acceptance {id} [{name}]: {status}: {}", o.detail);
    }
    if unexpected > 0 {
        std::process::exit(1);
    }
}
