//! Elbow detectors: heuristics that look for the bend of the SSE curve.
//!
//! All of them are pure functions of the SSE sequence.

use super::{select, Criterion, CriterionResult, Direction, Flag};
use crate::error::{Error, Result};
use crate::profile::SseProfile;

fn require_points(name: &'static str, profile: &SseProfile, min: usize) -> Result<Vec<f64>> {
    if profile.len() < min {
        return Err(Error::undefined(
            name,
            format!("needs at least {min} profile points, got {}", profile.len()),
        ));
    }
    Ok(profile.sse_values())
}

fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Jump method: `J_k = SSE_k^-Y - SSE_{k-1}^-Y` with `SSE_0^-Y := 0`, maximized.
///
/// `power` defaults to `d / 2`. A zero SSE makes the transform infinite;
/// the first such k ends the range, is selected, and flags the result unstable.
pub fn jump(profile: &SseProfile, power: Option<f64>) -> Result<CriterionResult> {
    if profile.k_min != 1 {
        return Err(Error::undefined("jump", "profile must start at k = 1"));
    }
    let y = power.unwrap_or(profile.d as f64 / 2.0);
    let mut scores = Vec::with_capacity(profile.len());
    let mut previous = 0.0;
    for (i, &sse) in profile.sse_values().iter().enumerate() {
        if sse == 0.0 {
            scores.resize(profile.len(), None);
            return Ok(CriterionResult::new(Criterion::Jump, 1, scores, 1 + i).flag(Flag::Unstable, true));
        }
        let t = sse.powf(-y);
        scores.push(Some(t - previous));
        previous = t;
    }
    let (k, _) = select(1, &scores, Direction::Max).expect("non-empty profile");
    Ok(CriterionResult::new(Criterion::Jump, 1, scores, k))
}

/// Least-squares line fit; returns the root-mean-squared residual.
fn line_rmse(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let ssr: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - (my + slope * (x - mx));
            r * r
        })
        .sum();
    (ssr / n).sqrt()
}

/// L-method scores over `ks[..]`: for each interior split `c` a line is fitted to
/// `[first..=c]` and to `[c..=last]`, and the size-weighted RMSE is recorded.
fn l_method_scores(ks: &[f64], sse: &[f64]) -> Vec<Option<f64>> {
    let n = ks.len();
    let mut scores = vec![None; n];
    for c in 1..n - 1 {
        let left = c + 1;
        let right = n - c;
        let rmse_l = line_rmse(&ks[..=c], &sse[..=c]);
        let rmse_r = line_rmse(&ks[c..], &sse[c..]);
        let total = (left + right) as f64;
        scores[c] = Some(left as f64 / total * rmse_l + right as f64 / total * rmse_r);
    }
    scores
}

/// L-method: the split with the best two-line fit. With `iterative`, the range
/// is repeatedly cut to the first `2 · k` values until the knee stops moving
/// down (or fewer than 4 points would remain).
pub fn l_method(profile: &SseProfile, iterative: bool) -> Result<CriterionResult> {
    let name = if iterative { Criterion::LMethodIterative } else { Criterion::LMethod };
    let sse = require_points(name.name(), profile, 4)?;
    let ks: Vec<f64> = profile.ks().map(|k| k as f64).collect();
    let k_min = profile.k_min;

    let mut end = sse.len();
    let mut scores = l_method_scores(&ks[..end], &sse[..end]);
    let (mut knee, _) = select(k_min, &scores, Direction::Min).expect("interior splits exist");
    if iterative {
        loop {
            let cutoff = (2 * knee).min(profile.k_max);
            let new_end = cutoff + 1 - k_min;
            if new_end < 4 || new_end == end {
                break;
            }
            let trial = l_method_scores(&ks[..new_end], &sse[..new_end]);
            let (next, _) = select(k_min, &trial, Direction::Min).expect("interior splits exist");
            end = new_end;
            scores = trial;
            let moved_down = next < knee;
            knee = next;
            if !moved_down {
                break;
            }
        }
        scores.resize(sse.len(), None);
    }
    Ok(CriterionResult::new(name, k_min, scores, knee))
}

/// Centered moving average of width 3; endpoints are kept.
fn smooth3(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .map(|i| {
            if i == 0 || i + 1 == n {
                values[i]
            } else {
                (values[i - 1] + values[i] + values[i + 1]) / 3.0
            }
        })
        .collect()
}

/// Kneedle on the decreasing SSE curve.
///
/// The curve is smoothed (moving average of width 3), x and y are min-max
/// normalized, and the difference curve `(1 - y) - x` is scanned left to
/// right. Each local maximum sets a threshold `Δ_max - sensitivity / (n - 1)`
/// (local minima reset it to 0); the first time the difference curve falls
/// below the current threshold, the most recent local maximum is the knee.
/// If that never happens the global maximum is returned, flagged unstable.
pub fn kneedle(profile: &SseProfile, sensitivity: f64) -> Result<CriterionResult> {
    let sse = require_points("kneedle", profile, 3)?;
    let n = sse.len();
    let smoothed = smooth3(&sse);
    let (lo, hi) = min_max(&smoothed);
    if hi <= lo {
        return Ok(CriterionResult::new(Criterion::Kneedle, profile.k_min, vec![Some(0.0); n], profile.k_min)
            .flag(Flag::Unclustered, true));
    }
    let diff: Vec<f64> = smoothed
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let x = i as f64 / (n - 1) as f64;
            (1.0 - (y - lo) / (hi - lo)) - x
        })
        .collect();

    let is_max = |i: usize| diff[i] > diff[i - 1] && diff[i] >= diff[i + 1];
    let is_min = |i: usize| diff[i] < diff[i - 1] && diff[i] <= diff[i + 1];
    let step = sensitivity / (n - 1) as f64;

    let mut knee = None;
    let mut current: Option<(usize, f64)> = None;
    for i in 1..n - 1 {
        if is_max(i) {
            current = Some((i, diff[i] - step));
        } else if is_min(i) {
            if let Some((idx, _)) = current {
                current = Some((idx, 0.0));
            }
        }
        if let Some((idx, threshold)) = current {
            if diff[i + 1] < threshold {
                knee = Some(idx);
                break;
            }
        }
    }
    let scores: Vec<Option<f64>> = diff.iter().copied().map(Some).collect();
    Ok(match knee {
        Some(i) => CriterionResult::new(Criterion::Kneedle, profile.k_min, scores, profile.k_min + i),
        None => {
            let (k, _) = select(profile.k_min, &scores, Direction::Max).expect("non-empty");
            CriterionResult::new(Criterion::Kneedle, profile.k_min, scores, k).flag(Flag::Unstable, true)
        }
    })
}

/// Scale-independent curvature
/// `(SSE_{k-1} - SSE_k) / (SSE_k - SSE_{k+1}) - 1`, maximized.
pub fn zhang_curvature(profile: &SseProfile) -> Result<CriterionResult> {
    let sse = require_points("curvature", profile, 3)?;
    let n = sse.len();
    let mut scores = vec![None; n];
    let mut skipped = false;
    for i in 1..n - 1 {
        let denom = sse[i] - sse[i + 1];
        if denom == 0.0 {
            skipped = true;
            continue;
        }
        scores[i] = Some((sse[i - 1] - sse[i]) / denom - 1.0);
    }
    let (k, tied) = select(profile.k_min, &scores, Direction::Max)
        .ok_or_else(|| Error::undefined("curvature", "every denominator is zero"))?;
    Ok(CriterionResult::new(Criterion::Curvature, profile.k_min, scores, k).flag(Flag::Unstable, skipped || tied))
}

/// Distance of each interior point to the chord between the first and the
/// last profile point (absolute value of the signed elbow length), maximized.
pub fn pyclustering_elbow(profile: &SseProfile) -> Result<CriterionResult> {
    let sse = require_points("pyclustering", profile, 3)?;
    let n = sse.len();
    let (x0, y0) = (profile.k_min as f64, sse[0]);
    let (x1, y1) = (profile.k_max as f64, sse[n - 1]);
    let norm = ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt();
    let mut scores = vec![None; n];
    for i in 1..n - 1 {
        let (xk, yk) = ((profile.k_min + i) as f64, sse[i]);
        let signed = (y0 - y1) * xk + (x1 - x0) * yk + (x0 * y1 - x1 * y0);
        scores[i] = Some(signed.abs() / norm);
    }
    let (k, _) = select(profile.k_min, &scores, Direction::Max).expect("interior points");
    Ok(CriterionResult::new(Criterion::Pyclustering, profile.k_min, scores, k))
}

/// Angle in degrees at each interior point after scaling SSE to `[0, 10]`
/// (x stays in index units); the sharpest bend (smallest angle) wins.
pub fn shi_angles(profile: &SseProfile) -> Result<CriterionResult> {
    let sse = require_points("shi_angles", profile, 3)?;
    let n = sse.len();
    let (lo, hi) = min_max(&sse);
    if hi <= lo {
        let mut scores = vec![Some(180.0); n];
        scores[0] = None;
        scores[n - 1] = None;
        return Ok(CriterionResult::new(Criterion::ShiAngles, profile.k_min, scores, profile.k_min + 1)
            .flag(Flag::Unclustered, true));
    }
    let y: Vec<f64> = sse.iter().map(|v| 10.0 * (v - lo) / (hi - lo)).collect();
    let mut scores = vec![None; n];
    for i in 1..n - 1 {
        let (ax, ay) = (-1.0, y[i - 1] - y[i]);
        let (bx, by) = (1.0, y[i + 1] - y[i]);
        let cos = (ax * bx + ay * by) / ((ax * ax + ay * ay).sqrt() * (bx * bx + by * by).sqrt());
        scores[i] = Some(cos.clamp(-1.0, 1.0).acos().to_degrees());
    }
    let (k, _) = select(profile.k_min, &scores, Direction::Min).expect("interior points");
    let defined: Vec<f64> = scores.iter().flatten().copied().collect();
    let (amin, amax) = min_max(&defined);
    let collinear = amax - amin < 1e-9;
    Ok(CriterionResult::new(Criterion::ShiAngles, profile.k_min, scores, k).flag(Flag::Unclustered, collinear))
}

/// AutoElbow: on min-max scaled coordinates,
/// `((x - 1)^2 + (y - 1)^2) / (x^2 + 2 y^2)`, maximized.
pub fn auto_elbow(profile: &SseProfile) -> Result<CriterionResult> {
    let sse = require_points("auto_elbow", profile, 3)?;
    let n = sse.len();
    let (lo, hi) = min_max(&sse);
    if hi <= lo {
        return Err(Error::undefined("auto_elbow", "flat profile"));
    }
    let scores: Vec<Option<f64>> = sse
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let x = i as f64 / (n - 1) as f64;
            let y = (v - lo) / (hi - lo);
            Some(((x - 1.0).powi(2) + (y - 1.0).powi(2)) / (x * x + 2.0 * y * y))
        })
        .collect();
    let (k, _) = select(profile.k_min, &scores, Direction::Max).expect("non-empty");
    Ok(CriterionResult::new(Criterion::AutoElbow, profile.k_min, scores, k))
}
