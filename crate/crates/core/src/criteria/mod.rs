//! Cluster-count selection criteria.
//!
//! Every criterion maps a profile (and, for some, the data and retained
//! assignments) to a [`CriterionResult`]: a per-k score curve plus the
//! selected k. Scores are `None` where a criterion's formula is undefined.
//! Ties always go to the lowest k.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric;

pub mod distance;
pub mod elbow;
pub mod gap;
pub mod info;
pub mod variance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    /// The scores themselves say the data shows no better-than-chance structure.
    Unclustered,
    /// Numerically unstable: truncated ranges, skipped zero denominators,
    /// ties on a degenerate curve, or selections that vary with the seed.
    Unstable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub name: String,
    pub k_min: usize,
    /// `scores[i]` belongs to `k = k_min + i`.
    pub scores: Vec<Option<f64>>,
    pub selected_k: usize,
    pub flags: BTreeSet<Flag>,
}

impl CriterionResult {
    pub(crate) fn new(criterion: Criterion, k_min: usize, scores: Vec<Option<f64>>, selected_k: usize) -> Self {
        CriterionResult {
            name: criterion.name().to_string(),
            k_min,
            // Non-finite values do not survive JSON and are reported as undefined.
            scores: scores.into_iter().map(|s| s.filter(|v| v.is_finite())).collect(),
            selected_k,
            flags: BTreeSet::new(),
        }
    }

    pub(crate) fn flag(mut self, flag: Flag, on: bool) -> Self {
        if on {
            self.flags.insert(flag);
        }
        self
    }

    pub fn score(&self, k: usize) -> Option<f64> {
        k.checked_sub(self.k_min)
            .and_then(|i| self.scores.get(i))
            .copied()
            .flatten()
    }

    pub fn has(&self, flag: Flag) -> bool {
        self.flags.contains(&flag)
    }

    pub fn k_max(&self) -> usize {
        self.k_min + self.scores.len().saturating_sub(1)
    }
}

/// Which way a score curve is optimized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Direction {
    Max,
    Min,
}

/// Selects the best defined score; ties go to the lowest k. Returns the
/// selected k and whether the optimum was tied.
pub(crate) fn select(k_min: usize, scores: &[Option<f64>], dir: Direction) -> Option<(usize, bool)> {
    let values = scores.iter().map(|s| s.unwrap_or(f64::NAN));
    let best = match dir {
        Direction::Max => numeric::argmax(values),
        Direction::Min => numeric::argmin(values),
    }?;
    let target = scores[best]?;
    let tied = scores
        .iter()
        .enumerate()
        .any(|(i, s)| i != best && *s == Some(target));
    Some((k_min + best, tied))
}

/// Every criterion this crate implements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Jump,
    LMethod,
    LMethodIterative,
    Kneedle,
    Curvature,
    Pyclustering,
    ShiAngles,
    AutoElbow,
    Marriott,
    Vrc,
    KrzanowskiLai,
    Pham,
    MaxReduction,
    LastReduction,
    Bic,
    BicFixed,
    Aic,
    Dunn,
    DaviesBouldin,
    Silhouette,
    SimplifiedSilhouette,
    Gap,
}

/// What a criterion needs beyond the SSE sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Requirement {
    SseOnly,
    /// The data and the retained assignments of every k.
    Assignments,
    /// The data (reference sets are drawn from its bounding box).
    Data,
}

impl Criterion {
    /// The comparison-table rows, in order.
    pub const TABLE: [Criterion; 21] = [
        Criterion::Jump,
        Criterion::LMethod,
        Criterion::LMethodIterative,
        Criterion::Kneedle,
        Criterion::Curvature,
        Criterion::Pyclustering,
        Criterion::ShiAngles,
        Criterion::AutoElbow,
        Criterion::Marriott,
        Criterion::Vrc,
        Criterion::KrzanowskiLai,
        Criterion::Pham,
        Criterion::MaxReduction,
        Criterion::LastReduction,
        Criterion::Bic,
        Criterion::BicFixed,
        Criterion::Dunn,
        Criterion::DaviesBouldin,
        Criterion::Silhouette,
        Criterion::SimplifiedSilhouette,
        Criterion::Gap,
    ];

    pub const ALL: [Criterion; 22] = [
        Criterion::Jump,
        Criterion::LMethod,
        Criterion::LMethodIterative,
        Criterion::Kneedle,
        Criterion::Curvature,
        Criterion::Pyclustering,
        Criterion::ShiAngles,
        Criterion::AutoElbow,
        Criterion::Marriott,
        Criterion::Vrc,
        Criterion::KrzanowskiLai,
        Criterion::Pham,
        Criterion::MaxReduction,
        Criterion::LastReduction,
        Criterion::Bic,
        Criterion::BicFixed,
        Criterion::Aic,
        Criterion::Dunn,
        Criterion::DaviesBouldin,
        Criterion::Silhouette,
        Criterion::SimplifiedSilhouette,
        Criterion::Gap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Criterion::Jump => "jump",
            Criterion::LMethod => "l_method",
            Criterion::LMethodIterative => "l_method_iter",
            Criterion::Kneedle => "kneedle",
            Criterion::Curvature => "curvature",
            Criterion::Pyclustering => "pyclustering",
            Criterion::ShiAngles => "shi_angles",
            Criterion::AutoElbow => "auto_elbow",
            Criterion::Marriott => "marriott",
            Criterion::Vrc => "vrc",
            Criterion::KrzanowskiLai => "kl",
            Criterion::Pham => "pham",
            Criterion::MaxReduction => "max_reduction",
            Criterion::LastReduction => "last_reduction",
            Criterion::Bic => "bic",
            Criterion::BicFixed => "bic_fixed",
            Criterion::Aic => "aic",
            Criterion::Dunn => "dunn",
            Criterion::DaviesBouldin => "db",
            Criterion::Silhouette => "silhouette",
            Criterion::SimplifiedSilhouette => "simplified_silhouette",
            Criterion::Gap => "gap",
        }
    }

    /// Row label used in rendered tables.
    pub fn label(self) -> &'static str {
        match self {
            Criterion::Jump => "Jump",
            Criterion::LMethod => "L-Method",
            Criterion::LMethodIterative => "L-Method (iter.)",
            Criterion::Kneedle => "Kneedle",
            Criterion::Curvature => "Curvature",
            Criterion::Pyclustering => "Pyclustering",
            Criterion::ShiAngles => "Shi angles",
            Criterion::AutoElbow => "AutoElbow",
            Criterion::Marriott => "Marriott",
            Criterion::Vrc => "VRC",
            Criterion::KrzanowskiLai => "K-L-Index",
            Criterion::Pham => "Pham",
            Criterion::MaxReduction => "Max reduction",
            Criterion::LastReduction => "Last reduction",
            Criterion::Bic => "BIC",
            Criterion::BicFixed => "BIC (fixed)",
            Criterion::Aic => "AIC",
            Criterion::Dunn => "Dunn",
            Criterion::DaviesBouldin => "DB",
            Criterion::Silhouette => "Silhouette",
            Criterion::SimplifiedSilhouette => "Simpl. Silhouette",
            Criterion::Gap => "Gap",
        }
    }

    pub fn requirement(self) -> Requirement {
        match self {
            Criterion::Marriott
            | Criterion::Bic
            | Criterion::BicFixed
            | Criterion::Aic
            | Criterion::Dunn
            | Criterion::DaviesBouldin
            | Criterion::Silhouette
            | Criterion::SimplifiedSilhouette => Requirement::Assignments,
            Criterion::Gap => Requirement::Data,
            _ => Requirement::SseOnly,
        }
    }

    /// Parses `all` or a comma-separated list of names.
    pub fn parse_list(list: &str) -> Result<Vec<Criterion>> {
        if list.trim().eq_ignore_ascii_case("all") {
            return Ok(Criterion::TABLE.to_vec());
        }
        let mut out: Vec<Criterion> = Vec::new();
        for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let c: Criterion = name.parse()?;
            if !out.contains(&c) {
                out.push(c);
            }
        }
        if out.is_empty() {
            return Err(Error::InvalidArgument("no criteria given".into()));
        }
        Ok(out)
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        let alias = match norm.as_str() {
            "zhang" | "zhang_curvature" => Some(Criterion::Curvature),
            "krzanowski_lai" | "kl_index" => Some(Criterion::KrzanowskiLai),
            "davies_bouldin" => Some(Criterion::DaviesBouldin),
            "calinski_harabasz" => Some(Criterion::Vrc),
            "lmethod" => Some(Criterion::LMethod),
            "autoelbow" => Some(Criterion::AutoElbow),
            "bic_original" => Some(Criterion::Bic),
            _ => None,
        };
        alias
            .or_else(|| Criterion::ALL.into_iter().find(|c| c.name() == norm))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown criterion '{s}'")))
    }
}
