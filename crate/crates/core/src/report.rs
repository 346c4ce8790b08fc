//! Running many criteria against one profile, and the comparison table
//! across the toy datasets.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::criteria::distance::{self, DistanceIndex, PairwiseDistanceView, SweepOptions};
use crate::criteria::gap::{self, GapResult};
use crate::criteria::info::{self, BicVariant};
use crate::criteria::{elbow, variance, Criterion, CriterionResult, Flag, Requirement};
use crate::dataset::{self, Dataset, Family, GeneratorSpec, Placement};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::profile::{build_profile, ProfileOptions, SseProfile};

/// Tunables shared by all criteria.
#[derive(Debug, Clone, PartialEq)]
pub struct CriteriaOptions {
    /// Jump exponent; `None` uses d/2.
    pub jump_power: Option<f64>,
    pub kneedle_sensitivity: f64,
    pub reduction_threshold: f64,
    pub pham_threshold: f64,
    pub gap_references: usize,
    /// One gap run per seed; differing selections flag the result unstable.
    pub gap_seeds: Vec<u64>,
    pub sweep: SweepOptions,
    pub exec: Execution,
}

impl Default for CriteriaOptions {
    fn default() -> Self {
        CriteriaOptions {
            jump_power: None,
            kneedle_sensitivity: 1.0,
            reduction_threshold: 1.0,
            pham_threshold: 1.0,
            gap_references: gap::DEFAULT_REFERENCES,
            gap_seeds: vec![0],
            sweep: SweepOptions::default(),
            exec: Execution::default(),
        }
    }
}

/// Everything a criterion may read.
#[derive(Debug, Clone, Copy)]
pub struct Inputs<'a> {
    pub profile: &'a SseProfile,
    pub data: Option<&'a Dataset>,
    /// Pairwise distances of `data`; built on demand when absent.
    pub distances: Option<&'a PairwiseDistanceView<'a>>,
    /// A precomputed gap result for this profile's range.
    pub gap: Option<&'a GapResult>,
}

impl<'a> Inputs<'a> {
    pub fn new(profile: &'a SseProfile) -> Self {
        Inputs {
            profile,
            data: None,
            distances: None,
            gap: None,
        }
    }

    pub fn data(mut self, data: &'a Dataset) -> Self {
        self.data = Some(data);
        self
    }

    pub fn distances(mut self, view: &'a PairwiseDistanceView<'a>) -> Self {
        self.distances = Some(view);
        self
    }

    pub fn gap(mut self, gap: &'a GapResult) -> Self {
        self.gap = Some(gap);
        self
    }
}

/// Human-readable list of what `criteria` need but `inputs` lack.
pub fn missing_inputs(criteria: &[Criterion], inputs: &Inputs) -> Vec<String> {
    let mut missing = BTreeSet::new();
    for c in criteria {
        match c.requirement() {
            Requirement::SseOnly => {}
            Requirement::Data => {
                if inputs.data.is_none() && inputs.gap.is_none() {
                    missing.insert(format!("{c} needs the data (--data)"));
                }
            }
            Requirement::Assignments => {
                if inputs.data.is_none() {
                    missing.insert(format!("{c} needs the data (--data)"));
                }
                if !inputs.profile.has_assignments() {
                    missing.insert(format!("{c} needs a profile built with --keep-assignments"));
                }
            }
        }
    }
    missing.into_iter().collect()
}

fn need_data<'a>(c: Criterion, inputs: &Inputs<'a>) -> Result<&'a Dataset> {
    inputs
        .data
        .ok_or_else(|| Error::MissingInput(format!("{c} needs the data")))
}

/// Evaluates one criterion.
pub fn evaluate(criterion: Criterion, inputs: &Inputs, opts: &CriteriaOptions) -> Result<CriterionResult> {
    let p = inputs.profile;
    match criterion {
        Criterion::Jump => elbow::jump(p, opts.jump_power),
        Criterion::LMethod => elbow::l_method(p, false),
        Criterion::LMethodIterative => elbow::l_method(p, true),
        Criterion::Kneedle => elbow::kneedle(p, opts.kneedle_sensitivity),
        Criterion::Curvature => elbow::zhang_curvature(p),
        Criterion::Pyclustering => elbow::pyclustering_elbow(p),
        Criterion::ShiAngles => elbow::shi_angles(p),
        Criterion::AutoElbow => elbow::auto_elbow(p),
        Criterion::Marriott => variance::marriott(need_data(criterion, inputs)?, p),
        Criterion::Vrc => variance::vrc(p),
        Criterion::KrzanowskiLai => variance::krzanowski_lai(p, p.d),
        Criterion::Pham => variance::pham(p, p.d, opts.pham_threshold),
        Criterion::MaxReduction => {
            variance::select_max_reduction(&variance::reduction_curve(p)?.with_threshold(opts.reduction_threshold))
        }
        Criterion::LastReduction => {
            variance::select_last_reduction(&variance::reduction_curve(p)?.with_threshold(opts.reduction_threshold))
        }
        Criterion::Bic => info::bic(p, BicVariant::Original),
        Criterion::BicFixed => info::bic(p, BicVariant::Fixed),
        Criterion::Aic => info::bic(p, BicVariant::Aic),
        Criterion::Dunn | Criterion::DaviesBouldin | Criterion::Silhouette | Criterion::SimplifiedSilhouette => {
            let which = DistanceIndex::from_criterion(criterion).expect("distance criterion");
            let data = need_data(criterion, inputs)?;
            let sweep = SweepOptions {
                exec: opts.exec,
                ..opts.sweep
            };
            match inputs.distances {
                Some(view) => distance::sweep_distance_criterion(view, p, which, &sweep),
                None => distance::sweep_distance_criterion(&PairwiseDistanceView::on_demand(data), p, which, &sweep),
            }
        }
        Criterion::Gap => match inputs.gap {
            Some(g) => Ok(g.to_criterion_result()),
            None => {
                let data = need_data(criterion, inputs)?;
                let seeds = if opts.gap_seeds.is_empty() { vec![0] } else { opts.gap_seeds.clone() };
                let runs = gap::gap_across_seeds(data, p, opts.gap_references, &seeds, opts.exec)?;
                Ok(runs[0].to_criterion_result())
            }
        },
    }
}

/// One requested criterion: its result, or why it could not be computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub criterion: Criterion,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<CriterionResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ReportEntry {
    pub fn selected_k(&self) -> Option<usize> {
        self.result.as_ref().map(|r| r.selected_k)
    }
}

/// Evaluates every criterion. Missing inputs fail the whole run; errors of
/// individual criteria (too few profile points, degenerate data) are recorded.
pub fn run_criteria(criteria: &[Criterion], inputs: &Inputs, opts: &CriteriaOptions) -> Result<Vec<ReportEntry>> {
    let missing = missing_inputs(criteria, inputs);
    if !missing.is_empty() {
        return Err(Error::MissingInput(missing.join("; ")));
    }
    let mut seen = BTreeSet::new();
    let mut entries = Vec::new();
    for &c in criteria {
        if !seen.insert(c) {
            continue;
        }
        let entry = match evaluate(c, inputs, opts) {
            Ok(r) => ReportEntry {
                criterion: c,
                result: Some(r),
                error: None,
            },
            Err(e @ Error::MissingInput(_)) => return Err(e),
            Err(e) => {
                log::warn!("{c}: {e}");
                ReportEntry {
                    criterion: c,
                    result: None,
                    error: Some(e.to_string()),
                }
            }
        };
        entries.push(entry);
    }
    Ok(entries)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetDescriptor {
    /// A file path, or the generator family name.
    pub source: String,
    pub n: usize,
    pub d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorSpec>,
}

impl DatasetDescriptor {
    pub fn of(source: impl Into<String>, data: &Dataset) -> Self {
        let meta = data.meta();
        DatasetDescriptor {
            source: source.into(),
            n: data.n(),
            d: data.d(),
            true_k: data.true_k(),
            generator: meta.and_then(|m| m.generator.clone()),
        }
    }
}

/// Machine-readable result of `select`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetDescriptor>,
    pub n: usize,
    pub d: usize,
    pub k_min: usize,
    pub k_max: usize,
    pub restarts: usize,
    pub master_seed: u64,
    pub gap_references: usize,
    pub gap_seeds: Vec<u64>,
    pub entries: Vec<ReportEntry>,
}

impl SelectionReport {
    pub fn new(
        profile: &SseProfile,
        dataset: Option<DatasetDescriptor>,
        opts: &CriteriaOptions,
        entries: Vec<ReportEntry>,
    ) -> Self {
        SelectionReport {
            dataset,
            n: profile.n,
            d: profile.d,
            k_min: profile.k_min,
            k_max: profile.k_max,
            restarts: profile.restarts,
            master_seed: profile.master_seed,
            gap_references: opts.gap_references,
            gap_seeds: opts.gap_seeds.clone(),
            entries,
        }
    }

    pub fn entry(&self, c: Criterion) -> Option<&ReportEntry> {
        self.entries.iter().find(|e| e.criterion == c)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// One dataset column pair of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableDataset {
    pub family: Family,
    /// Ascending k_max settings, one column each.
    pub k_max: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableConfig {
    pub n: usize,
    pub seed: u64,
    pub restarts: usize,
    pub many_blobs_placement: Placement,
    pub gap_references: usize,
    /// Gap runs with seeds `seed, seed + 1, ...`; disagreement flags ‡.
    pub gap_runs: usize,
    pub datasets: Vec<TableDataset>,
}

impl TableConfig {
    pub fn new(seed: u64, restarts: usize) -> Self {
        let pair = |family, lo, hi| TableDataset {
            family,
            k_max: vec![lo, hi],
        };
        TableConfig {
            n: 1000,
            seed,
            restarts,
            many_blobs_placement: Placement::Random,
            gap_references: gap::DEFAULT_REFERENCES,
            gap_runs: 3,
            datasets: vec![
                pair(Family::WellSeparated, 10, 25),
                pair(Family::Overlapping, 10, 25),
                pair(Family::ManyBlobs, 50, 100),
                pair(Family::Uniform, 10, 25),
                pair(Family::Normal, 10, 25),
            ],
        }
    }

    pub fn generator(&self, family: Family) -> GeneratorSpec {
        let spec = GeneratorSpec::new(family, self.n, self.seed);
        if family == Family::ManyBlobs {
            spec.placement(self.many_blobs_placement)
        } else {
            spec
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableColumn {
    pub family: Family,
    pub k_max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableCell {
    pub selected_k: Option<usize>,
    pub flags: BTreeSet<Flag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl TableCell {
    fn from_entry(e: &ReportEntry) -> Self {
        TableCell {
            selected_k: e.selected_k(),
            flags: e.result.as_ref().map(|r| r.flags.clone()).unwrap_or_default(),
            error: e.error.clone(),
        }
    }

    pub fn render(&self) -> String {
        let mut s = match self.selected_k {
            Some(k) => k.to_string(),
            None => "err".to_string(),
        };
        if self.flags.contains(&Flag::Unclustered) {
            s.push('†');
        }
        if self.flags.contains(&Flag::Unstable) {
            s.push('‡');
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub config: TableConfig,
    pub columns: Vec<TableColumn>,
    pub rows: Vec<Criterion>,
    /// `cells[row][column]`.
    pub cells: Vec<Vec<TableCell>>,
}

/// Selections of every criterion in `rows` on one dataset, one column per k_max.
pub fn dataset_columns(
    data: &Dataset,
    k_max: &[usize],
    rows: &[Criterion],
    restarts: usize,
    seed: u64,
    opts: &CriteriaOptions,
) -> Result<Vec<Vec<ReportEntry>>> {
    let largest = *k_max
        .iter()
        .max()
        .ok_or_else(|| Error::InvalidArgument("no k_max settings".into()))?;
    let full = build_profile(
        data,
        &ProfileOptions::new(1, largest)
            .restarts(restarts)
            .seed(seed)
            .keep_assignments(true)
            .exec(opts.exec),
    )?;
    let view = PairwiseDistanceView::materialized(data, opts.exec);
    let gap_runs = if rows.contains(&Criterion::Gap) {
        opts.gap_seeds
            .iter()
            .map(|&s| gap::gap_statistic(data, &full, opts.gap_references, s, opts.exec))
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    k_max
        .iter()
        .map(|&km| {
            let profile = full.truncated(km)?;
            let mut runs = gap_runs.iter().map(|g| g.truncated(km)).collect::<Result<Vec<_>>>()?;
            gap::mark_seed_instability(&mut runs);
            let mut inputs = Inputs::new(&profile).data(data).distances(&view);
            if let Some(g) = runs.first() {
                inputs = inputs.gap(g);
            }
            run_criteria(rows, &inputs, opts)
        })
        .collect()
}

/// Regenerates every dataset and fills the comparison table.
pub fn compute_table(config: &TableConfig, rows: &[Criterion], exec: Execution) -> Result<ComparisonTable> {
    let opts = CriteriaOptions {
        gap_references: config.gap_references,
        gap_seeds: (0..config.gap_runs.max(1) as u64).map(|i| config.seed.wrapping_add(i)).collect(),
        exec,
        ..CriteriaOptions::default()
    };
    let mut columns = Vec::new();
    let mut cells = vec![Vec::new(); rows.len()];
    for ds in &config.datasets {
        let data = dataset::generate(&config.generator(ds.family))?;
        let mut ks = ds.k_max.clone();
        ks.sort_unstable();
        log::info!("table: {} (n = {}, k_max = {ks:?})", ds.family.name(), data.n());
        let per_column = dataset_columns(&data, &ks, rows, config.restarts, config.seed, &opts)?;
        for (km, entries) in ks.iter().zip(per_column) {
            columns.push(TableColumn {
                family: ds.family,
                k_max: *km,
            });
            for (row, entry) in entries.iter().enumerate() {
                cells[row].push(TableCell::from_entry(entry));
            }
        }
    }
    Ok(ComparisonTable {
        config: config.clone(),
        columns,
        rows: rows.to_vec(),
        cells,
    })
}

fn family_label(f: Family) -> &'static str {
    match f {
        Family::WellSeparated => "Well-separated",
        Family::Overlapping => "Overlapping",
        Family::ManyBlobs => "25 blobs",
        Family::Uniform => "Uniform",
        Family::Normal => "Normal",
    }
}

impl ComparisonTable {
    pub fn cell(&self, c: Criterion, family: Family, k_max: usize) -> Option<&TableCell> {
        let row = self.rows.iter().position(|&r| r == c)?;
        let col = self.columns.iter().position(|col| col.family == family && col.k_max == k_max)?;
        self.cells.get(row)?.get(col)
    }

    /// Markdown rendering; depends only on the table contents.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        out.push_str("| Criterion |");
        for c in &self.columns {
            let _ = write!(out, " {} k≤{} |", family_label(c.family), c.k_max);
        }
        out.push_str("\n|---|");
        for _ in &self.columns {
            out.push_str("---:|");
        }
        out.push('\n');
        for (row, c) in self.rows.iter().enumerate() {
            let _ = write!(out, "| {} |", c.label());
            for cell in &self.cells[row] {
                let _ = write!(out, " {} |", cell.render());
            }
            out.push('\n');
        }
        let _ = write!(
            out,
            "\n† unclustered: the score indicates no structure beyond chance. \
             ‡ unstable: truncated range, degenerate scores, or seed-dependent selection.\n\
             n = {} per dataset, {} restarts, seed {}, gap with B = {} over {} seed(s).\n",
            self.config.n, self.config.restarts, self.config.seed, self.config.gap_references, self.config.gap_runs
        );
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hand() -> SseProfile {
        SseProfile::from_sse(100, 2, 1, &[1000.0, 500.0, 100.0, 90.0, 82.0, 75.0]).unwrap()
    }

    #[test]
    fn sse_only_criteria_run_without_data() {
        let p = hand();
        let sse_only: Vec<Criterion> = Criterion::ALL
            .into_iter()
            .filter(|c| c.requirement() == Requirement::SseOnly)
            .collect();
        let entries = run_criteria(&sse_only, &Inputs::new(&p), &CriteriaOptions::default()).unwrap();
        assert_eq!(entries.len(), sse_only.len());
        for c in [Criterion::Jump, Criterion::Curvature, Criterion::Vrc, Criterion::KrzanowskiLai, Criterion::Pham] {
            assert_eq!(entries.iter().find(|e| e.criterion == c).unwrap().selected_k(), Some(3));
        }
    }

    #[test]
    fn missing_inputs_are_named() {
        let p = hand();
        let err = run_criteria(&[Criterion::Dunn, Criterion::Gap], &Inputs::new(&p), &CriteriaOptions::default());
        match err {
            Err(Error::MissingInput(msg)) => {
                assert!(msg.contains("dunn") && msg.contains("gap") && msg.contains("keep-assignments"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn report_round_trips() {
        let p = hand();
        let opts = CriteriaOptions::default();
        let entries = run_criteria(&Criterion::parse_list("jump,kneedle,kl").unwrap(), &Inputs::new(&p), &opts).unwrap();
        let report = SelectionReport::new(&p, None, &opts, entries);
        let back = SelectionReport::from_json(&report.to_json().unwrap()).unwrap();
        assert_eq!(report, back);
    }

    #[test]
    fn cell_rendering() {
        let mut cell = TableCell {
            selected_k: Some(4),
            flags: BTreeSet::new(),
            error: None,
        };
        assert_eq!(cell.render(), "4");
        cell.flags.insert(Flag::Unstable);
        cell.flags.insert(Flag::Unclustered);
        assert_eq!(cell.render(), "4†‡");
    }
}
