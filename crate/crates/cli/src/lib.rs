//! The `kselect` command line: dataset generation, profiling, criterion
//! selection, the comparison table and plot-data export.
//!
//! Exit codes: 0 success, 1 internal error, 2 usage error, 3 missing input.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use kselect_core::criteria::distance::SweepOptions;
use kselect_core::criteria::{gap, variance, Criterion, Flag};
use kselect_core::dataset::{self, Family, GeneratorSpec, Placement};
use kselect_core::profile::{build_profile, ProfileOptions};
use kselect_core::report::{self, CriteriaOptions, DatasetDescriptor, Inputs, SelectionReport, TableConfig};
use kselect_core::{Dataset, Execution, SseProfile};
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_MISSING_INPUT: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    MissingInput(String),
    #[error(transparent)]
    Core(kselect_core::Error),
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl From<kselect_core::Error> for CliError {
    fn from(e: kselect_core::Error) -> Self {
        use kselect_core::Error as E;
        match e {
            E::InvalidArgument(_) | E::KOutOfRange { .. } | E::DimensionMismatch { .. } | E::TooLarge { .. } => {
                CliError::Usage(e.to_string())
            }
            E::MissingInput(_) | E::MissingAssignments(_) => CliError::MissingInput(e.to_string()),
            E::Io { ref source, .. } if source.kind() == std::io::ErrorKind::NotFound => {
                CliError::MissingInput(e.to_string())
            }
            other => CliError::Core(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::MissingInput(_) => EXIT_MISSING_INPUT,
            CliError::Core(_) | CliError::Write { .. } => EXIT_INTERNAL,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "kselect", version, about = "Choose the number of k-means clusters")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a toy dataset as CSV.
    Datagen(DatagenArgs),
    /// Build the SSE profile of a CSV dataset.
    Profile(ProfileArgs),
    /// Apply selection criteria to a profile.
    Select(SelectArgs),
    /// Regenerate all toy datasets and tabulate every criterion.
    Table(TableArgs),
    /// Export curves for plotting.
    Plotdata(PlotdataArgs),
}

fn parse_family(s: &str) -> Result<Family, String> {
    s.parse().map_err(|e: kselect_core::Error| e.to_string())
}

fn parse_placement(s: &str) -> Result<Placement, String> {
    s.parse().map_err(|e: kselect_core::Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct DatagenArgs {
    /// well_separated, overlapping, many_blobs, uniform or normal.
    #[arg(long, value_parser = parse_family)]
    pub family: Family,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Standard deviation of each blob.
    #[arg(long)]
    pub blob_std: Option<f64>,
    /// Center layout of many_blobs: grid or random.
    #[arg(long, value_parser = parse_placement)]
    pub placement: Option<Placement>,
    /// Distance between neighbouring blob centers.
    #[arg(long)]
    pub spacing: Option<f64>,
    /// Dimensionality of uniform and normal data.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Side length of the uniform cube.
    #[arg(long)]
    pub domain: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub kmin: usize,
    #[arg(long)]
    pub kmax: usize,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Store point assignments (needed by Marriott, BIC and distance indices).
    #[arg(long)]
    pub keep_assignments: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GapArgs {
    /// Number of uniform reference sets.
    #[arg(long = "gap-b", default_value_t = gap::DEFAULT_REFERENCES)]
    pub references: usize,
    /// Seed of the reference sets; defaults to the profile seed.
    #[arg(long)]
    pub gap_seed: Option<u64>,
    /// Repeat the gap statistic with consecutive seeds; disagreement flags instability.
    #[arg(long, default_value_t = 1)]
    pub gap_runs: usize,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long)]
    pub profile: PathBuf,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// `all` or a comma-separated list of criterion names.
    #[arg(long, default_value = "all")]
    pub criteria: String,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub gap: GapArgs,
    #[arg(long, default_value_t = 1.0)]
    pub kneedle_sensitivity: f64,
    /// Silhouette refuses more points than this unless --subsample-seed is given.
    #[arg(long, default_value_t = 20_000)]
    pub silhouette_max_n: usize,
    #[arg(long)]
    pub subsample_seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Points per dataset.
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, value_parser = parse_placement, default_value = "random")]
    pub placement: Placement,
    #[arg(long = "gap-b", default_value_t = gap::DEFAULT_REFERENCES)]
    pub references: usize,
    #[arg(long, default_value_t = 3)]
    pub gap_runs: usize,
    /// Also write the table as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    /// Columns k, sse.
    Elbow,
    /// Columns k, sse, sse_hat, ratio.
    Reduction,
    /// Columns k, gap, sd (needs --data).
    Gap,
}

#[derive(Debug, Args)]
pub struct PlotdataArgs {
    #[arg(long)]
    pub profile: PathBuf,
    #[arg(long, value_enum)]
    pub kind: PlotKind,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    pub gap: GapArgs,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return e.exit_code();
    }
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Applies `KSELECT_THREADS` to the global worker pool.
fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var("KSELECT_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Usage(format!("KSELECT_THREADS must be a positive integer, got '{value}'")))?;
    #[cfg(feature = "parallel")]
    {
        // A second configuration attempt in the same process is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    Ok(())
}

pub fn execute(command: Command) -> CliResult<()> {
    match command {
        Command::Datagen(a) => cmd_datagen(a),
        Command::Profile(a) => cmd_profile(a),
        Command::Select(a) => cmd_select(a),
        Command::Table(a) => cmd_table(a),
        Command::Plotdata(a) => cmd_plotdata(a),
    }
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let err = |source| CliError::Write {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(err)?;
    tmp.write_all(bytes).map_err(err)?;
    tmp.flush().map_err(err)?;
    tmp.persist(path).map_err(|e| err(e.error))?;
    Ok(())
}

fn load_profile(path: &Path) -> CliResult<SseProfile> {
    Ok(SseProfile::load(path)?)
}

fn load_matching_data(path: &Path, profile: &SseProfile) -> CliResult<Dataset> {
    let data = dataset::load_csv(path)?;
    if data.n() != profile.n || data.d() != profile.d {
        return Err(CliError::Usage(format!(
            "{} has {} points in {} dimensions but the profile was built on {} points in {}",
            path.display(),
            data.n(),
            data.d(),
            profile.n,
            profile.d
        )));
    }
    Ok(data)
}

fn gap_seeds(args: &GapArgs, profile: &SseProfile) -> Vec<u64> {
    let base = args.gap_seed.unwrap_or(profile.master_seed);
    (0..args.gap_runs.max(1) as u64).map(|i| base.wrapping_add(i)).collect()
}

fn cmd_datagen(a: DatagenArgs) -> CliResult<()> {
    let mut spec = GeneratorSpec::new(a.family, a.n, a.seed);
    if let Some(v) = a.blob_std {
        spec = spec.blob_std(v);
    }
    if let Some(v) = a.placement {
        spec = spec.placement(v);
    }
    if let Some(v) = a.spacing {
        spec = spec.spacing(v);
    }
    if let Some(v) = a.dim {
        spec = spec.dim(v);
    }
    if let Some(v) = a.domain {
        spec = spec.domain(v);
    }
    let data = dataset::generate(&spec)?;
    let mut buf = Vec::new();
    dataset::write_csv(&data, &mut buf).map_err(|source| CliError::Write {
        path: a.out.clone(),
        source,
    })?;
    write_atomic(&a.out, &buf)?;
    log::info!("wrote {} points to {}", data.n(), a.out.display());
    Ok(())
}

fn cmd_profile(a: ProfileArgs) -> CliResult<()> {
    let data = dataset::load_csv(&a.input)?;
    let opts = ProfileOptions::new(a.kmin, a.kmax)
        .restarts(a.restarts)
        .seed(a.seed)
        .keep_assignments(a.keep_assignments);
    let profile = build_profile(&data, &opts)?;
    write_atomic(&a.out, profile.to_json()?.as_bytes())
}

fn cmd_select(a: SelectArgs) -> CliResult<()> {
    let criteria = Criterion::parse_list(&a.criteria).map_err(|e| CliError::Usage(e.to_string()))?;
    let profile = load_profile(&a.profile)?;
    let data = a.data.as_deref().map(|p| load_matching_data(p, &profile)).transpose()?;
    let opts = CriteriaOptions {
        kneedle_sensitivity: a.kneedle_sensitivity,
        gap_references: a.gap.references,
        gap_seeds: gap_seeds(&a.gap, &profile),
        sweep: SweepOptions {
            silhouette_max_n: a.silhouette_max_n,
            subsample_seed: a.subsample_seed,
            ..SweepOptions::default()
        },
        ..CriteriaOptions::default()
    };
    let mut inputs = Inputs::new(&profile);
    if let Some(d) = &data {
        inputs = inputs.data(d);
    }
    let missing = report::missing_inputs(&criteria, &inputs);
    if !missing.is_empty() {
        return Err(CliError::MissingInput(format!("missing inputs: {}", missing.join("; "))));
    }
    let entries = report::run_criteria(&criteria, &inputs, &opts)?;
    let descriptor = match (&data, &a.data) {
        (Some(d), Some(path)) => Some(DatasetDescriptor::of(path.display().to_string(), d)),
        _ => None,
    };
    let report = SelectionReport::new(&profile, descriptor, &opts, entries);
    write_atomic(&a.out, report.to_json()?.as_bytes())?;
    for e in &report.entries {
        match (&e.result, &e.error) {
            (Some(r), _) => {
                let mut marks = String::new();
                if r.has(Flag::Unclustered) {
                    marks.push_str(" unclustered");
                }
                if r.has(Flag::Unstable) {
                    marks.push_str(" unstable");
                }
                println!("{:<22} {}{}", e.criterion.name(), r.selected_k, marks);
            }
            (None, Some(err)) => println!("{:<22} error: {err}", e.criterion.name()),
            (None, None) => {}
        }
    }
    Ok(())
}

fn cmd_table(a: TableArgs) -> CliResult<()> {
    let mut config = TableConfig::new(a.seed, a.restarts);
    config.n = a.n;
    config.many_blobs_placement = a.placement;
    config.gap_references = a.references;
    config.gap_runs = a.gap_runs;
    let table = report::compute_table(&config, &Criterion::TABLE, Execution::default())?;
    write_atomic(&a.out, table.to_markdown().as_bytes())?;
    if let Some(path) = &a.json {
        write_atomic(path, table.to_json()?.as_bytes())?;
    }
    Ok(())
}

fn cmd_plotdata(a: PlotdataArgs) -> CliResult<()> {
    let profile = load_profile(&a.profile)?;
    let mut buf = Vec::new();
    let io = |source| CliError::Write {
        path: a.out.clone(),
        source,
    };
    match a.kind {
        PlotKind::Elbow => {
            writeln!(buf, "k,sse").map_err(io)?;
            for e in &profile.entries {
                writeln!(buf, "{},{}", e.k, e.sse).map_err(io)?;
            }
        }
        PlotKind::Reduction => {
            if profile.k_min != 1 {
                return Err(CliError::Usage(format!(
                    "the reduction curve needs a profile starting at k = 1, got k_min = {}",
                    profile.k_min
                )));
            }
            variance::reduction_curve(&profile)?.write_csv(&mut buf).map_err(io)?;
        }
        PlotKind::Gap => {
            let path = a
                .data
                .as_deref()
                .ok_or_else(|| CliError::MissingInput("the gap curve needs the data (--data)".into()))?;
            let data = load_matching_data(path, &profile)?;
            let seed = gap_seeds(&a.gap, &profile)[0];
            gap::gap_statistic(&data, &profile, a.gap.references, seed, Execution::default())?
                .write_csv(&mut buf)
                .map_err(io)?;
        }
    }
    write_atomic(&a.out, &buf)
}
