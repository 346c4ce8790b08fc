//! Point tables, the five toy generators, and CSV point files.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, stream};

/// Ground truth attached to generated data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub family: String,
    pub true_k: Option<usize>,
    pub seed: Option<u64>,
    pub generator: Option<GeneratorSpec>,
}

/// An immutable `n × d` table of finite coordinates, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    values: Vec<f64>,
    n: usize,
    d: usize,
    meta: Option<DatasetMeta>,
}

impl Dataset {
    /// Builds a dataset from rows. Every row must have the same non-zero length
    /// and only finite values.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyDataset)?;
        let d = first.as_ref().len();
        if d == 0 {
            return Err(Error::EmptyDataset);
        }
        let mut values = Vec::with_capacity(rows.len() * d);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != d {
                return Err(Error::InconsistentDimensionality {
                    row: i,
                    expected: d,
                    found: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { row: i });
            }
            values.extend_from_slice(row);
        }
        Ok(Dataset {
            values,
            n: rows.len(),
            d,
            meta: None,
        })
    }

    /// Builds a dataset from a flat row-major buffer.
    pub fn from_flat(values: Vec<f64>, d: usize) -> Result<Self> {
        if d == 0 || values.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if !values.len().is_multiple_of(d) {
            return Err(Error::InvalidArgument(format!(
                "buffer of {} values is not a multiple of d = {d}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: pos / d });
        }
        let n = values.len() / d;
        Ok(Dataset {
            values,
            n,
            d,
            meta: None,
        })
    }

    /// Convenience constructor for one-dimensional data.
    pub fn from_1d(values: &[f64]) -> Result<Self> {
        Self::from_flat(values.to_vec(), 1)
    }

    pub fn with_meta(mut self, meta: DatasetMeta) -> Self {
        self.meta = Some(meta);
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn meta(&self) -> Option<&DatasetMeta> {
        self.meta.as_ref()
    }

    pub fn true_k(&self) -> Option<usize> {
        self.meta.as_ref().and_then(|m| m.true_k)
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.d)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.values
    }

    /// Coordinate-wise mean.
    pub fn mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.d];
        for p in self.points() {
            for (m, v) in mean.iter_mut().zip(p) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= self.n as f64);
        mean
    }

    /// Axis-aligned bounding box.
    pub fn bounding_box(&self) -> BoundingBox {
        let mut lo = self.point(0).to_vec();
        let mut hi = lo.clone();
        for p in self.points() {
            for j in 0..self.d {
                lo[j] = lo[j].min(p[j]);
                hi[j] = hi[j].max(p[j]);
            }
        }
        BoundingBox { lo, hi }
    }

    /// Applies `f` to every coordinate, keeping the metadata. Used by the
    /// invariance tests (translation, scaling).
    pub fn map_coords(&self, f: impl Fn(usize, f64) -> f64) -> Result<Dataset> {
        let d = self.d;
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| f(i % d, v))
            .collect();
        let mut out = Dataset::from_flat(values, d)?;
        out.meta = self.meta.clone();
        Ok(out)
    }

    /// Rows selected by index, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Dataset> {
        let mut values = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            values.extend_from_slice(self.point(i));
        }
        Dataset::from_flat(values, self.d)
    }
}

/// Axis-aligned box `[lo, hi]`, possibly with zero width on some axes.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundingBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoundingBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::InvalidArgument(
                "bounding box corners must have equal, non-zero length".into(),
            ));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l.is_finite() && h.is_finite() && l <= h)) {
            return Err(Error::InvalidArgument(
                "bounding box needs finite lo <= hi on every axis".into(),
            ));
        }
        Ok(BoundingBox { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn extent(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).collect()
    }
}

/// The toy data families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    WellSeparated,
    Overlapping,
    ManyBlobs,
    Uniform,
    Normal,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::WellSeparated,
        Family::Overlapping,
        Family::ManyBlobs,
        Family::Uniform,
        Family::Normal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::WellSeparated => "well_separated",
            Family::Overlapping => "overlapping",
            Family::ManyBlobs => "many_blobs",
            Family::Uniform => "uniform",
            Family::Normal => "normal",
        }
    }

    pub fn true_k(self) -> usize {
        match self {
            Family::WellSeparated | Family::Overlapping => 3,
            Family::ManyBlobs => 25,
            Family::Uniform | Family::Normal => 1,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Family::ALL
            .into_iter()
            .find(|f| f.name() == norm)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown family '{s}'")))
    }
}

/// Blob center layout for [`Family::ManyBlobs`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// 5 × 5 grid with the configured spacing.
    #[default]
    Grid,
    /// Centers uniform in a square of side `5 · spacing`; blobs may overlap.
    Random,
}

impl FromStr for Placement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "grid" => Ok(Placement::Grid),
            "random" => Ok(Placement::Random),
            other => Err(Error::InvalidArgument(format!("unknown placement '{other}'"))),
        }
    }
}

impl fmt::Display for Placement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Placement::Grid => "grid",
            Placement::Random => "random",
        })
    }
}

/// Parameters for [`generate`].
///
/// Defaults per family (all two-dimensional unless `dim` is overridden for
/// `uniform`/`normal`):
///
/// | family          | layout                                                   |
/// |-----------------|----------------------------------------------------------|
/// | well_separated  | 3 unit-std Gaussian blobs on a triangle with side 12      |
/// | overlapping     | 3 unit-std Gaussian blobs on a triangle with side 3       |
/// | many_blobs      | 25 unit-std Gaussian blobs, grid spacing 10, or random    |
/// | uniform         | uniform on `[0, domain]^dim`                              |
/// | normal          | standard Gaussian in `dim` dimensions                     |
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub family: Family,
    pub n: usize,
    pub seed: u64,
    pub blob_std: f64,
    /// Distance between neighboring blob centers; `None` picks the family default.
    pub spacing: Option<f64>,
    pub placement: Placement,
    /// Side length of the uniform domain.
    pub domain: f64,
    pub dim: usize,
}

impl GeneratorSpec {
    pub fn new(family: Family, n: usize, seed: u64) -> Self {
        GeneratorSpec {
            family,
            n,
            seed,
            blob_std: 1.0,
            spacing: None,
            placement: Placement::Grid,
            domain: 1.0,
            dim: 2,
        }
    }

    pub fn blob_std(mut self, std: f64) -> Self {
        self.blob_std = std;
        self
    }

    pub fn spacing(mut self, spacing: f64) -> Self {
        self.spacing = Some(spacing);
        self
    }

    pub fn placement(mut self, placement: Placement) -> Self {
        self.placement = placement;
        self
    }

    pub fn domain(mut self, domain: f64) -> Self {
        self.domain = domain;
        self
    }

    pub fn dim(mut self, dim: usize) -> Self {
        self.dim = dim;
        self
    }

    fn effective_spacing(&self) -> f64 {
        self.spacing.unwrap_or(match self.family {
            Family::WellSeparated => 12.0,
            Family::Overlapping => 3.0,
            Family::ManyBlobs => 10.0,
            Family::Uniform | Family::Normal => 0.0,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidArgument("n must be positive".into()));
        }
        if !(self.blob_std.is_finite() && self.blob_std >= 0.0) {
            return Err(Error::InvalidArgument("blob_std must be finite and >= 0".into()));
        }
        if let Some(s) = self.spacing {
            if !(s.is_finite() && s >= 0.0) {
                return Err(Error::InvalidArgument("spacing must be finite and >= 0".into()));
            }
        }
        if !(self.domain.is_finite() && self.domain > 0.0) {
            return Err(Error::InvalidArgument("domain must be finite and > 0".into()));
        }
        match self.family {
            Family::Uniform | Family::Normal if self.dim == 0 => {
                Err(Error::InvalidArgument("dim must be positive".into()))
            }
            Family::WellSeparated | Family::Overlapping | Family::ManyBlobs if self.dim != 2 => {
                Err(Error::InvalidArgument(format!(
                    "{} data is two-dimensional; got dim = {}",
                    self.family, self.dim
                )))
            }
            _ => Ok(()),
        }
    }

    /// Blob centers for the blob families; empty otherwise.
    pub fn centers(&self) -> Vec<[f64; 2]> {
        let spacing = self.effective_spacing();
        match self.family {
            Family::WellSeparated | Family::Overlapping => {
                let h = spacing * 3f64.sqrt() / 2.0;
                vec![[0.0, 0.0], [spacing, 0.0], [spacing / 2.0, h]]
            }
            Family::ManyBlobs => match self.placement {
                Placement::Grid => (0..25)
                    .map(|i| [(i % 5) as f64 * spacing, (i / 5) as f64 * spacing])
                    .collect(),
                Placement::Random => {
                    let side = 5.0 * spacing;
                    let mut rng = rng::rng_for(self.seed, &[stream::GENERATOR_CENTERS]);
                    (0..25)
                        .map(|_| [rng.random::<f64>() * side, rng.random::<f64>() * side])
                        .collect()
                }
            },
            Family::Uniform | Family::Normal => Vec::new(),
        }
    }
}

/// Generates a toy dataset. The same spec always yields bitwise-identical points.
pub fn generate(spec: &GeneratorSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = rng::rng_for(spec.seed, &[stream::GENERATOR_POINTS]);
    let values: Vec<f64> = match spec.family {
        Family::Uniform => (0..spec.n * spec.dim)
            .map(|_| rng.random::<f64>() * spec.domain)
            .collect(),
        Family::Normal => (0..spec.n * spec.dim)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect(),
        _ => {
            let centers = spec.centers();
            // Points cycle through the blobs so blob sizes differ by at most one.
            let mut values = Vec::with_capacity(spec.n * 2);
            for i in 0..spec.n {
                let c = centers[i % centers.len()];
                for center in c {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    values.push(center + spec.blob_std * z);
                }
            }
            values
        }
    };
    let meta = DatasetMeta {
        family: spec.family.name().to_string(),
        true_k: Some(spec.family.true_k()),
        seed: Some(spec.seed),
        generator: Some(spec.clone()),
    };
    let d = if spec.family.true_k() == 1 { spec.dim } else { 2 };
    Ok(Dataset::from_flat(values, d)?.with_meta(meta))
}

/// Reads a comma-separated point file. A first row containing any
/// non-numeric cell is treated as a header.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text)
}

pub fn parse_csv(text: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut values = Vec::new();
    let mut d = None;
    let mut row_index = 0usize;
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, &str> = record
            .iter()
            .map(|c| c.parse::<f64>().map_err(|_| c))
            .collect();
        let row = match parsed {
            Ok(row) => row,
            Err(_) if line == 0 => continue,
            Err(cell) => {
                return Err(Error::NonNumeric {
                    row: row_index,
                    cell: cell.to_string(),
                })
            }
        };
        match d {
            None => d = Some(row.len()),
            Some(expected) if expected != row.len() => {
                return Err(Error::InconsistentDimensionality {
                    row: row_index,
                    expected,
                    found: row.len(),
                })
            }
            _ => {}
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: row_index });
        }
        values.extend(row);
        row_index += 1;
    }
    let d = d.ok_or(Error::EmptyDataset)?;
    Dataset::from_flat(values, d)
}

/// Writes one point per row, with a `x0,x1,...` header. Values use the
/// shortest representation that parses back to the same `f64`.
pub fn save_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(dataset, &mut out).map_err(|e| Error::io(path, e))
}

pub fn write_csv<W: Write>(dataset: &Dataset, out: &mut W) -> std::io::Result<()> {
    let header: Vec<String> = (0..dataset.d()).map(|j| format!("x{j}")).collect();
    writeln!(out, "{}", header.join(","))?;
    for p in dataset.points() {
        let row: Vec<String> = p.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_lands_in_unit_square() {
        let ds = generate(&GeneratorSpec::new(Family::Uniform, 1000, 7)).unwrap();
        assert_eq!((ds.n(), ds.d()), (1000, 2));
        assert_eq!(ds.true_k(), Some(1));
        assert!(ds.as_flat().iter().all(|&v| (0.0..1.0).contains(&v)));
    }

    #[test]
    fn normal_is_one_gaussian() {
        let ds = generate(&GeneratorSpec::new(Family::Normal, 1000, 7)).unwrap();
        assert_eq!(ds.true_k(), Some(1));
        let mean = ds.mean();
        assert!(mean.iter().all(|m| m.abs() < 0.15), "{mean:?}");
    }

    #[test]
    fn zero_std_blobs_collapse_to_centers() {
        let spec = GeneratorSpec::new(Family::WellSeparated, 3, 1).blob_std(0.0);
        let ds = generate(&spec).unwrap();
        assert_eq!(ds.true_k(), Some(3));
        let centers = spec.centers();
        for (i, c) in centers.iter().enumerate().take(3) {
            assert_eq!(ds.point(i), &c[..]);
        }
        assert_ne!(ds.point(0), ds.point(1));
        assert_ne!(ds.point(1), ds.point(2));

        let grid = GeneratorSpec::new(Family::ManyBlobs, 100, 5).blob_std(0.0);
        let ds = generate(&grid).unwrap();
        let centers = grid.centers();
        assert!(ds.points().all(|p| centers.iter().any(|c| p == &c[..])));
    }

    #[test]
    fn well_separated_centers_are_far_apart() {
        let spec = GeneratorSpec::new(Family::WellSeparated, 10, 0);
        let c = spec.centers();
        for i in 0..3 {
            for j in i + 1..3 {
                let dist = ((c[i][0] - c[j][0]).powi(2) + (c[i][1] - c[j][1]).powi(2)).sqrt();
                assert!(dist >= 10.0 * spec.blob_std);
            }
        }
    }

    #[test]
    fn determinism_per_seed() {
        for family in Family::ALL {
            let spec = GeneratorSpec::new(family, 200, 11).placement(Placement::Random);
            assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        }
        let a = generate(&GeneratorSpec::new(Family::Normal, 10, 1)).unwrap();
        let b = generate(&GeneratorSpec::new(Family::Normal, 10, 2)).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(generate(&GeneratorSpec::new(Family::Uniform, 0, 1)).is_err());
        assert!(generate(&GeneratorSpec::new(Family::ManyBlobs, 10, 1).dim(3)).is_err());
        assert!("spiral".parse::<Family>().is_err());
        assert_eq!("many-blobs".parse::<Family>().unwrap(), Family::ManyBlobs);
    }

    #[test]
    fn csv_errors() {
        assert!(matches!(parse_csv(""), Err(Error::EmptyDataset)));
        assert!(matches!(parse_csv("x,y\n"), Err(Error::EmptyDataset)));
        let err = parse_csv("1,2\n3\n").unwrap_err();
        assert!(err.to_string().contains("inconsistent dimensionality"), "{err}");
        assert!(matches!(parse_csv("1,2\n3,abc\n"), Err(Error::NonNumeric { row: 1, .. })));
        let ds = parse_csv("a,b\n1, 2\n\n3,4.5\n").unwrap();
        assert_eq!(ds.as_flat(), &[1.0, 2.0, 3.0, 4.5]);
    }
}
