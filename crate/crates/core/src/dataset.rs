//! Labeled dataset container and the on-disk formats it can be read from
//! and written to.
//!
//! Every loader produces features scaled to `[0, 1]`; pixel formats divide
//! each byte by 255. Inputs that would break that range are rejected rather
//! than clamped.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
const CIFAR_RECORD_LEN: usize = 1 + 3072;
const CIFAR_CLASSES: u8 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    Idx,
    Cifar10,
    Csv,
    /// Rows materialized in memory (subsets, synthetic points, fixtures).
    Memory,
}

/// Where a dataset came from, carried into reports.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSource {
    pub format: DatasetFormat,
    pub paths: Vec<PathBuf>,
}

impl DatasetSource {
    pub fn memory() -> Self {
        DatasetSource {
            format: DatasetFormat::Memory,
            paths: Vec::new(),
        }
    }
}

/// `n` feature rows of dimension `d`, stored row-major, with one class id each.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Vec<f32>,
    dim: usize,
    labels: Vec<u32>,
    num_classes: u32,
    source: DatasetSource,
}

impl LabeledDataset {
    /// Builds a dataset after checking every invariant. `num_classes` defaults
    /// to `max label + 1`.
    pub fn new(
        features: Vec<f32>,
        dim: usize,
        labels: Vec<u32>,
        num_classes: Option<u32>,
        source: DatasetSource,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Consistency(
                "feature dimension must be at least 1".into(),
            ));
        }
        if labels.is_empty() {
            return Err(Error::Consistency(
                "dataset must contain at least one row".into(),
            ));
        }
        if features.len() != labels.len() * dim {
            return Err(Error::Consistency(format!(
                "{} feature values do not form {} rows of dimension {}",
                features.len(),
                labels.len(),
                dim
            )));
        }
        if let Some(pos) = features
            .iter()
            .position(|v| !v.is_finite() || *v < 0.0 || *v > 1.0)
        {
            return Err(Error::Consistency(format!(
                "feature value {} at row {}, column {} is outside [0, 1]",
                features[pos],
                pos / dim,
                pos % dim
            )));
        }
        let inferred = labels.iter().copied().max().unwrap_or(0) + 1;
        let num_classes = match num_classes {
            Some(k) if k < inferred => {
                return Err(Error::Consistency(format!(
                    "label {} is not below the declared class count {}",
                    inferred - 1,
                    k
                )))
            }
            Some(k) => k,
            None => inferred,
        };
        Ok(LabeledDataset {
            features,
            dim,
            labels,
            num_classes,
            source,
        })
    }

    /// Raises the class count, for datasets whose highest classes are absent.
    pub fn with_num_classes(mut self, num_classes: u32) -> Result<Self> {
        let inferred = self.labels.iter().copied().max().unwrap_or(0) + 1;
        if num_classes < inferred {
            return Err(Error::Consistency(format!(
                "class count {num_classes} is smaller than max label + 1 = {inferred}"
            )));
        }
        self.num_classes = num_classes;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> u32 {
        self.num_classes
    }

    pub fn source(&self) -> &DatasetSource {
        &self.source
    }

    pub fn features(&self) -> &[f32] {
        &self.features
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn label(&self, i: usize) -> u32 {
        self.labels[i]
    }

    /// Number of rows per class id, including zero counts for absent classes.
    pub fn class_counts(&self) -> BTreeMap<u32, usize> {
        let mut counts: BTreeMap<u32, usize> = (0..self.num_classes).map(|c| (c, 0)).collect();
        for &l in &self.labels {
            *counts.entry(l).or_default() += 1;
        }
        counts
    }

    /// Copies the selected rows into a new in-memory dataset with the same
    /// class count.
    pub fn subset(&self, spec: &SubsetSpec) -> Result<LabeledDataset> {
        spec.check_against(self.len())?;
        let mut features = Vec::with_capacity(spec.len() * self.dim);
        let mut labels = Vec::with_capacity(spec.len());
        for &i in spec.indices() {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        LabeledDataset::new(
            features,
            self.dim,
            labels,
            Some(self.num_classes),
            DatasetSource::memory(),
        )
    }

    /// 64-bit FNV-1a digest of shape, labels and feature bits. Used to tie a
    /// reduction result to the dataset it was computed from.
    pub fn fingerprint(&self) -> u64 {
        const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut h = OFFSET;
        let mut feed = |bytes: &[u8]| {
            for &b in bytes {
                h ^= u64::from(b);
                h = h.wrapping_mul(PRIME);
            }
        };
        feed(&(self.len() as u64).to_le_bytes());
        feed(&(self.dim as u64).to_le_bytes());
        for &l in &self.labels {
            feed(&l.to_le_bytes());
        }
        for &v in &self.features {
            feed(&v.to_bits().to_le_bytes());
        }
        h
    }
}

/// Strictly increasing, non-empty list of row indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct SubsetSpec {
    indices: Vec<usize>,
}

impl SubsetSpec {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Consistency("subset must not be empty".into()));
        }
        if let Some(w) = indices.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::Consistency(format!(
                "subset indices must be strictly increasing, found {} followed by {}",
                w[0], w[1]
            )));
        }
        Ok(SubsetSpec { indices })
    }

    /// Sorts and de-duplicates before validating.
    pub fn from_unsorted(mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        SubsetSpec::new(indices)
    }

    pub fn full(n: usize) -> Result<Self> {
        SubsetSpec::new((0..n).collect())
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn check_against(&self, n: usize) -> Result<()> {
        match self.indices.last() {
            Some(&last) if last >= n => Err(Error::Consistency(format!(
                "subset index {last} is out of range for a dataset of {n} rows"
            ))),
            _ => Ok(()),
        }
    }
}

impl TryFrom<Vec<usize>> for SubsetSpec {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        SubsetSpec::new(v)
    }
}

impl From<SubsetSpec> for Vec<usize> {
    fn from(s: SubsetSpec) -> Self {
        s.indices
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn truncated(path: &Path, offset: usize, needed: usize) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        offset: Some(offset as u64),
        source: io::Error::new(
            io::ErrorKind::UnexpectedEof,
            format!("file truncated, expected {needed} more bytes"),
        ),
    }
}

fn be_u32(path: &Path, bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| truncated(path, bytes.len(), offset + 4 - bytes.len()))
}

/// Reads an IDX image/label file pair (MNIST layout).
pub fn load_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<LabeledDataset> {
    let images_path = images_path.as_ref();
    let labels_path = labels_path.as_ref();

    let images = read_file(images_path)?;
    let magic = be_u32(images_path, &images, 0)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::format(
            images_path,
            format!("expected IDX image magic 0x{IDX_IMAGES_MAGIC:08x}, found 0x{magic:08x}"),
        ));
    }
    let count = be_u32(images_path, &images, 4)? as usize;
    let rows = be_u32(images_path, &images, 8)? as usize;
    let cols = be_u32(images_path, &images, 12)? as usize;
    let dim = rows * cols;
    let payload = &images[16..];
    if payload.len() < count * dim {
        return Err(truncated(
            images_path,
            images.len(),
            count * dim - payload.len(),
        ));
    }
    if payload.len() > count * dim {
        return Err(Error::format(
            images_path,
            format!(
                "{} trailing bytes after {count} images",
                payload.len() - count * dim
            ),
        ));
    }

    let labels = read_file(labels_path)?;
    let magic = be_u32(labels_path, &labels, 0)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::format(
            labels_path,
            format!("expected IDX label magic 0x{IDX_LABELS_MAGIC:08x}, found 0x{magic:08x}"),
        ));
    }
    let label_count = be_u32(labels_path, &labels, 4)? as usize;
    if label_count != count {
        return Err(Error::Consistency(format!(
            "{} holds {count} images but {} holds {label_count} labels",
            images_path.display(),
            labels_path.display()
        )));
    }
    let label_payload = &labels[8..];
    if label_payload.len() < count {
        return Err(truncated(
            labels_path,
            labels.len(),
            count - label_payload.len(),
        ));
    }
    if label_payload.len() > count {
        return Err(Error::format(
            labels_path,
            format!(
                "{} trailing bytes after {count} labels",
                label_payload.len() - count
            ),
        ));
    }

    let features = payload.iter().map(|&b| f32::from(b) / 255.0).collect();
    let labels = label_payload.iter().map(|&b| u32::from(b)).collect();
    LabeledDataset::new(
        features,
        dim,
        labels,
        None,
        DatasetSource {
            format: DatasetFormat::Idx,
            paths: vec![images_path.to_path_buf(), labels_path.to_path_buf()],
        },
    )
}

/// Reads and concatenates CIFAR-10 binary batches. Pixel layout is kept as
/// stored (1024 red, then green, then blue bytes per record).
pub fn load_cifar10<P: AsRef<Path>>(batch_paths: &[P]) -> Result<LabeledDataset> {
    if batch_paths.is_empty() {
        return Err(Error::Parameter("no CIFAR-10 batch files given".into()));
    }
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for path in batch_paths {
        let path = path.as_ref();
        let bytes = read_file(path)?;
        if bytes.is_empty() || bytes.len() % CIFAR_RECORD_LEN != 0 {
            return Err(Error::format(
                path,
                format!(
                    "length {} is not a positive multiple of the {CIFAR_RECORD_LEN}-byte record size",
                    bytes.len()
                ),
            ));
        }
        features.reserve(bytes.len() / CIFAR_RECORD_LEN * (CIFAR_RECORD_LEN - 1));
        for (r, record) in bytes.chunks_exact(CIFAR_RECORD_LEN).enumerate() {
            if record[0] >= CIFAR_CLASSES {
                return Err(Error::Consistency(format!(
                    "{}: record {r} has label byte {} (expected < {CIFAR_CLASSES})",
                    path.display(),
                    record[0]
                )));
            }
            labels.push(u32::from(record[0]));
            features.extend(record[1..].iter().map(|&b| f32::from(b) / 255.0));
        }
    }
    LabeledDataset::new(
        features,
        CIFAR_RECORD_LEN - 1,
        labels,
        None,
        DatasetSource {
            format: DatasetFormat::Cifar10,
            paths: batch_paths
                .iter()
                .map(|p| p.as_ref().to_path_buf())
                .collect(),
        },
    )
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CsvOptions {
    pub has_header: bool,
    /// Rescale all feature values by the global min and max of the file.
    pub normalize: bool,
}

/// Reads `label,f1,...,fd` rows.
pub fn load_csv(path: impl AsRef<Path>, options: CsvOptions) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(options.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let mut raw: Vec<f64> = Vec::new();
    let mut stored: Vec<f32> = Vec::new();
    let mut labels = Vec::new();
    let mut dim = None;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let row = e.position().map(|p| p.line() as usize).unwrap_or(0);
            Error::Parse {
                path: path.to_path_buf(),
                row,
                column: 0,
                message: e.to_string(),
            }
        })?;
        let row = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() < 2 {
            return Err(Error::format(
                path,
                format!("row {row} has no feature columns"),
            ));
        }
        let width = record.len() - 1;
        match dim {
            None => dim = Some(width),
            Some(d) if d != width => {
                return Err(Error::format(
                    path,
                    format!("row {row} has {width} features, expected {d}"),
                ))
            }
            Some(_) => {}
        }
        let label: u32 = record[0].parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            row,
            column: 1,
            message: format!("label {:?} is not a non-negative integer", &record[0]),
        })?;
        labels.push(label);
        for (c, cell) in record.iter().enumerate().skip(1) {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                row,
                column: c + 1,
                message: format!("{cell:?} is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row,
                    column: c + 1,
                    message: format!("{cell:?} is not finite"),
                });
            }
            if options.normalize {
                raw.push(v);
            } else {
                // parsed again as f32 so values printed from f32 round-trip exactly
                stored.push(cell.parse().unwrap_or(v as f32));
            }
        }
    }
    let dim = dim.ok_or_else(|| Error::format(path, "no data rows"))?;

    let features: Vec<f32> = if options.normalize {
        let (lo, hi) = raw
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        let span = hi - lo;
        raw.iter()
            .map(|&v| {
                if span > 0.0 {
                    ((v - lo) / span) as f32
                } else {
                    0.0
                }
            })
            .collect()
    } else {
        stored
    };

    LabeledDataset::new(
        features,
        dim,
        labels,
        None,
        DatasetSource {
            format: DatasetFormat::Csv,
            paths: vec![path.to_path_buf()],
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubsetFormat {
    /// One decimal index per line.
    Indices,
    /// `label,f1,...,fd` rows with feature values as stored.
    Csv,
}

pub fn write_subset(
    ds: &LabeledDataset,
    spec: &SubsetSpec,
    out_path: impl AsRef<Path>,
    format: SubsetFormat,
) -> Result<()> {
    let out_path = out_path.as_ref();
    spec.check_against(ds.len())?;
    let file = File::create(out_path).map_err(|e| Error::io(out_path, e))?;
    let mut w = BufWriter::new(file);
    let res: io::Result<()> = (|| {
        match format {
            SubsetFormat::Indices => {
                for &i in spec.indices() {
                    writeln!(w, "{i}")?;
                }
            }
            SubsetFormat::Csv => {
                for &i in spec.indices() {
                    write_csv_row(&mut w, ds.label(i), ds.row(i))?;
                }
            }
        }
        w.flush()
    })();
    res.map_err(|e| Error::io(out_path, e))
}

pub(crate) fn write_csv_row<W: Write>(w: &mut W, label: u32, row: &[f32]) -> io::Result<()> {
    write!(w, "{label}")?;
    for v in row {
        write!(w, ",{v}")?;
    }
    writeln!(w)
}

/// Reads an indices file written by [`write_subset`].
pub fn read_indices(path: impl AsRef<Path>) -> Result<SubsetSpec> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut indices = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        indices.push(line.parse::<usize>().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            row: line_no + 1,
            column: 1,
            message: format!("{line:?} is not a non-negative integer"),
        })?);
    }
    SubsetSpec::new(indices)
}
