//! Synthetic datasets, labeled CSV input/output and the train/test split.

use std::fs::File;
use std::path::{Path, PathBuf};

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::{Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::rng::RngSeed;
use crate::scalar::Real;
use crate::signal::{Dictionary, Normalization, Preprocessor, SignalMatrix};

/// Signals (columns) with binary labels, 1 marking an outlier.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset<T> {
    pub signals: SignalMatrix<T>,
    pub labels: Vec<u8>,
    pub name: String,
}

impl<T: Real> LabeledDataset<T> {
    pub fn new(signals: SignalMatrix<T>, labels: Vec<u8>, name: impl Into<String>) -> Result<Self> {
        if labels.len() != signals.len() {
            return Err(Error::DimensionMismatch {
                expected: signals.len(),
                found: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::param("labels", format!("label {bad} is not 0 or 1")));
        }
        Ok(LabeledDataset {
            signals,
            labels,
            name: name.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.signals.dim()
    }

    pub fn n_outliers(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Ok(LabeledDataset {
            signals: self.signals.column_subset(indices)?,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            name: self.name.clone(),
        })
    }
}

pub const SYNTH_DIM: usize = 64;
pub const SYNTH_INLIERS: usize = 512;
pub const SYNTH_OUTLIERS: usize = 64;
pub const SYNTH_SPARSITY: usize = 4;
pub const SYNTH_INLIER_ATOMS: usize = 50;
pub const SYNTH_OUTLIER_ATOMS: usize = 400;

/// Sparse synthetic set together with its generating dictionaries.
#[derive(Clone, Debug)]
pub struct SparseSynthetic<T> {
    pub dataset: LabeledDataset<T>,
    pub inlier_dict: Dictionary<T>,
    pub outlier_dict: Dictionary<T>,
}

fn gaussian_dictionary<T: Real, R: Rng>(m: usize, n: usize, rng: &mut R) -> Dictionary<T> {
    let atoms = Mat::from_fn(m, n, |_, _| T::lit(rng.sample(StandardNormal)));
    Dictionary::from_atoms(atoms).expect("gaussian atoms are nonzero")
}

fn sparse_combination<T: Real, R: Rng>(dict: &Dictionary<T>, s: usize, rng: &mut R) -> Vec<T> {
    let mut y = vec![T::zero(); dict.dim()];
    for j in index::sample(rng, dict.n_atoms(), s) {
        let c = T::lit(rng.sample(StandardNormal));
        for (yi, &di) in y.iter_mut().zip(dict.atom(j)) {
            *yi += c * di;
        }
    }
    y
}

/// 512 inliers combining 4 atoms of a 64×50 Gaussian dictionary, followed
/// by 64 outliers combining 4 atoms of a 64×400 one; columns unit norm.
pub fn gen_sparse_synthetic_with_dicts<T: Real>(seed: RngSeed) -> SparseSynthetic<T> {
    let mut rng = seed.derive("synth/sparse", 0).rng();
    let inlier_dict = gaussian_dictionary(SYNTH_DIM, SYNTH_INLIER_ATOMS, &mut rng);
    let outlier_dict = gaussian_dictionary(SYNTH_DIM, SYNTH_OUTLIER_ATOMS, &mut rng);
    let mut columns = Vec::with_capacity(SYNTH_INLIERS + SYNTH_OUTLIERS);
    for _ in 0..SYNTH_INLIERS {
        columns.push(sparse_combination(&inlier_dict, SYNTH_SPARSITY, &mut rng));
    }
    for _ in 0..SYNTH_OUTLIERS {
        columns.push(sparse_combination(&outlier_dict, SYNTH_SPARSITY, &mut rng));
    }
    let signals = SignalMatrix::from_columns(SYNTH_DIM, &columns)
        .and_then(|s| s.normalize_columns())
        .expect("sparse combinations of independent gaussian atoms are nonzero");
    let dataset = LabeledDataset::new(signals, synth_labels(), "sparse").unwrap();
    SparseSynthetic {
        dataset,
        inlier_dict,
        outlier_dict,
    }
}

pub fn gen_sparse_synthetic<T: Real>(seed: RngSeed) -> LabeledDataset<T> {
    gen_sparse_synthetic_with_dicts(seed).dataset
}

/// Raw (unnormalized) Gaussian set: 512 inlier columns with entries
/// N(0, 0.5²) followed by 64 outlier columns with entries N(-0.1, 0.45²).
pub fn gen_gauss_raw<T: Real>(seed: RngSeed) -> Mat<T> {
    let mut rng = seed.derive("synth/gauss", 0).rng();
    let inlier = Normal::new(0.0, 0.5).unwrap();
    let outlier = Normal::new(-0.1, 0.45).unwrap();
    let mut data = Vec::with_capacity(SYNTH_DIM * (SYNTH_INLIERS + SYNTH_OUTLIERS));
    for _ in 0..SYNTH_DIM * SYNTH_INLIERS {
        data.push(T::lit(rng.sample(inlier)));
    }
    for _ in 0..SYNTH_DIM * SYNTH_OUTLIERS {
        data.push(T::lit(rng.sample(outlier)));
    }
    Mat::from_col_major(SYNTH_DIM, SYNTH_INLIERS + SYNTH_OUTLIERS, data).unwrap()
}

/// [`gen_gauss_raw`] with unit-norm columns.
pub fn gen_gauss_synthetic<T: Real>(seed: RngSeed) -> LabeledDataset<T> {
    let signals = SignalMatrix::new(gen_gauss_raw(seed))
        .and_then(|s| s.normalize_columns())
        .expect("gaussian columns are nonzero");
    LabeledDataset::new(signals, synth_labels(), "gauss").unwrap()
}

fn synth_labels() -> Vec<u8> {
    let mut labels = vec![0u8; SYNTH_INLIERS];
    labels.resize(SYNTH_INLIERS + SYNTH_OUTLIERS, 1);
    labels
}

/// Where the label column lives.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub enum LabelSource {
    #[default]
    Last,
    First,
    /// One label per line in a separate file; every column of the data file
    /// is a feature.
    File(PathBuf),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LoadOptions {
    pub labels: LabelSource,
    /// `None` detects a header by a non-numeric first row.
    pub header: Option<bool>,
}

fn parse_label(token: &str, line: usize) -> Result<u8> {
    match token.trim().parse::<f64>() {
        Ok(v) if v == 0.0 => Ok(0),
        Ok(v) if v == 1.0 => Ok(1),
        _ => Err(Error::NonBinaryLabel {
            line,
            value: token.trim().to_string(),
        }),
    }
}

fn read_records(path: &Path) -> Result<Vec<(usize, csv::StringRecord)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::Parse {
                line,
                column: 0,
                message: e.to_string(),
            }
        })?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let line = rec.position().map_or(0, |p| p.line() as usize);
        out.push((line, rec));
    }
    Ok(out)
}

fn parse_feature(token: &str, line: usize, col: usize) -> Result<f64> {
    match token.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => Err(Error::Parse {
            line,
            column: col + 1,
            message: format!("`{token}` is not finite"),
        }),
        Err(_) => Err(Error::Parse {
            line,
            column: col + 1,
            message: format!("`{token}` is not a number"),
        }),
    }
}

fn detect_header(records: &[(usize, csv::StringRecord)], header: Option<bool>) -> bool {
    header.unwrap_or_else(|| {
        records
            .first()
            .is_some_and(|(_, r)| r.iter().any(|t| t.parse::<f64>().is_err()))
    })
}

fn no_rows() -> Error {
    Error::Parse {
        line: 1,
        column: 1,
        message: "no data rows".into(),
    }
}

/// Reads a numeric CSV without labels; every column is a feature.
pub fn load_signal_matrix<T: Real>(path: impl AsRef<Path>, header: Option<bool>) -> Result<SignalMatrix<T>> {
    let path = path.as_ref();
    let mut records = read_records(path)?;
    if detect_header(&records, header) && !records.is_empty() {
        records.remove(0);
    }
    let width = records.first().ok_or_else(no_rows)?.1.len();
    let mut data = Vec::with_capacity(width * records.len());
    for (line, rec) in &records {
        if rec.len() != width {
            return Err(Error::Parse {
                line: *line,
                column: rec.len().min(width) + 1,
                message: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        for (col, token) in rec.iter().enumerate() {
            data.push(T::lit(parse_feature(token, *line, col)?));
        }
    }
    SignalMatrix::new(Mat::from_col_major(width, records.len(), data)?)
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string())
}

/// Reads a numeric CSV with one signal per row. Lines and columns in errors
/// are 1-based.
pub fn load_labeled_matrix<T: Real>(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<LabeledDataset<T>> {
    let path = path.as_ref();
    let mut records = read_records(path)?;
    if detect_header(&records, opts.header) && !records.is_empty() {
        records.remove(0);
    }
    let (first_line, first) = records.first().ok_or_else(no_rows)?;
    let width = first.len();
    let label_cols = usize::from(!matches!(opts.labels, LabelSource::File(_)));
    if width <= label_cols {
        return Err(Error::Parse {
            line: *first_line,
            column: width,
            message: "row has no feature columns".into(),
        });
    }
    let m = width - label_cols;
    let feature_offset = usize::from(opts.labels == LabelSource::First);
    let mut data = Vec::with_capacity(m * records.len());
    let mut labels = Vec::with_capacity(records.len());
    for (line, rec) in &records {
        if rec.len() != width {
            return Err(Error::Parse {
                line: *line,
                column: rec.len().min(width) + 1,
                message: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        for c in 0..m {
            let col = c + feature_offset;
            data.push(T::lit(parse_feature(&rec[col], *line, col)?));
        }
        match opts.labels {
            LabelSource::Last => labels.push(parse_label(&rec[m], *line)?),
            LabelSource::First => labels.push(parse_label(&rec[0], *line)?),
            LabelSource::File(_) => {}
        }
    }
    if let LabelSource::File(label_path) = &opts.labels {
        labels = read_label_file(label_path)?;
        if labels.len() != records.len() {
            return Err(Error::DimensionMismatch {
                expected: records.len(),
                found: labels.len(),
            });
        }
    }
    let signals = SignalMatrix::new(Mat::from_col_major(m, records.len(), data)?)?;
    LabeledDataset::new(signals, labels, dataset_name(path))
}

fn read_label_file(path: &Path) -> Result<Vec<u8>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_label(l, i + 1))
        .collect()
}

/// Writes one row per signal, label last, no header. Values use the
/// shortest representation that parses back to the same float.
pub fn write_labeled_csv<T: Real>(ds: &LabeledDataset<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    let wrap = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format(format!("{other:?}")),
    };
    let mut row = Vec::with_capacity(ds.dim() + 1);
    for l in 0..ds.len() {
        row.clear();
        row.extend(ds.signals.signal(l).iter().map(|v| v.to_string()));
        row.push(ds.labels[l].to_string());
        w.write_record(&row).map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub const SPLIT_ATTEMPTS: usize = 100;

/// Train/test partition with the test side holding both classes.
#[derive(Clone, Debug)]
pub struct Split<T> {
    pub train: SignalMatrix<T>,
    pub test: LabeledDataset<T>,
    /// Sorted indices into the source dataset.
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

/// Random partition of `0..labels.len()` with `round(train_fraction * N)`
/// training indices, redrawn until the test side has both classes.
pub fn split_indices(labels: &[u8], train_fraction: f64, seed: RngSeed) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::param("train_fraction", format!("{train_fraction} not in (0, 1)")));
    }
    let n = labels.len();
    if n < 2 {
        return Err(Error::TooFewSignals { available: n, required: 2 });
    }
    let k = ((train_fraction * n as f64 + 0.5).floor() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    for attempt in 0..SPLIT_ATTEMPTS {
        order.shuffle(&mut seed.derive("split", attempt as u64).rng());
        let mut train = order[..k].to_vec();
        let mut test = order[k..].to_vec();
        let outliers = test.iter().filter(|&&i| labels[i] == 1).count();
        if outliers > 0 && outliers < test.len() {
            train.sort_unstable();
            test.sort_unstable();
            return Ok((train, test));
        }
        order.sort_unstable();
    }
    Err(Error::DegenerateSplit {
        attempts: SPLIT_ATTEMPTS,
    })
}

/// Splits and unit-normalizes both sides.
pub fn split_train_test<T: Real>(ds: &LabeledDataset<T>, train_fraction: f64, seed: RngSeed) -> Result<Split<T>> {
    split_train_test_with(ds, train_fraction, seed, Normalization::Unit)
}

/// Splits, fits `normalization` on the training side and applies it to both.
pub fn split_train_test_with<T: Real>(
    ds: &LabeledDataset<T>,
    train_fraction: f64,
    seed: RngSeed,
    normalization: Normalization,
) -> Result<Split<T>> {
    let (train_indices, test_indices) = split_indices(&ds.labels, train_fraction, seed)?;
    let train_raw = ds.signals.column_subset(&train_indices)?;
    let pre = Preprocessor::fit(normalization, &train_raw);
    let train = pre.apply(&train_raw)?;
    let test_raw = ds.subset(&test_indices)?;
    let test = LabeledDataset {
        signals: pre.apply(&test_raw.signals)?,
        ..test_raw
    };
    Ok(Split {
        train,
        test,
        train_indices,
        test_indices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> PathBuf {
        let p = dir.path().join(name);
        std::fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn sparse_shape_and_labels() {
        let ds = gen_sparse_synthetic::<f64>(RngSeed(1));
        assert_eq!((ds.dim(), ds.len()), (64, 576));
        assert_eq!(ds.n_outliers(), 64);
        assert!(ds.labels[..512].iter().all(|&l| l == 0));
        for l in 0..ds.len() {
            let n: f64 = ds.signals.signal(l).iter().map(|v| v * v).sum();
            assert!((n.sqrt() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gauss_shape_and_determinism() {
        let a = gen_gauss_synthetic::<f64>(RngSeed(2));
        let b = gen_gauss_synthetic::<f64>(RngSeed(2));
        let c = gen_gauss_synthetic::<f64>(RngSeed(3));
        assert_eq!((a.dim(), a.len(), a.n_outliers()), (64, 576, 64));
        assert_eq!(a, b);
        assert_ne!(a.signals, c.signals);
        assert_eq!(gen_sparse_synthetic::<f64>(RngSeed(2)), gen_sparse_synthetic::<f64>(RngSeed(2)));
        assert_ne!(
            gen_sparse_synthetic::<f64>(RngSeed(2)).signals,
            gen_sparse_synthetic::<f64>(RngSeed(3)).signals
        );
    }

    #[test]
    fn gauss_raw_inlier_mean() {
        let raw = gen_gauss_raw::<f64>(RngSeed(5));
        let inliers = &raw.as_slice()[..64 * 512];
        let mean = inliers.iter().sum::<f64>() / inliers.len() as f64;
        let bound = 4.0 * 0.5 / ((512.0 * 64.0) as f64).sqrt();
        assert!(mean.abs() < bound.min(0.01), "{mean}");
    }

    #[test]
    fn load_label_last() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "tiny.csv", "1,2,0\n3,4,1\n5,6,0");
        let ds = load_labeled_matrix::<f64>(&p, &LoadOptions::default()).unwrap();
        assert_eq!((ds.dim(), ds.len()), (2, 3));
        assert_eq!(ds.labels, vec![0, 1, 0]);
        assert_eq!(ds.signals.signal(1), &[3.0, 4.0]);
        assert_eq!(ds.name, "tiny");
    }

    #[test]
    fn load_label_first_with_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "h.csv", "y,a,b\n1,2,3\n0.0,4,5\n");
        let opts = LoadOptions {
            labels: LabelSource::First,
            header: None,
        };
        let ds = load_labeled_matrix::<f64>(&p, &opts).unwrap();
        assert_eq!(ds.labels, vec![1, 0]);
        assert_eq!(ds.signals.signal(0), &[2.0, 3.0]);
    }

    #[test]
    fn load_separate_labels() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "x.csv", "1,2\n3,4\n");
        let l = write(&dir, "y.txt", "0\n1\n");
        let opts = LoadOptions {
            labels: LabelSource::File(l),
            header: Some(false),
        };
        let ds = load_labeled_matrix::<f64>(&p, &opts).unwrap();
        assert_eq!(ds.labels, vec![0, 1]);
        assert_eq!(ds.dim(), 2);
    }

    #[test]
    fn load_errors() {
        let dir = tempfile::tempdir().unwrap();
        let bad = write(&dir, "bad.csv", "1,2,0\n3,x,1\n");
        match load_labeled_matrix::<f64>(&bad, &LoadOptions::default()) {
            Err(Error::Parse { line: 2, column: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        let empty = write(&dir, "empty.csv", "");
        assert!(matches!(
            load_labeled_matrix::<f64>(&empty, &LoadOptions::default()),
            Err(Error::Parse { .. })
        ));
        let label = write(&dir, "label.csv", "1,2,0\n3,4,2\n");
        assert!(matches!(
            load_labeled_matrix::<f64>(&label, &LoadOptions::default()),
            Err(Error::NonBinaryLabel { line: 2, .. })
        ));
        let ragged = write(&dir, "ragged.csv", "1,2,0\n3,1\n");
        assert!(matches!(
            load_labeled_matrix::<f64>(&ragged, &LoadOptions::default()),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            load_labeled_matrix::<f64>(dir.path().join("missing.csv"), &LoadOptions::default()),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn load_unlabeled() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "u.csv", "a,b\n1,2\n3,4\n5,6\n");
        let y = load_signal_matrix::<f64>(&p, None).unwrap();
        assert_eq!((y.dim(), y.len()), (2, 3));
        assert_eq!(y.signal(2), &[5.0, 6.0]);
        let e = write(&dir, "e.csv", "\n");
        assert!(matches!(load_signal_matrix::<f64>(&e, None), Err(Error::Parse { .. })));
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ds = gen_gauss_synthetic::<f64>(RngSeed(7));
        let p = dir.path().join("gauss.csv");
        write_labeled_csv(&ds, &p).unwrap();
        let back = load_labeled_matrix::<f64>(&p, &LoadOptions::default()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn split_sizes_and_partition() {
        let ds = gen_sparse_synthetic::<f64>(RngSeed(8));
        let s = split_train_test(&ds, 0.6, RngSeed(9)).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (346, 230));
        let mut all: Vec<usize> = s.train_indices.iter().chain(&s.test_indices).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..576).collect::<Vec<_>>());
        let again = split_train_test(&ds, 0.6, RngSeed(9)).unwrap();
        assert_eq!(again.train_indices, s.train_indices);
        let t = s.test.n_outliers();
        assert!(t > 0 && t < s.test.len());
    }

    #[test]
    fn split_resamples_single_outlier() {
        let mut labels = vec![0u8; 20];
        labels[7] = 1;
        for seed in 0..20 {
            let (_, test) = split_indices(&labels, 0.6, RngSeed(seed)).unwrap();
            assert!(test.contains(&7));
        }
        // a single test slot can never hold both classes
        assert!(split_indices(&[1, 0, 0], 0.6, RngSeed(0)).is_err());
        assert!(split_indices(&[1, 0, 0, 0, 0], 0.6, RngSeed(0)).is_ok());
        assert!(matches!(
            split_indices(&[1, 1, 1, 1], 0.5, RngSeed(0)),
            Err(Error::DegenerateSplit { attempts: 100 })
        ));
    }
}
