//! Sample matrices for one state, CSV ingestion, and pooled standardization.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateLabel {
    Source,
    Target,
    Other(String),
}

impl fmt::Display for StateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateLabel::Source => f.write_str("source"),
            StateLabel::Target => f.write_str("target"),
            StateLabel::Other(s) => f.write_str(s),
        }
    }
}

/// `n` samples (rows) by `p` named features (columns), all finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    state: StateLabel,
    names: Vec<String>,
    values: DMatrix<f64>,
}

impl Dataset {
    pub fn new(state: StateLabel, names: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        if names.is_empty() || values.nrows() == 0 {
            return Err(Error::invalid("dataset needs at least one row and one column"));
        }
        if names.len() != values.ncols() {
            return Err(Error::invalid(format!(
                "{} feature names for {} columns",
                names.len(),
                values.ncols()
            )));
        }
        let mut seen = HashSet::new();
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(Error::invalid(format!("duplicate feature name {name:?}")));
            }
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let (row, col) = (pos % values.nrows(), pos / values.nrows());
            return Err(Error::invalid(format!(
                "non-finite value at row {row}, feature {:?}",
                names[col]
            )));
        }
        Ok(Self { state, names, values })
    }

    /// Build from row-major nested vectors; mostly for tests and small inputs.
    pub fn from_rows(state: StateLabel, names: &[&str], rows: &[Vec<f64>]) -> Result<Self> {
        let p = names.len();
        if let Some(bad) = rows.iter().position(|r| r.len() != p) {
            return Err(Error::invalid(format!("row {bad} has {} values, expected {p}", rows[bad].len())));
        }
        let values = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
        Self::new(state, names.iter().map(|s| s.to_string()).collect(), values)
    }

    pub fn state(&self) -> &StateLabel {
        &self.state
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.column(j).iter().copied().collect()
    }

    pub fn with_state(mut self, state: StateLabel) -> Self {
        self.state = state;
        self
    }

    /// Keep only the listed columns, in the given order.
    pub fn select_columns(&self, idx: &[usize]) -> Result<Self> {
        let names = idx.iter().map(|&j| self.names[j].clone()).collect();
        let values = self.values.select_columns(idx);
        Self::new(self.state.clone(), names, values)
    }

    /// Column means.
    pub fn feature_means(&self) -> DVector<f64> {
        feature_means(self)
    }

    /// Population standard deviation of every column.
    pub fn feature_sds(&self) -> DVector<f64> {
        let means = self.feature_means();
        let n = self.n() as f64;
        DVector::from_fn(self.p(), |j, _| {
            let m = means[j];
            (self.values.column(j).iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt()
        })
    }

    pub fn summary(&self) -> Vec<FeatureSummary> {
        let means = self.feature_means();
        let sds = self.feature_sds();
        self.names
            .iter()
            .enumerate()
            .map(|(j, name)| FeatureSummary { feature: name.clone(), mean: means[j], sd: sds[j] })
            .collect()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let io = |e: csv::Error| Error::Io { path: path.display().to_string(), source: e.into() };
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        w.write_record(&self.names).map_err(io)?;
        for row in self.values.row_iter() {
            w.write_record(row.iter().map(|v| format!("{v}"))).map_err(io)?;
        }
        w.flush().map_err(|e| Error::Io { path: path.display().to_string(), source: e })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSummary {
    pub feature: String,
    pub mean: f64,
    pub sd: f64,
}

/// Source and target samples over the same ordered features.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePair {
    pub source: Dataset,
    pub target: Dataset,
}

impl StatePair {
    pub fn new(source: Dataset, target: Dataset) -> Result<Self> {
        if source.p() != target.p() {
            let index = source.p().min(target.p());
            return Err(Error::FeatureMismatch {
                index,
                left: source.names.get(index).cloned().unwrap_or_default(),
                right: target.names.get(index).cloned().unwrap_or_default(),
            });
        }
        if let Some(index) = (0..source.p()).find(|&j| source.names[j] != target.names[j]) {
            return Err(Error::FeatureMismatch {
                index,
                left: source.names[index].clone(),
                right: target.names[index].clone(),
            });
        }
        Ok(Self { source, target })
    }

    pub fn names(&self) -> &[String] {
        self.source.names()
    }

    pub fn p(&self) -> usize {
        self.source.p()
    }

    /// Source rows stacked on top of target rows.
    pub fn pooled(&self) -> Dataset {
        let (ns, nt, p) = (self.source.n(), self.target.n(), self.p());
        let values = DMatrix::from_fn(ns + nt, p, |i, j| {
            if i < ns {
                self.source.values[(i, j)]
            } else {
                self.target.values[(i - ns, j)]
            }
        });
        Dataset {
            state: StateLabel::Other("pooled".into()),
            names: self.source.names.clone(),
            values,
        }
    }

    pub fn select_columns(&self, idx: &[usize]) -> Result<Self> {
        Self::new(self.source.select_columns(idx)?, self.target.select_columns(idx)?)
    }
}

pub fn load_dataset(path: impl AsRef<Path>, state: StateLabel) -> Result<Dataset> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|e| Error::Io { path: shown.clone(), source: e })?;
    read_dataset(file, &shown, state)
}

/// Parse CSV from any reader; `origin` is used in error messages.
pub fn read_dataset<R: std::io::Read>(reader: R, origin: &str, state: StateLabel) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let io = |e: csv::Error| Error::Io { path: origin.to_string(), source: e.into() };
    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r.map_err(io)?,
        None => return Err(Error::EmptyBody { path: origin.to_string() }),
    };
    let names: Vec<String> = header.iter().map(str::to_string).collect();
    let p = names.len();
    let mut data = Vec::new();
    let mut n = 0;
    for (k, rec) in records.enumerate() {
        let row = k + 2;
        let rec = rec.map_err(io)?;
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        if rec.len() != p {
            return Err(Error::RaggedRow { path: origin.to_string(), row, found: rec.len(), expected: p });
        }
        for (j, cell) in rec.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::NonNumeric {
                path: origin.to_string(),
                row,
                column: names[j].clone(),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite { path: origin.to_string(), row, column: names[j].clone() });
            }
            data.push(v);
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyBody { path: origin.to_string() });
    }
    let values = DMatrix::from_row_slice(n, p, &data);
    Dataset::new(state, names, values)
}

pub fn feature_means(ds: &Dataset) -> DVector<f64> {
    let n = ds.n() as f64;
    DVector::from_fn(ds.p(), |j, _| ds.values.column(j).sum() / n)
}

/// Per-feature location and scale computed on pooled rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Standardizer {
    /// Pooled mean and population standard deviation.
    pub fn fit(pair: &StatePair) -> Result<Self> {
        let pooled = pair.pooled();
        let mean = pooled.feature_means();
        let sd = pooled.feature_sds();
        for (j, s) in sd.iter().enumerate() {
            if *s <= 0.0 || !s.is_finite() {
                return Err(Error::ZeroVariance(pair.names()[j].clone()));
            }
        }
        Ok(Self { names: pair.names().to_vec(), mean: mean.iter().copied().collect(), sd: sd.iter().copied().collect() })
    }

    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        if ds.names != self.names {
            return Err(Error::invalid("standardizer fitted on different features"));
        }
        let mut values = ds.values.clone();
        for (j, mut col) in values.column_iter_mut().enumerate() {
            let (m, s) = (self.mean[j], self.sd[j]);
            col.apply(|v| *v = (*v - m) / s);
        }
        Dataset::new(ds.state.clone(), ds.names.clone(), values)
    }

    pub fn summary(&self) -> Vec<FeatureSummary> {
        self.names
            .iter()
            .zip(self.mean.iter().zip(&self.sd))
            .map(|(f, (m, s))| FeatureSummary { feature: f.clone(), mean: *m, sd: *s })
            .collect()
    }
}

/// Z-score both states with shared pooled statistics.
pub fn standardize(pair: &StatePair) -> Result<StatePair> {
    Ok(standardize_with_params(pair)?.0)
}

pub fn standardize_with_params(pair: &StatePair) -> Result<(StatePair, Standardizer)> {
    let st = Standardizer::fit(pair)?;
    let out = StatePair::new(st.apply(&pair.source)?, st.apply(&pair.target)?)?;
    Ok((out, st))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ds(state: StateLabel, names: &[&str], rows: &[Vec<f64>]) -> Dataset {
        Dataset::from_rows(state, names, rows).unwrap()
    }

    #[test]
    fn parses_simple_csv() {
        let d = read_dataset("a,b\n1,2\n3,4\n".as_bytes(), "mem", StateLabel::Source).unwrap();
        assert_eq!((d.n(), d.p()), (2, 2));
        assert_eq!(d.values(), &DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
    }

    #[test]
    fn header_only_is_empty_body() {
        let err = read_dataset("a,b\n".as_bytes(), "mem", StateLabel::Source).unwrap_err();
        assert!(err.to_string().contains("empty body"), "{err}");
    }

    #[test]
    fn non_numeric_cell_reports_location() {
        let err = read_dataset("a,b\n1,x\n".as_bytes(), "mem", StateLabel::Source).unwrap_err();
        match err {
            Error::NonNumeric { row, column, .. } => assert_eq!((row, column.as_str()), (2, "b")),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn ragged_row_rejected() {
        let err = read_dataset("a,b\n1,2\n3\n".as_bytes(), "mem", StateLabel::Source).unwrap_err();
        assert!(matches!(err, Error::RaggedRow { row: 3, found: 1, expected: 2, .. }));
    }

    #[test]
    fn missing_file() {
        assert!(matches!(load_dataset("/nonexistent/x.csv", StateLabel::Source), Err(Error::Io { .. })));
    }

    #[test]
    fn duplicate_names_rejected() {
        assert!(Dataset::from_rows(StateLabel::Source, &["a", "a"], &[vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn means() {
        let d = ds(StateLabel::Source, &["a", "b"], &[vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(feature_means(&d).as_slice(), &[2.0, 3.0]);
        let d = ds(StateLabel::Source, &["a"], &[vec![5.0]]);
        assert_eq!(feature_means(&d).as_slice(), &[5.0]);
        let d = ds(StateLabel::Source, &["a"], &[vec![-1.0], vec![1.0]]);
        assert_eq!(feature_means(&d).as_slice(), &[0.0]);
    }

    #[test]
    fn pooled_zscore_hand_case() {
        let s = ds(StateLabel::Source, &["a"], &[vec![0.0], vec![2.0]]);
        let t = ds(StateLabel::Target, &["a"], &[vec![0.0], vec![2.0]]);
        let (out, st) = standardize_with_params(&StatePair::new(s, t).unwrap()).unwrap();
        assert_eq!((st.mean[0], st.sd[0]), (1.0, 1.0));
        assert_eq!(out.source.column(0), vec![-1.0, 1.0]);
        assert_eq!(out.target.column(0), vec![-1.0, 1.0]);
    }

    #[test]
    fn constant_feature_is_an_error() {
        let s = ds(StateLabel::Source, &["a", "c"], &[vec![0.0, 3.0], vec![2.0, 3.0]]);
        let t = ds(StateLabel::Target, &["a", "c"], &[vec![1.0, 3.0]]);
        let err = standardize(&StatePair::new(s, t).unwrap()).unwrap_err();
        assert!(matches!(err, Error::ZeroVariance(ref f) if f == "c"));
    }

    #[test]
    fn mismatched_headers() {
        let s = ds(StateLabel::Source, &["a", "b"], &[vec![0.0, 1.0]]);
        let t = ds(StateLabel::Target, &["a", "c"], &[vec![0.0, 1.0]]);
        assert!(matches!(StatePair::new(s, t), Err(Error::FeatureMismatch { index: 1, .. })));
    }

    fn pair_strategy() -> impl Strategy<Value = StatePair> {
        (1usize..4, 2usize..8, 2usize..8).prop_flat_map(|(p, ns, nt)| {
            (
                proptest::collection::vec(-50.0f64..50.0, p * ns),
                proptest::collection::vec(-50.0f64..50.0, p * nt),
            )
                .prop_map(move |(a, b)| {
                    let names: Vec<String> = (0..p).map(|j| format!("f{j}")).collect();
                    let s = Dataset::new(StateLabel::Source, names.clone(), DMatrix::from_vec(ns, p, a)).unwrap();
                    let t = Dataset::new(StateLabel::Target, names, DMatrix::from_vec(nt, p, b)).unwrap();
                    StatePair::new(s, t).unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn standardized_pool_is_centred_and_idempotent(pair in pair_strategy()) {
            let Ok((z, st)) = standardize_with_params(&pair) else { return Ok(()); };
            for m in z.pooled().feature_means().iter() {
                prop_assert!(m.abs() < 1e-10);
            }
            // Shared parameters reproduce each half separately.
            prop_assert_eq!(st.apply(&pair.source).unwrap(), z.source.clone());
            prop_assert_eq!(st.apply(&pair.target).unwrap(), z.target.clone());
            let zz = standardize(&z).unwrap();
            for (a, b) in zz.pooled().values().iter().zip(z.pooled().values().iter()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
