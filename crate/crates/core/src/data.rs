//! Table ingestion, cleaning, preprocessing and dataset splits.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// A labelled rectangular table whose cells may be missing.
#[derive(Clone, Debug, PartialEq)]
pub struct RawTable {
    pub row_labels: Vec<String>,
    pub column_labels: Vec<String>,
    values: Vec<Option<f64>>,
}

impl RawTable {
    pub fn new(
        row_labels: Vec<String>,
        column_labels: Vec<String>,
        values: Vec<Option<f64>>,
    ) -> Result<Self> {
        if values.len() != row_labels.len() * column_labels.len() {
            return Err(Error::DimensionMismatch {
                expected: row_labels.len() * column_labels.len(),
                found: values.len(),
            });
        }
        Ok(Self {
            row_labels,
            column_labels,
            values,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.row_labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.column_labels.len()
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.values[row * self.n_cols() + col]
    }

    pub fn row(&self, row: usize) -> &[Option<f64>] {
        let m = self.n_cols();
        &self.values[row * m..(row + 1) * m]
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    pub fn column_index(&self, label: &str) -> Option<usize> {
        self.column_labels.iter().position(|c| c == label)
    }
}

fn is_missing(cell: &str) -> bool {
    let t = cell.trim();
    t.is_empty() || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan")
}

fn reader_builder(delimiter: u8) -> csv::ReaderBuilder {
    let mut b = csv::ReaderBuilder::new();
    b.delimiter(delimiter).has_headers(false).flexible(true);
    b
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    Error::Parse {
        line,
        column: 0,
        message: e.to_string(),
    }
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Loads a delimited table with one header row and one label column.
pub fn load_table(path: impl AsRef<Path>, delimiter: u8) -> Result<RawTable> {
    parse_table(open(path.as_ref())?, delimiter)
}

pub fn parse_table<R: Read>(reader: R, delimiter: u8) -> Result<RawTable> {
    let mut rdr = reader_builder(delimiter).from_reader(reader);
    let mut records = rdr.records();

    let header = match records.next() {
        Some(r) => r.map_err(csv_err)?,
        None => {
            return Err(Error::Parse {
                line: 1,
                column: 0,
                message: "empty file".into(),
            })
        }
    };
    if header.is_empty() {
        return Err(Error::Parse {
            line: 1,
            column: 0,
            message: "header has no label column".into(),
        });
    }
    let column_labels: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
    let width = header.len();

    let mut row_labels = Vec::new();
    let mut values = Vec::new();
    for rec in records {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() == 1 && rec.get(0).is_some_and(|s| s.trim().is_empty()) {
            continue;
        }
        if rec.len() != width {
            return Err(Error::RaggedRow {
                line,
                expected: width,
                found: rec.len(),
            });
        }
        row_labels.push(rec[0].trim().to_string());
        for (j, cell) in rec.iter().enumerate().skip(1) {
            if is_missing(cell) {
                values.push(None);
                continue;
            }
            let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                line,
                column: j + 1,
                message: format!("not a number: {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    column: j + 1,
                    message: format!("non-finite value: {cell:?}"),
                });
            }
            values.push(Some(v));
        }
    }
    RawTable::new(row_labels, column_labels, values)
}

/// One gene identifier per line; blank lines are skipped.
pub fn load_gene_order(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let mut s = String::new();
    open(path.as_ref())?
        .read_to_string(&mut s)
        .map_err(|source| Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        })?;
    Ok(s.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

/// Keeps the first `k` genes of `gene_order`, in that order.
pub fn select_genes(expr: &RawTable, gene_order: &[String], k: usize) -> Result<RawTable> {
    if k > gene_order.len() {
        return Err(Error::invalid(format!(
            "k = {k} exceeds gene order length {}",
            gene_order.len()
        )));
    }
    let index: HashMap<&str, usize> = expr
        .column_labels
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let missing: Vec<String> = gene_order
        .iter()
        .filter(|g| !index.contains_key(g.as_str()))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(Error::UnknownIdentifiers(missing));
    }
    let cols: Vec<usize> = gene_order[..k].iter().map(|g| index[g.as_str()]).collect();
    let mut values = Vec::with_capacity(expr.n_rows() * k);
    for r in 0..expr.n_rows() {
        values.extend(cols.iter().map(|&c| expr.get(r, c)));
    }
    RawTable::new(
        expr.row_labels.clone(),
        gene_order[..k].to_vec(),
        values,
    )
}

/// A long-format drug response record. `log_ic50` is `None` when missing.
#[derive(Clone, Debug, PartialEq)]
pub struct ResponseRecord {
    pub cell_line: String,
    pub drug: String,
    pub log_ic50: Option<f64>,
}

/// Reads `(cell line id, drug id, log-IC50)` rows after a header row.
pub fn load_responses(path: impl AsRef<Path>, delimiter: u8) -> Result<Vec<ResponseRecord>> {
    parse_responses(open(path.as_ref())?, delimiter)
}

pub fn parse_responses<R: Read>(reader: R, delimiter: u8) -> Result<Vec<ResponseRecord>> {
    let mut rdr = reader_builder(delimiter).from_reader(reader);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        if i == 0 {
            continue;
        }
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() == 1 && rec.get(0).is_some_and(|s| s.trim().is_empty()) {
            continue;
        }
        if rec.len() != 3 {
            return Err(Error::RaggedRow {
                line,
                expected: 3,
                found: rec.len(),
            });
        }
        let log_ic50 = if is_missing(&rec[2]) {
            None
        } else {
            let v: f64 = rec[2].trim().parse().map_err(|_| Error::Parse {
                line,
                column: 3,
                message: format!("not a number: {:?}", &rec[2]),
            })?;
            Some(v)
        };
        out.push(ResponseRecord {
            cell_line: rec[0].trim().to_string(),
            drug: rec[1].trim().to_string(),
            log_ic50,
        });
    }
    Ok(out)
}

/// Paired inputs (n x d) and targets (n) with no missing or non-finite values.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    inputs: DMatrix<f64>,
    targets: DVector<f64>,
}

impl Dataset {
    pub fn new(inputs: DMatrix<f64>, targets: DVector<f64>) -> Result<Self> {
        if inputs.nrows() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: inputs.nrows(),
                found: targets.len(),
            });
        }
        if inputs.iter().chain(targets.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("dataset contains non-finite values"));
        }
        Ok(Self { inputs, targets })
    }

    pub fn from_rows(rows: &[Vec<f64>], targets: &[f64]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.len(),
            });
        }
        let inputs = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
        Self::new(inputs, DVector::from_column_slice(targets))
    }

    pub fn empty(d: usize) -> Self {
        Self {
            inputs: DMatrix::zeros(0, d),
            targets: DVector::zeros(0),
        }
    }

    pub fn n(&self) -> usize {
        self.targets.len()
    }

    pub fn d(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.n() == 0
    }

    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn targets(&self) -> &DVector<f64> {
        &self.targets
    }

    pub fn into_parts(self) -> (DMatrix<f64>, DVector<f64>) {
        (self.inputs, self.targets)
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let inputs = self.inputs.select_rows(indices);
        let targets = DVector::from_iterator(indices.len(), indices.iter().map(|&i| self.targets[i]));
        Dataset { inputs, targets }
    }

    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.d() != other.d() {
            return Err(Error::DimensionMismatch {
                expected: self.d(),
                found: other.d(),
            });
        }
        let n = self.n() + other.n();
        let inputs = DMatrix::from_fn(n, self.d(), |i, j| {
            if i < self.n() {
                self.inputs[(i, j)]
            } else {
                other.inputs[(i - self.n(), j)]
            }
        });
        let targets = DVector::from_iterator(n, self.targets.iter().chain(other.targets.iter()).copied());
        Ok(Dataset { inputs, targets })
    }

    pub fn with_inputs(&self, inputs: DMatrix<f64>) -> Result<Dataset> {
        Dataset::new(inputs, self.targets.clone())
    }

    pub fn with_targets(&self, targets: DVector<f64>) -> Result<Dataset> {
        Dataset::new(self.inputs.clone(), targets)
    }
}

/// A per-drug dataset with the cell-line labels that survived cleaning.
#[derive(Clone, Debug)]
pub struct DrugDataset {
    pub drug: String,
    pub labels: Vec<String>,
    pub genes: Vec<String>,
    pub dataset: Dataset,
    /// Rows dropped for missing response or missing expression.
    pub dropped: usize,
}

/// Joins expression rows with one drug's responses, dropping cell lines with
/// a missing response or any missing expression value.
pub fn drug_dataset(expr: &RawTable, responses: &[ResponseRecord], drug: &str) -> Result<DrugDataset> {
    let mut resp: HashMap<&str, Option<f64>> = HashMap::new();
    for r in responses.iter().filter(|r| r.drug == drug) {
        resp.insert(r.cell_line.as_str(), r.log_ic50);
    }
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    let mut labels = Vec::new();
    let mut dropped = 0;
    for (i, label) in expr.row_labels.iter().enumerate() {
        let Some(entry) = resp.get(label.as_str()) else {
            continue;
        };
        let row = expr.row(i);
        match (entry, row.iter().all(Option::is_some)) {
            (Some(y), true) => {
                rows.push(row.iter().map(|v| v.unwrap()).collect::<Vec<_>>());
                targets.push(*y);
                labels.push(label.clone());
            }
            _ => dropped += 1,
        }
    }
    let dataset = if rows.is_empty() {
        Dataset::empty(expr.n_cols())
    } else {
        Dataset::from_rows(&rows, &targets)?
    };
    Ok(DrugDataset {
        drug: drug.to_string(),
        labels,
        genes: expr.column_labels.clone(),
        dataset,
        dropped,
    })
}

/// Distinct drug ids in first-seen order.
pub fn drug_ids(responses: &[ResponseRecord]) -> Vec<String> {
    let mut seen = HashSet::new();
    responses
        .iter()
        .filter(|r| seen.insert(r.drug.as_str()))
        .map(|r| r.drug.clone())
        .collect()
}

/// Writes a dataset as `label,<genes...>,target` CSV.
pub fn write_dataset_csv<W: std::io::Write>(
    w: W,
    labels: &[String],
    genes: &[String],
    d: &Dataset,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["label".to_string()];
    header.extend(genes.iter().cloned());
    header.push("target".into());
    wtr.write_record(&header).map_err(csv_err)?;
    for i in 0..d.n() {
        let mut rec = vec![labels[i].clone()];
        rec.extend((0..d.d()).map(|j| format!("{:?}", d.inputs[(i, j)])));
        rec.push(format!("{:?}", d.targets[i]));
        wtr.write_record(&rec).map_err(csv_err)?;
    }
    wtr.flush().map_err(|source| Error::Io {
        path: "<writer>".into(),
        source,
    })
}

/// Reads a dataset written by [`write_dataset_csv`]: the last column is the target.
pub fn read_dataset_csv<R: Read>(r: R, delimiter: u8) -> Result<(Vec<String>, Vec<String>, Dataset)> {
    let t = parse_table(r, delimiter)?;
    if t.n_cols() == 0 {
        return Err(Error::invalid("dataset file needs a target column"));
    }
    if t.missing_count() > 0 {
        return Err(Error::invalid("dataset file contains missing values"));
    }
    let d = t.n_cols() - 1;
    let inputs = DMatrix::from_fn(t.n_rows(), d, |i, j| t.get(i, j).unwrap());
    let targets = DVector::from_fn(t.n_rows(), |i, _| t.get(i, d).unwrap());
    let genes = t.column_labels[..d].to_vec();
    Ok((t.row_labels, genes, Dataset::new(inputs, targets)?))
}

/// Column means fitted on training rows and applied to any split,
/// followed by per-row L2 normalisation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeaturePreprocessor {
    pub column_means: Vec<f64>,
}

impl FeaturePreprocessor {
    pub fn fit(x: &DMatrix<f64>) -> Result<Self> {
        if x.nrows() < 2 {
            return Err(Error::invalid(format!(
                "preprocessing needs at least 2 rows, got {}",
                x.nrows()
            )));
        }
        let n = x.nrows() as f64;
        let column_means = x.column_iter().map(|c| c.sum() / n).collect();
        Ok(Self { column_means })
    }

    pub fn center(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.column_means.len() {
            return Err(Error::DimensionMismatch {
                expected: self.column_means.len(),
                found: x.ncols(),
            });
        }
        Ok(DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] - self.column_means[j]))
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut c = self.center(x)?;
        normalize_rows(&mut c)?;
        Ok(c)
    }
}

fn normalize_rows(x: &mut DMatrix<f64>) -> Result<()> {
    for i in 0..x.nrows() {
        let norm = x.row(i).norm();
        if norm == 0.0 {
            return Err(Error::ZeroRow { row: i });
        }
        x.row_mut(i).unscale_mut(norm);
    }
    Ok(())
}

/// Removes each column's mean, then scales every row to unit L2 norm.
pub fn preprocess_features(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    FeaturePreprocessor::fit(x)?.apply(x)
}

pub fn center_targets(y: &DVector<f64>) -> Result<DVector<f64>> {
    if y.is_empty() {
        return Err(Error::invalid("cannot center an empty target vector"));
    }
    let mean = y.mean();
    Ok(y.map(|v| v - mean))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub n_test: usize,
    pub n_nonprivate: usize,
    pub seed: u64,
}

/// Index sets of a three-way split.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitIndices {
    pub test: Vec<usize>,
    pub nonprivate: Vec<usize>,
    pub private: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct Split {
    pub test: Dataset,
    pub nonprivate: Dataset,
    pub private: Dataset,
    pub indices: SplitIndices,
}

pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<SplitIndices> {
    if spec.n_test + spec.n_nonprivate > n {
        return Err(Error::invalid(format!(
            "split needs {} + {} rows but dataset has {n}",
            spec.n_test, spec.n_nonprivate
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut RngStream::derive(spec.seed, "split", &[]));
    let private = perm.split_off(spec.n_test + spec.n_nonprivate);
    let nonprivate = perm.split_off(spec.n_test);
    Ok(SplitIndices {
        test: perm,
        nonprivate,
        private,
    })
}

/// Random disjoint partition into test, non-private and private (remainder) sets.
pub fn split_dataset(d: &Dataset, spec: &SplitSpec) -> Result<Split> {
    let indices = split_indices(d.n(), spec)?;
    Ok(Split {
        test: d.subset(&indices.test),
        nonprivate: d.subset(&indices.nonprivate),
        private: d.subset(&indices.private),
        indices,
    })
}

/// Summary of per-drug sizes after cleaning.
pub fn drug_sizes(datasets: &[DrugDataset]) -> BTreeMap<String, usize> {
    datasets.iter().map(|d| (d.drug.clone(), d.dataset.n())).collect()
}
