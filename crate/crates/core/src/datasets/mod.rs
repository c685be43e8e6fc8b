//! Binary classification data: LIBSVM text I/O and the instance split.

pub mod synthetic;

use std::io::{BufRead, Write};

use crate::cluster::{partition_even, Partition};
use crate::error::{Error, Result};
use crate::linalg::SparseColumns;

/// Data points `x_i` as the columns of `X` (d × n) with labels `y_i ∈ {±1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    x: SparseColumns,
    labels: Vec<f64>,
}

impl LabeledDataset {
    pub fn new(x: SparseColumns, labels: Vec<f64>) -> Result<Self> {
        if x.n_cols() != labels.len() {
            return Err(Error::DimensionMismatch { expected: x.n_cols(), got: labels.len() });
        }
        if let Some(bad) = labels.iter().find(|&&y| y != 1.0 && y != -1.0) {
            return Err(Error::Invariant(format!("label {bad} is not ±1")));
        }
        Ok(LabeledDataset { x, labels })
    }

    pub fn features(&self) -> &SparseColumns {
        &self.x
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn n_instances(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.x.n_rows()
    }

    /// The label-scaled matrix `YX` with columns `y_i x_i`.
    pub fn label_scaled(&self) -> SparseColumns {
        let mut m = self.x.clone();
        m.scale_columns(&self.labels).expect("one label per column");
        m
    }

    /// Instance partition used by [`split_instances`](Self::split_instances).
    pub fn instance_partition(&self, workers: usize) -> Result<Partition> {
        partition_even(self.n_instances(), workers)
    }

    /// Contiguous column blocks `X_1, …, X_K`, one per worker.
    pub fn split_instances(&self, workers: usize) -> Result<Vec<SparseColumns>> {
        let p = self.instance_partition(workers)?;
        Ok(p.blocks().iter().map(|r| self.x.columns(r.clone())).collect())
    }

    pub fn write_libsvm<W: Write>(&self, mut out: W) -> Result<()> {
        for (j, &y) in self.labels.iter().enumerate() {
            write!(out, "{}", if y > 0.0 { "+1" } else { "-1" })?;
            for (r, v) in self.x.column_entries(j) {
                write!(out, " {}:{}", r + 1, v)?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn to_libsvm_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_libsvm(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }
}

/// Parses LIBSVM text: one `label idx:val idx:val …` line per instance,
/// 1-based strictly increasing feature indices.
///
/// Positive labels map to `+1` and negative ones to `-1`; a zero label is
/// rejected. The feature count is the largest index seen unless
/// `n_features` is given, in which case indices beyond it are an error.
/// Text after `#` is ignored.
pub fn parse_libsvm<R: BufRead>(reader: R, n_features: Option<usize>) -> Result<LabeledDataset> {
    let mut columns: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut labels = Vec::new();
    let mut max_index = 0;
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse { line: lineno, message };
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().expect("nonempty line has a token");
        let label: f64 = label_tok.parse().map_err(|_| err(format!("invalid label `{label_tok}`")))?;
        if !label.is_finite() || label == 0.0 {
            return Err(err(format!("label `{label_tok}` is not a binary class")));
        }
        let mut col = Vec::new();
        let mut prev = 0usize;
        for tok in tokens {
            let (idx, val) = tok.split_once(':').ok_or_else(|| err(format!("malformed feature `{tok}`")))?;
            let idx: usize = idx.parse().map_err(|_| err(format!("invalid feature index in `{tok}`")))?;
            let val: f64 = val.parse().map_err(|_| err(format!("invalid feature value in `{tok}`")))?;
            if idx < 1 {
                return Err(err(format!("feature index must be at least 1 in `{tok}`")));
            }
            if idx == prev {
                return Err(err(format!("duplicate feature index {idx}")));
            }
            if idx < prev {
                return Err(err(format!("feature index {idx} follows {prev}")));
            }
            if !val.is_finite() {
                return Err(err(format!("non-finite value in `{tok}`")));
            }
            if let Some(d) = n_features {
                if idx > d {
                    return Err(err(format!("feature index {idx} exceeds dimension {d}")));
                }
            }
            prev = idx;
            max_index = max_index.max(idx);
            col.push((idx - 1, val));
        }
        columns.push(col);
        labels.push(if label > 0.0 { 1.0 } else { -1.0 });
    }
    let d = n_features.unwrap_or(max_index);
    let x = SparseColumns::from_columns(d, columns)?;
    LabeledDataset::new(x, labels)
}
