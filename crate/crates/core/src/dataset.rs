//! Time-ordered feature tables.
//!
//! A [`Dataset`] pairs an N×d feature matrix with a non-decreasing axis
//! (time, load, cycles, ...) and optional ground-truth labels. Everything
//! here is immutable: preprocessing returns new datasets.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Feature table with a monotone axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    axis_name: String,
    axis: Vec<f64>,
    features: Array2<f64>,
    feature_names: Vec<String>,
    labels: Option<Vec<i64>>,
    axis_end: f64,
    units: Option<String>,
}

impl Dataset {
    /// Builds and validates a dataset. `axis_end` defaults to the last axis value.
    pub fn new(
        axis: Vec<f64>,
        features: Array2<f64>,
        feature_names: Vec<String>,
        labels: Option<Vec<i64>>,
        axis_end: Option<f64>,
    ) -> Result<Self> {
        let n = axis.len();
        if n == 0 {
            return Err(Error::Validation("dataset has no rows".into()));
        }
        if features.nrows() != n {
            return Err(Error::Validation(format!(
                "feature matrix has {} rows but axis has {}",
                features.nrows(),
                n
            )));
        }
        if features.ncols() == 0 {
            return Err(Error::Validation("dataset has no feature columns".into()));
        }
        if feature_names.len() != features.ncols() {
            return Err(Error::Validation(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                features.ncols()
            )));
        }
        if let Some(labels) = &labels {
            if labels.len() != n {
                return Err(Error::Validation(format!(
                    "{} labels for {} rows",
                    labels.len(),
                    n
                )));
            }
        }
        for (i, t) in axis.iter().enumerate() {
            if !t.is_finite() {
                return Err(Error::Validation(format!(
                    "non-finite axis value at row {}",
                    i + 1
                )));
            }
            if i > 0 && *t < axis[i - 1] {
                return Err(Error::Validation(format!(
                    "axis not monotone at row {}",
                    i + 1
                )));
            }
        }
        for ((i, j), v) in features.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::Validation(format!(
                    "non-finite value in column {} at row {}",
                    feature_names[j],
                    i + 1
                )));
            }
        }
        let last = axis[n - 1];
        let axis_end = axis_end.unwrap_or(last);
        if !axis_end.is_finite() || axis_end < last {
            return Err(Error::Validation(format!(
                "axis_end {axis_end} precedes the last axis value {last}"
            )));
        }
        Ok(Self {
            axis_name: "time".into(),
            axis,
            features,
            feature_names,
            labels,
            axis_end,
            units: None,
        })
    }

    pub fn with_axis_name(mut self, name: impl Into<String>) -> Self {
        self.axis_name = name.into();
        self
    }

    pub fn with_units(mut self, units: Option<String>) -> Self {
        self.units = units;
        self
    }

    pub fn len(&self) -> usize {
        self.axis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axis.is_empty()
    }

    /// Number of feature columns.
    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn axis(&self) -> &[f64] {
        &self.axis
    }

    pub fn axis_name(&self) -> &str {
        &self.axis_name
    }

    pub fn axis_end(&self) -> f64 {
        self.axis_end
    }

    pub fn units(&self) -> Option<&str> {
        self.units.as_deref()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn labels(&self) -> Option<&[i64]> {
        self.labels.as_deref()
    }

    /// Returns a copy with a different test end. Must not precede the last event.
    pub fn with_axis_end(&self, axis_end: f64) -> Result<Self> {
        let last = self.axis[self.len() - 1];
        if !axis_end.is_finite() || axis_end < last {
            return Err(Error::Validation(format!(
                "axis_end {axis_end} precedes the last axis value {last}"
            )));
        }
        let mut out = self.clone();
        out.axis_end = axis_end;
        Ok(out)
    }

    /// Row-major copy of the selected columns.
    pub fn subset_rows(&self, subset: &FeatureSubset) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len() * subset.len());
        for row in self.features.rows() {
            out.extend(subset.indices().iter().map(|&j| row[j]));
        }
        out
    }

    fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Validation(
                "selection leaves an empty dataset".into(),
            ));
        }
        Ok(Self {
            axis_name: self.axis_name.clone(),
            axis: rows.iter().map(|&i| self.axis[i]).collect(),
            features: self.features.select(Axis(0), rows),
            feature_names: self.feature_names.clone(),
            labels: self
                .labels
                .as_ref()
                .map(|l| rows.iter().map(|&i| l[i]).collect()),
            axis_end: self.axis_end,
            units: self.units.clone(),
        })
    }
}

/// Sorted set of distinct column indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct FeatureSubset(Vec<usize>);

impl FeatureSubset {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Argument("feature subset is empty".into()));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Argument(format!(
                "feature subset {indices:?} is not strictly increasing"
            )));
        }
        Ok(Self(indices))
    }

    /// Every column of a `d`-column table.
    pub fn all(d: usize) -> Self {
        Self((0..d).collect())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn check_dim(&self, d: usize) -> Result<()> {
        match self.0.last() {
            Some(&last) if last >= d => Err(Error::Argument(format!(
                "feature index {last} out of range for {d} columns"
            ))),
            _ => Ok(()),
        }
    }
}

impl TryFrom<Vec<usize>> for FeatureSubset {
    type Error = Error;

    fn try_from(value: Vec<usize>) -> Result<Self> {
        Self::new(value)
    }
}

impl From<FeatureSubset> for Vec<usize> {
    fn from(value: FeatureSubset) -> Self {
        value.0
    }
}

impl fmt::Display for FeatureSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|i| i.to_string()).collect();
        write!(f, "{}", parts.join("-"))
    }
}

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

/// Column mapping for [`load_dataset`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schema {
    pub axis_column: String,
    pub label_column: Option<String>,
    /// Feature columns to keep; `None` means every remaining column.
    pub feature_columns: Option<Vec<String>>,
    /// Overrides the sidecar and the last-axis-value default.
    pub axis_end: Option<f64>,
}

impl Default for Schema {
    fn default() -> Self {
        Self {
            axis_column: "time".into(),
            label_column: None,
            feature_columns: None,
            axis_end: None,
        }
    }
}

/// Optional JSON sidecar next to a CSV (`data.csv` -> `data.json`).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub units: Option<String>,
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

fn parse_cell(raw: &str, row: usize, column: &str) -> Result<f64> {
    let trimmed = raw.trim();
    if trimmed.is_empty()
        || trimmed.eq_ignore_ascii_case("na")
        || trimmed.eq_ignore_ascii_case("nan")
    {
        return Err(Error::Parse {
            row,
            message: format!("missing value in column {column}"),
        });
    }
    trimmed.parse::<f64>().map_err(|_| Error::Parse {
        row,
        message: format!("cannot parse {trimmed:?} in column {column}"),
    })
}

/// Loads a CSV feature table. Rows are numbered from 1 (first data row) in errors.
pub fn load_dataset(path: &Path, schema: &Schema) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(BufReader::new(File::open(path)?));
    let headers: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Validation(format!("column {name:?} not found")))
    };
    let axis_idx = find(&schema.axis_column)?;
    let label_idx = schema.label_column.as_deref().map(find).transpose()?;
    let feature_idx: Vec<usize> = match &schema.feature_columns {
        Some(cols) => cols.iter().map(|c| find(c)).collect::<Result<_>>()?,
        None => (0..headers.len())
            .filter(|&i| i != axis_idx && Some(i) != label_idx)
            .collect(),
    };
    if feature_idx.is_empty() {
        return Err(Error::Validation("no feature columns".into()));
    }

    let mut axis = Vec::new();
    let mut values = Vec::new();
    let mut labels = label_idx.map(|_| Vec::new());
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        if record.len() != headers.len() {
            return Err(Error::Parse {
                row,
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        axis.push(parse_cell(&record[axis_idx], row, &headers[axis_idx])?);
        for &j in &feature_idx {
            values.push(parse_cell(&record[j], row, &headers[j])?);
        }
        if let (Some(labels), Some(j)) = (labels.as_mut(), label_idx) {
            let raw = record[j].trim();
            let label = raw.parse::<i64>().map_err(|_| Error::Parse {
                row,
                message: format!("cannot parse label {raw:?}"),
            })?;
            labels.push(label);
        }
    }
    if axis.is_empty() {
        return Err(Error::Validation(format!(
            "{} has no data rows",
            path.display()
        )));
    }

    let sidecar_file = sidecar_path(path);
    let sidecar: Sidecar = if sidecar_file.exists() {
        serde_json::from_reader(BufReader::new(File::open(&sidecar_file)?))?
    } else {
        Sidecar::default()
    };

    let n = axis.len();
    let features = Array2::from_shape_vec((n, feature_idx.len()), values)
        .expect("row-major buffer matches shape");
    let names = feature_idx.iter().map(|&j| headers[j].clone()).collect();
    Ok(Dataset::new(
        axis,
        features,
        names,
        labels,
        schema.axis_end.or(sidecar.axis_end),
    )?
    .with_axis_name(headers[axis_idx].clone())
    .with_units(sidecar.units))
}

/// Writes the dataset as CSV (axis, features, optional `label` column) plus its sidecar.
pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?;
    let mut header = vec![ds.axis_name.clone()];
    header.extend(ds.feature_names.iter().cloned());
    if ds.labels.is_some() {
        header.push("label".into());
    }
    writer.write_record(&header)?;
    for (i, row) in ds.features.rows().into_iter().enumerate() {
        let mut record = Vec::with_capacity(header.len());
        record.push(ds.axis[i].to_string());
        record.extend(row.iter().map(|v| v.to_string()));
        if let Some(labels) = &ds.labels {
            record.push(labels[i].to_string());
        }
        writer.write_record(&record)?;
    }
    writer.flush()?;

    let sidecar = Sidecar {
        axis_end: Some(ds.axis_end),
        units: ds.units.clone(),
    };
    let mut file = File::create(sidecar_path(path))?;
    serde_json::to_writer_pretty(&mut file, &sidecar)?;
    file.write_all(b"\n")?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Preprocessing
// ---------------------------------------------------------------------------

fn median_in_place(buf: &mut [f64]) -> f64 {
    let mid = buf.len() / 2;
    buf.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = buf[mid];
    if buf.len() % 2 == 1 {
        upper
    } else {
        let lower = buf[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// Centered running median of every feature column.
///
/// Near the edges the window shrinks symmetrically so it stays centered and
/// inside the data; no padding values are invented.
pub fn moving_median(ds: &Dataset, window: usize) -> Result<Dataset> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::Argument(format!(
            "median window must be odd and positive, got {window}"
        )));
    }
    let n = ds.len();
    if window > n {
        return Err(Error::Argument(format!(
            "median window {window} exceeds {n} rows"
        )));
    }
    let half = window / 2;
    let mut out = ds.clone();
    let mut buf = Vec::with_capacity(window);
    for (src, mut dst) in ds
        .features
        .columns()
        .into_iter()
        .zip(out.features.columns_mut())
    {
        for i in 0..n {
            let h = half.min(i).min(n - 1 - i);
            buf.clear();
            buf.extend(src.slice(ndarray::s![i - h..=i + h]).iter().copied());
            dst[i] = median_in_place(&mut buf);
        }
    }
    Ok(out)
}

/// Keeps rows 0, stride, 2·stride, ...; `axis_end` is preserved.
pub fn decimate(ds: &Dataset, stride: usize) -> Result<Dataset> {
    if stride == 0 {
        return Err(Error::Argument("decimation stride must be positive".into()));
    }
    let rows: Vec<usize> = (0..ds.len()).step_by(stride).collect();
    ds.select_rows(&rows)
}

/// Contiguous runs of equal labels as `(start_row, end_row_exclusive)`.
pub fn label_levels(labels: &[i64]) -> Vec<(usize, usize)> {
    let mut levels = Vec::new();
    let mut start = 0;
    for i in 1..=labels.len() {
        if i == labels.len() || labels[i] != labels[start] {
            levels.push((start, i));
            start = i;
        }
    }
    levels
}

/// Keeps, within each contiguous ground-truth level, the rows whose axis
/// offset from the level start is below that level's duration.
///
/// `keep_durations` holds one entry per level in temporal order.
pub fn truncate_levels(ds: &Dataset, keep_durations: &[f64]) -> Result<Dataset> {
    let labels = ds
        .labels()
        .ok_or_else(|| Error::State("truncate_levels needs ground-truth labels".into()))?;
    let levels = label_levels(labels);
    if levels.len() != keep_durations.len() {
        return Err(Error::Argument(format!(
            "{} durations for {} label levels",
            keep_durations.len(),
            levels.len()
        )));
    }
    if let Some(d) = keep_durations.iter().find(|d| !d.is_finite() || **d < 0.0) {
        return Err(Error::Argument(format!("invalid level duration {d}")));
    }
    let mut rows = Vec::new();
    for (&(start, end), &keep) in levels.iter().zip(keep_durations) {
        let origin = ds.axis[start];
        rows.extend((start..end).filter(|&i| ds.axis[i] - origin < keep));
    }
    ds.select_rows(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn column_ds(col: &[f64]) -> Dataset {
        let n = col.len();
        let features = Array2::from_shape_vec((n, 1), col.to_vec()).unwrap();
        Dataset::new(
            (0..n).map(|i| i as f64).collect(),
            features,
            vec!["f".into()],
            None,
            None,
        )
        .unwrap()
    }

    fn write_csv(dir: &Path, name: &str, body: &str) -> PathBuf {
        let path = dir.join(name);
        std::fs::File::create(&path)
            .unwrap()
            .write_all(body.as_bytes())
            .unwrap();
        path
    }

    #[test]
    fn loads_small_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_csv(
            dir.path(),
            "a.csv",
            "time,f1,f2\n0,1,2\n1,3,4\n2,5,6\n3,7,8\n",
        );
        let ds = load_dataset(&path, &Schema::default()).unwrap();
        assert_eq!(ds.len(), 4);
        assert_eq!(ds.dim(), 2);
        assert_eq!(ds.axis_end(), 3.0);
        assert!(ds.labels().is_none());
        assert_eq!(ds.features()[[2, 1]], 6.0);
    }

    #[test]
    fn rejects_non_monotone_axis() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_csv(dir.path(), "a.csv", "time,f1\n0,1\n1,2\n0.5,3\n2,4\n");
        let err = load_dataset(&path, &Schema::default()).unwrap_err();
        assert_eq!(
            err.to_string(),
            "validation error: axis not monotone at row 3"
        );
    }

    #[test]
    fn rejects_missing_and_non_finite_cells() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_csv(dir.path(), "a.csv", "time,f1\n0,1\n1,NA\n");
        assert!(matches!(
            load_dataset(&path, &Schema::default()),
            Err(Error::Parse { row: 2, .. })
        ));
        let path = write_csv(dir.path(), "b.csv", "time,f1\n0,inf\n");
        assert!(matches!(
            load_dataset(&path, &Schema::default()),
            Err(Error::Validation(_))
        ));
        let path = write_csv(dir.path(), "c.csv", "time,f1\n0,1\n1\n");
        assert!(matches!(
            load_dataset(&path, &Schema::default()),
            Err(Error::Parse { row: 2, .. })
        ));
    }

    #[test]
    fn label_column_and_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_csv(
            dir.path(),
            "a.csv",
            "t,level,x\n0,1,0.5\n1,1,0.7\n2,2,0.1\n",
        );
        write_csv(dir.path(), "a.json", r#"{"axis_end": 10.0, "units": "s"}"#);
        let schema = Schema {
            axis_column: "t".into(),
            label_column: Some("level".into()),
            ..Schema::default()
        };
        let ds = load_dataset(&path, &schema).unwrap();
        assert_eq!(ds.labels(), Some(&[1, 1, 2][..]));
        assert_eq!(ds.feature_names(), &["x".to_string()]);
        assert_eq!(ds.axis_end(), 10.0);
        assert_eq!(ds.units(), Some("s"));
    }

    #[test]
    fn save_then_load_is_identical() {
        let dir = tempfile::tempdir().unwrap();
        let features = array![[0.1, -2.5e-7], [1.0 / 3.0, 4.0], [7.25, 1e300]];
        let ds = Dataset::new(
            vec![0.0, 0.5, 0.5],
            features,
            vec!["a".into(), "b".into()],
            Some(vec![3, 3, 1]),
            Some(2.0),
        )
        .unwrap();
        let path = dir.path().join("rt.csv");
        save_dataset(&ds, &path).unwrap();
        let schema = Schema {
            label_column: Some("label".into()),
            ..Schema::default()
        };
        assert_eq!(load_dataset(&path, &schema).unwrap(), ds);
    }

    #[test]
    fn moving_median_shrinks_at_edges() {
        let out = moving_median(&column_ds(&[1.0, 100.0, 2.0, 3.0]), 3).unwrap();
        assert_eq!(out.features().column(0).to_vec(), vec![1.0, 2.0, 3.0, 3.0]);
    }

    #[test]
    fn moving_median_identity_cases() {
        let ds = column_ds(&[4.0, -1.0, 9.0, 2.0, 2.0]);
        assert_eq!(moving_median(&ds, 1).unwrap(), ds);
        let constant = column_ds(&[2.5; 9]);
        assert_eq!(moving_median(&constant, 5).unwrap(), constant);
    }

    #[test]
    fn moving_median_rejects_bad_windows() {
        let ds = column_ds(&[1.0, 2.0, 3.0]);
        assert!(matches!(moving_median(&ds, 0), Err(Error::Argument(_))));
        assert!(matches!(moving_median(&ds, 2), Err(Error::Argument(_))));
        assert!(matches!(moving_median(&ds, 5), Err(Error::Argument(_))));
    }

    #[test]
    fn decimate_keeps_every_stride_row() {
        let ds = column_ds(&(0..10).map(f64::from).collect::<Vec<_>>());
        let out = decimate(&ds, 3).unwrap();
        assert_eq!(out.axis(), &[0.0, 3.0, 6.0, 9.0]);
        assert_eq!(out.axis_end(), 9.0);
        assert_eq!(decimate(&ds, 1).unwrap(), ds);
        assert!(decimate(&ds, 0).is_err());
    }

    #[test]
    fn truncate_levels_keeps_level_prefixes() {
        let axis: Vec<f64> = (0..12).map(|i| i as f64 * 0.5).collect();
        let labels = vec![1, 1, 1, 1, 2, 2, 2, 2, 3, 3, 3, 3];
        let features = Array2::zeros((12, 1));
        let ds = Dataset::new(axis, features, vec!["f".into()], Some(labels), Some(6.0)).unwrap();
        let out = truncate_levels(&ds, &[2.0, 1.0, 0.5]).unwrap();
        assert_eq!(out.axis(), &[0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 4.0]);
        assert_eq!(out.labels(), Some(&[1, 1, 1, 1, 2, 2, 3][..]));
        assert_eq!(out.axis_end(), 6.0);

        assert_eq!(truncate_levels(&ds, &[5.0, 5.0, 5.0]).unwrap(), ds);
        assert!(matches!(
            truncate_levels(&ds, &[1.0]),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn truncate_levels_degenerate_cases() {
        let ds = column_ds(&[1.0, 2.0]);
        assert!(matches!(truncate_levels(&ds, &[1.0]), Err(Error::State(_))));
        let single = Dataset::new(
            vec![0.0, 1.0],
            Array2::zeros((2, 1)),
            vec!["f".into()],
            Some(vec![4, 4]),
            None,
        )
        .unwrap();
        assert!(matches!(
            truncate_levels(&single, &[0.0]),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn feature_subset_validation() {
        assert!(FeatureSubset::new(vec![0, 2, 5]).is_ok());
        assert!(FeatureSubset::new(vec![2, 2]).is_err());
        assert!(FeatureSubset::new(vec![3, 1]).is_err());
        assert!(FeatureSubset::new(vec![]).is_err());
        assert!(FeatureSubset::new(vec![0, 4])
            .unwrap()
            .check_dim(4)
            .is_err());
        let parsed: FeatureSubset = serde_json::from_str("[1,3]").unwrap();
        assert_eq!(parsed.indices(), &[1, 3]);
        assert!(serde_json::from_str::<FeatureSubset>("[3,1]").is_err());
    }
}
