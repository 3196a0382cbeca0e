//! Artifact files. Every file records the tool version, config hash and seed
//! (JSON in a `provenance` object, CSV in a leading `#` comment line).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use onset_cvi::search::OnsetHistogram;

use crate::error::{CliError, CliResult};

pub const TOOL: &str = "onset-cvi";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    pub fn new(command: &'static str, config_hash: String, seed: u64) -> Self {
        Self {
            tool: TOOL,
            version: env!("CARGO_PKG_VERSION"),
            command,
            config_hash,
            seed,
        }
    }

    fn comment(&self, extra: &str) -> String {
        let mut line = format!(
            "# {} {} {} config_hash={} seed={}",
            self.tool, self.version, self.command, self.config_hash, self.seed
        );
        if !extra.is_empty() {
            line.push(' ');
            line.push_str(extra);
        }
        line
    }
}

#[derive(Serialize)]
struct WithProvenance<'a, T: Serialize> {
    provenance: &'a Provenance,
    #[serde(flatten)]
    body: &'a T,
}

pub fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| {
        CliError::Config(format!(
            "cannot create output directory {}: {e}",
            dir.display()
        ))
    })
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, prov: &Provenance, body: &T) -> CliResult<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(
        &mut out,
        &WithProvenance {
            provenance: prov,
            body,
        },
    )?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn write_histogram(
    path: &Path,
    prov: &Provenance,
    hist: &OnsetHistogram,
    criterion: &str,
) -> CliResult<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{}", prov.comment(&format!("criterion={criterion}")))?;
    hist.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

/// One named hard partition.
pub struct PartitionColumn {
    pub id: String,
    pub k: usize,
    pub assignments: Vec<usize>,
}

/// Partition id used in CSV headers: `k<K>_<subset>`.
pub fn partition_id(k: usize, subset: &onset_cvi::FeatureSubset) -> String {
    format!("k{k}_{subset}")
}

fn parse_partition_id(id: &str) -> Option<usize> {
    id.strip_prefix('k')?.split('_').next()?.parse().ok()
}

/// Event table: axis value, optional truth label, one column per partition.
pub fn write_partitions(
    path: &Path,
    prov: &Provenance,
    criterion: &str,
    axis: &[f64],
    labels: Option<&[i64]>,
    columns: &[PartitionColumn],
) -> CliResult<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{}", prov.comment(&format!("criterion={criterion}")))?;
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let mut header = vec!["t".to_string()];
    if labels.is_some() {
        header.push("label".into());
    }
    header.extend(columns.iter().map(|c| c.id.clone()));
    writer.write_record(&header)?;
    let mut row = Vec::with_capacity(header.len());
    for i in 0..axis.len() {
        row.clear();
        row.push(axis[i].to_string());
        if let Some(l) = labels {
            row.push(l[i].to_string());
        }
        row.extend(columns.iter().map(|c| c.assignments[i].to_string()));
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

pub struct PartitionTable {
    /// Criterion named in the provenance line, or the file stem.
    pub criterion: String,
    pub labels: Option<Vec<i64>>,
    pub columns: Vec<PartitionColumn>,
}

pub fn read_partitions(path: &Path) -> CliResult<PartitionTable> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let criterion = text
        .lines()
        .next()
        .filter(|l| l.starts_with('#'))
        .and_then(|l| {
            l.split_whitespace()
                .find_map(|w| w.strip_prefix("criterion="))
        })
        .map(str::to_string)
        .unwrap_or_else(|| {
            path.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default()
        });
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let label_idx = headers.iter().position(|h| h == "label");
    let mut columns: Vec<PartitionColumn> = Vec::new();
    let mut column_idx = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        if let Some(k) = parse_partition_id(h) {
            column_idx.push(i);
            columns.push(PartitionColumn {
                id: h.clone(),
                k,
                assignments: Vec::new(),
            });
        }
    }
    let mut labels = label_idx.map(|_| Vec::new());
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let bad = |what: &str| {
            CliError::Usage(format!("{}: row {}: bad {what}", path.display(), row + 1))
        };
        if let (Some(idx), Some(labels)) = (label_idx, labels.as_mut()) {
            labels.push(record[idx].parse().map_err(|_| bad("label"))?);
        }
        for (col, &idx) in columns.iter_mut().zip(&column_idx) {
            col.assignments
                .push(record[idx].parse().map_err(|_| bad("cluster id"))?);
        }
    }
    Ok(PartitionTable {
        criterion,
        labels,
        columns,
    })
}

/// Output directory: explicit flag, then config, then `ONSET_CVI_OUTPUT_DIR`, then `./out`.
pub fn output_dir(flag: Option<&Path>, config: Option<PathBuf>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or(config)
        .or_else(|| std::env::var_os("ONSET_CVI_OUTPUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}
