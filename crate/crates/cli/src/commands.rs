//! Subcommand implementations.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use onset_cvi::dataset::{self, label_levels, save_dataset, Dataset};
use onset_cvi::search::{
    accumulate_histogram, evaluate_against_truth, materialize, run_search_with, select_best,
    select_voted, vote_per_k, voting_scheme, ChangePointMatch, OnsetHistogram, RandSummary,
    RunOptions, SearchRecord, SearchResult, ShapeScores,
};
use onset_cvi::stream::{replay, OnsetTracker};
use onset_cvi::synth::{generate, SynthTruth};
use onset_cvi::FeatureSubset;

use crate::config::Config;
use crate::error::{CliError, CliResult};
use crate::output::{
    create_dir, partition_id, read_partitions, write_histogram, write_json, write_partitions,
    PartitionColumn, Provenance,
};

pub const VOTING_RULE: &str = "shape baseline: per subset, K by weighted plurality of the shape \
indices (ties to the lowest K); per K, subsets ranked by weighted Borda count (ties to the \
lexicographically smallest subset); the top-ranked subsets per K feed the histogram";

/// Loads the configured dataset and applies the `[preprocess]` steps in order:
/// level truncation, running median, decimation.
pub fn load_prepared(cfg: &Config) -> CliResult<Dataset> {
    let section = cfg.dataset()?;
    let path = cfg.resolve(&section.path);
    let mut ds = dataset::load_dataset(&path, &section.schema())?;
    let pre = &cfg.preprocess;
    if let Some(keep) = &pre.truncate_levels {
        ds = dataset::truncate_levels(&ds, keep)?;
    }
    if let Some(w) = pre.median_window {
        ds = dataset::moving_median(&ds, w)?;
    }
    if let Some(stride) = pre.decimate {
        ds = dataset::decimate(&ds, stride)?;
    }
    Ok(ds)
}

#[derive(Serialize)]
struct DatasetInfo<'a> {
    path: Option<&'a Path>,
    events: usize,
    features: usize,
    feature_names: &'a [String],
    axis_origin: f64,
    axis_end: f64,
    labelled: bool,
}

impl<'a> DatasetInfo<'a> {
    fn new(ds: &'a Dataset, path: Option<&'a Path>) -> Self {
        Self {
            path,
            events: ds.len(),
            features: ds.dim(),
            feature_names: ds.feature_names(),
            axis_origin: ds.axis()[0],
            axis_end: ds.axis_end(),
            labelled: ds.labels().is_some(),
        }
    }
}

pub fn cmd_preprocess(cfg: &Config, out: &Path) -> CliResult<()> {
    let ds = load_prepared(cfg)?;
    create_dir(out)?;
    let csv = out.join("preprocessed.csv");
    save_dataset(&ds, &csv)?;
    log::info!(
        "wrote {} events x {} features to {}",
        ds.len(),
        ds.dim(),
        csv.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct SynthManifest<'a> {
    config: &'a onset_cvi::synth::SynthConfig,
    truth: &'a SynthTruth,
}

pub fn cmd_synth(cfg: &Config, out: &Path) -> CliResult<()> {
    let (ds, truth) = generate(&cfg.synth)?;
    create_dir(out)?;
    save_dataset(&ds, &out.join("synth.csv"))?;
    let prov = Provenance::new("synth", cfg.hash(), cfg.synth.seed);
    write_json(
        &out.join("truth.json"),
        &prov,
        &SynthManifest {
            config: &cfg.synth,
            truth: &truth,
        },
    )?;
    log::info!(
        "wrote {} events over {} stages to {}",
        ds.len(),
        truth.change_points.len(),
        out.display()
    );
    Ok(())
}

/// Compact per-combination entry of the manifest.
#[derive(Serialize)]
struct RecordEntry<'a> {
    subset: &'a FeatureSubset,
    k: usize,
    score: f64,
    onsets: &'a [f64],
    objective: f64,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    shape: Option<ShapeScores>,
}

impl<'a> From<&'a SearchRecord> for RecordEntry<'a> {
    fn from(r: &'a SearchRecord) -> Self {
        Self {
            subset: &r.subset,
            k: r.k,
            score: r.score.value,
            onsets: &r.onsets,
            objective: r.objective,
            seed: r.seed,
            shape: r.shape,
        }
    }
}

#[derive(Serialize)]
struct SweepInfo<'a> {
    planned: usize,
    attempted: usize,
    records: usize,
    skipped: &'a [onset_cvi::search::Skipped],
    complete: bool,
}

#[derive(Serialize)]
struct Selected {
    id: String,
    subset: FeatureSubset,
    k: usize,
    score: f64,
}

#[derive(Serialize)]
struct SearchManifest<'a> {
    config: &'a Config,
    dataset: DatasetInfo<'a>,
    sweep: SweepInfo<'a>,
    #[serde(skip_serializing_if = "Option::is_none")]
    selected: Option<BTreeMap<usize, Vec<Selected>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    selected_vote: Option<BTreeMap<usize, Vec<Selected>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    voting_rule: Option<&'static str>,
    records: Vec<RecordEntry<'a>>,
}

fn selected_summary(sel: &BTreeMap<usize, Vec<&SearchRecord>>) -> BTreeMap<usize, Vec<Selected>> {
    sel.iter()
        .map(|(&k, recs)| {
            let list = recs
                .iter()
                .map(|r| Selected {
                    id: partition_id(r.k, &r.subset),
                    subset: r.subset.clone(),
                    k: r.k,
                    score: r.score.value,
                })
                .collect();
            (k, list)
        })
        .collect()
}

/// Histogram of the onsets of the selected records, anchored at the first event.
pub fn selection_histogram(
    ds: &Dataset,
    sel: &BTreeMap<usize, Vec<&SearchRecord>>,
    bin_width: f64,
) -> CliResult<OnsetHistogram> {
    let onsets = sel.values().flatten().map(|r| r.onsets.as_slice());
    Ok(accumulate_histogram(
        onsets,
        bin_width,
        ds.axis()[0],
        ds.axis_end(),
    )?)
}

fn write_selection(
    ds: &Dataset,
    cfg: &Config,
    sel: &BTreeMap<usize, Vec<&SearchRecord>>,
    prov: &Provenance,
    criterion: &str,
    partitions: &Path,
    histogram: &Path,
) -> CliResult<()> {
    let mut columns = Vec::new();
    for rec in sel.values().flatten() {
        let partition = materialize(ds, &cfg.search, rec)?;
        columns.push(PartitionColumn {
            id: partition_id(rec.k, &rec.subset),
            k: rec.k,
            assignments: partition.assignments().to_vec(),
        });
    }
    write_partitions(
        partitions,
        prov,
        criterion,
        ds.axis(),
        ds.labels(),
        &columns,
    )?;
    let hist = selection_histogram(ds, sel, cfg.histogram.bin_width)?;
    write_histogram(histogram, prov, &hist, criterion)
}

#[derive(Serialize)]
struct VotePerK {
    best_subset: FeatureSubset,
    ranking: Vec<FeatureSubset>,
    borda: Vec<f64>,
}

#[derive(Serialize)]
struct VoteOverall {
    best_subset: FeatureSubset,
    best_k: usize,
    /// Stage-one K of every subset, keyed by subset id.
    nb_clusters: BTreeMap<String, usize>,
}

#[derive(Serialize)]
struct VoteReport<'a> {
    rule: &'static str,
    w1: &'a BTreeMap<onset_cvi::CviKind, f64>,
    w2: &'a BTreeMap<onset_cvi::CviKind, f64>,
    top_n: usize,
    overall: VoteOverall,
    per_k: BTreeMap<usize, VotePerK>,
}

fn write_vote_report(
    res: &SearchResult,
    cfg: &Config,
    prov: &Provenance,
    path: &Path,
) -> CliResult<()> {
    let weights = cfg.vote.weights();
    let overall = voting_scheme(res, &weights)?;
    let per_k = vote_per_k(res, &weights)?
        .into_iter()
        .map(|(k, o)| {
            let ranking: Vec<FeatureSubset> = o.ranking.into_iter().take(cfg.vote.top_n).collect();
            let borda = ranking.iter().map(|s| o.borda[s]).collect();
            (
                k,
                VotePerK {
                    best_subset: o.best_subset,
                    ranking,
                    borda,
                },
            )
        })
        .collect();
    let report = VoteReport {
        rule: VOTING_RULE,
        w1: &cfg.vote.w1,
        w2: &cfg.vote.w2,
        top_n: cfg.vote.top_n,
        overall: VoteOverall {
            best_subset: overall.best_subset,
            best_k: overall.best_k,
            nb_clusters: overall
                .nb_clusters
                .iter()
                .map(|(s, &k)| (s.to_string(), k))
                .collect(),
        },
        per_k,
    };
    write_json(path, prov, &report)
}

/// Which artifacts a sweep writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    /// Onset selection, plus the voting baseline when shape scores are enabled.
    Search,
    /// Voting baseline only; shape scores are forced on.
    Vote,
}

pub fn cmd_search(cfg: &Config, out: &Path, jobs: Option<usize>, mode: SweepMode) -> CliResult<()> {
    cfg.validate()?;
    let mut cfg = cfg.clone();
    if mode == SweepMode::Vote {
        cfg.search.shape.enabled = true;
    }
    let ds = load_prepared(&cfg)?;
    let res = run_search_with(&ds, &cfg.search, RunOptions { jobs, cancel: None })?;
    log::info!(
        "{} of {} combinations scored, {} skipped",
        res.records.len(),
        res.planned,
        res.skipped.len()
    );
    create_dir(out)?;
    let command = match mode {
        SweepMode::Search => "search",
        SweepMode::Vote => "vote",
    };
    let prov = Provenance::new(command, cfg.hash(), cfg.search.seed);

    let mut selected = None;
    if mode == SweepMode::Search {
        let sel = select_best(&res, &cfg.search.selection);
        write_selection(
            &ds,
            &cfg,
            &sel,
            &prov,
            "onset",
            &out.join("partitions.csv"),
            &out.join("histogram.csv"),
        )?;
        selected = Some(selected_summary(&sel));
    }
    let mut selected_vote = None;
    if cfg.search.shape.enabled {
        let sel = select_voted(&res, &cfg.vote.weights(), cfg.vote.top_n)?;
        write_selection(
            &ds,
            &cfg,
            &sel,
            &prov,
            "shape",
            &out.join("partitions_vote.csv"),
            &out.join("histogram_vote.csv"),
        )?;
        write_vote_report(&res, &cfg, &prov, &out.join("vote.json"))?;
        selected_vote = Some(selected_summary(&sel));
    }
    let section = cfg.dataset()?;
    write_json(
        &out.join("manifest.json"),
        &prov,
        &SearchManifest {
            config: &cfg,
            dataset: DatasetInfo::new(&ds, Some(&section.path)),
            sweep: SweepInfo {
                planned: res.planned,
                attempted: res.attempted,
                records: res.records.len(),
                skipped: &res.skipped,
                complete: res.complete,
            },
            selected,
            voting_rule: selected_vote.as_ref().map(|_| VOTING_RULE),
            selected_vote,
            records: res.records.iter().map(RecordEntry::from).collect(),
        },
    )?;
    Ok(())
}

/// Partition files evaluated by default: whatever a sweep left in `out`.
fn default_partition_files(out: &Path) -> Vec<PathBuf> {
    ["partitions.csv", "partitions_vote.csv"]
        .iter()
        .map(|f| out.join(f))
        .filter(|p| p.exists())
        .collect()
}

pub fn cmd_eval(cfg: &Config, out: &Path, inputs: &[PathBuf]) -> CliResult<()> {
    let files = if inputs.is_empty() {
        default_partition_files(out)
    } else {
        inputs.to_vec()
    };
    if files.is_empty() {
        return Err(CliError::Usage(format!(
            "no partition files given and none found in {}",
            out.display()
        )));
    }
    let fallback_truth = match &cfg.dataset {
        Some(_) => load_prepared(cfg)?.labels().map(<[i64]>::to_vec),
        None => None,
    };
    let mut tables: Vec<(String, BTreeMap<usize, RandSummary>)> = Vec::new();
    for file in &files {
        let table = read_partitions(file)?;
        let truth = table.labels.as_deref().or(fallback_truth.as_deref());
        if let Some(t) = truth {
            if let Some(c) = table
                .columns
                .iter()
                .find(|c| c.assignments.len() != t.len())
            {
                return Err(CliError::Usage(format!(
                    "{}: partition {} has {} events, truth has {}",
                    file.display(),
                    c.id,
                    c.assignments.len(),
                    t.len()
                )));
            }
        }
        let summary = evaluate_against_truth(
            table
                .columns
                .iter()
                .map(|c| (c.k, c.assignments.as_slice())),
            truth,
        )?;
        tables.push((table.criterion, summary));
    }
    create_dir(out)?;
    let prov = Provenance::new("eval", cfg.hash(), cfg.search.seed);
    let path = out.join("rand_summary.csv");
    let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
    writeln!(
        w,
        "# {} {} eval config_hash={} seed={}",
        prov.tool, prov.version, prov.config_hash, prov.seed
    )?;
    writeln!(w, "k,criterion,count,min,q1,median,q3,max,outliers")?;
    let ks: std::collections::BTreeSet<usize> =
        tables.iter().flat_map(|(_, t)| t.keys().copied()).collect();
    for &k in &ks {
        for (name, table) in &tables {
            if let Some(s) = table.get(&k) {
                writeln!(
                    w,
                    "{k},{name},{},{},{},{},{},{},{}",
                    s.count, s.min, s.q1, s.median, s.q3, s.max, s.outliers
                )?;
            }
        }
    }
    w.flush()?;

    let stdout = std::io::stdout();
    let mut o = stdout.lock();
    write!(o, "{:>3}", "K")?;
    for (name, _) in &tables {
        write!(o, " | {:^30}", format!("{name} min/median/max (outliers)"))?;
    }
    writeln!(o)?;
    for &k in &ks {
        write!(o, "{k:>3}")?;
        for (_, table) in &tables {
            match table.get(&k) {
                Some(s) => write!(
                    o,
                    " | {:>6.1} {:>6.1} {:>6.1} ({:>2})      ",
                    100.0 * s.min,
                    100.0 * s.median,
                    100.0 * s.max,
                    s.outliers
                )?,
                None => write!(o, " | {:^30}", "-")?,
            }
        }
        writeln!(o)?;
    }
    Ok(())
}

pub fn cmd_stream(t_end: f64, input: Option<&Path>) -> CliResult<()> {
    let reader: Box<dyn BufRead> = match input {
        Some(p) => Box::new(BufReader::new(std::fs::File::open(p).map_err(|e| {
            CliError::Usage(format!("cannot open {}: {e}", p.display()))
        })?)),
        None => Box::new(BufReader::new(std::io::stdin())),
    };
    let mut tracker = OnsetTracker::new(t_end)?;
    let stdout = std::io::stdout();
    let mut out = std::io::BufWriter::new(stdout.lock());
    replay(reader, &mut tracker, |event| {
        serde_json::to_writer(&mut out, event)?;
        out.write_all(b"\n")?;
        Ok(())
    })?;
    out.flush()?;
    let snap = tracker.snapshot()?;
    log::info!(
        "{} events, {} clusters",
        snap.events_seen,
        snap.onsets.len()
    );
    Ok(())
}

fn read_histogram(path: &Path, bin_width: f64) -> CliResult<OnsetHistogram> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let mut edges = Vec::new();
    let mut counts = Vec::new();
    for (row, rec) in reader.deserialize::<(f64, f64, u64)>().enumerate() {
        let (start, end, count) =
            rec.map_err(|e| CliError::Usage(format!("{}: row {}: {e}", path.display(), row + 1)))?;
        if edges.is_empty() {
            edges.push(start);
        }
        edges.push(end);
        counts.push(count);
    }
    if counts.is_empty() {
        return Err(CliError::Usage(format!("{} holds no bins", path.display())));
    }
    Ok(OnsetHistogram {
        bin_width,
        bin_edges: edges,
        counts,
        contributing_partitions: 0,
    })
}

/// Change points from the truth file, or from label changes of the dataset.
fn change_points(cfg: &Config) -> CliResult<Option<Vec<f64>>> {
    if let Some(path) = &cfg.report.truth {
        let path = cfg.resolve(path);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        #[derive(serde::Deserialize)]
        struct TruthFile {
            truth: SynthTruth,
        }
        let file: TruthFile = serde_json::from_str(&text)?;
        return Ok(Some(file.truth.change_points));
    }
    if cfg
        .dataset
        .as_ref()
        .is_some_and(|d| d.label_column.is_some())
    {
        let ds = load_prepared(cfg)?;
        let labels = ds.labels().expect("label column configured");
        return Ok(Some(
            label_levels(labels)
                .iter()
                .map(|&(start, _)| ds.axis()[start])
                .collect(),
        ));
    }
    Ok(None)
}

#[derive(Serialize)]
struct BinEntry {
    bin: usize,
    start: f64,
    end: f64,
    count: u64,
    change_point: Option<usize>,
}

#[derive(Serialize)]
struct CriterionReport {
    criterion: String,
    tallest: Vec<BinEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    covered: Option<Vec<usize>>,
}

#[derive(Serialize)]
struct Report {
    top_bins: usize,
    tolerance_bins: usize,
    min_count: u64,
    change_points: Option<Vec<f64>>,
    voting_rule: Option<&'static str>,
    criteria: Vec<CriterionReport>,
}

pub fn cmd_report(cfg: &Config, out: &Path) -> CliResult<()> {
    let files: Vec<(&str, PathBuf)> = [("onset", "histogram.csv"), ("shape", "histogram_vote.csv")]
        .into_iter()
        .map(|(c, f)| (c, out.join(f)))
        .filter(|(_, p)| p.exists())
        .collect();
    if files.is_empty() {
        return Err(CliError::Usage(format!(
            "no histogram found in {}",
            out.display()
        )));
    }
    let cps = change_points(cfg)?;
    let rc = &cfg.report;
    let mut criteria = Vec::new();
    let stdout = std::io::stdout();
    let mut o = stdout.lock();
    for (criterion, path) in &files {
        let hist = read_histogram(path, cfg.histogram.bin_width)?;
        let matched: Option<ChangePointMatch> = cps
            .as_ref()
            .map(|c| hist.match_change_points(c, rc.top_bins, rc.tolerance_bins));
        let tallest = hist.tallest_bins(rc.top_bins);
        writeln!(o, "{criterion}: {} tallest bins", tallest.len())?;
        let mut entries = Vec::new();
        for (i, &b) in tallest.iter().enumerate() {
            let entry = BinEntry {
                bin: b,
                start: hist.bin_edges[b],
                end: hist.bin_edges[b + 1],
                count: hist.counts[b],
                change_point: matched.as_ref().and_then(|m| m.nearest[i]),
            };
            if entry.count >= rc.min_count {
                let note = match (&cps, entry.change_point) {
                    (Some(c), Some(j)) => format!("  near change point {} ({})", j + 1, c[j]),
                    (Some(_), None) => "  no change point nearby".to_string(),
                    (None, _) => String::new(),
                };
                writeln!(
                    o,
                    "  [{}, {})  {:>6}{note}",
                    entry.start, entry.end, entry.count
                )?;
            }
            entries.push(entry);
        }
        if let (Some(m), Some(c)) = (&matched, &cps) {
            writeln!(
                o,
                "  change points detected: {} of {}",
                m.covered_count(),
                c.len()
            )?;
        }
        if *criterion == "shape" {
            writeln!(o, "  ({VOTING_RULE})")?;
        }
        criteria.push(CriterionReport {
            criterion: criterion.to_string(),
            tallest: entries,
            covered: matched.map(|m| m.covered),
        });
    }
    let prov = Provenance::new("report", cfg.hash(), cfg.search.seed);
    let has_vote = files.iter().any(|(c, _)| *c == "shape");
    write_json(
        &out.join("report.json"),
        &prov,
        &Report {
            top_bins: rc.top_bins,
            tolerance_bins: rc.tolerance_bins,
            min_count: rc.min_count,
            change_points: cps,
            voting_rule: has_vote.then_some(VOTING_RULE),
            criteria,
        },
    )
}
