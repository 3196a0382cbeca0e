//! Incremental onset tracking.
//!
//! An [`OnsetTracker`] is fed `(cluster id, t)` assignments in time order by
//! any upstream assigner. It keeps the first occurrence of every cluster and,
//! given the known horizon, reports the running normalized onset entropy.

use std::collections::HashSet;
use std::io::BufRead;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::validity::{normalized_entropy, OnsetDistribution};

#[derive(Debug, Clone)]
pub struct OnsetTracker {
    t_end: f64,
    onsets: Vec<(usize, f64)>,
    known: HashSet<usize>,
    events_seen: u64,
    last_t: Option<f64>,
}

/// Emitted when an event opens a new cluster.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OnsetEvent {
    pub cluster_id: usize,
    pub t: f64,
    pub k_so_far: usize,
    /// `None` until two clusters have been seen.
    pub quality: Option<f64>,
}

/// Immutable copy of the tracker state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackerSnapshot {
    pub t_end: f64,
    pub onsets: Vec<(usize, f64)>,
    pub events_seen: u64,
    pub quality: Option<f64>,
}

impl OnsetTracker {
    pub fn new(t_end: f64) -> Result<Self> {
        if !t_end.is_finite() {
            return Err(Error::Argument(format!(
                "horizon must be finite, got {t_end}"
            )));
        }
        Ok(Self {
            t_end,
            onsets: Vec::new(),
            known: HashSet::new(),
            events_seen: 0,
            last_t: None,
        })
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    /// Onsets in arrival order, which is also time order.
    pub fn onsets(&self) -> &[(usize, f64)] {
        &self.onsets
    }

    pub fn events_seen(&self) -> u64 {
        self.events_seen
    }

    pub fn k_so_far(&self) -> usize {
        self.onsets.len()
    }

    /// Records one event. Returns the new onset when `cluster_id` is new.
    pub fn observe(&mut self, cluster_id: usize, t: f64) -> Result<Option<OnsetEvent>> {
        if !t.is_finite() {
            return Err(Error::Stream(format!("non-finite time {t}")));
        }
        if let Some(last) = self.last_t {
            if t < last {
                return Err(Error::Stream(format!(
                    "time {t} precedes previous event at {last}"
                )));
            }
        }
        if t > self.t_end {
            return Err(Error::Stream(format!(
                "time {t} lies beyond the horizon {}",
                self.t_end
            )));
        }
        self.last_t = Some(t);
        self.events_seen += 1;
        if !self.known.insert(cluster_id) {
            return Ok(None);
        }
        self.onsets.push((cluster_id, t));
        Ok(Some(OnsetEvent {
            cluster_id,
            t,
            k_so_far: self.onsets.len(),
            quality: self.current_quality()?,
        }))
    }

    /// Gap distribution of the onsets so far; `None` before any event.
    pub fn distribution(&self) -> Result<Option<OnsetDistribution>> {
        if self.onsets.is_empty() {
            return Ok(None);
        }
        OnsetDistribution::from_onsets(self.onsets.clone(), self.t_end).map(Some)
    }

    /// Normalized onset entropy, or `None` while fewer than two clusters exist.
    pub fn current_quality(&self) -> Result<Option<f64>> {
        if self.onsets.len() < 2 {
            return Ok(None);
        }
        let dist = self.distribution()?.expect("onsets present");
        normalized_entropy(&dist.deltas).map(Some)
    }

    pub fn snapshot(&self) -> Result<TrackerSnapshot> {
        Ok(TrackerSnapshot {
            t_end: self.t_end,
            onsets: self.onsets.clone(),
            events_seen: self.events_seen,
            quality: self.current_quality()?,
        })
    }
}

/// Parses a `t,cluster_id` line. Blank lines, `#` comments and the header
/// give `None`.
pub fn parse_line(line: &str, row: usize) -> Result<Option<(f64, usize)>> {
    let line = line.trim();
    if line.is_empty() || line.starts_with('#') || line == "t,cluster_id" {
        return Ok(None);
    }
    let (t, id) = line.split_once(',').ok_or_else(|| Error::Parse {
        row,
        message: format!("expected `t,cluster_id`, got `{line}`"),
    })?;
    let t: f64 = t.trim().parse().map_err(|e| Error::Parse {
        row,
        message: format!("bad time `{t}`: {e}"),
    })?;
    let id: usize = id.trim().parse().map_err(|e| Error::Parse {
        row,
        message: format!("bad cluster id `{id}`: {e}"),
    })?;
    Ok(Some((t, id)))
}

/// Feeds every line of `input` to `tracker`, calling `on_onset` for each new cluster.
pub fn replay<R, F>(input: R, tracker: &mut OnsetTracker, mut on_onset: F) -> Result<()>
where
    R: BufRead,
    F: FnMut(&OnsetEvent) -> Result<()>,
{
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if let Some((t, id)) = parse_line(&line, i + 1)? {
            if let Some(event) = tracker.observe(id, t)? {
                on_onset(&event)?;
            }
        }
    }
    Ok(())
}
