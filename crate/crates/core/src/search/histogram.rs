use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};

/// Onset counts pooled over selected partitions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OnsetHistogram {
    pub bin_width: f64,
    /// `counts.len() + 1` edges starting at the axis origin.
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub contributing_partitions: usize,
}

/// Bins every onset of every partition. Bins start at `axis_origin`, have width
/// `bin_width` and cover up to `axis_end`, keeping the last partial bin.
/// Onsets outside the range are clamped into the first or last bin.
pub fn accumulate_histogram<'a, I>(
    onsets: I,
    bin_width: f64,
    axis_origin: f64,
    axis_end: f64,
) -> Result<OnsetHistogram>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    if !(bin_width > 0.0) || !bin_width.is_finite() {
        return Err(Error::Argument(format!(
            "bin width must be positive, got {bin_width}"
        )));
    }
    if !(axis_end >= axis_origin) {
        return Err(Error::Argument(format!(
            "axis end {axis_end} precedes origin {axis_origin}"
        )));
    }
    let bins = (((axis_end - axis_origin) / bin_width).ceil() as usize).max(1);
    let mut counts = vec![0u64; bins];
    let mut contributing = 0;
    for partition in onsets {
        contributing += 1;
        for &t in partition {
            let idx = ((t - axis_origin) / bin_width).floor();
            let idx = if idx < 0.0 {
                0
            } else {
                (idx as usize).min(bins - 1)
            };
            counts[idx] += 1;
        }
    }
    Ok(OnsetHistogram {
        bin_width,
        bin_edges: (0..=bins)
            .map(|i| axis_origin + i as f64 * bin_width)
            .collect(),
        counts,
        contributing_partitions: contributing,
    })
}

/// Which change points the tallest bins land near.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChangePointMatch {
    /// Indices of the tallest non-empty bins, tallest first.
    pub tallest: Vec<usize>,
    /// For each tallest bin, the change point it lies near (within tolerance).
    pub nearest: Vec<Option<usize>>,
    /// Change points with at least one tallest bin nearby.
    pub covered: Vec<usize>,
}

impl ChangePointMatch {
    pub fn covered_count(&self) -> usize {
        self.covered.len()
    }

    /// Tallest bins that are not near any change point.
    pub fn spurious_count(&self) -> usize {
        self.nearest.iter().filter(|m| m.is_none()).count()
    }
}

impl OnsetHistogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Bin holding axis value `t` (clamped).
    pub fn bin_of(&self, t: f64) -> usize {
        let idx = ((t - self.bin_edges[0]) / self.bin_width).floor();
        if idx < 0.0 {
            0
        } else {
            (idx as usize).min(self.counts.len() - 1)
        }
    }

    /// Non-empty bins by decreasing count; ties go to the earlier bin.
    pub fn tallest_bins(&self, n: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.counts.len())
            .filter(|&i| self.counts[i] > 0)
            .collect();
        order.sort_by(|&a, &b| self.counts[b].cmp(&self.counts[a]).then(a.cmp(&b)));
        order.truncate(n);
        order
    }

    /// Matches the `n` tallest bins against change points, accepting a bin
    /// within `tolerance` bins of the bin containing a change point.
    pub fn match_change_points(
        &self,
        change_points: &[f64],
        n: usize,
        tolerance: usize,
    ) -> ChangePointMatch {
        let targets: Vec<usize> = change_points.iter().map(|&c| self.bin_of(c)).collect();
        let tallest = self.tallest_bins(n);
        let nearest: Vec<Option<usize>> = tallest
            .iter()
            .map(|&b| {
                targets
                    .iter()
                    .enumerate()
                    .filter(|(_, &t)| b.abs_diff(t) <= tolerance)
                    .min_by_key(|(_, &t)| b.abs_diff(t))
                    .map(|(i, _)| i)
            })
            .collect();
        let mut covered: Vec<usize> = nearest.iter().flatten().copied().collect();
        covered.sort_unstable();
        covered.dedup();
        ChangePointMatch {
            tallest,
            nearest,
            covered,
        }
    }

    /// CSV with `bin_start,bin_end,count` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "bin_start,bin_end,count")?;
        for (i, c) in self.counts.iter().enumerate() {
            writeln!(out, "{},{},{}", self.bin_edges[i], self.bin_edges[i + 1], c)?;
        }
        Ok(())
    }
}
