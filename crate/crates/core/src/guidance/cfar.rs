//! Cell-averaging CFAR along the range axis of each azimuth row.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{BlockGrid, BlockRef, PolarFrame};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CfarParams {
    /// Training cells on each side of the cell under test.
    pub train_cells: usize,
    /// Guard cells on each side, excluded from the noise estimate.
    pub guard_cells: usize,
    pub pfa: f64,
    pub min_hits_per_block: usize,
}

impl Default for CfarParams {
    fn default() -> Self {
        CfarParams {
            train_cells: 12,
            guard_cells: 4,
            pfa: 1e-4,
            min_hits_per_block: 3,
        }
    }
}

impl CfarParams {
    pub fn validate(&self) -> Result<()> {
        if self.train_cells == 0 {
            return Err(Error::Parameter("CFAR needs at least one training cell".into()));
        }
        if !(self.pfa > 0.0 && self.pfa < 1.0) {
            return Err(Error::Parameter(format!("CFAR pfa {} outside (0, 1)", self.pfa)));
        }
        Ok(())
    }

    /// Threshold multiplier for exponential noise averaged over `cells` samples.
    pub fn alpha(&self, cells: usize) -> f64 {
        let n = cells as f64;
        n * (self.pfa.powf(-1.0 / n) - 1.0)
    }
}

/// Boolean detection mask with the frame's shape.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CfarMap {
    pub azimuth_bins: usize,
    pub range_bins: usize,
    pub mask: Vec<bool>,
}

impl CfarMap {
    pub fn empty(azimuth_bins: usize, range_bins: usize) -> Self {
        CfarMap {
            azimuth_bins,
            range_bins,
            mask: vec![false; azimuth_bins * range_bins],
        }
    }

    pub fn is_hit(&self, azimuth_bin: usize, range_bin: usize) -> bool {
        self.mask[azimuth_bin * self.range_bins + range_bin]
    }

    pub fn hit_total(&self) -> usize {
        self.mask.iter().filter(|&&h| h).count()
    }

    /// `(azimuth_bin, range_bin)` of every detection, row-major.
    pub fn hits(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &h)| h)
            .map(move |(i, _)| (i / self.range_bins, i % self.range_bins))
    }

    /// Hit count of every block, indexed by [`BlockGrid::linear_index`].
    pub fn block_hits(&self, grid: &BlockGrid) -> Result<Vec<usize>> {
        if grid.azimuth_bins() != self.azimuth_bins || grid.range_bins() != self.range_bins {
            return Err(Error::Dimension {
                context: "CFAR map vs grid",
                expected: grid.frame_len(),
                got: self.mask.len(),
            });
        }
        let mut counts = vec![0usize; grid.num_blocks()];
        for (a, r) in self.hits() {
            counts[grid.linear_index(grid.block_of(a, r)?)] += 1;
        }
        Ok(counts)
    }

    pub fn hit_count(&self, grid: &BlockGrid, block: BlockRef) -> Result<usize> {
        Ok(self.block_hits(grid)?[grid.linear_index(block)])
    }
}

pub fn cfar_detect(frame: &PolarFrame, params: &CfarParams) -> Result<CfarMap> {
    params.validate()?;
    let range_bins = frame.range_bins();
    let reach = params.train_cells + params.guard_cells;
    if range_bins < 2 * reach + 1 {
        return Err(Error::Parameter(format!(
            "CFAR window of {} cells per side does not fit {range_bins} range bins",
            reach
        )));
    }
    let alpha_two = params.alpha(2 * params.train_cells);
    let alpha_one = params.alpha(params.train_cells);
    let (t, g) = (params.train_cells, params.guard_cells);

    let mut mask = vec![false; frame.meta().len()];
    mask.par_chunks_mut(range_bins)
        .enumerate()
        .for_each(|(a, out)| {
            let row = frame.row(a);
            let mut prefix = Vec::with_capacity(range_bins + 1);
            prefix.push(0.0);
            let mut acc = 0.0;
            for &v in row {
                acc += v;
                prefix.push(acc);
            }
            let window = |lo: usize, hi: usize| prefix[hi] - prefix[lo];
            for (i, hit) in out.iter_mut().enumerate() {
                let left = (i >= reach).then(|| window(i - reach, i - g));
                let right = (i + reach < range_bins).then(|| window(i + g + 1, i + reach + 1));
                let threshold = match (left, right) {
                    (Some(l), Some(r)) => alpha_two * (l + r) / (2 * t) as f64,
                    (Some(s), None) | (None, Some(s)) => alpha_one * s / t as f64,
                    (None, None) => unreachable!("window fits by construction"),
                };
                *hit = row[i] > threshold;
            }
        });
    Ok(CfarMap {
        azimuth_bins: frame.azimuth_bins(),
        range_bins,
        mask,
    })
}

/// Blocks with at least `min_hits` detections, with their hit counts.
pub fn flagged_blocks(map: &CfarMap, grid: &BlockGrid, min_hits: usize) -> Result<BTreeMap<BlockRef, usize>> {
    let counts = map.block_hits(grid)?;
    Ok(grid
        .blocks()
        .zip(counts)
        .filter(|(_, c)| *c >= min_hits.max(1))
        .collect())
}
