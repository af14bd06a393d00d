//! Polar radar frames and their partition into equal rectangular blocks.
//!
//! A frame is stored azimuth-major: element `(a, r)` lives at
//! `a * range_bins + r`. Blocks are vectorised in the same order, so the
//! sensing matrices and the 2D DCT all agree on a single layout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bin counts of the full-resolution frame (360 / 0.9 and 37 blocks of 100 bins).
pub const DEFAULT_AZIMUTH_BINS: usize = 400;
pub const DEFAULT_RANGE_BINS: usize = 3700;
pub const DEFAULT_RANGE_RESOLUTION_M: f64 = 0.0438;
pub const DEFAULT_AZIMUTH_RESOLUTION_DEG: f64 = 0.9;
pub const DEFAULT_BLOCK_AZ: usize = 50;
pub const DEFAULT_BLOCK_RNG: usize = 100;

/// Physical description of a frame, without the samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameMeta {
    pub azimuth_bins: usize,
    pub range_bins: usize,
    pub range_resolution_m: f64,
    pub azimuth_resolution_deg: f64,
    pub timestamp_us: i64,
}

impl FrameMeta {
    /// Metadata with the azimuth resolution implied by a full 360° sweep.
    pub fn full_sweep(azimuth_bins: usize, range_bins: usize, range_resolution_m: f64) -> Self {
        FrameMeta {
            azimuth_bins,
            range_bins,
            range_resolution_m,
            azimuth_resolution_deg: 360.0 / azimuth_bins as f64,
            timestamp_us: 0,
        }
    }

    pub fn with_timestamp(mut self, timestamp_us: i64) -> Self {
        self.timestamp_us = timestamp_us;
        self
    }

    pub fn len(&self) -> usize {
        self.azimuth_bins * self.range_bins
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn max_range_m(&self) -> f64 {
        self.range_bins as f64 * self.range_resolution_m
    }

    pub fn validate(&self) -> Result<()> {
        if self.azimuth_bins == 0 {
            return Err(Error::Config {
                axis: "azimuth",
                detail: "azimuth_bins must be positive".into(),
            });
        }
        if self.range_bins == 0 {
            return Err(Error::Config {
                axis: "range",
                detail: "range_bins must be positive".into(),
            });
        }
        if !(self.range_resolution_m.is_finite() && self.range_resolution_m > 0.0) {
            return Err(Error::Config {
                axis: "range",
                detail: format!("range resolution {} m is not positive", self.range_resolution_m),
            });
        }
        let sweep = self.azimuth_bins as f64 * self.azimuth_resolution_deg;
        if (sweep - 360.0).abs() > 1e-6 {
            return Err(Error::Config {
                axis: "azimuth",
                detail: format!(
                    "{} bins x {}° covers {sweep}°, not 360°",
                    self.azimuth_bins, self.azimuth_resolution_deg
                ),
            });
        }
        Ok(())
    }
}

impl Default for FrameMeta {
    fn default() -> Self {
        FrameMeta {
            azimuth_bins: DEFAULT_AZIMUTH_BINS,
            range_bins: DEFAULT_RANGE_BINS,
            range_resolution_m: DEFAULT_RANGE_RESOLUTION_M,
            azimuth_resolution_deg: DEFAULT_AZIMUTH_RESOLUTION_DEG,
            timestamp_us: 0,
        }
    }
}

/// Dense grid of non-negative power returns, azimuth rows by range columns.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarFrame {
    meta: FrameMeta,
    data: Vec<f64>,
}

impl PolarFrame {
    pub fn new(meta: FrameMeta, data: Vec<f64>) -> Result<Self> {
        meta.validate()?;
        if data.len() != meta.len() {
            return Err(Error::Dimension {
                context: "frame data",
                expected: meta.len(),
                got: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Validation(format!(
                "frame value {} at flat index {pos} is not a finite non-negative number",
                data[pos]
            )));
        }
        Ok(PolarFrame { meta, data })
    }

    pub fn zeros(meta: FrameMeta) -> Result<Self> {
        meta.validate()?;
        Ok(PolarFrame {
            data: vec![0.0; meta.len()],
            meta,
        })
    }

    /// Builds a frame from arbitrary reals, clamping negatives (and NaN) to zero.
    pub fn from_clamped(meta: FrameMeta, mut data: Vec<f64>) -> Result<Self> {
        for v in data.iter_mut() {
            if !(*v > 0.0) {
                *v = 0.0;
            }
        }
        PolarFrame::new(meta, data)
    }

    pub fn meta(&self) -> &FrameMeta {
        &self.meta
    }

    pub fn azimuth_bins(&self) -> usize {
        self.meta.azimuth_bins
    }

    pub fn range_bins(&self) -> usize {
        self.meta.range_bins
    }

    pub fn timestamp_us(&self) -> i64 {
        self.meta.timestamp_us
    }

    pub fn set_timestamp_us(&mut self, timestamp_us: i64) {
        self.meta.timestamp_us = timestamp_us;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, azimuth_bin: usize, range_bin: usize) -> f64 {
        self.data[azimuth_bin * self.meta.range_bins + range_bin]
    }

    /// Sets one bin. Negative or non-finite values are rejected.
    pub fn set(&mut self, azimuth_bin: usize, range_bin: usize, value: f64) -> Result<()> {
        if azimuth_bin >= self.meta.azimuth_bins || range_bin >= self.meta.range_bins {
            return Err(Error::Index(format!(
                "bin ({azimuth_bin}, {range_bin}) outside {}x{} frame",
                self.meta.azimuth_bins, self.meta.range_bins
            )));
        }
        if !(value.is_finite() && value >= 0.0) {
            return Err(Error::Validation(format!("frame value {value} is negative or non-finite")));
        }
        self.data[azimuth_bin * self.meta.range_bins + range_bin] = value;
        Ok(())
    }

    pub fn row(&self, azimuth_bin: usize) -> &[f64] {
        let w = self.meta.range_bins;
        &self.data[azimuth_bin * w..(azimuth_bin + 1) * w]
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }
}

/// Address of one block inside a [`BlockGrid`]. Orders by azimuth, then range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BlockRef {
    pub az_idx: usize,
    pub rng_idx: usize,
}

impl BlockRef {
    pub fn new(az_idx: usize, rng_idx: usize) -> Self {
        BlockRef { az_idx, rng_idx }
    }
}

/// Priority region of a block in a sampling plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RegionLabel {
    R1,
    R2,
    R3,
}

impl RegionLabel {
    pub const ALL: [RegionLabel; 3] = [RegionLabel::R1, RegionLabel::R2, RegionLabel::R3];

    pub fn as_str(self) -> &'static str {
        match self {
            RegionLabel::R1 => "R1",
            RegionLabel::R2 => "R2",
            RegionLabel::R3 => "R3",
        }
    }
}

/// Exact partition of a frame into `az_blocks x rng_blocks` blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockGrid {
    pub az_blocks: usize,
    pub rng_blocks: usize,
    pub block_az: usize,
    pub block_rng: usize,
}

impl BlockGrid {
    /// Partitions `(azimuth_bins, range_bins)` into blocks of `(block_az, block_rng)` bins.
    pub fn partition(frame_dims: (usize, usize), block_dims: (usize, usize)) -> Result<Self> {
        let (azimuth_bins, range_bins) = frame_dims;
        let (block_az, block_rng) = block_dims;
        check_axis("azimuth", azimuth_bins, block_az)?;
        check_axis("range", range_bins, block_rng)?;
        Ok(BlockGrid {
            az_blocks: azimuth_bins / block_az,
            rng_blocks: range_bins / block_rng,
            block_az,
            block_rng,
        })
    }

    pub fn for_frame(meta: &FrameMeta, block_dims: (usize, usize)) -> Result<Self> {
        Self::partition((meta.azimuth_bins, meta.range_bins), block_dims)
    }

    pub fn azimuth_bins(&self) -> usize {
        self.az_blocks * self.block_az
    }

    pub fn range_bins(&self) -> usize {
        self.rng_blocks * self.block_rng
    }

    pub fn frame_len(&self) -> usize {
        self.azimuth_bins() * self.range_bins()
    }

    /// Number of samples in one block.
    pub fn block_len(&self) -> usize {
        self.block_az * self.block_rng
    }

    pub fn num_blocks(&self) -> usize {
        self.az_blocks * self.rng_blocks
    }

    pub fn contains(&self, block: BlockRef) -> bool {
        block.az_idx < self.az_blocks && block.rng_idx < self.rng_blocks
    }

    /// Azimuth-major linear index of a block.
    pub fn linear_index(&self, block: BlockRef) -> usize {
        block.az_idx * self.rng_blocks + block.rng_idx
    }

    pub fn blocks(&self) -> impl Iterator<Item = BlockRef> + '_ {
        (0..self.az_blocks)
            .flat_map(move |a| (0..self.rng_blocks).map(move |r| BlockRef::new(a, r)))
    }

    /// Angular width of one azimuth block, assuming the grid spans 360°.
    pub fn azimuth_block_deg(&self) -> f64 {
        360.0 / self.az_blocks as f64
    }

    pub fn block_of(&self, azimuth_bin: usize, range_bin: usize) -> Result<BlockRef> {
        if azimuth_bin >= self.azimuth_bins() || range_bin >= self.range_bins() {
            return Err(Error::Index(format!(
                "bin ({azimuth_bin}, {range_bin}) outside {}x{} frame",
                self.azimuth_bins(),
                self.range_bins()
            )));
        }
        Ok(BlockRef::new(azimuth_bin / self.block_az, range_bin / self.block_rng))
    }

    fn check_frame(&self, frame: &PolarFrame) -> Result<()> {
        if frame.azimuth_bins() != self.azimuth_bins() {
            return Err(Error::Dimension {
                context: "grid azimuth bins",
                expected: self.azimuth_bins(),
                got: frame.azimuth_bins(),
            });
        }
        if frame.range_bins() != self.range_bins() {
            return Err(Error::Dimension {
                context: "grid range bins",
                expected: self.range_bins(),
                got: frame.range_bins(),
            });
        }
        Ok(())
    }

    fn check_ref(&self, block: BlockRef) -> Result<()> {
        if self.contains(block) {
            Ok(())
        } else {
            Err(Error::Index(format!(
                "block ({}, {}) outside {}x{} grid",
                block.az_idx, block.rng_idx, self.az_blocks, self.rng_blocks
            )))
        }
    }

    /// Copies one block out of the frame, azimuth-major.
    pub fn extract_block(&self, frame: &PolarFrame, block: BlockRef) -> Result<Vec<f64>> {
        self.check_frame(frame)?;
        self.check_ref(block)?;
        let width = self.range_bins();
        let r0 = block.rng_idx * self.block_rng;
        let mut out = Vec::with_capacity(self.block_len());
        for a in 0..self.block_az {
            let row = block.az_idx * self.block_az + a;
            out.extend_from_slice(&frame.data[row * width + r0..row * width + r0 + self.block_rng]);
        }
        Ok(out)
    }

    /// Writes a block back into the frame; inverse of [`BlockGrid::extract_block`].
    pub fn insert_block(&self, frame: &mut PolarFrame, block: BlockRef, values: &[f64]) -> Result<()> {
        self.check_frame(frame)?;
        self.check_ref(block)?;
        if values.len() != self.block_len() {
            return Err(Error::Dimension {
                context: "block values",
                expected: self.block_len(),
                got: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Validation(format!("block value {v} is negative or non-finite")));
        }
        let width = self.range_bins();
        let r0 = block.rng_idx * self.block_rng;
        for (a, chunk) in values.chunks_exact(self.block_rng).enumerate() {
            let row = block.az_idx * self.block_az + a;
            frame.data[row * width + r0..row * width + r0 + self.block_rng].copy_from_slice(chunk);
        }
        Ok(())
    }

    /// Range covered by the first `n_blocks` range blocks.
    pub fn range_block_span_m(&self, resolution_m: f64, n_blocks: usize) -> f64 {
        n_blocks as f64 * self.block_rng as f64 * resolution_m
    }
}

impl Default for BlockGrid {
    fn default() -> Self {
        BlockGrid {
            az_blocks: DEFAULT_AZIMUTH_BINS / DEFAULT_BLOCK_AZ,
            rng_blocks: DEFAULT_RANGE_BINS / DEFAULT_BLOCK_RNG,
            block_az: DEFAULT_BLOCK_AZ,
            block_rng: DEFAULT_BLOCK_RNG,
        }
    }
}

fn check_axis(axis: &'static str, bins: usize, block: usize) -> Result<()> {
    if block == 0 || bins == 0 {
        return Err(Error::Config {
            axis,
            detail: format!("zero-sized dimension ({bins} bins, block of {block})"),
        });
    }
    if bins % block != 0 {
        return Err(Error::Config {
            axis,
            detail: format!("block size {block} does not divide {bins} bins"),
        });
    }
    Ok(())
}
