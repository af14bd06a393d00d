//! Per-block sampling plans.
//!
//! Three planners share one output type:
//! - [`uniform_plan`]: the same rate everywhere (the baseline).
//! - [`allocate_algo1`]: chosen azimuth sectors get the high rate out to a
//!   near-range depth, other sectors a low rate, far range a lower one.
//! - [`allocate_algo2`]: as above with a shallower high-rate depth; the
//!   measurements freed by the cut are handed to CFAR-flagged blocks.
//!
//! Measurement counts are integers; `rate` on a block is the planned rate and
//! `measurements` its rounded count.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{BlockGrid, BlockRef, RegionLabel};
use crate::seed::rng_from;

pub const DEFAULT_BUDGET_FRACTION: f64 = 0.10;
pub const DEFAULT_MIN_AZIMUTHS: usize = 4;
pub const DEFAULT_NEAR_RANGE_BLOCKS: usize = 18;
pub const DEFAULT_FOCUS_RANGE_BLOCKS: usize = 14;
/// Range-block count of the default grid; near-range depths are scaled from it.
const DEFAULT_RNG_BLOCKS: usize = 37;

/// Sampling rates of the three regions for one chosen-azimuth count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionRates {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
}

impl RegionRates {
    pub fn new(r1: f64, r2: f64, r3: f64) -> Self {
        RegionRates { r1, r2, r3 }
    }

    fn validate(&self, what: &str) -> Result<()> {
        let in_range = |r: f64| r > 0.0 && r <= 1.0;
        if !(in_range(self.r1) && in_range(self.r2) && in_range(self.r3)) {
            return Err(Error::Parameter(format!("{what}: rates must lie in (0, 1], got {self:?}")));
        }
        if !(self.r1 > self.r2 && self.r2 > self.r3) {
            return Err(Error::Parameter(format!("{what}: need r1 > r2 > r3, got {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    /// Chosen-azimuth count to region rates.
    pub entries: BTreeMap<usize, RegionRates>,
    /// R2 and R3 rates used when R1 is solved from the budget.
    pub background: (f64, f64),
    /// High-rate depth (in range blocks) for the camera-only planner.
    pub near_range_blocks: usize,
    /// High-rate depth for the CFAR-assisted planner.
    pub focus_range_blocks: usize,
}

impl Default for RateTable {
    fn default() -> Self {
        let entries = BTreeMap::from([
            (4, RegionRates::new(0.308, 0.05, 0.025)),
            (5, RegionRates::new(0.255, 0.05, 0.025)),
            (6, RegionRates::new(0.202, 0.05, 0.025)),
        ]);
        RateTable {
            entries,
            background: (0.05, 0.025),
            near_range_blocks: DEFAULT_NEAR_RANGE_BLOCKS,
            focus_range_blocks: DEFAULT_FOCUS_RANGE_BLOCKS,
        }
    }
}

impl RateTable {
    /// Default rates with the near-range depths scaled to a grid with a
    /// different number of range blocks. Keeps `1 <= focus < near <= rng_blocks`
    /// where the grid allows it.
    pub fn scaled_for(grid: &BlockGrid) -> Self {
        let mut table = RateTable::default();
        if grid.rng_blocks == DEFAULT_RNG_BLOCKS {
            return table;
        }
        let scale = |blocks: usize| {
            ((blocks * grid.rng_blocks) as f64 / DEFAULT_RNG_BLOCKS as f64).round() as usize
        };
        let near = scale(DEFAULT_NEAR_RANGE_BLOCKS).clamp(1, grid.rng_blocks);
        let focus = scale(DEFAULT_FOCUS_RANGE_BLOCKS).clamp(1, near);
        table.near_range_blocks = near;
        table.focus_range_blocks = if focus == near && near > 1 { near - 1 } else { focus };
        table
    }

    pub fn validate(&self, grid: &BlockGrid) -> Result<()> {
        for (a, rates) in &self.entries {
            rates.validate(&format!("rate table row a={a}"))?;
        }
        let (r2, r3) = self.background;
        RegionRates::new(1.0, r2, r3).validate("background rates")?;
        if self.near_range_blocks == 0 || self.near_range_blocks > grid.rng_blocks {
            return Err(Error::Parameter(format!(
                "near-range depth {} must be in 1..={}",
                self.near_range_blocks, grid.rng_blocks
            )));
        }
        if self.focus_range_blocks == 0 || self.focus_range_blocks > self.near_range_blocks {
            return Err(Error::Parameter(format!(
                "focus depth {} must be in 1..={}",
                self.focus_range_blocks, self.near_range_blocks
            )));
        }
        Ok(())
    }
}

/// How the R1 rate is found.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AllocationMode {
    /// Look the rates up in the table; other azimuth counts are an error.
    #[default]
    Table,
    /// Background rates from the table, R1 gets whatever the budget leaves.
    ExactBudget,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub fraction: f64,
    pub mode: AllocationMode,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            fraction: DEFAULT_BUDGET_FRACTION,
            mode: AllocationMode::Table,
        }
    }
}

impl Budget {
    pub fn validate(&self) -> Result<()> {
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return Err(Error::Parameter(format!(
                "budget fraction {} must lie in (0, 1]",
                self.fraction
            )));
        }
        Ok(())
    }

    /// Measurement budget for a whole frame.
    pub fn total(&self, grid: &BlockGrid) -> usize {
        (self.fraction * grid.frame_len() as f64 + 1e-9).floor() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockPlan {
    pub block: BlockRef,
    pub region: RegionLabel,
    pub rate: f64,
    pub measurements: usize,
    pub boosted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPlan {
    grid: BlockGrid,
    /// Indexed by [`BlockGrid::linear_index`].
    blocks: Vec<BlockPlan>,
    chosen_azimuths: BTreeSet<usize>,
    budget_fraction: f64,
}

impl SamplingPlan {
    pub fn grid(&self) -> &BlockGrid {
        &self.grid
    }

    pub fn blocks(&self) -> &[BlockPlan] {
        &self.blocks
    }

    pub fn block(&self, block: BlockRef) -> Option<&BlockPlan> {
        self.grid
            .contains(block)
            .then(|| &self.blocks[self.grid.linear_index(block)])
    }

    pub fn chosen_azimuths(&self) -> &BTreeSet<usize> {
        &self.chosen_azimuths
    }

    pub fn boosted(&self) -> BTreeSet<BlockRef> {
        self.blocks.iter().filter(|b| b.boosted).map(|b| b.block).collect()
    }

    pub fn budget_fraction(&self) -> f64 {
        self.budget_fraction
    }

    pub fn total(&self) -> usize {
        plan_total(self)
    }

    pub fn region_blocks(&self, region: RegionLabel) -> impl Iterator<Item = &BlockPlan> + '_ {
        self.blocks.iter().filter(move |b| b.region == region)
    }

    pub fn to_export(&self) -> PlanExport {
        PlanExport {
            budget_fraction: self.budget_fraction,
            chosen_azimuths: self.chosen_azimuths.iter().copied().collect(),
            blocks: self
                .blocks
                .iter()
                .map(|b| BlockExport {
                    az: b.block.az_idx,
                    rng: b.block.rng_idx,
                    region: b.region,
                    rate: b.rate,
                    m: b.measurements,
                    boosted: b.boosted,
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_export()).expect("plan export is always serialisable")
    }

    /// Rebuilds a plan from its export; every grid block must appear once.
    pub fn from_export(grid: BlockGrid, export: &PlanExport) -> Result<Self> {
        if export.blocks.len() != grid.num_blocks() {
            return Err(Error::Dimension {
                context: "plan blocks",
                expected: grid.num_blocks(),
                got: export.blocks.len(),
            });
        }
        let mut slots: Vec<Option<BlockPlan>> = vec![None; grid.num_blocks()];
        for b in &export.blocks {
            let block = BlockRef::new(b.az, b.rng);
            if !grid.contains(block) {
                return Err(Error::Index(format!("plan block ({}, {}) outside grid", b.az, b.rng)));
            }
            if !(0.0..=1.0).contains(&b.rate) || b.m > grid.block_len() {
                return Err(Error::Validation(format!(
                    "plan block ({}, {}) has rate {} and {} measurements",
                    b.az, b.rng, b.rate, b.m
                )));
            }
            let slot = &mut slots[grid.linear_index(block)];
            if slot.is_some() {
                return Err(Error::Validation(format!("plan block ({}, {}) listed twice", b.az, b.rng)));
            }
            *slot = Some(BlockPlan {
                block,
                region: b.region,
                rate: b.rate,
                measurements: b.m,
                boosted: b.boosted,
            });
        }
        Ok(SamplingPlan {
            grid,
            blocks: slots.into_iter().map(|s| s.expect("all slots filled")).collect(),
            chosen_azimuths: export.chosen_azimuths.iter().copied().collect(),
            budget_fraction: export.budget_fraction,
        })
    }
}

/// JSON form of a plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanExport {
    pub budget_fraction: f64,
    pub chosen_azimuths: Vec<usize>,
    pub blocks: Vec<BlockExport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockExport {
    pub az: usize,
    pub rng: usize,
    pub region: RegionLabel,
    pub rate: f64,
    pub m: usize,
    pub boosted: bool,
}

/// Round-half-up count for `rate` of `block_len` samples; at least 1 when `rate > 0`.
pub fn measurement_count(rate: f64, block_len: usize) -> usize {
    if rate <= 0.0 {
        return 0;
    }
    let exact = rate * block_len as f64;
    // Absorb representation error so that e.g. 0.025 * 500 rounds as 12.5.
    let m = (exact + 0.5 + 1e-9 * exact.max(1.0)).floor() as usize;
    m.clamp(1, block_len)
}

pub fn plan_total(plan: &SamplingPlan) -> usize {
    plan.blocks.iter().map(|b| b.measurements).sum()
}

pub fn uniform_plan(grid: &BlockGrid, rate: f64) -> Result<SamplingPlan> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::Parameter(format!("uniform rate {rate} must lie in (0, 1]")));
    }
    let m = measurement_count(rate, grid.block_len());
    let blocks = grid
        .blocks()
        .map(|block| BlockPlan {
            block,
            region: RegionLabel::R2,
            rate,
            measurements: m,
            boosted: false,
        })
        .collect();
    Ok(SamplingPlan {
        grid: *grid,
        blocks,
        chosen_azimuths: BTreeSet::new(),
        budget_fraction: rate,
    })
}

/// Adds seeded random azimuth blocks until at least `minimum` are chosen.
pub fn top_up_azimuths(
    chosen: &BTreeSet<usize>,
    minimum: usize,
    az_blocks: usize,
    seed: u64,
) -> Result<BTreeSet<usize>> {
    if minimum > az_blocks {
        return Err(Error::Parameter(format!(
            "cannot choose {minimum} azimuth blocks out of {az_blocks}"
        )));
    }
    if let Some(&bad) = chosen.iter().find(|&&a| a >= az_blocks) {
        return Err(Error::Index(format!("azimuth block {bad} outside 0..{az_blocks}")));
    }
    let mut out = chosen.clone();
    if out.len() >= minimum {
        return Ok(out);
    }
    let mut pool: Vec<usize> = (0..az_blocks).filter(|a| !chosen.contains(a)).collect();
    pool.shuffle(&mut rng_from(seed));
    out.extend(pool.into_iter().take(minimum - chosen.len()));
    Ok(out)
}

/// Per-region counts before any boosting.
struct BaseCounts {
    r1: usize,
    r2: usize,
    r3: usize,
    rates: RegionRates,
}

fn base_counts(
    chosen: &BTreeSet<usize>,
    grid: &BlockGrid,
    table: &RateTable,
    budget: &Budget,
) -> Result<BaseCounts> {
    budget.validate()?;
    table.validate(grid)?;
    if let Some(&bad) = chosen.iter().find(|&&a| a >= grid.az_blocks) {
        return Err(Error::Index(format!("azimuth block {bad} outside 0..{}", grid.az_blocks)));
    }
    if chosen.is_empty() {
        return Err(Error::Parameter("no chosen azimuth blocks; top up first".into()));
    }
    let len = grid.block_len();
    let a = chosen.len();
    let near = table.near_range_blocks;
    let n_r1 = a * near;
    let n_r2 = (grid.az_blocks - a) * near;
    let n_r3 = grid.az_blocks * (grid.rng_blocks - near);
    match budget.mode {
        AllocationMode::Table => {
            let rates = *table.entries.get(&a).ok_or_else(|| {
                Error::Parameter(format!(
                    "no rate table row for {a} chosen azimuths (rows: {:?}); use exact-budget mode",
                    table.entries.keys().collect::<Vec<_>>()
                ))
            })?;
            let planned = len as f64
                * (rates.r1 * n_r1 as f64 + rates.r2 * n_r2 as f64 + rates.r3 * n_r3 as f64);
            let allowed = budget.fraction * grid.frame_len() as f64;
            if planned > allowed * (1.0 + 1e-9) {
                return Err(Error::Parameter(format!(
                    "rate table row a={a} needs {planned:.0} measurements, budget is {allowed:.0}; \
                     use exact-budget mode"
                )));
            }
            Ok(BaseCounts {
                r1: measurement_count(rates.r1, len),
                r2: measurement_count(rates.r2, len),
                r3: measurement_count(rates.r3, len),
                rates,
            })
        }
        AllocationMode::ExactBudget => {
            let (r2, r3) = table.background;
            let c2 = measurement_count(r2, len);
            let c3 = measurement_count(r3, len);
            let spent = c2 * n_r2 + c3 * n_r3;
            let total = budget.total(grid);
            let c1 = (total.saturating_sub(spent) / n_r1).min(len);
            if c1 <= c2 {
                return Err(Error::Parameter(format!(
                    "budget of {total} measurements leaves R1 no more than R2 ({c1} <= {c2} per block)"
                )));
            }
            Ok(BaseCounts {
                r1: c1,
                r2: c2,
                r3: c3,
                rates: RegionRates::new(c1 as f64 / len as f64, r2, r3),
            })
        }
    }
}

fn layout(
    chosen: &BTreeSet<usize>,
    grid: &BlockGrid,
    base: &BaseCounts,
    r1_depth: usize,
    near: usize,
) -> Vec<BlockPlan> {
    grid.blocks()
        .map(|block| {
            let in_chosen = chosen.contains(&block.az_idx);
            let (region, rate, m) = if block.rng_idx >= near {
                (RegionLabel::R3, base.rates.r3, base.r3)
            } else if !in_chosen {
                (RegionLabel::R2, base.rates.r2, base.r2)
            } else if block.rng_idx < r1_depth {
                (RegionLabel::R1, base.rates.r1, base.r1)
            } else {
                // Cut from R1 by the shallower depth; its budget is reallocated.
                (RegionLabel::R3, 0.0, 0)
            };
            BlockPlan {
                block,
                region,
                rate,
                measurements: m,
                boosted: false,
            }
        })
        .collect()
}

/// Camera-only plan.
pub fn allocate_algo1(
    chosen: &BTreeSet<usize>,
    grid: &BlockGrid,
    table: &RateTable,
    budget: &Budget,
) -> Result<SamplingPlan> {
    let base = base_counts(chosen, grid, table, budget)?;
    let near = table.near_range_blocks;
    Ok(SamplingPlan {
        grid: *grid,
        blocks: layout(chosen, grid, &base, near, near),
        chosen_azimuths: chosen.clone(),
        budget_fraction: budget.fraction,
    })
}

/// Camera plus CFAR plan. `flagged` maps blocks to their CFAR hit counts.
///
/// Flagged blocks outside R1 are raised to the R1 count in order of
/// decreasing hit count (ties by block address) while the freed budget
/// lasts. The last block may receive a partial raise; it is skipped if that
/// would leave it below the R2 rate.
pub fn allocate_algo2(
    chosen: &BTreeSet<usize>,
    flagged: &BTreeMap<BlockRef, usize>,
    grid: &BlockGrid,
    table: &RateTable,
    budget: &Budget,
) -> Result<SamplingPlan> {
    let base = base_counts(chosen, grid, table, budget)?;
    if let Some(bad) = flagged.keys().find(|b| !grid.contains(**b)) {
        return Err(Error::Index(format!("flagged block {bad:?} outside grid")));
    }
    let near = table.near_range_blocks;
    let focus = table.focus_range_blocks;
    let mut blocks = layout(chosen, grid, &base, focus, near);
    let mut saved = base.r1 * chosen.len() * (near - focus);

    let mut order: Vec<(BlockRef, usize)> = flagged
        .iter()
        .map(|(b, h)| (*b, *h))
        .filter(|(b, _)| blocks[grid.linear_index(*b)].region != RegionLabel::R1)
        .collect();
    order.sort_by(|x, y| y.1.cmp(&x.1).then(x.0.cmp(&y.0)));

    let len = grid.block_len();
    for (block, _) in order {
        if saved == 0 {
            break;
        }
        let slot = &mut blocks[grid.linear_index(block)];
        let Some(need) = base.r1.checked_sub(slot.measurements).filter(|&n| n > 0) else {
            continue;
        };
        let grant = need.min(saved);
        let m = slot.measurements + grant;
        if grant < need && m < base.r2 {
            break;
        }
        saved -= grant;
        slot.measurements = m;
        slot.rate = if grant == need { base.rates.r1 } else { m as f64 / len as f64 };
        slot.boosted = true;
    }

    Ok(SamplingPlan {
        grid: *grid,
        blocks,
        chosen_azimuths: chosen.clone(),
        budget_fraction: budget.fraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full_grid() -> BlockGrid {
        BlockGrid::default()
    }

    fn set(v: &[usize]) -> BTreeSet<usize> {
        v.iter().copied().collect()
    }

    #[test]
    fn uniform_counts() {
        let plan = uniform_plan(&full_grid(), 0.10).unwrap();
        assert!(plan.blocks().iter().all(|b| b.measurements == 500));
        assert_eq!(plan.total(), 148_000);
        let full = uniform_plan(&full_grid(), 1.0).unwrap();
        assert!(full.blocks().iter().all(|b| b.measurements == 5000));
        let tiny = BlockGrid::partition((20, 20), (10, 10)).unwrap();
        let p = uniform_plan(&tiny, 0.10).unwrap();
        assert!(p.blocks().iter().all(|b| b.measurements == 10 && b.region == RegionLabel::R2));
        assert!(uniform_plan(&tiny, 0.0).is_err());
    }

    #[test]
    fn rounding() {
        assert_eq!(measurement_count(0.025, 500), 13);
        assert_eq!(measurement_count(0.308, 5000), 1540);
        assert_eq!(measurement_count(1e-9, 5000), 1);
        assert_eq!(measurement_count(0.0, 5000), 0);
        assert_eq!(measurement_count(0.076, 5000), 380);
    }

    #[test]
    fn algo1_rows() {
        let grid = full_grid();
        let t = RateTable::default();
        let b = Budget::default();
        let p4 = allocate_algo1(&set(&[0, 1, 4, 7]), &grid, &t, &b).unwrap();
        assert_eq!(p4.total(), 147_880);
        let p5 = allocate_algo1(&set(&[0, 1, 2, 4, 7]), &grid, &t, &b).unwrap();
        assert_eq!(p5.region_blocks(RegionLabel::R1).next().unwrap().rate, 0.255);
        let p6 = allocate_algo1(&set(&[0, 1, 2, 3, 4, 7]), &grid, &t, &b).unwrap();
        assert_eq!(p6.region_blocks(RegionLabel::R1).next().unwrap().rate, 0.202);
        assert!(allocate_algo1(&set(&[0, 1, 2]), &grid, &t, &b).is_err());
    }

    #[test]
    fn exact_budget_fills_r1() {
        let grid = full_grid();
        let b = Budget {
            fraction: 0.10,
            mode: AllocationMode::ExactBudget,
        };
        let p = allocate_algo1(&set(&[0, 1, 2, 3, 4, 7]), &grid, &RateTable::default(), &b).unwrap();
        let r1 = p.region_blocks(RegionLabel::R1).next().unwrap();
        assert_eq!(r1.measurements, 1111);
        assert!(p.total() <= 148_000);
        let p3 = allocate_algo1(&set(&[0, 1, 2]), &grid, &RateTable::default(), &b).unwrap();
        assert!(p3.total() <= 148_000);
    }

    #[test]
    fn algo2_partial_boost() {
        let grid = full_grid();
        let chosen = set(&[0, 2, 4, 6]);
        // 25 R2 blocks in azimuth sectors 1 and 3, all with the same hit count.
        let flagged: BTreeMap<BlockRef, usize> = (0..25)
            .map(|i| (BlockRef::new(1 + 2 * (i / 13), i % 13), 5))
            .collect();
        let p = allocate_algo2(&chosen, &flagged, &grid, &RateTable::default(), &Budget::default()).unwrap();
        let rates: Vec<f64> = flagged.keys().map(|b| p.block(*b).unwrap().rate).collect();
        assert!(rates[..19].iter().all(|&r| r == 0.308));
        assert!((rates[19] - 0.076).abs() < 1e-12);
        assert!(rates[20..].iter().all(|&r| r == 0.05));
        assert_eq!(p.boosted().len(), 20);
    }

    #[test]
    fn top_up() {
        let got = top_up_azimuths(&set(&[1, 2, 3]), 4, 8, 9).unwrap();
        assert_eq!(got.len(), 4);
        assert!(got.is_superset(&set(&[1, 2, 3])));
        assert_eq!(top_up_azimuths(&set(&[0, 1, 2, 3, 4]), 4, 8, 9).unwrap().len(), 5);
        let a = top_up_azimuths(&BTreeSet::new(), 4, 8, 11).unwrap();
        assert_eq!(a, top_up_azimuths(&BTreeSet::new(), 4, 8, 11).unwrap());
        assert_eq!(a.len(), 4);
        assert!(top_up_azimuths(&BTreeSet::new(), 9, 8, 0).is_err());
    }

    #[test]
    fn export_round_trip() {
        let grid = BlockGrid::partition((80, 200), (10, 20)).unwrap();
        let p = uniform_plan(&grid, 0.2).unwrap();
        let json = p.to_json();
        let back: PlanExport = serde_json::from_str(&json).unwrap();
        assert_eq!(SamplingPlan::from_export(grid, &back).unwrap(), p);
        assert!(json.contains("\"region\": \"R2\""));
    }

    #[test]
    fn scaled_depths() {
        let grid = BlockGrid::partition((160, 200), (20, 25)).unwrap();
        let t = RateTable::scaled_for(&grid);
        assert_eq!((t.near_range_blocks, t.focus_range_blocks), (4, 3));
        assert_eq!(RateTable::scaled_for(&full_grid()), RateTable::default());
    }
}
