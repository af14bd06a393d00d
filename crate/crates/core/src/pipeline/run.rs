//! Sequence driver: associate, plan, sample, reconstruct, score.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::io::{quantized, read_frame, read_json, write_frame, write_json};
use super::metrics::{self, block_sse, blocks_psnr, db, Detectability};
use super::scene::{FrameTruth, SceneManifest};
use super::timing::{associate, TimingConfig};
use crate::allocator::{
    allocate_algo1, allocate_algo2, top_up_azimuths, uniform_plan, AllocationMode, Budget,
    PlanExport, RateTable, SamplingPlan, DEFAULT_MIN_AZIMUTHS,
};
use crate::error::{Error, Result};
use crate::frame::{BlockGrid, BlockRef, PolarFrame, RegionLabel, DEFAULT_BLOCK_AZ, DEFAULT_BLOCK_RNG};
use crate::guidance::{
    cfar_detect, flagged_blocks, important_azimuth_blocks, AzimuthSelection, CameraId,
    CfarParams, DetectionSet,
};
use crate::seed::derive_seed;
use crate::sensing::{sample_block, DctOperator, MeasurementMatrix, DEFAULT_COLUMN_WEIGHT};
use crate::solver::{recover_block, FeasibilityTol, SolverConfig};

const SEED_TOP_UP: u64 = 1;
const SEED_MATRIX: u64 = 2;
const SEED_NOISE: u64 = 3;
/// Bin radius within which CFAR hits on the reconstruction and reference match.
pub const MATCH_RADIUS_BINS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Baseline,
    Algo1,
    Algo2,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Baseline, Mode::Algo1, Mode::Algo2];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::Algo1 => "algo1",
            Mode::Algo2 => "algo2",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown mode {s:?} (baseline, algo1, algo2)")))
    }
}

/// Block partition, given either as block size or as block counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GridSpec {
    /// `(block_az, block_rng)` bins per block.
    BlockSize(usize, usize),
    /// `(az_blocks, rng_blocks)` blocks per frame.
    Counts(usize, usize),
}

impl GridSpec {
    pub fn resolve(&self, azimuth_bins: usize, range_bins: usize) -> Result<BlockGrid> {
        match *self {
            GridSpec::BlockSize(a, r) => BlockGrid::partition((azimuth_bins, range_bins), (a, r)),
            GridSpec::Counts(a, r) => {
                for (axis, bins, n) in [("azimuth", azimuth_bins, a), ("range", range_bins, r)] {
                    if n == 0 || bins % n != 0 {
                        return Err(Error::Config {
                            axis,
                            detail: format!("{bins} bins cannot be split into {n} blocks"),
                        });
                    }
                }
                BlockGrid::partition((azimuth_bins, range_bins), (azimuth_bins / a, range_bins / r))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub grid: GridSpec,
    pub budget: Budget,
    /// Override the near-range depths of the default table, which are
    /// otherwise scaled to the grid's range-block count.
    pub near_range_blocks: Option<usize>,
    pub focus_range_blocks: Option<usize>,
    pub min_azimuths: usize,
    pub column_weight: usize,
    pub noise_sigma: f64,
    pub solver: SolverConfig,
    pub cfar: CfarParams,
    pub selection: AzimuthSelection,
    pub timing: TimingConfig,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            grid: GridSpec::BlockSize(DEFAULT_BLOCK_AZ, DEFAULT_BLOCK_RNG),
            budget: Budget::default(),
            near_range_blocks: None,
            focus_range_blocks: None,
            min_azimuths: DEFAULT_MIN_AZIMUTHS,
            column_weight: DEFAULT_COLUMN_WEIGHT,
            noise_sigma: 0.0,
            solver: SolverConfig::default(),
            cfar: CfarParams::default(),
            selection: AzimuthSelection::default(),
            timing: TimingConfig::default(),
            seed: 0,
        }
    }
}

/// Keys accepted by [`PipelineConfig::apply_setting`].
pub const SETTING_KEYS: &[&str] = &[
    "budget",
    "seed",
    "grid",
    "block",
    "exact_budget",
    "min_azimuths",
    "near_range_blocks",
    "focus_range_blocks",
    "column_weight",
    "noise_sigma",
    "max_iterations",
    "convergence_tol",
    "feasibility_tol",
    "cfar_train",
    "cfar_guard",
    "cfar_pfa",
    "cfar_min_hits",
    "score_min",
    "classes",
    "spread_boxes",
    "radar_period_s",
    "detection_latency_s",
    "lead_s",
    "front_rate_hz",
    "rear_rate_hz",
];

impl PipelineConfig {
    /// Applies one `key = value` setting.
    pub fn apply_setting(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "budget" => self.budget.fraction = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "grid" => {
                let (a, r) = parse_pair(key, v)?;
                self.grid = GridSpec::Counts(a, r);
            }
            "block" => {
                let (a, r) = parse_pair(key, v)?;
                self.grid = GridSpec::BlockSize(a, r);
            }
            "exact_budget" => {
                self.budget.mode = if parse_bool(key, v)? {
                    AllocationMode::ExactBudget
                } else {
                    AllocationMode::Table
                }
            }
            "min_azimuths" => self.min_azimuths = parse(key, v)?,
            "near_range_blocks" => self.near_range_blocks = Some(parse(key, v)?),
            "focus_range_blocks" => self.focus_range_blocks = Some(parse(key, v)?),
            "column_weight" => self.column_weight = parse(key, v)?,
            "noise_sigma" => self.noise_sigma = parse(key, v)?,
            "max_iterations" => self.solver.max_iterations = parse(key, v)?,
            "convergence_tol" => self.solver.convergence_tol = parse(key, v)?,
            "feasibility_tol" => {
                self.solver.feasibility_tol = match v.strip_suffix("abs") {
                    Some(num) => FeasibilityTol::Absolute(parse(key, num.trim())?),
                    None => FeasibilityTol::Relative(parse(key, v)?),
                }
            }
            "cfar_train" => self.cfar.train_cells = parse(key, v)?,
            "cfar_guard" => self.cfar.guard_cells = parse(key, v)?,
            "cfar_pfa" => self.cfar.pfa = parse(key, v)?,
            "cfar_min_hits" => self.cfar.min_hits_per_block = parse(key, v)?,
            "score_min" => self.selection.score_min = parse(key, v)?,
            "classes" => {
                self.selection.classes = v
                    .split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect()
            }
            "spread_boxes" => self.selection.spread_boxes = parse_bool(key, v)?,
            "radar_period_s" => self.timing.radar_period_s = parse(key, v)?,
            "detection_latency_s" => self.timing.detection_latency_s = parse(key, v)?,
            "lead_s" => self.timing.lead_s = parse(key, v)?,
            "front_rate_hz" => self.timing.front_rate_hz = parse(key, v)?,
            "rear_rate_hz" => self.timing.rear_rate_hz = parse(key, v)?,
            _ => return Err(Error::Parameter(format!("unknown setting {key:?}"))),
        }
        Ok(())
    }

    /// Applies a manifest's `config` object.
    pub fn apply_manifest(&mut self, manifest: &SceneManifest) -> Result<()> {
        for (k, v) in &manifest.config {
            let text = match v {
                serde_json::Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            self.apply_setting(k, &text)?;
        }
        Ok(())
    }

    pub fn grid_for(&self, frame: &PolarFrame) -> Result<BlockGrid> {
        self.grid.resolve(frame.azimuth_bins(), frame.range_bins())
    }

    pub fn table_for(&self, grid: &BlockGrid) -> RateTable {
        let mut table = RateTable::scaled_for(grid);
        if let Some(near) = self.near_range_blocks {
            table.near_range_blocks = near;
            if self.focus_range_blocks.is_none() {
                table.focus_range_blocks = table.focus_range_blocks.min(near);
            }
        }
        if let Some(focus) = self.focus_range_blocks {
            table.focus_range_blocks = focus;
        }
        table
    }

    pub fn validate(&self) -> Result<()> {
        self.budget.validate()?;
        self.solver.validate()?;
        self.cfar.validate()?;
        self.timing.validate()?;
        if self.column_weight == 0 {
            return Err(Error::Parameter("column weight must be positive".into()));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::Parameter(format!("noise sigma {} must be >= 0", self.noise_sigma)));
        }
        Ok(())
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    v.parse()
        .map_err(|e| Error::Parameter(format!("setting {key}: cannot parse {v:?}: {e}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Parameter(format!("setting {key}: expected a boolean, got {v:?}"))),
    }
}

/// Parses `AxR` (also accepts `A,R`).
pub fn parse_pair(key: &str, v: &str) -> Result<(usize, usize)> {
    let mut parts = v.split(['x', 'X', ',']);
    match (parts.next(), parts.next(), parts.next()) {
        (Some(a), Some(r), None) => Ok((parse(key, a.trim())?, parse(key, r.trim())?)),
        _ => Err(Error::Parameter(format!("setting {key}: expected AxR, got {v:?}"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSummary {
    pub total_measurements: usize,
    pub budget_measurements: usize,
    pub chosen_azimuths: Vec<usize>,
    pub boosted: Vec<BlockRef>,
    pub region_blocks: BTreeMap<RegionLabel, usize>,
}

impl PlanSummary {
    pub fn of(plan: &SamplingPlan, budget: &Budget) -> Self {
        let mut region_blocks = BTreeMap::new();
        for b in plan.blocks() {
            *region_blocks.entry(b.region).or_insert(0) += 1;
        }
        PlanSummary {
            total_measurements: plan.total(),
            budget_measurements: budget.total(plan.grid()),
            chosen_azimuths: plan.chosen_azimuths().iter().copied().collect(),
            boosted: plan.boosted().into_iter().collect(),
            region_blocks,
        }
    }
}

/// Quality of one block containing a ground-truth target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetBlock {
    pub label: String,
    pub block: BlockRef,
    pub region: RegionLabel,
    pub measurements: usize,
    pub boosted: bool,
    #[serde(with = "db")]
    pub psnr_db: f64,
}

/// Everything computed by comparing a reconstruction to its reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMetrics {
    #[serde(with = "db")]
    pub psnr_db: f64,
    /// Missing regions (no blocks) are left out.
    pub region_psnr_db: BTreeMap<RegionLabel, RegionPsnr>,
    /// In grid linear order (azimuth-major).
    pub block_mse: Vec<f64>,
    pub target_blocks: Vec<TargetBlock>,
    pub detectability: Detectability,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RegionPsnr(#[serde(with = "db")] pub f64);

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub blocks_solved: usize,
    /// Blocks with no measurements, reconstructed as zero.
    pub blocks_skipped: usize,
    pub not_converged: usize,
    pub total_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameReport {
    pub frame_index: usize,
    pub timestamp_us: i64,
    pub mode: Mode,
    /// Image timestamps used per camera.
    pub associated_images: BTreeMap<CameraId, i64>,
    pub plan: PlanSummary,
    pub metrics: FrameMetrics,
    pub solver: SolverSummary,
}

/// Wall-clock seconds per stage; kept apart from reports, which are deterministic.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub load_s: f64,
    pub plan_s: f64,
    pub reconstruct_s: f64,
    pub evaluate_s: f64,
}

#[derive(Debug, Clone)]
pub struct SequenceOutput {
    pub mode: Mode,
    pub reports: Vec<FrameReport>,
    pub plans: Vec<SamplingPlan>,
    /// Quantised exactly as written to disk.
    pub reconstructions: Vec<PolarFrame>,
    pub timings: Vec<StageTimings>,
}

/// A block solve that produced no usable result.
#[derive(Debug)]
pub struct HardFailure {
    pub frame_index: usize,
    pub block: BlockRef,
    pub error: Error,
}

/// Camera detections grouped by camera, for association.
struct DetectionIndex {
    by_camera: BTreeMap<CameraId, BTreeMap<i64, Vec<DetectionSet>>>,
}

impl DetectionIndex {
    fn new(sets: Vec<DetectionSet>) -> Self {
        let mut by_camera: BTreeMap<CameraId, BTreeMap<i64, Vec<DetectionSet>>> = BTreeMap::new();
        for s in sets {
            by_camera.entry(s.camera).or_default().entry(s.timestamp_us).or_default().push(s);
        }
        DetectionIndex { by_camera }
    }

    fn timestamps(&self) -> BTreeMap<CameraId, Vec<i64>> {
        self.by_camera
            .iter()
            .map(|(c, m)| (*c, m.keys().copied().collect()))
            .collect()
    }

    fn select(&self, chosen: &BTreeMap<CameraId, i64>) -> Vec<DetectionSet> {
        chosen
            .iter()
            .flat_map(|(c, t)| self.by_camera[c][t].iter().cloned())
            .collect()
    }
}

/// Camera-chosen azimuth blocks for one radar frame, topped up to the minimum.
fn chosen_azimuths(
    index: &DetectionIndex,
    manifest: &SceneManifest,
    cfg: &PipelineConfig,
    grid: &BlockGrid,
    frame_index: usize,
    radar_ts: i64,
) -> Result<(BTreeSet<usize>, BTreeMap<CameraId, i64>)> {
    let assoc = associate(&index.timestamps(), radar_ts, &cfg.timing);
    let sets = index.select(&assoc);
    let seen = important_azimuth_blocks(&sets, &manifest.cameras, grid, &cfg.selection)?;
    let seed = derive_seed(cfg.seed, &[SEED_TOP_UP, frame_index as u64]);
    let chosen = top_up_azimuths(&seen, cfg.min_azimuths, grid.az_blocks, seed)?;
    Ok((chosen, assoc))
}

fn plan_with_index(
    index: &DetectionIndex,
    manifest: &SceneManifest,
    mode: Mode,
    cfg: &PipelineConfig,
    grid: &BlockGrid,
    frame_index: usize,
    previous: Option<&PolarFrame>,
) -> Result<(SamplingPlan, BTreeMap<CameraId, i64>)> {
    let table = cfg.table_for(grid);
    let radar_ts = manifest.frames[frame_index].timestamp_us;
    match mode {
        Mode::Baseline => Ok((uniform_plan(grid, cfg.budget.fraction)?, BTreeMap::new())),
        Mode::Algo1 | Mode::Algo2 => {
            let (chosen, assoc) = chosen_azimuths(index, manifest, cfg, grid, frame_index, radar_ts)?;
            let plan = match previous.filter(|_| mode == Mode::Algo2) {
                None => allocate_algo1(&chosen, grid, &table, &cfg.budget)?,
                Some(prev) => {
                    let map = cfar_detect(prev, &cfg.cfar)?;
                    let flagged = flagged_blocks(&map, grid, cfg.cfar.min_hits_per_block)?;
                    allocate_algo2(&chosen, &flagged, grid, &table, &cfg.budget)?
                }
            };
            Ok((plan, assoc))
        }
    }
}

/// The plan `mode` uses for one frame. Algo2 needs the reconstruction of
/// the previous frame; without one it plans exactly like algo1.
pub fn plan_frame(
    manifest: &SceneManifest,
    mode: Mode,
    cfg: &PipelineConfig,
    frame_index: usize,
    previous: Option<&PolarFrame>,
) -> Result<SamplingPlan> {
    cfg.validate()?;
    manifest.validate()?;
    if frame_index >= manifest.frames.len() {
        return Err(Error::Index(format!(
            "frame {frame_index} of a {}-frame scene",
            manifest.frames.len()
        )));
    }
    let index = DetectionIndex::new(manifest.load_detections()?);
    let truth = manifest.load_frame(frame_index)?;
    let grid = cfg.grid_for(&truth)?;
    if let Some(prev) = previous {
        if prev.meta().azimuth_bins != truth.azimuth_bins() || prev.meta().range_bins != truth.range_bins() {
            return Err(Error::Dimension {
                context: "previous reconstruction",
                expected: truth.meta().len(),
                got: prev.meta().len(),
            });
        }
    }
    Ok(plan_with_index(&index, manifest, mode, cfg, &grid, frame_index, previous)?.0)
}

/// Runs every frame of `manifest` in order.
///
/// Solver errors on individual blocks do not stop the run; they are returned
/// next to the output so the caller can decide how to exit.
pub fn run_sequence(
    manifest: &SceneManifest,
    mode: Mode,
    cfg: &PipelineConfig,
) -> Result<(SequenceOutput, Vec<HardFailure>)> {
    cfg.validate()?;
    manifest.validate()?;
    let index = DetectionIndex::new(manifest.load_detections()?);
    let mut out = SequenceOutput {
        mode,
        reports: Vec::new(),
        plans: Vec::new(),
        reconstructions: Vec::new(),
        timings: Vec::new(),
    };
    let mut failures = Vec::new();
    let mut dct_cache: Option<DctOperator> = None;

    for (i, entry) in manifest.frames.iter().enumerate() {
        let mut times = StageTimings::default();
        let t0 = Instant::now();
        let truth = manifest.load_frame(i)?;
        if truth.timestamp_us() != entry.timestamp_us {
            log::warn!(
                "frame {i}: sidecar timestamp {} differs from manifest {}",
                truth.timestamp_us(),
                entry.timestamp_us
            );
        }
        let grid = cfg.grid_for(&truth)?;
        times.load_s = t0.elapsed().as_secs_f64();

        let t1 = Instant::now();
        let previous = out.reconstructions.last();
        let (plan, assoc) = plan_with_index(&index, manifest, mode, cfg, &grid, i, previous)?;
        times.plan_s = t1.elapsed().as_secs_f64();

        let t2 = Instant::now();
        let dct = match &dct_cache {
            Some(d) if d.rows() == grid.block_az && d.cols() == grid.block_rng => d,
            _ => dct_cache.insert(DctOperator::new(grid.block_az, grid.block_rng)?),
        };
        let (recon, solver, failed) = reconstruct_frame(&truth, &plan, dct, cfg, i)?;
        failures.extend(failed);
        times.reconstruct_s = t2.elapsed().as_secs_f64();

        let t3 = Instant::now();
        let frame_truth = manifest.truth.as_ref().map(|t| &t[i]);
        let metrics = evaluate_frame(&truth, &recon, &plan, frame_truth, &cfg.cfar)?;
        times.evaluate_s = t3.elapsed().as_secs_f64();

        out.reports.push(FrameReport {
            frame_index: i,
            timestamp_us: entry.timestamp_us,
            mode,
            associated_images: assoc,
            plan: PlanSummary::of(&plan, &cfg.budget),
            metrics,
            solver,
        });
        out.plans.push(plan);
        out.reconstructions.push(recon);
        out.timings.push(times);
        log::info!(
            "{mode} frame {i}: {} measurements, PSNR {:.2} dB",
            out.reports[i].plan.total_measurements,
            out.reports[i].metrics.psnr_db
        );
    }
    Ok((out, failures))
}

/// Samples every block of `truth` under `plan` and reconstructs it.
pub fn reconstruct_frame(
    truth: &PolarFrame,
    plan: &SamplingPlan,
    dct: &DctOperator,
    cfg: &PipelineConfig,
    frame_index: usize,
) -> Result<(PolarFrame, SolverSummary, Vec<HardFailure>)> {
    let grid = *plan.grid();
    let n = grid.block_len();
    let results: Vec<Result<BlockOutcome>> = plan
        .blocks()
        .par_iter()
        .map(|bp| -> Result<BlockOutcome> {
            if bp.measurements == 0 {
                return Ok(BlockOutcome::Skipped);
            }
            let lin = grid.linear_index(bp.block) as u64;
            let m = bp.measurements;
            let seed = derive_seed(cfg.seed, &[SEED_MATRIX, frame_index as u64, lin, m as u64]);
            let matrix = MeasurementMatrix::generate(m, n, cfg.column_weight.min(m), seed)?;
            let x = grid.extract_block(truth, bp.block)?;
            let noise_seed = derive_seed(cfg.seed, &[SEED_NOISE, frame_index as u64, lin]);
            let y = sample_block(&x, &matrix, cfg.noise_sigma, noise_seed, Some(bp.block))?;
            match recover_block(&matrix, dct, &y, &cfg.solver) {
                Ok((block, rec)) => Ok(BlockOutcome::Solved {
                    block,
                    iterations: rec.iterations_used,
                    converged: rec.converged,
                }),
                Err(e) => Ok(BlockOutcome::Failed(e)),
            }
        })
        .collect();

    let mut recon = PolarFrame::zeros(*truth.meta())?;
    let mut summary = SolverSummary::default();
    let mut failures = Vec::new();
    for (bp, res) in plan.blocks().iter().zip(results) {
        match res? {
            BlockOutcome::Skipped => summary.blocks_skipped += 1,
            BlockOutcome::Failed(error) => {
                log::error!("frame {frame_index} block {:?}: {error}", bp.block);
                failures.push(HardFailure {
                    frame_index,
                    block: bp.block,
                    error,
                });
            }
            BlockOutcome::Solved {
                block,
                iterations,
                converged,
            } => {
                summary.blocks_solved += 1;
                summary.total_iterations += iterations;
                if !converged {
                    summary.not_converged += 1;
                }
                // Power is non-negative; negative ringing is clipped.
                let clipped: Vec<f64> = block.into_iter().map(|v| if v > 0.0 { v } else { 0.0 }).collect();
                grid.insert_block(&mut recon, bp.block, &clipped)?;
            }
        }
    }
    Ok((quantized(&recon), summary, failures))
}

enum BlockOutcome {
    Skipped,
    Failed(Error),
    Solved {
        block: Vec<f64>,
        iterations: usize,
        converged: bool,
    },
}

/// Scores `recon` against `truth`; region labels come from `plan`.
pub fn evaluate_frame(
    truth: &PolarFrame,
    recon: &PolarFrame,
    plan: &SamplingPlan,
    frame_truth: Option<&FrameTruth>,
    cfar: &CfarParams,
) -> Result<FrameMetrics> {
    let grid = plan.grid();
    let peak = truth.max_value();
    let peak = if peak > 0.0 { peak } else { 1.0 };
    let sse = block_sse(grid, truth, recon)?;
    let frame_mse = sse.iter().sum::<f64>() / grid.frame_len() as f64;

    let mut region_psnr_db = BTreeMap::new();
    for region in RegionLabel::ALL {
        let blocks: Vec<BlockRef> = plan.region_blocks(region).map(|b| b.block).collect();
        if let Some(p) = blocks_psnr(grid, &sse, &blocks, peak) {
            region_psnr_db.insert(region, RegionPsnr(p));
        }
    }

    let mut target_blocks = Vec::new();
    if let Some(ft) = frame_truth {
        for t in &ft.targets {
            let block = grid.block_of(t.azimuth_bin, t.range_bin)?;
            let bp = plan.block(block).expect("block from grid");
            target_blocks.push(TargetBlock {
                label: t.label.clone(),
                block,
                region: bp.region,
                measurements: bp.measurements,
                boosted: bp.boosted,
                psnr_db: blocks_psnr(grid, &sse, &[block], peak).expect("one block"),
            });
        }
    }

    let truth_map = cfar_detect(truth, cfar)?;
    let recon_map = cfar_detect(recon, cfar)?;
    Ok(FrameMetrics {
        psnr_db: metrics::psnr_from_mse(frame_mse, peak),
        region_psnr_db,
        block_mse: sse.iter().map(|s| s / grid.block_len() as f64).collect(),
        target_blocks,
        detectability: metrics::detectability(&truth_map, &recon_map, MATCH_RADIUS_BINS)?,
    })
}

/// File names inside a run's output directory.
pub fn plan_file(i: usize) -> String {
    format!("plans/plan_{i:03}.json")
}

pub fn recon_file(i: usize) -> String {
    format!("recon/recon_{i:03}.png")
}

pub const REPORTS_FILE: &str = "reports.json";
pub const TIMINGS_FILE: &str = "timings.json";
pub const EVAL_FILE: &str = "eval.json";

/// Metrics recomputed from a run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub frame_index: usize,
    pub plan: PlanSummary,
    pub metrics: FrameMetrics,
}

/// Re-scores the plans and reconstructions stored under `dir` against the
/// manifest frames.
pub fn evaluate_outputs(manifest: &SceneManifest, cfg: &PipelineConfig, dir: &Path) -> Result<Vec<EvalReport>> {
    cfg.validate()?;
    manifest.validate()?;
    let mut out = Vec::with_capacity(manifest.frames.len());
    for i in 0..manifest.frames.len() {
        let truth = manifest.load_frame(i)?;
        let grid = cfg.grid_for(&truth)?;
        let export: PlanExport = read_json(&dir.join(plan_file(i)))?;
        let plan = SamplingPlan::from_export(grid, &export)?;
        let recon = read_frame(&dir.join(recon_file(i)))?;
        if recon.meta().len() != truth.meta().len() {
            return Err(Error::Dimension {
                context: "stored reconstruction",
                expected: truth.meta().len(),
                got: recon.meta().len(),
            });
        }
        let frame_truth = manifest.truth.as_ref().map(|t| &t[i]);
        out.push(EvalReport {
            frame_index: i,
            plan: PlanSummary::of(&plan, &cfg.budget),
            metrics: evaluate_frame(&truth, &recon, &plan, frame_truth, &cfg.cfar)?,
        });
    }
    Ok(out)
}

/// Writes plans, reconstructions, reports and timings under `dir`.
pub fn write_outputs(out: &SequenceOutput, dir: &Path) -> Result<()> {
    for (i, (plan, recon)) in out.plans.iter().zip(&out.reconstructions).enumerate() {
        super::io::write_text(&dir.join(plan_file(i)), &(plan.to_json() + "\n"))?;
        write_frame(recon, &dir.join(recon_file(i)))?;
    }
    write_json(&dir.join(REPORTS_FILE), &out.reports)?;
    write_json(&dir.join(TIMINGS_FILE), &out.timings)
}
