//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use radar_cs::allocator::{allocate_algo1, plan_total, Budget, RateTable};
use radar_cs::guidance::{
    bbox_to_azimuth, cfar_detect, wrap_deg, BoundingBox, CameraModel, CfarParams,
};
use radar_cs::pipeline::{run_sequence, synth_scene, Mode, PipelineConfig, SynthSpec};
use radar_cs::seed::rng_from;
use radar_cs::sensing::{DctOperator, MeasurementMatrix, MeasurementVector};
use radar_cs::solver::{basis_pursuit, omp, OmpStop, SolverConfig};
use radar_cs::{BlockGrid, FrameMeta, PolarFrame, RegionLabel};

type Outcome = Result<String, String>;

fn check(cond: bool, ok: String, bad: String) -> Outcome {
    if cond {
        Ok(ok)
    } else {
        Err(bad)
    }
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|x| x * x).sum();
    (num / den).sqrt()
}

fn support(v: &[f64], tol: f64) -> Vec<usize> {
    (0..v.len()).filter(|&i| v[i].abs() > tol).collect()
}

/// `k` ±1 coefficients at random DCT positions and their measurements.
fn plant(dct: &DctOperator, m: usize, k: usize, seed: u64) -> (MeasurementMatrix, Vec<f64>, MeasurementVector) {
    let n = dct.len();
    let mut rng = rng_from(seed.wrapping_mul(7919).wrapping_add(11));
    let mut truth = vec![0.0; n];
    for i in index::sample(&mut rng, n, k) {
        truth[i] = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    }
    let matrix = MeasurementMatrix::generate(m, n, 4, seed).unwrap();
    let y = matrix.apply(&dct.inverse(&truth).unwrap()).unwrap();
    (matrix, truth, MeasurementVector::new(y, seed, None))
}

fn budget_arithmetic() -> Outcome {
    let grid = BlockGrid::default();
    if (grid.az_blocks, grid.rng_blocks, grid.block_len()) != (8, 37, 5000) {
        return Err(format!("default grid is {}x{}", grid.az_blocks, grid.rng_blocks));
    }
    let table = RateTable::default();
    let budget = Budget::default();
    let cap = budget.total(&grid);
    let mut got = Vec::new();
    for (a, expected) in [(4usize, 147_880usize), (5, 147_250), (6, 137_080)] {
        let chosen: BTreeSet<usize> = (0..a).collect();
        let plan = allocate_algo1(&chosen, &grid, &table, &budget).map_err(|e| e.to_string())?;
        let total = plan_total(&plan);
        if total != expected || total > cap {
            return Err(format!("a={a}: {total} measurements, expected {expected}, cap {cap}"));
        }
        got.push(format!("a={a}: {total}"));
    }
    check(cap == 148_000, format!("{}; cap {cap}", got.join(", ")), format!("budget cap {cap}"))
}

fn sparse_recovery() -> Outcome {
    let dct = DctOperator::new(20, 25).unwrap();
    let cfg = SolverConfig::default();
    let mut bp_ok = 0;
    for seed in 0..100 {
        let (matrix, truth, y) = plant(&dct, 150, 10, seed);
        let rec = basis_pursuit(&matrix, &dct, &y, &cfg).map_err(|e| e.to_string())?;
        if rec.residual <= 1e-6 * y.norm() + 1e-9 && rel_err(&rec.coefficients, &truth) < 1e-3 {
            bp_ok += 1;
        }
    }
    let mut omp_ok = 0;
    for seed in 0..100 {
        let (matrix, truth, y) = plant(&dct, 100, 5, 500 + seed);
        let rec = omp(&matrix, &dct, &y, OmpStop::Sparsity(5)).map_err(|e| e.to_string())?;
        if support(&rec.coefficients, 1e-6) == support(&truth, 0.0) {
            omp_ok += 1;
        }
    }
    let msg = format!("BP {bp_ok}/100 exact at k=10 m=150, OMP support {omp_ok}/100 at k=5 m=100");
    check(bp_ok >= 95 && omp_ok >= 90, msg.clone(), msg)
}

/// Rows of the dense `Φ θᵀ`, one DCT synthesis per column.
fn dense_chain(matrix: &MeasurementMatrix, dct: &DctOperator) -> Vec<Vec<f64>> {
    let n = dct.len();
    let mut rows = vec![vec![0.0; n]; matrix.m()];
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = matrix.apply(&dct.inverse(&e).unwrap()).unwrap();
        for (i, v) in col.into_iter().enumerate() {
            rows[i][j] = v;
        }
    }
    rows
}

/// `min Σ(u + v)` subject to `A(u − v) = y`, `u, v ≥ 0`.
fn lp_l1_optimum(a: &[Vec<f64>], y: &[f64]) -> Result<f64, String> {
    let n = a[0].len();
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let pos: Vec<_> = (0..n).map(|_| lp.add_var(1.0, (0.0, f64::INFINITY))).collect();
    let neg: Vec<_> = (0..n).map(|_| lp.add_var(1.0, (0.0, f64::INFINITY))).collect();
    for (row, &yi) in a.iter().zip(y) {
        let mut terms = Vec::new();
        for (j, &c) in row.iter().enumerate() {
            if c != 0.0 {
                terms.push((pos[j], c));
                terms.push((neg[j], -c));
            }
        }
        lp.add_constraint(&terms[..], ComparisonOp::Eq, yi);
    }
    lp.solve().map(|s| s.objective()).map_err(|e| e.to_string())
}

fn lp_optimality() -> Outcome {
    let mut rng = rng_from(77);
    let shapes = [(6, 10), (5, 12), (4, 15), (3, 20), (6, 8), (5, 9)];
    let cfg = SolverConfig::default();
    let mut worst: f64 = 0.0;
    for trial in 0..50 {
        let (r, c) = shapes[trial % shapes.len()];
        let dct = DctOperator::new(r, c).unwrap();
        let n = dct.len();
        let m = rng.random_range(6..=30.min(n - 1));
        let matrix = MeasurementMatrix::generate(m, n, 4.min(m), 9000 + trial as u64).unwrap();
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..5.0)).collect();
        let y = MeasurementVector::new(matrix.apply(&x).unwrap(), 0, None);
        let rec = basis_pursuit(&matrix, &dct, &y, &cfg).map_err(|e| e.to_string())?;
        let ours: f64 = rec.coefficients.iter().map(|v| v.abs()).sum();
        let best = lp_l1_optimum(&dense_chain(&matrix, &dct), &y.values)?;
        worst = worst.max((ours - best).abs());
    }
    let msg = format!("max |l1 gap| {worst:.2e} over 50 instances");
    check(worst <= 1e-4, msg.clone(), msg)
}

/// Orthonormal DCT-II from its defining sum.
fn dct_direct(block: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let scale = |k: usize, n: usize| if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
    let mut out = vec![0.0; rows * cols];
    for u in 0..rows {
        for v in 0..cols {
            let mut acc = 0.0;
            for i in 0..rows {
                for j in 0..cols {
                    acc += block[i * cols + j]
                        * (PI * (2 * i + 1) as f64 * u as f64 / (2 * rows) as f64).cos()
                        * (PI * (2 * j + 1) as f64 * v as f64 / (2 * cols) as f64).cos();
                }
            }
            out[u * cols + v] = scale(u, rows) * scale(v, cols) * acc;
        }
    }
    out
}

fn dct_and_sensing() -> Outcome {
    let mut rng = rng_from(4);
    let mut round_trip: f64 = 0.0;
    let mut vs_direct: f64 = 0.0;
    for (r, c) in [(20, 25), (8, 8), (5, 13), (1, 7)] {
        let dct = DctOperator::new(r, c).unwrap();
        for _ in 0..5 {
            let x: Vec<f64> = (0..r * c).map(|_| rng.random_range(-3.0..3.0)).collect();
            let fx = dct.forward(&x).unwrap();
            round_trip = round_trip.max(rel_err(&dct.inverse(&fx).unwrap(), &x));
            vs_direct = vs_direct.max(rel_err(&fx, &dct_direct(&x, r, c)));
        }
    }
    let mut apply_err: f64 = 0.0;
    for trial in 0..100u64 {
        let n = rng.random_range(5..60);
        let m = rng.random_range(1..n);
        let d = rng.random_range(1..=m.min(6));
        let matrix = MeasurementMatrix::generate(m, n, d, trial).unwrap();
        let dense = matrix.to_dense();
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y = matrix.apply(&x).unwrap();
        for (i, yi) in y.iter().enumerate() {
            let want: f64 = (0..n).map(|j| dense[(i, j)] * x[j]).sum();
            apply_err = apply_err.max((yi - want).abs());
        }
    }
    let msg = format!(
        "DCT round trip {round_trip:.1e}, vs direct sum {vs_direct:.1e}, apply vs dense {apply_err:.1e}"
    );
    check(round_trip < 1e-10 && vs_direct < 1e-10 && apply_err <= 1e-12, msg.clone(), msg)
}

fn exp_frame(rows: usize, cols: usize, rng: &mut impl Rng) -> PolarFrame {
    let data: Vec<f64> = (0..rows * cols).map(|_| Exp1.sample(rng)).collect();
    PolarFrame::new(FrameMeta::full_sweep(rows, cols, 1.0), data).unwrap()
}

fn cfar_calibration() -> Outcome {
    let params = CfarParams::default();
    let mut rng = rng_from(5);
    let noise = exp_frame(1000, 1000, &mut rng);
    let map = cfar_detect(&noise, &params).map_err(|e| e.to_string())?;
    let rate = map.hit_total() as f64 / 1e6;
    let trials = 100;
    let mut detected = 0;
    for _ in 0..trials {
        let mut f = exp_frame(1, 200, &mut rng);
        let v = f.get(0, 100) + 100.0;
        f.set(0, 100, v).unwrap();
        if cfar_detect(&f, &params).map_err(|e| e.to_string())?.is_hit(0, 100) {
            detected += 1;
        }
    }
    let msg = format!(
        "false-alarm rate {rate:.2e} for pfa {:.0e}, 20 dB target detected {detected}/{trials}",
        params.pfa
    );
    let ok = rate <= 5.0 * params.pfa && rate >= params.pfa / 5.0 && detected >= 99;
    check(ok, msg.clone(), msg)
}

fn reduced_config(seed: u64) -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.apply_setting("grid", "8x8").unwrap();
    cfg.apply_setting("exact_budget", "true").unwrap();
    cfg.seed = seed;
    cfg
}

fn adaptive_gain() -> Outcome {
    let mut gains = Vec::new();
    let (mut sum_base, mut sum_a1) = (0.0, 0.0);
    for seed in 0..10 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let manifest = synth_scene(&SynthSpec::reduced(seed, 1), dir.path()).map_err(|e| e.to_string())?;
        let cfg = reduced_config(seed);
        let (base, _) = run_sequence(&manifest, Mode::Baseline, &cfg).map_err(|e| e.to_string())?;
        let (a1, _) = run_sequence(&manifest, Mode::Algo1, &cfg).map_err(|e| e.to_string())?;
        let mut b = Vec::new();
        let mut g = Vec::new();
        for (ta, tb) in a1.reports[0].metrics.target_blocks.iter().zip(&base.reports[0].metrics.target_blocks) {
            if ta.region == RegionLabel::R1 {
                g.push(ta.psnr_db);
                b.push(tb.psnr_db);
            }
        }
        if g.is_empty() {
            return Err(format!("seed {seed}: no target in a chosen block"));
        }
        let mb = b.iter().sum::<f64>() / b.len() as f64;
        let ma = g.iter().sum::<f64>() / g.len() as f64;
        sum_base += mb;
        sum_a1 += ma;
        gains.push(ma - mb);
    }
    let (mb, ma) = (sum_base / 10.0, sum_a1 / 10.0);
    let min_gain = gains.iter().copied().fold(f64::INFINITY, f64::min);
    let msg = format!("mean target-block PSNR algo1 {ma:.2} dB vs baseline {mb:.2} dB, smallest per-seed gain {min_gain:.2} dB");
    check(ma >= mb + 2.0, msg.clone(), msg)
}

fn blind_spot() -> Outcome {
    let mut passed = 0;
    let mut notes = Vec::new();
    for seed in 0..10 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let spec = SynthSpec::reduced(seed, 2);
        let manifest = synth_scene(&spec, dir.path()).map_err(|e| e.to_string())?;
        let blind = spec
            .targets
            .iter()
            .position(|t| wrap_deg(t.azimuth_deg) == 60.0)
            .ok_or("scene has no target at 60°")?;
        if spec.cameras.iter().any(|c| c.sees(60.0)) {
            return Err("60° is inside a camera field of view".into());
        }
        let cfg = reduced_config(seed);
        let (a1, _) = run_sequence(&manifest, Mode::Algo1, &cfg).map_err(|e| e.to_string())?;
        let (a2, _) = run_sequence(&manifest, Mode::Algo2, &cfg).map_err(|e| e.to_string())?;
        let mut ok = true;
        for f in 1..spec.n_frames {
            let t1 = &a1.reports[f].metrics.target_blocks[blind];
            let t2 = &a2.reports[f].metrics.target_blocks[blind];
            ok &= t2.boosted && t2.psnr_db >= t1.psnr_db + 2.0;
            notes.push(format!(
                "seed {seed}: {} {:.1} -> {:.1} dB",
                if t2.boosted { "boosted" } else { "not boosted" },
                t1.psnr_db,
                t2.psnr_db
            ));
        }
        if ok {
            passed += 1;
        }
    }
    let msg = format!("{passed}/10 seeds ({})", notes.join("; "));
    check(passed >= 8, msg.clone(), msg)
}

fn geometry() -> Outcome {
    let front = CameraModel::front();
    let rear = CameraModel::rear();
    let signed = |az: f64| if az >= 180.0 { az - 360.0 } else { az };
    let edges = [
        signed(front.column_to_azimuth(0.0)),
        signed(front.column_to_azimuth(front.image_width_px as f64)),
        rear.column_to_azimuth(0.0),
        rear.column_to_azimuth(rear.image_width_px as f64),
    ];
    if edges != [-33.0, 33.0, 90.0, 270.0] {
        return Err(format!("edge azimuths {edges:?}"));
    }
    // Thinnest boxes hugging each image edge.
    let thin = 1e-6;
    for cam in [front, rear] {
        let w = cam.image_width_px as f64;
        for (x1, want) in [(0.0, edges_of(&cam).0), (w - thin, edges_of(&cam).1)] {
            let b = BoundingBox {
                x1,
                y1: 0.0,
                x2: x1 + thin,
                y2: 1.0,
                class_label: "car".into(),
                score: 1.0,
            };
            let az = bbox_to_azimuth(&cam, &b).map_err(|e| e.to_string())?;
            let diff = (az - want + 180.0).rem_euclid(360.0) - 180.0;
            if diff.abs() > 1e-6 {
                return Err(format!("{:?} edge box maps to {az}, expected {want}", cam.id));
            }
        }
    }
    let blind = |az: f64| (az > 33.0 && az < 90.0) || (az > 270.0 && az < 327.0);
    let mut swept = 0;
    for cam in [front, rear] {
        let w = cam.image_width_px as f64;
        let steps = 20_000;
        for s in 0..steps {
            let x1 = w * s as f64 / steps as f64;
            let x2 = (x1 + 0.5).min(w);
            let b = BoundingBox {
                x1,
                y1: 0.0,
                x2,
                y2: 1.0,
                class_label: "car".into(),
                score: 1.0,
            };
            let az = bbox_to_azimuth(&cam, &b).map_err(|e| e.to_string())?;
            if blind(az) {
                return Err(format!("{:?} box at x={x1} maps into the blind spot ({az}°)", cam.id));
            }
            swept += 1;
        }
    }
    Ok(format!("edges -33/33/90/270 exact, {swept} swept boxes avoid the blind spot"))
}

fn edges_of(cam: &CameraModel) -> (f64, f64) {
    (
        wrap_deg(cam.boresight_deg - cam.hfov_deg / 2.0),
        wrap_deg(cam.boresight_deg + cam.hfov_deg / 2.0),
    )
}

fn run_cli(manifest: &Path, out: &Path) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_radar-cs"))
        .args(["run", "--mode", "algo2", "--grid", "8x8", "--exact-budget", "--seed", "11"])
        .arg("--manifest")
        .arg(manifest)
        .arg("--out")
        .arg(out)
        .stdout(std::process::Stdio::null())
        .status()
        .map_err(|e| e.to_string())?;
    check(status.success(), String::new(), format!("radar-cs run exited with {status}")).map(|_| ())
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let manifest = synth_scene(&SynthSpec::reduced(3, 2), &dir.path().join("scene")).map_err(|e| e.to_string())?;
    let manifest_path = dir.path().join("scene").join("manifest.json");
    assert_eq!(manifest.frames.len(), 2);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_cli(&manifest_path, &a)?;
    run_cli(&manifest_path, &b)?;
    let mut files = vec!["reports.json".to_string()];
    for i in 0..2 {
        files.push(format!("plans/plan_{i:03}.json"));
        files.push(format!("recon/recon_{i:03}.png"));
    }
    for f in &files {
        let x = std::fs::read(a.join(f)).map_err(|e| format!("{f}: {e}"))?;
        let y = std::fs::read(b.join(f)).map_err(|e| format!("{f}: {e}"))?;
        if x != y {
            return Err(format!("{f} differs between runs"));
        }
    }
    Ok(format!("{} files byte-identical across two runs", files.len()))
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Outcome); 9] = [
        ("budget arithmetic", Duration::from_secs(1), budget_arithmetic),
        ("sparse recovery", Duration::from_secs(120), sparse_recovery),
        ("BP vs LP optimum", Duration::from_secs(60), lp_optimality),
        ("DCT and sensing oracles", Duration::from_secs(60), dct_and_sensing),
        ("CFAR calibration", Duration::from_secs(60), cfar_calibration),
        ("adaptive gain", Duration::from_secs(600), adaptive_gain),
        ("blind-spot recovery", Duration::from_secs(600), blind_spot),
        ("camera geometry", Duration::from_secs(60), geometry),
        ("determinism", Duration::from_secs(600), determinism),
    ];
    let mut failed = 0;
    for (i, (name, limit, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = f();
        let took = t.elapsed();
        let outcome = match outcome {
            Ok(msg) if took > *limit => Err(format!("{msg}; took {took:.1?}, limit {limit:?}")),
            other => other,
        };
        match outcome {
            Ok(msg) => println!("PASS {}. {name}: {msg} [{took:.1?}]", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL {}. {name}: {msg} [{took:.1?}]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
