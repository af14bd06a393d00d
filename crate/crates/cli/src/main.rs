use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::bail;
use clap::{Args, Parser, Subcommand};
use radar_cs::pipeline::export::{render_cartesian, render_polar, save_png, DISPLAY_RANGE_M};
use radar_cs::pipeline::io::{read_frame, read_json, write_json, write_text};
use radar_cs::pipeline::{
    evaluate_outputs, plan_frame, run_sequence, synth_scene, write_outputs, Mode, PipelineConfig,
    SceneManifest, SynthSpec, EVAL_FILE,
};
use radar_cs::Error;

const EXIT_VALIDATION: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_SOLVER: u8 = 4;

/// Adaptive compressed-sensing acquisition of scanning-radar frames.
#[derive(Parser)]
#[command(name = "radar-cs", version)]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene: frames, camera detections, manifest.
    Synth(SynthArgs),
    /// Write the sampling plan of one frame as JSON.
    Plan(PlanArgs),
    /// Run a full sequence and write plans, reconstructions and reports.
    Run(RunArgs),
    /// Recompute metrics from a run directory.
    Eval(EvalArgs),
    /// Render a frame as an 8-bit PNG.
    Export(ExportArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Scene description (JSON). Defaults to the built-in reduced scene.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Frame count of the built-in scene.
    #[arg(long, default_value_t = 3)]
    frames: usize,
    #[arg(long)]
    out: PathBuf,
}

/// Settings shared by plan, run and eval.
#[derive(Args)]
struct Settings {
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Text file of `key = value` lines; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    budget: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Block counts, `AZxRNG`.
    #[arg(long, conflicts_with = "block")]
    grid: Option<String>,
    /// Block size in bins, `AZxRNG`.
    #[arg(long)]
    block: Option<String>,
    /// Integer measurement counts that fill the budget exactly.
    #[arg(long)]
    exact_budget: bool,
    /// Any other setting, `key=value`; may repeat.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    settings: Settings,
    #[arg(long, default_value_t = 0)]
    frame: usize,
    /// Reconstruction of the previous frame (algo2).
    #[arg(long)]
    previous: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    settings: Settings,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    settings: Settings,
    /// Directory written by `run`.
    #[arg(long)]
    run: PathBuf,
}

#[derive(Args)]
struct ExportArgs {
    /// Frame PNG with its JSON sidecar.
    #[arg(long)]
    frame: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Top-down view instead of azimuth x range.
    #[arg(long)]
    cartesian: bool,
    #[arg(long, default_value_t = DISPLAY_RANGE_M)]
    range_m: f64,
    /// Side length of the cartesian image.
    #[arg(long, default_value_t = 800)]
    size: u32,
}

/// Settings after merging defaults, manifest, config file and flags.
struct Resolved {
    manifest: SceneManifest,
    cfg: PipelineConfig,
    mode: Mode,
    out: Option<PathBuf>,
}

fn read_config_file(path: &Path) -> anyhow::Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })?;
    let mut pairs = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Parameter(format!(
                "{} line {}: expected key = value",
                path.display(),
                no + 1
            ))
            .into());
        };
        pairs.push((k.trim().replace('-', "_"), v.trim().to_string()));
    }
    Ok(pairs)
}

fn resolve(s: &Settings, out_flag: Option<&PathBuf>) -> anyhow::Result<Resolved> {
    let file = match &s.config {
        Some(p) => read_config_file(p)?,
        None => Vec::new(),
    };
    let mut keys: BTreeMap<String, String> = BTreeMap::new();
    for (k, v) in file {
        keys.insert(k, v);
    }
    let mut flags: Vec<(String, String)> = Vec::new();
    if let Some(v) = s.budget {
        flags.push(("budget".into(), v.to_string()));
    }
    if let Some(v) = s.seed {
        flags.push(("seed".into(), v.to_string()));
    }
    if let Some(v) = &s.grid {
        keys.remove("block");
        flags.push(("grid".into(), v.clone()));
    }
    if let Some(v) = &s.block {
        keys.remove("grid");
        flags.push(("block".into(), v.clone()));
    }
    if s.exact_budget {
        flags.push(("exact_budget".into(), "true".into()));
    }
    for kv in &s.set {
        let Some((k, v)) = kv.split_once('=') else {
            return Err(Error::Parameter(format!("--set expects key=value, got {kv:?}")).into());
        };
        flags.push((k.trim().replace('-', "_"), v.trim().to_string()));
    }
    if let Some(m) = s.mode {
        flags.push(("mode".into(), m.to_string()));
    }
    if let Some(o) = out_flag {
        flags.push(("out".into(), o.display().to_string()));
    }
    if let Some(m) = &s.manifest {
        flags.push(("manifest".into(), m.display().to_string()));
    }
    keys.extend(flags);

    let manifest_path = keys
        .remove("manifest")
        .map(PathBuf::from)
        .ok_or_else(|| Error::Parameter("no manifest given (--manifest or config key)".into()))?;
    let manifest = SceneManifest::load(&manifest_path)?;
    let mode = match keys.remove("mode") {
        Some(m) => m.parse::<Mode>()?,
        None => Mode::Algo1,
    };
    let out = keys.remove("out").map(PathBuf::from);

    let mut cfg = PipelineConfig::default();
    cfg.apply_manifest(&manifest)?;
    for (k, v) in &keys {
        cfg.apply_setting(k, v)?;
    }
    cfg.validate()?;
    Ok(Resolved {
        manifest,
        cfg,
        mode,
        out,
    })
}

fn synth(args: &SynthArgs) -> anyhow::Result<()> {
    let spec: SynthSpec = match &args.spec {
        Some(p) => read_json(p)?,
        None => SynthSpec::reduced(args.seed, args.frames),
    };
    let manifest = synth_scene(&spec, &args.out)?;
    println!(
        "wrote {} frames to {}",
        manifest.frames.len(),
        args.out.display()
    );
    Ok(())
}

fn plan(args: &PlanArgs) -> anyhow::Result<()> {
    let r = resolve(&args.settings, args.out.as_ref())?;
    let previous = args.previous.as_deref().map(read_frame).transpose()?;
    if r.mode == Mode::Algo2 && previous.is_none() && args.frame > 0 {
        log::warn!("algo2 without --previous plans frame {} like algo1", args.frame);
    }
    let plan = plan_frame(&r.manifest, r.mode, &r.cfg, args.frame, previous.as_ref())?;
    let text = plan.to_json() + "\n";
    match &r.out {
        Some(p) => write_text(p, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Returns whether any block failed hard.
fn run(args: &RunArgs) -> anyhow::Result<bool> {
    let r = resolve(&args.settings, args.out.as_ref())?;
    let Some(out_dir) = r.out else {
        bail!(Error::Parameter("no output directory given (--out or config key)".into()));
    };
    let (out, failures) = run_sequence(&r.manifest, r.mode, &r.cfg)?;
    write_outputs(&out, &out_dir)?;
    for rep in &out.reports {
        println!(
            "frame {}: {} measurements, PSNR {:.2} dB, {} blocks not converged",
            rep.frame_index, rep.plan.total_measurements, rep.metrics.psnr_db, rep.solver.not_converged
        );
    }
    for f in &failures {
        eprintln!("frame {} block {:?}: {}", f.frame_index, f.block, f.error);
    }
    Ok(!failures.is_empty())
}

fn eval(args: &EvalArgs) -> anyhow::Result<()> {
    let r = resolve(&args.settings, None)?;
    let reports = evaluate_outputs(&r.manifest, &r.cfg, &args.run)?;
    let path = args.run.join(EVAL_FILE);
    write_json(&path, &reports)?;
    for rep in &reports {
        println!("frame {}: PSNR {:.2} dB", rep.frame_index, rep.metrics.psnr_db);
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn export(args: &ExportArgs) -> anyhow::Result<()> {
    let frame = read_frame(&args.frame)?;
    let img = if args.cartesian {
        render_cartesian(&frame, args.range_m, args.size)?
    } else {
        render_polar(&frame, args.range_m)?
    };
    save_png(&img, &args.out)?;
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Io { .. }) | Some(Error::Format { .. }) => EXIT_IO,
        _ => EXIT_VALIDATION,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match &cli.command {
        Command::Synth(a) => synth(a).map(|_| false),
        Command::Plan(a) => plan(a).map(|_| false),
        Command::Run(a) => run(a),
        Command::Eval(a) => eval(a).map(|_| false),
        Command::Export(a) => export(a).map(|_| false),
    };
    match result {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(EXIT_SOLVER),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
