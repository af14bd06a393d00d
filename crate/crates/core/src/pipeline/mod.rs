//! Scene IO, synthetic scenes, the per-frame acquisition loop and metrics.

pub mod export;
pub mod io;
pub mod metrics;
pub mod run;
pub mod scene;
pub mod timing;

pub use metrics::{psnr, Detectability};
pub use run::{
    evaluate_frame, evaluate_outputs, plan_file, plan_frame, recon_file, reconstruct_frame,
    run_sequence, write_outputs, EvalReport, FrameMetrics, FrameReport, GridSpec, HardFailure,
    Mode, PipelineConfig, PlanSummary, SequenceOutput, EVAL_FILE, REPORTS_FILE, TIMINGS_FILE,
};
pub use scene::{synth_frames, synth_scene, FrameEntry, FrameTruth, SceneManifest, SynthSpec, TargetSpec};
pub use timing::{associate, TimingConfig};
