//! Scene manifests and synthetic scene generation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::io::{read_detections, read_json, write_detections, write_frame, write_json};
use super::timing::TimingConfig;
use crate::error::{Error, Result};
use crate::frame::{FrameMeta, PolarFrame};
use crate::guidance::{wrap_deg, BoundingBox, CameraId, CameraModel, DetectionSet};
use crate::seed::{derive_seed, rng_from};

const SEED_NOISE: u64 = 0x6e6f_6973;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEntry {
    /// Relative paths resolve against the manifest's directory.
    pub path: PathBuf,
    pub timestamp_us: i64,
}

/// Ground-truth position of one target in one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetTruth {
    pub label: String,
    pub azimuth_deg: f64,
    pub range_m: f64,
    pub azimuth_bin: usize,
    pub range_bin: usize,
    /// Cameras whose field of view contains the target.
    pub visible_to: Vec<CameraId>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameTruth {
    pub targets: Vec<TargetTruth>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneManifest {
    pub frames: Vec<FrameEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detections: Option<PathBuf>,
    #[serde(default = "default_cameras")]
    pub cameras: Vec<CameraModel>,
    /// Pipeline settings, same keys as the config file.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub config: BTreeMap<String, serde_json::Value>,
    /// One entry per frame when the scene is synthetic.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<Vec<FrameTruth>>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_cameras() -> Vec<CameraModel> {
    vec![CameraModel::front(), CameraModel::rear()]
}

impl SceneManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let mut m: SceneManifest = read_json(path)?;
        m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        m.validate().map_err(|e| Error::format(path, e))?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames.is_empty() {
            return Err(Error::Validation("manifest lists no frames".into()));
        }
        for w in self.frames.windows(2) {
            if w[1].timestamp_us <= w[0].timestamp_us {
                return Err(Error::Validation(format!(
                    "radar timestamps must increase strictly: {} then {}",
                    w[0].timestamp_us, w[1].timestamp_us
                )));
            }
        }
        for cam in &self.cameras {
            cam.validate()?;
        }
        if let Some(truth) = &self.truth {
            if truth.len() != self.frames.len() {
                return Err(Error::Validation(format!(
                    "truth has {} entries for {} frames",
                    truth.len(),
                    self.frames.len()
                )));
            }
        }
        Ok(())
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn frame_path(&self, index: usize) -> PathBuf {
        self.resolve(&self.frames[index].path)
    }

    pub fn load_frame(&self, index: usize) -> Result<PolarFrame> {
        super::io::read_frame(&self.frame_path(index))
    }

    pub fn load_detections(&self) -> Result<Vec<DetectionSet>> {
        match &self.detections {
            Some(p) => read_detections(&self.resolve(p)),
            None => Ok(Vec::new()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    #[serde(default = "default_class")]
    pub class: String,
    pub azimuth_deg: f64,
    pub range_m: f64,
    /// Peak power added on top of the noise floor.
    pub amplitude: f64,
    /// Gaussian standard deviation in (azimuth, range) bins.
    pub extent_bins: [f64; 2],
    /// Motion per radar frame.
    #[serde(default)]
    pub range_rate_m: f64,
    #[serde(default)]
    pub azimuth_rate_deg: f64,
}

fn default_class() -> String {
    "car".into()
}

impl TargetSpec {
    /// Position after `frames` radar periods (may be fractional).
    pub fn position(&self, frames: f64) -> (f64, f64) {
        (
            wrap_deg(self.azimuth_deg + self.azimuth_rate_deg * frames),
            self.range_m + self.range_rate_m * frames,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub azimuth_bins: usize,
    pub range_bins: usize,
    pub range_resolution_m: f64,
    /// Mean of the exponential (speckle) background.
    pub noise_floor: f64,
    pub n_frames: usize,
    pub targets: Vec<TargetSpec>,
    pub seed: u64,
    #[serde(default)]
    pub timing: TimingConfig,
    #[serde(default = "default_cameras")]
    pub cameras: Vec<CameraModel>,
    #[serde(default = "default_score")]
    pub detection_score: f64,
}

fn default_score() -> f64 {
    0.9
}

/// In-memory result of [`synth_frames`].
#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub frames: Vec<PolarFrame>,
    pub detections: Vec<DetectionSet>,
    pub truth: Vec<FrameTruth>,
}

impl SynthSpec {
    /// A 160 x 200 bin scene for the 8 x 8 grid: four camera-visible
    /// targets in different azimuth sectors and one car at 60° that no
    /// camera sees.
    pub fn reduced(seed: u64, n_frames: usize) -> Self {
        let target = |class: &str, azimuth_deg: f64, range_m: f64| TargetSpec {
            class: class.into(),
            azimuth_deg,
            range_m,
            amplitude: 300.0,
            extent_bins: [1.0, 2.0],
            range_rate_m: 0.0,
            azimuth_rate_deg: 0.0,
        };
        SynthSpec {
            azimuth_bins: 160,
            range_bins: 200,
            range_resolution_m: 0.8103,
            noise_floor: 0.1,
            n_frames,
            targets: vec![
                target("car", 10.0, 30.0),
                target("car", 160.0, 40.0),
                target("truck", 200.0, 45.0),
                target("car", 250.0, 35.0),
                target("car", 60.0, 25.0),
            ],
            seed,
            timing: TimingConfig::default(),
            cameras: default_cameras(),
            detection_score: default_score(),
        }
    }

    pub fn meta(&self) -> FrameMeta {
        FrameMeta::full_sweep(self.azimuth_bins, self.range_bins, self.range_resolution_m)
    }

    /// Radar timestamp of frame `i`; the first frame is one period after the cameras start.
    pub fn radar_timestamp_us(&self, i: usize) -> i64 {
        (i as i64 + 1) * self.timing.radar_period_us()
    }

    pub fn validate(&self) -> Result<()> {
        self.meta().validate()?;
        self.timing.validate()?;
        if self.n_frames == 0 {
            return Err(Error::Parameter("synthetic scene needs at least one frame".into()));
        }
        if !(self.noise_floor.is_finite() && self.noise_floor >= 0.0) {
            return Err(Error::Parameter(format!("noise floor {} must be >= 0", self.noise_floor)));
        }
        if !(0.0..=1.0).contains(&self.detection_score) {
            return Err(Error::Parameter(format!(
                "detection score {} outside [0, 1]",
                self.detection_score
            )));
        }
        let max_range = self.meta().max_range_m();
        for (k, t) in self.targets.iter().enumerate() {
            if !(t.amplitude.is_finite() && t.amplitude >= 0.0) {
                return Err(Error::Parameter(format!("target {k}: amplitude {} must be >= 0", t.amplitude)));
            }
            if !t.extent_bins.iter().all(|s| s.is_finite() && *s > 0.0) {
                return Err(Error::Parameter(format!("target {k}: extent must be positive")));
            }
            for i in 0..self.n_frames {
                let (_, r) = t.position(i as f64);
                if !(r >= 0.0 && r < max_range) {
                    return Err(Error::Parameter(format!(
                        "target {k} at {r:.2} m in frame {i} is outside [0, {max_range:.2}) m"
                    )));
                }
            }
        }
        for cam in &self.cameras {
            cam.validate()?;
        }
        Ok(())
    }
}

/// Generates frames, camera detections and ground truth without touching disk.
pub fn synth_frames(spec: &SynthSpec) -> Result<SyntheticScene> {
    spec.validate()?;
    let meta = spec.meta();
    let mut frames = Vec::with_capacity(spec.n_frames);
    let mut truth = Vec::with_capacity(spec.n_frames);
    let noise = (spec.noise_floor > 0.0)
        .then(|| Exp::new(1.0 / spec.noise_floor))
        .transpose()
        .map_err(|e| Error::Parameter(format!("noise distribution: {e}")))?;

    for i in 0..spec.n_frames {
        let mut data = vec![0.0; meta.len()];
        if let Some(exp) = &noise {
            let mut rng = rng_from(derive_seed(spec.seed, &[SEED_NOISE, i as u64]));
            data.iter_mut().for_each(|v| *v = exp.sample(&mut rng));
        }
        let mut ft = FrameTruth::default();
        for t in &spec.targets {
            let (az, r) = t.position(i as f64);
            add_blob(&mut data, &meta, az, r, t);
            ft.targets.push(TargetTruth {
                label: t.class.clone(),
                azimuth_deg: az,
                range_m: r,
                azimuth_bin: ((az / meta.azimuth_resolution_deg) as usize).min(meta.azimuth_bins - 1),
                range_bin: ((r / meta.range_resolution_m) as usize).min(meta.range_bins - 1),
                visible_to: spec.cameras.iter().filter(|c| c.sees(az)).map(|c| c.id).collect(),
            });
        }
        let mut frame = PolarFrame::new(meta, data)?;
        frame.set_timestamp_us(spec.radar_timestamp_us(i));
        frames.push(frame);
        truth.push(ft);
    }

    let last = spec.radar_timestamp_us(spec.n_frames - 1);
    let period = spec.timing.radar_period_us() as f64;
    let mut detections = Vec::new();
    for cam in &spec.cameras {
        let rate = spec.timing.camera_rate_hz(cam.id);
        for k in 0.. {
            let ts = (k as f64 * 1e6 / rate).round() as i64;
            if ts > last {
                break;
            }
            // Continuous frame index relative to the first radar frame.
            let f = ts as f64 / period - 1.0;
            let boxes = spec
                .targets
                .iter()
                .filter_map(|t| camera_box(cam, &meta, t, t.position(f).0, spec.detection_score))
                .collect();
            detections.push(DetectionSet {
                timestamp_us: ts,
                camera: cam.id,
                image_width: cam.image_width_px,
                image_height: cam.image_height_px,
                boxes,
            });
        }
    }
    detections.sort_by_key(|d| (d.timestamp_us, d.camera));
    Ok(SyntheticScene {
        frames,
        detections,
        truth,
    })
}

/// Writes a synthetic scene (frames, detections, manifest) into `dir`.
pub fn synth_scene(spec: &SynthSpec, dir: &Path) -> Result<SceneManifest> {
    let scene = synth_frames(spec)?;
    let mut entries = Vec::with_capacity(scene.frames.len());
    for (i, frame) in scene.frames.iter().enumerate() {
        let rel = PathBuf::from(format!("frames/frame_{i:03}.png"));
        write_frame(frame, &dir.join(&rel))?;
        entries.push(FrameEntry {
            path: rel,
            timestamp_us: frame.timestamp_us(),
        });
    }
    let det_rel = PathBuf::from("detections.jsonl");
    write_detections(&dir.join(&det_rel), &scene.detections)?;
    let manifest = SceneManifest {
        frames: entries,
        detections: Some(det_rel),
        cameras: spec.cameras.clone(),
        config: BTreeMap::new(),
        truth: Some(scene.truth),
        base_dir: dir.to_path_buf(),
    };
    manifest.save(&dir.join("manifest.json"))?;
    Ok(manifest)
}

fn add_blob(data: &mut [f64], meta: &FrameMeta, az_deg: f64, range_m: f64, t: &TargetSpec) {
    if t.amplitude == 0.0 {
        return;
    }
    let (na, nr) = (meta.azimuth_bins as isize, meta.range_bins as isize);
    let ua = az_deg / meta.azimuth_resolution_deg;
    let ur = range_m / meta.range_resolution_m;
    let [sa, sr] = t.extent_bins;
    let (wa, wr) = ((4.0 * sa).ceil() as isize + 1, (4.0 * sr).ceil() as isize + 1);
    let (ca, cr) = (ua.floor() as isize, ur.floor() as isize);
    for da in -wa..=wa {
        let a = ca + da;
        let ga = (-(a as f64 + 0.5 - ua).powi(2) / (2.0 * sa * sa)).exp();
        let row = a.rem_euclid(na) as usize;
        for r in (cr - wr).max(0)..=(cr + wr).min(nr - 1) {
            let gr = (-(r as f64 + 0.5 - ur).powi(2) / (2.0 * sr * sr)).exp();
            data[row * meta.range_bins + r as usize] += t.amplitude * ga * gr;
        }
    }
}

/// Box centred on the target's column, sized from its azimuth extent.
fn camera_box(cam: &CameraModel, meta: &FrameMeta, t: &TargetSpec, az: f64, score: f64) -> Option<BoundingBox> {
    let xc = cam.azimuth_to_column(az)?;
    let w = cam.image_width_px as f64;
    let h = cam.image_height_px as f64;
    let extent_deg = 2.0 * t.extent_bins[0] * meta.azimuth_resolution_deg;
    let half = (extent_deg / cam.hfov_deg * w).max(4.0).min(xc).min(w - xc);
    if half < 0.5 {
        return None;
    }
    Some(BoundingBox {
        x1: xc - half,
        y1: 0.45 * h,
        x2: xc + half,
        y2: 0.55 * h,
        class_label: t.class.clone(),
        score,
    })
}
