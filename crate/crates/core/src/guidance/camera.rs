//! Camera detections to radar azimuth.
//!
//! Pixel columns map linearly onto the camera's horizontal field of view,
//! centred on its boresight in the radar's azimuth convention (0° forward,
//! increasing with azimuth bin index).

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::BlockGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CameraId {
    Front,
    Rear,
}

impl fmt::Display for CameraId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CameraId::Front => "front",
            CameraId::Rear => "rear",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub id: CameraId,
    pub hfov_deg: f64,
    pub boresight_deg: f64,
    pub image_width_px: u32,
    pub image_height_px: u32,
}

impl CameraModel {
    /// 66° front camera, 1280x960 images.
    pub fn front() -> Self {
        CameraModel {
            id: CameraId::Front,
            hfov_deg: 66.0,
            boresight_deg: 0.0,
            image_width_px: 1280,
            image_height_px: 960,
        }
    }

    /// 180° rear camera looking backwards, 1024x1024 images.
    pub fn rear() -> Self {
        CameraModel {
            id: CameraId::Rear,
            hfov_deg: 180.0,
            boresight_deg: 180.0,
            image_width_px: 1024,
            image_height_px: 1024,
        }
    }

    pub fn with_image(mut self, width: u32, height: u32) -> Self {
        self.image_width_px = width;
        self.image_height_px = height;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hfov_deg > 0.0 && self.hfov_deg <= 360.0) {
            return Err(Error::Validation(format!(
                "{} camera HFoV {}° outside (0, 360]",
                self.id, self.hfov_deg
            )));
        }
        if self.image_width_px == 0 || self.image_height_px == 0 {
            return Err(Error::Validation(format!("{} camera has an empty image", self.id)));
        }
        Ok(())
    }

    /// Radar azimuth of a pixel column, wrapped to `[0, 360)`.
    pub fn column_to_azimuth(&self, x: f64) -> f64 {
        let frac = x / self.image_width_px as f64 - 0.5;
        wrap_deg(self.boresight_deg + self.hfov_deg * frac)
    }

    /// Pixel column seeing `azimuth_deg`, or `None` outside the field of view.
    pub fn azimuth_to_column(&self, azimuth_deg: f64) -> Option<f64> {
        let offset = signed_offset_deg(azimuth_deg, self.boresight_deg);
        (offset.abs() <= self.hfov_deg / 2.0)
            .then(|| (0.5 + offset / self.hfov_deg) * self.image_width_px as f64)
    }

    pub fn sees(&self, azimuth_deg: f64) -> bool {
        self.azimuth_to_column(azimuth_deg).is_some()
    }
}

/// Wraps an angle into `[0, 360)`.
pub fn wrap_deg(deg: f64) -> f64 {
    let w = deg.rem_euclid(360.0);
    if w >= 360.0 {
        0.0
    } else {
        w
    }
}

/// Signed difference `a − b` folded into `[-180, 180)`.
pub fn signed_offset_deg(a: f64, b: f64) -> f64 {
    (a - b + 180.0).rem_euclid(360.0) - 180.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
    #[serde(rename = "class")]
    pub class_label: String,
    pub score: f64,
}

impl BoundingBox {
    pub fn x_center(&self) -> f64 {
        0.5 * (self.x1 + self.x2)
    }

    pub fn validate(&self, width: u32, height: u32) -> Result<()> {
        let (w, h) = (width as f64, height as f64);
        let ok = self.x1 < self.x2
            && self.y1 < self.y2
            && self.x1 >= 0.0
            && self.y1 >= 0.0
            && self.x2 <= w
            && self.y2 <= h;
        if !ok {
            return Err(Error::Validation(format!(
                "box ({}, {}, {}, {}) invalid for {width}x{height} image",
                self.x1, self.y1, self.x2, self.y2
            )));
        }
        if !(0.0..=1.0).contains(&self.score) {
            return Err(Error::Validation(format!("box score {} outside [0, 1]", self.score)));
        }
        Ok(())
    }
}

/// Detections of one camera image; one line of the detections JSONL file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionSet {
    pub timestamp_us: i64,
    pub camera: CameraId,
    pub image_width: u32,
    pub image_height: u32,
    pub boxes: Vec<BoundingBox>,
}

impl DetectionSet {
    pub fn validate(&self) -> Result<()> {
        self.boxes
            .iter()
            .try_for_each(|b| b.validate(self.image_width, self.image_height))
    }
}

/// Centre-column azimuth of a box.
pub fn bbox_to_azimuth(cam: &CameraModel, bbox: &BoundingBox) -> Result<f64> {
    cam.validate()?;
    bbox.validate(cam.image_width_px, cam.image_height_px)?;
    Ok(cam.column_to_azimuth(bbox.x_center()))
}

/// Which detections count and how a box marks azimuth blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AzimuthSelection {
    pub classes: Vec<String>,
    pub score_min: f64,
    /// Mark every azimuth block the box spans instead of only its centre.
    pub spread_boxes: bool,
}

impl Default for AzimuthSelection {
    fn default() -> Self {
        AzimuthSelection {
            classes: ["person", "bicycle", "car", "truck"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            score_min: 0.5,
            spread_boxes: false,
        }
    }
}

impl AzimuthSelection {
    fn keeps(&self, bbox: &BoundingBox) -> bool {
        bbox.score >= self.score_min && self.classes.iter().any(|c| c == &bbox.class_label)
    }
}

pub fn azimuth_block_of(grid: &BlockGrid, azimuth_deg: f64) -> usize {
    let idx = (wrap_deg(azimuth_deg) / grid.azimuth_block_deg()).floor() as usize;
    idx.min(grid.az_blocks - 1)
}

/// Azimuth blocks that contain at least one retained detection.
pub fn important_azimuth_blocks(
    detections: &[DetectionSet],
    cams: &[CameraModel],
    grid: &BlockGrid,
    selection: &AzimuthSelection,
) -> Result<BTreeSet<usize>> {
    let mut chosen = BTreeSet::new();
    for set in detections {
        let Some(base) = cams.iter().find(|c| c.id == set.camera) else {
            log::warn!("no camera model for {} detections, skipping", set.camera);
            continue;
        };
        let cam = base.with_image(set.image_width, set.image_height);
        for bbox in set.boxes.iter().filter(|b| selection.keeps(b)) {
            let az = bbox_to_azimuth(&cam, bbox)?;
            chosen.insert(azimuth_block_of(grid, az));
            if selection.spread_boxes {
                // Azimuth grows with the column, so walk blocks from the left edge to the right edge.
                let last = azimuth_block_of(grid, cam.column_to_azimuth(bbox.x2));
                let mut block = azimuth_block_of(grid, cam.column_to_azimuth(bbox.x1));
                for _ in 0..grid.az_blocks {
                    chosen.insert(block);
                    if block == last {
                        break;
                    }
                    block = (block + 1) % grid.az_blocks;
                }
            }
        }
    }
    Ok(chosen)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bbox(x1: f64, x2: f64, class: &str, score: f64) -> BoundingBox {
        BoundingBox {
            x1,
            y1: 10.0,
            x2,
            y2: 50.0,
            class_label: class.into(),
            score,
        }
    }

    #[test]
    fn front_edges_and_centre() {
        let cam = CameraModel::front();
        let w = cam.image_width_px as f64;
        assert_eq!(cam.column_to_azimuth(w / 2.0), 0.0);
        assert_eq!(cam.column_to_azimuth(0.0), 327.0);
        assert_eq!(cam.column_to_azimuth(w), 33.0);
        let centered = bbox(w / 2.0 - 20.0, w / 2.0 + 20.0, "car", 0.9);
        assert_eq!(bbox_to_azimuth(&cam, &centered).unwrap(), 0.0);
    }

    #[test]
    fn rear_edges() {
        let cam = CameraModel::rear();
        let w = cam.image_width_px as f64;
        assert_eq!(cam.column_to_azimuth(0.0), 90.0);
        assert_eq!(cam.column_to_azimuth(w), 270.0);
        assert_eq!(cam.column_to_azimuth(w / 2.0), 180.0);
    }

    #[test]
    fn inverse_mapping() {
        for cam in [CameraModel::front(), CameraModel::rear()] {
            for az in [0.0, 10.0, 330.0, 100.0, 180.0, 269.0] {
                if let Some(x) = cam.azimuth_to_column(az) {
                    let back = cam.column_to_azimuth(x);
                    assert!(signed_offset_deg(back, az).abs() < 1e-9, "{az} -> {back}");
                }
            }
        }
        assert!(CameraModel::front().azimuth_to_column(60.0).is_none());
        assert!(CameraModel::rear().azimuth_to_column(60.0).is_none());
        assert_eq!(CameraModel::front().azimuth_to_column(0.0), Some(640.0));
    }

    #[test]
    fn invalid_boxes() {
        let cam = CameraModel::front();
        assert!(bbox_to_azimuth(&cam, &bbox(10.0, 5.0, "car", 0.9)).is_err());
        assert!(bbox_to_azimuth(&cam, &bbox(-1.0, 5.0, "car", 0.9)).is_err());
        assert!(bbox_to_azimuth(&cam, &bbox(1200.0, 1300.0, "car", 0.9)).is_err());
        assert!(bbox_to_azimuth(&cam, &bbox(1.0, 5.0, "car", 1.5)).is_err());
    }

    #[test]
    fn block_selection_examples() {
        let grid = BlockGrid::default();
        let cams = [CameraModel::front(), CameraModel::rear()];
        let sel = AzimuthSelection::default();
        assert!(important_azimuth_blocks(&[], &cams, &grid, &sel).unwrap().is_empty());

        let front = DetectionSet {
            timestamp_us: 0,
            camera: CameraId::Front,
            image_width: 1280,
            image_height: 960,
            boxes: vec![bbox(620.0, 660.0, "person", 0.8)],
        };
        let got = important_azimuth_blocks(&[front.clone()], &cams, &grid, &sel).unwrap();
        assert_eq!(got, BTreeSet::from([0]));

        let rear = DetectionSet {
            timestamp_us: 0,
            camera: CameraId::Rear,
            image_width: 1024,
            image_height: 1024,
            boxes: vec![bbox(500.0, 524.0, "truck", 0.7)],
        };
        let got = important_azimuth_blocks(&[rear], &cams, &grid, &sel).unwrap();
        assert_eq!(got, BTreeSet::from([4]));
    }

    #[test]
    fn filters_class_and_score() {
        let grid = BlockGrid::default();
        let cams = [CameraModel::front()];
        let set = DetectionSet {
            timestamp_us: 0,
            camera: CameraId::Front,
            image_width: 1280,
            image_height: 960,
            boxes: vec![bbox(620.0, 660.0, "dog", 0.99), bbox(620.0, 660.0, "car", 0.3)],
        };
        let got = important_azimuth_blocks(&[set], &cams, &grid, &AzimuthSelection::default()).unwrap();
        assert!(got.is_empty());
    }

    #[test]
    fn spreading_marks_straddled_blocks() {
        let grid = BlockGrid::default();
        let cams = [CameraModel::rear()];
        // Columns 400..700 of the rear image cover roughly 160°..213°.
        let set = DetectionSet {
            timestamp_us: 0,
            camera: CameraId::Rear,
            image_width: 1024,
            image_height: 1024,
            boxes: vec![bbox(420.0, 700.0, "car", 0.9)],
        };
        let centre_only = important_azimuth_blocks(&[set.clone()], &cams, &grid, &AzimuthSelection::default()).unwrap();
        assert_eq!(centre_only, BTreeSet::from([4]));
        let sel = AzimuthSelection {
            spread_boxes: true,
            ..AzimuthSelection::default()
        };
        let spread = important_azimuth_blocks(&[set], &cams, &grid, &sel).unwrap();
        assert_eq!(spread, BTreeSet::from([3, 4]));
    }

    #[test]
    fn blind_spot_is_unreachable_and_mapping_monotone() {
        for cam in [CameraModel::front(), CameraModel::rear()] {
            let w = cam.image_width_px as f64;
            let mut prev = f64::NEG_INFINITY;
            for i in 0..=10_000 {
                let x = w * i as f64 / 10_000.0;
                let az = cam.column_to_azimuth(x);
                assert!(!(az > 33.0 && az < 90.0), "{:?} x={x} az={az}", cam.id);
                assert!(!(az > 270.0 && az < 327.0), "{:?} x={x} az={az}", cam.id);
                // Unwrap relative to boresight before checking monotonicity.
                let unwrapped = signed_offset_deg(az, cam.boresight_deg);
                assert!(unwrapped >= prev - 1e-12);
                prev = unwrapped;
            }
        }
    }
}
