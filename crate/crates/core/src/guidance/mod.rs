//! Where to spend measurements: camera detections mapped to azimuth blocks,
//! and CFAR hits on the previous reconstruction mapped to blocks.

mod camera;
mod cfar;

pub use camera::{
    azimuth_block_of, bbox_to_azimuth, important_azimuth_blocks, signed_offset_deg, wrap_deg,
    AzimuthSelection, BoundingBox, CameraId, CameraModel, DetectionSet,
};
pub use cfar::{cfar_detect, flagged_blocks, CfarMap, CfarParams};
