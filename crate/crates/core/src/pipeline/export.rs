//! 8-bit display renders. Each image is normalised by its own maximum;
//! renders are for viewing only and never feed metrics.

use std::path::Path;

use image::{GrayImage, Luma};

use crate::error::{Error, Result};
use crate::frame::PolarFrame;

/// Display range of the default renders, in metres.
pub const DISPLAY_RANGE_M: f64 = 62.625;

fn display_bins(frame: &PolarFrame, max_range_m: f64) -> Result<usize> {
    if !(max_range_m > 0.0) {
        return Err(Error::Parameter(format!("display range {max_range_m} must be positive")));
    }
    let res = frame.meta().range_resolution_m;
    Ok(((max_range_m / res).ceil() as usize).clamp(1, frame.range_bins()))
}

fn to_gray(v: f64, max: f64) -> u8 {
    if max > 0.0 {
        (v / max * 255.0).round().clamp(0.0, 255.0) as u8
    } else {
        0
    }
}

/// Azimuth rows by range columns, cropped to `max_range_m`.
pub fn render_polar(frame: &PolarFrame, max_range_m: f64) -> Result<GrayImage> {
    let nr = display_bins(frame, max_range_m)?;
    let na = frame.azimuth_bins();
    let max = (0..na)
        .flat_map(|a| frame.row(a)[..nr].iter().copied())
        .fold(0.0, f64::max);
    Ok(GrayImage::from_fn(nr as u32, na as u32, |x, y| {
        Luma([to_gray(frame.get(y as usize, x as usize), max)])
    }))
}

/// Top-down view, radar at the centre, 0° azimuth pointing up and azimuth
/// increasing clockwise. Nearest-bin sampling.
pub fn render_cartesian(frame: &PolarFrame, max_range_m: f64, size_px: u32) -> Result<GrayImage> {
    if size_px == 0 {
        return Err(Error::Parameter("image size must be positive".into()));
    }
    let nr = display_bins(frame, max_range_m)?;
    let meta = frame.meta();
    let half = size_px as f64 / 2.0;
    let m_per_px = max_range_m / half;
    let lookup = |x: u32, y: u32| -> Option<f64> {
        let east = (x as f64 + 0.5 - half) * m_per_px;
        let north = (half - (y as f64 + 0.5)) * m_per_px;
        let r = east.hypot(north);
        if r > max_range_m {
            return None;
        }
        let az = east.atan2(north).to_degrees().rem_euclid(360.0);
        let a = ((az / meta.azimuth_resolution_deg) as usize).min(meta.azimuth_bins - 1);
        let rb = (r / meta.range_resolution_m) as usize;
        (rb < nr).then(|| frame.get(a, rb))
    };
    let mut max = 0.0f64;
    for y in 0..size_px {
        for x in 0..size_px {
            if let Some(v) = lookup(x, y) {
                max = max.max(v);
            }
        }
    }
    Ok(GrayImage::from_fn(size_px, size_px, |x, y| {
        Luma([lookup(x, y).map_or(0, |v| to_gray(v, max))])
    }))
}

pub fn save_png(img: &GrayImage, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::format(path, e))
}
