//! Frame, detection and JSON file formats.
//!
//! A frame is a 16-bit grayscale PNG (azimuth rows, range columns) next to a
//! JSON sidecar with the same stem. Pixel `p` decodes to `p * scale`, where
//! `scale` is the smallest power of two that fits the frame maximum into 16
//! bits. Decoding is exact in `f64`, so quantising a decoded frame again
//! reproduces it bit for bit.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use image::{ImageBuffer, ImageError, Luma};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{FrameMeta, PolarFrame};
use crate::guidance::DetectionSet;

const PIXEL_MAX: f64 = u16::MAX as f64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameSidecar {
    pub azimuth_bins: usize,
    pub range_bins: usize,
    pub range_resolution_m: f64,
    pub azimuth_resolution_deg: f64,
    pub timestamp_us: i64,
    pub scale: f64,
}

impl FrameSidecar {
    fn meta(&self) -> FrameMeta {
        FrameMeta {
            azimuth_bins: self.azimuth_bins,
            range_bins: self.range_bins,
            range_resolution_m: self.range_resolution_m,
            azimuth_resolution_deg: self.azimuth_resolution_deg,
            timestamp_us: self.timestamp_us,
        }
    }
}

pub fn sidecar_path(png: &Path) -> PathBuf {
    png.with_extension("json")
}

/// 16-bit codes and their power-of-two scale.
pub fn quantize(frame: &PolarFrame) -> (Vec<u16>, f64) {
    let max = frame.max_value();
    let scale = if max > 0.0 { pow2_scale(max) } else { 1.0 };
    let codes = frame
        .data()
        .iter()
        .map(|&v| (v / scale).round().clamp(0.0, PIXEL_MAX) as u16)
        .collect();
    (codes, scale)
}

fn pow2_scale(max: f64) -> f64 {
    let mut scale = 2f64.powi((max / PIXEL_MAX).log2().ceil() as i32);
    // Guard the log against rounding on either side.
    while (max / scale).round() > PIXEL_MAX {
        scale *= 2.0;
    }
    while (max / (scale * 0.5)).round() <= PIXEL_MAX {
        scale *= 0.5;
    }
    scale
}

/// The frame exactly as it reads back after [`write_frame`].
pub fn quantized(frame: &PolarFrame) -> PolarFrame {
    let (codes, scale) = quantize(frame);
    let data = codes.iter().map(|&c| c as f64 * scale).collect();
    PolarFrame::new(*frame.meta(), data).expect("dequantised values are finite and non-negative")
}

pub fn write_frame(frame: &PolarFrame, png: &Path) -> Result<()> {
    let (codes, scale) = quantize(frame);
    let meta = frame.meta();
    let img: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(meta.range_bins as u32, meta.azimuth_bins as u32, codes)
            .expect("buffer length matches frame dims");
    ensure_parent(png)?;
    img.save_with_format(png, image::ImageFormat::Png)
        .map_err(|e| image_error(png, e))?;
    let sidecar = FrameSidecar {
        azimuth_bins: meta.azimuth_bins,
        range_bins: meta.range_bins,
        range_resolution_m: meta.range_resolution_m,
        azimuth_resolution_deg: meta.azimuth_resolution_deg,
        timestamp_us: meta.timestamp_us,
        scale,
    };
    write_json(&sidecar_path(png), &sidecar)
}

pub fn read_frame(png: &Path) -> Result<PolarFrame> {
    let sidecar: FrameSidecar = read_json(&sidecar_path(png))?;
    if !(sidecar.scale.is_finite() && sidecar.scale > 0.0) {
        return Err(Error::format(png, format!("sidecar scale {} must be positive", sidecar.scale)));
    }
    let img = image::open(png).map_err(|e| image_error(png, e))?.into_luma16();
    let (w, h) = img.dimensions();
    if w as usize != sidecar.range_bins || h as usize != sidecar.azimuth_bins {
        return Err(Error::format(
            png,
            format!(
                "image is {w}x{h}, sidecar declares {} range x {} azimuth bins",
                sidecar.range_bins, sidecar.azimuth_bins
            ),
        ));
    }
    let data = img.into_raw().into_iter().map(|c| c as f64 * sidecar.scale).collect();
    PolarFrame::new(sidecar.meta(), data).map_err(|e| Error::format(png, e.to_string()))
}

pub fn read_detections(path: &Path) -> Result<Vec<DetectionSet>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let set: DetectionSet = serde_json::from_str(&line)
            .map_err(|e| Error::format(path, format!("line {}: {e}", lineno + 1)))?;
        set.validate()
            .map_err(|e| Error::format(path, format!("line {}: {e}", lineno + 1)))?;
        out.push(set);
    }
    Ok(out)
}

pub fn write_detections(path: &Path, sets: &[DetectionSet]) -> Result<()> {
    ensure_parent(path)?;
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for set in sets {
        let line = serde_json::to_string(set).expect("detections serialise");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::format(path, e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
        }
        _ => Ok(()),
    }
}

fn image_error(path: &Path, e: ImageError) -> Error {
    match e {
        ImageError::IoError(io) => Error::io(path, io),
        other => Error::format(path, other.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::guidance::{BoundingBox, CameraId};

    fn frame() -> PolarFrame {
        let meta = FrameMeta::full_sweep(8, 30, 0.5).with_timestamp(1234);
        let data = (0..240).map(|i| (i as f64 * 0.37).sin().abs() * 90.0).collect();
        PolarFrame::new(meta, data).unwrap()
    }

    #[test]
    fn frame_round_trip_matches_quantized() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.png");
        let f = frame();
        write_frame(&f, &path).unwrap();
        let back = read_frame(&path).unwrap();
        assert_eq!(back, quantized(&f));
        assert_eq!(back.timestamp_us(), 1234);
        let step = quantize(&f).1;
        assert!(step < 2.0 * f.max_value() / PIXEL_MAX);
        for (a, b) in back.data().iter().zip(f.data()) {
            assert!((a - b).abs() <= 0.5 * step + 1e-12);
        }
        // Quantisation is idempotent.
        assert_eq!(quantized(&back), back);
    }

    #[test]
    fn requantising_is_exact() {
        for peak in [1e-7, 0.37, 1.0, 65535.0, 65536.0, 3.3e5, 7.77e12] {
            let meta = FrameMeta::full_sweep(3, 7, 1.0);
            let data = (0..21).map(|i| peak * (i as f64 / 20.0).powf(1.7)).collect();
            let f = PolarFrame::new(meta, data).unwrap();
            let (codes, scale) = quantize(&f);
            assert_eq!(scale.log2().fract(), 0.0, "{scale}");
            assert!(codes.iter().copied().max().unwrap() > u16::MAX / 2, "{peak}");
            let q = quantized(&f);
            assert_eq!(quantized(&q), q, "{peak}");
        }
    }

    #[test]
    fn zero_frame_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("z.png");
        let f = PolarFrame::zeros(FrameMeta::full_sweep(4, 5, 1.0)).unwrap();
        write_frame(&f, &path).unwrap();
        assert_eq!(read_frame(&path).unwrap(), f);
    }

    #[test]
    fn missing_sidecar_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = read_frame(&dir.path().join("nope.png")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }), "{err}");
    }

    #[test]
    fn detections_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        let sets = vec![DetectionSet {
            timestamp_us: 62_500,
            camera: CameraId::Front,
            image_width: 1280,
            image_height: 960,
            boxes: vec![BoundingBox {
                x1: 600.0,
                y1: 400.0,
                x2: 680.0,
                y2: 500.0,
                class_label: "car".into(),
                score: 0.9,
            }],
        }];
        write_detections(&path, &sets).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"camera\":\"front\"") && text.contains("\"class\":\"car\""));
        assert_eq!(read_detections(&path).unwrap(), sets);
    }
}
