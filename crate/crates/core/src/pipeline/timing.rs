//! Camera-to-radar frame association.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::guidance::CameraId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingConfig {
    pub radar_period_s: f64,
    pub detection_latency_s: f64,
    /// Images must be at least this old at radar acquisition time.
    pub lead_s: f64,
    pub front_rate_hz: f64,
    pub rear_rate_hz: f64,
}

impl Default for TimingConfig {
    fn default() -> Self {
        TimingConfig {
            radar_period_s: 0.25,
            detection_latency_s: 0.12,
            lead_s: 0.18,
            front_rate_hz: 16.0,
            rear_rate_hz: 17.0,
        }
    }
}

impl TimingConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("radar_period_s", self.radar_period_s),
            ("front_rate_hz", self.front_rate_hz),
            ("rear_rate_hz", self.rear_rate_hz),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Parameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.detection_latency_s.is_finite() && self.detection_latency_s >= 0.0) {
            return Err(Error::Parameter(format!(
                "detection_latency_s must be >= 0, got {}",
                self.detection_latency_s
            )));
        }
        if !(self.lead_s.is_finite() && self.lead_s >= self.detection_latency_s) {
            return Err(Error::Parameter(format!(
                "lead_s {} must be at least the detection latency {}",
                self.lead_s, self.detection_latency_s
            )));
        }
        Ok(())
    }

    pub fn lead_us(&self) -> i64 {
        seconds_to_us(self.lead_s)
    }

    pub fn radar_period_us(&self) -> i64 {
        seconds_to_us(self.radar_period_s)
    }

    pub fn camera_rate_hz(&self, camera: CameraId) -> f64 {
        match camera {
            CameraId::Front => self.front_rate_hz,
            CameraId::Rear => self.rear_rate_hz,
        }
    }
}

pub fn seconds_to_us(s: f64) -> i64 {
    (s * 1e6).round() as i64
}

/// For each camera, the latest image timestamp at or before
/// `radar_timestamp_us − lead`. Cameras with no such image are left out.
pub fn associate(
    camera_timestamps: &BTreeMap<CameraId, Vec<i64>>,
    radar_timestamp_us: i64,
    timing: &TimingConfig,
) -> BTreeMap<CameraId, i64> {
    let cutoff = radar_timestamp_us - timing.lead_us();
    let mut out = BTreeMap::new();
    for (&cam, stamps) in camera_timestamps {
        match stamps.iter().copied().filter(|&t| t <= cutoff).max() {
            Some(t) => {
                out.insert(cam, t);
            }
            None => log::debug!("no {cam} image at or before {cutoff} us"),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(rate_hz: f64, until_s: f64) -> Vec<i64> {
        (0..)
            .map(|k| seconds_to_us(k as f64 / rate_hz))
            .take_while(|&t| t <= seconds_to_us(until_s))
            .collect()
    }

    #[test]
    fn latest_before_cutoff() {
        let stamps = BTreeMap::from([(CameraId::Front, grid(16.0, 2.0))]);
        let got = associate(&stamps, 1_000_000, &TimingConfig::default());
        assert_eq!(got[&CameraId::Front], 812_500);
    }

    #[test]
    fn nothing_precedes() {
        let stamps = BTreeMap::from([(CameraId::Front, grid(16.0, 2.0)), (CameraId::Rear, grid(17.0, 2.0))]);
        assert!(associate(&stamps, 100_000, &TimingConfig::default()).is_empty());
    }

    #[test]
    fn zero_lead_is_inclusive() {
        let timing = TimingConfig {
            lead_s: 0.0,
            detection_latency_s: 0.0,
            ..TimingConfig::default()
        };
        timing.validate().unwrap();
        let stamps = BTreeMap::from([(CameraId::Rear, vec![0, 500_000, 750_000])]);
        assert_eq!(associate(&stamps, 750_000, &timing)[&CameraId::Rear], 750_000);
    }

    #[test]
    fn lead_below_latency_rejected() {
        let timing = TimingConfig {
            lead_s: 0.1,
            ..TimingConfig::default()
        };
        assert!(timing.validate().is_err());
    }
}
