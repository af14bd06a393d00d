//! Reconstruction quality: PSNR, per-block MSE and CFAR detectability.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{BlockGrid, BlockRef, PolarFrame};
use crate::guidance::CfarMap;

/// `10 log10(peak² / MSE)`; `+∞` when the inputs are identical.
pub fn psnr(reference: &[f64], reconstruction: &[f64], peak: Option<f64>) -> Result<f64> {
    let e = mse(reference, reconstruction)?;
    let peak = peak.unwrap_or_else(|| reference.iter().copied().fold(0.0, f64::max));
    if !(peak > 0.0) {
        return Err(Error::Parameter(format!("PSNR peak {peak} must be positive")));
    }
    Ok(psnr_from_mse(e, peak))
}

pub fn psnr_from_mse(mse: f64, peak: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (peak * peak / mse).log10()
    }
}

pub fn mse(reference: &[f64], reconstruction: &[f64]) -> Result<f64> {
    if reference.len() != reconstruction.len() {
        return Err(Error::Dimension {
            context: "PSNR inputs",
            expected: reference.len(),
            got: reconstruction.len(),
        });
    }
    if reference.is_empty() {
        return Err(Error::Parameter("PSNR of empty inputs".into()));
    }
    let sum: f64 = reference
        .iter()
        .zip(reconstruction)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / reference.len() as f64)
}

/// Squared-error sum of every block, in grid linear order.
pub fn block_sse(grid: &BlockGrid, reference: &PolarFrame, recon: &PolarFrame) -> Result<Vec<f64>> {
    grid.blocks()
        .map(|b| {
            let a = grid.extract_block(reference, b)?;
            let r = grid.extract_block(recon, b)?;
            Ok(a.iter().zip(&r).map(|(x, y)| (x - y) * (x - y)).sum())
        })
        .collect()
}

/// PSNR over the union of `blocks` given their squared-error sums.
pub fn blocks_psnr(grid: &BlockGrid, sse: &[f64], blocks: &[BlockRef], peak: f64) -> Option<f64> {
    if blocks.is_empty() {
        return None;
    }
    let total: f64 = blocks.iter().map(|b| sse[grid.linear_index(*b)]).sum();
    Some(psnr_from_mse(total / (blocks.len() * grid.block_len()) as f64, peak))
}

/// Agreement of CFAR hits on a reconstruction with hits on the reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detectability {
    pub reference_hits: usize,
    pub reconstruction_hits: usize,
    /// Fraction of reconstruction hits with a reference hit nearby; `None` without hits.
    pub precision: Option<f64>,
    /// Fraction of reference hits with a reconstruction hit nearby; `None` without hits.
    pub recall: Option<f64>,
}

/// Hits match when both bin offsets are within `radius` (azimuth wraps).
pub fn detectability(reference: &CfarMap, recon: &CfarMap, radius: usize) -> Result<Detectability> {
    if reference.azimuth_bins != recon.azimuth_bins || reference.range_bins != recon.range_bins {
        return Err(Error::Dimension {
            context: "CFAR maps",
            expected: reference.mask.len(),
            got: recon.mask.len(),
        });
    }
    let matched = |hits: &CfarMap, other: &CfarMap| -> (usize, usize) {
        let mut total = 0;
        let mut found = 0;
        for (a, r) in hits.hits() {
            total += 1;
            if near_hit(other, a, r, radius) {
                found += 1;
            }
        }
        (found, total)
    };
    let (tp_recon, n_recon) = matched(recon, reference);
    let (tp_ref, n_ref) = matched(reference, recon);
    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    Ok(Detectability {
        reference_hits: n_ref,
        reconstruction_hits: n_recon,
        precision: ratio(tp_recon, n_recon),
        recall: ratio(tp_ref, n_ref),
    })
}

fn near_hit(map: &CfarMap, a: usize, r: usize, radius: usize) -> bool {
    let (na, nr) = (map.azimuth_bins as isize, map.range_bins as isize);
    let rad = radius as isize;
    for da in -rad..=rad {
        let aa = (a as isize + da).rem_euclid(na) as usize;
        let lo = (r as isize - rad).max(0);
        let hi = (r as isize + rad).min(nr - 1);
        for rr in lo..=hi {
            if map.is_hit(aa, rr as usize) {
                return true;
            }
        }
    }
    false
}

/// Serialises `+∞` PSNR as the string `"inf"` so reports stay valid JSON.
pub mod db {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    fn to_repr(v: f64) -> Repr {
        if v.is_finite() {
            Repr::Num(v)
        } else if v > 0.0 {
            Repr::Text("inf".into())
        } else {
            Repr::Text("-inf".into())
        }
    }

    fn from_repr<E: serde::de::Error>(r: Repr) -> Result<f64, E> {
        match r {
            Repr::Num(v) => Ok(v),
            Repr::Text(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Text(s) if s == "-inf" => Ok(f64::NEG_INFINITY),
            Repr::Text(s) => Err(E::custom(format!("bad dB value {s:?}"))),
        }
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        to_repr(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        from_repr(Repr::deserialize(d)?)
    }

    pub mod option {
        use super::*;

        pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
            v.map(to_repr).serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
            Option::<Repr>::deserialize(d)?.map(from_repr).transpose()
        }
    }
}
