//! Quality metrics for reconstructed `M×N×S` cubes.
//!
//! PSNR uses a per-band peak, the maximum absolute value of the reference
//! band. The hypercomplex Q2ⁿ index is not implemented; the band-averaged
//! universal image quality index (UIQI) is reported in its place under its
//! own name.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

/// Value reported when a band is reconstructed exactly.
pub const PSNR_CAP_DB: f64 = 300.0;
pub const DEFAULT_UIQI_WINDOW: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub psnr_db: f64,
    pub psnr_per_band: Vec<f64>,
    pub sam_deg: f64,
    pub ergas: f64,
    pub uiqi: f64,
    pub p: f64,
}

impl MetricReport {
    /// All four metrics; the UIQI window shrinks to the image when the image is smaller.
    pub fn compute(reference: &DenseTensor, estimate: &DenseTensor, p: f64) -> Result<Self> {
        let (m, n, _) = cube_dims(reference)?;
        let window = DEFAULT_UIQI_WINDOW.min(m).min(n);
        let psnr = psnr(reference, estimate)?;
        Ok(MetricReport {
            psnr_db: psnr.mean_db,
            psnr_per_band: psnr.per_band_db,
            sam_deg: sam(reference, estimate)?.mean_deg,
            ergas: ergas(reference, estimate, p)?,
            uiqi: uiqi(reference, estimate, window)?,
            p,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Psnr {
    pub per_band_db: Vec<f64>,
    pub mean_db: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sam {
    pub mean_deg: f64,
    /// Pixels left out because one of the spectra had zero norm.
    pub skipped: usize,
}

fn cube_dims(x: &DenseTensor) -> Result<(usize, usize, usize)> {
    match x.shape() {
        [m, n, s] => Ok((*m, *n, *s)),
        s => Err(Error::shape(format!("expected an M×N×S cube, got {s:?}"))),
    }
}

fn check_pair(reference: &DenseTensor, estimate: &DenseTensor) -> Result<(usize, usize, usize)> {
    if reference.shape() != estimate.shape() {
        return Err(Error::shape(format!(
            "reference {:?} and estimate {:?} differ in shape",
            reference.shape(),
            estimate.shape()
        )));
    }
    cube_dims(reference)
}

fn bands(x: &DenseTensor, pixels: usize) -> impl Iterator<Item = &[f64]> {
    x.data().chunks(pixels)
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

pub fn psnr(reference: &DenseTensor, estimate: &DenseTensor) -> Result<Psnr> {
    let (m, n, _) = check_pair(reference, estimate)?;
    let pixels = m * n;
    let per_band_db: Vec<f64> = bands(reference, pixels)
        .zip(bands(estimate, pixels))
        .map(|(r, e)| {
            let err = mse(r, e);
            if err == 0.0 {
                return PSNR_CAP_DB;
            }
            let peak = r.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            (10.0 * (peak * peak / err).log10()).min(PSNR_CAP_DB)
        })
        .collect();
    let mean_db = per_band_db.iter().sum::<f64>() / per_band_db.len() as f64;
    Ok(Psnr { per_band_db, mean_db })
}

pub fn sam(reference: &DenseTensor, estimate: &DenseTensor) -> Result<Sam> {
    let (m, n, s) = check_pair(reference, estimate)?;
    let pixels = m * n;
    let (r, e) = (reference.data(), estimate.data());
    let mut total = 0.0;
    let mut counted = 0usize;
    for px in 0..pixels {
        let (mut rr, mut ee) = (0.0, 0.0);
        for b in 0..s {
            let (a, c) = (r[px + b * pixels], e[px + b * pixels]);
            rr += a * a;
            ee += c * c;
        }
        if rr == 0.0 || ee == 0.0 {
            continue;
        }
        // angle between unit vectors as 2·atan2(‖a−c‖, ‖a+c‖), accurate near 0 and 180°
        let (rn, en) = (rr.sqrt(), ee.sqrt());
        let (mut diff, mut sum) = (0.0, 0.0);
        for b in 0..s {
            let (a, c) = (r[px + b * pixels] / rn, e[px + b * pixels] / en);
            diff += (a - c) * (a - c);
            sum += (a + c) * (a + c);
        }
        total += (2.0 * diff.sqrt().atan2(sum.sqrt())).to_degrees();
        counted += 1;
    }
    if counted < pixels {
        log::warn!("SAM skipped {} zero-norm pixels", pixels - counted);
    }
    let mean_deg = if counted == 0 { 0.0 } else { total / counted as f64 };
    Ok(Sam { mean_deg, skipped: pixels - counted })
}

/// `100/p · sqrt(mean_b MSE_b / mean(ref_b)²)`; bands with zero reference mean are skipped.
pub fn ergas(reference: &DenseTensor, estimate: &DenseTensor, p: f64) -> Result<f64> {
    let (m, n, _) = check_pair(reference, estimate)?;
    if p.is_nan() || p <= 0.0 {
        return Err(Error::invalid(format!("ERGAS ratio must be positive, got {p}")));
    }
    let pixels = m * n;
    let mut acc = 0.0;
    let mut used = 0usize;
    for (b, (r, e)) in bands(reference, pixels).zip(bands(estimate, pixels)).enumerate() {
        let mean = r.iter().sum::<f64>() / pixels as f64;
        if mean == 0.0 {
            log::warn!("ERGAS: band {b} has zero mean; skipped");
            continue;
        }
        acc += mse(r, e) / (mean * mean);
        used += 1;
    }
    if used == 0 {
        return Err(Error::invalid("ERGAS undefined: every reference band has zero mean"));
    }
    Ok(100.0 / p * (acc / used as f64).sqrt())
}

/// Universal image quality index of two equally sized blocks, or `None`
/// when the denominator vanishes.
pub fn uiqi_block(x: &[f64], y: &[f64]) -> Option<f64> {
    let k = x.len() as f64;
    if x.len() < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
        cxy += (a - mx) * (b - my);
    }
    let norm = 1.0 / (k - 1.0);
    let (vx, vy, cxy) = (vx * norm, vy * norm, cxy * norm);
    let denom = (vx + vy) * (mx * mx + my * my);
    if denom == 0.0 {
        return None;
    }
    Some(4.0 * cxy * mx * my / denom)
}

/// Mean over bands of the mean UIQI over disjoint `window×window` blocks.
pub fn uiqi(reference: &DenseTensor, estimate: &DenseTensor, window: usize) -> Result<f64> {
    let (m, n, _) = check_pair(reference, estimate)?;
    if window == 0 || window > m.min(n) {
        return Err(Error::invalid(format!(
            "UIQI window {window} must be between 1 and the smaller spatial extent {}",
            m.min(n)
        )));
    }
    let pixels = m * n;
    let mut band_values = Vec::new();
    let mut bx = Vec::with_capacity(window * window);
    let mut by = Vec::with_capacity(window * window);
    for (r, e) in bands(reference, pixels).zip(bands(estimate, pixels)) {
        let mut sum = 0.0;
        let mut count = 0usize;
        for j0 in (0..=n - window).step_by(window) {
            for i0 in (0..=m - window).step_by(window) {
                bx.clear();
                by.clear();
                for j in j0..j0 + window {
                    for i in i0..i0 + window {
                        bx.push(r[i + j * m]);
                        by.push(e[i + j * m]);
                    }
                }
                if let Some(q) = uiqi_block(&bx, &by) {
                    sum += q;
                    count += 1;
                }
            }
        }
        if count > 0 {
            band_values.push(sum / count as f64);
        }
    }
    if band_values.is_empty() {
        return Err(Error::invalid("UIQI undefined: every block is degenerate"));
    }
    Ok(band_values.iter().sum::<f64>() / band_values.len() as f64)
}
