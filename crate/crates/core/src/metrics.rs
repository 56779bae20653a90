//! PSNR and SSIM.

use std::io::Write;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::fft::Image;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    /// `f64::INFINITY` when the images are identical.
    pub psnr_db: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Peak {
    /// Maximum of the reference image.
    Auto,
    Value(f64),
}

fn same_dims(a: &Image, b: &Image) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::InvalidDimension(format!(
            "reference {:?} vs test {:?}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

pub fn mse(reference: &Image, test: &Image) -> Result<f64> {
    same_dims(reference, test)?;
    let sum: f64 = reference
        .data()
        .iter()
        .zip(test.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / reference.data().len() as f64)
}

/// `10 log10(peak^2 / MSE)`, infinite for identical images.
pub fn psnr(reference: &Image, test: &Image, peak: Peak) -> Result<f64> {
    let peak = match peak {
        Peak::Auto => reference.max(),
        Peak::Value(v) => v,
    };
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(Error::ParameterRange(format!("PSNR peak {peak} must be positive")));
    }
    let e = mse(reference, test)?;
    if e == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / e).log10())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimParams {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    /// Dynamic range; `None` uses the reference maximum.
    pub dynamic_range: Option<f64>,
}

impl Default for SsimParams {
    fn default() -> Self {
        SsimParams {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: None,
        }
    }
}

fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let w: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - c;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Separable weighted filter over windows lying fully inside the image.
fn filter_valid(x: &Array2<f64>, k: &[f64]) -> Array2<f64> {
    let (rows, cols) = x.dim();
    let n = k.len();
    let (orow, ocol) = (rows + 1 - n, cols + 1 - n);
    let horiz = Array2::from_shape_fn((rows, ocol), |(r, c)| {
        k.iter().enumerate().map(|(t, w)| w * x[[r, c + t]]).sum::<f64>()
    });
    Array2::from_shape_fn((orow, ocol), |(r, c)| {
        k.iter().enumerate().map(|(t, w)| w * horiz[[r + t, c]]).sum::<f64>()
    })
}

/// Mean structural similarity over Gaussian-weighted windows.
///
/// Only windows fully inside the image contribute. If the dynamic range
/// resolves to zero (an all-zero reference), a range of 1 is used instead.
pub fn ssim(reference: &Image, test: &Image, params: &SsimParams) -> Result<f64> {
    same_dims(reference, test)?;
    let (rows, cols) = reference.dim();
    if params.window == 0 || rows < params.window || cols < params.window {
        return Err(Error::InvalidDimension(format!(
            "{rows}x{cols} image is smaller than the {} pixel SSIM window",
            params.window
        )));
    }
    let mut range = params.dynamic_range.unwrap_or_else(|| reference.max());
    if range <= 0.0 {
        range = 1.0;
    }
    let c1 = (params.k1 * range).powi(2);
    let c2 = (params.k2 * range).powi(2);
    let kernel = gaussian_kernel(params.window, params.sigma);

    let x = reference.data();
    let y = test.data();
    let mu_x = filter_valid(x, &kernel);
    let mu_y = filter_valid(y, &kernel);
    let xx = filter_valid(&(x * x), &kernel);
    let yy = filter_valid(&(y * y), &kernel);
    let xy = filter_valid(&(x * y), &kernel);

    let mut total = 0.0;
    for (((&mx, &my), (&sxx, &syy)), &sxy) in mu_x
        .iter()
        .zip(&mu_y)
        .zip(xx.iter().zip(&yy))
        .zip(&xy)
    {
        let var_x = sxx - mx * mx;
        let var_y = syy - my * my;
        let cov = sxy - mx * my;
        let num = (2.0 * mx * my + c1) * (2.0 * cov + c2);
        let den = (mx * mx + my * my + c1) * (var_x + var_y + c2);
        total += if num == den { 1.0 } else { num / den };
    }
    Ok(total / mu_x.len() as f64)
}

pub fn evaluate(reference: &Image, test: &Image) -> Result<MetricReport> {
    Ok(MetricReport {
        psnr_db: psnr(reference, test, Peak::Auto)?,
        ssim: ssim(reference, test, &SsimParams::default())?,
    })
}

pub const CSV_HEADER: &str = "file,psnr_db,ssim";

/// Formats PSNR for reports, `inf` for identical images.
pub fn format_psnr(psnr_db: f64) -> String {
    if psnr_db.is_infinite() {
        "inf".to_string()
    } else {
        format!("{psnr_db:.6}")
    }
}

/// Writes `file,psnr_db,ssim` rows under a header line.
pub fn write_csv<W: Write>(rows: &[(String, MetricReport)], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for (name, r) in rows {
        writeln!(out, "{},{},{:.9}", name, format_psnr(r.psnr_db), r.ssim)?;
    }
    Ok(())
}
