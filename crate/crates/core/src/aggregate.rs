//! Bootstrap subsampling and convex aggregation of branch reconstructions.
//!
//! Each branch keeps a random subset of phase-encoding lines, so some of the
//! motion-corrupted lines are missing from it; the branch images are then
//! averaged with non-negative weights summing to one. For any reference
//! image the squared error of the average never exceeds the weighted mean of
//! the branch errors (Jensen), which [`jensen_check`] verifies numerically.

use std::io::Write;
use std::sync::Arc;

use ndarray::{Array2, Zip};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fft::{forward, Image, KSpace};
use crate::recon::Reconstructor;
use crate::sampling::{apply_mask, gaussian_mask, MaskParams, SamplingMask};

pub const DEFAULT_BRANCHES: usize = 15;
pub const DEFAULT_BASE_SEED: u64 = 42;

const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct AggregationConfig {
    pub branches: usize,
    pub weights: Vec<f64>,
    pub base_seed: u64,
    pub mask_params: MaskParams,
    pub recon: Arc<dyn Reconstructor>,
    /// Keep every branch image in the result.
    pub keep_branch_images: bool,
}

impl AggregationConfig {
    /// Uniform weights `1 / branches`.
    pub fn uniform(
        branches: usize,
        mask_params: MaskParams,
        recon: Arc<dyn Reconstructor>,
        base_seed: u64,
    ) -> Self {
        AggregationConfig {
            branches,
            weights: vec![1.0 / branches.max(1) as f64; branches],
            base_seed,
            mask_params,
            recon,
            keep_branch_images: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.branches == 0 {
            return Err(Error::Config("at least one branch is required".into()));
        }
        if self.weights.len() != self.branches {
            return Err(Error::Config(format!(
                "{} weights for {} branches",
                self.weights.len(),
                self.branches
            )));
        }
        check_weights(&self.weights)?;
        self.mask_params.validate()
    }

    /// Mask seed of branch `n` (1-based).
    pub fn branch_seed(&self, n: usize) -> u64 {
        self.base_seed.wrapping_add(n as u64)
    }
}

pub fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::Config("empty weight vector".into()));
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
        return Err(Error::Config(format!("weight {w} is negative or not finite")));
    }
    let sum = neumaier(weights.iter().copied());
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::Config(format!("weights sum to {sum}, expected 1")));
    }
    Ok(())
}

/// Compensated (Neumaier) sum in iteration order.
pub fn neumaier(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Pixelwise `sum_n w_n x_n`, evaluated as `x_1 + sum_n w_n (x_n - x_1)` with
/// compensated summation in branch order. Identical inputs reproduce `x_1`
/// exactly.
pub fn weighted_sum(images: &[Image], weights: &[f64]) -> Result<Image> {
    if images.len() != weights.len() {
        return Err(Error::Config(format!(
            "{} images for {} weights",
            images.len(),
            weights.len()
        )));
    }
    check_weights(weights)?;
    let reference = &images[0];
    let dim = reference.dim();
    if let Some(bad) = images.iter().find(|im| im.dim() != dim) {
        return Err(Error::InvalidDimension(format!(
            "branch image {:?} differs from {:?}",
            bad.dim(),
            dim
        )));
    }
    let mut out = Array2::zeros(dim);
    Zip::indexed(&mut out).for_each(|idx, o| {
        let base = reference.data()[idx];
        let delta = neumaier(
            images
                .iter()
                .zip(weights)
                .map(|(im, &w)| w * (im.data()[idx] - base)),
        );
        *o = base + delta;
    });
    Image::from_array(out)
}

#[derive(Debug, Clone)]
pub struct AggregationResult {
    pub corrected: Image,
    pub branch_images: Option<Vec<Image>>,
    pub branch_masks: Vec<SamplingMask>,
}

/// Corrects a motion-corrupted magnitude image by bootstrap aggregation.
pub fn bootstrap_correct(corrupted: &Image, config: &AggregationConfig) -> Result<AggregationResult> {
    config.validate()?;
    bootstrap_correct_kspace(&forward(corrupted)?, config)
}

/// Same as [`bootstrap_correct`] starting from measured k-space.
///
/// Branches may run on the rayon pool; the reduction always happens in
/// branch order, so the result does not depend on scheduling.
pub fn bootstrap_correct_kspace(kspace: &KSpace, config: &AggregationConfig) -> Result<AggregationResult> {
    config.validate()?;
    let n_lines = config.mask_params.direction.axis_len(kspace.dim());
    let branches: Vec<(SamplingMask, Image)> = (1..=config.branches)
        .into_par_iter()
        .map(|n| {
            let mask = gaussian_mask(n_lines, &config.mask_params, config.branch_seed(n))?;
            let sub = apply_mask(kspace, &mask)?;
            let image = config.recon.reconstruct(&sub, &mask)?;
            if image.dim() != kspace.dim() {
                return Err(Error::InvalidDimension(format!(
                    "reconstructor returned {:?} for a {:?} grid",
                    image.dim(),
                    kspace.dim()
                )));
            }
            Ok((mask, image))
        })
        .collect::<Result<_>>()?;

    let (branch_masks, images): (Vec<_>, Vec<_>) = branches.into_iter().unzip();
    let corrected = weighted_sum(&images, &config.weights)?;
    Ok(AggregationResult {
        corrected,
        branch_images: config.keep_branch_images.then_some(images),
        branch_masks,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JensenReport {
    /// Weighted mean of the per-estimate squared errors.
    pub lhs: f64,
    /// Squared error of the weighted mean estimate.
    pub rhs: f64,
    pub holds: bool,
}

impl JensenReport {
    pub fn gap(&self) -> f64 {
        self.rhs - self.lhs
    }

    /// One CSV row `lhs,rhs,holds`.
    pub fn write_csv_row<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{},{},{}", self.lhs, self.rhs, self.holds)
    }
}

fn squared_distance(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    neumaier(a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)))
}

/// Compares the weighted mean branch error with the error of the aggregate.
///
/// Both sides are accumulated relative to the first estimate, so when all
/// estimates coincide the two sides are bit-identical.
pub fn jensen_check(x_star: &Image, estimates: &[Image], weights: &[f64]) -> Result<JensenReport> {
    if estimates.is_empty() {
        return Err(Error::Config("no estimates".into()));
    }
    if estimates.iter().any(|e| e.dim() != x_star.dim()) {
        return Err(Error::InvalidDimension("estimates and reference differ in size".into()));
    }
    let aggregate = weighted_sum(estimates, weights)?;
    let errors: Vec<f64> = estimates
        .iter()
        .map(|e| squared_distance(x_star.data(), e.data()))
        .collect();
    let lhs = errors[0] + neumaier(weights.iter().zip(&errors).map(|(w, e)| w * (e - errors[0])));
    let rhs = squared_distance(x_star.data(), aggregate.data());
    Ok(JensenReport {
        lhs,
        rhs,
        holds: lhs >= rhs - 1e-9 * lhs,
    })
}
