//! Reconstruction of a full image from subsampled k-space.
//!
//! Every reconstructor maps `(subsampled k-space, mask)` to a magnitude
//! image of the same size. Two classical operators are provided: plain
//! zero-filling and ISTA with a Haar sparsity prior.

pub mod haar;
pub mod ista;

use std::fmt;

pub use ista::{ista_solve, soft_threshold, IstaOutcome, IstaParams, Lambda};

use crate::error::Result;
use crate::fft::{inverse, Image, KSpace};
use crate::sampling::{apply_mask, SamplingMask};

/// Maps a subsampled spectrum to a full-size magnitude image.
///
/// Implementations must be deterministic for fixed inputs.
pub trait Reconstructor: Send + Sync + fmt::Debug {
    fn reconstruct(&self, kspace_sub: &KSpace, mask: &SamplingMask) -> Result<Image>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReconKind {
    ZeroFilled,
    Ista,
}

/// Built-in reconstructors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Recon {
    ZeroFilled,
    Ista(IstaParams),
}

impl Recon {
    pub fn kind(&self) -> ReconKind {
        match self {
            Recon::ZeroFilled => ReconKind::ZeroFilled,
            Recon::Ista(_) => ReconKind::Ista,
        }
    }
}

impl Reconstructor for Recon {
    fn reconstruct(&self, kspace_sub: &KSpace, mask: &SamplingMask) -> Result<Image> {
        match self {
            Recon::ZeroFilled => zero_filled(kspace_sub, mask),
            Recon::Ista(p) => ista_reconstruct(kspace_sub, mask, p),
        }
    }
}

/// Magnitude of the inverse transform with dropped lines set to zero.
/// No density compensation is applied.
pub fn zero_filled(kspace_sub: &KSpace, mask: &SamplingMask) -> Result<Image> {
    inverse(&apply_mask(kspace_sub, mask)?)
}

pub fn ista_reconstruct(kspace_sub: &KSpace, mask: &SamplingMask, params: &IstaParams) -> Result<Image> {
    let out = ista::solve(kspace_sub, mask, params, false)?;
    Image::from_array(out.image.mapv(|v| v.norm()))
}
