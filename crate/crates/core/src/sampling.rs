//! 1D variable-density line masks and outlier-rejection bookkeeping.

use std::fmt;
use std::str::FromStr;

use ndarray::Axis;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fft::{center_index, KSpace};
use crate::motion::MotionTrace;

/// Which k-space axis a mask removes lines from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Direction {
    /// Drop whole phase-encoding columns (axis 1).
    #[default]
    PhaseEncode,
    /// Drop whole read-out rows (axis 0).
    FrequencyEncode,
}

impl Direction {
    pub fn axis(self) -> Axis {
        match self {
            Direction::PhaseEncode => Axis(1),
            Direction::FrequencyEncode => Axis(0),
        }
    }

    /// Length of the masked axis for a grid of shape `(n_fe, n_pe)`.
    pub fn axis_len(self, dim: (usize, usize)) -> usize {
        match self {
            Direction::PhaseEncode => dim.1,
            Direction::FrequencyEncode => dim.0,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::PhaseEncode => "pe",
            Direction::FrequencyEncode => "fe",
        })
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pe" | "phase_encode" | "phase-encode" => Ok(Direction::PhaseEncode),
            "fe" | "frequency_encode" | "frequency-encode" => Ok(Direction::FrequencyEncode),
            _ => Err(Error::Config(format!("unknown direction '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskParams {
    /// Acceleration factor R; `round(n / R)` lines are kept.
    pub accel: f64,
    /// Fraction of lines forming the always-sampled central ACS block.
    pub acs_frac: f64,
    /// Gaussian density width as a fraction of the axis length.
    pub sigma_frac: f64,
    pub direction: Direction,
}

pub const ACS_FRAC_BRAIN: f64 = 0.06;
pub const ACS_FRAC_LIVER: f64 = 0.11;
pub const DEFAULT_SIGMA_FRAC: f64 = 0.25;
pub const DEFAULT_ACCEL: f64 = 3.0;

impl Default for MaskParams {
    fn default() -> Self {
        MaskParams {
            accel: DEFAULT_ACCEL,
            acs_frac: ACS_FRAC_LIVER,
            sigma_frac: DEFAULT_SIGMA_FRAC,
            direction: Direction::PhaseEncode,
        }
    }
}

impl MaskParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.accel >= 1.0 && self.accel.is_finite()) {
            return Err(Error::ParameterRange(format!(
                "acceleration {} must be finite and >= 1",
                self.accel
            )));
        }
        if !(0.0..=1.0).contains(&self.acs_frac) {
            return Err(Error::ParameterRange(format!(
                "acs fraction {} outside [0, 1]",
                self.acs_frac
            )));
        }
        if !(self.sigma_frac > 0.0 && self.sigma_frac.is_finite()) {
            return Err(Error::ParameterRange(format!(
                "sigma fraction {} must be positive",
                self.sigma_frac
            )));
        }
        Ok(())
    }

    /// Number of kept lines on an axis of length `n`.
    pub fn budget(&self, n: usize) -> usize {
        (n as f64 / self.accel).round() as usize
    }

    pub fn acs_count(&self, n: usize) -> usize {
        (self.acs_frac * n as f64).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingMask {
    keep: Vec<bool>,
    accel: f64,
    acs_count: usize,
    direction: Direction,
    seed: u64,
}

/// Inclusive range of ACS lines centered on the DC line.
pub fn acs_range(n: usize, acs_count: usize) -> std::ops::Range<usize> {
    if acs_count == 0 {
        return 0..0;
    }
    let c = center_index(n);
    let lo = c - acs_count / 2;
    lo..lo + acs_count
}

/// Unnormalized Gaussian sampling weight of line `i`.
pub fn line_weight(i: usize, n: usize, sigma_frac: f64) -> f64 {
    let sigma = sigma_frac * n as f64;
    let d = i as f64 - center_index(n) as f64;
    (-d * d / (2.0 * sigma * sigma)).exp()
}

/// Draws a 1D Gaussian variable-density mask.
///
/// The central ACS block is always kept. The remaining budget is filled by
/// sequential weighted draws without replacement over the non-ACS lines,
/// each draw choosing line `i` with probability proportional to
/// `exp(-(i - c)^2 / (2 sigma^2))` among the lines not yet chosen.
pub fn gaussian_mask(n: usize, params: &MaskParams, seed: u64) -> Result<SamplingMask> {
    params.validate()?;
    if n < 2 {
        return Err(Error::InvalidDimension(format!("mask length {n} < 2")));
    }
    let budget = params.budget(n);
    let acs = params.acs_count(n);
    if acs > budget {
        return Err(Error::InfeasibleBudget { acs, budget });
    }

    let mut keep = vec![false; n];
    for i in acs_range(n, acs) {
        keep[i] = true;
    }

    let c = center_index(n);
    let mut pool: Vec<(usize, f64)> = (0..n)
        .filter(|&i| !keep[i])
        .map(|i| (i, line_weight(i, n, params.sigma_frac)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in acs..budget {
        let total: f64 = pool.iter().map(|p| p.1).sum();
        let pick = if total > 0.0 && total.is_finite() {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            pool.iter()
                .position(|&(_, w)| {
                    acc += w;
                    acc > target
                })
                .unwrap_or(pool.len() - 1)
        } else {
            // every remaining weight underflowed; take the line nearest DC
            pool.iter()
                .enumerate()
                .min_by_key(|(_, &(i, _))| i.abs_diff(c))
                .map(|(pos, _)| pos)
                .unwrap_or(0)
        };
        let (line, _) = pool.remove(pick);
        keep[line] = true;
    }

    Ok(SamplingMask {
        keep,
        accel: params.accel,
        acs_count: acs,
        direction: params.direction,
        seed,
    })
}

impl SamplingMask {
    /// Mask keeping every line.
    pub fn full(n: usize, direction: Direction) -> Self {
        SamplingMask {
            keep: vec![true; n],
            accel: 1.0,
            acs_count: n,
            direction,
            seed: 0,
        }
    }

    /// Mask from an explicit keep vector; no ACS bookkeeping.
    pub fn from_keep(keep: Vec<bool>, direction: Direction) -> Self {
        let kept = keep.iter().filter(|&&k| k).count().max(1);
        SamplingMask {
            accel: keep.len() as f64 / kept as f64,
            keep,
            acs_count: 0,
            direction,
            seed: 0,
        }
    }

    pub fn keep(&self) -> &[bool] {
        &self.keep
    }

    pub fn len(&self) -> usize {
        self.keep.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keep.is_empty()
    }

    pub fn accel(&self) -> f64 {
        self.accel
    }

    pub fn acs_count(&self) -> usize {
        self.acs_count
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn popcount(&self) -> usize {
        self.keep.iter().filter(|&&k| k).count()
    }

    /// Whether grid sample `(row, col)` survives this mask.
    pub fn is_sampled(&self, row: usize, col: usize) -> bool {
        match self.direction {
            Direction::PhaseEncode => self.keep[col],
            Direction::FrequencyEncode => self.keep[row],
        }
    }

    /// Mask as a string of `0`/`1` characters.
    pub fn to_bits(&self) -> String {
        self.keep.iter().map(|&k| if k { '1' } else { '0' }).collect()
    }

    pub(crate) fn check_grid(&self, dim: (usize, usize)) -> Result<()> {
        let expect = self.direction.axis_len(dim);
        if self.keep.len() != expect {
            return Err(Error::InvalidDimension(format!(
                "{} mask of length {} on a {}x{} grid (needs {expect})",
                self.direction,
                self.keep.len(),
                dim.0,
                dim.1
            )));
        }
        Ok(())
    }
}

/// Zeroes every line the mask drops; kept lines are copied unchanged.
pub fn apply_mask(kspace: &KSpace, mask: &SamplingMask) -> Result<KSpace> {
    mask.check_grid(kspace.dim())?;
    let mut out = kspace.clone();
    let axis = mask.direction.axis();
    let zero = Complex64::new(0.0, 0.0);
    for (i, &k) in mask.keep.iter().enumerate() {
        if !k {
            out.data_mut().index_axis_mut(axis, i).fill(zero);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RejectionStats {
    pub corrupted_total: usize,
    pub corrupted_sampled: usize,
    pub fraction_removed: f64,
}

/// How many motion-corrupted phase-encoding lines a mask discards.
///
/// A read-out mask drops no phase-encoding line, so every corrupted line
/// counts as sampled.
pub fn rejection_stats(mask: &SamplingMask, trace: &MotionTrace) -> Result<RejectionStats> {
    let corrupted_total = trace.corrupted().len();
    let corrupted_sampled = match mask.direction {
        Direction::PhaseEncode => {
            if mask.len() != trace.len() {
                return Err(Error::InvalidDimension(format!(
                    "mask length {} vs trace length {}",
                    mask.len(),
                    trace.len()
                )));
            }
            trace.corrupted().iter().filter(|&&i| mask.keep[i]).count()
        }
        Direction::FrequencyEncode => corrupted_total,
    };
    let fraction_removed = if corrupted_total == 0 {
        1.0
    } else {
        1.0 - corrupted_sampled as f64 / corrupted_total as f64
    };
    Ok(RejectionStats {
        corrupted_total,
        corrupted_sampled,
        fraction_removed,
    })
}
