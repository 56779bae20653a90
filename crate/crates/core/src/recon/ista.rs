//! Iterative shrinkage-thresholding with an orthonormal Haar sparsity prior.
//!
//! Minimizes `0.5 * ||M F x - y||^2 + lambda * ||W_d x||_1` over complex
//! images, where `F` is the unitary centered DFT, `M` the line mask and `W_d`
//! the Haar detail coefficients. The coarse approximation band is left
//! unpenalized. Since `F` is unitary and `M` a projection, the data term
//! gradient has Lipschitz constant 1 and a unit step is used.

use ndarray::{s, Array2, Zip};
use num_complex::Complex64;

use super::haar;
use crate::error::{Error, Result};
use crate::fft::{CenteredFft2, KSpace};
use crate::sampling::SamplingMask;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lambda {
    /// Multiple of the largest Haar coefficient magnitude of the zero-filled image.
    Relative(f64),
    Absolute(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IstaParams {
    pub lambda: Lambda,
    pub iters: usize,
    pub levels: usize,
    /// Zero-pad sides that are not multiples of `2^levels` (cropped afterwards).
    pub pad: bool,
}

impl Default for IstaParams {
    fn default() -> Self {
        IstaParams {
            lambda: Lambda::Relative(0.01),
            iters: 50,
            levels: 3,
            pad: true,
        }
    }
}

impl IstaParams {
    pub fn validate(&self) -> Result<()> {
        let l = match self.lambda {
            Lambda::Relative(v) | Lambda::Absolute(v) => v,
        };
        if !(l >= 0.0 && l.is_finite()) {
            return Err(Error::ParameterRange(format!("lambda {l} must be finite and >= 0")));
        }
        if self.iters == 0 {
            return Err(Error::ParameterRange("ISTA needs at least one iteration".into()));
        }
        if self.levels == 0 || self.levels > 16 {
            return Err(Error::ParameterRange(format!(
                "wavelet levels {} outside [1, 16]",
                self.levels
            )));
        }
        Ok(())
    }
}

/// Componentwise soft threshold `v * max(|v| - t, 0) / |v|`; `t = 0` is the identity.
pub fn soft_threshold(v: Complex64, t: f64) -> Complex64 {
    if t == 0.0 {
        return v;
    }
    let m = v.norm();
    if m <= t {
        Complex64::new(0.0, 0.0)
    } else {
        v * ((m - t) / m)
    }
}

#[derive(Debug, Clone)]
pub struct IstaOutcome {
    /// Complex image after the final data-consistency step.
    pub image: Array2<Complex64>,
    /// Objective before the first iteration and after each one; empty when
    /// tracking is off.
    pub objective: Vec<f64>,
    pub lambda: f64,
}

/// Sparsifying transform with optional symmetric zero padding.
struct Sparsifier {
    dim: (usize, usize),
    padded: (usize, usize),
    offset: (usize, usize),
    levels: usize,
}

impl Sparsifier {
    fn new(dim: (usize, usize), levels: usize, pad: bool) -> Result<Self> {
        let step = 1usize << levels;
        let round_up = |n: usize| n.div_ceil(step) * step;
        let padded = (round_up(dim.0), round_up(dim.1));
        if padded != dim && !pad {
            haar::check_divisible(dim, levels)?;
        }
        Ok(Sparsifier {
            dim,
            padded,
            offset: ((padded.0 - dim.0) / 2, (padded.1 - dim.1) / 2),
            levels,
        })
    }

    fn window(&self) -> ndarray::SliceInfo<[ndarray::SliceInfoElem; 2], ndarray::Ix2, ndarray::Ix2> {
        s![
            self.offset.0..self.offset.0 + self.dim.0,
            self.offset.1..self.offset.1 + self.dim.1
        ]
    }

    fn analyze(&self, x: &Array2<Complex64>) -> Array2<Complex64> {
        let mut w = Array2::zeros(self.padded);
        w.slice_mut(self.window()).assign(x);
        haar::forward(&mut w, self.levels).expect("padded grid divisible");
        w
    }

    fn synthesize(&self, mut w: Array2<Complex64>) -> Array2<Complex64> {
        haar::inverse(&mut w, self.levels).expect("padded grid divisible");
        w.slice(self.window()).to_owned()
    }

    fn detail_l1(&self, w: &Array2<Complex64>) -> f64 {
        w.indexed_iter()
            .filter(|((i, j), _)| haar::is_detail(*i, *j, self.padded, self.levels))
            .map(|(_, v)| v.norm())
            .sum()
    }

    fn shrink_details(&self, w: &mut Array2<Complex64>, t: f64) {
        for ((i, j), v) in w.indexed_iter_mut() {
            if haar::is_detail(i, j, self.padded, self.levels) {
                *v = soft_threshold(*v, t);
            }
        }
    }
}

struct Problem {
    plan: CenteredFft2,
    sampled: Array2<bool>,
    y: Array2<Complex64>,
}

impl Problem {
    fn residual(&self, x: &Array2<Complex64>) -> Array2<Complex64> {
        let mut k = x.clone();
        self.plan.forward_inplace(&mut k).expect("plan matches grid");
        Zip::from(&mut k)
            .and(&self.sampled)
            .and(&self.y)
            .for_each(|k, &m, &y| *k = if m { *k - y } else { Complex64::new(0.0, 0.0) });
        k
    }

    fn data_term(&self, x: &Array2<Complex64>) -> f64 {
        0.5 * self.residual(x).iter().map(|v| v.norm_sqr()).sum::<f64>()
    }
}

/// Runs ISTA from the zero-filled image and finishes with hard data consistency.
/// The objective is recorded before the first and after every iteration.
pub fn ista_solve(kspace_sub: &KSpace, mask: &SamplingMask, params: &IstaParams) -> Result<IstaOutcome> {
    solve(kspace_sub, mask, params, true)
}

pub(crate) fn solve(
    kspace_sub: &KSpace,
    mask: &SamplingMask,
    params: &IstaParams,
    track_objective: bool,
) -> Result<IstaOutcome> {
    params.validate()?;
    let dim = kspace_sub.dim();
    mask.check_grid(dim)?;
    let sparsifier = Sparsifier::new(dim, params.levels, params.pad)?;

    let sampled = Array2::from_shape_fn(dim, |(r, c)| mask.is_sampled(r, c));
    let mut y = kspace_sub.data().clone();
    Zip::from(&mut y).and(&sampled).for_each(|v, &m| {
        if !m {
            *v = Complex64::new(0.0, 0.0);
        }
    });
    let problem = Problem {
        plan: CenteredFft2::new(dim.0, dim.1)?,
        sampled,
        y,
    };

    let mut x = problem.y.clone();
    problem.plan.inverse_inplace(&mut x)?;

    let lambda = match params.lambda {
        Lambda::Absolute(v) => v,
        Lambda::Relative(r) => {
            let w0 = sparsifier.analyze(&x);
            r * w0.iter().map(|v| v.norm()).fold(0.0, f64::max)
        }
    };
    let objective_at = |x: &Array2<Complex64>| {
        problem.data_term(x) + lambda * sparsifier.detail_l1(&sparsifier.analyze(x))
    };

    let mut objective = Vec::new();
    if track_objective {
        objective.push(objective_at(&x));
    }
    for _ in 0..params.iters {
        let mut grad = problem.residual(&x);
        problem.plan.inverse_inplace(&mut grad)?;
        x -= &grad;
        let mut w = sparsifier.analyze(&x);
        sparsifier.shrink_details(&mut w, lambda);
        x = sparsifier.synthesize(w);
        if track_objective {
            objective.push(objective_at(&x));
        }
    }

    problem.plan.forward_inplace(&mut x)?;
    Zip::from(&mut x)
        .and(&problem.sampled)
        .and(&problem.y)
        .for_each(|k, &m, &y| {
            if m {
                *k = y;
            }
        });
    problem.plan.inverse_inplace(&mut x)?;

    Ok(IstaOutcome {
        image: x,
        objective,
        lambda,
    })
}
