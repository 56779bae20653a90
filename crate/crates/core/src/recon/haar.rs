//! Multilevel orthonormal 2D Haar transform on complex grids.
//!
//! Layout is the usual Mallat pyramid: after `levels` passes the
//! approximation band occupies the top-left `(rows >> levels, cols >> levels)`
//! block and detail bands fill the rest.

use std::f64::consts::FRAC_1_SQRT_2;

use ndarray::{s, Array2, ArrayViewMut1};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub fn check_divisible(dim: (usize, usize), levels: usize) -> Result<()> {
    let step = 1usize << levels;
    if !dim.0.is_multiple_of(step) || !dim.1.is_multiple_of(step) {
        return Err(Error::Shape(format!(
            "{}x{} grid is not divisible by 2^{levels}",
            dim.0, dim.1
        )));
    }
    Ok(())
}

fn split(mut lane: ArrayViewMut1<Complex64>, buf: &mut Vec<Complex64>) {
    let half = lane.len() / 2;
    buf.clear();
    buf.extend(lane.iter().copied());
    for k in 0..half {
        let (a, b) = (buf[2 * k], buf[2 * k + 1]);
        lane[k] = (a + b) * FRAC_1_SQRT_2;
        lane[half + k] = (a - b) * FRAC_1_SQRT_2;
    }
}

fn merge(mut lane: ArrayViewMut1<Complex64>, buf: &mut Vec<Complex64>) {
    let half = lane.len() / 2;
    buf.clear();
    buf.extend(lane.iter().copied());
    for k in 0..half {
        let (a, d) = (buf[k], buf[half + k]);
        lane[2 * k] = (a + d) * FRAC_1_SQRT_2;
        lane[2 * k + 1] = (a - d) * FRAC_1_SQRT_2;
    }
}

pub fn forward(grid: &mut Array2<Complex64>, levels: usize) -> Result<()> {
    check_divisible(grid.dim(), levels)?;
    let (rows, cols) = grid.dim();
    let mut buf = Vec::with_capacity(rows.max(cols));
    for l in 0..levels {
        let (r, c) = (rows >> l, cols >> l);
        let mut block = grid.slice_mut(s![..r, ..c]);
        for lane in block.rows_mut() {
            split(lane, &mut buf);
        }
        for lane in block.columns_mut() {
            split(lane, &mut buf);
        }
    }
    Ok(())
}

pub fn inverse(grid: &mut Array2<Complex64>, levels: usize) -> Result<()> {
    check_divisible(grid.dim(), levels)?;
    let (rows, cols) = grid.dim();
    let mut buf = Vec::with_capacity(rows.max(cols));
    for l in (0..levels).rev() {
        let (r, c) = (rows >> l, cols >> l);
        let mut block = grid.slice_mut(s![..r, ..c]);
        for lane in block.columns_mut() {
            merge(lane, &mut buf);
        }
        for lane in block.rows_mut() {
            merge(lane, &mut buf);
        }
    }
    Ok(())
}

/// True for coefficients outside the coarse approximation band.
pub fn is_detail(row: usize, col: usize, dim: (usize, usize), levels: usize) -> bool {
    row >= dim.0 >> levels || col >= dim.1 >> levels
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_grid(r: usize, c: usize, seed: u64) -> Array2<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((r, c), |_| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    fn norm(a: &Array2<Complex64>) -> f64 {
        a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    #[test]
    fn orthonormal_and_invertible() {
        for &(r, c, l) in &[(32, 32, 3), (16, 48, 4), (8, 4, 2), (6, 10, 1)] {
            let x = random_grid(r, c, 9);
            let mut w = x.clone();
            forward(&mut w, l).unwrap();
            assert!((norm(&w) - norm(&x)).abs() <= 1e-9 * norm(&x));
            inverse(&mut w, l).unwrap();
            let err = (&w - &x).iter().map(|v| v.norm()).fold(0.0, f64::max);
            assert!(err <= 1e-9, "{r}x{c} L{l}: {err}");
        }
    }

    #[test]
    fn constant_maps_to_approximation_band() {
        let mut g = Array2::from_elem((8, 8), Complex64::new(1.0, 0.0));
        forward(&mut g, 2).unwrap();
        for ((i, j), v) in g.indexed_iter() {
            if is_detail(i, j, (8, 8), 2) {
                assert!(v.norm() < 1e-12);
            } else {
                assert!((v.re - 4.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_indivisible() {
        let mut g = Array2::zeros((12, 8));
        assert!(matches!(forward(&mut g, 3), Err(Error::Shape(_))));
        assert!(forward(&mut g, 2).is_ok());
    }
}
