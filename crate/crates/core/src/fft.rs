//! Centered, unitary 2D DFT between magnitude images and k-space.
//!
//! Axis 0 is the frequency-encoding (read-out) direction, axis 1 the
//! phase-encoding direction. The DC sample sits at `(n_fe / 2, n_pe / 2)`
//! (integer division) for both even and odd sizes, and the same index maps
//! to the spatial origin. Both directions are scaled by `1 / sqrt(n_fe * n_pe)`.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::{Array2, Axis};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Real-valued image, row-major, `n_fe` rows by `n_pe` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    data: Array2<f64>,
}

/// Complex k-space samples on the same grid as the image they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct KSpace {
    data: Array2<Complex64>,
}

fn check_dims(n_fe: usize, n_pe: usize) -> Result<()> {
    if n_fe < 2 || n_pe < 2 {
        return Err(Error::InvalidDimension(format!(
            "grid must be at least 2x2, got {n_fe}x{n_pe}"
        )));
    }
    Ok(())
}

impl Image {
    pub fn from_array(data: Array2<f64>) -> Result<Self> {
        let (n_fe, n_pe) = data.dim();
        check_dims(n_fe, n_pe)?;
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDimension(format!(
                "non-finite pixel at flat index {pos}"
            )));
        }
        Ok(Image { data })
    }

    pub fn from_vec(n_fe: usize, n_pe: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_fe * n_pe {
            return Err(Error::InvalidDimension(format!(
                "{} values for a {n_fe}x{n_pe} grid",
                values.len()
            )));
        }
        let data = Array2::from_shape_vec((n_fe, n_pe), values)
            .map_err(|e| Error::InvalidDimension(e.to_string()))?;
        Self::from_array(data)
    }

    pub fn zeros(n_fe: usize, n_pe: usize) -> Result<Self> {
        check_dims(n_fe, n_pe)?;
        Ok(Image {
            data: Array2::zeros((n_fe, n_pe)),
        })
    }

    pub fn n_fe(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_pe(&self) -> usize {
        self.data.ncols()
    }

    pub fn dim(&self) -> (usize, usize) {
        self.data.dim()
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_data(self) -> Array2<f64> {
        self.data
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

impl KSpace {
    pub fn from_array(data: Array2<Complex64>) -> Result<Self> {
        let (n_fe, n_pe) = data.dim();
        check_dims(n_fe, n_pe)?;
        if let Some(pos) = data.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::InvalidDimension(format!(
                "non-finite k-space sample at flat index {pos}"
            )));
        }
        Ok(KSpace { data })
    }

    pub fn zeros(n_fe: usize, n_pe: usize) -> Result<Self> {
        check_dims(n_fe, n_pe)?;
        Ok(KSpace {
            data: Array2::zeros((n_fe, n_pe)),
        })
    }

    pub fn n_fe(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_pe(&self) -> usize {
        self.data.ncols()
    }

    pub fn dim(&self) -> (usize, usize) {
        self.data.dim()
    }

    pub fn data(&self) -> &Array2<Complex64> {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut Array2<Complex64> {
        &mut self.data
    }

    pub fn into_data(self) -> Array2<Complex64> {
        self.data
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }
}

/// Index of the DC sample (and spatial origin) along an axis of length `n`.
pub fn center_index(n: usize) -> usize {
    n / 2
}

/// Normalized frequency of line `i` on an axis of length `n`, in radians per
/// pixel, within `[-pi, pi)`.
pub fn k_coordinate(i: usize, n: usize) -> f64 {
    2.0 * PI * (i as f64 - center_index(n) as f64) / n as f64
}

/// Reusable plan for centered unitary transforms of one grid size.
#[derive(Clone)]
pub struct CenteredFft2 {
    n_fe: usize,
    n_pe: usize,
    fe_fwd: Arc<dyn Fft<f64>>,
    fe_inv: Arc<dyn Fft<f64>>,
    pe_fwd: Arc<dyn Fft<f64>>,
    pe_inv: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl std::fmt::Debug for CenteredFft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CenteredFft2")
            .field("n_fe", &self.n_fe)
            .field("n_pe", &self.n_pe)
            .finish()
    }
}

impl CenteredFft2 {
    pub fn new(n_fe: usize, n_pe: usize) -> Result<Self> {
        check_dims(n_fe, n_pe)?;
        let mut planner = FftPlanner::new();
        Ok(CenteredFft2 {
            n_fe,
            n_pe,
            fe_fwd: planner.plan_fft_forward(n_fe),
            fe_inv: planner.plan_fft_inverse(n_fe),
            pe_fwd: planner.plan_fft_forward(n_pe),
            pe_inv: planner.plan_fft_inverse(n_pe),
            scale: 1.0 / ((n_fe * n_pe) as f64).sqrt(),
        })
    }

    pub fn dim(&self) -> (usize, usize) {
        (self.n_fe, self.n_pe)
    }

    fn check(&self, grid: &Array2<Complex64>) -> Result<()> {
        if grid.dim() != (self.n_fe, self.n_pe) {
            return Err(Error::InvalidDimension(format!(
                "plan is {}x{}, grid is {}x{}",
                self.n_fe,
                self.n_pe,
                grid.nrows(),
                grid.ncols()
            )));
        }
        Ok(())
    }

    /// Image domain to k-space, in place.
    pub fn forward_inplace(&self, grid: &mut Array2<Complex64>) -> Result<()> {
        self.check(grid)?;
        transform_axis(grid, Axis(1), self.pe_fwd.as_ref());
        transform_axis(grid, Axis(0), self.fe_fwd.as_ref());
        grid.mapv_inplace(|v| v * self.scale);
        Ok(())
    }

    /// K-space to image domain, in place.
    pub fn inverse_inplace(&self, grid: &mut Array2<Complex64>) -> Result<()> {
        self.check(grid)?;
        transform_axis(grid, Axis(0), self.fe_inv.as_ref());
        transform_axis(grid, Axis(1), self.pe_inv.as_ref());
        grid.mapv_inplace(|v| v * self.scale);
        Ok(())
    }
}

/// Shifted 1D transform of every lane along `axis`: the centered sample is
/// rotated to index 0 before the FFT and back to the center after it.
fn transform_axis(grid: &mut Array2<Complex64>, axis: Axis, fft: &dyn Fft<f64>) {
    let n = grid.len_of(axis);
    let c = center_index(n);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for mut lane in grid.lanes_mut(axis) {
        for (k, slot) in buf.iter_mut().enumerate() {
            *slot = lane[(k + c) % n];
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (k, v) in buf.iter().enumerate() {
            lane[(k + c) % n] = *v;
        }
    }
}

/// Unitary centered forward transform of a real image.
pub fn forward(image: &Image) -> Result<KSpace> {
    let (n_fe, n_pe) = image.dim();
    let plan = CenteredFft2::new(n_fe, n_pe)?;
    let mut grid = image.data().mapv(|v| Complex64::new(v, 0.0));
    plan.forward_inplace(&mut grid)?;
    Ok(KSpace { data: grid })
}

/// Complex image domain result of the unitary centered inverse transform.
pub fn inverse_complex(kspace: &KSpace) -> Result<Array2<Complex64>> {
    let (n_fe, n_pe) = kspace.dim();
    let plan = CenteredFft2::new(n_fe, n_pe)?;
    let mut grid = kspace.data().clone();
    plan.inverse_inplace(&mut grid)?;
    Ok(grid)
}

/// Pixelwise magnitude of the unitary centered inverse transform.
pub fn inverse(kspace: &KSpace) -> Result<Image> {
    let grid = inverse_complex(kspace)?;
    Ok(Image {
        data: grid.mapv(|v| v.norm()),
    })
}
