//! Synthetic test images.
//!
//! Pixel `(r, c)` of an `n x n` grid sits at normalized coordinates
//! `x = 2 (c - n/2) / n`, `y = 2 (n/2 - r) / n`, so the spatial origin falls on
//! the same index as the k-space DC sample. Pixels are rasterized at their
//! centers without anti-aliasing.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fft::{center_index, Image};

pub const MIN_SIDE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipseSpec {
    pub center_x: f64,
    pub center_y: f64,
    pub axis_a: f64,
    pub axis_b: f64,
    /// Counter-clockwise rotation of the `a` axis from the x axis, radians.
    pub angle: f64,
    pub intensity: f64,
}

impl EllipseSpec {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.angle.sin_cos();
        let dx = x - self.center_x;
        let dy = y - self.center_y;
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        (u / self.axis_a).powi(2) + (v / self.axis_b).powi(2) <= 1.0
    }

    /// Mirror image across the vertical axis.
    pub fn mirrored(&self) -> Self {
        EllipseSpec {
            center_x: -self.center_x,
            angle: -self.angle,
            ..*self
        }
    }
}

const fn ellipse(intensity: f64, a: f64, b: f64, x: f64, y: f64, deg: f64) -> EllipseSpec {
    EllipseSpec {
        center_x: x,
        center_y: y,
        axis_a: a,
        axis_b: b,
        angle: deg * PI / 180.0,
        intensity,
    }
}

/// The ten-ellipse Shepp-Logan head in its contrast-enhanced (Toft) form,
/// whose additive intensities keep the result inside `[0, 1]`.
///
/// Columns: intensity, semi-axis a, semi-axis b, center x, center y, angle (deg).
pub const SHEPP_LOGAN: [EllipseSpec; 10] = [
    ellipse(1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    ellipse(-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0),
    ellipse(-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0),
    ellipse(-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0),
    ellipse(0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0),
    ellipse(0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0),
    ellipse(0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0),
    ellipse(0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0),
    ellipse(0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0),
    ellipse(0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0),
];

/// Normalized coordinates of pixel `(row, col)` on an `n x n` grid.
pub fn pixel_coordinates(row: usize, col: usize, n: usize) -> (f64, f64) {
    let c = center_index(n) as f64;
    let scale = 2.0 / n as f64;
    ((col as f64 - c) * scale, (c - row as f64) * scale)
}

fn check_side(n: usize) -> Result<()> {
    if n < MIN_SIDE {
        return Err(Error::ParameterRange(format!(
            "phantom side {n} below minimum {MIN_SIDE}"
        )));
    }
    Ok(())
}

/// Additive rasterization of `ellipses`, clipped to `[0, 1]`.
pub fn rasterize(n: usize, ellipses: &[EllipseSpec]) -> Result<Image> {
    check_side(n)?;
    if let Some(e) = ellipses.iter().find(|e| !(e.axis_a > 0.0 && e.axis_b > 0.0)) {
        return Err(Error::ParameterRange(format!(
            "ellipse semi-axes must be positive, got {} and {}",
            e.axis_a, e.axis_b
        )));
    }
    let data = Array2::from_shape_fn((n, n), |(r, c)| {
        let (x, y) = pixel_coordinates(r, c, n);
        let v: f64 = ellipses
            .iter()
            .filter(|e| e.contains(x, y))
            .map(|e| e.intensity)
            .sum();
        v.clamp(0.0, 1.0)
    });
    Image::from_array(data)
}

pub fn shepp_logan(n: usize) -> Result<Image> {
    rasterize(n, &SHEPP_LOGAN)
}

/// Liver-like textured image: seeded Gaussian blobs plus a fine sinusoidal
/// texture inside an elliptical body outline, min-max normalized to `[0, 1]`.
pub fn texture_phantom(n: usize, seed: u64) -> Result<Image> {
    check_side(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    struct Blob {
        x: f64,
        y: f64,
        width: f64,
        amp: f64,
    }
    let blobs: Vec<Blob> = (0..12)
        .map(|_| Blob {
            x: rng.random_range(-0.6..0.6),
            y: rng.random_range(-0.5..0.5),
            width: rng.random_range(0.05..0.3),
            amp: rng.random_range(0.2..1.0),
        })
        .collect();
    let freq_x = rng.random_range(20.0..40.0);
    let freq_y = rng.random_range(20.0..40.0);
    let phase = rng.random_range(0.0..2.0 * PI);

    let body = EllipseSpec {
        center_x: 0.0,
        center_y: 0.0,
        axis_a: 0.85,
        axis_b: 0.65,
        angle: 0.0,
        intensity: 1.0,
    };
    let raw = Array2::from_shape_fn((n, n), |(r, c)| {
        let (x, y) = pixel_coordinates(r, c, n);
        if !body.contains(x, y) {
            return 0.0;
        }
        let smooth: f64 = blobs
            .iter()
            .map(|b| {
                let d2 = (x - b.x).powi(2) + (y - b.y).powi(2);
                b.amp * (-d2 / (2.0 * b.width * b.width)).exp()
            })
            .sum();
        let fine = 0.08 * (freq_x * x + phase).sin() * (freq_y * y).cos();
        0.3 + smooth + fine
    });
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    Image::from_array(raw.mapv(|v| ((v - lo) / span).clamp(0.0, 1.0)))
}
