//! Motion phase-error traces along the phase-encoding axis.
//!
//! A trace assigns each phase-encoding column `i` a displacement `d(i)` in
//! pixels and a phase error `phi(i) = k_y(i) * d(i)`. Columns with
//! `|k_y| <= k0` (the centrally filled, motion-free part of k-space) are never
//! corrupted. Applying a trace multiplies column `i` by `exp(-j phi(i))`, which
//! under the centered DFT convention translates the content of that column's
//! spatial frequency by `+d(i)` pixels along phase encoding.
//!
//! Displacements are treated purely in pixels. Converting to physical units
//! requires the voxel size and is left to the caller.

use std::f64::consts::{FRAC_PI_4, PI};
use std::io::Write;

use ndarray::Axis;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fft::{k_coordinate, KSpace};

/// Default motion-free central half-width in radians (`pi / 10`).
pub const DEFAULT_K0: f64 = PI / 10.0;
/// Largest displacement magnitude in pixels used by the simulation ranges.
pub const MAX_DISPLACEMENT: f64 = 37.0;
pub const ALPHA_RANGE: (f64, f64) = (0.1, 5.0);
pub const BETA_RANGE: (f64, f64) = (0.0, FRAC_PI_4);
pub const DELTA_RANGE: (f64, f64) = (0.0, MAX_DISPLACEMENT);

// Slack on the `|k_y| > k0` test so that a column sitting exactly on the
// threshold (e.g. |i - 160| = 16 for n = 320, k0 = pi/10) is not pulled in by
// rounding in the k_y computation.
const K0_SLACK: f64 = 1e-12;

/// True when column frequency `k_y` lies in the motion-affected region.
pub fn beyond_k0(k_y: f64, k0: f64) -> bool {
    k_y.abs() > k0 + K0_SLACK
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceKind {
    /// Independent uniform displacement per line in `(-delta_max, delta_max)`.
    Rigid { delta_max: f64 },
    /// Respiratory-like `d(k_y) = delta * sin(alpha * k_y + beta)`.
    Periodic { alpha: f64, beta: f64, delta: f64 },
    /// Caller-supplied displacements.
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceParams {
    pub kind: TraceKind,
    pub k0: f64,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionTrace {
    phi: Vec<f64>,
    displacement: Vec<f64>,
    corrupted: Vec<usize>,
    params: TraceParams,
}

/// A periodic-trace constant given explicitly or drawn from its range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamValue {
    Fixed(f64),
    Random,
}

fn check_k0(k0: f64) -> Result<()> {
    if !(0.0..=PI).contains(&k0) {
        return Err(Error::ParameterRange(format!("k0 = {k0} outside [0, pi]")));
    }
    Ok(())
}

fn check_n_pe(n_pe: usize) -> Result<()> {
    if n_pe < 2 {
        return Err(Error::InvalidDimension(format!("n_pe = {n_pe} < 2")));
    }
    Ok(())
}

impl MotionTrace {
    /// Builds a trace from per-column displacements; columns inside `k0`
    /// are zeroed regardless of the value supplied.
    pub fn from_displacements(displacement: &[f64], k0: f64) -> Result<Self> {
        check_n_pe(displacement.len())?;
        check_k0(k0)?;
        if displacement.iter().any(|d| !d.is_finite()) {
            return Err(Error::ParameterRange("non-finite displacement".into()));
        }
        Ok(Self::build(
            displacement.len(),
            k0,
            |_, _| 0.0,
            Some(displacement),
            TraceParams {
                kind: TraceKind::Custom,
                k0,
                seed: None,
            },
        ))
    }

    fn build(
        n_pe: usize,
        k0: f64,
        mut displacement_at: impl FnMut(usize, f64) -> f64,
        given: Option<&[f64]>,
        params: TraceParams,
    ) -> Self {
        let mut phi = vec![0.0; n_pe];
        let mut displacement = vec![0.0; n_pe];
        let mut corrupted = Vec::new();
        for i in 0..n_pe {
            let k_y = k_coordinate(i, n_pe);
            if !beyond_k0(k_y, k0) {
                continue;
            }
            let d = match given {
                Some(g) => g[i],
                None => displacement_at(i, k_y),
            };
            let p = k_y * d;
            if p != 0.0 {
                displacement[i] = d;
                phi[i] = p;
                corrupted.push(i);
            }
        }
        MotionTrace {
            phi,
            displacement,
            corrupted,
            params,
        }
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.corrupted.is_empty()
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn displacement(&self) -> &[f64] {
        &self.displacement
    }

    /// Sorted column indices carrying a nonzero phase error.
    pub fn corrupted(&self) -> &[usize] {
        &self.corrupted
    }

    pub fn params(&self) -> &TraceParams {
        &self.params
    }

    /// Trace with every phase error sign-flipped; applying it undoes `self`.
    pub fn negated(&self) -> Self {
        MotionTrace {
            phi: self.phi.iter().map(|p| -p).collect(),
            displacement: self.displacement.iter().map(|d| -d).collect(),
            corrupted: self.corrupted.clone(),
            params: self.params.clone(),
        }
    }

    /// Writes `index,k_y,delta,phi` rows, one per column.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "index,k_y,delta,phi")?;
        let n = self.len();
        for i in 0..n {
            writeln!(
                out,
                "{},{},{},{}",
                i,
                k_coordinate(i, n),
                self.displacement[i],
                self.phi[i]
            )?;
        }
        Ok(())
    }
}

/// Rigid motion with an independent uniform displacement per affected line.
///
/// One value is drawn per column with `|k_y| > k0`, in ascending column
/// order, from a ChaCha8 stream seeded with `seed`.
pub fn random_rigid_trace(n_pe: usize, k0: f64, delta_max: f64, seed: u64) -> Result<MotionTrace> {
    check_n_pe(n_pe)?;
    check_k0(k0)?;
    if !(delta_max >= 0.0 && delta_max.is_finite()) {
        return Err(Error::ParameterRange(format!(
            "delta_max = {delta_max} must be finite and >= 0"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = TraceParams {
        kind: TraceKind::Rigid { delta_max },
        k0,
        seed: Some(seed),
    };
    Ok(MotionTrace::build(
        n_pe,
        k0,
        |_, _| {
            if delta_max > 0.0 {
                rng.random_range(-delta_max..delta_max)
            } else {
                0.0
            }
        },
        None,
        params,
    ))
}

/// Options for [`periodic_trace`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicParams {
    pub k0: f64,
    pub alpha: ParamValue,
    pub beta: ParamValue,
    pub delta: ParamValue,
    /// Accept fixed constants outside the simulation ranges.
    pub allow_out_of_range: bool,
}

impl Default for PeriodicParams {
    fn default() -> Self {
        PeriodicParams {
            k0: DEFAULT_K0,
            alpha: ParamValue::Random,
            beta: ParamValue::Random,
            delta: ParamValue::Random,
            allow_out_of_range: false,
        }
    }
}

fn resolve(
    name: &str,
    value: ParamValue,
    range: (f64, f64),
    allow: bool,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    match value {
        ParamValue::Random => Ok(rng.random_range(range.0..range.1)),
        ParamValue::Fixed(v) => {
            if !v.is_finite() {
                return Err(Error::ParameterRange(format!("{name} = {v} is not finite")));
            }
            if !allow && !(range.0..=range.1).contains(&v) {
                return Err(Error::ParameterRange(format!(
                    "{name} = {v} outside [{}, {}]",
                    range.0, range.1
                )));
            }
            Ok(v)
        }
    }
}

/// Sinusoidal (respiratory) motion: `phi = k_y * delta * sin(alpha * k_y + beta)`
/// beyond `k0`. Random constants are drawn in the order alpha, beta, delta.
pub fn periodic_trace(n_pe: usize, p: &PeriodicParams, seed: u64) -> Result<MotionTrace> {
    check_n_pe(n_pe)?;
    check_k0(p.k0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let allow = p.allow_out_of_range;
    let alpha = resolve("alpha", p.alpha, ALPHA_RANGE, allow, &mut rng)?;
    let beta = resolve("beta", p.beta, BETA_RANGE, allow, &mut rng)?;
    let delta = resolve("delta", p.delta, DELTA_RANGE, allow, &mut rng)?;
    let params = TraceParams {
        kind: TraceKind::Periodic { alpha, beta, delta },
        k0: p.k0,
        seed: Some(seed),
    };
    Ok(MotionTrace::build(
        n_pe,
        p.k0,
        |_, k_y| delta * (alpha * k_y + beta).sin(),
        None,
        params,
    ))
}

/// Multiplies every corrupted phase-encoding column by `exp(-j phi)`.
/// Uncorrupted columns are copied unchanged.
pub fn apply_trace(kspace: &KSpace, trace: &MotionTrace) -> Result<KSpace> {
    if trace.len() != kspace.n_pe() {
        return Err(Error::InvalidDimension(format!(
            "trace has {} lines, k-space has {} phase-encoding columns",
            trace.len(),
            kspace.n_pe()
        )));
    }
    let mut out = kspace.clone();
    let data = out.data_mut();
    for &i in trace.corrupted() {
        let rot = Complex64::from_polar(1.0, -trace.phi[i]);
        data.index_axis_mut(Axis(1), i).mapv_inplace(|v| v * rot);
    }
    Ok(out)
}
