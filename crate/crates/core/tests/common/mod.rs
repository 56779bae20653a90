#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use kboot::aggregate::{bootstrap_correct, AggregationConfig, AggregationResult};
use kboot::fft::{forward, inverse, Image};
use kboot::motion::{apply_trace, random_rigid_trace, MotionTrace};
use kboot::phantom::shepp_logan;
use kboot::recon::{IstaParams, Recon};
use kboot::sampling::{Direction, MaskParams};

/// Shepp-Logan 128, rigid motion (seed 7, delta_max 10, k0 = pi/10).
pub struct FrozenInstance {
    pub clean: Image,
    pub trace: MotionTrace,
    pub corrupted: Image,
}

pub fn frozen_instance() -> FrozenInstance {
    let clean = shepp_logan(128).unwrap();
    let trace = random_rigid_trace(128, PI / 10.0, 10.0, 7).unwrap();
    let corrupted = inverse(&apply_trace(&forward(&clean).unwrap(), &trace).unwrap()).unwrap();
    FrozenInstance {
        clean,
        trace,
        corrupted,
    }
}

pub fn frozen_mask_params(direction: Direction) -> MaskParams {
    MaskParams {
        accel: 3.0,
        acs_frac: 0.11,
        sigma_frac: 0.25,
        direction,
    }
}

pub fn frozen_config(direction: Direction) -> AggregationConfig {
    AggregationConfig::uniform(
        15,
        frozen_mask_params(direction),
        Arc::new(Recon::Ista(IstaParams::default())),
        42,
    )
}

pub fn correct_single_threaded(image: &Image, config: &AggregationConfig) -> AggregationResult {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| bootstrap_correct(image, config))
        .unwrap()
}

/// Exact inclusion probabilities of successive (sequential, without
/// replacement) weighted sampling of `draws` items, by quadrature over the
/// exponential-clock representation: item i is drawn iff its arrival time
/// E_i / w_i is among the `draws` smallest, so
/// pi_i = int_0^inf w_i exp(-w_i t) P(#{j != i arrived by t} <= draws - 1) dt.
pub fn inclusion_probabilities(weights: &[f64], draws: usize) -> Vec<f64> {
    let m = weights.len();
    if draws == 0 {
        return vec![0.0; m];
    }
    if draws >= m {
        return vec![1.0; m];
    }
    let k = draws;
    // Integrate until fewer than k arrivals among all items is negligible;
    // the integrand for every item is bounded by that probability.
    let fewer_than_k = |t: f64| {
        let mut dist = vec![0.0; k];
        dist[0] = 1.0;
        for w in weights {
            let p = 1.0 - (-w * t).exp();
            for a in (0..k).rev() {
                dist[a] = dist[a] * (1.0 - p) + if a > 0 { dist[a - 1] * p } else { 0.0 };
            }
        }
        dist.iter().sum::<f64>()
    };
    let w_max = weights.iter().copied().fold(0.0, f64::max);
    let mut t_max = 1.0 / w_max;
    while fewer_than_k(t_max) > 1e-16 {
        t_max *= 1.5;
    }
    let intervals = 4000;
    let h = t_max / intervals as f64;

    let mut acc = vec![0.0; m];
    let mut prefix = vec![vec![0.0; k]; m + 1];
    let mut suffix = vec![vec![0.0; k]; m + 1];
    for step in 0..=intervals {
        let t = step as f64 * h;
        let coef = if step == 0 || step == intervals {
            1.0
        } else if step % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let p: Vec<f64> = weights.iter().map(|w| 1.0 - (-w * t).exp()).collect();
        // prefix[j]: count distribution over items 0..j, truncated to < k
        prefix[0].iter_mut().for_each(|v| *v = 0.0);
        prefix[0][0] = 1.0;
        for j in 0..m {
            let (lo, hi) = prefix.split_at_mut(j + 1);
            let (src, dst) = (&lo[j], &mut hi[0]);
            for a in 0..k {
                let stay = src[a] * (1.0 - p[j]);
                let come = if a > 0 { src[a - 1] * p[j] } else { 0.0 };
                dst[a] = stay + come;
            }
        }
        // suffix[j]: count distribution over items j..m
        suffix[m].iter_mut().for_each(|v| *v = 0.0);
        suffix[m][0] = 1.0;
        for j in (0..m).rev() {
            let (lo, hi) = suffix.split_at_mut(j + 1);
            let (dst, src) = (&mut lo[j], &hi[0]);
            for b in 0..k {
                let stay = src[b] * (1.0 - p[j]);
                let come = if b > 0 { src[b - 1] * p[j] } else { 0.0 };
                dst[b] = stay + come;
            }
        }
        for i in 0..m {
            let left = &prefix[i];
            let right = &suffix[i + 1];
            let mut cum = vec![0.0; k];
            let mut run = 0.0;
            for b in 0..k {
                run += right[b];
                cum[b] = run;
            }
            let below: f64 = (0..k).map(|a| left[a] * cum[k - 1 - a]).sum();
            let density = weights[i] * (-weights[i] * t).exp();
            acc[i] += coef * density * below;
        }
    }
    acc.iter().map(|v| v * h / 3.0).collect()
}

/// Exact inclusion probabilities by enumerating every ordered draw sequence.
pub fn inclusion_by_enumeration(weights: &[f64], draws: usize) -> Vec<f64> {
    fn walk(w: &[f64], avail: &mut Vec<usize>, left: usize, p: f64, out: &mut [f64]) {
        if left == 0 {
            return;
        }
        let total: f64 = avail.iter().map(|&i| w[i]).sum();
        for pos in 0..avail.len() {
            let i = avail[pos];
            let q = p * w[i] / total;
            out[i] += q;
            avail.remove(pos);
            walk(w, avail, left - 1, q, out);
            avail.insert(pos, i);
        }
    }
    let mut out = vec![0.0; weights.len()];
    walk(weights, &mut (0..weights.len()).collect(), draws, 1.0, &mut out);
    out
}
