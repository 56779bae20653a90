//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fail.

mod common;

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kboot::aggregate::jensen_check;
use kboot::cli::random_trial;
use kboot::fft::{forward, inverse, CenteredFft2, Image};
use kboot::metrics::{psnr, ssim, write_csv, MetricReport, Peak, SsimParams, CSV_HEADER};
use kboot::motion::{apply_trace, random_rigid_trace, MotionTrace};
use kboot::phantom::shepp_logan;
use kboot::recon::{haar, ista_solve, IstaParams};
use kboot::sampling::{
    acs_range, apply_mask, gaussian_mask, line_weight, rejection_stats, Direction, MaskParams,
};

use common::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn criterion_1_jensen() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut failures = 0;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let (truth, estimates, weights) = random_trial(&mut rng, 32, 15).unwrap();
        let r = jensen_check(&truth, &estimates, &weights).unwrap();
        if r.lhs < r.rhs - 1e-9 * r.lhs || r.lhs.is_nan() {
            failures += 1;
        }
        worst = worst.max(r.rhs - r.lhs);
    }
    let mut equal_exact = true;
    for _ in 0..20 {
        let (truth, estimates, weights) = random_trial(&mut rng, 32, 7).unwrap();
        let same = vec![estimates[0].clone(); 7];
        let r = jensen_check(&truth, &same, &weights).unwrap();
        equal_exact &= r.lhs == r.rhs;
    }
    let elapsed = start.elapsed();
    outcome(
        failures == 0 && equal_exact && elapsed < Duration::from_secs(5),
        format!(
            "1000 trials, {failures} violations, worst rhs-lhs {worst:.3e}, equality exact: {equal_exact}, {:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_2_shift() -> Outcome {
    let n = 128;
    let clean = shepp_logan(n).unwrap();
    let trace = MotionTrace::from_displacements(&vec![5.0; n], 0.0).unwrap();
    let moved = inverse(&apply_trace(&forward(&clean).unwrap(), &trace).unwrap()).unwrap();
    let mut err = 0.0_f64;
    for ((r, c), v) in moved.data().indexed_iter() {
        err = err.max((v - clean.data()[[r, (c + n - 5) % n]]).abs());
    }
    outcome(err <= 1e-6, format!("max abs error vs 5-pixel circular shift {err:.3e}"))
}

struct FrozenRun {
    psnr_corrupted: f64,
    psnr_pe: f64,
    psnr_fe: f64,
    ssim_corrupted: f64,
    ssim_pe: f64,
    seconds_pe: f64,
}

fn frozen_run() -> FrozenRun {
    let inst = frozen_instance();
    let ssim_p = SsimParams::default();
    let start = Instant::now();
    let pe = correct_single_threaded(&inst.corrupted, &frozen_config(Direction::PhaseEncode));
    let seconds_pe = start.elapsed().as_secs_f64();
    let fe = correct_single_threaded(&inst.corrupted, &frozen_config(Direction::FrequencyEncode));
    FrozenRun {
        psnr_corrupted: psnr(&inst.clean, &inst.corrupted, Peak::Auto).unwrap(),
        psnr_pe: psnr(&inst.clean, &pe.corrected, Peak::Auto).unwrap(),
        psnr_fe: psnr(&inst.clean, &fe.corrected, Peak::Auto).unwrap(),
        ssim_corrupted: ssim(&inst.clean, &inst.corrupted, &ssim_p).unwrap(),
        ssim_pe: ssim(&inst.clean, &pe.corrected, &ssim_p).unwrap(),
        seconds_pe,
    }
}

fn criterion_3_end_to_end(run: &FrozenRun) -> Outcome {
    let gain = run.psnr_pe - run.psnr_corrupted;
    outcome(
        gain >= 2.0 && run.ssim_pe > run.ssim_corrupted && run.seconds_pe < 60.0,
        format!(
            "PSNR {:.4} -> {:.4} dB (gain {gain:+.4} dB, need >= +2), SSIM {:.4} -> {:.4}, {:.1}s single-threaded",
            run.psnr_corrupted, run.psnr_pe, run.ssim_corrupted, run.ssim_pe, run.seconds_pe
        ),
    )
}

fn criterion_4_direction(run: &FrozenRun) -> Outcome {
    outcome(
        run.psnr_pe > run.psnr_fe,
        format!(
            "phase-encode {:.4} dB vs frequency-encode {:.4} dB",
            run.psnr_pe, run.psnr_fe
        ),
    )
}

fn criterion_5_rejection() -> Outcome {
    let n = 320;
    let params = MaskParams {
        accel: 3.0,
        acs_frac: 0.11,
        sigma_frac: 0.25,
        direction: Direction::PhaseEncode,
    };
    let trace = random_rigid_trace(n, PI / 10.0, 37.0, 5).unwrap();
    let corrupted = trace.corrupted();

    // Oracle validity on a case small enough to enumerate.
    let small: Vec<f64> = (0..7).map(|i| line_weight(i, 7, 0.2)).collect();
    let quad = inclusion_probabilities(&small, 3);
    let exact = inclusion_by_enumeration(&small, 3);
    let oracle_err = quad
        .iter()
        .zip(&exact)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    let acs = acs_range(n, params.acs_count(n));
    let pool: Vec<usize> = (0..n).filter(|i| !acs.contains(i)).collect();
    let weights: Vec<f64> = pool.iter().map(|&i| line_weight(i, n, params.sigma_frac)).collect();
    let draws = params.budget(n) - params.acs_count(n);
    let pi = inclusion_probabilities(&weights, draws);
    let mut inclusion = vec![1.0; n];
    for (&line, &p) in pool.iter().zip(&pi) {
        inclusion[line] = p;
    }
    let expected_kept: f64 = corrupted.iter().map(|&i| inclusion[i]).sum();
    let analytic = 1.0 - expected_kept / corrupted.len() as f64;

    let trials = 10_000;
    let mc: f64 = (0..trials)
        .map(|s| {
            let m = gaussian_mask(n, &params, s).unwrap();
            rejection_stats(&m, &trace).unwrap().fraction_removed
        })
        .sum::<f64>()
        / trials as f64;
    let diff = (mc - analytic).abs();
    outcome(
        diff <= 0.02 && oracle_err < 1e-9,
        format!(
            "Monte-Carlo {mc:.5} vs analytic {analytic:.5} (|diff| {diff:.5}); quadrature oracle vs enumeration {oracle_err:.1e}"
        ),
    )
}

fn criterion_6_numerics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x = Image::from_array(Array2::from_shape_fn((64, 64), |_| rng.random::<f64>())).unwrap();
    let k = forward(&x).unwrap();
    let back = inverse(&k).unwrap();
    let round_trip = (back.data() - x.data()).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let e_img: f64 = x.data().iter().map(|v| v * v).sum();
    let parseval = (k.energy() - e_img).abs() / e_img;

    let mut g = Array2::from_shape_fn((64, 64), |_| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let orig = g.clone();
    let norm = |a: &Array2<Complex64>| a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    haar::forward(&mut g, 3).unwrap();
    let haar_norm = (norm(&g) - norm(&orig)).abs() / norm(&orig);
    haar::inverse(&mut g, 3).unwrap();
    let haar_inv = (&g - &orig).iter().map(|v| v.norm()).fold(0.0, f64::max);

    let inst = frozen_instance();
    let mask = gaussian_mask(128, &frozen_mask_params(Direction::PhaseEncode), 43).unwrap();
    let sub = apply_mask(&forward(&inst.corrupted).unwrap(), &mask).unwrap();
    let out = ista_solve(&sub, &mask, &IstaParams::default()).unwrap();
    let worst_rise = out
        .objective
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    let mut check = out.image.clone();
    CenteredFft2::new(128, 128).unwrap().forward_inplace(&mut check).unwrap();
    let mut diff2 = 0.0;
    let mut y2 = 0.0;
    for ((r, c), v) in check.indexed_iter() {
        if mask.is_sampled(r, c) {
            let y = sub.data()[[r, c]];
            diff2 += (v - y).norm_sqr();
            y2 += y.norm_sqr();
        }
    }
    let consistency = (diff2 / y2).sqrt();

    let pass = round_trip <= 1e-9
        && parseval <= 1e-9
        && haar_norm <= 1e-9
        && haar_inv <= 1e-9
        && worst_rise <= 1e-9
        && consistency <= 1e-6;
    outcome(
        pass,
        format!(
            "round trip {round_trip:.1e}, Parseval {parseval:.1e}, Haar norm {haar_norm:.1e} / inverse {haar_inv:.1e}, \
             ISTA worst objective rise {worst_rise:.1e} over {} iters, data consistency {consistency:.1e}",
            out.objective.len() - 1
        ),
    )
}

fn criterion_7_metrics() -> Outcome {
    let x = shepp_logan(64).unwrap();
    let self_ssim = ssim(&x, &x, &SsimParams::default()).unwrap();
    let one = Image::from_array(Array2::from_elem((16, 16), 1.0)).unwrap();
    let gap = Image::from_array(Array2::from_elem((16, 16), 0.9)).unwrap();
    let p = psnr(&one, &gap, Peak::Value(1.0)).unwrap();
    let rows = vec![(
        "a.png".to_string(),
        MetricReport {
            psnr_db: 20.0,
            ssim: 1.0,
        },
    )];
    let mut buf = Vec::new();
    write_csv(&rows, &mut buf).unwrap();
    let csv = String::from_utf8(buf).unwrap();
    let schema = CSV_HEADER == "file,psnr_db,ssim" && csv == "file,psnr_db,ssim\na.png,20.000000,1.000000000\n";
    outcome(
        self_ssim == 1.0 && (p - 20.0).abs() <= 1e-12 && schema,
        format!("ssim(x,x) = {self_ssim}, PSNR(1 vs 0.9) = {p:.15} dB, CSV schema stable: {schema}"),
    )
}

fn run_cli(dir: &Path, args: &[&str]) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_kboot"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn kboot");
    (out.status.code().unwrap_or(-1), out.stdout)
}

fn dir_snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = walk(dir)
        .into_iter()
        .map(|p| {
            let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
            (rel, std::fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

fn criterion_8_determinism() -> Outcome {
    let script: &[&[&str]] = &[
        &[
            "simulate", "--phantom", "shepp", "--size", "64", "--motion", "rigid", "--delta-max", "10",
            "--seed", "7", "--output", "sim.png", "--clean-out", "clean.png", "--kspace-out", "sim.ksp",
            "--dump-trace", "trace.csv",
        ],
        &[
            "simulate", "--phantom", "texture", "--size", "64", "--motion", "periodic", "--seed", "3",
            "--output", "per.pgm",
        ],
        &[
            "correct", "--input", "sim.png", "--reference", "clean.png", "--branches", "4",
            "--output", "cor.png", "--dump-intermediates", "branches", "--dump-masks", "masks.txt",
        ],
        &["correct", "--input", "sim.ksp", "--recon", "zf", "--output", "cor_k.png"],
        &["propcheck", "--trials", "50", "--seed", "3", "--output", "jensen.csv"],
    ];
    let mut snapshots = Vec::new();
    let mut codes = Vec::new();
    let mut stdouts = Vec::new();
    let tmp = tempfile::tempdir().unwrap();
    for run in 0..2 {
        let dir = tmp.path().join(format!("run{run}"));
        std::fs::create_dir_all(dir.join("eval_ref")).unwrap();
        std::fs::create_dir_all(dir.join("eval_test")).unwrap();
        let mut out = Vec::new();
        for args in script {
            let (code, stdout) = run_cli(&dir, args);
            codes.push(code);
            out.push(stdout);
        }
        for name in ["clean.png", "clean.png.meta"] {
            std::fs::copy(dir.join(name), dir.join("eval_ref").join(name)).unwrap();
        }
        std::fs::copy(dir.join("cor.png"), dir.join("eval_test/clean.png")).unwrap();
        std::fs::copy(dir.join("cor.png.meta"), dir.join("eval_test/clean.png.meta")).unwrap();
        let (code, stdout) = run_cli(
            &dir,
            &["evaluate", "--reference-dir", "eval_ref", "--test-dir", "eval_test", "--output", "eval.csv"],
        );
        codes.push(code);
        out.push(stdout);
        stdouts.push(out);
        snapshots.push(dir_snapshot(&dir));
    }
    let all_ok = codes.iter().all(|&c| c == 0);
    let same_files = snapshots[0] == snapshots[1];
    let same_stdout = stdouts[0] == stdouts[1];
    outcome(
        all_ok && same_files && same_stdout,
        format!(
            "{} commands x 2 runs, exit codes ok: {all_ok}, {} output files byte-identical: {same_files}, stdout identical: {same_stdout}",
            script.len() + 1,
            snapshots[0].len()
        ),
    )
}

fn main() {
    let frozen = frozen_run();
    let results = [
        ("1 Jensen aggregation property", criterion_1_jensen()),
        ("2 shift-theorem oracle", criterion_2_shift()),
        ("3 end-to-end correction", criterion_3_end_to_end(&frozen)),
        ("4 subsampling direction ablation", criterion_4_direction(&frozen)),
        ("5 outlier-rejection statistics", criterion_5_rejection()),
        ("6 numerical core", criterion_6_numerics()),
        ("7 metrics", criterion_7_metrics()),
        ("8 CLI determinism", criterion_8_determinism()),
    ];
    let mut failed = 0;
    for (name, r) in &results {
        println!("[{}] criterion {name}: {}", if r.pass { "PASS" } else { "FAIL" }, r.detail);
        if !r.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
