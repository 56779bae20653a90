//! Command-line front end: `simulate`, `correct`, `evaluate`, `propcheck`.
//!
//! Any command accepts `--config FILE` with `key=value` lines (keys are
//! long flag names without dashes). Values from the file are applied first
//! and flags given on the command line override them.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::aggregate::{
    bootstrap_correct, bootstrap_correct_kspace, jensen_check, AggregationConfig,
    AggregationResult, JensenReport,
};
use crate::error::{Error, Result};
use crate::fft::{forward, inverse, Image};
use crate::io::{is_kspace_file, load_image, load_kspace, save_image, save_kspace, ImageFormat};
use crate::metrics::{evaluate, format_psnr, write_csv, MetricReport};
use crate::motion::{apply_trace, periodic_trace, random_rigid_trace, ParamValue, PeriodicParams};
use crate::phantom::{shepp_logan, texture_phantom};
use crate::recon::{IstaParams, Lambda, Recon};
use crate::sampling::{Direction, MaskParams};

pub const THREADS_ENV: &str = "KBOOT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "kboot", version, about = "MR motion-artifact simulation and bootstrap-aggregation correction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Corrupt a clean image with simulated motion.
    Simulate(SimulateArgs),
    /// Remove motion artifacts by bootstrap subsampling and aggregation.
    Correct(CorrectArgs),
    /// PSNR/SSIM over paired image directories.
    Evaluate(EvaluateArgs),
    /// Monte-Carlo check that aggregation never increases squared error.
    Propcheck(PropcheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PhantomKind {
    Shepp,
    Texture,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MotionKind {
    Rigid,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReconChoice {
    Zf,
    Ista,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirectionChoice {
    Pe,
    Fe,
}

impl From<DirectionChoice> for Direction {
    fn from(d: DirectionChoice) -> Self {
        match d {
            DirectionChoice::Pe => Direction::PhaseEncode,
            DirectionChoice::Fe => Direction::FrequencyEncode,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatChoice {
    /// From the output extension (.pgm gives pgm16, anything else png16).
    Auto,
    Png16,
    Pgm16,
}

impl FormatChoice {
    fn resolve(self, path: &Path) -> ImageFormat {
        match self {
            FormatChoice::Png16 => ImageFormat::Png16,
            FormatChoice::Pgm16 => ImageFormat::Pgm16,
            FormatChoice::Auto => ImageFormat::from_path(path).unwrap_or_default(),
        }
    }

    fn extension(self, path: &Path) -> &'static str {
        match self.resolve(path) {
            ImageFormat::Png16 => "png",
            ImageFormat::Pgm16 => "pgm",
        }
    }
}

/// Parses an angle in radians; accepts `0.1pi`, `pi/10`, `pi` and plain numbers.
pub fn parse_angle(s: &str) -> std::result::Result<f64, String> {
    let t = s.trim().to_ascii_lowercase();
    let bad = || format!("invalid angle '{s}'");
    let value = if let Some(rest) = t.strip_prefix("pi/") {
        std::f64::consts::PI / rest.parse::<f64>().map_err(|_| bad())?
    } else if let Some(coef) = t.strip_suffix("pi") {
        let coef = coef.trim_end_matches('*');
        let c = match coef {
            "" => 1.0,
            "-" => -1.0,
            _ => coef.parse::<f64>().map_err(|_| bad())?,
        };
        c * std::f64::consts::PI
    } else {
        t.parse::<f64>().map_err(|_| bad())?
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(bad())
    }
}

fn parse_param(s: &str) -> std::result::Result<ParamValue, String> {
    if s.eq_ignore_ascii_case("random") {
        Ok(ParamValue::Random)
    } else {
        parse_angle(s).map(ParamValue::Fixed)
    }
}

fn parse_lambda(s: &str) -> std::result::Result<Lambda, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(Lambda::Relative(0.01));
    }
    if let Some(rel) = s.strip_prefix("rel:") {
        return rel
            .parse()
            .map(Lambda::Relative)
            .map_err(|_| format!("invalid relative lambda '{s}'"));
    }
    s.parse()
        .map(Lambda::Absolute)
        .map_err(|_| format!("invalid lambda '{s}'"))
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct SimulateArgs {
    /// key=value file applied before command-line flags [default: none]
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Clean input image; replaces the phantom [default: none]
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = PhantomKind::Shepp)]
    pub phantom: PhantomKind,
    /// Phantom side length in pixels
    #[arg(long, default_value_t = 128)]
    pub size: usize,
    #[arg(long, value_enum, default_value_t = MotionKind::Rigid)]
    pub motion: MotionKind,
    /// Motion-free central half-width in radians per pixel (accepts `0.1pi`)
    #[arg(long, default_value = "0.1pi", value_parser = parse_angle)]
    pub k0: f64,
    /// Rigid motion: displacement bound in pixels
    #[arg(long, default_value_t = 37.0)]
    pub delta_max: f64,
    /// Periodic motion: frequency constant, number or `random` (0.1..5)
    #[arg(long, default_value = "random", value_parser = parse_param)]
    pub alpha: ParamValue,
    /// Periodic motion: phase constant in radians or `random` (0..pi/4)
    #[arg(long, default_value = "random", value_parser = parse_param)]
    pub beta: ParamValue,
    /// Periodic motion: amplitude in pixels or `random` (0..37)
    #[arg(long, default_value = "random", value_parser = parse_param)]
    pub delta: ParamValue,
    /// Accept periodic constants outside their simulation ranges
    #[arg(long, default_value_t = false)]
    pub allow_out_of_range: bool,
    /// Seed for the motion trace and the texture phantom
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "corrupted.png")]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatChoice::Auto)]
    pub format: FormatChoice,
    /// Also write the corrupted k-space as KSP1 [default: none]
    #[arg(long)]
    pub kspace_out: Option<PathBuf>,
    /// Also write the clean image [default: none]
    #[arg(long)]
    pub clean_out: Option<PathBuf>,
    /// Write the motion trace as CSV (index,k_y,delta,phi) [default: none]
    #[arg(long)]
    pub dump_trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct CorrectArgs {
    /// key=value file applied before command-line flags [default: none]
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Corrupted image or KSP1 k-space file
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "corrected.png")]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatChoice::Auto)]
    pub format: FormatChoice,
    /// Number of bootstrap branches N
    #[arg(long, default_value_t = 15)]
    pub branches: usize,
    /// Comma-separated branch weights, or `uniform`
    #[arg(long, default_value = "uniform")]
    pub weights: String,
    /// Acceleration factor R of each branch mask
    #[arg(long, default_value_t = 3.0)]
    pub accel: f64,
    /// Always-sampled central fraction (0.11 liver-like, 0.06 brain-like)
    #[arg(long, default_value_t = 0.11)]
    pub acs: f64,
    /// Gaussian density width as a fraction of the line count
    #[arg(long, default_value_t = 0.25)]
    pub sigma: f64,
    /// Subsampling direction: phase encoding or frequency encoding
    #[arg(long, value_enum, default_value_t = DirectionChoice::Pe)]
    pub direction: DirectionChoice,
    #[arg(long, value_enum, default_value_t = ReconChoice::Ista)]
    pub recon: ReconChoice,
    /// ISTA threshold: `auto` (0.01 x max Haar coefficient), `rel:<f>`, or absolute value
    #[arg(long, default_value = "auto", value_parser = parse_lambda)]
    pub lambda: Lambda,
    #[arg(long, default_value_t = 50)]
    pub iters: usize,
    /// Haar decomposition levels
    #[arg(long, default_value_t = 3)]
    pub levels: usize,
    /// Fail on sides not divisible by 2^levels instead of zero-padding
    #[arg(long, default_value_t = false)]
    pub no_pad: bool,
    /// Base seed; branch n uses seed + n
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Clean reference image for metrics [default: none]
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Write every branch image and mask into this directory [default: none]
    #[arg(long)]
    pub dump_intermediates: Option<PathBuf>,
    /// Write branch masks as 0/1 lines [default: none]
    #[arg(long)]
    pub dump_masks: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct EvaluateArgs {
    /// key=value file applied before command-line flags [default: none]
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub reference_dir: PathBuf,
    #[arg(long)]
    pub test_dir: PathBuf,
    /// CSV destination, `-` for stdout
    #[arg(long, default_value = "-")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct PropcheckArgs {
    /// key=value file applied before command-line flags [default: none]
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Side length of the random test images
    #[arg(long, default_value_t = 32)]
    pub size: usize,
    /// Estimates aggregated per trial
    #[arg(long, default_value_t = 15)]
    pub estimates: usize,
    /// Write one `lhs,rhs,holds` row per trial [default: none]
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn config_flags(path: &Path) -> Result<Vec<OsString>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("{}:{}: expected key=value", path.display(), lineno + 1))
        })?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        match value {
            "true" => out.push(format!("--{key}").into()),
            "false" => {}
            _ => out.push(format!("--{key}={value}").into()),
        }
    }
    Ok(out)
}

/// Inserts `--config` file entries right after the subcommand so that later
/// command-line flags override them.
pub fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut config = None;
    let mut it = args.iter().enumerate();
    while let Some((_, a)) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            config = it.next().map(|(_, v)| PathBuf::from(v));
        } else if let Some(v) = s.strip_prefix("--config=") {
            config = Some(PathBuf::from(v));
        }
    }
    let Some(path) = config else {
        return Ok(args);
    };
    let sub = args
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
        .map(|p| p + 1);
    let Some(sub) = sub else {
        return Ok(args);
    };
    let mut out: Vec<OsString> = args[..=sub].to_vec();
    out.extend(config_flags(&path)?);
    out.extend_from_slice(&args[sub + 1..]);
    Ok(out)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn print_metrics(label: &str, m: &MetricReport) {
    println!("{label}: psnr_db={} ssim={:.6}", format_psnr(m.psnr_db), m.ssim);
}

pub fn simulate(args: &SimulateArgs) -> Result<i32> {
    let clean = match &args.input {
        Some(p) => load_image(p)?,
        None => match args.phantom {
            PhantomKind::Shepp => shepp_logan(args.size)?,
            PhantomKind::Texture => texture_phantom(args.size, args.seed)?,
        },
    };
    let n_pe = clean.n_pe();
    let trace = match args.motion {
        MotionKind::Rigid => random_rigid_trace(n_pe, args.k0, args.delta_max, args.seed)?,
        MotionKind::Periodic => {
            let p = PeriodicParams {
                k0: args.k0,
                alpha: args.alpha,
                beta: args.beta,
                delta: args.delta,
                allow_out_of_range: args.allow_out_of_range,
            };
            periodic_trace(n_pe, &p, args.seed)?
        }
    };
    let corrupted_k = apply_trace(&forward(&clean)?, &trace)?;
    // A trace that touches no line is the identity; skip the lossy round trip.
    let corrupted = if trace.corrupted().is_empty() {
        clean.clone()
    } else {
        inverse(&corrupted_k)?
    };

    save_image(&corrupted, &args.output, args.format.resolve(&args.output))?;
    if let Some(p) = &args.clean_out {
        save_image(&clean, p, args.format.resolve(p))?;
    }
    if let Some(p) = &args.kspace_out {
        save_kspace(&corrupted_k, p)?;
    }
    if let Some(p) = &args.dump_trace {
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).map_err(|e| Error::io(p, e))?;
        write_file(p, &buf)?;
    }
    println!("corrupted_lines={}/{}", trace.corrupted().len(), n_pe);
    print_metrics("corrupted vs clean", &evaluate(&clean, &corrupted)?);
    Ok(0)
}

fn parse_weights(spec: &str, branches: usize) -> Result<Vec<f64>> {
    if spec.trim().eq_ignore_ascii_case("uniform") {
        return Ok(vec![1.0 / branches.max(1) as f64; branches]);
    }
    spec.split(',')
        .map(|w| {
            w.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("invalid weight '{w}'")))
        })
        .collect()
}

pub fn correct_config(args: &CorrectArgs) -> Result<AggregationConfig> {
    let recon = match args.recon {
        ReconChoice::Zf => Recon::ZeroFilled,
        ReconChoice::Ista => Recon::Ista(IstaParams {
            lambda: args.lambda,
            iters: args.iters,
            levels: args.levels,
            pad: !args.no_pad,
        }),
    };
    let mask_params = MaskParams {
        accel: args.accel,
        acs_frac: args.acs,
        sigma_frac: args.sigma,
        direction: args.direction.into(),
    };
    let mut cfg = AggregationConfig::uniform(args.branches, mask_params, Arc::new(recon), args.seed);
    cfg.weights = parse_weights(&args.weights, args.branches)?;
    cfg.keep_branch_images = args.dump_intermediates.is_some();
    cfg.validate()?;
    Ok(cfg)
}

fn dump_intermediates(dir: &Path, result: &AggregationResult, format: FormatChoice) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let ext = format.extension(Path::new(""));
    for (n, mask) in result.branch_masks.iter().enumerate() {
        let mask_path = dir.join(format!("branch_{:02}_mask.txt", n + 1));
        write_file(&mask_path, format!("{}\n", mask.to_bits()).as_bytes())?;
    }
    if let Some(images) = &result.branch_images {
        for (n, img) in images.iter().enumerate() {
            let p = dir.join(format!("branch_{:02}.{ext}", n + 1));
            save_image(img, &p, format.resolve(&p))?;
        }
    }
    Ok(())
}

pub fn correct(args: &CorrectArgs) -> Result<i32> {
    let cfg = correct_config(args)?;
    let (input_image, result) = if is_kspace_file(&args.input)? {
        let k = load_kspace(&args.input)?;
        (inverse(&k)?, bootstrap_correct_kspace(&k, &cfg)?)
    } else {
        let img = load_image(&args.input)?;
        let r = bootstrap_correct(&img, &cfg)?;
        (img, r)
    };

    save_image(&result.corrected, &args.output, args.format.resolve(&args.output))?;
    if let Some(dir) = &args.dump_intermediates {
        let fmt = if args.format == FormatChoice::Auto {
            match args.format.resolve(&args.output) {
                ImageFormat::Png16 => FormatChoice::Png16,
                ImageFormat::Pgm16 => FormatChoice::Pgm16,
            }
        } else {
            args.format
        };
        dump_intermediates(dir, &result, fmt)?;
    }
    if let Some(p) = &args.dump_masks {
        let text: String = result
            .branch_masks
            .iter()
            .map(|m| format!("{}\n", m.to_bits()))
            .collect();
        write_file(p, text.as_bytes())?;
    }
    if let Some(r) = &args.reference {
        let reference = load_image(r)?;
        print_metrics("input vs reference", &evaluate(&reference, &input_image)?);
        print_metrics("corrected vs reference", &evaluate(&reference, &result.corrected)?);
    }
    Ok(0)
}

fn image_files(dir: &Path) -> Result<Vec<String>> {
    let mut names = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.is_file() && ImageFormat::from_path(&path).is_some() {
            names.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    names.sort();
    Ok(names)
}

pub fn evaluate_dirs(args: &EvaluateArgs) -> Result<i32> {
    let refs = image_files(&args.reference_dir)?;
    let tests = image_files(&args.test_dir)?;
    for name in &refs {
        if tests.binary_search(name).is_err() {
            return Err(Error::Config(format!(
                "{} has no counterpart in {}",
                name,
                args.test_dir.display()
            )));
        }
    }
    for name in &tests {
        if refs.binary_search(name).is_err() {
            return Err(Error::Config(format!(
                "{} has no counterpart in {}",
                name,
                args.reference_dir.display()
            )));
        }
    }
    let mut rows = Vec::with_capacity(refs.len());
    for name in refs {
        let reference = load_image(&args.reference_dir.join(&name))?;
        let test = load_image(&args.test_dir.join(&name))?;
        rows.push((name, evaluate(&reference, &test)?));
    }
    let mut buf = Vec::new();
    write_csv(&rows, &mut buf).map_err(|e| Error::io(&args.output, e))?;
    if args.output.as_os_str() == "-" {
        std::io::stdout()
            .write_all(&buf)
            .map_err(|e| Error::io("<stdout>", e))?;
    } else {
        write_file(&args.output, &buf)?;
    }
    Ok(0)
}

/// Random truth, estimates and simplex weights for one aggregation trial.
pub fn random_trial(rng: &mut ChaCha8Rng, size: usize, count: usize) -> Result<(Image, Vec<Image>, Vec<f64>)> {
    let image = |rng: &mut ChaCha8Rng| {
        Image::from_vec(size, size, (0..size * size).map(|_| rng.random::<f64>()).collect())
    };
    let truth = image(rng)?;
    let estimates = (0..count).map(|_| image(rng)).collect::<Result<Vec<_>>>()?;
    let raw: Vec<f64> = (0..count).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = raw.iter().sum();
    let weights = raw.into_iter().map(|w| w / total).collect();
    Ok((truth, estimates, weights))
}

pub fn propcheck(args: &PropcheckArgs) -> Result<i32> {
    if args.estimates == 0 {
        return Err(Error::Config("--estimates must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut reports: Vec<JensenReport> = Vec::with_capacity(args.trials);
    for _ in 0..args.trials {
        let (truth, estimates, weights) = random_trial(&mut rng, args.size, args.estimates)?;
        reports.push(jensen_check(&truth, &estimates, &weights)?);
    }
    if let Some(p) = &args.output {
        let mut buf = b"lhs,rhs,holds\n".to_vec();
        for r in &reports {
            r.write_csv_row(&mut buf).map_err(|e| Error::io(p, e))?;
        }
        write_file(p, &buf)?;
    }
    let failures = reports.iter().filter(|r| !r.holds).count();
    let worst = reports.iter().map(JensenReport::gap).fold(f64::NEG_INFINITY, f64::max);
    println!("trials={} failures={} worst_rhs_minus_lhs={:e}", reports.len(), failures, worst);
    Ok(if failures == 0 { 0 } else { 1 })
}

pub fn run(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Correct(a) => correct(a),
        Command::Evaluate(a) => evaluate_dirs(a),
        Command::Propcheck(a) => propcheck(a),
    }
}

fn thread_pool() -> Result<Option<rayon::ThreadPool>> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(None);
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_ENV}={v} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map(Some)
        .map_err(|e| Error::Config(e.to_string()))
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args(args: impl IntoIterator<Item = OsString>) -> i32 {
    let args = match expand_config(args.into_iter().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let outcome = match thread_pool() {
        Ok(Some(pool)) => pool.install(|| run(&cli)),
        Ok(None) => run(&cli),
        Err(e) => Err(e),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
