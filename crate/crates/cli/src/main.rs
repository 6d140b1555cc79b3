use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use vline_core::container::{load_container, save_container, Container};
use vline_core::{
    condition_number, export_pgm, forward_vline, lambda_sweep, mismatch_experiment, poisson_noise,
    relative_l2_error, singular_values, AbelKernelMatrix, CartesianImage, EllipsePhantom, KernelBank,
    ReconstructionPlan, ScanConfig, VSinogram,
};

/// Simulation and reconstruction for attenuated V-line data.
#[derive(Parser, Debug)]
#[command(name = "vlt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Rasterize a test phantom.
    Phantom(PhantomArgs),
    /// Simulate V-line data from an image.
    Forward(ForwardArgs),
    /// Replace data by Poisson photon counts.
    Noise(NoiseArgs),
    /// Reconstruct an image from V-line data.
    Recon(ReconArgs),
    /// Reconstruction error over a list of regularization parameters.
    Sweep(SweepArgs),
    /// Reconstruction error when assuming wrong attenuation values.
    Mismatch(MismatchArgs),
    /// Kernel matrix diagnostics.
    Diag(DiagArgs),
    /// Relative l2 error of an image against a reference.
    Error(ErrorArgs),
    /// Write an image as an 8-bit PGM.
    ExportPgm(ExportArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Preset {
    ThreeDiscs,
    Disc,
}

#[derive(Args, Debug)]
struct PhantomArgs {
    #[arg(long, value_enum, conflicts_with = "spec")]
    preset: Option<Preset>,
    /// JSON list of ellipse components.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long = "M", default_value_t = 100)]
    half_width: usize,
    #[arg(long = "R", default_value_t = 8.0)]
    radius: f64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct ForwardArgs {
    #[arg(long, default_value_t = 0.15)]
    mu: f64,
    #[arg(long = "P", default_value_t = 100)]
    num_angles: usize,
    #[arg(long = "Q", default_value_t = 100)]
    num_radii: usize,
    #[arg(short, long)]
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct NoiseArgs {
    #[arg(long, default_value_t = 1_894_918)]
    total_counts: u64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(short, long)]
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
}

/// Reconstruction settings shared by `recon`, `sweep` and `mismatch`.
/// Anything left unset falls back to the `--config` file, then to the data.
#[derive(Args, Debug, Default)]
struct Settings {
    /// Attenuation assumed by the inversion; defaults to the value stored
    /// with the data.
    #[arg(long)]
    mu: Option<f64>,
    /// Regularization of the zeroth harmonic (0 = direct solve).
    #[arg(long)]
    lambda0: Option<f64>,
    /// Output half width M.
    #[arg(long = "M")]
    half_width: Option<usize>,
    /// JSON object with any of `mu`, `lambda`, `lambda0`, `M`.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Default, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    mu: Option<f64>,
    lambda: Option<f64>,
    lambda0: Option<f64>,
    #[serde(rename = "M")]
    half_width: Option<usize>,
}

#[derive(Args, Debug)]
struct ReconArgs {
    #[arg(long)]
    lambda: Option<f64>,
    #[command(flatten)]
    settings: Settings,
    /// Print per-stage wall-clock times as JSON.
    #[arg(long)]
    timings: bool,
    #[arg(short, long)]
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    lambdas: Vec<f64>,
    #[command(flatten)]
    settings: Settings,
    #[arg(short, long)]
    input: PathBuf,
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct MismatchArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    mus: Vec<f64>,
    #[arg(long, default_value_t = vline_core::recon::MISMATCH_LAMBDA)]
    lambda: f64,
    #[arg(long, default_value_t = 0.0)]
    lambda0: f64,
    #[arg(short, long)]
    input: PathBuf,
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct DiagArgs {
    /// Write condition numbers of K_0 .. K_{n-max}.
    #[arg(long, requires = "output")]
    cond: bool,
    #[arg(long, default_value_t = 50)]
    n_max: i64,
    /// Also write every singular value to this CSV.
    #[arg(long, requires = "cond")]
    spectra: Option<PathBuf>,
    /// Store the kernel matrix of this harmonic as a container.
    #[arg(long, conflicts_with = "cond", requires = "output", allow_negative_numbers = true)]
    kernel: Option<i64>,
    #[arg(long, default_value_t = 0.15)]
    mu: f64,
    #[arg(long = "R", default_value_t = 8.0)]
    radius: f64,
    #[arg(long = "Q", default_value_t = 100)]
    num_radii: usize,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ErrorArgs {
    #[arg(short = 'a')]
    image: PathBuf,
    #[arg(short = 'b')]
    reference: PathBuf,
}

#[derive(Args, Debug)]
struct ExportArgs {
    #[arg(short, long)]
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
}

/// Failure that should be reported as a usage error.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = configure_threads().and_then(|()| run(cli.command));
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<Usage>() => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("VLT_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| usage(format!("VLT_THREADS must be a non-negative integer, got {raw:?}")))?;
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring the thread pool")?;
    }
    Ok(())
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Phantom(a) => phantom(a),
        Command::Forward(a) => forward(a),
        Command::Noise(a) => noise(a),
        Command::Recon(a) => recon(a),
        Command::Sweep(a) => sweep(a),
        Command::Mismatch(a) => mismatch(a),
        Command::Diag(a) => diag(a),
        Command::Error(a) => error(a),
        Command::ExportPgm(a) => export(a),
    }
}

fn read_image(path: &Path) -> Result<CartesianImage> {
    let c = load_container(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(c.into_image()?)
}

fn read_sinogram(path: &Path) -> Result<VSinogram> {
    let c = load_container(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(c.into_sinogram()?)
}

fn write(path: &Path, object: impl Into<Container>) -> Result<()> {
    save_container(path, &object.into()).with_context(|| format!("writing {}", path.display()))
}

fn write_csv(path: &Path, header: &str, rows: &[(String, f64)]) -> Result<()> {
    let mut out = format!("{header}\n");
    for (key, value) in rows {
        writeln!(out, "{key},{value}")?;
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

fn warn_about(cfg: &ScanConfig) -> Result<()> {
    let report = cfg.validate();
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if !report.is_ok() {
        bail!("invalid configuration: {}", report.errors.join("; "));
    }
    Ok(())
}

fn phantom(a: PhantomArgs) -> Result<()> {
    let phantom = match (a.preset, &a.spec) {
        (Some(Preset::ThreeDiscs), _) => EllipsePhantom::three_discs(),
        (Some(Preset::Disc), _) => EllipsePhantom::centered_disc(2.0, 1.0),
        (None, Some(path)) => {
            EllipsePhantom::load(path).with_context(|| format!("reading {}", path.display()))?
        }
        (None, None) => return Err(usage("one of --preset or --spec is required")),
    };
    let img = phantom.rasterize(a.half_width, a.radius)?;
    write(&a.output, img)
}

fn forward(a: ForwardArgs) -> Result<()> {
    let img = read_image(&a.input)?;
    let cfg = ScanConfig::new(img.radius(), a.mu, a.num_angles, a.num_radii, img.half_width(), 0.0, 0.0);
    warn_about(&cfg)?;
    write(&a.output, forward_vline(&img, &cfg)?)
}

fn noise(a: NoiseArgs) -> Result<()> {
    let sino = read_sinogram(&a.input)?;
    let noisy = poisson_noise(&sino, a.total_counts, a.seed)?;
    println!("total_counts,{}", noisy.total_counts);
    println!("max_bin_count,{}", noisy.max_bin_count);
    write(&a.output, noisy.sinogram)
}

/// Resolved scan configuration for inverting `sino`.
fn resolve(settings: &Settings, lambda: Option<f64>, sino: &VSinogram) -> Result<ScanConfig> {
    let file = match &settings.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str::<ConfigFile>(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => ConfigFile::default(),
    };
    let cfg = ScanConfig::new(
        sino.radius(),
        settings.mu.or(file.mu).unwrap_or(sino.mu()),
        sino.num_angles(),
        sino.num_radii(),
        settings.half_width.or(file.half_width).unwrap_or(100),
        lambda.or(file.lambda).unwrap_or(8e-4),
        settings.lambda0.or(file.lambda0).unwrap_or(0.0),
    );
    warn_about(&cfg)?;
    Ok(cfg)
}

fn recon(a: ReconArgs) -> Result<()> {
    let sino = read_sinogram(&a.input)?;
    let cfg = resolve(&a.settings, a.lambda, &sino)?;
    let start = Instant::now();
    let plan = ReconstructionPlan::new(&cfg)?;
    let assembly = start.elapsed();
    let (img, stages) = plan.reconstruct_timed(&sino)?;
    if a.timings {
        let report = serde_json::json!({
            "assembly_s": assembly.as_secs_f64(),
            "analyze_s": stages.analyze.as_secs_f64(),
            "solve_s": stages.solve.as_secs_f64(),
            "synthesize_s": stages.synthesize.as_secs_f64(),
            "resample_s": stages.resample.as_secs_f64(),
            "total_s": stages.total().as_secs_f64(),
        });
        println!("{report}");
    }
    write(&a.output, img)
}

fn sweep(a: SweepArgs) -> Result<()> {
    let sino = read_sinogram(&a.input)?;
    let reference = read_image(&a.reference)?;
    let mut cfg = resolve(&a.settings, None, &sino)?;
    cfg.half_width = reference.half_width();
    let mut lambdas = a.lambdas.clone();
    lambdas.sort_by(f64::total_cmp);
    if lambdas.iter().any(|l| !(*l > 0.0)) || lambdas.windows(2).any(|w| w[0] == w[1]) {
        return Err(usage("--lambdas must be distinct positive numbers"));
    }
    let curve = lambda_sweep(&sino, &cfg, &lambdas, &reference)?;
    let rows: Vec<(String, f64)> = curve.iter().map(|(l, e)| (l.to_string(), *e)).collect();
    write_csv(&a.output, "lambda,relative_error", &rows)
}

fn mismatch(a: MismatchArgs) -> Result<()> {
    let sino = read_sinogram(&a.input)?;
    let reference = read_image(&a.reference)?;
    let cfg = ScanConfig::new(
        sino.radius(),
        sino.mu(),
        sino.num_angles(),
        sino.num_radii(),
        reference.half_width(),
        a.lambda,
        a.lambda0,
    );
    warn_about(&cfg)?;
    let errors = mismatch_experiment(&sino, &cfg, &a.mus, &reference)?;
    let rows: Vec<(String, f64)> = errors.iter().map(|(m, e)| (m.to_string(), *e)).collect();
    write_csv(&a.output, "assumed_mu,relative_error", &rows)
}

fn diag(a: DiagArgs) -> Result<()> {
    if a.n_max < 0 {
        return Err(usage("--n-max must be non-negative"));
    }
    let num_angles = 2 * (a.n_max.max(a.kernel.map_or(0, i64::abs)) as usize + 1);
    let cfg = ScanConfig::new(a.radius, a.mu, num_angles, a.num_radii, 1, 0.0, 0.0);
    warn_about(&cfg)?;
    let output = a.output.as_deref().ok_or_else(|| usage("-o is required"))?;
    if let Some(n) = a.kernel {
        return write(output, AbelKernelMatrix::assemble(n, &cfg)?);
    }
    if !a.cond {
        return Err(usage("diag needs --cond or --kernel"));
    }
    let bank = KernelBank::assemble(&cfg)?;
    let mut rows = Vec::new();
    let mut spectra = String::from("n,index,singular_value\n");
    for n in 0..=a.n_max {
        rows.push((n.to_string(), condition_number(bank.get(n))?));
        if a.spectra.is_some() {
            let mut s = singular_values(bank.get(n))?;
            s.sort_by(|x, y| y.total_cmp(x));
            for (i, v) in s.iter().enumerate() {
                writeln!(spectra, "{n},{i},{v}")?;
            }
        }
    }
    write_csv(output, "n,condition_number", &rows)?;
    if let Some(path) = &a.spectra {
        fs::write(path, spectra).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn error(a: ErrorArgs) -> Result<()> {
    let img = read_image(&a.image)?;
    let reference = read_image(&a.reference)?;
    println!("{}", relative_l2_error(&img, &reference)?);
    Ok(())
}

fn export(a: ExportArgs) -> Result<()> {
    let img = read_image(&a.input)?;
    export_pgm(&img, &a.output).with_context(|| format!("writing {}", a.output.display()))
}
