use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use muscat::config::RunConfig;
use muscat::evaluate::{cmd_evaluate, Mode};
use muscat::manifest::Manifest;
use muscat::pipeline::{cmd_generate, SLICES_SIDECAR};
use muscat::raw::{self, SampleFormat, Sidecar};
use muscat::Error;

/// Muon scattering tomography datasets for reinforced concrete.
#[derive(Parser)]
#[command(name = "muscat", version)]
struct Cli {
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate samples and write images, labels and a manifest.
    Generate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_parser = parse_seed)]
        seed: Option<u64>,
        #[arg(long)]
        samples: Option<u32>,
        #[arg(long)]
        days: Option<u32>,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the resolved configuration and exit.
        #[arg(long)]
        print_config: bool,
    },
    /// Score predictions against a generated run.
    Evaluate {
        /// Run directory or manifest file.
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long, value_enum, default_value = "image-quality")]
        mode: EvalMode,
        /// Output table; defaults to `<run>/metrics_<mode>.csv`.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Summarise a manifest, run directory or config file.
    Inspect { path: PathBuf },
    /// Render a raw slice, or one z plane of a raw volume, as a 16-bit PNG.
    ExportPng {
        input: PathBuf,
        #[arg(long)]
        z: Option<usize>,
        #[arg(long, short)]
        output: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalMode {
    ImageQuality,
    Segmentation,
}

/// Like `println!`, but a closed stdout (e.g. piped into `head`) is not a panic.
macro_rules! out {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

macro_rules! out_raw {
    ($s:expr) => {{
        use std::io::Write;
        let _ = write!(std::io::stdout(), "{}", $s);
    }};
}

fn parse_seed(s: &str) -> Result<u64, String> {
    muscat::serde_u64::parse(s)
}

enum Failure {
    Partial(anyhow::Error),
    Config(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Partial(e)
    }
}

fn config_error(e: Error) -> Failure {
    match e {
        Error::Validation(_) | Error::Parse { .. } | Error::UnknownMaterial(_) => Failure::Config(e.into()),
        other => Failure::Partial(other.into()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Partial(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Config(e)) => {
            eprintln!("invalid configuration: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Generate { config, seed, samples, days, jobs, out, print_config } => {
            let mut cfg = match &config {
                Some(p) => RunConfig::load(p).map_err(config_error)?,
                None => RunConfig::default(),
            };
            if let Some(v) = seed {
                cfg.run.seed = v;
            }
            if let Some(v) = samples {
                cfg.run.samples = v;
            }
            if let Some(v) = days {
                cfg.run.days = v;
                cfg.run.day_boundaries.retain(|&d| d <= v);
            }
            if let Some(v) = jobs {
                cfg.run.jobs = v;
            }
            if let Some(v) = out {
                cfg.run.out = v;
            }
            cfg.validate().map_err(config_error)?;
            if print_config {
                out_raw!(cfg.to_toml().map_err(config_error)?);
                return Ok(());
            }
            let manifest = cmd_generate(&cfg).map_err(config_error)?;
            let failed: Vec<_> = manifest.failures().map(|s| format!("sample {}: {}", s.id, s.error.as_deref().unwrap_or(""))).collect();
            out!(
                "wrote {} samples to {} ({} failed)",
                manifest.samples.len(),
                cfg.run.out.display(),
                failed.len()
            );
            if !failed.is_empty() {
                return Err(anyhow::anyhow!("{}", failed.join("\n")).into());
            }
            Ok(())
        }
        Command::Evaluate { run, predictions, mode, report } => {
            let (manifest, root) = Manifest::load(&run).context("loading manifest")?;
            let (mode, tag) = match mode {
                EvalMode::ImageQuality => (Mode::ImageQuality, "image_quality"),
                EvalMode::Segmentation => (Mode::Segmentation, "segmentation"),
            };
            let eval = cmd_evaluate(&manifest, &root, &predictions, mode).context("evaluating")?;
            let report_path = report.unwrap_or_else(|| root.join(format!("metrics_{tag}.csv")));
            eval.report.write_csv(&report_path).context("writing report")?;
            for row in eval.report.rows() {
                out!("{:>4} {:<5} {:<12} {:>10.4} (n={})", row.sampling_rate, row.metric.name(), row.class, row.mean, row.n);
            }
            if eval.skipped_empty > 0 {
                out!("skipped {} pairs with an empty ground-truth slice", eval.skipped_empty);
            }
            if !eval.missing.is_empty() {
                for p in &eval.missing {
                    eprintln!("missing: {}", p.display());
                }
                return Err(anyhow::anyhow!("{} prediction files missing", eval.missing.len()).into());
            }
            Ok(())
        }
        Command::Inspect { path } => inspect(&path).map_err(Failure::from),
        Command::ExportPng { input, z, output } => export_png(&input, z, &output).map_err(Failure::from),
    }
}

fn inspect(path: &Path) -> anyhow::Result<()> {
    let is_manifest = path.is_dir() || path.file_name().is_some_and(|n| n == muscat::manifest::MANIFEST_FILE);
    if !is_manifest {
        let cfg = RunConfig::load(path)?;
        out!("config hash {}", cfg.hash()?);
        out_raw!(cfg.to_toml()?);
        return Ok(());
    }
    let (m, root) = Manifest::load(path)?;
    out!("{} at {}", m.tool, root.display());
    out!("config hash {}", m.config_hash);
    out!("voxels {:?} at {} mm, days {:?}", m.dims, m.voxel_mm, m.days);
    out!("{} samples, {} failed", m.samples.len(), m.failures().count());
    for s in &m.samples {
        match &s.error {
            Some(e) => out!("  {:04} FAILED {e}", s.id),
            None => out!(
                "  {:04} muons {} events {} degenerate {} outside {} rejected {} warnings {}",
                s.id,
                s.stats.muons,
                s.stats.events,
                s.stats.degenerate,
                s.stats.dropped_outside,
                s.stats.rejected_geometry + s.stats.rejected_inefficiency,
                s.warnings.len()
            ),
        }
    }
    let missing = m.missing_files(&root);
    if !missing.is_empty() {
        bail!("{} referenced files are missing, first {}", missing.len(), missing[0].display());
    }
    Ok(())
}

fn export_png(input: &Path, z: Option<usize>, output: &Path) -> anyhow::Result<()> {
    let own = raw::sidecar_path(input);
    let (side, volume) = if own.is_file() {
        (Sidecar::load(&own)?, true)
    } else {
        let shared = input.parent().unwrap_or(Path::new(".")).join(SLICES_SIDECAR);
        (Sidecar::load(&shared).with_context(|| format!("no sidecar for {}", input.display()))?, false)
    };
    let [w, h] = [side.dims[0], side.dims[1]];
    let plane = w * h;
    let (count, offset) = if volume && side.dims.len() == 3 {
        let z = z.unwrap_or(side.dims[2] / 2);
        if z >= side.dims[2] {
            bail!("z index {z} outside 0..{}", side.dims[2]);
        }
        (side.element_count(), z * plane)
    } else {
        (plane, 0)
    };
    let data: Vec<f32> = match side.format {
        SampleFormat::F32le => raw::read_f32(input, count)?,
        SampleFormat::U8 => raw::read_u8(input, count)?.into_iter().map(f32::from).collect(),
    };
    raw::write_png_windowed(output, w, h, &data[offset..offset + plane])?;
    out!("wrote {}", output.display());
    Ok(())
}
