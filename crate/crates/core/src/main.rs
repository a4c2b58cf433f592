use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cvoc::cli::{self, AnalysisConfig, BenchConfig, Engine, Refine, SyntheticSpec};
use cvoc::envelopes::EnvelopeKind;
use cvoc::noise_mask::{CnmPolarity, DEFAULT_CNM_THRESHOLD};
use cvoc::pitch::{NoiseKind, PitchConfig};
use cvoc::signal::read_wav;
use cvoc::synthesis::SynthConfig;
use cvoc::{Error, Result};

#[derive(Parser)]
#[command(
    name = "cvoc",
    version,
    about = "Continuous vocoder analysis, synthesis and evaluation"
)]
struct Cli {
    /// Debug logging (per-frame harmonic counts and fallbacks).
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct AnalysisArgs {
    #[arg(long, default_value_t = 0.005)]
    frame_shift: f64,
    /// Mel-cepstral order, 24 or 60.
    #[arg(long, default_value_t = 24, value_parser = parse_order)]
    mgc_order: usize,
    #[arg(long, default_value_t = cvoc::spectral::DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = 80.0)]
    f0_min: f64,
    #[arg(long, default_value_t = 300.0)]
    f0_max: f64,
    /// none, akf, timewarp or stonemask.
    #[arg(long, default_value = "none")]
    refine: Refine,
    /// amplitude, hilbert, triangular, true or none.
    #[arg(long, default_value = "hilbert")]
    envelope: EnvelopeKind,
    #[arg(long)]
    no_hnr: bool,
    /// Skip the residual PCA basis; synthesis then uses impulses.
    #[arg(long)]
    no_basis: bool,
    /// Compute the continuous noise mask with this polarity (literal or inverted).
    #[arg(long)]
    cnm: Option<CnmPolarity>,
}

impl AnalysisArgs {
    fn config(&self) -> AnalysisConfig {
        AnalysisConfig {
            frame_shift: self.frame_shift,
            mgc_order: self.mgc_order,
            alpha: self.alpha,
            f0_min: self.f0_min,
            f0_max: self.f0_max,
            refine: self.refine,
            envelope: self.envelope,
            hnr: !self.no_hnr,
            basis: !self.no_basis,
            cnm: self.cnm,
            cnm_threshold: DEFAULT_CNM_THRESHOLD,
        }
    }
}

#[derive(Args, Clone)]
struct SynthArgs {
    /// sf (source-filter) or csm (continuous sinusoidal model).
    #[arg(long, default_value = "sf")]
    engine: Engine,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    cnm_threshold: Option<f64>,
    /// Ignore the noise mask even when the bundle carries one.
    #[arg(long)]
    no_cnm: bool,
}

impl SynthArgs {
    fn config(&self) -> SynthConfig {
        SynthConfig {
            seed: self.seed,
            cnm_threshold: self.cnm_threshold.unwrap_or(DEFAULT_CNM_THRESHOLD),
            use_cnm: !self.no_cnm,
            ..SynthConfig::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a WAV file into a parameter bundle.
    Analyze {
        input: PathBuf,
        output: PathBuf,
        #[command(flatten)]
        analysis: AnalysisArgs,
    },
    /// Synthesize a WAV file from a bundle.
    Synthesize {
        bundle: PathBuf,
        output: PathBuf,
        #[command(flatten)]
        synth: SynthArgs,
    },
    /// Analysis followed by synthesis.
    CopySynth {
        input: PathBuf,
        output: PathBuf,
        #[command(flatten)]
        analysis: AnalysisArgs,
        #[command(flatten)]
        synth: SynthArgs,
    },
    /// Pitch error table (CSV) for the baseline and the three refinements.
    PitchBench {
        /// Input WAV; requires --ref.
        input: Option<PathBuf>,
        /// Reference F0, one value per frame, 0 for unvoiced.
        #[arg(long = "ref")]
        reference: Option<PathBuf>,
        /// Use a generated harmonic vowel with a known contour instead of a file.
        #[arg(long, conflicts_with_all = ["input", "reference"])]
        synthetic: bool,
        /// Comma-separated SNRs in dB; "clean" benchmarks the unmodified signal.
        #[arg(long, value_delimiter = ',', default_value = "clean")]
        snr: Vec<String>,
        /// white or pink.
        #[arg(long, default_value = "white")]
        noise: NoiseKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.005)]
        frame_shift: f64,
        #[arg(long, default_value_t = 80.0)]
        f0_min: f64,
        #[arg(long, default_value_t = 300.0)]
        f0_max: f64,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Objective metrics as a single JSON line.
    Metrics { reference: PathBuf, test: PathBuf },
    /// DTW alignment of the mel-cepstra of two bundles.
    VcAlign {
        source: PathBuf,
        target: PathBuf,
        output: PathBuf,
    },
}

fn parse_order(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(o @ (24 | 60)) => Ok(o),
        _ => Err(format!("mel-cepstral order must be 24 or 60, got '{s}'")),
    }
}

fn parse_snrs(values: &[String]) -> Result<Vec<Option<f64>>> {
    values
        .iter()
        .map(|s| match s.trim() {
            "clean" => Ok(None),
            v => v
                .parse::<f64>()
                .map(Some)
                .map_err(|_| Error::InvalidArgument(format!("bad SNR '{v}'"))),
        })
        .collect()
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Analyze {
            input,
            output,
            analysis,
        } => {
            let b = cli::cmd_analyze(&input, &output, &analysis.config())?;
            log::info!("{} frames written to {}", b.num_frames(), output.display());
        }
        Command::Synthesize { bundle, output, synth } => {
            cli::cmd_synthesize(&bundle, &output, synth.engine, &synth.config())?;
        }
        Command::CopySynth {
            input,
            output,
            analysis,
            synth,
        } => {
            cli::cmd_copy_synth(&input, &output, &analysis.config(), synth.engine, &synth.config())?;
        }
        Command::PitchBench {
            input,
            reference,
            synthetic,
            snr,
            noise,
            seed,
            frame_shift,
            f0_min,
            f0_max,
            output,
        } => {
            let pitch = PitchConfig {
                f0_min,
                f0_max,
                frame_shift,
                ..PitchConfig::default()
            };
            let (w, r) = if synthetic {
                SyntheticSpec::default().generate(frame_shift)?
            } else {
                let input = input
                    .ok_or_else(|| Error::InvalidArgument("pitch-bench needs an input WAV or --synthetic".into()))?;
                let reference = reference
                    .ok_or_else(|| Error::InvalidArgument("pitch-bench needs --ref with the input WAV".into()))?;
                (read_wav(&input)?, cli::read_f0_file(&reference, frame_shift)?)
            };
            let cfg = BenchConfig {
                pitch,
                noise,
                snrs: parse_snrs(&snr)?,
                seed,
            };
            let csv = cli::bench_csv(&cli::pitch_bench(&w, &r, &cfg)?);
            match output {
                Some(p) => std::fs::write(p, csv)?,
                None => print!("{csv}"),
            }
        }
        Command::Metrics { reference, test } => println!("{}", cli::cmd_metrics(&reference, &test)?),
        Command::VcAlign { source, target, output } => {
            let p = cli::cmd_vc_align(&source, &target, &output)?;
            log::info!("path of {} pairs written to {}", p.len(), output.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Cli::parse();
    let level = if args.verbose { "debug" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = std::env::var("CVOC_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    match run(args.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
