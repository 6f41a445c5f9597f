use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cmdnn::dataset::{FrameDataset, SynthConfig};
use cmdnn::experiment::{
    parse_grid_config, run_grid, write_atomic, ExperimentConfig, GridEntry, MaxNormPolicy, NeuronModel, StructureSpec,
};
use cmdnn::features::{extract_corpus, load_audio_file, load_wav_dir, LhcbConfig};
use cmdnn::layers::ShareAxis;
use cmdnn::train::TrainConfig;
use cmdnn::{Error, Result};

#[derive(Parser)]
#[command(
    name = "cmdnn",
    version,
    about = "Train and compare maxout / convolutional phoneme frame classifiers"
)]
struct Cli {
    /// Worker threads for tensor products (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract LHCB context windows from a WAV directory or a raw PCM file.
    Features {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Sample rate of headerless raw input.
        #[arg(long, default_value_t = 16_000)]
        raw_rate: u32,
        #[arg(long, default_value_t = 24)]
        filters: usize,
        #[arg(long, default_value_t = 15)]
        context: usize,
        #[arg(long, default_value_t = 23.0)]
        window_ms: f64,
    },
    /// Generate a synthetic speaker-partitioned frame dataset.
    Synth {
        #[arg(long, default_value_t = 50)]
        speakers: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 150)]
        frames_per_speaker: usize,
        /// Observation noise standard deviation.
        #[arg(long, default_value_t = 0.3)]
        noise: f64,
        #[arg(long, default_value_t = 24)]
        filters: usize,
        #[arg(long, default_value_t = 15)]
        width: usize,
        #[arg(long, default_value_t = 30)]
        classes: usize,
    },
    /// Train one structure and write results, curves, table and weights.
    Train {
        #[arg(long)]
        structure: String,
        #[arg(long, default_value = "maxout")]
        neuron: NeuronModel,
        /// T, F or TF; required for 1D-CMNN.
        #[arg(long)]
        share: Option<ShareAxis>,
        /// Dropout keep probability on fully connected layers.
        #[arg(long)]
        dropout: Option<f64>,
        /// Maxout group size.
        #[arg(long, default_value_t = StructureSpec::DEFAULT_K)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        shared: SharedArgs,
    },
    /// Run every line of a grid file.
    Grid {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        shared: SharedArgs,
    },
}

#[derive(Args)]
struct SharedArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Context width of the dataset rows.
    #[arg(long, default_value_t = 15)]
    width: usize,
    #[arg(long, default_value_t = 50)]
    max_epochs: usize,
    #[arg(long, default_value_t = 128)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    /// `auto` (C=2 for ReLU/maxout nets), `off`, or a radius.
    #[arg(long, default_value = "auto")]
    max_norm: String,
    /// Number of highest-numbered speakers held out for evaluation.
    #[arg(long, default_value_t = 7)]
    test_speakers: usize,
    /// Write all durations as zero so outputs are reproducible byte for byte.
    #[arg(long)]
    no_wall_time: bool,
}

impl SharedArgs {
    fn experiment_config(&self, data: &FrameDataset) -> Result<ExperimentConfig> {
        if self.width == 0 || !data.dim().is_multiple_of(self.width) {
            return Err(Error::Config(format!(
                "row width {} is not a multiple of context width {}",
                data.dim(),
                self.width
            )));
        }
        let max_norm = match self.max_norm.as_str() {
            "auto" => MaxNormPolicy::Auto,
            "off" => MaxNormPolicy::Off,
            v => MaxNormPolicy::Radius(v.parse().map_err(|_| Error::Config(format!("bad --max-norm {v:?}")))?),
        };
        Ok(ExperimentConfig {
            width: self.width,
            n_filters: data.dim() / self.width,
            train: TrainConfig {
                initial_lr: self.lr,
                batch_size: self.batch_size,
                max_epochs: self.max_epochs,
                ..TrainConfig::default()
            },
            max_norm,
            test_speakers: self.test_speakers,
            wall_time: !self.no_wall_time,
            ..ExperimentConfig::default()
        })
    }
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    match cli.command {
        Command::Features {
            input,
            out,
            raw_rate,
            filters,
            context,
            window_ms,
        } => {
            let utts = if input.is_dir() {
                load_wav_dir(&input)?
            } else {
                vec![load_audio_file(&input, raw_rate)?]
            };
            let cfg = LhcbConfig {
                window_ms,
                n_filters: filters,
                context,
            };
            let (ds, manifest) = extract_corpus(&utts, &cfg)?;
            ds.save(&out)?;
            write_atomic(&sidecar(&out), manifest.to_text().as_bytes())?;
            println!("{} frames of {} features -> {}", ds.len(), ds.dim(), out.display());
            Ok(true)
        }
        Command::Synth {
            speakers,
            seed,
            out,
            frames_per_speaker,
            noise,
            filters,
            width,
            classes,
        } => {
            let ds = SynthConfig {
                n_speakers: speakers,
                frames_per_speaker,
                n_filters: filters,
                width,
                class_count: classes,
                noise_std: noise,
                seed,
                ..SynthConfig::default()
            }
            .generate()?;
            ds.save(&out)?;
            println!("{} frames from {speakers} speakers -> {}", ds.len(), out.display());
            Ok(true)
        }
        Command::Train {
            structure,
            neuron,
            share,
            dropout,
            k,
            seed,
            shared,
        } => {
            let data = FrameDataset::load(&shared.data)?;
            let cfg = shared.experiment_config(&data)?;
            let mut spec = StructureSpec::new(&structure, neuron, share, dropout)?;
            spec.k = k;
            let entry = GridEntry {
                spec,
                seeds: vec![seed],
            };
            let report = run_grid(&[entry], &data, &cfg)?;
            report.write_to_dir(&shared.out)?;
            if let Ok(run) = &report.runs[0].outcome {
                write_atomic(&shared.out.join("weights.bin"), &run.network.to_bytes())?;
            }
            print!("{}", report.table());
            Ok(report.all_ok())
        }
        Command::Grid { config, shared } => {
            let entries = parse_grid_config(&std::fs::read_to_string(&config)?)?;
            let data = FrameDataset::load(&shared.data)?;
            let cfg = shared.experiment_config(&data)?;
            let report = run_grid(&entries, &data, &cfg)?;
            report.write_to_dir(&shared.out)?;
            print!("{}", report.table());
            Ok(report.all_ok())
        }
    }
}

fn sidecar(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest");
    PathBuf::from(name)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: one or more runs failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
