//! Structure strings, single experiment runs and result grids.
//!
//! Structure grammar:
//!
//! ```text
//! FC-<n>hidden-<w>                 n fully connected hidden layers of w units
//! Pre-trained_FC <w>-<w>-...       sigmoid stack initialised by pretraining
//! <1D|2D>-CMNN (C<c> K<k> S<s>)+ (F<f>)+
//! ```
//!
//! A `C K S` group is a convolution with `c` output maps (after channel
//! maxout), a `k`-tap kernel along each shared axis, and max pooling of size
//! and stride `s` along the same axes. `F` groups are maxout hidden layers.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;

use crate::dataset::{split_by_speaker, FrameDataset, SplitSpec};
use crate::error::{Error, Result};
use crate::features::FeatureNormalizer;
use crate::layers::{ActivationKind, Rng, ShareAxis};
use crate::network::{InputLayout, LayerSpec, Network, NetworkConfig};
use crate::pretrain::{pretrain_stack, PretrainConfig};
use crate::train::{train, EpochRecord, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NeuronModel {
    Sigmoid,
    Relu,
    Maxout,
}

impl fmt::Display for NeuronModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NeuronModel::Sigmoid => "Sigmoid",
            NeuronModel::Relu => "ReLU",
            NeuronModel::Maxout => "Maxout",
        })
    }
}

impl FromStr for NeuronModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sigmoid" => Ok(NeuronModel::Sigmoid),
            "relu" => Ok(NeuronModel::Relu),
            "maxout" => Ok(NeuronModel::Maxout),
            _ => Err(Error::Config(format!(
                "unknown neuron model {s:?} (expected sigmoid, relu or maxout)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvBlock {
    pub channels: usize,
    pub kernel: usize,
    pub pool: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Architecture {
    FullyConnected {
        hidden: Vec<usize>,
        pretrained: bool,
    },
    Convolutional {
        two_d: bool,
        blocks: Vec<ConvBlock>,
        fc: Vec<usize>,
    },
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let dashed = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join("-");
        match self {
            Architecture::FullyConnected {
                hidden,
                pretrained: true,
            } => {
                write!(f, "Pre-trained_FC {}", dashed(hidden))
            }
            Architecture::FullyConnected { hidden, .. } if hidden.iter().all(|&w| w == hidden[0]) => {
                write!(f, "FC-{}hidden-{}", hidden.len(), hidden[0])
            }
            Architecture::FullyConnected { hidden, .. } => write!(f, "FC {}", dashed(hidden)),
            Architecture::Convolutional { two_d, blocks, fc } => {
                write!(f, "{}-CMNN", if *two_d { "2D" } else { "1D" })?;
                for b in blocks {
                    write!(f, " C{} K{} S{}", b.channels, b.kernel, b.pool)?;
                }
                for w in fc {
                    write!(f, " F{w}")?;
                }
                Ok(())
            }
        }
    }
}

fn positive(token: &str, digits: &str) -> Result<usize> {
    match digits.parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(Error::Config(format!(
            "malformed token {token:?}: expected a positive integer"
        ))),
    }
}

fn dashed_widths(s: &str) -> Result<Vec<usize>> {
    s.split('-').map(|t| positive(s, t)).collect()
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("Pre-trained_FC ") {
            return Ok(Architecture::FullyConnected {
                hidden: dashed_widths(rest.trim())?,
                pretrained: true,
            });
        }
        if let Some(rest) = s.strip_prefix("FC ") {
            return Ok(Architecture::FullyConnected {
                hidden: dashed_widths(rest.trim())?,
                pretrained: false,
            });
        }
        if let Some(rest) = s.strip_prefix("FC-") {
            let (n, w) = rest
                .split_once("hidden-")
                .ok_or_else(|| Error::Config(format!("malformed structure {s:?}: expected FC-<n>hidden-<w>")))?;
            let n = n
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("malformed layer count in {s:?}")))?;
            if n == 0 {
                return Err(Error::Config(format!("{s:?} has zero hidden layers")));
            }
            return Ok(Architecture::FullyConnected {
                hidden: vec![positive(s, w)?; n],
                pretrained: false,
            });
        }
        let mut tokens = s.split_whitespace();
        let two_d = match tokens.next() {
            Some("1D-CMNN") => false,
            Some("2D-CMNN") => true,
            _ => {
                return Err(Error::Config(format!(
                    "unrecognised structure {s:?}: expected FC-<n>hidden-<w>, Pre-trained_FC or <1D|2D>-CMNN"
                )))
            }
        };
        let tokens: Vec<&str> = tokens.collect();
        let mut blocks = Vec::new();
        let mut i = 0;
        while i < tokens.len() && tokens[i].starts_with('C') {
            let group = tokens
                .get(i..i + 3)
                .ok_or_else(|| Error::Config(format!("incomplete C/K/S group at {:?}", tokens[i..].join(" "))))?;
            let field = |tok: &str, prefix: char| -> Result<usize> {
                tok.strip_prefix(prefix)
                    .ok_or_else(|| Error::Config(format!("malformed token {tok:?}: expected {prefix}<n>")))
                    .and_then(|d| positive(tok, d))
            };
            blocks.push(ConvBlock {
                channels: field(group[0], 'C')?,
                kernel: field(group[1], 'K')?,
                pool: field(group[2], 'S')?,
            });
            i += 3;
        }
        let mut fc = Vec::new();
        for tok in &tokens[i..] {
            let d = tok
                .strip_prefix('F')
                .ok_or_else(|| Error::Config(format!("malformed token {tok:?}: expected F<n>")))?;
            fc.push(positive(tok, d)?);
        }
        if blocks.is_empty() {
            return Err(Error::Config(format!("{s:?} has no convolution block")));
        }
        if fc.is_empty() {
            return Err(Error::Config(format!("{s:?} has no fully connected layer")));
        }
        Ok(Architecture::Convolutional { two_d, blocks, fc })
    }
}

/// A fully specified network family: architecture plus the per-run
/// properties that the structure string does not encode.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureSpec {
    pub arch: Architecture,
    pub neuron: NeuronModel,
    /// Sharing axis of convolutional structures; `None` for FC ones.
    pub share: Option<ShareAxis>,
    pub dropout: Option<f64>,
    /// Maxout group size.
    pub k: usize,
}

impl StructureSpec {
    pub const DEFAULT_K: usize = 2;

    /// Parses `structure` and checks it against the other settings. `share`
    /// may be omitted for 2D structures.
    pub fn new(structure: &str, neuron: NeuronModel, share: Option<ShareAxis>, dropout: Option<f64>) -> Result<Self> {
        let arch: Architecture = structure.parse()?;
        let share = match (&arch, share) {
            (Architecture::FullyConnected { .. }, None) => None,
            (Architecture::FullyConnected { .. }, Some(_)) => {
                return Err(Error::Config("weight sharing applies only to CMNN structures".into()))
            }
            (Architecture::Convolutional { two_d: true, .. }, None | Some(ShareAxis::Both)) => Some(ShareAxis::Both),
            (Architecture::Convolutional { two_d: true, .. }, Some(a)) => {
                return Err(Error::Config(format!("2D-CMNN shares along both axes, got {a}")))
            }
            (Architecture::Convolutional { two_d: false, .. }, Some(a @ (ShareAxis::Time | ShareAxis::Frequency))) => {
                Some(a)
            }
            (Architecture::Convolutional { two_d: false, .. }, _) => {
                return Err(Error::Config("1D-CMNN needs a sharing axis of T or F".into()))
            }
        };
        if let Architecture::Convolutional { .. } = arch {
            if neuron != NeuronModel::Maxout {
                return Err(Error::Config(format!("CMNN structures use maxout units, got {neuron}")));
            }
        }
        if let Architecture::FullyConnected { pretrained: true, .. } = arch {
            if neuron != NeuronModel::Sigmoid {
                return Err(Error::Config(format!(
                    "pretraining applies to sigmoid stacks, got {neuron}"
                )));
            }
        }
        if let Some(p) = dropout {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::Config(format!(
                    "dropout keep probability must be in (0, 1], got {p}"
                )));
            }
        }
        Ok(StructureSpec {
            arch,
            neuron,
            share,
            dropout,
            k: Self::DEFAULT_K,
        })
    }

    pub fn structure(&self) -> String {
        self.arch.to_string()
    }

    pub fn pretrained(&self) -> bool {
        matches!(self.arch, Architecture::FullyConnected { pretrained: true, .. })
    }

    /// Layer stack for context windows of `width` frames × `n_filters`
    /// coefficients and `classes` outputs.
    pub fn to_config(&self, width: usize, n_filters: usize, classes: usize) -> Result<NetworkConfig> {
        let mut layers = Vec::new();
        let hidden = |layers: &mut Vec<LayerSpec>, units: usize| {
            layers.push(match self.neuron {
                NeuronModel::Sigmoid => LayerSpec::Dense {
                    units,
                    activation: ActivationKind::Sigmoid,
                    bias: true,
                },
                NeuronModel::Relu => LayerSpec::Dense {
                    units,
                    activation: ActivationKind::Relu,
                    bias: false,
                },
                NeuronModel::Maxout => LayerSpec::Maxout { units, k: self.k },
            });
            if let Some(keep_prob) = self.dropout {
                layers.push(LayerSpec::Dropout { keep_prob });
            }
        };
        let input = match &self.arch {
            Architecture::FullyConnected { hidden: widths, .. } => {
                for &w in widths {
                    hidden(&mut layers, w);
                }
                InputLayout::Flat(width * n_filters)
            }
            Architecture::Convolutional { blocks, fc, .. } => {
                let axis = self.share.expect("validated CMNN spec has an axis");
                let (mut f, mut t) = (n_filters, width);
                for b in blocks {
                    let (kh, kw, ph, pw) = match axis {
                        ShareAxis::Time => (1, b.kernel, 1, b.pool),
                        ShareAxis::Frequency => (b.kernel, 1, b.pool, 1),
                        ShareAxis::Both => (b.kernel, b.kernel, b.pool, b.pool),
                    };
                    if kh > f || kw > t {
                        return Err(Error::Structure {
                            input: format!("{f}x{t}"),
                            reason: format!("kernel {kh}x{kw} larger than input"),
                        });
                    }
                    (f, t) = (f - kh + 1, t - kw + 1);
                    if ph > f || pw > t {
                        return Err(Error::Structure {
                            input: format!("{f}x{t}"),
                            reason: format!("pool {ph}x{pw} larger than convolution output"),
                        });
                    }
                    (f, t) = ((f - ph) / ph + 1, (t - pw) / pw + 1);
                    layers.push(LayerSpec::Conv {
                        channels: b.channels * self.k,
                        kernel: (kh, kw),
                        axis,
                    });
                    layers.push(LayerSpec::ChannelMaxout { k: self.k });
                    layers.push(LayerSpec::MaxPool { pool: (ph, pw) });
                }
                for &w in fc {
                    hidden(&mut layers, w);
                }
                InputLayout::Spectrogram { width, n_filters }
            }
        };
        layers.push(LayerSpec::Output { classes });
        Ok(NetworkConfig { input, layers })
    }
}

/// Parses a structure string into a buildable layer stack.
pub fn parse_structure(
    structure: &str,
    neuron: NeuronModel,
    share: Option<ShareAxis>,
    width: usize,
    n_filters: usize,
) -> Result<NetworkConfig> {
    StructureSpec::new(structure, neuron, share, None)?.to_config(width, n_filters, crate::dataset::DEFAULT_CLASSES)
}

/// Max-norm policy of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaxNormPolicy {
    /// `C = 2` when the network has rectified or maxout units.
    Auto,
    Off,
    Radius(f64),
}

/// Settings shared by every run of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub width: usize,
    pub n_filters: usize,
    pub train: TrainConfig,
    pub pretrain: PretrainConfig,
    pub max_norm: MaxNormPolicy,
    /// Speakers with the highest ids form the held-out set.
    pub test_speakers: usize,
    /// Standardize every feature column with training-split statistics
    /// before any run.
    pub standardize: bool,
    /// When false, every reported duration is written as zero so that
    /// outputs depend only on inputs and seeds.
    pub wall_time: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            width: 15,
            n_filters: 24,
            train: TrainConfig::default(),
            pretrain: PretrainConfig::default(),
            max_norm: MaxNormPolicy::Auto,
            test_speakers: 7,
            standardize: true,
            wall_time: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub structure: String,
    pub neuron: NeuronModel,
    pub share: Option<ShareAxis>,
    pub dropout: Option<f64>,
    pub seed: u64,
    /// Best held-out frame accuracy in percent.
    pub acc: f64,
    /// Epoch at which the best accuracy was reached.
    pub epochs: usize,
    pub seconds: f64,
}

pub const RESULTS_HEADER: &str = "structure,neuron,share,dropout,seed,acc,epochs,seconds";
pub const CURVES_HEADER: &str = "structure,neuron,share,dropout,seed,epoch,loss,acc,lr,seconds";

fn share_label(share: Option<ShareAxis>) -> String {
    share.map_or("-".into(), |a| a.to_string())
}

fn dropout_label(dropout: Option<f64>) -> String {
    dropout.map_or("-".into(), |p| p.to_string())
}

impl ExperimentResult {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{:.4},{},{:.3}",
            self.structure,
            self.neuron,
            share_label(self.share),
            dropout_label(self.dropout),
            self.seed,
            self.acc,
            self.epochs,
            self.seconds
        )
    }
}

/// Everything produced by one run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub result: ExperimentResult,
    pub curve: Vec<EpochRecord>,
    pub network: Network,
}

impl RunOutput {
    pub fn curve_rows(&self) -> Vec<String> {
        let r = &self.result;
        let prefix = format!(
            "{},{},{},{},{}",
            r.structure,
            r.neuron,
            share_label(r.share),
            dropout_label(r.dropout),
            r.seed
        );
        self.curve.iter().map(|e| format!("{prefix},{}", e.csv_row())).collect()
    }
}

/// Builds, optionally pretrains, and trains one network; evaluation uses
/// the dropout-scaled inference network.
pub fn run_experiment(
    spec: &StructureSpec,
    train_set: &FrameDataset,
    test_set: &FrameDataset,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<RunOutput> {
    let started = Instant::now();
    let config = spec.to_config(cfg.width, cfg.n_filters, train_set.class_count())?;
    let mut rng = Rng::seed_from_u64(seed);
    let mut net = config.build(&mut rng)?;
    if spec.pretrained() {
        let pcfg = PretrainConfig {
            seed,
            ..cfg.pretrain.clone()
        };
        net = pretrain_stack(&net, train_set, &pcfg)?;
    }
    let tcfg = TrainConfig {
        seed,
        max_norm: match cfg.max_norm {
            MaxNormPolicy::Auto => TrainConfig::for_network(&net).max_norm,
            MaxNormPolicy::Off => None,
            MaxNormPolicy::Radius(c) => Some(c),
        },
        ..cfg.train.clone()
    };
    let mut outcome = train(net, train_set, test_set, &tcfg)?;
    let seconds = if cfg.wall_time {
        started.elapsed().as_secs_f64()
    } else {
        for r in &mut outcome.records {
            r.seconds = 0.0;
        }
        0.0
    };
    Ok(RunOutput {
        result: ExperimentResult {
            structure: spec.structure(),
            neuron: spec.neuron,
            share: spec.share,
            dropout: spec.dropout,
            seed,
            acc: outcome.state.best_acc.unwrap_or(0.0),
            epochs: outcome.state.best_epoch,
            seconds,
        },
        curve: outcome.records,
        network: outcome.network,
    })
}

/// One line of a grid configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct GridEntry {
    pub spec: StructureSpec,
    pub seeds: Vec<u64>,
}

impl GridEntry {
    /// Parses `<structure> [-- --neuron M --share T|F|TF --dropout P --k K --seeds 0,1,2]`.
    /// Neuron defaults to maxout and seeds to `[0]`.
    pub fn parse(line: &str) -> Result<Self> {
        let (structure, flags) = line.split_once(" --").map_or((line, ""), |(s, f)| (s, f));
        let mut neuron = NeuronModel::Maxout;
        let mut share = None;
        let mut dropout = None;
        let mut k = StructureSpec::DEFAULT_K;
        let mut seeds = vec![0];
        let mut words = flags.split_whitespace().peekable();
        if words.peek() == Some(&"--") {
            words.next();
        }
        while let Some(flag) = words.next() {
            let value = words
                .next()
                .ok_or_else(|| Error::Config(format!("flag {flag} needs a value in {line:?}")))?;
            let bad = || Error::Config(format!("bad value {value:?} for {flag}"));
            match flag.trim_start_matches('-') {
                "neuron" => neuron = value.parse()?,
                "share" => share = Some(value.parse()?),
                "dropout" => dropout = Some(value.parse().map_err(|_| bad())?),
                "k" => k = value.parse().ok().filter(|&k| k > 0).ok_or_else(bad)?,
                "seeds" => {
                    seeds = value
                        .split(',')
                        .map(|s| s.trim().parse().map_err(|_| bad()))
                        .collect::<Result<_>>()?
                }
                _ => return Err(Error::Config(format!("unknown flag {flag} in {line:?}"))),
            }
        }
        let mut spec = StructureSpec::new(structure.trim(), neuron, share, dropout)?;
        spec.k = k;
        Ok(GridEntry { spec, seeds })
    }
}

/// Reads a grid file: one entry per line, `#` starts a comment.
pub fn parse_grid_config(text: &str) -> Result<Vec<GridEntry>> {
    text.lines()
        .map(|l| l.split('#').next().unwrap().trim())
        .filter(|l| !l.is_empty())
        .map(GridEntry::parse)
        .collect()
}

/// Result of one grid run; failures are kept with their message.
#[derive(Debug, Clone)]
pub struct GridRun {
    pub spec: StructureSpec,
    pub seed: u64,
    pub outcome: std::result::Result<RunOutput, String>,
}

#[derive(Debug, Clone)]
pub struct GridReport {
    pub runs: Vec<GridRun>,
}

impl GridReport {
    pub fn all_ok(&self) -> bool {
        self.runs.iter().all(|r| r.outcome.is_ok())
    }

    pub fn results_csv(&self) -> String {
        let mut out = format!("{RESULTS_HEADER}\n");
        for run in &self.runs {
            match &run.outcome {
                Ok(o) => out.push_str(&o.result.csv_row()),
                Err(_) => out.push_str(&format!(
                    "{},{},{},{},{},FAILED,,",
                    run.spec.structure(),
                    run.spec.neuron,
                    share_label(run.spec.share),
                    dropout_label(run.spec.dropout),
                    run.seed
                )),
            }
            out.push('\n');
        }
        out
    }

    pub fn curves_csv(&self) -> String {
        let mut out = format!("{CURVES_HEADER}\n");
        for o in self.runs.iter().filter_map(|r| r.outcome.as_ref().ok()) {
            for row in o.curve_rows() {
                out.push_str(&row);
                out.push('\n');
            }
        }
        out
    }

    /// Aligned text table with one row per structure/settings combination.
    /// Epoch, time and accuracy are medians over seeds; a range column is
    /// added when any combination has several seeds.
    pub fn table(&self) -> String {
        let mut groups: Vec<(&StructureSpec, Vec<&GridRun>)> = Vec::new();
        for run in &self.runs {
            match groups.iter_mut().find(|(s, _)| **s == run.spec) {
                Some((_, g)) => g.push(run),
                None => groups.push((&run.spec, vec![run])),
            }
        }
        let multi = groups.iter().any(|(_, g)| g.len() > 1);
        let mut header = vec!["Structure", "Neuron", "Share", "D", "Seeds", "Epoch", "Time(s)", "Acc"];
        if multi {
            header.push("Range");
        }
        let mut rows: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
        for (spec, runs) in &groups {
            let ok: Vec<&ExperimentResult> = runs
                .iter()
                .filter_map(|r| r.outcome.as_ref().ok().map(|o| &o.result))
                .collect();
            let mut row = vec![
                spec.structure(),
                spec.neuron.to_string(),
                share_label(spec.share),
                dropout_label(spec.dropout),
                runs.len().to_string(),
            ];
            if ok.len() < runs.len() {
                let msg = runs.iter().find_map(|r| r.outcome.as_ref().err()).unwrap();
                row.extend(["-".into(), "-".into(), format!("FAILED: {msg}")]);
                if multi {
                    row.push("-".into());
                }
            } else {
                let acc: Vec<f64> = ok.iter().map(|r| r.acc).collect();
                row.push(format!(
                    "{}",
                    median(&ok.iter().map(|r| r.epochs as f64).collect::<Vec<_>>())
                ));
                row.push(format!(
                    "{:.1}",
                    median(&ok.iter().map(|r| r.seconds).collect::<Vec<_>>())
                ));
                row.push(format!("{:.2}", median(&acc)));
                if multi {
                    let lo = acc.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = acc.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    row.push(format!("{lo:.2}-{hi:.2}"));
                }
            }
            rows.push(row);
        }
        let cols = rows[0].len();
        let widths: Vec<usize> = (0..cols)
            .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap())
            .collect();
        let mut out = String::new();
        for row in &rows {
            let cells: Vec<String> = row.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
            out.push_str(cells.join("  ").trim_end());
            out.push('\n');
        }
        out
    }

    /// Writes `results.csv`, `curves.csv` and `table.txt` into `dir`, each
    /// through a temporary file and rename.
    pub fn write_to_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        write_atomic(&dir.join("results.csv"), self.results_csv().as_bytes())?;
        write_atomic(&dir.join("curves.csv"), self.curves_csv().as_bytes())?;
        write_atomic(&dir.join("table.txt"), self.table().as_bytes())?;
        Ok(())
    }
}

/// Median; mean of the two middle values for even counts.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Splits `data` by speaker and runs every entry for each of its seeds.
/// Individual failures are recorded in the report; only an empty grid or a
/// failed split is an error.
pub fn run_grid(entries: &[GridEntry], data: &FrameDataset, cfg: &ExperimentConfig) -> Result<GridReport> {
    if entries.is_empty() {
        return Err(Error::InvalidArgument("grid has no entries".into()));
    }
    let split = SplitSpec::hold_out_last(data, cfg.test_speakers)?;
    let (mut train_set, mut test_set) = split_by_speaker(data, &split)?;
    if cfg.standardize {
        let norm = FeatureNormalizer::fit_dataset(&train_set)?;
        train_set = norm.apply_dataset(&train_set)?;
        test_set = norm.apply_dataset(&test_set)?;
    }
    let mut runs = Vec::new();
    for entry in entries {
        for &seed in &entry.seeds {
            log::info!("run {} {} seed {seed}", entry.spec.structure(), entry.spec.neuron);
            let outcome = run_experiment(&entry.spec, &train_set, &test_set, cfg, seed).map_err(|e| {
                log::error!("{} seed {seed} failed: {e}", entry.spec.structure());
                e.to_string()
            });
            runs.push(GridRun {
                spec: entry.spec.clone(),
                seed,
                outcome,
            });
        }
    }
    Ok(GridReport { runs })
}

/// Structure strings of the fully connected comparison, with their neuron
/// models.
pub const FC_STRUCTURES: [(&str, NeuronModel); 11] = [
    ("FC-2hidden-400", NeuronModel::Sigmoid),
    ("FC-3hidden-400", NeuronModel::Sigmoid),
    ("FC-5hidden-400", NeuronModel::Sigmoid),
    ("Pre-trained_FC 500-500-400-400-400", NeuronModel::Sigmoid),
    ("FC-2hidden-400", NeuronModel::Relu),
    ("FC-4hidden-400", NeuronModel::Relu),
    ("FC-2hidden-200", NeuronModel::Maxout),
    ("FC-2hidden-400", NeuronModel::Maxout),
    ("FC-3hidden-400", NeuronModel::Maxout),
    ("FC-5hidden-400", NeuronModel::Maxout),
    ("FC-6hidden-400", NeuronModel::Maxout),
];

/// Structure strings of the convolutional comparison with sharing axis and
/// dropout keep probability.
pub const CMNN_STRUCTURES: [(&str, ShareAxis, Option<f64>); 6] = [
    ("1D-CMNN C80 K5 S2 F600", ShareAxis::Frequency, None),
    ("1D-CMNN C40 K3 S2 C40 K3 S2 F600", ShareAxis::Time, None),
    ("2D-CMNN C80 K7 S2 F400 F400", ShareAxis::Both, None),
    ("2D-CMNN C40 K7 S2 F400 F400", ShareAxis::Both, Some(0.3)),
    ("2D-CMNN C40 K7 S2 F400 F400", ShareAxis::Both, Some(0.5)),
    ("2D-CMNN C40 K7 S2 F400 F400", ShareAxis::Both, Some(0.7)),
];
