//! Log critical-band filter-bank features.
//!
//! Pipeline: 23 ms frames with half-frame hop → Hamming window → power
//! spectrum (zero-padded FFT) → Hamming-shaped filters equally spaced on the
//! Bark scale → natural log with a floor → per-coefficient normalization →
//! context stacking.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rustfft::{num_complex::Complex, FftPlanner};

use crate::dataset::{FrameDataset, DEFAULT_CLASSES};
use crate::error::{Error, Result};

pub const DEFAULT_WINDOW_MS: f64 = 23.0;
pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;
pub const DEFAULT_FILTERS: usize = 24;
pub const LOG_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct AudioSignal {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioSignal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Audio("sample rate must be positive".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::Audio("samples must be finite".into()));
        }
        Ok(AudioSignal { samples, sample_rate })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    /// Mono 16-bit PCM WAV, scaled to [-1, 1).
    pub fn read_wav(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = hound::WavReader::open(path).map_err(|e| Error::Audio(format!("{}: {e}", path.display())))?;
        let spec = reader.spec();
        if spec.channels != 1 || spec.bits_per_sample != 16 || spec.sample_format != hound::SampleFormat::Int {
            return Err(Error::Audio(format!(
                "{}: expected mono 16-bit PCM, got {} channel(s) of {}-bit {:?}",
                path.display(),
                spec.channels,
                spec.bits_per_sample,
                spec.sample_format
            )));
        }
        let samples = reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Audio(format!("{}: {e}", path.display())))?;
        AudioSignal::new(samples, spec.sample_rate)
    }

    /// Headerless little-endian 16-bit PCM at a declared rate.
    pub fn read_raw(path: impl AsRef<Path>, sample_rate: u32) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        if bytes.len() % 2 != 0 {
            return Err(Error::Parse {
                offset: bytes.len() as u64 - 1,
                reason: "odd byte count in 16-bit raw audio".into(),
            });
        }
        let samples = bytes
            .chunks_exact(2)
            .map(|b| i16::from_le_bytes([b[0], b[1]]) as f64 / 32768.0)
            .collect();
        AudioSignal::new(samples, sample_rate)
    }
}

/// Frame length `round(win_ms·sr/1000)` and hop `floor(len/2)`.
pub fn frame_geometry(sample_rate: u32, win_ms: f64) -> (usize, usize) {
    let n = (win_ms * sample_rate as f64 / 1000.0).round() as usize;
    (n, n / 2)
}

/// Splits the signal into overlapping frames; the tail that does not fill a
/// whole frame is dropped.
pub fn frame_signal(signal: &AudioSignal, win_ms: f64) -> Result<Vec<Vec<f64>>> {
    let (n, hop) = frame_geometry(signal.sample_rate, win_ms);
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "{win_ms} ms at {} Hz gives a frame of {n} samples",
            signal.sample_rate
        )));
    }
    let len = signal.samples.len();
    if len < n {
        return Err(Error::Audio(format!(
            "signal of {len} samples is shorter than one {n}-sample frame"
        )));
    }
    let count = (len - n) / hop + 1;
    Ok((0..count)
        .map(|i| signal.samples[i * hop..i * hop + n].to_vec())
        .collect())
}

pub fn hamming_window(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let denom = (n - 1) as f64;
    (0..n)
        .map(|i| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / denom).cos())
        .collect()
}

pub fn apply_hamming(frame: &[f64]) -> Vec<f64> {
    frame
        .iter()
        .zip(hamming_window(frame.len()))
        .map(|(x, w)| x * w)
        .collect()
}

/// `|X[k]|²` for `k = 0..=M/2`, where `M` is `frame.len()` rounded up to a
/// power of two and the frame is zero-padded to `M`.
pub fn power_spectrum(frame: &[f64]) -> Vec<f64> {
    let m = frame.len().max(1).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = frame
        .iter()
        .map(|&x| Complex::new(x, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(m)
        .collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    buf[..m / 2 + 1].iter().map(|c| c.norm_sqr()).collect()
}

/// Bark scale: `13·atan(0.00076 f) + 3.5·atan((f/7500)²)`.
pub fn hz_to_bark(f: f64) -> f64 {
    13.0 * (0.00076 * f).atan() + 3.5 * (f / 7500.0).powi(2).atan()
}

/// Inverse of [`hz_to_bark`] on `[0, max_hz]` by bisection.
pub fn bark_to_hz(bark: f64, max_hz: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, max_hz);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hz_to_bark(mid) < bark {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Hamming-shaped filters with centers equally spaced on the Bark scale.
/// Filter `i` spans from the center of filter `i−1` to that of filter `i+1`
/// (the band edges for the outermost filters).
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    weights: Vec<f64>,
    n_filters: usize,
    n_bins: usize,
    centers_hz: Vec<f64>,
    center_bins: Vec<usize>,
}

impl FilterBank {
    pub fn bark(n_filters: usize, sample_rate: u32, n_bins: usize) -> Result<Self> {
        if n_filters == 0 || n_bins < 2 || sample_rate == 0 {
            return Err(Error::InvalidArgument(
                "filter bank needs n_filters >= 1, n_bins >= 2, sample_rate > 0".into(),
            ));
        }
        let nyquist = sample_rate as f64 / 2.0;
        let bark_max = hz_to_bark(nyquist);
        let step = bark_max / (n_filters + 1) as f64;
        let bin_hz = nyquist / (n_bins - 1) as f64;
        let bin_bark: Vec<f64> = (0..n_bins).map(|k| hz_to_bark(k as f64 * bin_hz)).collect();

        let mut weights = vec![0.0; n_filters * n_bins];
        let mut centers_hz = Vec::with_capacity(n_filters);
        let mut center_bins = Vec::with_capacity(n_filters);
        for j in 0..n_filters {
            let (lo, center, hi) = (j as f64 * step, (j + 1) as f64 * step, (j + 2) as f64 * step);
            let row = &mut weights[j * n_bins..(j + 1) * n_bins];
            let mut inside = 0;
            for (k, &b) in bin_bark.iter().enumerate() {
                let u = (b - lo) / (hi - lo);
                if (0.0..=1.0).contains(&u) {
                    row[k] = 0.54 - 0.46 * (2.0 * std::f64::consts::PI * u).cos();
                    if u > 0.0 && u < 1.0 {
                        inside += 1;
                    }
                }
            }
            let cb = (0..n_bins)
                .min_by(|&a, &b| (bin_bark[a] - center).abs().total_cmp(&(bin_bark[b] - center).abs()))
                .unwrap();
            if inside == 0 || center_bins.last().is_some_and(|&prev| cb <= prev) {
                return Err(Error::InvalidArgument(format!(
                    "{n_filters} filters are too many for {n_bins} spectral bins"
                )));
            }
            centers_hz.push(bark_to_hz(center, nyquist));
            center_bins.push(cb);
        }
        Ok(FilterBank {
            weights,
            n_filters,
            n_bins,
            centers_hz,
            center_bins,
        })
    }

    pub fn n_filters(&self) -> usize {
        self.n_filters
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn centers_hz(&self) -> &[f64] {
        &self.centers_hz
    }

    /// Bin whose Bark position is closest to each filter's center.
    pub fn center_bins(&self) -> &[usize] {
        &self.center_bins
    }

    pub fn filter(&self, j: usize) -> &[f64] {
        &self.weights[j * self.n_bins..(j + 1) * self.n_bins]
    }
}

/// `ln(max(fb · spectrum, 1e-10))` per filter.
pub fn lhcb_vector(spectrum: &[f64], fb: &FilterBank) -> Result<Vec<f64>> {
    if spectrum.len() != fb.n_bins {
        return Err(Error::shape("lhcb_vector", &[spectrum.len()], &[fb.n_bins]));
    }
    Ok((0..fb.n_filters)
        .map(|j| {
            let e: f64 = fb.filter(j).iter().zip(spectrum).map(|(w, s)| w * s).sum();
            e.max(LOG_FLOOR).ln()
        })
        .collect())
}

/// Concatenates frames `t−⌊w/2⌋ .. t+⌈w/2⌉−1` for every `t`, clamping
/// indices to the sequence (edge frames are replicated).
pub fn stack_context(frames: &[Vec<f64>], width: usize) -> Result<Vec<Vec<f64>>> {
    if width == 0 {
        return Err(Error::InvalidArgument("context width must be >= 1".into()));
    }
    if frames.is_empty() {
        return Err(Error::InvalidArgument("no frames to stack".into()));
    }
    let last = frames.len() as isize - 1;
    let left = (width / 2) as isize;
    Ok((0..frames.len() as isize)
        .map(|t| {
            (0..width as isize)
                .flat_map(|o| frames[(t - left + o).clamp(0, last) as usize].iter().copied())
                .collect()
        })
        .collect())
}

/// Per-coefficient mean/variance normalization statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureNormalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureNormalizer {
    pub fn fit(frames: &[Vec<f64>]) -> Result<Self> {
        Self::fit_rows(frames.iter().map(Vec::as_slice))
    }

    pub fn fit_rows<'a>(rows: impl Iterator<Item = &'a [f64]> + Clone) -> Result<Self> {
        let n = rows.clone().count();
        let first = rows
            .clone()
            .next()
            .ok_or_else(|| Error::InvalidArgument("cannot fit normalizer on no frames".into()))?;
        let d = first.len();
        let n = n as f64;
        let mut mean = vec![0.0; d];
        for f in rows.clone() {
            for (m, v) in mean.iter_mut().zip(f) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; d];
        for f in rows {
            for ((s, v), m) in var.iter_mut().zip(f).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        let std = var.into_iter().map(|v| if v > 0.0 { v.sqrt() } else { 1.0 }).collect();
        Ok(FeatureNormalizer { mean, std })
    }

    /// Statistics of every feature column of `ds`.
    pub fn fit_dataset(ds: &FrameDataset) -> Result<Self> {
        Self::fit_rows(ds.features().chunks(ds.dim()))
    }

    /// `ds` with every row normalized.
    pub fn apply_dataset(&self, ds: &FrameDataset) -> Result<FrameDataset> {
        if self.mean.len() != ds.dim() {
            return Err(Error::shape("normalize dataset", &[ds.dim()], &[self.mean.len()]));
        }
        let features = ds.features().chunks(ds.dim()).flat_map(|r| self.apply(r)).collect();
        FrameDataset::new(
            features,
            ds.dim(),
            ds.labels().to_vec(),
            ds.speakers().to_vec(),
            ds.class_count(),
        )
    }

    pub fn apply(&self, frame: &[f64]) -> Vec<f64> {
        frame
            .iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

/// Front-end settings.
#[derive(Debug, Clone, PartialEq)]
pub struct LhcbConfig {
    pub window_ms: f64,
    pub n_filters: usize,
    pub context: usize,
}

impl Default for LhcbConfig {
    fn default() -> Self {
        LhcbConfig {
            window_ms: DEFAULT_WINDOW_MS,
            n_filters: DEFAULT_FILTERS,
            context: 15,
        }
    }
}

/// Unnormalized per-frame LHCB coefficients of a signal.
pub fn lhcb_frames(signal: &AudioSignal, cfg: &LhcbConfig) -> Result<Vec<Vec<f64>>> {
    let frames = frame_signal(signal, cfg.window_ms)?;
    let n_bins = frames[0].len().next_power_of_two() / 2 + 1;
    let fb = FilterBank::bark(cfg.n_filters, signal.sample_rate, n_bins)?;
    frames
        .iter()
        .map(|f| lhcb_vector(&power_spectrum(&apply_hamming(f)), &fb))
        .collect()
}

/// One utterance of a corpus: audio, speaker id and optional frame labels.
#[derive(Debug, Clone)]
pub struct Utterance {
    pub signal: AudioSignal,
    pub speaker: usize,
    pub labels: Option<Vec<usize>>,
}

/// Normalization and shape metadata written next to an extracted feature
/// file.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureManifest {
    pub n_frames: usize,
    pub n_filters: usize,
    pub width: usize,
    pub normalizer: FeatureNormalizer,
}

impl FeatureManifest {
    pub fn to_text(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ");
        let mut s = String::new();
        writeln!(s, "n_frames {}", self.n_frames).unwrap();
        writeln!(s, "n_filters {}", self.n_filters).unwrap();
        writeln!(s, "width {}", self.width).unwrap();
        writeln!(s, "mean {}", join(&self.normalizer.mean)).unwrap();
        writeln!(s, "std {}", join(&self.normalizer.std)).unwrap();
        s
    }
}

/// Extracts, normalizes (statistics over all given utterances) and
/// context-stacks every utterance into one dataset.
pub fn extract_corpus(utts: &[Utterance], cfg: &LhcbConfig) -> Result<(FrameDataset, FeatureManifest)> {
    let per_utt: Vec<Vec<Vec<f64>>> = utts
        .iter()
        .map(|u| lhcb_frames(&u.signal, cfg))
        .collect::<Result<_>>()?;
    let all: Vec<Vec<f64>> = per_utt.iter().flatten().cloned().collect();
    let normalizer = FeatureNormalizer::fit(&all)?;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut speakers = Vec::new();
    for (u, frames) in utts.iter().zip(&per_utt) {
        if let Some(l) = &u.labels {
            if l.len() != frames.len() {
                return Err(Error::Validation(format!(
                    "utterance has {} frames but {} labels",
                    frames.len(),
                    l.len()
                )));
            }
        }
        let normed: Vec<Vec<f64>> = frames.iter().map(|f| normalizer.apply(f)).collect();
        for (t, row) in stack_context(&normed, cfg.context)?.into_iter().enumerate() {
            features.extend(row);
            labels.push(u.labels.as_ref().map_or(0, |l| l[t]));
            speakers.push(u.speaker);
        }
    }
    let ds = FrameDataset::new(features, cfg.context * cfg.n_filters, labels, speakers, DEFAULT_CLASSES)?;
    let manifest = FeatureManifest {
        n_frames: ds.len(),
        n_filters: cfg.n_filters,
        width: cfg.context,
        normalizer,
    };
    Ok((ds, manifest))
}

/// Collects `*.wav` files under `dir`. Speaker ids number the distinct
/// parent directories in sorted order; labels come from a sibling `.lab`
/// file holding one class index per frame, when present.
pub fn load_wav_dir(dir: impl AsRef<Path>) -> Result<Vec<Utterance>> {
    let mut files = Vec::new();
    collect_wavs(dir.as_ref(), &mut files)?;
    files.sort();
    let mut parents: Vec<PathBuf> = files.iter().filter_map(|f| f.parent().map(Path::to_path_buf)).collect();
    parents.sort();
    parents.dedup();
    files
        .iter()
        .map(|f| {
            let speaker = parents.binary_search(&f.parent().unwrap().to_path_buf()).unwrap();
            let lab = f.with_extension("lab");
            let labels = if lab.exists() {
                Some(read_labels(&lab)?)
            } else {
                log::warn!("{}: no label file, frames labelled 0", f.display());
                None
            };
            Ok(Utterance {
                signal: AudioSignal::read_wav(f)?,
                speaker,
                labels,
            })
        })
        .collect()
}

/// A single audio file as one utterance of speaker 0: WAV when the
/// extension says so, otherwise headerless 16-bit PCM at `raw_rate`.
pub fn load_audio_file(path: impl AsRef<Path>, raw_rate: u32) -> Result<Utterance> {
    let path = path.as_ref();
    let is_wav = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav"));
    let signal = if is_wav {
        AudioSignal::read_wav(path)?
    } else {
        AudioSignal::read_raw(path, raw_rate)?
    };
    let lab = path.with_extension("lab");
    let labels = if lab.exists() { Some(read_labels(&lab)?) } else { None };
    Ok(Utterance {
        signal,
        speaker: 0,
        labels,
    })
}

fn collect_wavs(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_wavs(&path, out)?;
        } else if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")) {
            out.push(path);
        }
    }
    Ok(())
}

fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let text = std::fs::read_to_string(path)?;
    let mut offset = 0u64;
    let mut out = Vec::new();
    for line in text.split_inclusive('\n') {
        let t = line.trim();
        if !t.is_empty() {
            out.push(t.parse().map_err(|_| Error::Parse {
                offset,
                reason: format!("{}: bad label {t:?}", path.display()),
            })?);
        }
        offset += line.len() as u64;
    }
    Ok(out)
}
