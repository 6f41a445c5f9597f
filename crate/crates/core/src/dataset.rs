//! Frame-labelled datasets, speaker-disjoint splits, the on-disk format and
//! a synthetic 30-class generator.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::{Rng as _, SeedableRng};
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::layers::Rng;
use crate::tensor::{ByteCursor, Tensor};

pub const DEFAULT_CLASSES: usize = 30;
const HEADER_TAG: &str = "CMDNN1";

/// Context-stacked feature rows with one class label and one speaker id per
/// row. Rows are stored contiguously; an empty dataset is allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameDataset {
    features: Vec<f64>,
    dim: usize,
    labels: Vec<usize>,
    speakers: Vec<usize>,
    class_count: usize,
}

impl FrameDataset {
    pub fn new(
        features: Vec<f64>,
        dim: usize,
        labels: Vec<usize>,
        speakers: Vec<usize>,
        class_count: usize,
    ) -> Result<Self> {
        if dim == 0 || class_count == 0 {
            return Err(Error::InvalidArgument("dim and class_count must be positive".into()));
        }
        let n = labels.len();
        if features.len() != n * dim || speakers.len() != n {
            return Err(Error::Validation(format!(
                "row counts disagree: {} feature values for dim {dim}, {n} labels, {} speaker ids",
                features.len(),
                speakers.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
            return Err(Error::Validation(format!(
                "label {bad} not below class count {class_count}"
            )));
        }
        Ok(FrameDataset {
            features,
            dim,
            labels,
            speakers,
            class_count,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn speakers(&self) -> &[usize] {
        &self.speakers
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn speaker_set(&self) -> BTreeSet<usize> {
        self.speakers.iter().copied().collect()
    }

    /// Feature rows and labels for the given row indices.
    pub fn batch(&self, indices: &[usize]) -> Result<(Tensor, Vec<usize>)> {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        let x = Tensor::new(&[indices.len(), self.dim], data)?;
        Ok((x, indices.iter().map(|&i| self.labels[i]).collect()))
    }

    pub fn subset(&self, indices: &[usize]) -> FrameDataset {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        FrameDataset {
            features,
            dim: self.dim,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            speakers: indices.iter().map(|&i| self.speakers[i]).collect(),
            class_count: self.class_count,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(&self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<FrameDataset> {
        FrameDataset::from_bytes(&fs::read(path)?)
    }

    /// `CMDNN1 n_frames dim class_count\n`, the feature tensor, then
    /// `n_frames` little-endian `u32` labels and `n_frames` `u32` speaker ids.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        if self.is_empty() {
            return Err(Error::InvalidArgument("cannot serialize an empty dataset".into()));
        }
        let mut out = format!("{HEADER_TAG} {} {} {}\n", self.len(), self.dim, self.class_count).into_bytes();
        Tensor::new(&[self.len(), self.dim], self.features.clone())?.write_to(&mut out)?;
        for &l in &self.labels {
            out.extend_from_slice(&(l as u32).to_le_bytes());
        }
        for &s in &self.speakers {
            out.extend_from_slice(&(s as u32).to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<FrameDataset> {
        let mut cur = ByteCursor { bytes, pos: 0 };
        let header = cur.line()?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let parse = |s: &str| s.parse::<usize>().ok();
        let (n, dim, classes) = match fields.as_slice() {
            [tag, n, d, c] if *tag == HEADER_TAG => match (parse(n), parse(d), parse(c)) {
                (Some(n), Some(d), Some(c)) => (n, d, c),
                _ => return Err(malformed_header(header)),
            },
            _ => return Err(malformed_header(header)),
        };
        let tensor_at = cur.pos;
        let (features, next) = Tensor::decode(bytes, cur.pos)?;
        if features.shape() != [n, dim] {
            return Err(Error::Parse {
                offset: tensor_at as u64,
                reason: format!(
                    "feature tensor shape {:?} disagrees with header [{n}, {dim}]",
                    features.shape()
                ),
            });
        }
        cur.pos = next;
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            labels.push(cur.u32()? as usize);
        }
        let mut speakers = Vec::with_capacity(n);
        for _ in 0..n {
            speakers.push(cur.u32()? as usize);
        }
        if cur.pos != bytes.len() {
            return Err(cur.error("trailing bytes after speaker ids"));
        }
        FrameDataset::new(features.into_data(), dim, labels, speakers, classes)
    }
}

fn malformed_header(line: &str) -> Error {
    Error::Parse {
        offset: 0,
        reason: format!("malformed header {line:?}, expected `{HEADER_TAG} n_frames dim class_count`"),
    }
}

/// Disjoint speaker sets for training and testing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitSpec {
    pub train_speakers: BTreeSet<usize>,
    pub test_speakers: BTreeSet<usize>,
}

impl SplitSpec {
    pub fn new(train: impl IntoIterator<Item = usize>, test: impl IntoIterator<Item = usize>) -> Result<Self> {
        let spec = SplitSpec {
            train_speakers: train.into_iter().collect(),
            test_speakers: test.into_iter().collect(),
        };
        if let Some(s) = spec.train_speakers.intersection(&spec.test_speakers).next() {
            return Err(Error::Config(format!("speaker {s} is in both train and test sets")));
        }
        Ok(spec)
    }

    /// Holds out the `n_test` highest-numbered speakers of `ds`.
    pub fn hold_out_last(ds: &FrameDataset, n_test: usize) -> Result<Self> {
        let speakers: Vec<usize> = ds.speaker_set().into_iter().collect();
        if n_test == 0 || n_test >= speakers.len() {
            return Err(Error::Config(format!(
                "cannot hold out {n_test} of {} speakers",
                speakers.len()
            )));
        }
        let cut = speakers.len() - n_test;
        SplitSpec::new(speakers[..cut].to_vec(), speakers[cut..].to_vec())
    }
}

/// Partitions frames by speaker. Every speaker in `ds` must be named by
/// exactly one side of `spec`.
pub fn split_by_speaker(ds: &FrameDataset, spec: &SplitSpec) -> Result<(FrameDataset, FrameDataset)> {
    if let Some(s) = spec.train_speakers.intersection(&spec.test_speakers).next() {
        return Err(Error::Config(format!("speaker {s} is in both train and test sets")));
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (i, &s) in ds.speakers.iter().enumerate() {
        if spec.train_speakers.contains(&s) {
            train.push(i);
        } else if spec.test_speakers.contains(&s) {
            test.push(i);
        } else {
            return Err(Error::Config(format!("speaker {s} is not assigned by the split")));
        }
    }
    Ok((ds.subset(&train), ds.subset(&test)))
}

/// Parameters of the synthetic frame-classification task.
///
/// Each class owns a smooth spectro-temporal trajectory: a shared base
/// pattern, plus the deviation of its family (class index modulo
/// `n_families`) scaled by `family_separation`, plus a class-specific
/// deviation scaled by `class_separation`.
/// Each speaker applies a gain and an additive per-filter offset. Every
/// frame views the class trajectory through a randomly shifted window and
/// adds white Gaussian noise of standard deviation `noise_std`.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_speakers: usize,
    pub frames_per_speaker: usize,
    pub n_filters: usize,
    pub width: usize,
    pub class_count: usize,
    pub noise_std: f64,
    pub n_families: usize,
    pub family_separation: f64,
    pub class_separation: f64,
    pub speaker_offset_std: f64,
    pub speaker_gain_std: f64,
    /// Each frame's window is shifted in time by a uniform offset in
    /// `-time_jitter..=time_jitter` frames.
    pub time_jitter: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_speakers: 50,
            frames_per_speaker: 150,
            n_filters: 24,
            width: 15,
            class_count: DEFAULT_CLASSES,
            noise_std: 0.3,
            n_families: 6,
            family_separation: 1.0,
            class_separation: 0.2,
            speaker_offset_std: 0.7,
            speaker_gain_std: 0.2,
            time_jitter: 2,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn dim(&self) -> usize {
        self.width * self.n_filters
    }

    /// Noiseless, speaker-independent variant of this configuration.
    pub fn noiseless(&self) -> SynthConfig {
        SynthConfig {
            noise_std: 0.0,
            speaker_offset_std: 0.0,
            speaker_gain_std: 0.0,
            time_jitter: 0,
            ..self.clone()
        }
    }

    fn stream(&self, stream: u64) -> Rng {
        let mut rng = Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    /// Class trajectories, time-major `(width + 2·time_jitter) × n_filters`.
    fn trajectories(&self) -> Vec<Vec<f64>> {
        let mut rng = self.stream(1);
        let len = self.width + 2 * self.time_jitter;
        let base = smooth_field(len, self.n_filters, &mut rng);
        let families: Vec<Vec<f64>> = (0..self.n_families)
            .map(|_| smooth_field(len, self.n_filters, &mut rng))
            .collect();
        (0..self.class_count)
            .map(|c| {
                let dev = smooth_field(len, self.n_filters, &mut rng);
                let fam = &families[c % self.n_families];
                base.iter()
                    .zip(fam)
                    .zip(&dev)
                    .map(|((b, f), d)| b + self.family_separation * f + self.class_separation * d)
                    .collect()
            })
            .collect()
    }

    /// Unshifted class prototypes, time-major `width × n_filters` each.
    pub fn prototypes(&self) -> Vec<Vec<f64>> {
        let start = self.time_jitter * self.n_filters;
        self.trajectories()
            .into_iter()
            .map(|t| t[start..start + self.dim()].to_vec())
            .collect()
    }

    pub fn generate(&self) -> Result<FrameDataset> {
        if self.n_speakers == 0
            || self.frames_per_speaker == 0
            || self.n_filters == 0
            || self.width == 0
            || self.class_count == 0
            || self.n_families == 0
        {
            return Err(Error::InvalidArgument(
                "synthetic dataset counts must be positive".into(),
            ));
        }
        if !(self.noise_std >= 0.0 && self.speaker_offset_std >= 0.0 && self.speaker_gain_std >= 0.0) {
            return Err(Error::InvalidArgument("noise levels must be non-negative".into()));
        }
        let protos = self.trajectories();
        let mut spk_rng = self.stream(2);
        let mut noise_rng = self.stream(3);
        let mut shift_rng = self.stream(4);
        let std_normal = Normal::new(0.0, 1.0).unwrap();
        let dim = self.dim();
        let n = self.n_speakers * self.frames_per_speaker;
        let mut features = Vec::with_capacity(n * dim);
        let mut labels = Vec::with_capacity(n);
        let mut speakers = Vec::with_capacity(n);
        for s in 0..self.n_speakers {
            let gain = (self.speaker_gain_std * std_normal.sample(&mut spk_rng)).exp();
            let offset: Vec<f64> = smooth_field(1, self.n_filters, &mut spk_rng)
                .into_iter()
                .map(|v| v * self.speaker_offset_std)
                .collect();
            for j in 0..self.frames_per_speaker {
                let label = (s * self.frames_per_speaker + j) % self.class_count;
                let shift = shift_rng.random_range(0..=2 * self.time_jitter);
                let proto = &protos[label][shift * self.n_filters..];
                for t in 0..self.width {
                    for f in 0..self.n_filters {
                        let noise = if self.noise_std > 0.0 {
                            self.noise_std * std_normal.sample(&mut noise_rng)
                        } else {
                            0.0
                        };
                        features.push(gain * proto[t * self.n_filters + f] + offset[f] + noise);
                    }
                }
                labels.push(label);
                speakers.push(s);
            }
        }
        FrameDataset::new(features, dim, labels, speakers, self.class_count)
    }
}

/// Smooth random `rows × cols` field: unit-variance Gaussian control points
/// every few cells, bilinearly interpolated.
fn smooth_field(rows: usize, cols: usize, rng: &mut Rng) -> Vec<f64> {
    const STEP: usize = 3;
    let cr = rows.div_ceil(STEP) + 1;
    let cc = cols.div_ceil(STEP) + 1;
    let normal = Normal::new(0.0, 1.0).unwrap();
    let ctrl: Vec<f64> = (0..cr * cc).map(|_| normal.sample(rng)).collect();
    // Random phase so prototypes are not aligned to the control grid.
    let (dr, dc) = (rng.random_range(0.0..STEP as f64), rng.random_range(0.0..STEP as f64));
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let y = ((r as f64 + dr) / STEP as f64).min((cr - 1) as f64 - 1e-9);
            let x = ((c as f64 + dc) / STEP as f64).min((cc - 1) as f64 - 1e-9);
            let (y0, x0) = (y.floor() as usize, x.floor() as usize);
            let (fy, fx) = (y - y0 as f64, x - x0 as f64);
            let at = |i: usize, j: usize| ctrl[i.min(cr - 1) * cc + j.min(cc - 1)];
            out.push(
                at(y0, x0) * (1.0 - fy) * (1.0 - fx)
                    + at(y0, x0 + 1) * (1.0 - fy) * fx
                    + at(y0 + 1, x0) * fy * (1.0 - fx)
                    + at(y0 + 1, x0 + 1) * fy * fx,
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> FrameDataset {
        FrameDataset::new(vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0], 2, vec![0, 1, 2], vec![7, 7, 9], 3).unwrap()
    }

    #[test]
    fn split_all_train_leaves_test_empty() {
        let ds = tiny();
        let spec = SplitSpec::new([7, 9], []).unwrap();
        let (train, test) = split_by_speaker(&ds, &spec).unwrap();
        assert_eq!(train, ds);
        assert!(test.is_empty());
    }

    #[test]
    fn overlapping_and_incomplete_splits_rejected() {
        assert!(SplitSpec::new([1, 2], [2, 3]).is_err());
        let spec = SplitSpec::new([7], []).unwrap();
        assert!(split_by_speaker(&tiny(), &spec).is_err());
    }

    #[test]
    fn label_out_of_range_rejected() {
        let err = FrameDataset::new(vec![0.0], 1, vec![30], vec![0], 30).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.bin");
        let ds = tiny();
        ds.save(&path).unwrap();
        assert_eq!(FrameDataset::load(&path).unwrap(), ds);
    }

    #[test]
    fn truncated_file_reports_byte_offset() {
        let bytes = tiny().to_bytes().unwrap();
        let cut = bytes.len() - 2;
        match FrameDataset::from_bytes(&bytes[..cut]) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset as usize, bytes.len() - 4),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn out_of_range_label_in_file_is_validation_error() {
        let mut bytes = tiny().to_bytes().unwrap();
        // First label sits right after the feature tensor.
        let header_len = bytes.iter().position(|&b| b == b'\n').unwrap() + 1;
        let label_at = header_len + 4 + 8 + 6 * 8;
        bytes[label_at..label_at + 4].copy_from_slice(&3u32.to_le_bytes());
        assert!(matches!(FrameDataset::from_bytes(&bytes), Err(Error::Validation(_))));
    }

    #[test]
    fn malformed_header() {
        assert!(matches!(
            FrameDataset::from_bytes(b"NOPE 1 2 3\n"),
            Err(Error::Parse { offset: 0, .. })
        ));
    }

    #[test]
    fn synth_is_deterministic_and_balanced() {
        let cfg = SynthConfig {
            n_speakers: 7,
            frames_per_speaker: 13,
            ..SynthConfig::default()
        };
        let a = cfg.generate().unwrap();
        assert_eq!(a, cfg.generate().unwrap());
        let mut hist = vec![0usize; 30];
        for &l in a.labels() {
            hist[l] += 1;
        }
        let (lo, hi) = (hist.iter().min().unwrap(), hist.iter().max().unwrap());
        assert!(hi - lo <= 1, "{hist:?}");
        assert_eq!(a.dim(), 360);
    }

    #[test]
    fn hold_out_last_speakers() {
        let cfg = SynthConfig {
            n_speakers: 10,
            frames_per_speaker: 3,
            ..SynthConfig::default()
        };
        let ds = cfg.generate().unwrap();
        let spec = SplitSpec::hold_out_last(&ds, 3).unwrap();
        assert_eq!(spec.test_speakers, [7, 8, 9].into_iter().collect());
        let (train, test) = split_by_speaker(&ds, &spec).unwrap();
        assert_eq!(train.len() + test.len(), ds.len());
    }
}
