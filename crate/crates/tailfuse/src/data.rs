//! Synthetic long-tailed paired-modality benchmark, clip sampling with
//! last-frame padding, and line-delimited dataset IO.
//!
//! Each sample carries two temporally aligned feature sequences (modality
//! A and modality B). Class frequencies in the train split follow an
//! exponential long-tail profile; validation and test splits are
//! balanced. With probability `confusion_rate` exactly one modality of a
//! sample is blended halfway toward a fixed neighbor class, so the two
//! modalities carry complementary information and fusing them pays off.
//!
//! The dataset file format is one JSON object per line with explicit
//! `rows`/`cols` tags on both sequences; any conforming file can be read
//! back, including feature sequences exported from elsewhere.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::{Matrix, Rng};

/// Which of the two aligned modalities a component consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    A,
    B,
}

impl Modality {
    pub fn tag(&self) -> &'static str {
        match self {
            Modality::A => "a",
            Modality::B => "b",
        }
    }
}

impl std::str::FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" | "A" => Ok(Modality::A),
            "b" | "B" => Ok(Modality::B),
            other => Err(Error::InvalidArgument {
                arg: "modality",
                reason: format!("expected `a` or `b`, got `{other}`"),
            }),
        }
    }
}

/// One labeled sample: two temporally aligned feature sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SampleWire", into = "SampleWire")]
pub struct Sample {
    pub id: u64,
    pub label: usize,
    pub seq_a: Matrix,
    pub seq_b: Matrix,
}

#[derive(Serialize, Deserialize)]
struct SampleWire {
    id: u64,
    label: usize,
    seq_a: Matrix,
    seq_b: Matrix,
}

impl From<Sample> for SampleWire {
    fn from(s: Sample) -> Self {
        SampleWire {
            id: s.id,
            label: s.label,
            seq_a: s.seq_a,
            seq_b: s.seq_b,
        }
    }
}

impl TryFrom<SampleWire> for Sample {
    type Error = Error;

    fn try_from(w: SampleWire) -> Result<Self> {
        if w.seq_a.rows() != w.seq_b.rows() {
            return Err(Error::ShapeMismatch {
                op: "Sample",
                expected: "aligned sequences with equal frame counts".to_string(),
                got: format!(
                    "seq_a {} frames, seq_b {} frames",
                    w.seq_a.rows(),
                    w.seq_b.rows()
                ),
            });
        }
        Ok(Sample {
            id: w.id,
            label: w.label,
            seq_a: w.seq_a,
            seq_b: w.seq_b,
        })
    }
}

impl Sample {
    pub fn seq(&self, modality: Modality) -> &Matrix {
        match modality {
            Modality::A => &self.seq_a,
            Modality::B => &self.seq_b,
        }
    }

    pub fn frames(&self) -> usize {
        self.seq_a.rows()
    }
}

/// Generator configuration for the synthetic benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    /// Number of classes.
    pub k: usize,
    /// Training samples for the most frequent class.
    pub n_head: usize,
    /// Head-to-tail training count ratio (rho >= 1).
    pub imbalance_ratio: f64,
    /// Feature width of modality A.
    pub d_a: usize,
    /// Feature width of modality B.
    pub d_b: usize,
    /// Sequence length bounds (inclusive).
    pub len_min: usize,
    pub len_max: usize,
    /// Per-frame Gaussian noise scale.
    pub noise_sigma: f64,
    /// Probability that exactly one modality of a sample is blended
    /// halfway toward the neighbor class `(label + 1) mod k`.
    pub confusion_rate: f64,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            k: 12,
            n_head: 200,
            imbalance_ratio: 50.0,
            d_a: 16,
            d_b: 16,
            len_min: 8,
            len_max: 48,
            noise_sigma: 1.0,
            confusion_rate: 0.3,
            seed: 42,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".to_string()));
        }
        if self.n_head == 0 {
            return Err(Error::Config("n-head must be at least 1".to_string()));
        }
        if !self.imbalance_ratio.is_finite() || self.imbalance_ratio < 1.0 {
            return Err(Error::Config(format!(
                "imbalance-ratio must be >= 1, got {}",
                self.imbalance_ratio
            )));
        }
        if self.d_a == 0 || self.d_b == 0 {
            return Err(Error::Config("feature dims must be positive".to_string()));
        }
        if self.len_min == 0 || self.len_max < self.len_min {
            return Err(Error::Config(format!(
                "sequence length bounds must satisfy 1 <= len-min <= len-max, got {}..{}",
                self.len_min, self.len_max
            )));
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return Err(Error::Config(format!(
                "noise-sigma must be nonnegative, got {}",
                self.noise_sigma
            )));
        }
        if !(0.0..=1.0).contains(&self.confusion_rate) {
            return Err(Error::Config(format!(
                "confusion-rate must lie in [0, 1], got {}",
                self.confusion_rate
            )));
        }
        Ok(())
    }

    /// Balanced per-class size of the val and test splits.
    pub fn eval_per_class(&self) -> usize {
        self.n_head.div_ceil(10)
    }
}

/// Exponential long-tail profile: class `c` gets
/// `round(n_head * rho^(-c / (k - 1)))` training samples, floored at 1,
/// so class 0 keeps `n_head` and class `k - 1` gets about `n_head / rho`.
pub fn class_counts(cfg: &DatasetConfig) -> Vec<usize> {
    if cfg.k == 1 {
        return vec![cfg.n_head];
    }
    (0..cfg.k)
        .map(|c| {
            let exponent = -(c as f64) / (cfg.k - 1) as f64;
            let n = (cfg.n_head as f64 * cfg.imbalance_ratio.powf(exponent)).round() as usize;
            n.max(1)
        })
        .collect()
}

/// The three splits of a generated benchmark.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
    pub test: Vec<Sample>,
}

/// Norm scale of the class prototypes (relative to `sqrt(d)`).
/// Separation has to be wide enough that the heads converge within the
/// short default training budget; the confusable blending below is what
/// keeps single modalities away from perfect accuracy.
const PROTOTYPE_SCALE: f64 = 3.0;

/// Scale of the per-sample offset relative to `noise_sigma`. The offset
/// shifts every frame of a sample coherently, so temporal pooling cannot
/// average it away; it is the irreducible within-class variation.
const SAMPLE_OFFSET_SCALE: f64 = 0.25;

/// Prototype blend weight for a corrupted modality: halfway toward the
/// neighbor class.
const CONFUSION_BLEND: f64 = 0.5;

struct Prototypes {
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
}

/// Draws `k` class prototypes in `R^d`: random Gaussian directions,
/// orthonormalized against the earlier ones (so class directions are
/// exactly orthogonal while `k <= d` and all prototypes are mutually
/// equidistant), then scaled to norm `PROTOTYPE_SCALE * sqrt(d)`.
/// Beyond `d` prototypes the extra directions are only normalized.
fn draw_prototype_set(k: usize, d: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let target_norm = PROTOTYPE_SCALE * (d as f64).sqrt();
    let mut protos: Vec<Vec<f64>> = Vec::with_capacity(k);
    for _ in 0..k {
        let mut v = rng.gaussian_vec(d);
        for prev in &protos {
            let dot: f64 = v.iter().zip(prev).map(|(x, y)| x * y).sum();
            let prev_sq: f64 = prev.iter().map(|y| y * y).sum();
            for (x, y) in v.iter_mut().zip(prev) {
                *x -= dot / prev_sq * y;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-9 {
            // degenerate direction (k > d); fall back to a fresh draw
            v = rng.gaussian_vec(d);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in &mut v {
            *x *= target_norm / norm;
        }
        protos.push(v);
    }
    protos
}

fn draw_prototypes(cfg: &DatasetConfig, rng: &mut Rng) -> Prototypes {
    let a = draw_prototype_set(cfg.k, cfg.d_a, rng);
    let b = draw_prototype_set(cfg.k, cfg.d_b, rng);
    Prototypes { a, b }
}

fn blend(proto: &[f64], neighbor: &[f64]) -> Vec<f64> {
    proto
        .iter()
        .zip(neighbor)
        .map(|(p, n)| (1.0 - CONFUSION_BLEND) * p + CONFUSION_BLEND * n)
        .collect()
}

fn generate_sequence(
    base: &[f64],
    frames: usize,
    sigma: f64,
    offset_sigma: f64,
    rng: &mut Rng,
) -> Matrix {
    let d = base.len();
    let offset: Vec<f64> = rng
        .gaussian_vec(d)
        .into_iter()
        .map(|x| x * offset_sigma)
        .collect();
    let mut data = Vec::with_capacity(frames * d);
    for _ in 0..frames {
        for j in 0..d {
            data.push(base[j] + offset[j] + sigma * rng.gaussian());
        }
    }
    Matrix::new(frames, d, data).expect("generated sequence is well-formed")
}

fn generate_sample(
    cfg: &DatasetConfig,
    protos: &Prototypes,
    label: usize,
    id: u64,
    rng: &mut Rng,
) -> Sample {
    let frames = cfg.len_min + rng.gen_range(cfg.len_max - cfg.len_min + 1);
    // Both coins are drawn unconditionally so the stream position does
    // not depend on their outcomes.
    let corrupted = rng.next_f64() < cfg.confusion_rate;
    let corrupt_a = rng.next_f64() < 0.5;
    let neighbor = (label + 1) % cfg.k;
    let base_a = if corrupted && corrupt_a {
        blend(&protos.a[label], &protos.a[neighbor])
    } else {
        protos.a[label].clone()
    };
    let base_b = if corrupted && !corrupt_a {
        blend(&protos.b[label], &protos.b[neighbor])
    } else {
        protos.b[label].clone()
    };
    let offset_sigma = cfg.noise_sigma * SAMPLE_OFFSET_SCALE;
    let seq_a = generate_sequence(&base_a, frames, cfg.noise_sigma, offset_sigma, rng);
    let seq_b = generate_sequence(&base_b, frames, cfg.noise_sigma, offset_sigma, rng);
    Sample {
        id,
        label,
        seq_a,
        seq_b,
    }
}

fn build_split(
    cfg: &DatasetConfig,
    protos: &Prototypes,
    per_class: &[usize],
    next_id: &mut u64,
    rng: &mut Rng,
) -> Vec<Sample> {
    let mut out = Vec::new();
    for (label, &count) in per_class.iter().enumerate() {
        for _ in 0..count {
            out.push(generate_sample(cfg, protos, label, *next_id, rng));
            *next_id += 1;
        }
    }
    out
}

/// Generates the full benchmark deterministically from `cfg.seed`:
/// long-tailed train split, balanced val and test splits.
pub fn generate(cfg: &DatasetConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = Rng::new(cfg.seed);
    let protos = draw_prototypes(cfg, &mut rng);
    let counts = class_counts(cfg);
    let eval_counts = vec![cfg.eval_per_class(); cfg.k];
    let mut next_id = 0u64;
    let train = build_split(cfg, &protos, &counts, &mut next_id, &mut rng);
    let val = build_split(cfg, &protos, &eval_counts, &mut next_id, &mut rng);
    let test = build_split(cfg, &protos, &eval_counts, &mut next_id, &mut rng);
    Ok(Dataset { train, val, test })
}

/// A fixed-length window of consecutive frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Clip {
    pub frames: Matrix,
    pub source_start: usize,
}

fn padded_clip(seq: &Matrix, clip_len: usize) -> Clip {
    let mut rows: Vec<&[f64]> = (0..seq.rows()).map(|i| seq.row(i)).collect();
    let last = seq.row(seq.rows() - 1);
    rows.extend(std::iter::repeat_n(last, clip_len - seq.rows()));
    Clip {
        frames: Matrix::from_rows(&rows).expect("padded clip is well-formed"),
        source_start: 0,
    }
}

fn window_clip(seq: &Matrix, clip_len: usize, start: usize) -> Clip {
    let rows: Vec<&[f64]> = (start..start + clip_len).map(|i| seq.row(i)).collect();
    Clip {
        frames: Matrix::from_rows(&rows).expect("window clip is well-formed"),
        source_start: start,
    }
}

/// Random training clip: `clip_len` consecutive frames starting at a
/// uniform index when the sequence is long enough, otherwise the whole
/// sequence padded with copies of its last frame.
pub fn sample_clip(seq: &Matrix, clip_len: usize, rng: &mut Rng) -> Result<Clip> {
    if clip_len == 0 {
        return Err(Error::InvalidArgument {
            arg: "clip_len",
            reason: "must be at least 1".to_string(),
        });
    }
    if seq.rows() >= clip_len {
        let start = rng.gen_range(seq.rows() - clip_len + 1);
        Ok(window_clip(seq, clip_len, start))
    } else {
        Ok(padded_clip(seq, clip_len))
    }
}

/// Deterministic evaluation clip: centered in time, padded the same way
/// as [`sample_clip`] for short sequences.
pub fn eval_clip(seq: &Matrix, clip_len: usize) -> Result<Clip> {
    if clip_len == 0 {
        return Err(Error::InvalidArgument {
            arg: "clip_len",
            reason: "must be at least 1".to_string(),
        });
    }
    if seq.rows() >= clip_len {
        Ok(window_clip(seq, clip_len, (seq.rows() - clip_len) / 2))
    } else {
        Ok(padded_clip(seq, clip_len))
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes one split as line-delimited JSON records. Values use
/// shortest-round-trip decimal encoding, so a read of the written file
/// reproduces every float bit-exactly.
pub fn write_dataset(path: &Path, samples: &[Sample]) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    for sample in samples {
        let line = serde_json::to_string(sample).map_err(|e| Error::FileFormat {
            path: path.display().to_string(),
            msg: format!("record {} failed to serialize: {e}", sample.id),
        })?;
        writeln!(w, "{line}").map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Reads a split written by [`write_dataset`] or produced externally in
/// the same record format. Errors name the offending line.
pub fn read_dataset(path: &Path) -> Result<Vec<Sample>> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let sample: Sample = serde_json::from_str(&line).map_err(|e| Error::Record {
            path: path.display().to_string(),
            line: idx + 1,
            msg: e.to_string(),
        })?;
        out.push(sample);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_balanced_when_ratio_is_one() {
        let cfg = DatasetConfig {
            imbalance_ratio: 1.0,
            ..DatasetConfig::default()
        };
        assert_eq!(class_counts(&cfg), vec![200; 12]);
    }

    #[test]
    fn counts_default_head_and_tail() {
        let cfg = DatasetConfig::default();
        let counts = class_counts(&cfg);
        assert_eq!(counts[0], 200);
        assert_eq!(counts[11], 4);
    }

    #[test]
    fn counts_are_non_increasing() {
        let cfg = DatasetConfig::default();
        let counts = class_counts(&cfg);
        assert!(counts.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn generate_is_deterministic() {
        let cfg = DatasetConfig {
            n_head: 10,
            len_max: 12,
            ..DatasetConfig::default()
        };
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.val, b.val);
        assert_eq!(a.test, b.test);
    }

    #[test]
    fn generate_split_sizes_follow_counts() {
        let cfg = DatasetConfig::default();
        let ds = generate(&cfg).unwrap();
        let expected_train: usize = class_counts(&cfg).iter().sum();
        assert_eq!(ds.train.len(), expected_train);
        assert_eq!(ds.val.len(), cfg.k * cfg.eval_per_class());
        assert_eq!(ds.test.len(), cfg.k * cfg.eval_per_class());
        // balanced eval splits
        for label in 0..cfg.k {
            let n = ds.test.iter().filter(|s| s.label == label).count();
            assert_eq!(n, cfg.eval_per_class());
        }
    }

    #[test]
    fn noiseless_unconfused_samples_equal_their_prototype() {
        let cfg = DatasetConfig {
            n_head: 5,
            noise_sigma: 0.0,
            confusion_rate: 0.0,
            len_max: 10,
            ..DatasetConfig::default()
        };
        let ds = generate(&cfg).unwrap();
        // every frame of every sample of one class is one fixed vector
        for label in 0..cfg.k {
            let samples: Vec<&Sample> = ds.train.iter().filter(|s| s.label == label).collect();
            let reference = samples[0].seq_a.row(0).to_vec();
            for s in &samples {
                for i in 0..s.seq_a.rows() {
                    assert_eq!(s.seq_a.row(i), &reference[..]);
                }
            }
        }
    }

    /// Mean-pool a full sequence over time.
    fn pooled(m: &Matrix) -> Vec<f64> {
        m.column_means()
    }

    fn dist2(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
    }

    /// Brute-force nearest-prototype classifier: per-class mean of pooled
    /// train features, nearest neighbor by squared distance; the fused
    /// variant sums the squared distances of both modalities.
    fn nearest_prototype_accuracy(ds: &Dataset, k: usize, mode: usize) -> f64 {
        let mut proto_a = vec![vec![0.0; ds.train[0].seq_a.cols()]; k];
        let mut proto_b = vec![vec![0.0; ds.train[0].seq_b.cols()]; k];
        let mut counts = vec![0usize; k];
        for s in &ds.train {
            counts[s.label] += 1;
            for (p, x) in proto_a[s.label].iter_mut().zip(pooled(&s.seq_a)) {
                *p += x;
            }
            for (p, x) in proto_b[s.label].iter_mut().zip(pooled(&s.seq_b)) {
                *p += x;
            }
        }
        for label in 0..k {
            for p in &mut proto_a[label] {
                *p /= counts[label] as f64;
            }
            for p in &mut proto_b[label] {
                *p /= counts[label] as f64;
            }
        }
        let mut hits = 0usize;
        for s in &ds.test {
            let xa = pooled(&s.seq_a);
            let xb = pooled(&s.seq_b);
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for label in 0..k {
                let d = match mode {
                    0 => dist2(&xa, &proto_a[label]),
                    1 => dist2(&xb, &proto_b[label]),
                    _ => dist2(&xa, &proto_a[label]) + dist2(&xb, &proto_b[label]),
                };
                if d < best_d {
                    best_d = d;
                    best = label;
                }
            }
            if best == s.label {
                hits += 1;
            }
        }
        hits as f64 / ds.test.len() as f64
    }

    #[test]
    fn noiseless_dataset_is_perfectly_separable() {
        let cfg = DatasetConfig {
            n_head: 5,
            noise_sigma: 0.0,
            confusion_rate: 0.0,
            len_max: 10,
            ..DatasetConfig::default()
        };
        let ds = generate(&cfg).unwrap();
        assert_eq!(nearest_prototype_accuracy(&ds, cfg.k, 0), 1.0);
        assert_eq!(nearest_prototype_accuracy(&ds, cfg.k, 1), 1.0);
        assert_eq!(nearest_prototype_accuracy(&ds, cfg.k, 2), 1.0);
    }

    #[test]
    fn fused_nearest_prototype_beats_single_modalities() {
        let ds = generate(&DatasetConfig::default()).unwrap();
        let acc_a = nearest_prototype_accuracy(&ds, 12, 0);
        let acc_b = nearest_prototype_accuracy(&ds, 12, 1);
        let acc_fused = nearest_prototype_accuracy(&ds, 12, 2);
        assert!(
            acc_fused > acc_a && acc_fused > acc_b,
            "fused {acc_fused} vs a {acc_a}, b {acc_b}"
        );
    }

    #[test]
    fn sample_clip_long_sequence() {
        let mut rng = Rng::new(1);
        let seq = Matrix::new(40, 2, (0..80).map(|x| x as f64).collect()).unwrap();
        for _ in 0..50 {
            let clip = sample_clip(&seq, 16, &mut rng).unwrap();
            assert_eq!(clip.frames.rows(), 16);
            assert!(clip.source_start <= 24);
            for i in 0..16 {
                assert_eq!(clip.frames.row(i), seq.row(clip.source_start + i));
            }
        }
    }

    #[test]
    fn sample_clip_short_sequence_pads_with_last_frame() {
        let mut rng = Rng::new(1);
        let seq = Matrix::new(10, 2, (0..20).map(|x| x as f64).collect()).unwrap();
        let clip = sample_clip(&seq, 16, &mut rng).unwrap();
        assert_eq!(clip.frames.rows(), 16);
        assert_eq!(clip.source_start, 0);
        for i in 0..10 {
            assert_eq!(clip.frames.row(i), seq.row(i));
        }
        for i in 10..16 {
            assert_eq!(clip.frames.row(i), seq.row(9));
        }
    }

    #[test]
    fn sample_clip_exact_fit() {
        let mut rng = Rng::new(1);
        let seq = Matrix::new(16, 3, (0..48).map(|x| x as f64).collect()).unwrap();
        let clip = sample_clip(&seq, 16, &mut rng).unwrap();
        assert_eq!(clip.source_start, 0);
        assert_eq!(clip.frames, seq);
    }

    #[test]
    fn clip_length_always_exact() {
        let mut rng = Rng::new(3);
        for t in 1..40 {
            let seq = Matrix::new(t, 2, vec![1.0; t * 2]).unwrap();
            for clip_len in [1, 5, 16, 33] {
                let clip = sample_clip(&seq, clip_len, &mut rng).unwrap();
                assert_eq!(clip.frames.rows(), clip_len);
            }
        }
    }

    #[test]
    fn eval_clip_is_centered() {
        let seq = Matrix::new(40, 1, (0..40).map(|x| x as f64).collect()).unwrap();
        let clip = eval_clip(&seq, 16).unwrap();
        assert_eq!(clip.source_start, 12);
        let exact = Matrix::new(16, 1, (0..16).map(|x| x as f64).collect()).unwrap();
        let clip = eval_clip(&exact, 16).unwrap();
        assert_eq!(clip.source_start, 0);
        let short = Matrix::new(3, 1, vec![7.0, 8.0, 9.0]).unwrap();
        let clip = eval_clip(&short, 16).unwrap();
        assert_eq!(clip.source_start, 0);
        assert_eq!(clip.frames.row(15), &[9.0]);
    }

    #[test]
    fn dataset_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("split.jsonl");
        let cfg = DatasetConfig {
            n_head: 4,
            k: 3,
            len_max: 9,
            ..DatasetConfig::default()
        };
        let ds = generate(&cfg).unwrap();
        write_dataset(&path, &ds.train).unwrap();
        let back = read_dataset(&path).unwrap();
        assert_eq!(back.len(), ds.train.len());
        for (a, b) in ds.train.iter().zip(&back) {
            assert_eq!(a, b);
            for (x, y) in a.seq_a.as_slice().iter().zip(b.seq_a.as_slice()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn read_reports_line_number_on_malformed_input() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(
            &path,
            "{\"id\":0,\"label\":0,\"seq_a\":{\"rows\":1,\"cols\":1,\"data\":[0.5]},\"seq_b\":{\"rows\":1,\"cols\":1,\"data\":[0.5]}}\n{\"id\":1,\"label\"",
        )
        .unwrap();
        let err = read_dataset(&path).unwrap_err();
        match err {
            Error::Record { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn read_rejects_misaligned_modalities() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("misaligned.jsonl");
        std::fs::write(
            &path,
            "{\"id\":0,\"label\":0,\"seq_a\":{\"rows\":2,\"cols\":1,\"data\":[0.5,0.5]},\"seq_b\":{\"rows\":1,\"cols\":1,\"data\":[0.5]}}",
        )
        .unwrap();
        let err = read_dataset(&path).unwrap_err();
        match err {
            Error::Record { line, msg, .. } => {
                assert_eq!(line, 1);
                assert!(msg.contains("frames"), "{msg}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn read_rejects_shape_inconsistency() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("shape.jsonl");
        std::fs::write(
            &path,
            "{\"id\":0,\"label\":0,\"seq_a\":{\"rows\":2,\"cols\":2,\"data\":[0.5]},\"seq_b\":{\"rows\":2,\"cols\":1,\"data\":[0.5,0.5]}}",
        )
        .unwrap();
        assert!(matches!(
            read_dataset(&path).unwrap_err(),
            Error::Record { line: 1, .. }
        ));
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        let cfg = DatasetConfig {
            imbalance_ratio: 0.5,
            ..DatasetConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = DatasetConfig {
            len_min: 10,
            len_max: 5,
            ..DatasetConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = DatasetConfig {
            confusion_rate: 1.5,
            ..DatasetConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
