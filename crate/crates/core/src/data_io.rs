//! On-disk formats and the synthetic two-domain generator.
//!
//! Feature matrices use the HGF1 container:
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 4    | magic, ASCII `HGF1`                     |
//! | 4      | 4    | version, u32 little-endian, always 1    |
//! | 8      | 8    | row count, u64 little-endian            |
//! | 16     | 8    | column count, u64 little-endian         |
//! | 24     | 4·rows·cols | row-major f32 little-endian values |
//!
//! Labels and clip indices are plain text, one nonnegative integer per line.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{HiganError, Result};
use crate::linalg::Matrix;
use crate::mlp::{Activation, Layer, MlpNetwork};

pub const MAGIC: [u8; 4] = *b"HGF1";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 24;

/// Encodes the 24-byte HGF1 header.
pub fn encode_header(rows: usize, cols: usize) -> [u8; HEADER_LEN] {
    let mut h = [0u8; HEADER_LEN];
    h[0..4].copy_from_slice(&MAGIC);
    h[4..8].copy_from_slice(&VERSION.to_le_bytes());
    h[8..16].copy_from_slice(&(rows as u64).to_le_bytes());
    h[16..24].copy_from_slice(&(cols as u64).to_le_bytes());
    h
}

/// Serializes a matrix to HGF1 bytes, rounding each entry to the nearest f32.
pub fn encode_features(m: &Matrix) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * m.as_slice().len());
    out.extend_from_slice(&encode_header(m.rows(), m.cols()));
    for (index, &v) in m.as_slice().iter().enumerate() {
        let f = v as f32;
        if !f.is_finite() {
            return Err(HiganError::NonFiniteValue { index });
        }
        out.extend_from_slice(&f.to_le_bytes());
    }
    Ok(out)
}

/// Parses HGF1 bytes; `path` is only used for error context.
pub fn decode_features(bytes: &[u8], path: &Path) -> Result<Matrix> {
    if bytes.len() < HEADER_LEN {
        return Err(HiganError::TruncatedPayload {
            path: path.to_owned(),
            expected: HEADER_LEN as u64,
            found: bytes.len() as u64,
        });
    }
    let magic: [u8; 4] = bytes[0..4].try_into().expect("4 bytes");
    if magic != MAGIC {
        return Err(HiganError::BadMagic {
            path: path.to_owned(),
            found: magic,
        });
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(HiganError::VersionUnsupported {
            path: path.to_owned(),
            version,
        });
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let cols = u64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes"));
    let payload = &bytes[HEADER_LEN..];
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .unwrap_or(u64::MAX);
    if payload.len() as u64 != expected {
        return Err(HiganError::TruncatedPayload {
            path: path.to_owned(),
            expected,
            found: payload.len() as u64,
        });
    }
    let data: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    Matrix::new(rows as usize, cols as usize, data)
}

pub fn write_features(path: &Path, m: &Matrix) -> Result<()> {
    let bytes = encode_features(m)?;
    fs::write(path, bytes).map_err(|e| HiganError::io(path, e))
}

pub fn read_features(path: &Path) -> Result<Matrix> {
    let bytes = fs::read(path).map_err(|e| HiganError::io(path, e))?;
    decode_features(&bytes, path)
}

fn parse_integers(text: &str, path: &Path) -> Result<Vec<usize>> {
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            line.trim().parse::<usize>().map_err(|e| HiganError::Parse {
                path: path.to_owned(),
                line: i + 1,
                msg: format!("{:?}: {e}", line.trim()),
            })
        })
        .collect()
}

pub fn parse_labels(text: &str, path: &Path) -> Result<Vec<usize>> {
    parse_integers(text, path)
}

pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(|e| HiganError::io(path, e))?;
    parse_labels(&text, path)
}

pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let text: String = labels.iter().map(|l| format!("{l}\n")).collect();
    fs::write(path, text).map_err(|e| HiganError::io(path, e))
}

/// Which video each clip row belongs to. Video ids form the contiguous range
/// `0..video_count()` and every video owns at least one clip.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClipIndex {
    video_of: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl ClipIndex {
    pub fn new(video_of: Vec<usize>) -> Result<Self> {
        let n_videos = match video_of.iter().max() {
            Some(&m) => m + 1,
            None => return Err(HiganError::InvalidClipIndex("no clips".into())),
        };
        let mut members = vec![Vec::new(); n_videos];
        for (clip, &v) in video_of.iter().enumerate() {
            members[v].push(clip);
        }
        if let Some(missing) = members.iter().position(Vec::is_empty) {
            return Err(HiganError::InvalidClipIndex(format!(
                "video {missing} owns no clips (ids must be contiguous from 0)"
            )));
        }
        Ok(Self { video_of, members })
    }

    pub fn clip_count(&self) -> usize {
        self.video_of.len()
    }

    pub fn video_count(&self) -> usize {
        self.members.len()
    }

    pub fn video_of(&self, clip: usize) -> usize {
        self.video_of[clip]
    }

    pub fn assignments(&self) -> &[usize] {
        &self.video_of
    }

    /// Clip rows owned by `video`, ascending.
    pub fn clips_of(&self, video: usize) -> &[usize] {
        &self.members[video]
    }
}

pub fn parse_clip_index(text: &str, path: &Path) -> Result<ClipIndex> {
    ClipIndex::new(parse_integers(text, path)?)
}

pub fn read_clip_index(path: &Path) -> Result<ClipIndex> {
    let text = fs::read_to_string(path).map_err(|e| HiganError::io(path, e))?;
    parse_clip_index(&text, path)
}

pub fn write_clip_index(path: &Path, idx: &ClipIndex) -> Result<()> {
    write_labels(path, idx.assignments())
}

/// Everything the two-level adaptation consumes.
///
/// `h_f`, `f` and `v` are row-aligned: row `k` of each describes clip `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainBundle {
    /// Source image features in the image-frame space.
    pub h_s: Matrix,
    pub labels_s: Vec<usize>,
    /// Image-frame features of one frame per clip.
    pub h_f: Matrix,
    /// Frame features of one frame per clip.
    pub f: Matrix,
    /// Video-clip features.
    pub v: Matrix,
    pub clips: ClipIndex,
    /// Per-video target labels, evaluation only.
    pub labels_t: Option<Vec<usize>>,
}

impl DomainBundle {
    pub fn clip_count(&self) -> usize {
        self.f.rows()
    }

    pub fn class_count(&self) -> usize {
        self.labels_s.iter().max().map_or(0, |m| m + 1)
    }

    /// Checks row alignment, the clip partition, label ranges and source
    /// class coverage.
    pub fn validate(&self) -> Result<()> {
        let n = self.f.rows();
        if self.v.rows() != n || self.h_f.rows() != n {
            return Err(HiganError::ShapeMismatch {
                op: "bundle rows (F, V / H_f)",
                left: self.f.shape(),
                right: if self.v.rows() != n { self.v.shape() } else { self.h_f.shape() },
            });
        }
        if self.clips.clip_count() != n {
            return Err(HiganError::InvalidClipIndex(format!(
                "clip index covers {} rows, features have {n}",
                self.clips.clip_count()
            )));
        }
        if self.h_s.cols() != self.h_f.cols() {
            return Err(HiganError::ShapeMismatch {
                op: "bundle image-frame width (H_s, H_f)",
                left: self.h_s.shape(),
                right: self.h_f.shape(),
            });
        }
        if self.labels_s.len() != self.h_s.rows() {
            return Err(HiganError::BadSpec(format!(
                "{} source labels for {} source rows",
                self.labels_s.len(),
                self.h_s.rows()
            )));
        }
        let classes = self.class_count();
        let mut present = vec![false; classes];
        for &l in &self.labels_s {
            present[l] = true;
        }
        if let Some(c) = present.iter().position(|p| !p) {
            return Err(HiganError::BadSpec(format!("class {c} has no source examples")));
        }
        if let Some(t) = &self.labels_t {
            if t.len() != self.clips.video_count() {
                return Err(HiganError::BadSpec(format!(
                    "{} target labels for {} videos",
                    t.len(),
                    self.clips.video_count()
                )));
            }
        }
        Ok(())
    }
}

/// File names used inside a bundle directory.
pub mod names {
    pub const H_S: &str = "H_s.hgf";
    pub const H_F: &str = "H_f.hgf";
    pub const F: &str = "F.hgf";
    pub const V: &str = "V.hgf";
    pub const LABELS_S: &str = "labels_s.txt";
    pub const LABELS_T: &str = "labels_t.txt";
    pub const CLIPS: &str = "clips.txt";
}

pub fn write_bundle(dir: &Path, b: &DomainBundle) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| HiganError::io(dir, e))?;
    write_features(&dir.join(names::H_S), &b.h_s)?;
    write_features(&dir.join(names::H_F), &b.h_f)?;
    write_features(&dir.join(names::F), &b.f)?;
    write_features(&dir.join(names::V), &b.v)?;
    write_labels(&dir.join(names::LABELS_S), &b.labels_s)?;
    if let Some(t) = &b.labels_t {
        write_labels(&dir.join(names::LABELS_T), t)?;
    }
    write_clip_index(&dir.join(names::CLIPS), &b.clips)
}

/// Reads a bundle directory; `labels_t.txt` is optional.
pub fn read_bundle(dir: &Path) -> Result<DomainBundle> {
    let labels_t_path = dir.join(names::LABELS_T);
    let bundle = DomainBundle {
        h_s: read_features(&dir.join(names::H_S))?,
        labels_s: read_labels(&dir.join(names::LABELS_S))?,
        h_f: read_features(&dir.join(names::H_F))?,
        f: read_features(&dir.join(names::F))?,
        v: read_features(&dir.join(names::V))?,
        clips: read_clip_index(&dir.join(names::CLIPS))?,
        labels_t: if labels_t_path.exists() {
            Some(read_labels(&labels_t_path)?)
        } else {
            None
        },
    };
    bundle.validate()?;
    Ok(bundle)
}

const MANIFEST: &str = "manifest.txt";

fn layer_paths(dir: &Path, i: usize) -> (PathBuf, PathBuf) {
    (
        dir.join(format!("layer{i}_weights.hgf")),
        dir.join(format!("layer{i}_bias.hgf")),
    )
}

/// Writes a network checkpoint directory: `manifest.txt` with one
/// `<in_dim> <out_dim> <activation>` line per layer, and per layer an HGF1
/// weight matrix (`out × in`) and a `1 × out` bias.
pub fn write_network(dir: &Path, net: &MlpNetwork) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| HiganError::io(dir, e))?;
    let mut manifest = String::new();
    for (i, layer) in net.layers().iter().enumerate() {
        let spec = layer.spec();
        manifest.push_str(&format!("{} {} {}\n", spec.in_dim, spec.out_dim, spec.activation.name()));
        let (w_path, b_path) = layer_paths(dir, i);
        write_features(&w_path, &layer.weights)?;
        write_features(&b_path, &Matrix::new(1, layer.bias.len(), layer.bias.clone())?)?;
    }
    let path = dir.join(MANIFEST);
    fs::write(&path, manifest).map_err(|e| HiganError::io(&path, e))
}

pub fn read_network(dir: &Path) -> Result<MlpNetwork> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| HiganError::io(&path, e))?;
    let mut layers = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let parse_err = |msg: &str| HiganError::Parse {
            path: path.clone(),
            line: i + 1,
            msg: msg.to_owned(),
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [in_dim, out_dim, act] = fields[..] else {
            return Err(parse_err("expected '<in_dim> <out_dim> <activation>'"));
        };
        let in_dim: usize = in_dim.parse().map_err(|_| parse_err("bad in_dim"))?;
        let out_dim: usize = out_dim.parse().map_err(|_| parse_err("bad out_dim"))?;
        let activation = Activation::parse(act).ok_or_else(|| parse_err("unknown activation"))?;
        let (w_path, b_path) = layer_paths(dir, i);
        let weights = read_features(&w_path)?;
        let bias = read_features(&b_path)?;
        if weights.shape() != (out_dim, in_dim) || bias.shape() != (1, out_dim) {
            return Err(parse_err("layer files disagree with manifest dims"));
        }
        layers.push(Layer {
            weights,
            bias: bias.into_vec(),
            activation,
        });
    }
    MlpNetwork::from_layers(layers, 0)
}

/// Parameters of the synthetic generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub classes: usize,
    pub videos_per_class: usize,
    pub clips_min: usize,
    pub clips_max: usize,
    /// Source images per class.
    pub images_per_class: usize,
    pub d_f: usize,
    pub d_v: usize,
    pub d_h: usize,
    /// Noise scale relative to the minimum distance between class prototypes.
    pub sigma: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            classes: 3,
            videos_per_class: 20,
            clips_min: 5,
            clips_max: 10,
            images_per_class: 40,
            d_f: 6,
            d_v: 4,
            d_h: 5,
            sigma: 0.05,
            seed: 7,
        }
    }
}

impl SynthSpec {
    pub fn latent_dim(&self) -> usize {
        self.d_f.min(self.d_v).min(self.d_h)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(HiganError::BadSpec(m.to_owned()));
        if self.classes < 1 {
            return bad("need at least one class");
        }
        if self.videos_per_class < 1 || self.images_per_class < 1 {
            return bad("need at least one video and one image per class");
        }
        if self.clips_min < 1 || self.clips_min > self.clips_max {
            return bad("clip range must satisfy 1 <= min <= max");
        }
        if self.d_f < 1 || self.d_v < 1 || self.d_h < 1 {
            return bad("dimensions must be at least 1");
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad("sigma must be finite and nonnegative");
        }
        Ok(())
    }
}

/// The hidden structure behind a synthetic bundle.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    /// Class prototypes, `classes × k`.
    pub prototypes: Matrix,
    /// Latent of every clip, `n_clips × k`.
    pub clip_latents: Matrix,
    /// Observation maps `d × k` and offsets for the frame, clip and
    /// image-frame spaces.
    pub map_f: (Matrix, Vec<f64>),
    pub map_v: (Matrix, Vec<f64>),
    pub map_h: (Matrix, Vec<f64>),
}

impl GroundTruth {
    /// `latents · Aᵀ + b` for one of the stored maps.
    pub fn project(map: &(Matrix, Vec<f64>), latents: &Matrix) -> Matrix {
        let mut out = latents.matmul_t(&map.0).expect("latent width matches map");
        let d = map.1.len();
        for (k, v) in out.as_mut_slice().iter_mut().enumerate() {
            *v += map.1[k % d];
        }
        out
    }
}

fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

fn jitter(rng: &mut ChaCha8Rng, base: &[f64], scale: f64) -> Vec<f64> {
    base.iter()
        .map(|b| b + scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn observe(rng: &mut ChaCha8Rng, map: &(Matrix, Vec<f64>), latents: &Matrix, sigma: f64) -> Matrix {
    let clean = GroundTruth::project(map, latents);
    let noise = normal_matrix(rng, clean.rows(), clean.cols(), sigma);
    clean.add(&noise).expect("same shape")
}

/// Draws a bundle from a shared-latent generative process; see
/// [`synthesize_with_truth`].
pub fn synthesize(spec: &SynthSpec) -> Result<DomainBundle> {
    synthesize_with_truth(spec).map(|(b, _)| b)
}

/// Class prototypes live in a `k = min(d_f, d_v, d_h)` dimensional latent
/// space, rescaled so the closest pair is at distance 1. Each video latent is
/// its prototype plus `σ` noise, each clip latent its video latent plus `σ`
/// noise, and every observed space is a fixed random affine image of the
/// latent plus `σ` noise. Source images are drawn around the same prototypes
/// and observed through the image-frame map, so source and frame features
/// share one space.
pub fn synthesize_with_truth(spec: &SynthSpec) -> Result<(DomainBundle, GroundTruth)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let k = spec.latent_dim();

    let mut prototypes = normal_matrix(&mut rng, spec.classes, k, 1.0);
    let mut min_dist = f64::INFINITY;
    for a in 0..spec.classes {
        for b in (a + 1)..spec.classes {
            let d: f64 = prototypes
                .row(a)
                .iter()
                .zip(prototypes.row(b))
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            min_dist = min_dist.min(d);
        }
    }
    if min_dist.is_finite() && min_dist > 0.0 {
        prototypes = prototypes.scale(1.0 / min_dist);
    }

    let map_scale = 1.0 / (k as f64).sqrt();
    let mut affine = |d: usize| {
        let a = normal_matrix(&mut rng, d, k, map_scale);
        let b = (0..d).map(|_| 0.5 * rng.sample::<f64, _>(StandardNormal)).collect::<Vec<_>>();
        (a, b)
    };
    let map_f = affine(spec.d_f);
    let map_v = affine(spec.d_v);
    let map_h = affine(spec.d_h);

    let sigma = spec.sigma;
    let mut clip_latents = Vec::new();
    let mut video_of = Vec::new();
    let mut labels_t = Vec::new();
    for c in 0..spec.classes {
        for _ in 0..spec.videos_per_class {
            let video = labels_t.len();
            labels_t.push(c);
            let video_latent = jitter(&mut rng, prototypes.row(c), sigma);
            let n_clips = rng.random_range(spec.clips_min..=spec.clips_max);
            for _ in 0..n_clips {
                clip_latents.push(jitter(&mut rng, &video_latent, sigma));
                video_of.push(video);
            }
        }
    }
    let clip_latents = Matrix::from_rows(&clip_latents)?;
    let f = observe(&mut rng, &map_f, &clip_latents, sigma);
    let v = observe(&mut rng, &map_v, &clip_latents, sigma);
    let h_f = observe(&mut rng, &map_h, &clip_latents, sigma);

    let mut image_latents = Vec::new();
    let mut labels_s = Vec::new();
    for c in 0..spec.classes {
        for _ in 0..spec.images_per_class {
            image_latents.push(jitter(&mut rng, prototypes.row(c), sigma));
            labels_s.push(c);
        }
    }
    let image_latents = Matrix::from_rows(&image_latents)?;
    let h_s = observe(&mut rng, &map_h, &image_latents, sigma);

    let bundle = DomainBundle {
        h_s,
        labels_s,
        h_f,
        f,
        v,
        clips: ClipIndex::new(video_of)?,
        labels_t: Some(labels_t),
    };
    bundle.validate()?;
    Ok((
        bundle,
        GroundTruth {
            prototypes,
            clip_latents,
            map_f,
            map_v,
            map_h,
        },
    ))
}
