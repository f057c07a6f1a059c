//! Feature-record files, MOS normalization, splitting and synthetic data.
//!
//! Record files hold one JSON object per line:
//!
//! ```text
//! {"id":"img-0001","fi":[0.12,-0.4,...],"ft":[0.9,...],"mos":3.25,"dim":"quality"}
//! ```
//!
//! Files ending in `.gz` are gzip-compressed. Blank lines are ignored.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{arg, AgrmError, Result};
use crate::head::{head_forward, init_head, FeaturePair, HeadConfig, HeadParams};

/// Assessment dimension a MOS refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Quality,
    Consistency,
    Authenticity,
}

impl Dimension {
    pub const ALL: [Dimension; 3] = [Dimension::Quality, Dimension::Consistency, Dimension::Authenticity];

    /// Text template the upstream encoder is given for this dimension.
    /// Prompt consistency uses the generation prompt itself.
    pub fn template(self) -> Option<&'static str> {
        match self {
            Dimension::Quality => Some("A photo of good quality and clear details"),
            Dimension::Authenticity => Some("A photo with genuine scene content and no synthetic artifacts"),
            Dimension::Consistency => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Dimension::Quality => "quality",
            Dimension::Consistency => "consistency",
            Dimension::Authenticity => "authenticity",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub id: String,
    #[serde(flatten)]
    pub features: FeaturePair,
    pub mos: f64,
    pub dim: Dimension,
}

/// On-disk encoding of a record file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordFormat {
    Jsonl,
    JsonlGz,
}

impl RecordFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("gz") => RecordFormat::JsonlGz,
            _ => RecordFormat::Jsonl,
        }
    }
}

/// Load records, choosing the format from the file extension.
pub fn load_records(path: impl AsRef<Path>) -> Result<Vec<FeatureRecord>> {
    let path = path.as_ref();
    load_records_as(path, RecordFormat::from_path(path))
}

pub fn load_records_as(path: impl AsRef<Path>, format: RecordFormat) -> Result<Vec<FeatureRecord>> {
    let path = path.as_ref();
    let file = File::open(path)?;
    match format {
        RecordFormat::Jsonl => read_records(BufReader::new(file), path),
        RecordFormat::JsonlGz => read_records(BufReader::new(GzDecoder::new(file)), path),
    }
}

/// Parse records from any reader; `path` is only used in error messages.
pub fn read_records<R: BufRead>(reader: R, path: &Path) -> Result<Vec<FeatureRecord>> {
    let mut out: Vec<FeatureRecord> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: FeatureRecord = serde_json::from_str(&line).map_err(|e| AgrmError::Parse {
            path: path.to_path_buf(),
            line: lineno,
            msg: e.to_string(),
        })?;
        let f = &rec.features;
        if f.f_i.is_empty() || f.f_t.is_empty() {
            return Err(AgrmError::Schema(format!("line {lineno}: empty feature vector")));
        }
        if !rec.mos.is_finite() || f.f_i.iter().chain(&f.f_t).any(|x| !x.is_finite()) {
            return Err(AgrmError::Schema(format!("line {lineno}: non-finite value")));
        }
        if let Some(first) = out.first() {
            let (wi, wt) = (first.features.f_i.len(), first.features.f_t.len());
            if f.f_i.len() != wi || f.f_t.len() != wt {
                return Err(AgrmError::Schema(format!(
                    "line {lineno}: feature lengths ({}, {}) differ from ({wi}, {wt})",
                    f.f_i.len(),
                    f.f_t.len()
                )));
            }
        }
        out.push(rec);
    }
    Ok(out)
}

/// Write records, gzip-compressing when the path ends in `.gz`.
pub fn save_records(path: impl AsRef<Path>, records: &[FeatureRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path)?;
    match RecordFormat::from_path(path) {
        RecordFormat::Jsonl => write_records(BufWriter::new(file), records),
        RecordFormat::JsonlGz => {
            let mut enc = GzEncoder::new(BufWriter::new(file), Compression::default());
            write_records(&mut enc, records)?;
            enc.finish()?.flush()?;
            Ok(())
        }
    }
}

pub fn write_records<W: Write>(mut w: W, records: &[FeatureRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Number of records per assessment dimension.
pub fn dim_counts(records: &[FeatureRecord]) -> BTreeMap<Dimension, usize> {
    let mut counts = BTreeMap::new();
    for r in records {
        *counts.entry(r.dim).or_insert(0) += 1;
    }
    counts
}

/// Affine map from an observed MOS range onto a target range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MosTransform {
    pub src_lo: f64,
    pub src_hi: f64,
    pub dst_lo: f64,
    pub dst_hi: f64,
}

impl MosTransform {
    pub fn apply(&self, mos: f64) -> f64 {
        self.dst_lo + (mos - self.src_lo) * (self.dst_hi - self.dst_lo) / (self.src_hi - self.src_lo)
    }

    pub fn invert(&self, score: f64) -> f64 {
        self.src_lo + (score - self.dst_lo) * (self.src_hi - self.src_lo) / (self.dst_hi - self.dst_lo)
    }
}

/// Min-max map the observed MOS range onto `[lo, hi]`.
pub fn normalize_mos(records: &[FeatureRecord], lo: f64, hi: f64) -> Result<(Vec<FeatureRecord>, MosTransform)> {
    if !(hi > lo) {
        return arg(format!("normalization range [{lo}, {hi}] is empty"));
    }
    let src_lo = records.iter().map(|r| r.mos).fold(f64::INFINITY, f64::min);
    let src_hi = records.iter().map(|r| r.mos).fold(f64::NEG_INFINITY, f64::max);
    if !(src_hi > src_lo) {
        return arg("MOS values are constant; nothing to normalize");
    }
    let t = MosTransform {
        src_lo,
        src_hi,
        dst_lo: lo,
        dst_hi: hi,
    };
    let out = records
        .iter()
        .map(|r| FeatureRecord {
            mos: t.apply(r.mos),
            ..r.clone()
        })
        .collect();
    Ok((out, t))
}

/// Seeded shuffle, then the first `round(fraction * n)` records go to train.
pub fn split(records: &[FeatureRecord], train_fraction: f64, seed: u64) -> Result<(Vec<FeatureRecord>, Vec<FeatureRecord>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return arg(format!("train fraction must be in (0, 1), got {train_fraction}"));
    }
    let mut idx: Vec<usize> = (0..records.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (train_fraction * records.len() as f64).round() as usize;
    let pick = |ix: &[usize]| ix.iter().map(|&i| records[i].clone()).collect::<Vec<_>>();
    Ok((pick(&idx[..n_train]), pick(&idx[n_train..])))
}

/// Settings for a synthetic dataset generated by a planted head.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n: usize,
    pub d_img: usize,
    pub d_txt: usize,
    pub noise_sigma: f64,
    pub seed: u64,
    pub head: HeadConfig,
    /// Use this head instead of drawing one.
    pub planted: Option<HeadParams>,
}

impl SynthConfig {
    pub fn new(n: usize, d_img: usize, d_txt: usize, noise_sigma: f64, seed: u64) -> Self {
        Self {
            n,
            d_img,
            d_txt,
            noise_sigma,
            seed,
            head: HeadConfig::default(),
            planted: None,
        }
    }
}

/// Seed offset separating the planted head's draw from the feature draws.
const PLANTED_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Standard-normal features scored by a planted head plus Gaussian noise.
pub fn synth_generate(cfg: &SynthConfig) -> Result<(Vec<FeatureRecord>, HeadParams)> {
    if cfg.n < 2 || cfg.d_img == 0 || cfg.d_txt == 0 {
        return arg("synthetic data needs n >= 2 and positive dimensions");
    }
    if !(cfg.noise_sigma >= 0.0 && cfg.noise_sigma.is_finite()) {
        return arg(format!("noise sigma must be >= 0, got {}", cfg.noise_sigma));
    }
    let planted = match &cfg.planted {
        Some(hp) => {
            hp.validate()?;
            if hp.d_img != cfg.d_img || hp.d_txt != cfg.d_txt {
                return arg("planted head dimensions do not match the synthetic config");
            }
            hp.clone()
        }
        None => init_head(cfg.d_img, cfg.d_txt, cfg.head, cfg.seed ^ PLANTED_SEED_SALT)?,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.noise_sigma).map_err(|e| AgrmError::Argument(e.to_string()))?;
    let mut records = Vec::with_capacity(cfg.n);
    for i in 0..cfg.n {
        let f_i: Vec<f64> = (0..cfg.d_img).map(|_| StandardNormal.sample(&mut rng)).collect();
        let f_t: Vec<f64> = (0..cfg.d_txt).map(|_| StandardNormal.sample(&mut rng)).collect();
        let features = FeaturePair::new(f_i, f_t);
        let clean = head_forward(&planted, &features)?.q_rescaled;
        let mos = if cfg.noise_sigma > 0.0 {
            clean + noise.sample(&mut rng)
        } else {
            clean
        };
        records.push(FeatureRecord {
            id: format!("synth-{i:06}"),
            features,
            mos,
            dim: Dimension::Quality,
        });
    }
    Ok((records, planted))
}
