//! Single-file model checkpoints.
//!
//! Layout: the 8 magic bytes `HOUSEKG1`, a little-endian `u64` byte length,
//! that many bytes of UTF-8 `key=value` lines, then every parameter as a
//! little-endian `f64`: the entity table row by row, followed for each
//! relation by its reflection vectors, head axes, head scalars, tail axes,
//! tail scalars and (for translating variants) its translation.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use log::warn;
use thiserror::Error;

use crate::model::{HouseModel, ModelConfig, ModelError, Variant};

pub const MAGIC: &[u8; 8] = b"HOUSEKG1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("not a checkpoint (bad magic bytes)")]
    BadMagic,
    #[error("checkpoint format version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("bad checkpoint header: {0}")]
    BadHeader(String),
    #[error("truncated payload: header implies {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("payload size mismatch: header implies {expected} bytes, found {found}")]
    PayloadMismatch { expected: usize, found: usize },
    #[error("checkpoint holds a {found} model, expected {expected}")]
    VariantMismatch { expected: Variant, found: Variant },
    #[error("vocabulary digest {found} does not match dataset digest {expected}")]
    DigestMismatch { expected: String, found: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

type Result<T> = std::result::Result<T, CheckpointError>;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: HouseModel,
    pub vocab_digest: String,
}

impl Checkpoint {
    pub fn new(model: HouseModel, vocab_digest: impl Into<String>) -> Self {
        Self { model, vocab_digest: vocab_digest.into() }
    }

    /// Checks the stored variant and vocabulary against what the caller is
    /// about to use. A digest mismatch only warns unless `strict`.
    pub fn verify(&self, variant: Option<Variant>, digest: &str, strict: bool) -> Result<()> {
        let found = self.model.config().variant;
        if let Some(expected) = variant {
            if expected != found {
                return Err(CheckpointError::VariantMismatch { expected, found });
            }
        }
        if self.vocab_digest != digest {
            if strict {
                return Err(CheckpointError::DigestMismatch {
                    expected: digest.to_string(),
                    found: self.vocab_digest.clone(),
                });
            }
            warn!("checkpoint vocabulary digest {} differs from dataset digest {digest}", self.vocab_digest);
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let cfg = self.model.config();
        let header = format!(
            "format_version={FORMAT_VERSION}\nvariant={}\nd={}\nk={}\nm={}\nn={}\nnum_entities={}\nnum_relations={}\nseed={}\ninit_gamma={}\nvocab_digest={}\n",
            cfg.variant,
            cfg.d,
            cfg.k,
            cfg.m,
            cfg.n(),
            cfg.num_entities,
            cfg.num_relations,
            cfg.seed,
            cfg.init_gamma,
            self.vocab_digest
        );
        let mut out = Vec::with_capacity(16 + header.len() + 8 * self.model.num_parameters());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(header.as_bytes());
        for_each_segment(&self.model, |values| {
            for v in values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        });
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let header_end = 16usize
            .checked_add(header_len)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| CheckpointError::BadHeader("header length exceeds file".into()))?;
        let header = std::str::from_utf8(&bytes[16..header_end])
            .map_err(|_| CheckpointError::BadHeader("header is not UTF-8".into()))?;
        let (config, digest) = parse_header(header)?;
        let mut model = HouseModel::zeros(config)?;
        let payload = &bytes[header_end..];
        let expected = 8 * model.num_parameters();
        if payload.len() < expected {
            return Err(CheckpointError::TruncatedPayload { expected, found: payload.len() });
        }
        if payload.len() > expected {
            return Err(CheckpointError::PayloadMismatch { expected, found: payload.len() });
        }
        let mut chunks = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
        for_each_segment_mut(&mut model, |values| {
            for v in values.iter_mut() {
                *v = chunks.next().expect("length checked");
            }
        });
        Ok(Self { model, vocab_digest: digest })
    }
}

fn parse_header(header: &str) -> Result<(ModelConfig, String)> {
    let mut fields = std::collections::HashMap::new();
    for line in header.lines().filter(|l| !l.is_empty()) {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CheckpointError::BadHeader(format!("line without '=': {line}")))?;
        fields.insert(k.trim(), v.trim());
    }
    let get = |key: &str| fields.get(key).copied().ok_or_else(|| CheckpointError::BadHeader(format!("missing {key}")));
    fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
        v.parse().map_err(|_| CheckpointError::BadHeader(format!("{key}={v} is not a valid number")))
    }
    let version: u32 = num("format_version", get("format_version")?)?;
    if version != FORMAT_VERSION {
        return Err(CheckpointError::VersionMismatch { found: version, expected: FORMAT_VERSION });
    }
    let variant: Variant = get("variant")?
        .parse()
        .map_err(|_| CheckpointError::BadHeader(format!("unknown variant {}", fields["variant"])))?;
    let k: usize = num("k", get("k")?)?;
    let n: usize = num("n", get("n")?)?;
    if n != k / 2 {
        return Err(CheckpointError::BadHeader(format!("n={n} inconsistent with k={k}")));
    }
    let config = ModelConfig::new(
        variant,
        num("d", get("d")?)?,
        k,
        num("m", get("m")?)?,
        num("num_entities", get("num_entities")?)?,
        num("num_relations", get("num_relations")?)?,
        num("seed", get("seed")?)?,
    )?
    .with_init_gamma(num("init_gamma", get("init_gamma")?)?);
    config.validate()?;
    Ok((config, get("vocab_digest")?.to_string()))
}

/// Visits parameter segments in file order.
fn for_each_segment(model: &HouseModel, mut f: impl FnMut(&[f64])) {
    f(model.entities.as_slice());
    for r in 0..model.config().num_relations {
        f(model.rotations.row(r));
        f(model.head_axes.row(r));
        f(model.head_taus.row(r));
        f(model.tail_axes.row(r));
        f(model.tail_taus.row(r));
        if model.config().variant.uses_translation() {
            f(model.translations.row(r));
        }
    }
}

fn for_each_segment_mut(model: &mut HouseModel, mut f: impl FnMut(&mut [f64])) {
    f(model.entities.as_mut_slice());
    let translate = model.config().variant.uses_translation();
    for r in 0..model.config().num_relations {
        f(model.rotations.row_mut(r));
        f(model.head_axes.row_mut(r));
        f(model.head_taus.row_mut(r));
        f(model.tail_axes.row_mut(r));
        f(model.tail_taus.row_mut(r));
        if translate {
            f(model.translations.row_mut(r));
        }
    }
}

pub fn save_checkpoint(checkpoint: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, checkpoint.to_bytes()).map_err(|source| CheckpointError::Io { path: path.to_path_buf(), source })
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| CheckpointError::Io { path: path.to_path_buf(), source })?;
    Checkpoint::from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_parameters;

    fn sample(variant: Variant) -> Checkpoint {
        let cfg = ModelConfig::new(variant, 3, 5, 2, 7, 3, 42).unwrap().with_init_gamma(9.5);
        let mut model = init_parameters(&cfg).unwrap();
        model.translations.as_mut_slice().iter_mut().enumerate().for_each(|(i, v)| *v = i as f64 * 0.1);
        Checkpoint::new(model, "abc123")
    }

    fn bits(m: &HouseModel) -> Vec<u64> {
        let mut out = Vec::new();
        for_each_segment(m, |v| out.extend(v.iter().map(|x| x.to_bits())));
        out
    }

    #[test]
    fn round_trip_is_bitwise() {
        for variant in Variant::ALL {
            let c = sample(variant);
            let back = Checkpoint::from_bytes(&c.to_bytes()).unwrap();
            assert_eq!(bits(&back.model), bits(&c.model));
            assert_eq!(back.model.config(), c.model.config());
            assert_eq!(back.vocab_digest, "abc123");
        }
    }

    #[test]
    fn tampered_headers_fail() {
        let bytes = sample(Variant::House).to_bytes();
        let text = String::from_utf8_lossy(&bytes[16..]).to_string();
        let swap = |from: &str, to: &str| {
            assert_eq!(from.len(), to.len());
            let mut b = bytes.clone();
            let pos = 16 + text.find(from).unwrap();
            b[pos..pos + from.len()].copy_from_slice(to.as_bytes());
            Checkpoint::from_bytes(&b)
        };
        assert!(matches!(swap("\nd=3", "\nd=4"), Err(CheckpointError::TruncatedPayload { .. })));
        assert!(matches!(swap("\nd=3", "\nd=2"), Err(CheckpointError::PayloadMismatch { .. })));
        assert!(matches!(swap("format_version=1", "format_version=2"), Err(CheckpointError::VersionMismatch { .. })));
        assert!(matches!(swap("\nn=2", "\nn=3"), Err(CheckpointError::BadHeader(_))));
        assert!(matches!(Checkpoint::from_bytes(b"HOUSEKG2........"), Err(CheckpointError::BadMagic)));
        assert!(matches!(
            Checkpoint::from_bytes(&bytes[..bytes.len() - 3]),
            Err(CheckpointError::TruncatedPayload { .. })
        ));
    }

    #[test]
    fn verify_checks_variant_and_digest() {
        let c = sample(Variant::HouseR);
        assert!(matches!(c.verify(Some(Variant::House), "abc123", false), Err(CheckpointError::VariantMismatch { .. })));
        assert!(c.verify(Some(Variant::HouseR), "other", false).is_ok());
        assert!(matches!(c.verify(None, "other", true), Err(CheckpointError::DigestMismatch { .. })));
    }

    #[test]
    fn files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let c = sample(Variant::HousePlus);
        save_checkpoint(&c, &path).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap(), c);
        assert!(matches!(load_checkpoint(dir.path().join("missing")), Err(CheckpointError::Io { .. })));
    }
}
