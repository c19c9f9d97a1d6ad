//! Binary checkpoint container.
//!
//! Layout: magic `HETQAGNN`, `u32` format version, `u32` header length, a
//! JSON header (config, vocabulary, tensor names and shapes), then every
//! parameter as a little-endian `f64` in storage order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::GnnModel;
use super::params::GnnParameters;
use super::vocab::Vocabulary;
use super::GnnConfig;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"HETQAGNN";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    config: GnnConfig,
    vocabulary: Vec<String>,
    tensors: Vec<TensorHeader>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorHeader {
    name: String,
    shape: Vec<usize>,
}

pub fn checkpoint_bytes(model: &GnnModel) -> Result<Vec<u8>> {
    let header = Header {
        config: model.config.clone(),
        vocabulary: model.vocab.tokens().to_vec(),
        tensors: model
            .params
            .tensor_specs()
            .into_iter()
            .map(|s| TensorHeader {
                name: s.name,
                shape: s.shape,
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(16 + json.len() + 8 * model.params.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for v in model.params.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn save_checkpoint(model: &GnnModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, checkpoint_bytes(model)?)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<GnnModel> {
    checkpoint_from_bytes(&fs::read(path)?)
}

fn take<'a>(bytes: &mut &'a [u8], n: usize, what: &str) -> Result<&'a [u8]> {
    if bytes.len() < n {
        return Err(Error::Checkpoint(format!(
            "truncated file while reading {what}"
        )));
    }
    let (head, rest) = bytes.split_at(n);
    *bytes = rest;
    Ok(head)
}

fn read_u32(bytes: &mut &[u8], what: &str) -> Result<u32> {
    Ok(u32::from_le_bytes(
        take(bytes, 4, what)?.try_into().unwrap(),
    ))
}

pub fn checkpoint_from_bytes(mut bytes: &[u8]) -> Result<GnnModel> {
    let b = &mut bytes;
    if take(b, MAGIC.len(), "magic")? != MAGIC {
        return Err(Error::Checkpoint(
            "not a checkpoint file (bad magic)".into(),
        ));
    }
    let version = read_u32(b, "version")?;
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let header_len = read_u32(b, "header length")? as usize;
    let header: Header = serde_json::from_slice(take(b, header_len, "header")?)
        .map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
    header.config.validate()?;
    let vocab = Vocabulary::from_stored(header.vocabulary)
        .ok_or_else(|| Error::Checkpoint("bad vocabulary".into()))?;

    let expected =
        GnnParameters::zeros(header.config.dim, header.config.layers, vocab.len()).tensor_specs();
    if expected.len() != header.tensors.len() {
        return Err(Error::Checkpoint(format!(
            "expected {} tensors, found {}",
            expected.len(),
            header.tensors.len()
        )));
    }
    for (e, f) in expected.iter().zip(&header.tensors) {
        if e.name != f.name {
            return Err(Error::Checkpoint(format!(
                "expected tensor {}, found {}",
                e.name, f.name
            )));
        }
        if e.shape != f.shape {
            return Err(Error::Shape {
                tensor: e.name.clone(),
                expected: e.shape.clone(),
                found: f.shape.clone(),
            });
        }
    }
    let n: usize = expected.iter().map(|s| s.len()).sum();
    let raw = take(b, 8 * n, "parameters")?;
    if !b.is_empty() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", b.len())));
    }
    let data = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let params =
        GnnParameters::from_raw(header.config.dim, header.config.layers, vocab.len(), data)
            .expect("length checked against specs");
    GnnModel::from_parts(header.config, vocab, params)
}

/// Loads a checkpoint and requires its dimension and depth to match `config`.
pub fn load_checkpoint_for(path: impl AsRef<Path>, config: &GnnConfig) -> Result<GnnModel> {
    let m = load_checkpoint(path)?;
    if m.config.dim != config.dim || m.config.layers != config.layers {
        let d = m.config.dim;
        return Err(Error::Shape {
            tensor: "embeddings".into(),
            expected: vec![m.vocab.len(), config.dim],
            found: vec![m.vocab.len(), d],
        });
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> GnnModel {
        let cfg = GnnConfig {
            dim: 4,
            layers: 2,
            seed: 11,
            ..GnnConfig::pruning()
        };
        GnnModel::new(cfg, Vocabulary::build(["who wrote inferno"])).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&m, &path).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back, m);
        assert!(back
            .params
            .as_slice()
            .iter()
            .zip(m.params.as_slice())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn truncated_and_corrupt_files_error() {
        let bytes = checkpoint_bytes(&model()).unwrap();
        for cut in [0, 5, 12, 20, bytes.len() - 1] {
            assert!(
                matches!(
                    checkpoint_from_bytes(&bytes[..cut]),
                    Err(Error::Checkpoint(_))
                ),
                "cut {cut}"
            );
        }
        let mut bad = bytes.clone();
        bad[8] = 9;
        let err = checkpoint_from_bytes(&bad).unwrap_err();
        assert!(err.to_string().contains("version 9"));
    }

    #[test]
    fn mismatched_dimension_is_a_shape_error() {
        let m = model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&m, &path).unwrap();
        let want = GnnConfig {
            dim: 8,
            ..m.config.clone()
        };
        assert!(matches!(
            load_checkpoint_for(&path, &want),
            Err(Error::Shape { .. })
        ));

        // header claims a shape the config disagrees with
        let bytes = checkpoint_bytes(&m).unwrap();
        let hlen = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        let header = std::str::from_utf8(&bytes[16..16 + hlen]).unwrap();
        let edited = header.replacen("\"shape\":[4,4]", "\"shape\":[4,5]", 1);
        let mut out = bytes[..12].to_vec();
        out.extend_from_slice(&(edited.len() as u32).to_le_bytes());
        out.extend_from_slice(edited.as_bytes());
        out.extend_from_slice(&bytes[16 + hlen..]);
        assert!(matches!(
            checkpoint_from_bytes(&out),
            Err(Error::Shape { .. })
        ));
    }
}
