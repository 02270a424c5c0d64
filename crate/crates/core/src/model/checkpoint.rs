//! Checkpoint container: 8-byte magic `WASACKPT`, u32 version, u64 header
//! length, a JSON header with the config and tensor manifest, raw
//! little-endian f32 payloads in manifest order, and a trailing CRC32 of the
//! payload.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{tensor_manifest, ModelConfig, Parameters, WasaModel};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"WASACKPT";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    dtype: String,
    byte_offset: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    tensors: Vec<TensorEntry>,
}

impl WasaModel<f32> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let manifest = tensor_manifest(&self.config);
        let tensors = self.params.tensors();

        let mut entries = Vec::with_capacity(manifest.len());
        let mut payload: Vec<u8> = Vec::new();
        for ((name, shape), data) in manifest.into_iter().zip(&tensors) {
            entries.push(TensorEntry {
                name,
                shape,
                dtype: "f32".to_string(),
                byte_offset: payload.len(),
            });
            for v in data.iter() {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
        let header = serde_json::to_vec(&Header {
            config: self.config.clone(),
            tensors: entries,
        })
        .expect("header serialization");

        let mut out = Vec::with_capacity(24 + header.len() + payload.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&payload);
        out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(Error::io(path))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<WasaModel<f32>> {
        let fail = |detail: &str| Error::format("checkpoint", detail.to_string());
        if bytes.len() < 20 || &bytes[..8] != MAGIC {
            return Err(fail("missing WASACKPT magic"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != VERSION {
            return Err(Error::FormatVersionMismatch {
                found: version,
                expected: VERSION,
            });
        }
        let header_len = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
        let header_end = 20 + header_len;
        if bytes.len() < header_end + 4 {
            return Err(fail("truncated header"));
        }
        let header: Header = serde_json::from_slice(&bytes[20..header_end])
            .map_err(|e| Error::format("checkpoint", format!("header: {e}")))?;
        header.config.validate()?;

        let payload = &bytes[header_end..bytes.len() - 4];
        let stored_crc = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
        if crc32fast::hash(payload) != stored_crc {
            return Err(Error::ChecksumMismatch);
        }

        let manifest = tensor_manifest(&header.config);
        if manifest.len() != header.tensors.len() {
            return Err(fail("tensor count does not match config"));
        }
        let mut params = Parameters::<f32>::zeros(&header.config);
        {
            let mut slots = params.tensors_mut();
            for (i, ((name, shape), entry)) in manifest.iter().zip(&header.tensors).enumerate() {
                if entry.name != *name || entry.shape != *shape {
                    return Err(fail(&format!("tensor {i} is `{}`, expected `{name}`", entry.name)));
                }
                if entry.dtype != "f32" {
                    return Err(fail(&format!("tensor `{name}` has dtype {}", entry.dtype)));
                }
                let numel: usize = shape.iter().product();
                let start = entry.byte_offset;
                let end = start + numel * 4;
                if end > payload.len() {
                    return Err(fail(&format!("tensor `{name}` overruns the payload")));
                }
                for (j, chunk) in payload[start..end].chunks_exact(4).enumerate() {
                    slots[i][j] = f32::from_le_bytes(chunk.try_into().unwrap());
                }
            }
        }
        Ok(WasaModel {
            config: header.config,
            params,
        })
    }

    pub fn load(path: &Path) -> Result<WasaModel<f32>> {
        let bytes = fs::read(path).map_err(Error::io(path))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> WasaModel<f32> {
        WasaModel::init(ModelConfig {
            vocab_words: 9,
            vocab_watermarks: 6,
            embed: 8,
            layers: 2,
            heads: 2,
            block_size: 16,
            frozen_layers: 1,
            seed: 101,
        })
        .unwrap()
    }

    #[test]
    fn roundtrip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.wasa");
        let m = model();
        m.save(&path).unwrap();
        let loaded = WasaModel::<f32>::load(&path).unwrap();
        assert_eq!(loaded.config, m.config);
        assert_eq!(loaded.params, m.params);
        // byte-identical re-serialization
        assert_eq!(loaded.to_bytes(), m.to_bytes());
    }

    #[test]
    fn corrupted_payload_fails_checksum() {
        let m = model();
        let mut bytes = m.to_bytes();
        let flip = bytes.len() - 100;
        bytes[flip] ^= 0x40;
        assert!(matches!(
            WasaModel::<f32>::from_bytes(&bytes),
            Err(Error::ChecksumMismatch)
        ));
    }

    #[test]
    fn version_mismatch_is_reported() {
        let m = model();
        let mut bytes = m.to_bytes();
        bytes[8] = 9;
        assert!(matches!(
            WasaModel::<f32>::from_bytes(&bytes),
            Err(Error::FormatVersionMismatch { found: 9, expected: 1 })
        ));
    }

    #[test]
    fn bad_magic_is_reported() {
        let m = model();
        let mut bytes = m.to_bytes();
        bytes[0] = b'X';
        assert!(WasaModel::<f32>::from_bytes(&bytes).is_err());
    }
}
