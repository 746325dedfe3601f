//! Model checkpoints: magic "SHLDMDL1", a little-endian u32 byte count, a
//! JSON header (spec, lineage, train_quality, seed), then the raw
//! little-endian f64 parameter arrays in declaration order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Lineage, ModelParams, ModelSpec};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"SHLDMDL1";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    spec: ModelSpec,
    lineage: Lineage,
    train_quality: Option<u8>,
    seed: u64,
}

/// Serializes a model to checkpoint bytes. Byte-stable: the same params
/// always produce the same bytes.
pub fn checkpoint_to_bytes(p: &ModelParams) -> Result<Vec<u8>> {
    p.validate()?;
    let header = Header {
        spec: ModelSpec::canonical(),
        lineage: p.lineage,
        train_quality: p.train_quality,
        seed: p.train_seed,
    };
    let header_json = serde_json::to_vec(&header)
        .map_err(|e| Error::Internal(format!("checkpoint header failed to serialize: {e}")))?;
    let total: usize = p.all_arrays().iter().map(|a| a.len()).sum();
    let mut out = Vec::with_capacity(MAGIC.len() + 4 + header_json.len() + total * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
    out.extend_from_slice(&header_json);
    for array in p.all_arrays() {
        for v in array {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn checkpoint_from_bytes(bytes: &[u8], origin: &Path) -> Result<ModelParams> {
    let bad = |reason: &str| Error::malformed(origin, reason);
    if bytes.len() < MAGIC.len() + 4 {
        return Err(bad("file shorter than the checkpoint preamble"));
    }
    if &bytes[..MAGIC.len()] != MAGIC {
        return Err(bad("magic bytes are not SHLDMDL1"));
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let header_end = 12 + header_len;
    if bytes.len() < header_end {
        return Err(bad("file ends inside the header"));
    }
    let header: Header = serde_json::from_slice(&bytes[12..header_end])
        .map_err(|e| bad(&format!("header is not valid JSON: {e}")))?;
    // A structurally valid checkpoint for a different architecture is a
    // compatibility problem, not a corrupt file.
    if header.spec != ModelSpec::canonical() {
        return Err(Error::invalid(format!(
            "checkpoint {}: model spec does not match this build's architecture",
            origin.display()
        )));
    }

    let mut p = ModelParams::zeros();
    p.lineage = header.lineage;
    p.train_quality = header.train_quality;
    p.train_seed = header.seed;
    let mut offset = header_end;
    for array in p.all_arrays_mut() {
        for v in array.iter_mut() {
            let Some(raw) = bytes.get(offset..offset + 8) else {
                return Err(bad("file ends inside the parameter arrays"));
            };
            *v = f64::from_le_bytes(raw.try_into().unwrap());
            if !v.is_finite() {
                return Err(bad("parameter array contains a non-finite value"));
            }
            offset += 8;
        }
    }
    if offset != bytes.len() {
        return Err(bad("data continues past the parameter arrays"));
    }
    Ok(p)
}

pub fn save_checkpoint(p: &ModelParams, path: &Path) -> Result<()> {
    std::fs::write(path, checkpoint_to_bytes(p)?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_bytes(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_params() -> ModelParams {
        let mut p = ModelParams::he_init(42);
        p.lineage = Lineage::Derivative;
        p.train_quality = Some(40);
        p.train_seed = 42;
        p
    }

    #[test]
    fn round_trip_preserves_everything() {
        let p = sample_params();
        let bytes = checkpoint_to_bytes(&p).unwrap();
        let q = checkpoint_from_bytes(&bytes, Path::new("mem")).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn serialization_is_byte_stable() {
        let p = sample_params();
        assert_eq!(checkpoint_to_bytes(&p).unwrap(), checkpoint_to_bytes(&p).unwrap());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let p = sample_params();
        save_checkpoint(&p, &path).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap(), p);
    }

    #[test]
    fn rejects_bad_magic_and_truncations() {
        let good = checkpoint_to_bytes(&sample_params()).unwrap();

        let err = checkpoint_from_bytes(b"NOTMODEL", Path::new("x")).unwrap_err();
        assert!(matches!(err, Error::Malformed { .. }));

        let mut wrong_magic = good.clone();
        wrong_magic[0] = b'X';
        assert!(checkpoint_from_bytes(&wrong_magic, Path::new("x")).is_err());

        let cut_header = &good[..20];
        assert!(checkpoint_from_bytes(cut_header, Path::new("x")).is_err());

        let cut_arrays = &good[..good.len() - 8];
        assert!(checkpoint_from_bytes(cut_arrays, Path::new("x")).is_err());

        let mut trailing = good.clone();
        trailing.extend_from_slice(&[0u8; 8]);
        assert!(checkpoint_from_bytes(&trailing, Path::new("x")).is_err());
    }

    #[test]
    fn rejects_foreign_spec_and_bad_header() {
        let good = checkpoint_to_bytes(&sample_params()).unwrap();
        let header_len = u32::from_le_bytes(good[8..12].try_into().unwrap()) as usize;
        let json = std::str::from_utf8(&good[12..12 + header_len]).unwrap();

        let foreign = json.replace("\"classes\":10", "\"classes\":12");
        let mut bytes = good[..8].to_vec();
        bytes.extend_from_slice(&(foreign.len() as u32).to_le_bytes());
        bytes.extend_from_slice(foreign.as_bytes());
        bytes.extend_from_slice(&good[12 + header_len..]);
        let err = checkpoint_from_bytes(&bytes, Path::new("x")).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)), "{err:?}");
        assert!(err.to_string().contains("spec"), "{err}");

        let mut garbage = good[..12].to_vec();
        garbage.extend_from_slice(&good[13..]); // header JSON now corrupt
        assert!(checkpoint_from_bytes(&garbage, Path::new("x")).is_err());
    }

    #[test]
    fn rejects_non_finite_parameters() {
        let good = checkpoint_to_bytes(&sample_params()).unwrap();
        let mut bytes = good.clone();
        let tail = bytes.len() - 8;
        bytes[tail..].copy_from_slice(&f64::NAN.to_le_bytes());
        let err = checkpoint_from_bytes(&bytes, Path::new("x")).unwrap_err();
        assert!(err.to_string().contains("non-finite"), "{err}");
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_checkpoint(Path::new("/nonexistent/m.ckpt")).unwrap_err(),
            Error::Io { .. }
        ));
    }
}
