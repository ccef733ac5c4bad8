//! Single-file container shared by datasets, checkpoints and statistics.
//!
//! Layout: the 5 magic bytes `SSTB1`, a little-endian `u64` header length,
//! a UTF-8 JSON header, then a raw little-endian `f64` payload whose length
//! (in values) is recorded in the header as `payload_len`.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

pub const MAGIC: &[u8; 5] = b"SSTB1";
pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Error)]
pub enum ContainerError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not an SSTB1 container (magic bytes {0:?})")]
    Magic(Vec<u8>),
    #[error("malformed header: {0}")]
    Header(String),
    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u64, expected: u64 },
    #[error("container kind is {found:?}, expected {expected:?}")]
    Kind { found: String, expected: String },
    #[error("length mismatch: {0}")]
    Length(String),
}

/// Serializes `header` (which must be a JSON object) and `payload`.
///
/// `format_version`, `kind`, `dtype`, `endianness` and `payload_len` are
/// inserted into the header object.
pub fn encode<H: Serialize>(kind: &str, header: &H, payload: &[f64]) -> Result<Vec<u8>, ContainerError> {
    let mut value = serde_json::to_value(header).map_err(|e| ContainerError::Header(e.to_string()))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| ContainerError::Header("header must be a JSON object".into()))?;
    obj.insert("format_version".into(), FORMAT_VERSION.into());
    obj.insert("kind".into(), kind.into());
    obj.insert("dtype".into(), "f64".into());
    obj.insert("endianness".into(), "little".into());
    obj.insert("payload_len".into(), (payload.len() as u64).into());
    let json = serde_json::to_vec(&value).map_err(|e| ContainerError::Header(e.to_string()))?;

    let mut out = Vec::with_capacity(MAGIC.len() + 8 + json.len() + 8 * payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for v in payload {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode<H: DeserializeOwned>(kind: &str, bytes: &[u8]) -> Result<(H, Vec<f64>), ContainerError> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(ContainerError::Magic(bytes.iter().take(MAGIC.len()).copied().collect()));
    }
    let rest = &bytes[MAGIC.len()..];
    if rest.len() < 8 {
        return Err(ContainerError::Length("file ends inside the header length".into()));
    }
    let header_len = u64::from_le_bytes(rest[..8].try_into().expect("8 bytes")) as usize;
    let rest = &rest[8..];
    if rest.len() < header_len {
        return Err(ContainerError::Length(format!(
            "header declares {header_len} bytes but only {} remain",
            rest.len()
        )));
    }
    let value: Value =
        serde_json::from_slice(&rest[..header_len]).map_err(|e| ContainerError::Header(e.to_string()))?;
    let obj = value.as_object().ok_or_else(|| ContainerError::Header("header is not an object".into()))?;

    let version = obj
        .get("format_version")
        .and_then(Value::as_u64)
        .ok_or_else(|| ContainerError::Header("missing format_version".into()))?;
    if version != FORMAT_VERSION {
        return Err(ContainerError::Version { found: version, expected: FORMAT_VERSION });
    }
    let found_kind = obj.get("kind").and_then(Value::as_str).unwrap_or("");
    if found_kind != kind {
        return Err(ContainerError::Kind { found: found_kind.into(), expected: kind.into() });
    }
    if obj.get("dtype").and_then(Value::as_str) != Some("f64")
        || obj.get("endianness").and_then(Value::as_str) != Some("little")
    {
        return Err(ContainerError::Header("only little-endian f64 payloads are supported".into()));
    }
    let payload_len = obj
        .get("payload_len")
        .and_then(Value::as_u64)
        .ok_or_else(|| ContainerError::Header("missing payload_len".into()))? as usize;

    let raw = &rest[header_len..];
    if raw.len() != payload_len * 8 {
        return Err(ContainerError::Length(format!(
            "payload holds {} bytes, header declares {} values ({} bytes)",
            raw.len(),
            payload_len,
            payload_len * 8
        )));
    }
    let payload = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();

    let mut stripped = value.clone();
    if let Some(o) = stripped.as_object_mut() {
        for key in ["format_version", "kind", "dtype", "endianness", "payload_len"] {
            o.remove(key);
        }
    }
    let header = serde_json::from_value(stripped).map_err(|e| ContainerError::Header(e.to_string()))?;
    Ok((header, payload))
}

pub fn write_file<H: Serialize>(path: &Path, kind: &str, header: &H, payload: &[f64]) -> Result<(), ContainerError> {
    let bytes = encode(kind, header, payload)?;
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    f.flush()?;
    Ok(())
}

pub fn read_file<H: DeserializeOwned>(path: &Path, kind: &str) -> Result<(H, Vec<f64>), ContainerError> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(kind, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Meta {
        name: String,
        n: usize,
    }

    #[test]
    fn roundtrip_and_guards() {
        let meta = Meta { name: "x".into(), n: 3 };
        let payload = [1.0, -2.5, f64::MIN_POSITIVE];
        let bytes = encode("test", &meta, &payload).unwrap();
        let (m, p): (Meta, Vec<f64>) = decode("test", &bytes).unwrap();
        assert_eq!(m, meta);
        assert_eq!(p, payload);

        assert!(matches!(decode::<Meta>("test", &bytes[..bytes.len() - 3]), Err(ContainerError::Length(_))));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode::<Meta>("test", &bad), Err(ContainerError::Magic(_))));
        assert!(matches!(decode::<Meta>("other", &bytes), Err(ContainerError::Kind { .. })));
    }

    #[test]
    fn version_mismatch() {
        let text = br#"{"format_version":2,"kind":"test","dtype":"f64","endianness":"little","payload_len":0,"name":"x","n":1}"#;
        let mut bytes = MAGIC.to_vec();
        bytes.extend_from_slice(&(text.len() as u64).to_le_bytes());
        bytes.extend_from_slice(text);
        assert!(matches!(decode::<Meta>("test", &bytes), Err(ContainerError::Version { found: 2, .. })));
    }
}
