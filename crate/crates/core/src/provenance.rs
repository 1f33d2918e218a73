//! Hashes that tie artifacts to the configuration and data that made them.

use std::io::Read;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// SHA-256 (hex) of the canonical JSON form of `value`.
///
/// Objects are serialised with sorted keys, so field order in the source
/// struct does not matter.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("config serialises");
    hex(&Sha256::digest(v.to_string().as_bytes()))
}

/// SHA-256 (hex) over the names and bytes of `files`, in the given order.
pub fn dataset_fingerprint(root: &Path, files: &[std::path::PathBuf]) -> std::io::Result<String> {
    let mut h = Sha256::new();
    let mut buf = Vec::new();
    for f in files {
        let name = f.strip_prefix(root).unwrap_or(f);
        h.update(name.to_string_lossy().as_bytes());
        h.update([0u8]);
        buf.clear();
        std::fs::File::open(f)?.read_to_end(&mut buf)?;
        h.update((buf.len() as u64).to_le_bytes());
        h.update(&buf);
    }
    Ok(hex(&h.finalize()))
}

pub fn bytes_hash(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
