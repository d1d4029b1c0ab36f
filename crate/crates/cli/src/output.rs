//! Atomic file output and checksums.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Writes `bytes` to `dir/name` through a temporary file and a rename, so
/// readers never see a partial file.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
    let target = dir.join(name);
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(&target, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(&target, e))?;
    tmp.persist(&target).map_err(|e| CliError::io(&target, e.error))?;
    Ok(target)
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> CliResult<PathBuf> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    text.push('\n');
    write_atomic(dir, name, text.as_bytes())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// CSV rendered into memory by one of the `ringmod::io` writers.
pub fn render_csv(
    what: &str,
    f: impl FnOnce(&mut Vec<u8>) -> ringmod::io::DataResult<()>,
) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| CliError::Internal(format!("{what}: {e}")))?;
    Ok(buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_known_input() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn atomic_write_replaces_and_leaves_no_temporaries() {
        let d = tempfile::tempdir().unwrap();
        write_atomic(d.path(), "f.txt", b"one").unwrap();
        let p = write_json(d.path(), "f.txt", &[1, 2]).unwrap();
        assert_eq!(fs::read_to_string(p).unwrap(), "[\n  1,\n  2\n]\n");
        assert_eq!(fs::read_dir(d.path()).unwrap().count(), 1);
    }
}
