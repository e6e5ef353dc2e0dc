//! File formats: OBJ meshes, TUM trajectories, and the CSV tables the
//! pipeline ingests and emits.
//!
//! Parsers take full input strings and report failures with 1-based line
//! numbers; `load_*` variants read from disk. Writing goes through
//! [`write_atomic`] so partially written files never land at the target
//! path.

pub mod obj;
pub mod tables;
pub mod tum;

use std::io::Write;
use std::path::Path;

use crate::error::Result;

/// Writes via a temporary file in the target directory plus an atomic
/// rename, so readers never observe a half-written file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested").join("out.json");
        write_atomic(&path, b"first").unwrap();
        write_atomic(&path, b"second").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"second");
    }
}
