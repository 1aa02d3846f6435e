use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::CliError;

/// Fails with an I/O error unless `path` could be created: its directory
/// must exist.
pub fn check_target(path: &Path) -> Result<(), CliError> {
    let dir = parent_dir(path);
    if dir.is_dir() {
        Ok(())
    } else {
        Err(CliError::Io(format!(
            "cannot write {}: directory {} does not exist",
            path.display(),
            dir.display()
        )))
    }
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("cannot write {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(parent_dir(path)).map_err(io)?;
    tmp.write_all(contents).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// Writes to `path`, or to stdout when absent.
pub fn emit(path: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match path {
        Some(p) => write_atomic(p, contents.as_bytes()),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(contents.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::Io(format!("cannot write to stdout: {e}")))
        }
    }
}

pub fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("results serialize to JSON");
    s.push('\n');
    s
}
