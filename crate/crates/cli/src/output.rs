//! Atomic report writing.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::CliError;

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Write via a temp file in the target directory, then rename into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(dir, e))?;
    tmp.write_all(bytes).map_err(|e| io_err(path, e))?;
    tmp.as_file().sync_all().map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

pub fn json_bytes<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    let mut s = simlab::json::to_string(value);
    s.push('\n');
    s.into_bytes()
}

/// JSON report to `out`, or stdout.
pub fn emit_json<T: Serialize + ?Sized>(value: &T, out: Option<&Path>) -> Result<(), CliError> {
    let bytes = json_bytes(value);
    match out {
        Some(p) => write_atomic(p, &bytes),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(&bytes)
                .map_err(|e| CliError::Io(format!("stdout: {e}")))
        }
    }
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    if dir.exists() && !dir.is_dir() {
        return Err(CliError::Io(format!("{} is not a directory", dir.display())));
    }
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}
