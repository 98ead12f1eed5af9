//! Atomic artifact writes and structured stderr logging.

use std::path::{Path, PathBuf};

use foehn_core::{Error, Result};

/// Log level gate, from the `FOEHN_LOG` env var (`error`, `warn`, `info`).
fn level_enabled(level: &str) -> bool {
    let configured = std::env::var("FOEHN_LOG").unwrap_or_else(|_| "info".into());
    let rank = |l: &str| match l {
        "error" => 0,
        "warn" => 1,
        _ => 2,
    };
    rank(level) <= rank(&configured)
}

pub fn log(level: &str, msg: &str) {
    if level_enabled(level) {
        eprintln!("level={level} msg={msg:?}");
    }
}

macro_rules! info {
    ($($arg:tt)*) => { crate::util::log("info", &format!($($arg)*)) };
}
pub(crate) use info;

fn tmp_sibling(path: &Path) -> Result<PathBuf> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::Io(std::io::Error::other(format!(
            "path {} has no file name",
            path.display()
        ))))?;
    Ok(path.with_file_name(format!(".{}.tmp", name.to_string_lossy())))
}

/// Writes `bytes` to `path` via a temp sibling + rename, so a failed run
/// never leaves a partial artifact behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let tmp = tmp_sibling(path)?;
    if let Err(e) = std::fs::write(&tmp, bytes) {
        let _ = std::fs::remove_file(&tmp);
        return Err(e.into());
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Builds an artifact in memory with `f`, then writes it atomically.
pub fn write_artifact<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut Vec<u8>) -> Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf)?;
    write_atomic(path, &buf)?;
    info!("wrote {}", path.display());
    Ok(())
}

/// Populates a directory artifact atomically: `f` fills a temp directory
/// that then replaces `dir` in one rename.
pub fn write_dir_atomic<F>(dir: &Path, f: F) -> Result<()>
where
    F: FnOnce(&Path) -> Result<()>,
{
    let tmp = tmp_sibling(dir)?;
    let _ = std::fs::remove_dir_all(&tmp);
    std::fs::create_dir_all(&tmp)?;
    if let Err(e) = f(&tmp) {
        let _ = std::fs::remove_dir_all(&tmp);
        return Err(e);
    }
    let _ = std::fs::remove_dir_all(dir);
    std::fs::rename(&tmp, dir)?;
    info!("wrote {}", dir.display());
    Ok(())
}
