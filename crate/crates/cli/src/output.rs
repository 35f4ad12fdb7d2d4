//! File emission: everything goes through a temp-file-then-rename so a
//! failing run never leaves a partial output behind.

use std::fs;
use std::path::{Path, PathBuf};

use crate::CmdError;

/// Writes `bytes` to `dir/name` atomically, creating `dir` if needed.
/// Returns the final path.
pub fn atomic_write(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, CmdError> {
    fs::create_dir_all(dir)
        .map_err(|e| CmdError::runtime(format!("cannot create {}: {e}", dir.display())))?;
    let final_path = dir.join(name);
    let tmp_path = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp_path, bytes)
        .map_err(|e| CmdError::runtime(format!("cannot write {}: {e}", tmp_path.display())))?;
    fs::rename(&tmp_path, &final_path).map_err(|e| {
        let _ = fs::remove_file(&tmp_path);
        CmdError::runtime(format!("cannot finalize {}: {e}", final_path.display()))
    })?;
    Ok(final_path)
}
