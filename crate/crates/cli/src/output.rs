use crate::failure::{CmdResult, Failure};
use serde::Serialize;
use std::path::{Path, PathBuf};

pub struct Outputs {
    pub dir: PathBuf,
}

impl Outputs {
    pub fn new(dir: PathBuf) -> CmdResult<Self> {
        std::fs::create_dir_all(&dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir })
    }

    pub fn path(&self, name: Option<&str>, default: &str) -> PathBuf {
        self.dir.join(name.unwrap_or(default))
    }
}

/// Fixed 17-significant-digit scientific notation; non-finite values as `nan`, `inf`, `-inf`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CmdResult {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}
