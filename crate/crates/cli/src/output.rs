use std::fs::{self, OpenOptions};
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::Failure;

pub const LOCK_FILE: &str = ".quadsurf.lock";

/// An output directory held for the duration of one command.
pub struct OutDir {
    dir: PathBuf,
    lock: PathBuf,
    files: Vec<String>,
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

impl OutDir {
    pub fn open(dir: &Path) -> Result<Self, Failure> {
        fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
        let lock = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(_) => {}
            Err(e) if e.kind() == ErrorKind::AlreadyExists => {
                return Err(Failure::Io(format!(
                    "{} is in use by another run (remove {} if stale)",
                    dir.display(),
                    LOCK_FILE
                )))
            }
            Err(e) => return Err(io_failure(&lock, e)),
        }
        Ok(OutDir {
            dir: dir.to_path_buf(),
            lock,
            files: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<(), Failure> {
        let p = self.dir.join(name);
        fs::write(&p, contents).map_err(|e| io_failure(&p, e))?;
        self.record(name);
        Ok(())
    }

    /// Notes a file written into the directory by other means.
    pub fn record(&mut self, name: &str) {
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
    }

    /// Writes `manifest.json` listing every recorded file.
    pub fn finish(mut self, command: &str, parameters: Value) -> Result<(), Failure> {
        self.files.sort();
        let manifest = json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "parameters": parameters,
            "files": self.files,
        });
        let mut s = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        s.push('\n');
        let p = self.dir.join("manifest.json");
        fs::write(&p, s).map_err(|e| io_failure(&p, e))
    }
}

impl Drop for OutDir {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.lock);
    }
}
