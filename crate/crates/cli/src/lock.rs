//! One pipeline run per store directory, enforced by an exclusive lock file.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::warn;

pub const LOCK_FILE: &str = ".kgforge.lock";

#[derive(Debug)]
pub struct StoreLock {
    path: PathBuf,
}

fn holder_alive(pid: u32) -> bool {
    if cfg!(target_os = "linux") {
        Path::new(&format!("/proc/{pid}")).exists()
    } else {
        true
    }
}

impl StoreLock {
    /// Creates the lock file, replacing it only if the process that wrote
    /// it is gone.
    pub fn acquire(store_dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(store_dir).with_context(|| format!("creating {}", store_dir.display()))?;
        let path = store_dir.join(LOCK_FILE);
        for _ in 0..2 {
            match OpenOptions::new().write(true).create_new(true).open(&path) {
                Ok(mut f) => {
                    writeln!(f, "{}", std::process::id()).with_context(|| format!("writing {}", path.display()))?;
                    return Ok(StoreLock { path });
                }
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                    let holder = std::fs::read_to_string(&path).unwrap_or_default();
                    match holder.trim().parse::<u32>() {
                        Ok(pid) if pid != std::process::id() && !holder_alive(pid) => {
                            warn!("removing stale lock {} left by process {pid}", path.display());
                            let _ = std::fs::remove_file(&path);
                        }
                        _ => bail!(
                            "store {} is locked by process {} (remove {} if that run is dead)",
                            store_dir.display(),
                            holder.trim(),
                            path.display()
                        ),
                    }
                }
                Err(e) => return Err(e).with_context(|| format!("creating {}", path.display())),
            }
        }
        bail!("could not acquire {}", path.display())
    }
}

impl Drop for StoreLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}
