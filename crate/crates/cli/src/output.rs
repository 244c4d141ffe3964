//! Atomic artifact writing with provenance sidecars.
//!
//! Every artifact is written to a temporary file next to its destination and
//! only renamed into place once the whole subcommand has succeeded. A failed
//! run therefore leaves no partial outputs behind.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use recfair_core::{Result, VERSION};
use serde::Serialize;
use tempfile::NamedTempFile;

use crate::config::Seeds;

/// Sidecar written next to every artifact as `<name>.meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seeds: Seeds,
}

impl Meta {
    pub fn new(command: &str, seeds: Seeds) -> Meta {
        Meta {
            tool: "recfair",
            version: VERSION,
            command: command.to_string(),
            seeds,
        }
    }
}

pub fn meta_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    path.with_file_name(name)
}

/// Artifacts staged by one subcommand.
pub struct Staged {
    meta: Meta,
    files: Vec<(NamedTempFile, PathBuf)>,
}

impl Staged {
    pub fn new(meta: Meta) -> Staged {
        Staged { meta, files: Vec::new() }
    }

    /// Stage `path`, filling it through `fill`.
    pub fn write<F>(&mut self, path: &Path, fill: F) -> Result<()>
    where
        F: FnOnce(&mut BufWriter<&mut fs::File>) -> Result<()>,
    {
        let dir = match path.parent() {
            Some(d) if !d.as_os_str().is_empty() => d,
            _ => Path::new("."),
        };
        fs::create_dir_all(dir)?;
        let mut tmp = NamedTempFile::new_in(dir)?;
        {
            let mut w = BufWriter::new(tmp.as_file_mut());
            fill(&mut w)?;
            w.flush()?;
        }
        self.files.push((tmp, path.to_path_buf()));
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, path: &Path, value: &T) -> Result<()> {
        self.write(path, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            w.write_all(b"\n")?;
            Ok(())
        })
    }

    /// Move every staged file into place with its sidecar. If any rename
    /// fails, files already moved are deleted again.
    pub fn commit(mut self) -> Result<Vec<PathBuf>> {
        let targets: Vec<PathBuf> = self.files.iter().map(|(_, p)| p.clone()).collect();
        let meta = self.meta.clone();
        for p in &targets {
            self.json(&meta_path(p), &meta)?;
        }
        let mut done: Vec<PathBuf> = Vec::new();
        for (tmp, dest) in self.files.drain(..) {
            if let Err(e) = tmp.persist(&dest) {
                for p in &done {
                    let _ = fs::remove_file(p);
                }
                return Err(e.error.into());
            }
            done.push(dest);
        }
        Ok(targets)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use recfair_core::Error;

    fn seeds() -> Seeds {
        Seeds::default()
    }

    #[test]
    fn commit_writes_files_and_sidecars() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/a.csv");
        let mut s = Staged::new(Meta::new("test", seeds()));
        s.write(&path, |w| Ok(w.write_all(b"x\n")?)).unwrap();
        assert!(!path.exists());
        s.commit().unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "x\n");
        let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(meta_path(&path)).unwrap()).unwrap();
        assert_eq!(meta["version"], VERSION);
        assert_eq!(meta["seeds"]["mcmc"], 3);
    }

    #[test]
    fn dropped_stage_leaves_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        {
            let mut s = Staged::new(Meta::new("test", seeds()));
            s.write(&path, |w| Ok(w.write_all(b"x")?)).unwrap();
            let r = s.write(&dir.path().join("b.csv"), |_| Err(Error::Domain("boom".into())));
            assert!(r.is_err());
        }
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    }
}
