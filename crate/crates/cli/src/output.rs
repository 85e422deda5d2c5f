//! Output staging: files are rendered in memory, then written to temporary
//! files and renamed into place only once every file of a run is ready.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use tempfile::NamedTempFile;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub struct Bundle {
    config_hash: String,
    files: Vec<(String, Vec<u8>)>,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    tool_version: &'a str,
    config_hash: &'a str,
    kind: &'a str,
    data: &'a T,
}

impl Bundle {
    pub fn new(config_hash: String) -> Self {
        Bundle {
            config_hash,
            files: Vec::new(),
        }
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    pub fn raw(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    /// JSON wrapped with the tool version and config hash.
    pub fn json<T: Serialize>(&mut self, name: &str, kind: &str, data: &T) -> std::io::Result<()> {
        let env = Envelope {
            tool_version: VERSION,
            config_hash: &self.config_hash,
            kind,
            data,
        };
        let mut s = serde_json::to_string_pretty(&env)?;
        s.push('\n');
        self.raw(name, s.into_bytes());
        Ok(())
    }

    /// CSV with `#` comment lines carrying the version and config hash.
    pub fn csv<R, I>(&mut self, name: &str, header: &[&str], rows: R) -> std::io::Result<()>
    where
        R: IntoIterator<Item = I>,
        I: IntoIterator<Item = String>,
    {
        let mut buf =
            format!("# metarelay {VERSION}\n# config {}\n", self.config_hash).into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(header)?;
            for r in rows {
                w.write_record(r)?;
            }
            w.flush()?;
        }
        self.raw(name, buf);
        Ok(())
    }

    /// Writes every staged file to `dir`. Nothing is renamed into place
    /// until all temporaries have been written.
    pub fn commit(self, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut staged = Vec::with_capacity(self.files.len());
        for (name, bytes) in &self.files {
            let mut tmp = NamedTempFile::new_in(dir)?;
            tmp.write_all(bytes)?;
            tmp.as_file().sync_all()?;
            staged.push((tmp, dir.join(name)));
        }
        let mut out = Vec::with_capacity(staged.len());
        for (tmp, path) in staged {
            tmp.persist(&path).map_err(|e| e.error)?;
            out.push(path);
        }
        Ok(out)
    }
}

/// Float for CSV cells; infinities spelled out.
pub fn num(x: f64) -> String {
    if x == f64::NEG_INFINITY {
        "-inf".into()
    } else if x == f64::INFINITY {
        "inf".into()
    } else {
        x.to_string()
    }
}
