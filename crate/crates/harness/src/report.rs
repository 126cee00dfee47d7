//! File emission. Every artifact lands in one output directory; names carry
//! the experiment, dataset, seed and method.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{HarnessError, Result};

pub struct Emitter {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Emitter {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
        Ok(Self {
            dir,
            written: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Paths written so far, in emission order.
    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    pub fn text(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|e| HarnessError::io(&path, e))?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.text(name, &text)
    }

    pub fn csv<R: AsRef<[String]>>(&mut self, name: &str, header: &[&str], rows: &[R]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        let io_err = |e: csv::Error| {
            let source = match e.into_kind() {
                csv::ErrorKind::Io(io) => io,
                other => std::io::Error::other(format!("{other:?}")),
            };
            HarnessError::io(&path, source)
        };
        let mut w = csv::Writer::from_path(&path).map_err(io_err)?;
        w.write_record(header).map_err(io_err)?;
        for row in rows {
            w.write_record(row.as_ref()).map_err(io_err)?;
        }
        w.flush().map_err(|e| HarnessError::io(&path, e))?;
        self.written.push(path.clone());
        Ok(path)
    }
}

/// Shortest round-trip decimal, stable across runs.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// `seed0`, or `seeds0-9` for a contiguous range, else `seeds0_3_7`.
pub fn seed_tag(seeds: &[u64]) -> String {
    match seeds {
        [s] => format!("seed{s}"),
        [first, .., last] if seeds.windows(2).all(|w| w[1] == w[0] + 1) => format!("seeds{first}-{last}"),
        _ => {
            let parts: Vec<String> = seeds.iter().map(u64::to_string).collect();
            format!("seeds{}", parts.join("_"))
        }
    }
}
