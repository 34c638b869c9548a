use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use serde::Serialize;

/// Output directory that remembers what was written into it.
pub struct Artifacts {
    dir: PathBuf,
    files: Vec<String>,
    timings: Vec<(String, f64)>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'a str,
    command: &'a str,
    seed: u64,
    atoms: &'a str,
    config: &'a str,
    artifacts: &'a [String],
    /// Wall-clock seconds per phase.
    timings: Vec<Timing<'a>>,
}

#[derive(Serialize)]
struct Timing<'a> {
    phase: &'a str,
    seconds: f64,
}

impl Artifacts {
    pub fn new(dir: &Path) -> anyhow::Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Artifacts { dir: dir.to_path_buf(), files: Vec::new(), timings: Vec::new() })
    }

    pub fn write<F>(&mut self, name: &str, f: F) -> anyhow::Result<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> anyhow::Result<()>,
    {
        let path = self.dir.join(name);
        let mut out = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        f(&mut out)?;
        out.flush()?;
        if !self.files.iter().any(|n| n == name) {
            self.files.push(name.to_string());
        }
        Ok(())
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> anyhow::Result<()> {
        self.write(name, |out| {
            serde_json::to_writer_pretty(&mut *out, value)?;
            out.write_all(b"\n")?;
            Ok(())
        })
    }

    pub fn time<R>(&mut self, phase: &str, f: impl FnOnce(&mut Self) -> R) -> R {
        let start = Instant::now();
        let r = f(self);
        self.timings.push((phase.to_string(), start.elapsed().as_secs_f64()));
        r
    }

    /// Writes `manifest.json`; the only output that is not reproducible, as it
    /// records wall-clock time.
    pub fn finish(mut self, command: &str, seed: u64, atoms: &str, config: &str) -> anyhow::Result<()> {
        let files = std::mem::take(&mut self.files);
        let timings = self.timings.iter().map(|(p, s)| Timing { phase: p, seconds: *s }).collect();
        let manifest = Manifest {
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed,
            atoms,
            config,
            artifacts: &files,
            timings,
        };
        let path = self.dir.join("manifest.json");
        let mut out = BufWriter::new(File::create(&path)?);
        serde_json::to_writer_pretty(&mut out, &manifest)?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(())
    }
}
