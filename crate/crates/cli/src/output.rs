use std::path::{Path, PathBuf};

use episcale::io::ExperimentConfig;
use serde::Serialize;

use crate::{Classify, Failure};

/// The output directory of one command and the files written into it.
pub struct Output {
    dir: PathBuf,
    files: Vec<String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    /// Arguments after the program name.
    args: &'a [String],
    jobs: Option<usize>,
    files: &'a [String],
    /// Fully resolved configuration, seeds included; also in `config.json`,
    /// so `<command> --config config.json` with the same flags replays the run.
    config: &'a ExperimentConfig,
}

impl Output {
    /// Create the directory. Call only once every input has been validated.
    pub fn create(dir: &Path) -> Result<Self, Failure> {
        std::fs::create_dir_all(dir)
            .map_err(|e| anyhow::anyhow!("cannot create output directory {}: {e}", dir.display()))
            .runtime()?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn file(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    pub fn finish(
        mut self,
        command: &str,
        args: &[String],
        jobs: Option<usize>,
        config: &ExperimentConfig,
    ) -> Result<(), Failure> {
        let cfg_path = self.file("config.json");
        let cfg_text = serde_json::to_string_pretty(config).runtime()?;
        std::fs::write(&cfg_path, cfg_text + "\n")
            .map_err(|e| anyhow::anyhow!("{}: {e}", cfg_path.display()))
            .runtime()?;
        let path = self.file("manifest.json");
        let manifest = Manifest {
            tool: "episcale",
            version: env!("CARGO_PKG_VERSION"),
            command,
            args,
            jobs,
            files: &self.files,
            config,
        };
        let text = serde_json::to_string_pretty(&manifest).runtime()?;
        std::fs::write(&path, text + "\n")
            .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
            .runtime()
    }
}
