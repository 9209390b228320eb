//! Output directory bookkeeping: provenance sidecars and the manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::CliError;

pub const TOOL: &str = "qent";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

fn io_at(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

pub struct RunDir {
    root: PathBuf,
    files: Vec<String>,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| io_at(root, e))?;
        Ok(RunDir {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    /// Path for an artifact, recorded in the manifest.
    pub fn artifact(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.root.join(name)
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let path = self.artifact(name);
        fs::write(&path, contents).map_err(|e| io_at(&path, e))?;
        Ok(path)
    }

    /// Writes `<name>.provenance`: a header of comments, then the effective
    /// settings as `key = value`, so the file can be passed back as `--config`.
    pub fn provenance(&mut self, name: &str, command: &str, settings: &[(&str, String)], notes: &[String]) -> Result<(), CliError> {
        let mut text = format!("# {TOOL} {VERSION} {command}\n# artifact: {name}\n# rng: {}\n", qent_core::rng::RNG_ALGORITHM);
        for n in notes {
            text.push_str(&format!("# {n}\n"));
        }
        for (k, v) in settings {
            text.push_str(&format!("{k} = {v}\n"));
        }
        self.write(&format!("{name}.provenance"), &text)?;
        Ok(())
    }

    /// Lists every artifact with its size in bytes.
    pub fn finish(self) -> Result<PathBuf, CliError> {
        let path = self.root.join("manifest.txt");
        let mut f = fs::File::create(&path).map_err(|e| io_at(&path, e))?;
        let mut text = format!("# {TOOL} {VERSION}\n");
        for name in &self.files {
            let p = self.root.join(name);
            let len = fs::metadata(&p).map_err(|e| io_at(&p, e))?.len();
            text.push_str(&format!("{name}\t{len}\n"));
        }
        f.write_all(text.as_bytes()).map_err(|e| io_at(&path, e))?;
        Ok(path)
    }
}
