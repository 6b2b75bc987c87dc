use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use mineral_pomdp::{Error, Result};
use tempfile::NamedTempFile;

/// Writes whole files through a temp file in the target directory and a
/// rename, so readers never see a partial result.
pub struct OutputDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|source| Error::Io {
            path: root.display().to_string(),
            source,
        })?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write<F>(&mut self, name: &str, fill: F) -> Result<PathBuf>
    where
        F: FnOnce(&mut dyn Write) -> Result<()>,
    {
        let target = self.root.join(name);
        let io_err = |source| Error::Io {
            path: target.display().to_string(),
            source,
        };
        let tmp = NamedTempFile::new_in(&self.root).map_err(io_err)?;
        let mut w = BufWriter::new(tmp);
        fill(&mut w)?;
        w.flush().map_err(io_err)?;
        let tmp = w.into_inner().map_err(|e| io_err(e.into_error()))?;
        tmp.persist(&target).map_err(|e| io_err(e.error))?;
        self.written.push(target.clone());
        Ok(target)
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}
