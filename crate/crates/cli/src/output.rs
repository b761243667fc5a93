//! All-or-nothing output: files are written to temporaries inside the output
//! directory and renamed into place only by [`Staged::commit`].

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use tempfile::NamedTempFile;

pub struct Staged {
    dir: PathBuf,
    files: Vec<(NamedTempFile, PathBuf)>,
}

impl Staged {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn add(&mut self, name: &str, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
        let mut tmp = NamedTempFile::new_in(&self.dir).with_context(|| format!("staging {name}"))?;
        {
            let mut w = BufWriter::new(tmp.as_file_mut());
            write(&mut w).with_context(|| format!("writing {name}"))?;
            w.flush()?;
        }
        self.files.push((tmp, self.dir.join(name)));
        Ok(())
    }

    pub fn add_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.add(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            w.write_all(b"\n")?;
            Ok(())
        })
    }

    pub fn commit(self) -> Result<()> {
        for (tmp, dest) in self.files {
            tmp.persist(&dest)
                .with_context(|| format!("moving output into {}", dest.display()))?;
        }
        Ok(())
    }
}
