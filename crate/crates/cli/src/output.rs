//! Output files are written under temporary names and renamed into place
//! only once every file of a command is complete.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

/// A set of files staged in one directory. Dropping the set without calling
/// [`OutputSet::commit`] removes everything it created.
#[derive(Debug)]
pub struct OutputSet {
    dir: PathBuf,
    staged: Vec<(PathBuf, PathBuf)>,
    committed: bool,
}

impl OutputSet {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("cannot create output_dir {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            staged: Vec::new(),
            committed: false,
        })
    }

    /// Opens `<dir>/.<name>.partial` for writing.
    pub fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        let target = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.partial"));
        let file = File::create(&tmp).with_context(|| format!("cannot write {}", tmp.display()))?;
        self.staged.push((tmp, target));
        Ok(BufWriter::new(file))
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let mut w = self.create(name)?;
        w.write_all(bytes)?;
        w.flush()?;
        Ok(())
    }

    /// Renames every staged file to its final name and returns those names.
    pub fn commit(mut self) -> Result<Vec<PathBuf>> {
        // a failed earlier run may have left outputs; they are replaced whole
        for (tmp, target) in &self.staged {
            fs::rename(tmp, target)
                .with_context(|| format!("cannot move {} to {}", tmp.display(), target.display()))?;
        }
        self.committed = true;
        Ok(self.staged.iter().map(|(_, t)| t.clone()).collect())
    }
}

impl Drop for OutputSet {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for (tmp, _) in &self.staged {
            let _ = fs::remove_file(tmp);
        }
    }
}

/// Writes `value` as pretty JSON followed by a newline.
pub fn json_bytes<V: serde::Serialize>(value: &V) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}
