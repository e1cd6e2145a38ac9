//! All-or-nothing output directories. Files are written into a hidden
//! staging directory next to the target, which is renamed into place on
//! commit and deleted otherwise.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

/// Marker file every run writes; a directory holding it may be replaced.
pub const CONFIG_FILE: &str = "config.toml";

pub struct OutputDir {
    target: PathBuf,
    staging: PathBuf,
    committed: bool,
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

impl OutputDir {
    pub fn create(target: &Path) -> Result<Self, CliError> {
        if target.exists() {
            let ours = target.join(CONFIG_FILE).is_file();
            let empty = target.is_dir() && fs::read_dir(target).map_err(|e| io_err(target, e))?.next().is_none();
            if !(ours || empty) {
                return Err(CliError::Io(format!(
                    "{} exists and is not an output directory; refusing to replace it",
                    target.display()
                )));
            }
        }
        let name = target
            .file_name()
            .ok_or_else(|| CliError::Io(format!("invalid output directory {}", target.display())))?
            .to_string_lossy()
            .into_owned();
        let staging = target.with_file_name(format!(".{name}.partial"));
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(|e| io_err(&staging, e))?;
        }
        fs::create_dir_all(&staging).map_err(|e| io_err(&staging, e))?;
        Ok(Self {
            target: target.to_path_buf(),
            staging,
            committed: false,
        })
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.staging.join(file)
    }

    pub fn write_text(&self, file: &str, text: &str) -> Result<(), CliError> {
        let p = self.path(file);
        fs::write(&p, text).map_err(|e| io_err(&p, e))
    }

    pub fn write_json<T: Serialize + ?Sized>(&self, file: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_text(file, &text)
    }

    /// Header plus rows, comma separated, `\n` terminated.
    pub fn write_csv<R, I>(&self, file: &str, header: &[&str], rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator,
        R::Item: AsRef<[u8]>,
    {
        let mut w = self.csv_writer(file)?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush().map_err(|e| io_err(&self.path(file), e))
    }

    pub fn csv_writer(&self, file: &str) -> Result<csv::Writer<BufWriter<fs::File>>, CliError> {
        let p = self.path(file);
        let f = fs::File::create(&p).map_err(|e| io_err(&p, e))?;
        Ok(csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(BufWriter::new(f)))
    }

    pub fn writer(&self, file: &str) -> Result<BufWriter<fs::File>, CliError> {
        let p = self.path(file);
        fs::File::create(&p).map(BufWriter::new).map_err(|e| io_err(&p, e))
    }

    /// Replaces the target with the staged files.
    pub fn commit(mut self) -> Result<PathBuf, CliError> {
        if self.target.exists() {
            fs::remove_dir_all(&self.target).map_err(|e| io_err(&self.target, e))?;
        }
        fs::rename(&self.staging, &self.target).map_err(|e| io_err(&self.target, e))?;
        self.committed = true;
        Ok(self.target.clone())
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.staging);
        }
    }
}

/// Shortest round-trip formatting (exponent form for very small or large
/// magnitudes); missing values print as empty fields.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:?}")
    }
}

pub fn flush(mut w: impl Write, path: &Path) -> Result<(), CliError> {
    w.flush().map_err(|e| io_err(path, e))
}
