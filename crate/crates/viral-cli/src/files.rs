//! Input checks, atomic output writes, and the output-directory lock.

use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use crate::errors::CliError;

/// Reads an input file, failing with E_NO_INPUT when it does not exist.
pub fn read_input(path: &Path) -> Result<String, CliError> {
    if !path.is_file() {
        return Err(CliError::no_input(path));
    }
    fs::read_to_string(path).map_err(CliError::io)
}

/// Fails early with E_NO_INPUT so nothing is written when an input is
/// missing.
pub fn require_inputs<'p>(paths: impl IntoIterator<Item = &'p Path>) -> Result<(), CliError> {
    for path in paths {
        if !path.is_file() {
            return Err(CliError::no_input(path));
        }
    }
    Ok(())
}

/// Writes through a `.part` sibling and renames, so readers never observe a
/// half-written file.
pub fn write_atomic(path: &Path, content: &str) -> Result<(), CliError> {
    let mut name = path
        .file_name()
        .ok_or_else(|| CliError::usage(format!("{} is not a file path", path.display())))?
        .to_os_string();
    name.push(".part");
    let part = path.with_file_name(name);
    fs::write(&part, content).map_err(CliError::io)?;
    fs::rename(&part, path).map_err(CliError::io)
}

/// Guards a directory against concurrent runs via a lock file that lives
/// for the lifetime of this value.
pub struct OutLock {
    path: PathBuf,
}

impl OutLock {
    pub fn acquire(dir: &Path) -> Result<OutLock, CliError> {
        fs::create_dir_all(dir).map_err(CliError::io)?;
        let path = dir.join(".viral.lock");
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(OutLock { path }),
            Err(e) if e.kind() == ErrorKind::AlreadyExists => Err(CliError::locked(&path)),
            Err(e) => Err(CliError::io(e)),
        }
    }

    /// Locks the directory that will contain `file`.
    pub fn for_file(file: &Path) -> Result<OutLock, CliError> {
        let dir = file.parent().filter(|p| !p.as_os_str().is_empty());
        OutLock::acquire(dir.unwrap_or_else(|| Path::new(".")))
    }
}

impl Drop for OutLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}
