//! Error type and output-directory handling shared by the commands.

use std::fs;
use std::path::{Path, PathBuf};

use sslsod::trainer::TrainConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] sslsod::Error),

    #[error("{} already exists and is not empty; pass --force to write into it", .0.display())]
    OutputExists(PathBuf),

    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.code(),
            CliError::OutputExists(_) => "output-exists",
            CliError::Usage(_) => "usage",
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

fn io(path: &Path, e: std::io::Error) -> CliError {
    sslsod::Error::io(path, e).into()
}

fn is_empty_dir(dir: &Path) -> Result<bool> {
    Ok(fs::read_dir(dir).map_err(|e| io(dir, e))?.next().is_none())
}

/// Creates `dir`, refusing to reuse a non-empty one unless `force` is set.
pub fn prepare_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        if !dir.is_dir() {
            return Err(CliError::Usage(format!("{} exists and is not a directory", dir.display())));
        }
        if !force && !is_empty_dir(dir)? {
            return Err(CliError::OutputExists(dir.to_path_buf()));
        }
    }
    fs::create_dir_all(dir).map_err(|e| io(dir, e))
}

/// Refuses to replace an existing file unless `force` is set.
pub fn check_file(path: &Path, force: bool) -> Result<()> {
    if path.exists() && !force {
        return Err(CliError::OutputExists(path.to_path_buf()));
    }
    Ok(())
}

pub fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io(path, e))
}

/// Writes the resolved configuration and the invocation that produced it.
pub fn echo(dir: &Path, config: &TrainConfig) -> Result<()> {
    write(&dir.join("config.toml"), &config.to_toml())?;
    let argv: Vec<String> = std::env::args().map(|a| quote(&a)).collect();
    write(&dir.join("command.txt"), &(argv.join(" ") + "\n"))
}

fn quote(arg: &str) -> String {
    if !arg.is_empty() && arg.chars().all(|c| c.is_ascii_alphanumeric() || "-_./=,:@".contains(c)) {
        arg.to_string()
    } else {
        format!("'{}'", arg.replace('\'', r"'\''"))
    }
}
