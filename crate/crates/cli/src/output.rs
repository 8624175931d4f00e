use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chan_core::ChanError;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

/// An error as printed to stderr: `{"error": {"kind": ..., "message": ...}}`.
#[derive(Debug)]
pub struct Failure {
    pub kind: &'static str,
    pub message: String,
    pub code: u8,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure { kind: "usage", message: message.into(), code: 2 }
    }

    pub fn report(self) -> ExitCode {
        let body = json!({ "error": { "kind": self.kind, "message": self.message.trim_end() } });
        eprintln!("{body}");
        ExitCode::from(self.code)
    }
}

impl From<ChanError> for Failure {
    fn from(e: ChanError) -> Self {
        Failure { kind: e.kind(), message: e.to_string(), code: 1 }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    ChanError::Io { path: path.to_path_buf(), source: e }.into()
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("plain data serializes");
    text.push('\n');
    text
}

pub fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_failure(parent, e))?;
    }
    fs::write(path, text).map_err(|e| io_failure(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    write_file(path, &to_json(value))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    serde_json::from_str(&text).map_err(|e| ChanError::Json { path: path.to_path_buf(), source: e }.into())
}

pub fn create_dir(path: &Path) -> Result<(), Failure> {
    fs::create_dir_all(path).map_err(|e| io_failure(path, e))
}

/// Writes to `out` when given, stdout otherwise.
pub fn emit<T: Serialize>(value: &T, out: Option<&PathBuf>) -> Result<(), Failure> {
    match out {
        Some(path) => write_json(path, value),
        None => {
            print!("{}", to_json(value));
            Ok(())
        }
    }
}
