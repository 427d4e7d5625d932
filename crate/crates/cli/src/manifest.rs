use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};

/// `<path>` with `suffix` appended to its file name.
pub fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(suffix);
    path.with_file_name(name)
}

/// Everything needed to re-run a command: its name, the tool version, the
/// flags as given, the resolved configuration, and the results.
pub fn write_manifest<A: Serialize>(out: &Path, command: &str, args: &A, resolved: Value, results: Value) -> CliResult<PathBuf> {
    let path = sidecar(out, ".manifest.json");
    let doc = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "args": args,
        "resolved": resolved,
        "results": results,
    });
    write_json(&path, &doc)?;
    Ok(path)
}

pub fn write_json(path: &Path, value: &Value) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
}

/// JSON has no infinity; PSNR of an exact fit is reported as the string "inf".
pub fn finite_or_string(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(v.to_string())
    }
}
