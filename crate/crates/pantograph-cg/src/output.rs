//! Snapshot and report files.
//!
//! Snapshots are CSV (`x,u` or `x,u,n` with a mandatory header) or the JSON
//! equivalent; floats are printed in the shortest form that round-trips, so a
//! file read back reproduces the values bit for bit. All files are written to
//! a temporary name and renamed into place.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::config::OutputFormat;
use crate::error::{Error, Result};
use crate::grid::GridFunction;

/// Shortest decimal form of `v` that parses back to the same bits.
pub fn format_float(v: f64) -> String {
    format!("{v}")
}

/// Writes `content` atomically: temp file in the target directory, then
/// rename.
pub fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(content.as_bytes())?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Snapshot filename for a save time: `u_t<time with 6 decimals>.<ext>`.
pub fn snapshot_filename(t: f64, format: OutputFormat) -> String {
    format!("u_t{:.6}.{}", t, format.extension())
}

/// Renders a snapshot with columns `x,u` and optionally `n`.
pub fn render_snapshot(u: &GridFunction, n: Option<&GridFunction>, format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => {
            let mut out = String::new();
            out.push_str(if n.is_some() { "x,u,n\n" } else { "x,u\n" });
            for (i, x) in u.grid().nodes().enumerate() {
                out.push_str(&format_float(x));
                out.push(',');
                out.push_str(&format_float(u.values()[i]));
                if let Some(n) = n {
                    out.push(',');
                    out.push_str(&format_float(n.values()[i]));
                }
                out.push('\n');
            }
            out
        }
        OutputFormat::Json => {
            let x: Vec<f64> = u.grid().nodes().collect();
            let mut obj = serde_json::json!({
                "x": x,
                "u": u.values(),
            });
            if let Some(n) = n {
                obj["n"] = serde_json::json!(n.values());
            }
            let mut text = serde_json::to_string_pretty(&obj).expect("json rendering");
            text.push('\n');
            text
        }
    }
}

/// Writes one snapshot and returns its path.
pub fn write_snapshot(
    dir: &Path,
    t: f64,
    u: &GridFunction,
    n: Option<&GridFunction>,
    format: OutputFormat,
) -> Result<PathBuf> {
    let path = dir.join(snapshot_filename(t, format));
    write_atomic(&path, &render_snapshot(u, n, format))?;
    Ok(path)
}

/// Columns of a snapshot read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotData {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub n: Option<Vec<f64>>,
}

/// Reads a CSV snapshot back; used for round-trip checks.
pub fn read_snapshot_csv(path: &Path) -> Result<SnapshotData> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::invalid(format!("{}: empty snapshot", path.display())))?;
    let has_n = match header {
        "x,u" => false,
        "x,u,n" => true,
        other => {
            return Err(Error::invalid(format!(
                "{}: unexpected header '{other}'",
                path.display()
            )))
        }
    };
    let mut data = SnapshotData { x: Vec::new(), u: Vec::new(), n: has_n.then(Vec::new) };
    for (idx, line) in lines.enumerate() {
        let mut fields = line.split(',');
        let mut next = |what: &str| -> Result<f64> {
            fields
                .next()
                .ok_or_else(|| {
                    Error::invalid(format!("{}: row {} missing {what}", path.display(), idx + 2))
                })?
                .parse::<f64>()
                .map_err(|_| {
                    Error::invalid(format!("{}: row {} bad {what}", path.display(), idx + 2))
                })
        };
        data.x.push(next("x")?);
        data.u.push(next("u")?);
        if let Some(n) = data.n.as_mut() {
            n.push(next("n")?);
        }
    }
    Ok(data)
}

/// Serializes a JSON value with a trailing newline and writes it atomically.
pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("json rendering");
    text.push('\n');
    write_atomic(path, &text)
}
