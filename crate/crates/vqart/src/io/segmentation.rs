use std::fmt::Write as _;
use std::path::Path;

use vqart_core::abx::PhoneSegment;

use crate::error::{Error, Result};

/// Lines of `start_seconds end_seconds phone_label`. Blank lines and lines
/// starting with `#` are ignored.
pub fn parse_segmentation(text: &str, path: &Path) -> Result<Vec<PhoneSegment>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [start, end, label] = fields[..] else {
            return Err(Error::format(path, format!("line {}: expected `start end label`", n + 1)));
        };
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::format(path, format!("line {}: `{s}` is not a number", n + 1)))
        };
        out.push(
            PhoneSegment::new(label, num(start)?, num(end)?)
                .map_err(|e| Error::format(path, format!("line {}: {e}", n + 1)))?,
        );
    }
    Ok(out)
}

pub fn read_segmentation(path: &Path) -> Result<Vec<PhoneSegment>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_segmentation(&text, path)
}

pub fn write_segmentation(path: &Path, segments: &[PhoneSegment]) -> Result<()> {
    let mut text = String::new();
    for s in segments {
        let _ = writeln!(text, "{} {} {}", s.start, s.end, s.label);
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
