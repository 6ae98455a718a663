//! JSONL file plumbing with line-numbered schema errors.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::segmentation::Prompt;

/// Read one JSON object per line; malformed lines are rejected with
/// their line number.
pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let file = File::open(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item: T = serde_json::from_str(&line).map_err(|e| {
            Error::Data(format!("{}:{}: {e}", path.display(), lineno + 1))
        })?;
        out.push(item);
    }
    Ok(out)
}

/// Write items as one JSON object per line.
pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, items: &[T]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    let mut writer = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut writer, item)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

/// Read a prompt dataset, enforcing non-empty text and unique ids.
pub fn read_prompts(path: impl AsRef<Path>) -> Result<Vec<Prompt>> {
    let prompts: Vec<Prompt> = read_jsonl(&path)?;
    let mut seen = std::collections::HashSet::new();
    for p in &prompts {
        p.validate()?;
        if !seen.insert(p.id.as_str()) {
            return Err(Error::Data(format!("duplicate prompt id: {}", p.id)));
        }
    }
    Ok(prompts)
}
