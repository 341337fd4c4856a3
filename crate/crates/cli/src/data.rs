use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use evt_core::event_io::{read_stream, EventStream, Format};

fn is_stream_file(p: &Path) -> bool {
    matches!(
        p.extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref(),
        Some("evt" | "evt1" | "bin" | "csv")
    )
}

/// Stream files named by `inputs`; directories contribute their stream
/// files in name order.
pub fn stream_paths(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(input)
                .with_context(|| format!("reading {}", input.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file() && is_stream_file(p))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(input.clone());
        }
    }
    Ok(out)
}

pub fn load(path: &Path) -> Result<EventStream> {
    read_stream(path, Format::from_path(path))
        .with_context(|| format!("reading {}", path.display()))
}

pub fn load_all(inputs: &[PathBuf]) -> Result<Vec<(PathBuf, EventStream)>> {
    stream_paths(inputs)?
        .into_iter()
        .map(|p| load(&p).map(|s| (p, s)))
        .collect()
}
