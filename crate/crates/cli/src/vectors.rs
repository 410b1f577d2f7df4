//! Vectors files: one vector per line, comma-separated decimal components.
//! Blank lines and lines starting with `#` are skipped.

use std::path::Path;

use anyhow::{bail, Context, Result};

pub fn parse(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v = line
            .split(',')
            .map(|s| {
                let s = s.trim();
                s.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .with_context(|| format!("line {}: `{s}` is not a finite number", i + 1))
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = out.first() {
            if first.len() != v.len() {
                bail!(
                    "line {}: expected {} components, found {}",
                    i + 1,
                    first.len(),
                    v.len()
                );
            }
        }
        out.push(v);
    }
    if out.is_empty() {
        bail!("no vectors found");
    }
    Ok(out)
}

pub fn read(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse(&text).with_context(|| format!("parsing {}", path.display()))
}
