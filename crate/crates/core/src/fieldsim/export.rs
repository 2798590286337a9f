//! Flat binary field files: `<stem>.f64le` holds the values as little-endian
//! `f64` in grid order, `<stem>.hdr` a `key = value` text header.

use super::{FieldRealization, GridSpec, SimError};
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq)]
pub struct FieldHeader {
    pub sizes: Vec<usize>,
    pub spacing: f64,
    pub seed: u64,
    pub model: String,
    pub method: String,
    pub transform: Option<String>,
}

fn with_ext(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

/// Writes `<stem>.f64le` and `<stem>.hdr`; returns both paths.
pub fn write_field(field: &FieldRealization, stem: &Path) -> Result<(PathBuf, PathBuf), SimError> {
    let data_path = with_ext(stem, "f64le");
    let header_path = with_ext(stem, "hdr");
    let mut bytes = Vec::with_capacity(field.values.len() * 8);
    for v in &field.values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(&data_path, bytes)?;
    let sizes: Vec<String> = field.grid.sizes.iter().map(|n| n.to_string()).collect();
    let mut header = String::new();
    header.push_str("format = f64le\n");
    header.push_str(&format!("dim = {}\n", field.grid.dim()));
    header.push_str(&format!("sizes = {}\n", sizes.join(" ")));
    header.push_str(&format!("spacing = {}\n", field.grid.spacing));
    header.push_str(&format!("count = {}\n", field.values.len()));
    header.push_str(&format!("seed = {}\n", field.seed));
    header.push_str(&format!("model = {}\n", field.provenance.model));
    header.push_str(&format!("method = {}\n", field.provenance.method.name()));
    if let Some(t) = &field.provenance.transform {
        header.push_str(&format!("transform = {t}\n"));
    }
    fs::write(&header_path, header)?;
    Ok((data_path, header_path))
}

/// Reads a field written by [`write_field`].
pub fn read_field(stem: &Path) -> Result<(FieldHeader, Vec<f64>), SimError> {
    let text = fs::read_to_string(with_ext(stem, "hdr"))?;
    let get = |key: &str| -> Option<&str> {
        text.lines()
            .filter_map(|l| l.split_once(" = "))
            .find(|(k, _)| *k == key)
            .map(|(_, v)| v)
    };
    let need = |key: &str| get(key).ok_or_else(|| SimError::Format(format!("missing `{key}`")));
    let bad = |key: &str| SimError::Format(format!("malformed `{key}`"));
    if need("format")? != "f64le" {
        return Err(SimError::Format("unsupported format".into()));
    }
    let sizes = need("sizes")?
        .split_whitespace()
        .map(|s| s.parse::<usize>().map_err(|_| bad("sizes")))
        .collect::<Result<Vec<_>, _>>()?;
    let spacing: f64 = need("spacing")?.parse().map_err(|_| bad("spacing"))?;
    let count: usize = need("count")?.parse().map_err(|_| bad("count"))?;
    let header = FieldHeader {
        sizes,
        spacing,
        seed: need("seed")?.parse().map_err(|_| bad("seed"))?,
        model: need("model")?.to_string(),
        method: need("method")?.to_string(),
        transform: get("transform").map(str::to_string),
    };
    GridSpec::new(header.sizes.clone(), header.spacing)?;
    let bytes = fs::read(with_ext(stem, "f64le"))?;
    if bytes.len() != count * 8 || count != header.sizes.iter().product::<usize>() {
        return Err(SimError::Format(format!(
            "{} bytes for {count} values on a {:?} grid",
            bytes.len(),
            header.sizes
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok((header, values))
}
