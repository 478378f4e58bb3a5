//! File formats.
//!
//! EMB1 embedding files: ASCII magic `EMB1`, then little-endian `u32`
//! version (1), `u32` n, `u32` d, then `n * d` little-endian `f32` values in
//! row-major order. Clouds can also be read from headerless CSV, one point per
//! line.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::persistence::PersistenceDiagram;
use crate::pointcloud::PointCloud;

pub const EMB_MAGIC: &[u8; 4] = b"EMB1";
pub const EMB_VERSION: u32 = 1;

pub fn encode_emb(cloud: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 4 * cloud.as_slice().len());
    out.extend_from_slice(EMB_MAGIC);
    out.extend_from_slice(&EMB_VERSION.to_le_bytes());
    out.extend_from_slice(&(cloud.len() as u32).to_le_bytes());
    out.extend_from_slice(&(cloud.dim() as u32).to_le_bytes());
    for &v in cloud.as_slice() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_emb(bytes: &[u8]) -> Result<PointCloud> {
    if bytes.len() < 16 || &bytes[..4] != EMB_MAGIC {
        return Err(Error::Parse("not an EMB1 file (bad magic)".into()));
    }
    let word = |k: usize| u32::from_le_bytes(bytes[4 * k..4 * k + 4].try_into().unwrap());
    let (version, n, d) = (word(1), word(2) as usize, word(3) as usize);
    if version != EMB_VERSION {
        return Err(Error::Parse(format!("unsupported EMB1 version {version}")));
    }
    let body = &bytes[16..];
    if body.len() != 4 * n * d {
        return Err(Error::Parse(format!(
            "EMB1 header announces {n} x {d} floats but the body holds {} bytes",
            body.len()
        )));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    PointCloud::new(n, d, data)
}

pub fn write_emb(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    fs::write(path, encode_emb(cloud))?;
    Ok(())
}

pub fn read_emb(path: impl AsRef<Path>) -> Result<PointCloud> {
    decode_emb(&fs::read(path)?)
}

pub fn read_csv_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    let rows = read_csv_rows(path)?;
    PointCloud::from_rows(&rows)
}

/// Headerless numeric CSV rows.
pub fn read_csv_rows(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("line {}: `{f}` is not a number", i + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Reads EMB1 when the file starts with the magic, CSV otherwise. Optionally
/// L2-normalizes every row.
pub fn read_cloud(path: impl AsRef<Path>, l2_normalize: bool) -> Result<PointCloud> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| {
        Error::InvalidInput(format!("cannot read {}: {e}", path.display()))
    })?;
    let cloud = if bytes.starts_with(EMB_MAGIC) {
        decode_emb(&bytes)?
    } else {
        read_csv_cloud(path)?
    };
    Ok(if l2_normalize {
        cloud.l2_normalized()
    } else {
        cloud
    })
}

fn fmt_edge(e: Option<(usize, usize)>) -> (String, String) {
    match e {
        Some((i, j)) => (i.to_string(), j.to_string()),
        None => ("-1".into(), "-1".into()),
    }
}

/// Diagram CSV: `dim,birth,death,birth_i,birth_j,death_i,death_j`; essential
/// deaths are written `inf`, absent edges `-1`.
pub fn write_diagram_csv<W: Write>(out: W, diagram: &PersistenceDiagram) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["dim", "birth", "death", "birth_i", "birth_j", "death_i", "death_j"])?;
    for p in diagram.pairs() {
        let death = if p.is_essential() {
            "inf".to_string()
        } else {
            p.death.to_string()
        };
        let (bi, bj) = fmt_edge(p.birth_edge);
        let (di, dj) = fmt_edge(p.death_edge);
        w.write_record([p.dim.to_string(), p.birth.to_string(), death, bi, bj, di, dj])?;
    }
    w.flush()?;
    Ok(())
}
