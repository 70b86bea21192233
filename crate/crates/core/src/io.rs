//! `.fvecs` / `.ivecs` containers: repeated records of a little-endian `i32`
//! dimension followed by that many little-endian `f32` (or `i32`) values.
//!
//! Partitions are stored as one-column ivecs of cluster ids; graphs as
//! `kappa`-column ivecs of neighbour ids plus a parallel fvecs of squared
//! distances.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::KnnGraph;
use crate::model::{Dataset, Partition};

/// Integer matrix read from an ivecs file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntMatrix {
    pub n: usize,
    pub d: usize,
    pub values: Vec<i32>,
}

impl IntMatrix {
    pub fn row(&self, i: usize) -> &[i32] {
        &self.values[i * self.d..(i + 1) * self.d]
    }
}

fn decode<T>(bytes: &[u8], convert: impl Fn([u8; 4]) -> T) -> Result<(usize, usize, Vec<T>)> {
    if bytes.is_empty() {
        return Err(Error::Format {
            offset: 0,
            message: "file holds no records".into(),
        });
    }
    let mut offset = 0usize;
    let mut dim: Option<usize> = None;
    let mut values = Vec::new();
    let mut n = 0;
    while offset < bytes.len() {
        let header: [u8; 4] = bytes
            .get(offset..offset + 4)
            .and_then(|b| b.try_into().ok())
            .ok_or_else(|| Error::Format {
                offset: offset as u64,
                message: "truncated dimension header".into(),
            })?;
        let d = i32::from_le_bytes(header);
        if d <= 0 {
            return Err(Error::Format {
                offset: offset as u64,
                message: format!("non-positive dimension {d}"),
            });
        }
        let d = d as usize;
        match dim {
            None => dim = Some(d),
            Some(expected) if expected != d => {
                return Err(Error::Format {
                    offset: offset as u64,
                    message: format!("dimension {d} differs from first record's {expected}"),
                })
            }
            _ => {}
        }
        let body = bytes
            .get(offset + 4..offset + 4 + 4 * d)
            .ok_or_else(|| Error::Format {
                offset: offset as u64,
                message: format!("truncated record of dimension {d}"),
            })?;
        values.extend(
            body.chunks_exact(4)
                .map(|c| convert([c[0], c[1], c[2], c[3]])),
        );
        offset += 4 + 4 * d;
        n += 1;
    }
    Ok((n, dim.unwrap_or(0), values))
}

fn encode<T: Copy>(d: usize, values: &[T], bytes: impl Fn(T) -> [u8; 4]) -> Result<Vec<u8>> {
    if d == 0 || !values.len().is_multiple_of(d) || d > i32::MAX as usize {
        return Err(Error::InvalidData(format!(
            "{} values cannot form records of dimension {d}",
            values.len()
        )));
    }
    let mut out = Vec::with_capacity(values.len() / d * (4 + 4 * d));
    for row in values.chunks_exact(d) {
        out.extend_from_slice(&(d as i32).to_le_bytes());
        for &v in row {
            out.extend_from_slice(&bytes(v));
        }
    }
    Ok(out)
}

pub fn parse_fvecs(bytes: &[u8]) -> Result<Dataset> {
    let (_, d, values) = decode(bytes, f32::from_le_bytes)?;
    Dataset::new(d, values)
}

pub fn parse_ivecs(bytes: &[u8]) -> Result<IntMatrix> {
    let (n, d, values) = decode(bytes, i32::from_le_bytes)?;
    Ok(IntMatrix { n, d, values })
}

pub fn encode_fvecs(d: usize, values: &[f32]) -> Result<Vec<u8>> {
    encode(d, values, f32::to_le_bytes)
}

pub fn encode_ivecs(d: usize, values: &[i32]) -> Result<Vec<u8>> {
    encode(d, values, i32::to_le_bytes)
}

pub fn read_fvecs(path: impl AsRef<Path>) -> Result<Dataset> {
    parse_fvecs(&fs::read(path)?)
}

pub fn read_ivecs(path: impl AsRef<Path>) -> Result<IntMatrix> {
    parse_ivecs(&fs::read(path)?)
}

fn write_bytes(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let mut file = fs::File::create(path)?;
    file.write_all(bytes)?;
    file.flush()?;
    Ok(())
}

pub fn write_fvecs(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    write_bytes(path, &encode_fvecs(data.d(), data.values())?)
}

pub fn write_ivecs(path: impl AsRef<Path>, d: usize, values: &[i32]) -> Result<()> {
    write_bytes(path, &encode_ivecs(d, values)?)
}

fn to_i32(v: usize) -> Result<i32> {
    i32::try_from(v).map_err(|_| Error::InvalidData(format!("{v} does not fit in an ivecs entry")))
}

pub fn write_partition(path: impl AsRef<Path>, part: &Partition) -> Result<()> {
    let ids = part
        .assignment()
        .iter()
        .map(|&c| to_i32(c))
        .collect::<Result<Vec<_>>>()?;
    write_ivecs(path, 1, &ids)
}

/// Reads a one-column ivecs of cluster ids; `k` is one past the largest id.
pub fn read_partition(path: impl AsRef<Path>, data: &Dataset) -> Result<Partition> {
    let m = read_ivecs(path)?;
    if m.d != 1 {
        return Err(Error::InvalidData(format!(
            "partition file has {} columns, expected 1",
            m.d
        )));
    }
    let assignment = m
        .values
        .iter()
        .map(|&c| {
            usize::try_from(c).map_err(|_| Error::InvalidData(format!("negative cluster id {c}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let k = assignment.iter().max().map_or(1, |&c| c + 1);
    Partition::from_assignment(data, k, assignment)
}

/// Writes neighbour ids and, if `dists_path` is given, squared distances
/// rounded to single precision.
pub fn write_graph(
    ids_path: impl AsRef<Path>,
    dists_path: Option<&Path>,
    graph: &KnnGraph,
) -> Result<()> {
    let ids = graph
        .all_ids()
        .iter()
        .map(|&j| to_i32(j as usize))
        .collect::<Result<Vec<_>>>()?;
    write_ivecs(ids_path, graph.kappa(), &ids)?;
    if let Some(p) = dists_path {
        let dists: Vec<f32> = graph.all_dists().iter().map(|&d| d as f32).collect();
        write_bytes(p, &encode_fvecs(graph.kappa(), &dists)?)?;
    }
    Ok(())
}

/// Reads neighbour ids and recomputes exact distances from `data`.
pub fn read_graph(ids_path: impl AsRef<Path>, data: &Dataset) -> Result<KnnGraph> {
    let m = read_ivecs(ids_path)?;
    if m.n != data.n() {
        return Err(Error::DimensionMismatch {
            expected: data.n(),
            actual: m.n,
        });
    }
    let ids = m
        .values
        .iter()
        .map(|&j| {
            u32::try_from(j).map_err(|_| Error::InvalidData(format!("negative neighbour id {j}")))
        })
        .collect::<Result<Vec<_>>>()?;
    KnnGraph::from_ids(data, m.d, &ids)
}
