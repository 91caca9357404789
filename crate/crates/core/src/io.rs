//! File formats.
//!
//! * Query CSV: header `m,q1[,q2,...]`, one row per sample, `m` is `1` for a
//!   member and `-1` for a non-member.
//! * Vector files: headerless numeric CSV, or the binary layout `MACEVEC1`,
//!   `u32` count, `u32` dim, then `count·dim` little-endian `f64`s.

use std::fs::{self, File};
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::{MembershipLabel, QueryOutput};

pub const VECTOR_MAGIC: &[u8; 8] = b"MACEVEC1";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Query outputs split by label, in file order within each pool.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QueryPools {
    pub members: Vec<QueryOutput>,
    pub nonmembers: Vec<QueryOutput>,
}

impl QueryPools {
    pub fn dim(&self) -> Option<usize> {
        self.members.first().or(self.nonmembers.first()).map(QueryOutput::dim)
    }
}

pub fn ingest_query_csv(path: impl AsRef<Path>) -> Result<QueryPools> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    read_query_csv(file, path)
}

/// Parses query CSV from any reader; `path` is only used in messages.
pub fn read_query_csv(reader: impl Read, path: &Path) -> Result<QueryPools> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::parse(path, e.to_string()))?.clone();
    let names: Vec<&str> = header.iter().collect();
    if names.first() != Some(&"m") || names.len() < 2 {
        return Err(Error::parse(path, "missing header row `m,q1[,q2,...]`"));
    }
    for (k, name) in names.iter().enumerate().skip(1) {
        if *name != format!("q{k}") {
            return Err(Error::parse(path, format!("header column {} is `{name}`, expected `q{k}`", k + 1)));
        }
    }
    let width = names.len();
    let mut pools = QueryPools::default();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::parse(path, format!("line {line}: {e}")))?;
        if record.len() != width {
            return Err(Error::parse(
                path,
                format!("line {line}: {} fields, header has {width}", record.len()),
            ));
        }
        let label = record[0]
            .parse::<i64>()
            .ok()
            .and_then(MembershipLabel::from_sign)
            .ok_or_else(|| Error::parse(path, format!("line {line}: label `{}` is not 1 or -1", &record[0])))?;
        let values = (1..width)
            .map(|c| {
                record[c]
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| {
                        Error::parse(
                            path,
                            format!("line {line}, column {} ({}): `{}` is not a finite number", c + 1, names[c], &record[c]),
                        )
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        let q = QueryOutput::new(values)?;
        match label {
            MembershipLabel::Member => pools.members.push(q),
            MembershipLabel::NonMember => pools.nonmembers.push(q),
        }
    }
    Ok(pools)
}

/// Writes pools as query CSV, members first.
pub fn write_query_csv(path: impl AsRef<Path>, pools: &QueryPools) -> Result<()> {
    let path = path.as_ref();
    let dim = pools.dim().ok_or(Error::Empty("query pools"))?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["m".to_string()];
    header.extend((1..=dim).map(|k| format!("q{k}")));
    let csv_err = |e: csv::Error| Error::parse(path, e.to_string());
    w.write_record(&header).map_err(csv_err)?;
    for (sign, pool) in [("1", &pools.members), ("-1", &pools.nonmembers)] {
        for q in pool {
            let mut row = vec![sign.to_string()];
            row.extend(q.values().iter().map(|v| v.to_string()));
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::parse(path, e.to_string()))?;
    write_atomic(path, &bytes)
}

/// Reads raw vectors from a binary or CSV file, chosen by the magic bytes.
pub fn ingest_vectors(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    BufReader::new(File::open(path).map_err(io_err(path))?)
        .read_to_end(&mut bytes)
        .map_err(io_err(path))?;
    if bytes.is_empty() {
        return Err(Error::parse(path, "empty file"));
    }
    let vectors = if bytes.starts_with(VECTOR_MAGIC) {
        decode_binary(&bytes, path)?
    } else if bytes.len() >= 4 && bytes[..4].iter().all(u8::is_ascii_uppercase) {
        return Err(Error::parse(path, "unrecognized magic (expected MACEVEC1)"));
    } else {
        decode_csv(&bytes, path)?
    };
    if vectors.is_empty() {
        return Err(Error::parse(path, "no vectors"));
    }
    Ok(vectors)
}

fn decode_binary(bytes: &[u8], path: &Path) -> Result<Vec<Vec<f64>>> {
    if bytes.len() < 16 {
        return Err(Error::parse(path, "truncated header"));
    }
    let count = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    if dim == 0 {
        return Err(Error::parse(path, "dimension 0"));
    }
    let expected = count
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| Error::parse(path, "size overflow"))?;
    let payload = &bytes[16..];
    if payload.len() < expected {
        return Err(Error::parse(
            path,
            format!("truncated payload: {} bytes, expected {expected}", payload.len()),
        ));
    }
    if payload.len() > expected {
        return Err(Error::parse(path, format!("{} trailing bytes", payload.len() - expected)));
    }
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::parse(path, "non-finite value"));
    }
    Ok(values.chunks_exact(dim).map(<[f64]>::to_vec).collect())
}

fn decode_csv(bytes: &[u8], path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut out: Vec<Vec<f64>> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 1;
        let record = record.map_err(|e| Error::parse(path, format!("line {line}: {e}")))?;
        let row = record
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                    Error::parse(path, format!("line {line}, column {}: `{cell}` is not a finite number", c + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = out.first() {
            if first.len() != row.len() {
                return Err(Error::parse(
                    path,
                    format!("line {line}: {} values, expected {}", row.len(), first.len()),
                ));
            }
        }
        out.push(row);
    }
    Ok(out)
}

pub fn write_vectors_binary(path: impl AsRef<Path>, vectors: &[Vec<f64>]) -> Result<()> {
    let path = path.as_ref();
    let dim = vectors.first().map_or(0, Vec::len);
    if dim == 0 {
        return Err(Error::Empty("vectors"));
    }
    let too_big = || Error::invalid("vectors", "count or dimension exceeds u32");
    let mut buf = Vec::with_capacity(16 + vectors.len() * dim * 8);
    buf.extend_from_slice(VECTOR_MAGIC);
    buf.extend_from_slice(&u32::try_from(vectors.len()).map_err(|_| too_big())?.to_le_bytes());
    buf.extend_from_slice(&u32::try_from(dim).map_err(|_| too_big())?.to_le_bytes());
    for v in vectors {
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: v.len(),
            });
        }
        for x in v {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    write_atomic(path, &buf)
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid("path", format!("{} has no file name", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".{}.tmp", std::process::id()));
    let tmp: PathBuf = path.with_file_name(tmp_name);
    let result = (|| {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<QueryPools> {
        read_query_csv(text.as_bytes(), Path::new("test.csv"))
    }

    #[test]
    fn splits_by_label() {
        let pools = parse("m,q1\n1,0.5\n-1,0.25\n1,0.75\n").unwrap();
        assert_eq!(pools.members.len(), 2);
        assert_eq!(pools.nonmembers.len(), 1);
        assert_eq!(pools.members[1].values(), &[0.75]);
    }

    #[test]
    fn two_dimensional() {
        let pools = parse("m,q1,q2\n1,0.5,1\n-1,0.25,2\n").unwrap();
        assert_eq!(pools.dim(), Some(2));
    }

    #[test]
    fn rejects_bad_rows() {
        let err = parse("m,q1\n1,0.5\n0,0.1\n").unwrap_err().to_string();
        assert!(err.contains("line 3") && err.contains("label"), "{err}");
        let err = parse("m,q1,q2\n1,0.5,x\n").unwrap_err().to_string();
        assert!(err.contains("line 2, column 3 (q2)"), "{err}");
        let err = parse("m,q1\n1,0.5,0.2\n").unwrap_err().to_string();
        assert!(err.contains("line 2") && err.contains("fields"), "{err}");
        let err = parse("1,0.5\n-1,0.2\n").unwrap_err().to_string();
        assert!(err.contains("missing header"), "{err}");
        assert!(parse("m,q1\n1,NaN\n").is_err());
        assert!(parse("m,q2\n1,0.5\n").is_err());
    }

    #[test]
    fn vectors_csv_and_binary_agree() {
        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("v.csv");
        fs::write(&csv_path, "1,2,3\n4.5,-6,7e-3\n").unwrap();
        let from_csv = ingest_vectors(&csv_path).unwrap();
        assert_eq!(from_csv, vec![vec![1.0, 2.0, 3.0], vec![4.5, -6.0, 0.007]]);
        let bin_path = dir.path().join("v.bin");
        write_vectors_binary(&bin_path, &from_csv).unwrap();
        assert_eq!(ingest_vectors(&bin_path).unwrap(), from_csv);
    }

    #[test]
    fn vector_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x");
        fs::write(&p, "").unwrap();
        assert!(ingest_vectors(&p).unwrap_err().to_string().contains("empty"));
        fs::write(&p, b"MACEVEC2\x01\0\0\0\x01\0\0\0").unwrap();
        assert!(ingest_vectors(&p).unwrap_err().to_string().contains("magic"));
        let mut bytes = VECTOR_MAGIC.to_vec();
        bytes.extend_from_slice(&2u32.to_le_bytes());
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&1.0f64.to_le_bytes());
        fs::write(&p, &bytes).unwrap();
        assert!(ingest_vectors(&p).unwrap_err().to_string().contains("truncated"));
        let mut bytes = VECTOR_MAGIC.to_vec();
        bytes.extend_from_slice(&0u32.to_le_bytes());
        bytes.extend_from_slice(&0u32.to_le_bytes());
        fs::write(&p, &bytes).unwrap();
        assert!(ingest_vectors(&p).unwrap_err().to_string().contains("dimension 0"));
        fs::write(&p, "1,2\n3\n").unwrap();
        assert!(ingest_vectors(&p).is_err());
    }

    #[test]
    fn query_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("q.csv");
        let pools = parse("m,q1,q2\n1,0.5,1\n-1,0.25,2\n1,0.1,0.2\n").unwrap();
        write_query_csv(&p, &pools).unwrap();
        assert_eq!(ingest_query_csv(&p).unwrap(), pools);
        assert!(fs::read_dir(dir.path()).unwrap().count() == 1, "temporary file left behind");
    }
}
