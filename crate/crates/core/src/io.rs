//! CSV and JSON artifacts. Floats in CSV carry 17 significant digits; files
//! are written to a temporary sibling and renamed into place.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::discretize::GridFunction;
use crate::error::{Error, Result};

/// Lossless float formatting used in every CSV column.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Reads a `node_index,value` table. A header row is allowed; rows must be
/// listed in node order starting at 0.
pub fn read_nodal_csv(path: &Path) -> Result<Vec<f64>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(file);
    let mut values = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != 2 {
            return Err(Error::Config(format!(
                "{}: row {row} has {} columns, expected node_index,value",
                path.display(),
                record.len()
            )));
        }
        let index = match record[0].parse::<usize>() {
            Ok(i) => i,
            Err(_) if row == 0 => continue,
            Err(_) => {
                return Err(Error::Config(format!(
                    "{}: bad node index {:?} in row {row}",
                    path.display(),
                    &record[0]
                )))
            }
        };
        if index != values.len() {
            return Err(Error::Config(format!(
                "{}: node index {index} out of order (expected {})",
                path.display(),
                values.len()
            )));
        }
        let value: f64 = record[1].parse().map_err(|_| {
            Error::Config(format!(
                "{}: bad value {:?} for node {index}",
                path.display(),
                &record[1]
            ))
        })?;
        values.push(value);
    }
    Ok(values)
}

pub fn nodal_csv(values: &[f64]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["node_index", "value"])?;
    for (i, v) in values.iter().enumerate() {
        w.write_record([i.to_string(), fmt_f64(*v)])?;
    }
    w.into_inner()
        .map_err(|e| Error::Config(format!("csv buffer: {e}")))
}

pub fn write_grid_function(path: &Path, u: &GridFunction) -> Result<()> {
    write_atomic(path, &nodal_csv(u.values())?)
}

/// Generic CSV with a header and preformatted cells.
pub fn table_csv(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.into_inner()
        .map_err(|e| Error::Config(format!("csv buffer: {e}")))
}

pub fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    let mut file = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    file.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    file.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(file);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// First 12 hex digits of the SHA-256 of the value's JSON encoding.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    let bytes = serde_json::to_vec(value)?;
    let digest = Sha256::digest(&bytes);
    Ok(hex::encode(digest)[..12].to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits_round_trip() {
        for x in [0.1, std::f64::consts::PI, -1e-300, 123456789.125, 0.0] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn nodal_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let values = vec![2.0, 2.5, 1.0 / 3.0];
        write_atomic(&path, &nodal_csv(&values).unwrap()).unwrap();
        assert_eq!(read_nodal_csv(&path).unwrap(), values);
    }

    #[test]
    fn nodal_csv_rejects_out_of_order_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        fs::write(&path, "0,2.0\n2,2.0\n").unwrap();
        assert!(read_nodal_csv(&path).is_err());
        fs::write(&path, "# comment\n0, 2.0\n1, 3.0\n").unwrap();
        assert_eq!(read_nodal_csv(&path).unwrap(), vec![2.0, 3.0]);
    }

    #[test]
    fn hash_is_stable() {
        let a = config_hash(&serde_json::json!({"a": 1, "b": [1.5, 2.0]})).unwrap();
        let b = config_hash(&serde_json::json!({"a": 1, "b": [1.5, 2.0]})).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 12);
    }
}
