//! JSON and CSV emission.
//!
//! JSON reports have sorted keys and floats rounded to 12 significant
//! digits, so identical runs produce identical bytes.

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;
use serde_json::Value;

use crate::error::{FockError, Result};
use crate::geometry::Lattice;
use crate::operators::ToeplitzTruncation;
use crate::transforms::BerezinField;

pub const SIGNIFICANT_DIGITS: usize = 12;

pub fn round_significant(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().unwrap_or(x)
}

fn round_value(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => n
            .as_f64()
            .and_then(|x| serde_json::Number::from_f64(round_significant(x)))
            .map_or(Value::Null, Value::Number),
        Value::Array(items) => Value::Array(items.into_iter().map(round_value).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, round_value(v))).collect()),
        other => other,
    }
}

/// Serializes through `serde_json::Value`, whose maps keep keys sorted.
/// Non-finite floats become `null`.
pub fn to_json_value<T: Serialize + ?Sized>(report: &T) -> Result<Value> {
    let v = serde_json::to_value(report).map_err(|e| FockError::Io(e.to_string()))?;
    Ok(round_value(v))
}

pub fn to_json_string<T: Serialize + ?Sized>(report: &T) -> Result<String> {
    let v = to_json_value(report)?;
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| FockError::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, report: &T) -> Result<()> {
    fs::write(path, to_json_string(report)?).map_err(|e| io_error(path, e))
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> FockError {
    FockError::Io(format!("{}: {e}", path.display()))
}

fn num(x: f64) -> String {
    let x = round_significant(x);
    if !x.is_finite() {
        String::from("nan")
    } else if x == 0.0 || (1e-4..1e15).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Writes a CSV with the given header; each row is formatted with
/// [`round_significant`].
pub fn write_rows<W: Write>(out: W, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| FockError::Io(e.to_string());
    w.write_record(header).map_err(err)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(FockError::Io(format!("row of length {} under a header of {}", row.len(), header.len())));
        }
        w.write_record(row.into_iter().map(num)).map_err(err)?;
    }
    w.flush().map_err(|e| FockError::Io(e.to_string()))
}

/// `index,re,im,rho`.
pub fn write_lattice_csv<W: Write>(out: W, lattice: &Lattice) -> Result<()> {
    let rows = lattice
        .points
        .iter()
        .zip(&lattice.rho)
        .enumerate()
        .map(|(i, (p, rho))| vec![i as f64, p.re, p.im, *rho]);
    write_rows(out, &["index", "re", "im", "rho"], rows)
}

/// `re,im,d_phi_from_origin`.
pub fn write_distance_field_csv<W: Write>(out: W, nodes: impl IntoIterator<Item = (Complex64, f64)>) -> Result<()> {
    let rows = nodes.into_iter().map(|(z, d)| vec![z.re, z.im, d]);
    write_rows(out, &["re", "im", "d_phi_from_origin"], rows)
}

/// `re,im,re_btransform,im_btransform`.
pub fn write_berezin_csv<W: Write>(out: W, field: &BerezinField) -> Result<()> {
    let rows = field.points().iter().zip(field.values()).map(|(z, v)| vec![z.re, z.im, v.re, v.im]);
    write_rows(out, &["re", "im", "re_btransform", "im_btransform"], rows)
}

/// `j,k,re,im` with degrees (not matrix positions) in `j` and `k`.
pub fn write_truncation_csv<W: Write>(out: W, trunc: &ToeplitzTruncation) -> Result<()> {
    let n = trunc.size;
    let first = trunc.first_degree;
    let rows = (0..n).flat_map(|j| {
        (0..n).map(move |k| {
            let e = trunc.entries[(j, k)];
            vec![(first + j) as f64, (first + k) as f64, e.re, e.im]
        })
    });
    write_rows(out, &["j", "k", "re", "im"], rows)
}

/// One row of the kernel-field export.
#[derive(Debug, Clone, Copy)]
pub struct KernelSample {
    pub z: Complex64,
    pub w: Complex64,
    pub value: Complex64,
    pub tail_bound: f64,
}

/// `re_z,im_z,re_w,im_w,re_K,im_K,tail_bound`.
pub fn write_kernel_field_csv<W: Write>(out: W, samples: &[KernelSample]) -> Result<()> {
    let rows = samples
        .iter()
        .map(|s| vec![s.z.re, s.z.im, s.w.re, s.w.im, s.value.re, s.value.im, s.tail_bound]);
    write_rows(out, &["re_z", "im_z", "re_w", "im_w", "re_K", "im_K", "tail_bound"], rows)
}

/// `re,im,rho`.
pub fn write_rho_map_csv<W: Write>(out: W, samples: &[(Complex64, f64)]) -> Result<()> {
    let rows = samples.iter().map(|(z, rho)| vec![z.re, z.im, *rho]);
    write_rows(out, &["re", "im", "rho"], rows)
}

pub fn create_file(path: &Path) -> Result<fs::File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    fs::File::create(path).map_err(|e| io_error(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn rounding_keeps_twelve_digits() {
        assert_eq!(round_significant(0.398_942_280_401_432_7), 0.398_942_280_401);
        assert_eq!(round_significant(1.0 / 3.0), 0.333_333_333_333);
        assert_eq!(round_significant(-2.5e-20), -2.5e-20);
        assert_eq!(round_significant(0.0), 0.0);
        assert!(round_significant(f64::NAN).is_nan());
    }

    #[test]
    fn json_keys_are_sorted_and_floats_rounded() {
        let s = to_json_string(&json!({"zeta": 1.0 / 3.0, "alpha": [2.0f64.sqrt()], "mid": {"b": 1, "a": f64::NAN}})).unwrap();
        let a = s.find("\"alpha\"").unwrap();
        let m = s.find("\"mid\"").unwrap();
        let z = s.find("\"zeta\"").unwrap();
        assert!(a < m && m < z);
        assert!(s.contains("0.333333333333") && !s.contains("0.3333333333333"));
        assert!(s.contains("1.41421356237"));
        assert!(s.find("\"a\"").unwrap() < s.find("\"b\"").unwrap());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let mut buf = Vec::new();
        write_rho_map_csv(&mut buf, &[(Complex64::new(1.0, -0.5), 0.25)]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "re,im,rho\n1,-0.5,0.25\n");
        let mut buf = Vec::new();
        write_rows(&mut buf, &["x"], [vec![-2.5e-17], vec![3e20]]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "x\n-2.5e-17\n3e20\n");
        assert!(write_rows(Vec::new(), &["a", "b"], [vec![1.0]]).is_err());
    }
}
