//! Tensor files.
//!
//! TNSR binary layout (little-endian):
//!
//! | offset      | size  | field                         |
//! |-------------|-------|-------------------------------|
//! | 0           | 4     | magic `TNSR`                  |
//! | 4           | 1     | version, currently 1          |
//! | 5           | 1     | order `d`                     |
//! | 6           | 8 d   | extents as `u64`              |
//! | 6 + 8 d     | 8 N   | entries as `f64`, row-major   |
//!
//! Order-2 tensors may also be stored as CSV: a header line `dims,<t>,<n>`
//! followed by `t` lines of `n` comma-separated values.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, Shape};

pub const MAGIC: &[u8; 4] = b"TNSR";
pub const VERSION: u8 = 1;

fn format_err(offset: usize, reason: impl Into<String>) -> Error {
    Error::Format { offset, reason: reason.into() }
}

/// Serializes a tensor in the TNSR layout.
pub fn encode_tnsr(t: &DenseTensor) -> Vec<u8> {
    let dims = t.dims();
    let mut out = Vec::with_capacity(6 + 8 * dims.len() + 8 * t.data().len());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(u8::try_from(dims.len()).expect("order fits in a byte"));
    for &d in dims {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for &v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Parses a TNSR byte buffer.
pub fn decode_tnsr(bytes: &[u8]) -> Result<DenseTensor> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(format_err(0, "bad magic, expected \"TNSR\""));
    }
    let version = *bytes.get(4).ok_or_else(|| format_err(4, "truncated header"))?;
    if version != VERSION {
        return Err(format_err(4, format!("unsupported version {version}")));
    }
    let order = *bytes.get(5).ok_or_else(|| format_err(5, "truncated header"))? as usize;
    if order < 2 {
        return Err(format_err(5, format!("order {order} below 2")));
    }
    let mut dims = Vec::with_capacity(order);
    let mut numel: usize = 1;
    for i in 0..order {
        let at = 6 + 8 * i;
        let raw = bytes.get(at..at + 8).ok_or_else(|| format_err(at, "truncated extents"))?;
        let d = u64::from_le_bytes(raw.try_into().expect("8 bytes"));
        let d = usize::try_from(d).map_err(|_| format_err(at, "extent overflows usize"))?;
        numel = numel.checked_mul(d).ok_or_else(|| format_err(at, "element count overflows"))?;
        dims.push(d);
    }
    let start = 6 + 8 * order;
    let payload = numel.checked_mul(8).ok_or_else(|| format_err(start, "payload size overflows"))?;
    let end = start.checked_add(payload).ok_or_else(|| format_err(start, "payload size overflows"))?;
    if bytes.len() < end {
        return Err(format_err(bytes.len(), format!("truncated payload: expected {payload} bytes")));
    }
    if bytes.len() > end {
        return Err(format_err(end, "trailing bytes after payload"));
    }
    let shape = Shape::new(dims).map_err(|e| format_err(6, e.to_string()))?;
    let data = bytes[start..end].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    DenseTensor::from_vec(shape, data).map_err(|e| match e {
        Error::NonFinite { index } => format_err(start + 8 * index, "non-finite entry"),
        other => other,
    })
}

/// Formats an order-2 tensor as CSV.
pub fn encode_csv(t: &DenseTensor) -> Result<String> {
    if t.shape().order() != 2 {
        return Err(Error::InvalidArgument(format!("CSV holds order-2 tensors, got order {}", t.shape().order())));
    }
    let (rows, cols) = (t.shape().m1(), t.shape().m2());
    let mut out = format!("dims,{rows},{cols}\n");
    for row in t.data().chunks(cols) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    Ok(out)
}

/// Parses the CSV form. Offsets in errors are byte offsets of the offending line.
pub fn decode_csv(text: &str) -> Result<DenseTensor> {
    let mut offset = 0;
    let mut lines = text.split_inclusive('\n').map(|l| {
        let at = offset;
        offset += l.len();
        (at, l.trim())
    });
    let (_, header) = lines.next().ok_or_else(|| format_err(0, "empty file"))?;
    let fields: Vec<&str> = header.split(',').map(str::trim).collect();
    let parse_dim = |s: &str| s.parse::<usize>().map_err(|_| format_err(0, format!("bad extent {s:?} in header")));
    let (rows, cols) = match fields.as_slice() {
        ["dims", t, n] => (parse_dim(t)?, parse_dim(n)?),
        _ => return Err(format_err(0, "header must be `dims,<t>,<n>`")),
    };
    let mut data = Vec::with_capacity(rows.saturating_mul(cols));
    let mut seen = 0;
    for (at, line) in lines {
        if line.is_empty() {
            continue;
        }
        if seen == rows {
            return Err(format_err(at, "more rows than declared"));
        }
        let before = data.len();
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| format_err(at, format!("bad number {:?}", field.trim())))?;
            data.push(v);
        }
        if data.len() - before != cols {
            return Err(format_err(at, format!("expected {cols} values, found {}", data.len() - before)));
        }
        seen += 1;
    }
    if seen != rows {
        return Err(format_err(text.len(), format!("expected {rows} rows, found {seen}")));
    }
    DenseTensor::from_vec(Shape::new(vec![rows, cols])?, data)
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Reads a tensor; `.csv` files use the CSV form, everything else TNSR.
pub fn load_tensor(path: impl AsRef<Path>) -> Result<DenseTensor> {
    let path = path.as_ref();
    if is_csv(path) {
        decode_csv(&fs::read_to_string(path)?)
    } else {
        decode_tnsr(&fs::read(path)?)
    }
}

/// Writes a tensor; `.csv` paths use the CSV form, everything else TNSR.
pub fn save_tensor(t: &DenseTensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if is_csv(path) {
        fs::write(path, encode_csv(t)?)?;
    } else {
        fs::write(path, encode_tnsr(t))?;
    }
    Ok(())
}
