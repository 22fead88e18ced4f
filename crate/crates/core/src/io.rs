//! Portable tensor file format.
//!
//! A file is a UTF-8 header line `T3 p1 p2 p3\n` followed by `p1*p2*p3`
//! little-endian `f64` values in first-index-fastest order. Reading back a
//! written file reproduces the tensor bit for bit.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor3;

const MAGIC: &str = "T3";

pub fn write_tensor<W: Write>(mut w: W, x: &Tensor3) -> Result<()> {
    let [p1, p2, p3] = x.dims();
    writeln!(w, "{MAGIC} {p1} {p2} {p3}")?;
    let mut buf = Vec::with_capacity(8 * x.len());
    for v in x.as_slice() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_tensor<R: Read>(r: R) -> Result<Tensor3> {
    let mut reader = BufReader::new(r);
    let mut header = Vec::new();
    reader.read_until(b'\n', &mut header)?;
    let header = std::str::from_utf8(&header).map_err(|_| Error::Format("header is not UTF-8".into()))?;
    let mut fields = header.split_whitespace();
    if fields.next() != Some(MAGIC) {
        return Err(Error::Format(format!("expected `{MAGIC} p1 p2 p3` header, got {:?}", header.trim_end())));
    }
    let mut dims = [0usize; 3];
    for d in &mut dims {
        *d = fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| Error::Format(format!("bad tensor header {:?}", header.trim_end())))?;
    }
    if fields.next().is_some() {
        return Err(Error::Format(format!("trailing fields in header {:?}", header.trim_end())));
    }
    let len: usize = dims.iter().product();
    let mut bytes = Vec::with_capacity(8 * len);
    reader.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * len {
        return Err(Error::Format(format!(
            "payload has {} bytes, expected {} for dims {dims:?}",
            bytes.len(),
            8 * len
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Tensor3::from_vec(dims, data)
}

pub fn save_tensor(path: impl AsRef<Path>, x: &Tensor3) -> Result<()> {
    let mut buf = Vec::new();
    write_tensor(&mut buf, x)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<Tensor3> {
    read_tensor(fs::File::open(path)?)
}
