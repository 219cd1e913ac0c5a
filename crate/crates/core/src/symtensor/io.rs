use std::io::{Read, Write};

use super::SymTensor;
use crate::error::{Error, Result};

pub(crate) fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

pub(crate) fn read_f64s(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; n * 8];
    r.read_exact(&mut bytes)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

pub(crate) fn write_f64s(w: &mut impl Write, values: &[f64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&bytes)?;
    Ok(())
}

impl SymTensor {
    /// Writes `order`, `dim` as little-endian `u64`, then the entries as
    /// little-endian `f64` in storage order.
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(&(self.order as u64).to_le_bytes())?;
        w.write_all(&(self.dim as u64).to_le_bytes())?;
        write_f64s(w, &self.entries)
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let order = read_u64(r)?;
        let dim = read_u64(r)?;
        let (order, dim) = match (usize::try_from(order), usize::try_from(dim)) {
            (Ok(o), Ok(d)) if d >= 1 => (o, d),
            _ => {
                return Err(Error::Parse(format!(
                    "bad tensor header: order {order}, dim {dim}"
                )))
            }
        };
        let len = super::checked_len(dim, order)?;
        let entries = read_f64s(r, len).map_err(|e| match e {
            Error::Io(io) if io.kind() == std::io::ErrorKind::UnexpectedEof => {
                Error::Parse(format!("truncated tensor body: expected {len} entries"))
            }
            other => other,
        })?;
        Self::from_entries(order, dim, entries).map_err(|e| match e {
            Error::InvalidArgument(msg) => Error::Parse(msg),
            other => other,
        })
    }
}
