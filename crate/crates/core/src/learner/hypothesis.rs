use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite::fill_hermite;
use crate::symtensor::index::{weights, ProductTable};
use crate::symtensor::SymTensor;

/// Largest tolerated `||BᵀB - I||` entry.
pub const ORTHONORMAL_TOLERANCE: f64 = 1e-10;

/// `F~(x) = sum_{m <= D} <P_m, H_m(Bᵀx)>` for an orthonormal `d x k` basis `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    basis: DMatrix<f64>,
    coeffs: Vec<SymTensor>,
    // concatenated sqrt(weight) * P_m, aligned with ProductTable output
    packed: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    dim: usize,
    k: usize,
    #[serde(rename = "D")]
    degree: usize,
    basis: Vec<f64>,
}

impl Hypothesis {
    pub fn new(basis: DMatrix<f64>, coeffs: Vec<SymTensor>) -> Result<Self> {
        let k = basis.ncols();
        if k == 0 || basis.nrows() < k {
            return Err(Error::ShapeMismatch(format!(
                "basis must be d x k with 1 <= k <= d, got {} x {k}",
                basis.nrows()
            )));
        }
        let gram = basis.transpose() * &basis;
        let dev = (gram - DMatrix::<f64>::identity(k, k)).amax();
        if !(dev <= ORTHONORMAL_TOLERANCE) {
            return Err(Error::InvalidArgument(format!(
                "basis columns are not orthonormal (deviation {dev:e})"
            )));
        }
        if coeffs.is_empty() {
            return Err(Error::InvalidArgument("at least P_0 is required".into()));
        }
        for (m, p) in coeffs.iter().enumerate() {
            if p.order() != m || p.dim() != k {
                return Err(Error::ShapeMismatch(format!(
                    "coefficient {m} has order {} over dimension {}, expected order {m} over {k}",
                    p.order(),
                    p.dim()
                )));
            }
        }
        let degree = coeffs.len() - 1;
        ProductTable::new(k, degree)?;
        let mut packed = Vec::new();
        for p in &coeffs {
            let w = weights(k, p.order())?;
            packed.extend(p.entries().iter().zip(w.iter()).map(|(a, w)| a * w.sqrt()));
        }
        Ok(Self {
            basis,
            coeffs,
            packed,
        })
    }

    /// The zero function on `R^dim` with basis `e_1..e_k`.
    pub fn zero(dim: usize, k: usize, degree: usize) -> Result<Self> {
        let basis = DMatrix::from_fn(dim, k, |i, j| f64::from(i == j));
        let coeffs = (0..=degree).map(|m| SymTensor::zeros(m, k)).collect::<Result<_>>()?;
        Self::new(basis, coeffs)
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[SymTensor] {
        &self.coeffs
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn k(&self) -> usize {
        self.basis.ncols()
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::ShapeMismatch(format!(
                "input of dimension {len}, hypothesis dimension {}",
                self.dim()
            )));
        }
        Ok(())
    }

    fn predict_with(&self, table: &mut ProductTable, values: &mut [f64], z: &mut [f64], x: &[f64]) -> f64 {
        let stride = self.degree() + 1;
        for (j, zj) in z.iter_mut().enumerate() {
            *zj = self.basis.column(j).iter().zip(x).map(|(b, v)| b * v).sum();
        }
        for (row, &zj) in values.chunks_exact_mut(stride).zip(z.iter()) {
            fill_hermite(zj, row);
        }
        table
            .fill(values)
            .iter()
            .zip(&self.packed)
            .map(|(a, b)| a * b)
            .sum()
    }

    fn scratch(&self) -> (ProductTable, Vec<f64>, Vec<f64>) {
        let table = ProductTable::new(self.k(), self.degree()).expect("checked at construction");
        (table, vec![0.0; self.k() * (self.degree() + 1)], vec![0.0; self.k()])
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        let (mut table, mut values, mut z) = self.scratch();
        Ok(self.predict_with(&mut table, &mut values, &mut z, x))
    }

    /// Predictions for row-major points.
    pub fn predict_batch(&self, xs: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        if !xs.len().is_multiple_of(d) {
            return Err(Error::ShapeMismatch(format!(
                "{} coordinates is not a multiple of dimension {d}",
                xs.len()
            )));
        }
        Ok(xs
            .par_chunks(1024 * d)
            .flat_map_iter(|chunk| {
                let (mut table, mut values, mut z) = self.scratch();
                chunk
                    .chunks_exact(d)
                    .map(|x| self.predict_with(&mut table, &mut values, &mut z, x))
                    .collect::<Vec<_>>()
            })
            .collect())
    }

    /// Little-endian `u64` header length, a JSON header `{dim, k, D, basis}` with the
    /// basis row-major, then the tensors `P_0..P_D` in binary tensor format.
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        let basis = (0..self.dim())
            .flat_map(|i| (0..self.k()).map(move |j| (i, j)))
            .map(|(i, j)| self.basis[(i, j)])
            .collect();
        let header = serde_json::to_vec(&Header {
            dim: self.dim(),
            k: self.k(),
            degree: self.degree(),
            basis,
        })?;
        w.write_all(&(header.len() as u64).to_le_bytes())?;
        w.write_all(&header)?;
        for p in &self.coeffs {
            p.write_to(w)?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let parse = |e: Error| match e {
            Error::Io(io) if io.kind() == std::io::ErrorKind::UnexpectedEof => {
                Error::Parse("truncated hypothesis file".into())
            }
            other => other,
        };
        let len = crate::symtensor::io::read_u64(r).map_err(parse)?;
        if len > 1 << 32 {
            return Err(Error::Parse(format!("hypothesis header length {len} is implausible")));
        }
        let mut buf = vec![0u8; len as usize];
        r.read_exact(&mut buf).map_err(|e| parse(e.into()))?;
        let header: Header =
            serde_json::from_slice(&buf).map_err(|e| Error::Parse(format!("hypothesis header: {e}")))?;
        if header.basis.len() != header.dim * header.k {
            return Err(Error::Parse("basis size does not match dim x k".into()));
        }
        let basis = DMatrix::from_row_slice(header.dim, header.k, &header.basis);
        let coeffs = (0..=header.degree)
            .map(|_| SymTensor::read_from(r).map_err(parse))
            .collect::<Result<Vec<_>>>()?;
        Self::new(basis, coeffs).map_err(|e| Error::Parse(format!("hypothesis: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = BufWriter::new(File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(&mut BufReader::new(File::open(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::{hermite_eval, hermite_tensor, relu_coeff};
    use approx::assert_abs_diff_eq;

    fn rotation(d: usize) -> DMatrix<f64> {
        DMatrix::from_fn(d, d, |i, j| ((3 * i + 5 * j) % 7) as f64 - 3.0).qr().q()
    }

    #[test]
    fn zero_hypothesis_predicts_zero() {
        let h = Hypothesis::zero(4, 2, 5).unwrap();
        assert_eq!(h.predict(&[1.0, -2.0, 0.5, 3.0]).unwrap(), 0.0);
        assert!(h.predict(&[1.0]).is_err());
    }

    #[test]
    fn constant_term() {
        let mut coeffs = vec![SymTensor::scalar(0.37, 1).unwrap()];
        coeffs.push(SymTensor::zeros(1, 1).unwrap());
        let h = Hypothesis::new(DMatrix::from_column_slice(2, 1, &[0.6, 0.8]), coeffs).unwrap();
        for x in [[0.0, 0.0], [3.0, -1.0]] {
            assert_eq!(h.predict(&x).unwrap(), 0.37);
        }
    }

    #[test]
    fn relu_truncation() {
        let d = 30;
        let b = DMatrix::from_column_slice(3, 1, &[0.0, 0.6, 0.8]);
        let coeffs = (0..=d)
            .map(|m| SymTensor::from_entries(m, 1, vec![relu_coeff(m)]))
            .collect::<Result<Vec<_>>>()
            .unwrap();
        let h = Hypothesis::new(b, coeffs).unwrap();
        for t in [-1.3, 0.2, 2.0] {
            let x = [5.0, 0.6 * t, 0.8 * t];
            let expect: f64 = (0..=d).map(|m| relu_coeff(m) * hermite_eval(m, t)).sum();
            assert_abs_diff_eq!(h.predict(&x).unwrap(), expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn predict_matches_tensor_inner_products() {
        let b = rotation(4).columns(0, 2).into_owned();
        let coeffs: Vec<SymTensor> = (0..=5)
            .map(|m| SymTensor::from_fn(m, 2, |a| (a[0] as f64 - 0.5 * a[1] as f64 + 0.1).sin()).unwrap())
            .collect();
        let h = Hypothesis::new(b.clone(), coeffs.clone()).unwrap();
        let x = [0.4, -1.1, 0.7, 2.0];
        let z: Vec<f64> = (0..2).map(|j| b.column(j).iter().zip(&x).map(|(p, q)| p * q).sum()).collect();
        let expect: f64 = coeffs
            .iter()
            .enumerate()
            .map(|(m, p)| p.inner(&hermite_tensor(m, &z).unwrap()).unwrap())
            .sum();
        assert_abs_diff_eq!(h.predict(&x).unwrap(), expect, epsilon = 1e-12);
        let batch = h.predict_batch(&[x, x].concat()).unwrap();
        assert_eq!(batch, vec![h.predict(&x).unwrap(); 2]);
    }

    #[test]
    fn rejects_bad_shapes() {
        let b = DMatrix::from_column_slice(2, 1, &[1.0, 1.0]);
        assert!(Hypothesis::new(b, vec![SymTensor::scalar(0.0, 1).unwrap()]).is_err());
        let b = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        assert!(Hypothesis::new(b.clone(), vec![SymTensor::zeros(1, 1).unwrap()]).is_err());
        assert!(Hypothesis::new(b, vec![SymTensor::scalar(0.0, 2).unwrap()]).is_err());
    }

    #[test]
    fn file_round_trip() {
        let b = rotation(5).columns(1, 3).into_owned();
        let coeffs: Vec<SymTensor> = (0..=4)
            .map(|m| SymTensor::from_fn(m, 3, |a| 0.1 * a.iter().sum::<u32>() as f64 - 0.3 * a[0] as f64).unwrap())
            .collect();
        let h = Hypothesis::new(b, coeffs).unwrap();
        let mut buf = Vec::new();
        h.write_to(&mut buf).unwrap();
        let header_len = u64::from_le_bytes(buf[..8].try_into().unwrap()) as usize;
        let header: serde_json::Value = serde_json::from_slice(&buf[8..8 + header_len]).unwrap();
        assert_eq!(header["D"], 4);
        assert_eq!(header["k"], 3);
        assert_eq!(header["basis"].as_array().unwrap().len(), 15);
        assert_eq!(Hypothesis::read_from(&mut buf.as_slice()).unwrap(), h);
        buf.truncate(buf.len() - 3);
        assert!(matches!(Hypothesis::read_from(&mut buf.as_slice()), Err(Error::Parse(_))));
    }
}
