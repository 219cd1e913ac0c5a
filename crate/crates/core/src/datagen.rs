//! Ground-truth networks `F(x) = sum_i w_i ReLU(v_i . x)`, Gaussian sampling and
//! labeled sample files.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream_rng};
use crate::symtensor::io::{read_f64s, read_u64, write_f64s};

/// Samples per random stream; chunk `c` of a draw uses stream `c` of the seed.
pub const SAMPLE_CHUNK: usize = 1024;

const UNIT_TOLERANCE: f64 = 1e-12;
const NOISE_TAG: u64 = 0x6e6f697365;

/// One-hidden-layer ReLU network with unit directions and `sum |w_i| <= 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNetwork")]
pub struct ReluNetwork {
    dim: usize,
    width: usize,
    weights: Vec<f64>,
    directions: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawNetwork {
    dim: usize,
    width: usize,
    weights: Vec<f64>,
    directions: Vec<Vec<f64>>,
}

impl TryFrom<RawNetwork> for ReluNetwork {
    type Error = Error;

    fn try_from(raw: RawNetwork) -> Result<Self> {
        let net = Self::new(raw.weights, raw.directions)?;
        if net.dim != raw.dim || net.width != raw.width {
            return Err(Error::InvalidNetwork(format!(
                "declared dim {} width {} but data has dim {} width {}",
                raw.dim, raw.width, net.dim, net.width
            )));
        }
        Ok(net)
    }
}

impl ReluNetwork {
    pub fn new(weights: Vec<f64>, directions: Vec<Vec<f64>>) -> Result<Self> {
        let width = weights.len();
        if width == 0 || directions.len() != width {
            return Err(Error::InvalidNetwork(format!(
                "{width} weights and {} directions",
                directions.len()
            )));
        }
        let dim = directions[0].len();
        if dim == 0 || directions.iter().any(|v| v.len() != dim) {
            return Err(Error::InvalidNetwork("directions must share a positive dimension".into()));
        }
        if weights.iter().chain(directions.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidNetwork("non-finite parameter".into()));
        }
        let l1: f64 = weights.iter().map(|w| w.abs()).sum();
        if l1 > 1.0 + UNIT_TOLERANCE {
            return Err(Error::InvalidNetwork(format!("sum of |w_i| is {l1} > 1")));
        }
        for (i, v) in directions.iter().enumerate() {
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > UNIT_TOLERANCE {
                return Err(Error::InvalidNetwork(format!("direction {i} has norm {norm}")));
            }
        }
        Ok(Self {
            dim,
            width,
            weights,
            directions,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn directions(&self) -> &[Vec<f64>] {
        &self.directions
    }

    /// `F(x)`. Panics if `x` has the wrong length.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim, "input dimension");
        self.weights
            .iter()
            .zip(&self.directions)
            .map(|(w, v)| w * v.iter().zip(x).map(|(a, b)| a * b).sum::<f64>().max(0.0))
            .sum()
    }

    /// `||sum_i w_i v_i||`.
    pub fn linear_part_norm(&self) -> f64 {
        (0..self.dim)
            .map(|j| {
                let s: f64 = self.weights.iter().zip(&self.directions).map(|(w, v)| w * v[j]).sum();
                s * s
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut f, self)?;
        f.write_all(b"\n")?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = BufReader::new(File::open(path)?);
        serde_json::from_reader(f).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }
}

/// A labeled point borrowed from [`Samples`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledSample<'a> {
    pub x: &'a [f64],
    pub y: f64,
}

/// Labeled points stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    dim: usize,
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl Samples {
    pub fn from_parts(dim: usize, xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if dim == 0 || xs.len() != dim * ys.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} coordinates for {} samples of dimension {dim}",
                xs.len(),
                ys.len()
            )));
        }
        Ok(Self { dim, xs, ys })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.xs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn y(&self, i: usize) -> f64 {
        self.ys[i]
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn get(&self, i: usize) -> LabeledSample<'_> {
        LabeledSample {
            x: self.x(i),
            y: self.y(i),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = LabeledSample<'_>> {
        self.xs
            .chunks_exact(self.dim)
            .zip(&self.ys)
            .map(|(x, &y)| LabeledSample { x, y })
    }

    /// Samples `range` as a new set.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            dim: self.dim,
            xs: self.xs[range.start * self.dim..range.end * self.dim].to_vec(),
            ys: self.ys[range].to_vec(),
        }
    }

    /// Applies `f` to every point, keeping the labels.
    pub fn map_points(&self, new_dim: usize, mut f: impl FnMut(&[f64], &mut [f64])) -> Result<Self> {
        let mut xs = vec![0.0; new_dim * self.len()];
        for (x, out) in self.xs.chunks_exact(self.dim).zip(xs.chunks_exact_mut(new_dim.max(1))) {
            f(x, out);
        }
        Self::from_parts(new_dim, xs, self.ys.clone())
    }

    /// Count and dimension as little-endian `u64`, then per sample `x` followed by `y`
    /// as little-endian `f64`.
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        w.write_all(&(self.dim as u64).to_le_bytes())?;
        let mut row = Vec::with_capacity(self.dim + 1);
        for s in self.iter() {
            row.clear();
            row.extend_from_slice(s.x);
            row.push(s.y);
            write_f64s(w, &row)?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let header = |e: Error| match e {
            Error::Io(io) if io.kind() == std::io::ErrorKind::UnexpectedEof => {
                Error::Parse("truncated samples header".into())
            }
            other => other,
        };
        let n = read_u64(r).map_err(header)?;
        let dim = read_u64(r).map_err(header)?;
        if dim == 0 || dim > 1 << 20 || n > 1 << 40 {
            return Err(Error::Parse(format!("bad samples header: count {n}, dim {dim}")));
        }
        let (n, dim) = (n as usize, dim as usize);
        let mut xs = Vec::with_capacity(n.min(1 << 24) * dim);
        let mut ys = Vec::with_capacity(n.min(1 << 24));
        const ROWS: usize = 4096;
        let mut done = 0;
        while done < n {
            let rows = ROWS.min(n - done);
            let block = read_f64s(r, rows * (dim + 1)).map_err(|e| match e {
                Error::Io(io) if io.kind() == std::io::ErrorKind::UnexpectedEof => Error::Parse(
                    format!("truncated samples body: header promises {n} samples"),
                ),
                other => other,
            })?;
            for row in block.chunks_exact(dim + 1) {
                if row.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Parse("non-finite value in samples".into()));
                }
                xs.extend_from_slice(&row[..dim]);
                ys.push(row[dim]);
            }
            done += rows;
        }
        Self::from_parts(dim, xs, ys)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = BufWriter::new(File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut f = BufReader::new(File::open(path)?);
        let s = Self::read_from(&mut f)?;
        let mut rest = [0u8; 1];
        if f.read(&mut rest)? != 0 {
            return Err(Error::Parse(format!("{}: trailing bytes after samples", path.display())));
        }
        Ok(s)
    }
}

/// `n` standard Gaussian points in `R^dim`, row-major.
pub fn gaussian_points(dim: usize, n: usize, seed: u64) -> Vec<f64> {
    let chunks: Vec<Vec<f64>> = (0..n.div_ceil(SAMPLE_CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c as u64);
            let rows = SAMPLE_CHUNK.min(n - c * SAMPLE_CHUNK);
            (0..rows * dim).map(|_| rng.sample(StandardNormal)).collect()
        })
        .collect();
    chunks.concat()
}

/// `n` labeled samples `(x, F(x))` with `x ~ N(0, I)`.
pub fn sample(net: &ReluNetwork, n: usize, seed: u64) -> Samples {
    sample_with_noise(net, n, seed, 0.0)
}

/// As [`sample`], adding independent `N(0, noise_sigma^2)` noise to each label.
pub fn sample_with_noise(net: &ReluNetwork, n: usize, seed: u64, noise_sigma: f64) -> Samples {
    let d = net.dim();
    let chunks: Vec<(Vec<f64>, Vec<f64>)> = (0..n.div_ceil(SAMPLE_CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c as u64);
            let mut noise = stream_rng(derive_seed(seed, NOISE_TAG), c as u64);
            let rows = SAMPLE_CHUNK.min(n - c * SAMPLE_CHUNK);
            let mut xs = Vec::with_capacity(rows * d);
            let mut ys = Vec::with_capacity(rows);
            for _ in 0..rows {
                let start = xs.len();
                xs.extend((0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
                let mut y = net.evaluate(&xs[start..]);
                if noise_sigma > 0.0 {
                    y += noise_sigma * noise.sample::<f64, _>(StandardNormal);
                }
                ys.push(y);
            }
            (xs, ys)
        })
        .collect();
    let mut xs = Vec::with_capacity(n * d);
    let mut ys = Vec::with_capacity(n);
    for (cx, cy) in chunks {
        xs.extend(cx);
        ys.extend(cy);
    }
    Samples { dim: d, xs, ys }
}

/// Instance families for [`random_network`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Profile {
    /// Haar-random directions, positive Dirichlet weights summing to one.
    Generic,
    /// Directions within angle `theta / 2` of a common axis, signed weights.
    NearParallel { theta: f64 },
    /// Signed weights with `||sum_i w_i v_i|| <= 0.01 sum_i |w_i|`.
    Cancelling,
}

impl Profile {
    pub fn parse(name: &str, theta: f64) -> Result<Self> {
        match name {
            "generic" => Ok(Self::Generic),
            "near-parallel" => {
                if !(theta > 0.0 && theta < std::f64::consts::PI) {
                    return Err(Error::InvalidArgument(format!("theta must lie in (0, pi), got {theta}")));
                }
                Ok(Self::NearParallel { theta })
            }
            "cancelling" => Ok(Self::Cancelling),
            other => Err(Error::InvalidArgument(format!(
                "unknown profile {other:?}; expected generic, near-parallel or cancelling"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Generic => "generic",
            Self::NearParallel { .. } => "near-parallel",
            Self::Cancelling => "cancelling",
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NearParallel { theta } => write!(f, "near-parallel(theta={theta})"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s, 0.05)
    }
}

/// Relative tilt that keeps the last cancelling direction out of the span of the others.
pub const CANCEL_TILT: f64 = 0.002;

fn unit_vector(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-8 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Unit vector orthogonal to every vector in `against` (assumed orthonormal).
fn orthogonal_unit(rng: &mut ChaCha8Rng, d: usize, against: &[&[f64]]) -> Vec<f64> {
    loop {
        let mut v = unit_vector(rng, d);
        for a in against {
            let c = dot(&v, a);
            v.iter_mut().zip(a.iter()).for_each(|(x, y)| *x -= c * y);
        }
        let n = dot(&v, &v).sqrt();
        if n > 1e-6 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn dirichlet(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let g: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1) + 1e-12).collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|x| x / s).collect()
}

fn renormalize(mut weights: Vec<f64>, mut dirs: Vec<Vec<f64>>) -> Result<ReluNetwork> {
    for v in &mut dirs {
        let n = dot(v, v).sqrt();
        v.iter_mut().for_each(|x| *x /= n);
    }
    let l1: f64 = weights.iter().map(|w| w.abs()).sum();
    if l1 > 0.0 {
        weights.iter_mut().for_each(|w| *w /= l1);
    }
    ReluNetwork::new(weights, dirs)
}

/// Random instance of the given family; normalizes to satisfy the network invariants.
pub fn random_network(d: usize, k: usize, profile: Profile, seed: u64) -> Result<ReluNetwork> {
    if k == 0 || d < k {
        return Err(Error::InvalidArgument(format!("need 1 <= k <= d, got d = {d}, k = {k}")));
    }
    let mut rng = stream_rng(seed, 0);
    match profile {
        Profile::Generic => {
            let dirs = (0..k).map(|_| unit_vector(&mut rng, d)).collect();
            renormalize(dirichlet(&mut rng, k), dirs)
        }
        Profile::NearParallel { theta } => {
            if !(theta > 0.0 && theta < std::f64::consts::PI) {
                return Err(Error::InvalidArgument(format!("theta must lie in (0, pi), got {theta}")));
            }
            let axis = unit_vector(&mut rng, d);
            let dirs = (0..k)
                .map(|_| {
                    let u = orthogonal_unit(&mut rng, d, &[&axis]);
                    let angle = rng.random_range(0.0..=0.5 * theta);
                    let (s, c) = angle.sin_cos();
                    axis.iter().zip(&u).map(|(a, b)| c * a + s * b).collect()
                })
                .collect();
            let weights = dirichlet(&mut rng, k)
                .into_iter()
                .map(|w| if rng.random::<bool>() { w } else { -w })
                .collect();
            renormalize(weights, dirs)
        }
        Profile::Cancelling => {
            if k < 2 {
                return Err(Error::InvalidArgument("the cancelling profile needs k >= 2".into()));
            }
            let mut dirs: Vec<Vec<f64>> = (0..k - 1).map(|_| unit_vector(&mut rng, d)).collect();
            let mut weights = dirichlet(&mut rng, k - 1);
            let s: Vec<f64> = (0..d)
                .map(|j| weights.iter().zip(&dirs).map(|(w, v)| w * v[j]).sum())
                .collect();
            let norm = dot(&s, &s).sqrt();
            let s_hat: Vec<f64> = s.iter().map(|x| x / norm).collect();
            let u = orthogonal_unit(&mut rng, d, &[&s_hat]);
            dirs.push(s_hat.iter().zip(&u).map(|(a, b)| -a + CANCEL_TILT * b).collect());
            weights.push(norm);
            renormalize(weights, dirs)
        }
    }
}
