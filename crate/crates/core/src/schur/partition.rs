use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Integer partition `lambda_1 >= lambda_2 >= ... > 0`; trailing zeros are dropped.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    parts: Vec<u32>,
}

impl Partition {
    pub fn new(mut parts: Vec<u32>) -> Result<Self> {
        if parts.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument(format!(
                "partition parts must be non-increasing: {parts:?}"
            )));
        }
        while parts.last() == Some(&0) {
            parts.pop();
        }
        Ok(Self { parts })
    }

    /// `(first, 1, ..., 1)` with `ones` trailing ones.
    pub fn hook(first: u32, ones: usize) -> Result<Self> {
        let mut parts = vec![first];
        parts.extend(std::iter::repeat_n(1, ones));
        Self::new(parts)
    }

    /// Nonzero parts.
    pub fn parts(&self) -> &[u32] {
        &self.parts
    }

    /// Number of nonzero parts.
    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn size(&self) -> usize {
        self.parts.iter().map(|&p| p as usize).sum()
    }

    /// Parts padded with zeros to length `n`; `None` if there are more than `n` parts.
    pub fn padded(&self, n: usize) -> Option<Vec<u32>> {
        if self.parts.len() > n {
            return None;
        }
        let mut p = self.parts.clone();
        p.resize(n, 0);
        Some(p)
    }

    /// All partitions of `size`, largest first part first.
    pub fn all_of_size(size: u32) -> Vec<Self> {
        fn rec(rem: u32, max: u32, cur: &mut Vec<u32>, out: &mut Vec<Partition>) {
            if rem == 0 {
                out.push(Partition { parts: cur.clone() });
                return;
            }
            for p in (1..=rem.min(max)).rev() {
                cur.push(p);
                rec(rem - p, p, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        rec(size, size, &mut Vec::new(), &mut out);
        out
    }
}

impl FromStr for Partition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Self::new(Vec::new());
        }
        let parts = s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<u32>()
                    .map_err(|e| Error::Parse(format!("partition part {p:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(parts)
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, p) in self.parts.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, ")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_form() {
        let p = Partition::new(vec![2, 1, 0, 0]).unwrap();
        assert_eq!(p.parts(), &[2, 1]);
        assert_eq!(p.size(), 3);
        assert_eq!(p.padded(4).unwrap(), vec![2, 1, 0, 0]);
        assert!(p.padded(1).is_none());
        assert!(Partition::new(vec![1, 2]).is_err());
        assert_eq!("2, 1,0".parse::<Partition>().unwrap(), p);
        assert!("2,x".parse::<Partition>().is_err());
        assert_eq!(Partition::hook(3, 2).unwrap().parts(), &[3, 1, 1]);
        assert_eq!(p.to_string(), "(2,1)");
    }

    #[test]
    fn partition_counts() {
        let counts: Vec<usize> = (0..=8).map(|n| Partition::all_of_size(n).len()).collect();
        assert_eq!(counts, vec![1, 1, 2, 3, 5, 7, 11, 15, 22]);
    }
}
