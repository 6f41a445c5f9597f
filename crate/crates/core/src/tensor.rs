//! Dense row-major `f64` arrays.
//!
//! `Tensor` carries activations, weights and gradients for every layer. It
//! deliberately supports only the handful of bulk operations the network
//! needs: matrix products (plain and with either operand transposed),
//! element maps, and grouped argmax for maxout and pooling.
//!
//! Products split work across output rows only, so every output element is
//! accumulated in the same order regardless of thread count and results are
//! bit-identical between single- and multi-threaded runs.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Below this many multiply-adds a product runs on the calling thread.
const PAR_THRESHOLD: usize = 1 << 16;

#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.data.len() <= 16 {
            write!(f, "Tensor{:?} {:?}", self.shape, self.data)
        } else {
            write!(f, "Tensor{:?} [{} elements]", self.shape, self.data.len())
        }
    }
}

impl Tensor {
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "tensor dimensions must be positive, got {shape:?}"
            )));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::InvalidArgument(format!(
                "shape {shape:?} needs {expected} elements, got {}",
                data.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    /// 1-D tensor from a slice. Panics on an empty slice.
    pub fn from_slice(data: &[f64]) -> Self {
        Tensor::new(&[data.len()], data.to_vec()).expect("non-empty slice")
    }

    /// 2-D tensor from nested rows. Panics on ragged or empty input.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Tensor::new(&[rows.len(), cols], data).expect("non-empty rows")
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Tensor::filled(shape, 0.0)
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        let n = shape.iter().product();
        assert!(n > 0, "tensor dimensions must be positive, got {shape:?}");
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Tensor::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> f64) -> Self {
        let n: usize = shape.iter().product();
        assert!(n > 0, "tensor dimensions must be positive, got {shape:?}");
        Tensor {
            shape: shape.to_vec(),
            data: (0..n).map(&mut f).collect(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Row `i` of a tensor viewed as `[shape[0], rest]`.
    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.data.len() / self.shape[0];
        &self.data[i * w..(i + 1) * w]
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() || shape.contains(&0) {
            return Err(Error::shape("reshape", &self.shape, shape));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    /// Views the tensor as `[shape[0], product(rest)]`.
    pub fn flatten_batch(self) -> Self {
        let b = self.shape[0];
        let w = self.data.len() / b;
        Tensor {
            shape: vec![b, w],
            data: self.data,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(Error::shape("zip_map", &self.shape, &other.shape));
        }
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn scale(&self, c: f64) -> Tensor {
        self.map(|x| x * c)
    }

    /// `self += c * other`.
    pub fn add_scaled(&mut self, other: &Tensor, c: f64) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::shape("add_scaled", &self.shape, &other.shape));
        }
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
        Ok(())
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    fn dims2(&self, op: &'static str) -> Result<(usize, usize)> {
        match self.shape.as_slice() {
            &[r, c] => Ok((r, c)),
            _ => Err(Error::InvalidArgument(format!(
                "{op} expects a rank-2 tensor, got shape {:?}",
                self.shape
            ))),
        }
    }

    /// `self[m,k] · other[k,n]`.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let (m, k) = self.dims2("matmul")?;
        let (k2, n) = other.dims2("matmul")?;
        if k != k2 {
            return Err(Error::shape("matmul", &self.shape, &other.shape));
        }
        let b = &other.data;
        let kernel = |(i, out): (usize, &mut [f64])| {
            let a_row = &self.data[i * k..(i + 1) * k];
            for (t, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let b_row = &b[t * n..(t + 1) * n];
                for (o, &bv) in out.iter_mut().zip(b_row) {
                    *o += a * bv;
                }
            }
        };
        let mut data = vec![0.0; m * n];
        if m * n * k >= PAR_THRESHOLD {
            data.par_chunks_mut(n).enumerate().for_each(kernel);
        } else {
            data.chunks_mut(n).enumerate().for_each(kernel);
        }
        Ok(Tensor {
            shape: vec![m, n],
            data,
        })
    }

    /// `self[m,k] · other[n,k]ᵀ`.
    pub fn matmul_transposed(&self, other: &Tensor) -> Result<Tensor> {
        let (m, k) = self.dims2("matmul_transposed")?;
        let (n, k2) = other.dims2("matmul_transposed")?;
        if k != k2 {
            return Err(Error::shape("matmul_transposed", &self.shape, &other.shape));
        }
        let b = &other.data;
        let kernel = |(i, out): (usize, &mut [f64])| {
            let a_row = &self.data[i * k..(i + 1) * k];
            for (j, o) in out.iter_mut().enumerate() {
                let b_row = &b[j * k..(j + 1) * k];
                *o = a_row.iter().zip(b_row).map(|(x, y)| x * y).sum();
            }
        };
        let mut data = vec![0.0; m * n];
        if m * n * k >= PAR_THRESHOLD {
            data.par_chunks_mut(n).enumerate().for_each(kernel);
        } else {
            data.chunks_mut(n).enumerate().for_each(kernel);
        }
        Ok(Tensor {
            shape: vec![m, n],
            data,
        })
    }

    /// `self[k,m]ᵀ · other[k,n]`.
    pub fn transposed_matmul(&self, other: &Tensor) -> Result<Tensor> {
        let (k, m) = self.dims2("transposed_matmul")?;
        let (k2, n) = other.dims2("transposed_matmul")?;
        if k != k2 {
            return Err(Error::shape("transposed_matmul", &self.shape, &other.shape));
        }
        let a = &self.data;
        let b = &other.data;
        let kernel = |(i, out): (usize, &mut [f64])| {
            for t in 0..k {
                let av = a[t * m + i];
                if av == 0.0 {
                    continue;
                }
                let b_row = &b[t * n..(t + 1) * n];
                for (o, &bv) in out.iter_mut().zip(b_row) {
                    *o += av * bv;
                }
            }
        };
        let mut data = vec![0.0; m * n];
        if m * n * k >= PAR_THRESHOLD {
            data.par_chunks_mut(n).enumerate().for_each(kernel);
        } else {
            data.chunks_mut(n).enumerate().for_each(kernel);
        }
        Ok(Tensor {
            shape: vec![m, n],
            data,
        })
    }

    /// Max over consecutive groups of `k` along the last axis.
    ///
    /// Returns the group maxima (last axis shrunk by `k`) and, per group, the
    /// in-group offset of the first maximal element.
    pub fn argmax_over_groups(&self, k: usize) -> Result<(Tensor, Vec<usize>)> {
        let last = *self.shape.last().expect("rank >= 1");
        if k == 0 || !last.is_multiple_of(k) {
            return Err(Error::InvalidArgument(format!(
                "last axis {last} of {:?} is not divisible by group size {k}",
                self.shape
            )));
        }
        let groups = self.data.len() / k;
        let mut values = Vec::with_capacity(groups);
        let mut indices = Vec::with_capacity(groups);
        for g in self.data.chunks_exact(k) {
            let mut best = 0;
            for (j, &v) in g.iter().enumerate().skip(1) {
                if v > g[best] {
                    best = j;
                }
            }
            values.push(g[best]);
            indices.push(best);
        }
        let mut shape = self.shape.clone();
        *shape.last_mut().unwrap() = last / k;
        Ok((Tensor { shape, data: values }, indices))
    }

    /// Little-endian binary encoding: `u32` rank, `u32` dims, `f64` payload.
    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(&(self.shape.len() as u32).to_le_bytes())?;
        for &d in &self.shape {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(self.data.len() * 8);
        for &x in &self.data {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        w.write_all(&buf)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + 4 * self.rank() + 8 * self.len());
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    /// Decodes one tensor from `bytes` starting at `offset`; returns the
    /// tensor and the offset just past it.
    pub fn decode(bytes: &[u8], offset: usize) -> Result<(Tensor, usize)> {
        let mut cur = ByteCursor { bytes, pos: offset };
        let rank = cur.u32()? as usize;
        if rank == 0 {
            return Err(cur.error("tensor rank must be at least 1"));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            let d = cur.u32()? as usize;
            if d == 0 {
                return Err(cur.error("zero tensor dimension"));
            }
            shape.push(d);
        }
        let n = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| cur.error("tensor size overflows"))?;
        let mut data = Vec::with_capacity(n.min(bytes.len() / 8 + 1));
        for _ in 0..n {
            data.push(cur.f64()?);
        }
        Ok((Tensor { shape, data }, cur.pos))
    }
}

/// Bounds-checked little-endian reader that reports failures with the byte
/// offset at which they occurred.
pub(crate) struct ByteCursor<'a> {
    pub bytes: &'a [u8],
    pub pos: usize,
}

impl<'a> ByteCursor<'a> {
    pub fn error(&self, reason: &str) -> Error {
        Error::Parse {
            offset: self.pos as u64,
            reason: reason.to_string(),
        }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos.min(self.bytes.len()) < n {
            return Err(self.error(&format!(
                "truncated payload: need {n} bytes, {} remain",
                self.bytes.len().saturating_sub(self.pos)
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64> {
        let b = self.take(8)?;
        Ok(f64::from_le_bytes(b.try_into().unwrap()))
    }

    /// Reads up to and including the next `\n`, returning the line without it.
    pub fn line(&mut self) -> Result<&'a str> {
        let rest = &self.bytes[self.pos.min(self.bytes.len())..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| self.error("unterminated text line"))?;
        let line = std::str::from_utf8(&rest[..end]).map_err(|_| self.error("non-UTF-8 text"))?;
        self.pos += end + 1;
        Ok(line)
    }
}
