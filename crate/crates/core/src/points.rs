use crate::error::{arg_err, Error, Result};
use alloc::vec::Vec;

/// Row-major `n x d` collection of input points.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Points {
    dim: usize,
    data: Vec<f64>,
}

impl Points {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return arg_err("points need dimension >= 1");
        }
        if data.len() % dim != 0 {
            return arg_err("flat point buffer length is not a multiple of the dimension");
        }
        Ok(Self { dim, data })
    }

    pub fn empty(dim: usize) -> Self {
        Self { dim: dim.max(1), data: Vec::new() }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = match rows.first() {
            Some(r) => r.as_ref().len(),
            None => return arg_err("cannot infer dimension from zero rows"),
        };
        let mut data = Vec::with_capacity(dim * rows.len());
        for r in rows {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::Dimension { expected: dim, got: r.len() });
            }
            data.extend_from_slice(r);
        }
        Self::new(dim, data)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn push(&mut self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Dimension { expected: self.dim, got: x.len() });
        }
        self.data.extend_from_slice(x);
        Ok(())
    }

    /// Rows selected by index, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self { dim: self.dim, data }
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.data
    }
}
