//! Flat row-major datasets for training and evaluation.

use crate::error::{Error, Result};

/// A batch of input points and scalar targets. Inputs are stored flat and
/// row-major: point `i` occupies `xs[i * dim .. (i + 1) * dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    /// Input dimension.
    pub dim: usize,
    /// Flat inputs, `len() * dim` values.
    pub xs: Vec<f64>,
    /// Scalar targets, one per point.
    pub ys: Vec<f64>,
}

impl DataSet {
    /// Validate shapes and finiteness.
    pub fn new(dim: usize, xs: Vec<f64>, ys: Vec<f64>) -> Result<DataSet> {
        if dim == 0 {
            return Err(Error::validation("dataset: dimension must be positive"));
        }
        if xs.len() != ys.len() * dim {
            return Err(Error::validation(format!(
                "dataset: {} inputs is not {} points of dimension {dim}",
                xs.len(),
                ys.len()
            )));
        }
        if xs.iter().chain(ys.iter()).any(|v| !v.is_finite()) {
            return Err(Error::validation("dataset: all values must be finite"));
        }
        Ok(DataSet { dim, xs, ys })
    }

    /// Number of points.
    #[inline]
    pub fn len(&self) -> usize {
        self.ys.len()
    }

    /// True when the dataset holds no points.
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    /// Input coordinates of point `i`.
    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.xs[i * self.dim..(i + 1) * self.dim]
    }

    /// Copy the points selected by `idx` into flat minibatch buffers,
    /// clearing them first.
    pub fn gather(&self, idx: &[usize], xs_out: &mut Vec<f64>, ys_out: &mut Vec<f64>) {
        xs_out.clear();
        ys_out.clear();
        xs_out.reserve(idx.len() * self.dim);
        ys_out.reserve(idx.len());
        for &i in idx {
            xs_out.extend_from_slice(self.point(i));
            ys_out.push(self.ys[i]);
        }
    }
}
