use serde::{Deserialize, Serialize};

/// Row-major `n x dim` block of samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SampleMatrix {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "sample matrix needs at least one column");
        Self { dim, data: Vec::new() }
    }

    pub fn with_capacity(dim: usize, rows: usize) -> Self {
        assert!(dim > 0, "sample matrix needs at least one column");
        Self {
            dim,
            data: Vec::with_capacity(dim * rows),
        }
    }

    /// Wraps a flat row-major buffer; panics if its length is not a multiple of `dim`.
    pub fn from_flat(dim: usize, data: Vec<f64>) -> Self {
        assert!(dim > 0 && data.len() % dim == 0, "flat buffer of {} values is not {dim}-wide", data.len());
        Self { dim, data }
    }

    pub fn from_rows<R: AsRef<[f64]>>(dim: usize, rows: &[R]) -> Self {
        let mut m = Self::with_capacity(dim, rows.len());
        for r in rows {
            m.push_row(r.as_ref());
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_rows(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.dim, "row width mismatch");
        self.data.extend_from_slice(row);
    }

    pub fn extend_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len() % self.dim, 0, "row width mismatch");
        self.data.extend_from_slice(flat);
    }

    /// Column `d` restricted to the first `n` rows.
    pub fn column_prefix(&self, d: usize, n: usize) -> Vec<f64> {
        assert!(d < self.dim);
        self.data[..n * self.dim].iter().skip(d).step_by(self.dim).copied().collect()
    }

    pub fn column(&self, d: usize) -> Vec<f64> {
        self.column_prefix(d, self.n_rows())
    }

    /// Rows `start..end` as a new matrix.
    pub fn slice_rows(&self, start: usize, end: usize) -> SampleMatrix {
        SampleMatrix {
            dim: self.dim,
            data: self.data[start * self.dim..end * self.dim].to_vec(),
        }
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.data
    }

    /// Per-column mean and unbiased (n - 1) standard deviation.
    pub fn column_mean_std(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n_rows() as f64;
        let mut mean = vec![0.0; self.dim];
        for r in self.rows() {
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut ss = vec![0.0; self.dim];
        for r in self.rows() {
            for ((s, x), m) in ss.iter_mut().zip(r).zip(&mean) {
                *s += (x - m) * (x - m);
            }
        }
        let std = ss.iter().map(|s| (s / (n - 1.0)).sqrt()).collect();
        (mean, std)
    }
}
