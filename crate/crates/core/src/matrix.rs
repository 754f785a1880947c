use crate::error::{Error, Result};

/// Dense row-major `n x K` matrix: one row per node, one column per class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ClassMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ClassMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        ClassMatrix {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    what: "matrix row",
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(ClassMatrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// Indicator matrix of a labelling.
    pub fn one_hot(labels: &[usize], cols: usize) -> Self {
        let mut m = Self::zeros(labels.len(), cols);
        for (i, &c) in labels.iter().enumerate() {
            m.row_mut(i)[c] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.data[i * self.cols + k]
    }

    pub fn set(&mut self, i: usize, k: usize, v: f64) {
        self.data[i * self.cols + k] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.cols.max(1)).take(self.rows)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Euclidean projection of `v` onto the probability simplex (sort based).
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &x) in sorted.iter().enumerate() {
        cumsum += x;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}
