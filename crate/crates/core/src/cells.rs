use serde::{Deserialize, Serialize};

/// Dense row-major table indexed by a level pair `(ℓ, m)` of factors `(j, k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Clone> CellMatrix<T> {
    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for l in 0..rows {
            for m in 0..cols {
                data.push(f(l, m));
            }
        }
        Self { rows, cols, data }
    }

    /// The same cells viewed from the `(k, j)` side.
    pub fn transposed(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |m, l| self.get(l, m).clone())
    }

    pub fn map<U: Clone>(&self, f: impl Fn(&T) -> U) -> CellMatrix<U> {
        CellMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(f).collect(),
        }
    }
}

impl<T> CellMatrix<T> {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, l: usize, m: usize) -> &T {
        &self.data[l * self.cols + m]
    }

    pub fn get_mut(&mut self, l: usize, m: usize) -> &mut T {
        &mut self.data[l * self.cols + m]
    }

    pub fn set(&mut self, l: usize, m: usize, value: T) {
        self.data[l * self.cols + m] = value;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// Iterates `(ℓ, m, value)` in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &T)> {
        let cols = self.cols;
        self.data
            .iter()
            .enumerate()
            .map(move |(i, v)| (i / cols, i % cols, v))
    }
}

impl CellMatrix<f64> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn scale(&mut self, a: f64) {
        self.data.iter_mut().for_each(|v| *v *= a);
    }
}
