use super::ModelError;

/// Dense square matrix with finite nonnegative entries, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct NonnegMatrix {
    n: usize,
    data: Vec<f64>,
}

impl NonnegMatrix {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self, ModelError> {
        if data.len() != n * n {
            return Err(ModelError::DimensionMismatch {
                expected: n * n,
                found: data.len(),
            });
        }
        for (k, &v) in data.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(ModelError::InvalidEntry {
                    row: k / n.max(1),
                    col: k % n.max(1),
                    value: v,
                });
            }
        }
        Ok(NonnegMatrix { n, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, ModelError> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            if r.len() != n {
                return Err(ModelError::DimensionMismatch {
                    expected: n,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(n, data)
    }

    pub fn zeros(n: usize) -> Self {
        NonnegMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub(crate) fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(v.is_finite() && v >= 0.0);
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).iter().sum()).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        let mut t = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                t.data[j * n + i] = self.data[i * n + j];
            }
        }
        t
    }

    /// Principal submatrix on `idx` (in the given order).
    pub fn submatrix(&self, idx: &[usize]) -> Self {
        let m = idx.len();
        let mut data = Vec::with_capacity(m * m);
        for &i in idx {
            for &j in idx {
                data.push(self.get(i, j));
            }
        }
        NonnegMatrix { n: m, data }
    }

    /// Entrywise scaling by `c >= 0`.
    pub fn scaled(&self, c: f64) -> Self {
        assert!(c >= 0.0 && c.is_finite());
        NonnegMatrix {
            n: self.n,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    pub fn max_entry(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    /// Smallest strictly positive entry, if any.
    pub fn min_positive_entry(&self) -> Option<f64> {
        self.data
            .iter()
            .copied()
            .filter(|&v| v > 0.0)
            .fold(None, |m, v| Some(m.map_or(v, |m: f64| m.min(v))))
    }
}
