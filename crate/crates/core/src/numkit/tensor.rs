use nalgebra::{DMatrix, DVector};

/// Dense rank-3 array; entry `[i, j, k]` is stored row-major.
///
/// Second derivatives of a vector function use the layout
/// `[i, j, k] = d^2 f_i / (d a_j d b_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dims: [usize; 3],
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(d0: usize, d1: usize, d2: usize) -> Self {
        Self {
            dims: [d0, d1, d2],
            data: vec![0.0; d0 * d1 * d2],
        }
    }

    pub fn from_vec(d0: usize, d1: usize, d2: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), d0 * d1 * d2, "tensor data length");
        Self {
            dims: [d0, d1, d2],
            data,
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    #[inline]
    fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.idx(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let idx = self.idx(i, j, k);
        self.data[idx] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Swaps the last two indices.
    pub fn transpose_last(&self) -> Tensor3 {
        let [a, b, c] = self.dims;
        let mut out = Tensor3::zeros(a, c, b);
        for i in 0..a {
            for j in 0..b {
                for k in 0..c {
                    out.set(i, k, j, self.get(i, j, k));
                }
            }
        }
        out
    }

    /// `sum_k T[i, j, k] v[k]`.
    pub fn contract_last(&self, v: &DVector<f64>) -> DMatrix<f64> {
        let [a, b, c] = self.dims;
        assert_eq!(v.len(), c);
        DMatrix::from_fn(a, b, |i, j| (0..c).map(|k| self.get(i, j, k) * v[k]).sum())
    }

    /// `sum_j T[i, j, k] v[j]`.
    pub fn contract_middle(&self, v: &DVector<f64>) -> DMatrix<f64> {
        let [a, b, c] = self.dims;
        assert_eq!(v.len(), b);
        DMatrix::from_fn(a, c, |i, k| (0..b).map(|j| self.get(i, j, k) * v[j]).sum())
    }

    /// `sum_i w[i] T[i, j, k]`.
    pub fn contract_first(&self, w: &DVector<f64>) -> DMatrix<f64> {
        let [a, b, c] = self.dims;
        assert_eq!(w.len(), a);
        DMatrix::from_fn(b, c, |j, k| (0..a).map(|i| w[i] * self.get(i, j, k)).sum())
    }

    /// `[i, j, l] = sum_k T[i, j, k] M[k, l]`.
    pub fn mul_last(&self, m: &DMatrix<f64>) -> Tensor3 {
        let [a, b, c] = self.dims;
        assert_eq!(m.nrows(), c);
        let l = m.ncols();
        let mut out = Tensor3::zeros(a, b, l);
        for i in 0..a {
            for j in 0..b {
                for q in 0..l {
                    let s = (0..c).map(|k| self.get(i, j, k) * m[(k, q)]).sum();
                    out.set(i, j, q, s);
                }
            }
        }
        out
    }

    /// `[i, l, k] = sum_j T[i, j, k] M[j, l]`.
    pub fn mul_middle(&self, m: &DMatrix<f64>) -> Tensor3 {
        self.transpose_last().mul_last(m).transpose_last()
    }

    /// `[q, j, k] = sum_i M[q, i] T[i, j, k]`.
    pub fn left_mul(&self, m: &DMatrix<f64>) -> Tensor3 {
        let [a, b, c] = self.dims;
        assert_eq!(m.ncols(), a);
        let mut out = Tensor3::zeros(m.nrows(), b, c);
        for q in 0..m.nrows() {
            for i in 0..a {
                let w = m[(q, i)];
                if w == 0.0 {
                    continue;
                }
                for j in 0..b {
                    for k in 0..c {
                        let idx = out.idx(q, j, k);
                        out.data[idx] += w * self.get(i, j, k);
                    }
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Tensor3) -> Tensor3 {
        assert_eq!(self.dims, other.dims);
        Tensor3 {
            dims: self.dims,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Tensor3) -> Tensor3 {
        assert_eq!(self.dims, other.dims);
        Tensor3 {
            dims: self.dims,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contractions_agree() {
        let t = Tensor3::from_vec(2, 3, 2, (0..12).map(|v| v as f64).collect());
        let v = DVector::from_vec(vec![1.0, -1.0]);
        let m = t.contract_last(&v);
        assert_eq!(m[(1, 2)], t.get(1, 2, 0) - t.get(1, 2, 1));
        let tm = t.mul_last(&DMatrix::from_column_slice(2, 1, &[1.0, -1.0]));
        assert_eq!(tm.get(1, 2, 0), m[(1, 2)]);
        let tt = t.transpose_last();
        assert_eq!(tt.get(1, 0, 2), t.get(1, 2, 0));
    }
}
