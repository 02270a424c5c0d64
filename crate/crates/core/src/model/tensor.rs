//! Minimal row-major matrix with the three products the network needs.

use serde::{Deserialize, Serialize};

use super::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Mat<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<S>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[S] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [S] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn fill(&mut self, v: S) {
        self.data.fill(v);
    }
}

/// out[i,j] = sum_k x[i,k] · w[k,j]
pub fn matmul<S: Scalar>(x: &Mat<S>, w: &Mat<S>, out: &mut Mat<S>) {
    assert_eq!(x.cols(), w.rows());
    assert_eq!(out.rows(), x.rows());
    assert_eq!(out.cols(), w.cols());
    out.fill(S::zero());
    for i in 0..x.rows() {
        let xi = x.row(i);
        let oi = out.row_mut(i);
        for (k, &xik) in xi.iter().enumerate() {
            let wk = w.row(k);
            for (o, &wkj) in oi.iter_mut().zip(wk) {
                *o += xik * wkj;
            }
        }
    }
}

/// out[i,j] = sum_k x[i,k] · w[j,k]  (multiply by the transpose of `w`)
pub fn matmul_transposed<S: Scalar>(x: &Mat<S>, w: &Mat<S>, out: &mut Mat<S>) {
    assert_eq!(x.cols(), w.cols());
    assert_eq!(out.rows(), x.rows());
    assert_eq!(out.cols(), w.rows());
    for i in 0..x.rows() {
        let xi = x.row(i);
        let oi = out.row_mut(i);
        for (j, o) in oi.iter_mut().enumerate() {
            *o = dot(xi, w.row(j));
        }
    }
}

/// acc[k,j] += sum_i x[i,k] · y[i,j]  (xᵀ·y, accumulated)
pub fn accumulate_outer<S: Scalar>(x: &Mat<S>, y: &Mat<S>, acc: &mut Mat<S>) {
    assert_eq!(x.rows(), y.rows());
    assert_eq!(acc.rows(), x.cols());
    assert_eq!(acc.cols(), y.cols());
    for i in 0..x.rows() {
        let xi = x.row(i);
        let yi = y.row(i);
        for (k, &xik) in xi.iter().enumerate() {
            let ak = acc.row_mut(k);
            for (a, &yij) in ak.iter_mut().zip(yi) {
                *a += xik * yij;
            }
        }
    }
}

pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn add_assign<S: Scalar>(dst: &mut [S], src: &[S]) {
    debug_assert_eq!(dst.len(), src.len());
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

pub fn add_bias<S: Scalar>(m: &mut Mat<S>, bias: &[S]) {
    assert_eq!(m.cols(), bias.len());
    for r in 0..m.rows() {
        add_assign(m.row_mut(r), bias);
    }
}

/// Numerically stable in-place softmax.
pub fn softmax_in_place<S: Scalar>(v: &mut [S]) {
    let max = v.iter().copied().fold(S::neg_infinity(), S::max);
    let mut sum = S::zero();
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x = *x / sum;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn products_agree_with_hand_values() {
        let x = Mat::from_vec(2, 3, vec![1.0f64, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let w = Mat::from_vec(3, 2, vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]);
        let mut out = Mat::zeros(2, 2);
        matmul(&x, &w, &mut out);
        assert_eq!(out.data(), &[58.0, 64.0, 139.0, 154.0]);

        let wt = Mat::from_vec(2, 3, vec![7.0, 9.0, 11.0, 8.0, 10.0, 12.0]);
        let mut out_t = Mat::zeros(2, 2);
        matmul_transposed(&x, &wt, &mut out_t);
        assert_eq!(out.data(), out_t.data());

        let mut acc = Mat::zeros(3, 2);
        accumulate_outer(&x, &Mat::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]), &mut acc);
        assert_eq!(acc.data(), &[1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
    }

    #[test]
    fn softmax_normalizes() {
        let mut v = [1.0f64, 2.0, 3.0];
        softmax_in_place(&mut v);
        let sum: f64 = v.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(v[2] > v[1] && v[1] > v[0]);
    }
}
