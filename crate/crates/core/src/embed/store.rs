//! Dense row-major parameter storage.
//!
//! [`Matrix`] is an ordinary owned matrix. [`HogwildMatrix`] stores `f32`
//! values in relaxed atomics so that several workers can read and update the
//! same rows without locks; lost updates are tolerated.

use std::sync::atomic::{AtomicU32, Ordering};

use num_traits::Float;

/// Row access used by the training kernels.
///
/// All column ranges are `offset..offset + len` of the passed slice.
pub trait Rows<T: Float> {
    fn n_rows(&self) -> usize;
    fn n_cols(&self) -> usize;
    fn dot(&self, row: usize, offset: usize, v: &[T]) -> T;
    /// `acc += scale * row[range]`
    fn accumulate_into(&self, row: usize, offset: usize, scale: T, acc: &mut [T]);
    /// `row[range] += scale * v`
    fn add_scaled(&mut self, row: usize, offset: usize, scale: T, v: &[T]);
    fn read_row(&self, row: usize, offset: usize, out: &mut [T]);
}

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Float> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data has wrong length");
        Matrix { rows, cols, data }
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl<T: Float> Rows<T> for Matrix<T> {
    fn n_rows(&self) -> usize {
        self.rows
    }

    fn n_cols(&self) -> usize {
        self.cols
    }

    fn dot(&self, row: usize, offset: usize, v: &[T]) -> T {
        let r = &self.row(row)[offset..offset + v.len()];
        r.iter().zip(v).fold(T::zero(), |acc, (&a, &b)| acc + a * b)
    }

    fn accumulate_into(&self, row: usize, offset: usize, scale: T, acc: &mut [T]) {
        let n = acc.len();
        let r = &self.row(row)[offset..offset + n];
        for (a, &x) in acc.iter_mut().zip(r) {
            *a = *a + scale * x;
        }
    }

    fn add_scaled(&mut self, row: usize, offset: usize, scale: T, v: &[T]) {
        let r = &mut self.row_mut(row)[offset..offset + v.len()];
        for (x, &d) in r.iter_mut().zip(v) {
            *x = *x + scale * d;
        }
    }

    fn read_row(&self, row: usize, offset: usize, out: &mut [T]) {
        let n = out.len();
        out.copy_from_slice(&self.row(row)[offset..offset + n]);
    }
}

/// Lock-free shared `f32` matrix for asynchronous SGD.
pub struct HogwildMatrix {
    rows: usize,
    cols: usize,
    data: Box<[AtomicU32]>,
}

impl HogwildMatrix {
    pub fn from_matrix(m: &Matrix<f32>) -> Self {
        HogwildMatrix {
            rows: m.rows,
            cols: m.cols,
            data: m.data.iter().map(|v| AtomicU32::new(v.to_bits())).collect(),
        }
    }

    pub fn to_matrix(&self) -> Matrix<f32> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(load).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|a| load(a).is_finite())
    }

    fn slot(&self, row: usize, offset: usize, len: usize) -> &[AtomicU32] {
        let start = row * self.cols + offset;
        &self.data[start..start + len]
    }
}

#[inline]
fn load(a: &AtomicU32) -> f32 {
    f32::from_bits(a.load(Ordering::Relaxed))
}

#[inline]
fn store(a: &AtomicU32, v: f32) {
    a.store(v.to_bits(), Ordering::Relaxed)
}

impl Rows<f32> for &HogwildMatrix {
    fn n_rows(&self) -> usize {
        self.rows
    }

    fn n_cols(&self) -> usize {
        self.cols
    }

    fn dot(&self, row: usize, offset: usize, v: &[f32]) -> f32 {
        self.slot(row, offset, v.len())
            .iter()
            .zip(v)
            .map(|(a, &b)| load(a) * b)
            .sum()
    }

    fn accumulate_into(&self, row: usize, offset: usize, scale: f32, acc: &mut [f32]) {
        let n = acc.len();
        for (x, a) in acc.iter_mut().zip(self.slot(row, offset, n)) {
            *x += scale * load(a);
        }
    }

    fn add_scaled(&mut self, row: usize, offset: usize, scale: f32, v: &[f32]) {
        for (a, &d) in self.slot(row, offset, v.len()).iter().zip(v) {
            store(a, load(a) + scale * d);
        }
    }

    fn read_row(&self, row: usize, offset: usize, out: &mut [f32]) {
        let n = out.len();
        for (x, a) in out.iter_mut().zip(self.slot(row, offset, n)) {
            *x = load(a);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hogwild_matches_dense() {
        let mut dense = Matrix::from_vec(2, 3, vec![1.0f32, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let shared = HogwildMatrix::from_matrix(&dense);
        let mut view = &shared;
        let v = [0.5f32, -1.0];
        assert_eq!(dense.dot(1, 1, &v), view.dot(1, 1, &v));
        dense.add_scaled(0, 1, 2.0, &v);
        view.add_scaled(0, 1, 2.0, &v);
        assert_eq!(dense, shared.to_matrix());
        let mut acc = [0.0f32; 3];
        view.accumulate_into(1, 0, 2.0, &mut acc);
        assert_eq!(acc, [8.0, 10.0, 12.0]);
    }
}
