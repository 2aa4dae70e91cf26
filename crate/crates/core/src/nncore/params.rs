use super::Real;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    /// Panics if `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let data: Vec<T> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::from_vec(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    /// `out += self · x`
    pub(crate) fn matvec_acc(&self, x: &[T], out: &mut [T]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols.max(1))) {
            *o = *o + dot(row, x);
        }
    }

    /// `out += selfᵀ · y`
    pub(crate) fn t_matvec_acc(&self, y: &[T], out: &mut [T]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (&yr, row) in y.iter().zip(self.data.chunks_exact(self.cols.max(1))) {
            if yr != T::zero() {
                for (o, &w) in out.iter_mut().zip(row) {
                    *o = *o + yr * w;
                }
            }
        }
    }

    /// `self += y ⊗ x`
    pub(crate) fn outer_acc(&mut self, y: &[T], x: &[T]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(x.len(), self.cols);
        let cols = self.cols.max(1);
        for (&yr, row) in y.iter().zip(self.data.chunks_exact_mut(cols)) {
            if yr != T::zero() {
                for (w, &xc) in row.iter_mut().zip(x) {
                    *w = *w + yr * xc;
                }
            }
        }
    }
}

/// Eight interleaved partial sums, combined pairwise.
pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [T::zero(); 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        let (x, y): (&[T; 8], &[T; 8]) = (x.try_into().expect("chunk"), y.try_into().expect("chunk"));
        for k in 0..8 {
            acc[k] = acc[k] + x[k] * y[k];
        }
    }
    for (k, (&x, &y)) in ra.iter().zip(rb).enumerate() {
        acc[k] = acc[k] + x * y;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]))
}

/// A named, shaped view of one parameter tensor.
#[derive(Debug, Clone)]
pub struct ParamBlock<'a, T> {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: &'a [T],
}

/// A fixed collection of parameter tensors. Gradients use the same type, so
/// `blocks` and `blocks_mut` must enumerate tensors in one stable order.
pub trait Params<T: Real>: Clone {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<ParamBlock<'a, T>>);
    fn visit_mut<'a>(&'a mut self, out: &mut Vec<&'a mut [T]>);

    fn blocks(&self) -> Vec<ParamBlock<'_, T>> {
        let mut out = Vec::new();
        self.visit("", &mut out);
        out
    }

    fn blocks_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = Vec::new();
        self.visit_mut(&mut out);
        out
    }

    fn num_params(&self) -> usize {
        self.blocks().iter().map(|b| b.data.len()).sum()
    }

    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.blocks_mut().into_iter().for_each(|b| b.fill(T::zero()));
        z
    }

    fn scale(&mut self, s: T) {
        for b in self.blocks_mut() {
            b.iter_mut().for_each(|x| *x = *x * s);
        }
    }

    fn add_assign(&mut self, other: &Self) {
        let src = other.blocks();
        for (dst, src) in self.blocks_mut().into_iter().zip(src) {
            for (d, &s) in dst.iter_mut().zip(src.data) {
                *d = *d + s;
            }
        }
    }

    fn all_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.data.iter().all(|x| x.is_finite()))
    }

    fn flatten(&self) -> Vec<T> {
        self.blocks().iter().flat_map(|b| b.data.iter().copied()).collect()
    }

    fn squared_norm(&self) -> T {
        self.blocks().iter().flat_map(|b| b.data.iter()).fold(T::zero(), |acc, &x| acc + x * x)
    }
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matvec_and_transpose() {
        let m = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let mut out = vec![0.0; 2];
        m.matvec_acc(&[1.0, 0.0, -1.0], &mut out);
        assert_eq!(out, vec![-2.0, -2.0]);
        let mut out = vec![0.0; 3];
        m.t_matvec_acc(&[1.0, 1.0], &mut out);
        assert_eq!(out, vec![5.0, 7.0, 9.0]);
        let mut g = Matrix::<f64>::zeros(2, 3);
        g.outer_acc(&[1.0, 2.0], &[1.0, 0.5, 0.0]);
        assert_eq!(g.data(), &[1.0, 0.5, 0.0, 2.0, 1.0, 0.0]);
    }
}
