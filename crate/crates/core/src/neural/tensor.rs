//! Dense row-major tensors.

use rand::Rng;

use super::scalar::Scalar;
use super::NeuralError;

/// A dense tensor: shape plus a row-major value buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<F> {
    shape: Vec<usize>,
    data: Vec<F>,
}

impl<F: Scalar> Tensor<F> {
    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![F::ZERO; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<F>) -> Result<Self, NeuralError> {
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(NeuralError::ShapeMismatch {
                context: "from_vec".into(),
                detail: format!(
                    "shape {shape:?} needs {expected} values, got {}",
                    data.len()
                ),
            });
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn scalar(value: F) -> Self {
        Self {
            shape: vec![1, 1],
            data: vec![value],
        }
    }

    /// Entries drawn i.i.d. uniform on `[lo, hi)`.
    pub fn uniform(shape: &[usize], lo: f64, hi: f64, rng: &mut impl Rng) -> Self {
        let data = (0..shape.iter().product())
            .map(|_| F::from_f64(rng.random_range(lo..hi)))
            .collect();
        Self {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    /// Number of rows of a 2-D tensor.
    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    /// Number of columns of a 2-D tensor.
    pub fn cols(&self) -> usize {
        self.shape[1]
    }

    pub fn is_matrix(&self) -> bool {
        self.shape.len() == 2
    }

    #[inline]
    pub fn at2(&self, r: usize, c: usize) -> F {
        debug_assert!(self.shape.len() == 2);
        self.data[r * self.shape[1] + c]
    }

    #[inline]
    pub fn at2_mut(&mut self, r: usize, c: usize) -> &mut F {
        debug_assert!(self.shape.len() == 2);
        &mut self.data[r * self.shape[1] + c]
    }

    /// Single value of a 1×1 tensor.
    pub fn item(&self) -> F {
        assert_eq!(self.len(), 1, "item() on tensor of shape {:?}", self.shape);
        self.data[0]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn fill(&mut self, value: F) {
        self.data.iter_mut().for_each(|v| *v = value);
    }

    /// `self += other * scale`, shapes must match.
    pub fn add_scaled(&mut self, other: &Tensor<F>, scale: F) {
        assert_eq!(self.shape, other.shape, "add_scaled shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b * scale;
        }
    }

    pub fn scale_in_place(&mut self, scale: F) {
        self.data.iter_mut().for_each(|v| *v *= scale);
    }

    /// Sum of squared entries (in f64 to avoid overflow at low precision).
    pub fn sq_sum_f64(&self) -> f64 {
        self.data.iter().map(|v| v.to_f64() * v.to_f64()).sum()
    }

    /// Row-major matrix product `self (m×k) · rhs (k×n)`.
    pub fn matmul(&self, rhs: &Tensor<F>) -> Result<Tensor<F>, NeuralError> {
        if !self.is_matrix() || !rhs.is_matrix() || self.cols() != rhs.rows() {
            return Err(NeuralError::ShapeMismatch {
                context: "matmul".into(),
                detail: format!("{:?} · {:?}", self.shape, rhs.shape),
            });
        }
        let (m, k, n) = (self.rows(), self.cols(), rhs.cols());
        let mut out = Tensor::zeros(&[m, n]);
        unsafe {
            F::gemm(
                m,
                k,
                n,
                F::ONE,
                self.data.as_ptr(),
                k as isize,
                1,
                rhs.data.as_ptr(),
                n as isize,
                1,
                F::ZERO,
                out.data.as_mut_ptr(),
                n as isize,
                1,
            );
        }
        Ok(out)
    }
}

/// `c += a·b` where either operand may be used transposed. Shapes are
/// checked by the caller; this is the accumulation primitive used by the
/// backward pass.
pub(crate) fn gemm_acc<F: Scalar>(
    c: &mut Tensor<F>,
    a: &Tensor<F>,
    a_trans: bool,
    b: &Tensor<F>,
    b_trans: bool,
) {
    let (am, ak) = if a_trans {
        (a.cols(), a.rows())
    } else {
        (a.rows(), a.cols())
    };
    let (bk, bn) = if b_trans {
        (b.cols(), b.rows())
    } else {
        (b.rows(), b.cols())
    };
    assert_eq!(ak, bk, "gemm_acc inner dims");
    assert_eq!((c.rows(), c.cols()), (am, bn), "gemm_acc output dims");
    let (rsa, csa) = if a_trans {
        (1, a.cols() as isize)
    } else {
        (a.cols() as isize, 1)
    };
    let (rsb, csb) = if b_trans {
        (1, b.cols() as isize)
    } else {
        (b.cols() as isize, 1)
    };
    let rsc = c.cols() as isize;
    unsafe {
        F::gemm(
            am,
            ak,
            bn,
            F::ONE,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            F::ONE,
            c.data.as_mut_ptr(),
            rsc,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_small() {
        let a = Tensor::<f64>::from_vec(&[2, 3], vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let b = Tensor::<f64>::from_vec(&[3, 2], vec![7., 8., 9., 10., 11., 12.]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.data(), &[58., 64., 139., 154.]);
    }

    #[test]
    fn matmul_rejects_bad_shapes() {
        let a = Tensor::<f32>::zeros(&[2, 3]);
        let b = Tensor::<f32>::zeros(&[2, 3]);
        assert!(a.matmul(&b).is_err());
    }

    #[test]
    fn gemm_acc_transposes() {
        // c += aᵀ·b with a (3×2), b (3×2) → c (2×2)
        let a = Tensor::<f64>::from_vec(&[3, 2], vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let b = Tensor::<f64>::from_vec(&[3, 2], vec![1., 0., 0., 1., 1., 1.]).unwrap();
        let mut c = Tensor::<f64>::zeros(&[2, 2]);
        gemm_acc(&mut c, &a, true, &b, false);
        assert_eq!(c.data(), &[6., 8., 8., 10.]);
    }

    #[test]
    fn uniform_respects_bounds() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(1);
        let t = Tensor::<f32>::uniform(&[10, 10], -0.1, 0.1, &mut rng);
        assert!(t.data().iter().all(|v| (-0.1..0.1).contains(v)));
    }

    #[test]
    fn finiteness_check() {
        let mut t = Tensor::<f32>::zeros(&[2, 2]);
        assert!(t.all_finite());
        t.data_mut()[1] = f32::NAN;
        assert!(!t.all_finite());
    }
}
