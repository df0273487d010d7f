use crate::error::{Error, Result};

/// Spatial derivative tensor `∇^i h(x)` of a map `h: ℝ^d → ℝ^o`.
///
/// Entries are stored row-major: the entry `∂_{j_1} … ∂_{j_i} h_k` lives at
/// `((j_1 · d + j_2) · d + … + j_i) · o + k`. Order 1 is therefore the
/// `d × o` matrix `∇h` with `(∇h)_{jk} = ∂_j h_k`, so that `∇hᵀy` is the
/// directional derivative along `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    input_dim: usize,
    order: usize,
    output_dim: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(input_dim: usize, order: usize, output_dim: usize) -> Self {
        Self {
            input_dim,
            order,
            output_dim,
            data: vec![0.0; tensor_len(input_dim, order, output_dim)],
        }
    }

    pub fn from_vec(input_dim: usize, order: usize, output_dim: usize, data: Vec<f64>) -> Result<Self> {
        let expected = tensor_len(input_dim, order, output_dim);
        if data.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "tensor of shape {input_dim}^{order} x {output_dim} needs {expected} entries, got {}",
                data.len()
            )));
        }
        Ok(Self { input_dim, order, output_dim, data })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    /// `(d, …, d, o)` with `order` copies of `d`.
    pub fn shape(&self) -> Vec<usize> {
        let mut s = vec![self.input_dim; self.order];
        s.push(self.output_dim);
        s
    }

    /// Flat-index strides matching [`Tensor::shape`].
    pub fn strides(&self) -> Vec<usize> {
        let shape = self.shape();
        let mut strides = vec![1; shape.len()];
        for a in (0..shape.len().saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * shape[a + 1];
        }
        strides
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, index: &[usize], k: usize) -> f64 {
        self.data[self.flat_index(index, k)]
    }

    pub fn flat_index(&self, index: &[usize], k: usize) -> usize {
        debug_assert_eq!(index.len(), self.order);
        let mut flat = 0;
        for &j in index {
            debug_assert!(j < self.input_dim);
            flat = flat * self.input_dim + j;
        }
        flat * self.output_dim + k
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius(&self.data)
    }

    /// Contracts the leading index with `v`: `Σ_j v_j T[j, …]`.
    pub fn contract_leading(&self, v: &[f64]) -> Result<Tensor> {
        if self.order == 0 {
            return Err(Error::InvalidArgument("cannot contract an order-0 tensor".into()));
        }
        if v.len() != self.input_dim {
            return Err(Error::DimensionMismatch(format!(
                "contraction vector has length {}, tensor input dimension is {}",
                v.len(),
                self.input_dim
            )));
        }
        let block = self.data.len() / self.input_dim;
        let mut out = vec![0.0; block];
        for (j, &vj) in v.iter().enumerate() {
            if vj == 0.0 {
                continue;
            }
            for (o, &t) in out.iter_mut().zip(&self.data[j * block..(j + 1) * block]) {
                *o += vj * t;
            }
        }
        Tensor::from_vec(self.input_dim, self.order - 1, self.output_dim, out)
    }

    /// Largest violation of symmetry under swapping any two derivative indices,
    /// relative to the largest entry magnitude (or 1 if that is smaller).
    pub fn symmetry_defect(&self) -> f64 {
        if self.order < 2 {
            return 0.0;
        }
        let scale = self.data.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let mut worst = 0.0f64;
        let mut idx = vec![0usize; self.order];
        for flat in 0..self.data.len() / self.output_dim {
            let mut rem = flat;
            for a in (0..self.order).rev() {
                idx[a] = rem % self.input_dim;
                rem /= self.input_dim;
            }
            for a in 0..self.order {
                for b in a + 1..self.order {
                    let mut swapped = idx.clone();
                    swapped.swap(a, b);
                    for k in 0..self.output_dim {
                        let lhs = self.get(&idx, k);
                        let rhs = self.get(&swapped, k);
                        worst = worst.max((lhs - rhs).abs() / scale);
                    }
                }
            }
        }
        worst
    }
}

pub fn tensor_len(input_dim: usize, order: usize, output_dim: usize) -> usize {
    input_dim.pow(order as u32) * output_dim
}

pub fn frobenius(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Decomposes a flat multi-index of `order` positions over `dim` values.
pub(crate) fn unflatten(mut flat: usize, dim: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = flat % dim;
        flat /= dim;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_and_strides() {
        let t = Tensor::from_vec(2, 2, 3, (0..12).map(f64::from).collect()).unwrap();
        assert_eq!(t.shape(), vec![2, 2, 3]);
        assert_eq!(t.strides(), vec![6, 3, 1]);
        assert_eq!(t.get(&[1, 0], 2), 8.0);
        assert_eq!(t.flat_index(&[1, 1], 0), 9);
    }

    #[test]
    fn contraction_of_matrix_is_directional_derivative() {
        // ∇h for h(x) = (x1 + 2 x2, 3 x1): rows are ∂_j, columns outputs.
        let grad = Tensor::from_vec(2, 1, 2, vec![1.0, 3.0, 2.0, 0.0]).unwrap();
        let dir = grad.contract_leading(&[1.0, 1.0]).unwrap();
        assert_eq!(dir.as_slice(), &[3.0, 3.0]);
        assert_eq!(dir.order(), 0);
    }

    #[test]
    fn wrong_length_is_rejected() {
        assert!(Tensor::from_vec(2, 2, 1, vec![0.0; 3]).is_err());
    }

    #[test]
    fn symmetry_defect_detects_asymmetry() {
        let sym = Tensor::from_vec(2, 2, 1, vec![1.0, 2.0, 2.0, 5.0]).unwrap();
        assert_eq!(sym.symmetry_defect(), 0.0);
        let asym = Tensor::from_vec(2, 2, 1, vec![1.0, 2.0, 3.0, 5.0]).unwrap();
        assert!(asym.symmetry_defect() > 0.1);
    }
}
