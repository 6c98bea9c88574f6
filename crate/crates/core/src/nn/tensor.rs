use alloc::vec;
use alloc::vec::Vec;

use super::Scalar;

/// Dense row-major array with an optional gradient of the same shape.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    pub shape: Vec<usize>,
    pub data: Vec<T>,
    pub grad: Option<Vec<T>>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![T::zero(); shape.iter().product()],
            grad: None,
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "data length must match shape {shape:?}");
        Self {
            shape: shape.to_vec(),
            data,
            grad: None,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn zero_grad(&mut self) {
        match &mut self.grad {
            Some(g) => g.iter_mut().for_each(|v| *v = T::zero()),
            None => self.grad = Some(vec![T::zero(); self.data.len()]),
        }
    }

    pub fn grad_mut(&mut self) -> &mut Vec<T> {
        if self.grad.is_none() {
            self.grad = Some(vec![T::zero(); self.data.len()]);
        }
        self.grad.as_mut().expect("just set")
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::of(v.f64())).collect(),
            grad: self.grad.as_ref().map(|g| g.iter().map(|v| U::of(v.f64())).collect()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_grad_allocates_matching_shape() {
        let mut t = Tensor::<f32>::zeros(&[2, 3]);
        assert!(t.grad.is_none());
        t.zero_grad();
        assert_eq!(t.grad.as_ref().unwrap().len(), 6);
        assert_eq!(t.cast::<f64>().shape, [2, 3]);
    }

    #[test]
    #[should_panic]
    fn wrong_length_panics() {
        Tensor::from_vec(&[2, 2], alloc::vec![1.0f32; 3]);
    }
}
