//! Minimal CPU building blocks for the convolutional models: a `[C][H][W]`
//! tensor, a named parameter store, hand-written forward/backward kernels and
//! the Adam optimizer.

mod adam;
mod conv;
mod gemm;
mod ops;

pub use adam::Adam;
pub use conv::Conv3x3;
pub use ops::{
    concat_channels, global_avg_pool, global_avg_pool_backward, max_pool2, max_pool2_backward,
    relu_backward_inplace, relu_inplace, split_channels, upsample2, upsample2_backward, Linear,
    PoolIndices,
};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense `[channels][height][width]` activation tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Tensor {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn from_data(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), channels * height * width);
        Tensor {
            channels,
            height,
            width,
            data,
        }
    }

    #[inline]
    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub fn channel(&self, c: usize) -> &[f32] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn channel_mut(&mut self, c: usize) -> &mut [f32] {
        let n = self.plane_len();
        &mut self.data[c * n..(c + 1) * n]
    }
}

/// Index of an array inside a [`ParamSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    #[serde(skip)]
    pub data: Vec<f32>,
}

/// Ordered collection of named parameter arrays. Order is part of the
/// checkpoint format and never changes once a model is built.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSet {
    arrays: Vec<NamedArray>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, shape: Vec<usize>, data: Vec<f32>) -> ParamId {
        assert_eq!(shape.iter().product::<usize>(), data.len());
        self.arrays.push(NamedArray {
            name: name.into(),
            shape,
            data,
        });
        ParamId(self.arrays.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &[f32] {
        &self.arrays[id.0].data
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut [f32] {
        &mut self.arrays[id.0].data
    }

    pub fn arrays(&self) -> &[NamedArray] {
        &self.arrays
    }

    pub fn arrays_mut(&mut self) -> &mut [NamedArray] {
        &mut self.arrays
    }

    pub fn len(&self) -> usize {
        self.arrays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arrays.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.arrays.iter().map(|a| a.data.len()).sum()
    }

    pub fn zero_grads(&self) -> Grads {
        Grads {
            data: self.arrays.iter().map(|a| vec![0.0; a.data.len()]).collect(),
        }
    }

    /// Replaces every array with the same-named, same-shaped array from `other`.
    pub fn load_from(&mut self, other: &ParamSet) -> Result<()> {
        if other.arrays.len() != self.arrays.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} parameter arrays, found {}",
                self.arrays.len(),
                other.arrays.len()
            )));
        }
        for (mine, theirs) in self.arrays.iter_mut().zip(&other.arrays) {
            if mine.name != theirs.name || mine.shape != theirs.shape {
                return Err(Error::Checkpoint(format!(
                    "parameter mismatch: expected `{}` {:?}, found `{}` {:?}",
                    mine.name, mine.shape, theirs.name, theirs.shape
                )));
            }
            mine.data.clone_from(&theirs.data);
        }
        Ok(())
    }
}

/// Gradient buffers shaped like a [`ParamSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub data: Vec<Vec<f32>>,
}

impl Grads {
    #[inline]
    pub fn get_mut(&mut self, id: ParamId) -> &mut [f32] {
        &mut self.data[id.0]
    }

    pub fn get(&self, id: ParamId) -> &[f32] {
        &self.data[id.0]
    }

    pub fn add_assign(&mut self, other: &Grads) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, k: f32) {
        self.data.iter_mut().flatten().for_each(|x| *x *= k);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().flatten().all(|x| x.is_finite())
    }

    /// Sums per-sample gradients in the given order.
    pub fn sum_ordered<'a>(params: &ParamSet, items: impl IntoIterator<Item = &'a Grads>) -> Grads {
        let mut acc = params.zero_grads();
        for g in items {
            acc.add_assign(g);
        }
        acc
    }
}

/// He-style uniform initialization `U(−√(6/fan_in), √(6/fan_in))`.
pub fn fan_in_uniform<R: Rng>(rng: &mut R, len: usize, fan_in: usize) -> Vec<f32> {
    let bound = (6.0 / fan_in as f64).sqrt() as f32;
    (0..len).map(|_| rng.gen_range(-bound..=bound)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn load_from_checks_layout() {
        let mut a = ParamSet::new();
        a.push("w", vec![2], vec![1.0, 2.0]);
        let mut b = ParamSet::new();
        b.push("w", vec![2], vec![3.0, 4.0]);
        a.load_from(&b).unwrap();
        assert_eq!(a.get(ParamId(0)), &[3.0, 4.0]);
        let mut c = ParamSet::new();
        c.push("v", vec![2], vec![0.0, 0.0]);
        assert!(a.load_from(&c).is_err());
    }
}
