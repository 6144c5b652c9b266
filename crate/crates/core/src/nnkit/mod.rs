//! Minimal differentiable-compute kit: dense layers, layer norm,
//! multi-head self-attention, transformer layers, softmax
//! cross-entropy, Adam, finite-difference gradient checking, and a
//! flat binary checkpoint format. Forward passes cache what their
//! hand-derived backward passes need; the correctness contract is that
//! every backward survives `gradient_check` at 64-bit precision.

pub mod adam;
pub mod attention;
pub mod checkpoint;
pub mod gradcheck;
pub mod norm;
pub mod ops;

use crate::rng::Rng64;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    Shape {
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("model dim {dim} is not divisible by {heads} heads")]
    HeadSplit { dim: usize, heads: usize },
    #[error("token id {0} exceeds vocabulary size {1}")]
    IdOutOfRange(u32, usize),
}

/// Dense row-major tensor of f64 values.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Self {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "shape/data length mismatch"
        );
        Tensor {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    /// Rows and columns of a 2-d tensor.
    pub fn dims2(&self) -> (usize, usize) {
        assert_eq!(self.shape.len(), 2, "expected 2-d tensor");
        (self.shape[0], self.shape[1])
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }
}

/// One parameter with its gradient accumulator and Adam moments.
#[derive(Debug, Clone)]
pub struct Param {
    pub value: Tensor,
    pub grad: Tensor,
    pub m: Tensor,
    pub v: Tensor,
}

impl Param {
    fn new(value: Tensor) -> Self {
        let grad = Tensor::zeros(&value.shape);
        let m = Tensor::zeros(&value.shape);
        let v = Tensor::zeros(&value.shape);
        Param { value, grad, m, v }
    }
}

/// Named parameter collection. BTreeMap keeps iteration order (and so
/// Adam updates and checkpoints) deterministic.
#[derive(Debug, Clone, Default)]
pub struct ParamSet {
    entries: BTreeMap<String, Param>,
    /// Adam step counter for bias correction.
    pub step: u64,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet::default()
    }

    pub fn insert(&mut self, path: &str, value: Tensor) {
        self.entries.insert(path.to_string(), Param::new(value));
    }

    pub fn value(&self, path: &str) -> &Tensor {
        &self
            .entries
            .get(path)
            .unwrap_or_else(|| panic!("no parameter named {path}"))
            .value
    }

    pub fn param_mut(&mut self, path: &str) -> &mut Param {
        self.entries
            .get_mut(path)
            .unwrap_or_else(|| panic!("no parameter named {path}"))
    }

    /// Adds `delta` into the gradient accumulator of `path`.
    pub fn accumulate_grad(&mut self, path: &str, delta: &Tensor) {
        let g = &mut self.param_mut(path).grad;
        assert_eq!(g.shape, delta.shape, "gradient shape mismatch for {path}");
        for (gi, di) in g.data.iter_mut().zip(&delta.data) {
            *gi += di;
        }
    }

    pub fn zero_grads(&mut self) {
        for p in self.entries.values_mut() {
            p.grad.fill(0.0);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Param)> {
        self.entries.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Param)> {
        self.entries.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total scalar parameter count.
    pub fn numel(&self) -> usize {
        self.entries.values().map(|p| p.value.numel()).sum()
    }

    /// True when every tensor (values, moments, step) is bit-identical.
    pub fn bits_equal(&self, other: &ParamSet) -> bool {
        if self.step != other.step || self.entries.len() != other.entries.len() {
            return false;
        }
        self.entries
            .iter()
            .zip(other.entries.iter())
            .all(|((ka, pa), (kb, pb))| {
                ka == kb
                    && pa
                        .value
                        .data
                        .iter()
                        .zip(&pb.value.data)
                        .all(|(a, b)| a.to_bits() == b.to_bits())
                    && pa
                        .m
                        .data
                        .iter()
                        .zip(&pb.m.data)
                        .all(|(a, b)| a.to_bits() == b.to_bits())
                    && pa
                        .v
                        .data
                        .iter()
                        .zip(&pb.v.data)
                        .all(|(a, b)| a.to_bits() == b.to_bits())
            })
    }
}

/// Glorot-uniform weight init: +-sqrt(6 / (fan_in + fan_out)).
pub fn glorot(shape: &[usize], rng: &mut Rng64) -> Tensor {
    assert_eq!(shape.len(), 2);
    let bound = (6.0 / (shape[0] + shape[1]) as f64).sqrt();
    let data = (0..shape[0] * shape[1])
        .map(|_| rng.uniform(-bound, bound))
        .collect();
    Tensor::from_vec(shape, data)
}

/// Inserts a dense layer's weight (glorot) and bias (zeros).
pub fn insert_dense(
    ps: &mut ParamSet,
    prefix: &str,
    fan_in: usize,
    fan_out: usize,
    rng: &mut Rng64,
) {
    ps.insert(&format!("{prefix}.w"), glorot(&[fan_in, fan_out], rng));
    ps.insert(&format!("{prefix}.b"), Tensor::zeros(&[fan_out]));
}

/// Inserts layer-norm gain (ones) and shift (zeros).
pub fn insert_layernorm(ps: &mut ParamSet, prefix: &str, dim: usize) {
    let mut gamma = Tensor::zeros(&[dim]);
    gamma.fill(1.0);
    ps.insert(&format!("{prefix}.gamma"), gamma);
    ps.insert(&format!("{prefix}.beta"), Tensor::zeros(&[dim]));
}
