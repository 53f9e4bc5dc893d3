use std::collections::HashMap;

use rand::Rng;

use super::RngState;
use crate::error::{Error, Result};
use crate::tensor::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// What a tensor is, which decides how it is initialized.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamRole {
    /// Weight-norm direction; rows are output channels.
    Direction { fan_in: usize },
    /// Weight-norm gain for the rows of `direction`.
    Gain { direction: ParamId },
    /// Plain weight matrix.
    Weight { fan_in: usize },
    Bias,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Parameter<S> {
    pub name: String,
    pub shape: Vec<usize>,
    pub role: ParamRole,
    pub value: Vec<S>,
    pub grad: Vec<S>,
}

impl<S> Parameter<S> {
    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

/// Flat registry of learnable tensors and their gradients, in registration order.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterStore<S> {
    params: Vec<Parameter<S>>,
    index: HashMap<String, ParamId>,
}

impl<S> Default for ParameterStore<S> {
    fn default() -> Self {
        ParameterStore {
            params: Vec::new(),
            index: HashMap::new(),
        }
    }
}

impl<S: Scalar> ParameterStore<S> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a zero-filled tensor.
    pub fn register(&mut self, name: impl Into<String>, shape: &[usize], role: ParamRole) -> Result<ParamId> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::Config(format!("parameter `{name}` registered twice")));
        }
        let len = shape.iter().product();
        let id = ParamId(self.params.len());
        self.params.push(Parameter {
            name: name.clone(),
            shape: shape.to_vec(),
            role,
            value: vec![S::zero(); len],
            grad: vec![S::zero(); len],
        });
        self.index.insert(name, id);
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(Parameter::len).sum()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn param(&self, id: ParamId) -> &Parameter<S> {
        &self.params[id.0]
    }

    pub fn param_mut(&mut self, id: ParamId) -> &mut Parameter<S> {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &[S] {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut [S] {
        &mut self.params[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &[S] {
        &self.params[id.0].grad
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter<S>> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter<S>> {
        self.params.iter_mut()
    }

    pub fn accumulate_grad(&mut self, id: ParamId, grad: &[S]) {
        let dst = &mut self.params[id.0].grad;
        debug_assert_eq!(dst.len(), grad.len());
        for (d, &g) in dst.iter_mut().zip(grad) {
            *d += g;
        }
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.iter_mut().for_each(|g| *g = S::zero());
        }
    }

    pub fn cast<T: Scalar>(&self) -> ParameterStore<T> {
        ParameterStore {
            params: self
                .params
                .iter()
                .map(|p| Parameter {
                    name: p.name.clone(),
                    shape: p.shape.clone(),
                    role: p.role,
                    value: p.value.iter().map(|v| T::cast(v.widen())).collect(),
                    grad: p.grad.iter().map(|v| T::cast(v.widen())).collect(),
                })
                .collect(),
            index: self.index.clone(),
        }
    }
}

/// Directions and plain weights uniform in `±sqrt(1/fan_in)`, gains set to the
/// norm of their direction row (so the effective weight equals the raw draw),
/// biases zero.
pub fn init_parameters<S: Scalar>(store: &mut ParameterStore<S>, rng: &mut RngState) {
    let mut draw = rng.stream();
    for p in store.iter_mut() {
        match p.role {
            ParamRole::Direction { fan_in } | ParamRole::Weight { fan_in } => {
                let bound = (1.0 / fan_in.max(1) as f64).sqrt();
                for v in &mut p.value {
                    *v = S::cast(draw.gen_range(-bound..=bound));
                }
            }
            ParamRole::Bias => p.value.iter_mut().for_each(|v| *v = S::zero()),
            ParamRole::Gain { .. } => {}
        }
    }
    for i in 0..store.params.len() {
        if let ParamRole::Gain { direction } = store.params[i].role {
            let rows = store.params[i].len();
            let dir = &store.params[direction.0].value;
            let row_len = dir.len() / rows.max(1);
            let norms: Vec<S> = dir
                .chunks(row_len.max(1))
                .map(|row| row.iter().map(|&v| v * v).sum::<S>().sqrt())
                .collect();
            store.params[i].value.copy_from_slice(&norms[..rows]);
        }
    }
}
