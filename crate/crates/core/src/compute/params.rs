use std::collections::HashMap;

use crate::compute::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub trainable: bool,
}

/// Named, ordered collection of model parameters.
///
/// Insertion order is preserved and defines the serialization order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
    by_name: HashMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor, trainable: bool) -> Result<ParamId> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(Error::DuplicateParam(name));
        }
        let id = ParamId(self.params.len());
        self.by_name.insert(name.clone(), id);
        self.params.push(Param { name, value, trainable });
        Ok(id)
    }

    pub fn id(&self, name: &str) -> Result<ParamId> {
        self.by_name
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownParam(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.by_name.contains_key(name)
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.iter().map(|p| p.name.as_str())
    }

    /// Total number of scalar entries across all parameters.
    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Squared L2 norm over every trainable entry.
    pub fn trainable_sum_squares(&self) -> f64 {
        self.params
            .iter()
            .filter(|p| p.trainable)
            .map(|p| p.value.sum_squares())
            .sum()
    }

    /// Adds `lambda * ||theta||^2` to the objective: returns the penalty and
    /// accumulates `2 * lambda * theta` into `grads`.
    pub fn apply_l2(&self, lambda: f64, grads: &mut GradStore) -> f64 {
        if lambda == 0.0 {
            return 0.0;
        }
        let mut penalty = 0.0;
        for (i, p) in self.params.iter().enumerate() {
            if !p.trainable {
                continue;
            }
            penalty += p.value.sum_squares();
            let g = grads.grads[i].data_mut();
            for (gv, &pv) in g.iter_mut().zip(p.value.data()) {
                *gv += 2.0 * lambda * pv;
            }
        }
        lambda * penalty
    }
}

/// Gradient accumulators mirroring a [`ParamStore`].
///
/// Backward passes add into these buffers; [`GradStore::zero`] must be called
/// between optimizer steps.
#[derive(Clone, Debug)]
pub struct GradStore {
    grads: Vec<Tensor>,
    touched: Vec<bool>,
}

impl GradStore {
    pub fn for_params(params: &ParamStore) -> Self {
        Self {
            grads: params
                .params
                .iter()
                .map(|p| Tensor::zeros(p.value.rows(), p.value.cols()))
                .collect(),
            touched: vec![false; params.len()],
        }
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.grads[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.grads[id.0]
    }

    /// Whether any backward pass reached this parameter since the last zeroing.
    pub fn touched(&self, id: ParamId) -> bool {
        self.touched[id.0]
    }

    pub(crate) fn mark(&mut self, id: ParamId) {
        self.touched[id.0] = true;
    }

    pub fn accumulate(&mut self, id: ParamId, g: &Tensor) {
        self.grads[id.0].add_assign(g);
        self.touched[id.0] = true;
    }

    /// Adds another store's gradients into this one.
    pub fn merge(&mut self, other: &GradStore) {
        for (i, g) in other.grads.iter().enumerate() {
            self.grads[i].add_assign(g);
            self.touched[i] |= other.touched[i];
        }
    }

    pub fn zero(&mut self) {
        for g in &mut self.grads {
            g.fill(0.0);
        }
        self.touched.iter_mut().for_each(|t| *t = false);
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }
}
