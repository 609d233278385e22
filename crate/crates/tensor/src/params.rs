use std::cell::RefCell;
use std::collections::HashMap;

use rand::Rng;

use crate::tape::{Gradients, Tape, Var};
use crate::tensor::{numel, Shape};
use crate::{Real, Tensor};

/// Index of a parameter inside its [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

#[derive(Clone, Debug)]
pub struct ParamEntry<T> {
    pub name: String,
    pub value: Tensor<T>,
    pub trainable: bool,
}

/// Ordered, uniquely named parameter tensors.
#[derive(Clone, Debug, Default)]
pub struct ParamStore<T> {
    entries: Vec<ParamEntry<T>>,
    index: HashMap<String, usize>,
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        Self { entries: Vec::new(), index: HashMap::new() }
    }

    /// Registers a parameter; names must be unique.
    pub fn insert(&mut self, name: impl Into<String>, value: Tensor<T>) -> ParamId {
        let name = name.into();
        assert!(!self.index.contains_key(&name), "duplicate parameter name `{name}`");
        let id = self.entries.len();
        self.index.insert(name.clone(), id);
        self.entries.push(ParamEntry { name, value, trainable: true });
        ParamId(id)
    }

    /// Fan-in scaled uniform init `U(-sqrt(6 / fan_in), sqrt(6 / fan_in))`
    /// for `[C_out, C_in, k, k]` weights.
    pub fn insert_fan_in_uniform(&mut self, name: impl Into<String>, shape: Shape, rng: &mut impl Rng) -> ParamId {
        let fan_in = (shape[1] * shape[2] * shape[3]).max(1);
        let bound = (6.0 / fan_in as f64).sqrt();
        let data = (0..numel(shape)).map(|_| T::of(rng.random_range(-bound..bound))).collect();
        self.insert(name, Tensor::from_vec(shape, data))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied().map(ParamId)
    }

    pub fn entry(&self, id: ParamId) -> &ParamEntry<T> {
        &self.entries[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor<T> {
        &self.entries[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.entries[id.0].value
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.id(name).map(|id| self.value(id))
    }

    pub fn is_trainable(&self, id: ParamId) -> bool {
        self.entries[id.0].trainable
    }

    pub fn set_trainable(&mut self, id: ParamId, trainable: bool) {
        self.entries[id.0].trainable = trainable;
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &ParamEntry<T>)> + '_ {
        self.entries.iter().enumerate().map(|(i, e)| (ParamId(i), e))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> + '_ {
        self.entries.iter().map(|e| e.name.as_str())
    }

    /// Total scalar count over the selected parameters.
    pub fn count_where(&self, mut pred: impl FnMut(&ParamEntry<T>) -> bool) -> usize {
        self.entries.iter().filter(|e| pred(e)).map(|e| e.value.len()).sum()
    }

    pub fn numel(&self) -> usize {
        self.count_where(|_| true)
    }
}

/// One forward/backward pass over a [`ParamStore`]: parameters are bound
/// lazily as tape leaves, frozen ones without gradient tracking.
pub struct Session<'p, T: Real> {
    tape: Tape<T>,
    params: &'p ParamStore<T>,
    bound: RefCell<Vec<Option<usize>>>,
}

impl<'p, T: Real> Session<'p, T> {
    pub fn new(params: &'p ParamStore<T>) -> Self {
        Self { tape: Tape::new(), params, bound: RefCell::new(vec![None; params.len()]) }
    }

    pub fn tape(&self) -> &Tape<T> {
        &self.tape
    }

    pub fn params(&self) -> &'p ParamStore<T> {
        self.params
    }

    pub fn param(&self, id: ParamId) -> Var<'_, T> {
        if let Some(node) = self.bound.borrow()[id.0] {
            return self.tape.handle(node);
        }
        let entry = self.params.entry(id);
        let var = self.tape.leaf(entry.value.clone(), entry.trainable);
        self.bound.borrow_mut()[id.0] = Some(var.id());
        var
    }

    pub fn input(&self, value: Tensor<T>) -> Var<'_, T> {
        self.tape.constant(value)
    }

    pub fn backward(&self, loss: Var<'_, T>) -> Gradients<T> {
        self.tape.backward(loss)
    }

    /// Gradients of every bound trainable parameter (zeros when unreached).
    pub fn param_grads(&self, grads: &Gradients<T>) -> Vec<(ParamId, Vec<T>)> {
        let bound = self.bound.borrow();
        self.params
            .ids()
            .filter(|&id| self.params.is_trainable(id))
            .filter_map(|id| {
                let node = bound[id.0]?;
                let g = grads
                    .by_id(node)
                    .map(<[T]>::to_vec)
                    .unwrap_or_else(|| vec![T::zero(); self.params.value(id).len()]);
                Some((id, g))
            })
            .collect()
    }
}
