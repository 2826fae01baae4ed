use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Which sub-model owns a parameter: the extractor (η) or the generator (θ).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Group {
    Extractor,
    Generator,
}

impl Group {
    pub fn tag(self) -> u8 {
        match self {
            Group::Extractor => 0,
            Group::Generator => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Group::Extractor),
            1 => Some(Group::Generator),
            _ => None,
        }
    }
}

/// Selects which groups an optimizer step touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupFilter {
    Extractor,
    Generator,
    Both,
}

impl GroupFilter {
    pub fn admits(self, g: Group) -> bool {
        matches!(
            (self, g),
            (GroupFilter::Both, _)
                | (GroupFilter::Extractor, Group::Extractor)
                | (GroupFilter::Generator, Group::Generator)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamEntry {
    pub name: String,
    pub group: Group,
    pub value: Tensor,
}

/// Named parameters, each in exactly one group.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    entries: Vec<ParamEntry>,
    index: HashMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, group: Group, value: Tensor) -> Result<ParamId> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::Config(format!("duplicate parameter name {name}")));
        }
        let id = ParamId(self.entries.len());
        self.index.insert(name.clone(), id);
        self.entries.push(ParamEntry { name, group, value });
        Ok(id)
    }

    /// Glorot-uniform matrix.
    pub fn add_xavier<R: Rng>(
        &mut self,
        name: &str,
        group: Group,
        rows: usize,
        cols: usize,
        rng: &mut R,
    ) -> Result<ParamId> {
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols).map(|_| rng.random_range(-bound..bound)).collect();
        self.add(name, group, Tensor::matrix(rows, cols, data)?)
    }

    pub fn add_zeros(&mut self, name: &str, group: Group, shape: &[usize]) -> Result<ParamId> {
        self.add(name, group, Tensor::zeros(shape))
    }

    /// Embedding table drawn from N(0, 1).
    pub fn add_embedding<R: Rng>(
        &mut self,
        name: &str,
        group: Group,
        vocab: usize,
        dim: usize,
        rng: &mut R,
    ) -> Result<ParamId> {
        let normal = Normal::new(0.0, 1.0).expect("valid std");
        let data = (0..vocab * dim).map(|_| normal.sample(rng)).collect();
        self.add(name, group, Tensor::matrix(vocab, dim, data)?)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn id(&self, name: &str) -> Result<ParamId> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownParam(name.to_string()))
    }

    pub fn entry(&self, id: ParamId) -> &ParamEntry {
        &self.entries[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.entries[id.0].value
    }

    pub fn group(&self, id: ParamId) -> Group {
        self.entries[id.0].group
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn ids_in(&self, group: Group) -> Vec<ParamId> {
        self.ids().filter(|&id| self.group(id) == group).collect()
    }

    pub fn num_values(&self) -> usize {
        self.entries.iter().map(|e| e.value.len()).sum()
    }
}

/// One gradient tensor per parameter, aligned with a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    tensors: Vec<Tensor>,
}

impl Grads {
    pub fn zeros_like(store: &ParamStore) -> Self {
        Grads {
            tensors: store.entries.iter().map(|e| Tensor::zeros(e.value.shape())).collect(),
        }
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn accumulate(&mut self, other: &Grads) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            a.add_assign(b);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }

    pub fn scale(&mut self, c: f64) {
        for t in &mut self.tensors {
            t.scale_in_place(c);
        }
    }

    /// Largest absolute gradient over the parameters of `group`.
    pub fn max_abs_in(&self, store: &ParamStore, group: Group) -> f64 {
        store
            .ids_in(group)
            .into_iter()
            .map(|id| self.get(id).max_abs())
            .fold(0.0, f64::max)
    }
}
