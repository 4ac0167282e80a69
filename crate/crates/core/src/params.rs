use indexmap::IndexMap;
use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{ConvParams, LayerNormParams, LAYERNORM_EPS};
use crate::tensor::{Array4, Real, Shape, Tape, Tensor4};

/// A trainable tensor and its optimizer moments (allocated on first step).
#[derive(Clone, Debug, PartialEq)]
pub struct ParamEntry<T> {
    pub value: Array4<T>,
    pub m: Option<Array4<T>>,
    pub v: Option<Array4<T>>,
}

/// Ordered name -> parameter map. Insertion order is the canonical order
/// for iteration, checkpoints and optimizer updates.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamStore<T> {
    entries: IndexMap<String, ParamEntry<T>>,
}

impl<T: Real> Default for ParamStore<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore {
            entries: IndexMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Array4<T>) -> Result<()> {
        let name = name.into();
        if self.entries.contains_key(&name) {
            return Err(Error::invalid("ParamStore::insert", format!("duplicate parameter {name}")));
        }
        self.entries.insert(name, ParamEntry { value, m: None, v: None });
        Ok(())
    }

    pub fn insert_entry(&mut self, name: impl Into<String>, entry: ParamEntry<T>) -> Result<()> {
        let name = name.into();
        if self.entries.contains_key(&name) {
            return Err(Error::invalid("ParamStore::insert", format!("duplicate parameter {name}")));
        }
        self.entries.insert(name, entry);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Array4<T>> {
        self.entries.get(name).map(|e| &e.value)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Array4<T>> {
        self.entries.get_mut(name).map(|e| &mut e.value)
    }

    pub fn entry(&self, name: &str) -> Option<&ParamEntry<T>> {
        self.entries.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ParamEntry<T>)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut ParamEntry<T>)> {
        self.entries.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Number of named tensors.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total trainable scalars.
    pub fn count(&self) -> usize {
        self.entries.values().map(|e| e.value.len()).sum()
    }

    /// Register every parameter as a tape leaf.
    pub fn bind(&self, tape: &Tape<T>, requires_grad: bool) -> Bound<T> {
        Bound {
            tensors: self
                .entries
                .iter()
                .map(|(k, e)| (k.clone(), tape.leaf(e.value.clone(), requires_grad)))
                .collect(),
        }
    }

    pub fn cast<U: Real>(&self) -> ParamStore<U> {
        ParamStore {
            entries: self
                .entries
                .iter()
                .map(|(k, e)| {
                    (
                        k.clone(),
                        ParamEntry {
                            value: e.value.cast(),
                            m: e.m.as_ref().map(Array4::cast),
                            v: e.v.as_ref().map(Array4::cast),
                        },
                    )
                })
                .collect(),
        }
    }

    pub(crate) fn init_conv(
        &mut self,
        name: &str,
        c_in: usize,
        c_out: usize,
        k: usize,
        groups: usize,
        rng: &mut impl Rng,
    ) -> Result<()> {
        let fan_in = (c_in / groups) * k * k;
        let bound = (1.0 / fan_in as f64).sqrt();
        let mut uniform = |shape: Shape| Array4::from_fn(shape, |_, _, _, _| T::from_f64(rng.gen_range(-bound..bound)));
        let weight = uniform(Shape::new(c_out, c_in / groups, k, k));
        let bias = uniform(Shape::new(1, c_out, 1, 1));
        self.insert(format!("{name}.weight"), weight)?;
        self.insert(format!("{name}.bias"), bias)
    }

    pub(crate) fn init_layernorm(&mut self, name: &str, c: usize) -> Result<()> {
        self.insert(format!("{name}.weight"), Array4::ones(Shape::new(1, c, 1, 1)))?;
        self.insert(format!("{name}.bias"), Array4::zeros(Shape::new(1, c, 1, 1)))
    }

    pub(crate) fn init_zero_scale(&mut self, name: &str, c: usize) -> Result<()> {
        self.insert(name, Array4::zeros(Shape::new(1, c, 1, 1)))
    }
}

/// Parameters registered on one tape, looked up by name.
pub struct Bound<T> {
    tensors: IndexMap<String, Tensor4<T>>,
}

impl<T: Real> Bound<T> {
    /// Pair already-registered tensors with their parameter names.
    pub fn from_parts(names: impl IntoIterator<Item = String>, tensors: impl IntoIterator<Item = Tensor4<T>>) -> Self {
        Bound {
            tensors: names.into_iter().zip(tensors).collect(),
        }
    }

    pub fn get(&self, name: &str) -> Result<&Tensor4<T>> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::invalid("Bound::get", format!("missing parameter {name}")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor4<T>)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub(crate) fn conv(&self, name: &str, groups: usize) -> Result<ConvParams<T>> {
        Ok(ConvParams {
            weight: self.get(&format!("{name}.weight"))?.clone(),
            bias: self.get(&format!("{name}.bias"))?.clone(),
            groups,
        })
    }

    pub(crate) fn layernorm(&self, name: &str) -> Result<LayerNormParams<T>> {
        Ok(LayerNormParams {
            weight: self.get(&format!("{name}.weight"))?.clone(),
            bias: self.get(&format!("{name}.bias"))?.clone(),
            eps: LAYERNORM_EPS,
        })
    }
}
