//! Flat parameter vectors: the unit of transmission, aggregation and noise.

use crate::error::{Error, Result};
use crate::snn::Network;
use crate::tensor::{Scalar, Tensor};

/// Flattening order: layer-major, row-major within each layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    /// `(layer id, shape)` in flattening order.
    pub entries: Vec<(usize, Vec<usize>)>,
}

impl Layout {
    pub fn total(&self) -> usize {
        self.entries
            .iter()
            .map(|(_, s)| s.iter().product::<usize>())
            .sum()
    }
}

/// Flat ordered model parameters plus layer-shape metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector<F: Scalar> {
    pub values: Vec<F>,
    pub layout: Layout,
}

/// Elementwise model difference, layout-congruent with its `ParamVector`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaVector<F: Scalar> {
    pub values: Vec<F>,
    pub layout: Layout,
}

impl<F: Scalar> ParamVector<F> {
    pub fn from_network(net: &Network<F>) -> Self {
        let mut values = Vec::with_capacity(net.param_count());
        let mut entries = Vec::with_capacity(net.layers.len());
        for (id, layer) in net.layers.iter().enumerate() {
            entries.push((id, layer.shape().to_vec()));
            values.extend_from_slice(layer.data());
        }
        ParamVector { values, layout: Layout { entries } }
    }

    /// Write these values back into `net`'s layers.
    pub fn write_into(&self, net: &mut Network<F>) -> Result<()> {
        let mut offset = 0;
        if self.layout.entries.len() != net.layers.len() {
            return Err(Error::shape("param vector layout vs network layer count".to_string()));
        }
        for ((_, shape), layer) in self.layout.entries.iter().zip(&mut net.layers) {
            if shape != layer.shape() {
                return Err(Error::shape(format!(
                    "layout shape {shape:?} vs layer {:?}",
                    layer.shape()
                )));
            }
            let n = layer.len();
            layer
                .data_mut()
                .copy_from_slice(&self.values[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn same_layout(&self, other: &ParamVector<F>) -> bool {
        self.layout == other.layout && self.values.len() == other.values.len()
    }

    pub fn check_finite(&self, ctx: &str) -> Result<()> {
        for (i, v) in self.values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("{ctx}: parameter {i} is {v}")));
            }
        }
        Ok(())
    }

    /// Flat parameters reshaped per-layer, for tests and reporting.
    pub fn to_tensors(&self) -> Vec<Tensor<F>> {
        let mut out = Vec::new();
        let mut offset = 0;
        for (_, shape) in &self.layout.entries {
            let n: usize = shape.iter().product();
            out.push(
                Tensor::from_vec(shape, self.values[offset..offset + n].to_vec())
                    .expect("layout is self-consistent"),
            );
            offset += n;
        }
        out
    }
}

/// `new - old`, elementwise.
pub fn model_delta<F: Scalar>(
    new: &ParamVector<F>,
    old: &ParamVector<F>,
) -> Result<DeltaVector<F>> {
    if !new.same_layout(old) {
        return Err(Error::shape("model_delta: layout mismatch".to_string()));
    }
    Ok(DeltaVector {
        values: new
            .values
            .iter()
            .zip(&old.values)
            .map(|(&a, &b)| a - b)
            .collect(),
        layout: new.layout.clone(),
    })
}

/// `old + delta`, elementwise.
pub fn apply_delta<F: Scalar>(
    old: &ParamVector<F>,
    delta: &DeltaVector<F>,
) -> Result<ParamVector<F>> {
    if old.layout != delta.layout || old.values.len() != delta.values.len() {
        return Err(Error::shape("apply_delta: layout mismatch".to_string()));
    }
    Ok(ParamVector {
        values: old
            .values
            .iter()
            .zip(&delta.values)
            .map(|(&a, &b)| a + b)
            .collect(),
        layout: old.layout.clone(),
    })
}

/// Elementwise arithmetic mean with weight `1/|C|`.
pub fn fed_avg<F: Scalar>(client_models: &[ParamVector<F>]) -> Result<ParamVector<F>> {
    let first = client_models
        .first()
        .ok_or_else(|| Error::input("fed_avg: empty client list".to_string()))?;
    for m in &client_models[1..] {
        if !m.same_layout(first) {
            return Err(Error::shape("fed_avg: layout mismatch".to_string()));
        }
    }
    let inv = F::one() / F::from_usize(client_models.len()).unwrap();
    let mut values = vec![F::zero(); first.len()];
    for m in client_models {
        for (acc, &v) in values.iter_mut().zip(&m.values) {
            *acc += v;
        }
    }
    for v in &mut values {
        *v *= inv;
    }
    Ok(ParamVector { values, layout: first.layout.clone() })
}

/// Mean absolute elementwise distance between two congruent vectors.
pub fn mean_abs_distance<F: Scalar>(a: &ParamVector<F>, b: &ParamVector<F>) -> F {
    let n = F::from_usize(a.len().max(1)).unwrap();
    a.values
        .iter()
        .zip(&b.values)
        .map(|(&x, &y)| (x - y).abs())
        .sum::<F>()
        / n
}
