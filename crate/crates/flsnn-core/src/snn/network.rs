//! Dense networks and backpropagation through time.
//!
//! Hidden layers of an SNN apply LIF dynamics per timestep; the readout is a
//! non-spiking, non-leaking integrator whose accumulated membrane at `t = T`
//! is the logits. Layer-to-layer propagation happens within a timestep; the
//! membrane recurrence and the reset term connect consecutive timesteps.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::snn::encode::SpikeBatch;
use crate::snn::lif::{lif_step_mode, surrogate_grad, LifConfig, LifLayerState};
use crate::tensor::{matmul_nn, matmul_nt, matmul_nt_acc, outer_acc, Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetworkKind {
    Snn,
    Ann,
}

/// Whether spikes are the hard threshold function or its differentiable
/// stand-in (used to validate the BPTT machinery by finite differences).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpikeMode {
    Spiking,
    Smooth,
}

/// Stack of dense weight matrices (`out_width x in_width`, no bias).
/// The last layer is the readout (SNN) or linear logits (ANN).
#[derive(Debug, Clone)]
pub struct Network<F: Scalar> {
    pub kind: NetworkKind,
    pub layers: Vec<Tensor<F>>,
    pub lif: LifConfig<F>,
}

impl<F: Scalar> Network<F> {
    /// Initialize with per-layer uniform weights in `±sqrt(6 / (in + out))`.
    pub fn init(
        kind: NetworkKind,
        widths: &[usize],
        lif: LifConfig<F>,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::config("model.layers needs at least 2 widths".to_string()));
        }
        lif.validate()?;
        let mut layers = Vec::with_capacity(widths.len() - 1);
        for w in widths.windows(2) {
            let (inw, outw) = (w[0], w[1]);
            let bound = (6.0 / (inw + outw) as f64).sqrt();
            let data: Vec<F> = (0..inw * outw)
                .map(|_| F::from_f64c(rng.random_range(-bound..bound)))
                .collect();
            layers.push(Tensor::from_vec(&[outw, inw], data)?);
        }
        Ok(Network { kind, layers, lif })
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::config("network has no layers".to_string()));
        }
        for (k, pair) in self.layers.windows(2).enumerate() {
            if pair[0].rows() != pair[1].cols() {
                return Err(Error::shape(format!(
                    "layer {k} out width {} != layer {} in width {}",
                    pair[0].rows(),
                    k + 1,
                    pair[1].cols()
                )));
            }
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].cols()
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().unwrap().rows()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.len()).sum()
    }
}

/// Per-layer weight gradients, shape-congruent with `Network::layers`.
#[derive(Debug, Clone)]
pub struct GradAccumulator<F: Scalar> {
    pub layers: Vec<Tensor<F>>,
}

impl<F: Scalar> GradAccumulator<F> {
    pub fn zeros_like(net: &Network<F>) -> Self {
        GradAccumulator {
            layers: net.layers.iter().map(|l| Tensor::zeros(l.shape())).collect(),
        }
    }
}

/// Everything `backward` needs from a forward pass.
pub struct Trace<F: Scalar> {
    mode: SpikeMode,
    input: SpikeBatch<F>,
    /// `[hidden_layer][t]` membrane potentials U.
    membranes: Vec<Vec<Tensor<F>>>,
    /// `[hidden_layer][t]` emitted spikes S.
    spikes: Vec<Vec<Tensor<F>>>,
    layer_shapes: Vec<Vec<usize>>,
}

/// Simulate an SNN over all timesteps of `spikes`, recording the trace.
pub fn forward<F: Scalar>(
    net: &Network<F>,
    spikes: &SpikeBatch<F>,
) -> Result<(Tensor<F>, Trace<F>)> {
    forward_mode(net, spikes, SpikeMode::Spiking)
}

pub fn forward_mode<F: Scalar>(
    net: &Network<F>,
    spikes: &SpikeBatch<F>,
    mode: SpikeMode,
) -> Result<(Tensor<F>, Trace<F>)> {
    if net.kind != NetworkKind::Snn {
        return Err(Error::input("forward() is for SNN networks".to_string()));
    }
    net.validate()?;
    if spikes.features != net.input_width() {
        return Err(Error::shape(format!(
            "input features {} != first layer in width {}",
            spikes.features,
            net.input_width()
        )));
    }
    let smooth = mode == SpikeMode::Smooth;
    let batch = spikes.batch;
    let n_hidden = net.layers.len() - 1;
    let readout = &net.layers[n_hidden];

    let mut states: Vec<LifLayerState<F>> = net.layers[..n_hidden]
        .iter()
        .map(|l| LifLayerState::resting(batch, l.rows()))
        .collect();
    let mut membranes: Vec<Vec<Tensor<F>>> = vec![Vec::with_capacity(spikes.timesteps); n_hidden];
    let mut rec_spikes: Vec<Vec<Tensor<F>>> = vec![Vec::with_capacity(spikes.timesteps); n_hidden];
    let mut readout_mem = Tensor::zeros(&[batch, readout.rows()]);

    for t in 0..spikes.timesteps {
        let mut x = spikes.at(t);
        for k in 0..n_hidden {
            let z = matmul_nt(&x, &net.layers[k]);
            let (u, s) = lif_step_mode(&states[k], &z, &net.lif, smooth)?;
            states[k] = LifLayerState {
                membrane: u.clone(),
                prev_spikes: s.clone(),
            };
            membranes[k].push(u);
            rec_spikes[k].push(s.clone());
            x = s;
        }
        matmul_nt_acc(&x, readout, &mut readout_mem);
    }
    readout_mem.check_finite("forward logits")?;
    let trace = Trace {
        mode,
        input: spikes.clone(),
        membranes,
        spikes: rec_spikes,
        layer_shapes: net.layers.iter().map(|l| l.shape().to_vec()).collect(),
    };
    Ok((readout_mem, trace))
}

/// Full BPTT: sums the chain-rule product over every timestep, flowing
/// through the spike path, the `beta * U^{t-1}` recurrence and the
/// `-S^{t-1} * U_thr` reset term, with `dS/dU` given by the triangular
/// surrogate in both modes.
pub fn backward<F: Scalar>(
    net: &Network<F>,
    trace: &Trace<F>,
    loss_grad: &Tensor<F>,
    mode: SpikeMode,
) -> Result<GradAccumulator<F>> {
    if trace.mode != mode {
        return Err(Error::input("backward mode differs from the trace's forward mode".to_string()));
    }
    if trace.layer_shapes.len() != net.layers.len()
        || trace
            .layer_shapes
            .iter()
            .zip(&net.layers)
            .any(|(s, l)| s != l.shape())
    {
        return Err(Error::shape("trace does not match this network".to_string()));
    }
    let n_hidden = net.layers.len() - 1;
    let readout = &net.layers[n_hidden];
    if loss_grad.shape() != [trace.input.batch, readout.rows()] {
        return Err(Error::shape(format!(
            "loss_grad {:?} vs [batch={}, out={}]",
            loss_grad.shape(),
            trace.input.batch,
            readout.rows()
        )));
    }
    let cfg = &net.lif;
    let timesteps = trace.input.timesteps;
    let mut grads = GradAccumulator::zeros_like(net);

    // dL/dS for the top hidden layer via the readout is the same every t.
    let readout_feedback = if n_hidden > 0 {
        Some(matmul_nn(loss_grad, readout))
    } else {
        None
    };

    // lambda[k] holds dL/dU_k^{t+1} from the previous (later) iteration.
    let mut lambda_next: Vec<Tensor<F>> = net.layers[..n_hidden]
        .iter()
        .map(|l| Tensor::zeros(&[trace.input.batch, l.rows()]))
        .collect();

    for t in (0..timesteps).rev() {
        // Readout weight gradient: M^T accumulates S^t W^T each step.
        let top_spikes = if n_hidden > 0 {
            trace.spikes[n_hidden - 1][t].clone()
        } else {
            trace.input.at(t)
        };
        outer_acc(loss_grad, &top_spikes, &mut grads.layers[n_hidden]);

        // Hidden layers, top-down so layer k+1's lambda at this t is ready.
        let mut lambda_here: Vec<Option<Tensor<F>>> = vec![None; n_hidden];
        for k in (0..n_hidden).rev() {
            // dL/dS_k^t
            let mut ds = if k == n_hidden - 1 {
                readout_feedback.as_ref().unwrap().clone()
            } else {
                matmul_nn(lambda_here[k + 1].as_ref().unwrap(), &net.layers[k + 1])
            };
            // reset term: U_k^{t+1} contains -S_k^t * U_thr
            for (d, &l) in ds.data_mut().iter_mut().zip(lambda_next[k].data()) {
                *d -= l * cfg.u_thr;
            }
            // lambda_k^t = ds * g(U_k^t) + beta * lambda_k^{t+1}
            let mut lambda = ds;
            for ((l, &u), &ln) in lambda
                .data_mut()
                .iter_mut()
                .zip(trace.membranes[k][t].data())
                .zip(lambda_next[k].data())
            {
                *l = *l * surrogate_grad(u, cfg) + cfg.beta * ln;
            }
            // Weight gradient against this layer's input spikes at t.
            let input_t = if k == 0 {
                trace.input.at(t)
            } else {
                trace.spikes[k - 1][t].clone()
            };
            outer_acc(&lambda, &input_t, &mut grads.layers[k]);
            lambda_here[k] = Some(lambda);
        }
        for (k, l) in lambda_here.into_iter().enumerate() {
            lambda_next[k] = l.unwrap();
        }
    }
    Ok(grads)
}
