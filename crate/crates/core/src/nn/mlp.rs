use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{BiclError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    Identity,
    Tanh,
    Softmax,
}

/// Fully connected layer; `weights` is row-major with one row per output unit.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for (row, b) in self.weights.chunks_exact(self.inputs).zip(&self.bias) {
            let mut acc = *b;
            for (w, xi) in row.iter().zip(x) {
                acc += w * xi;
            }
            out.push(acc);
        }
    }
}

/// Parameter gradients, shaped like the network they belong to.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn norm(&self) -> f64 {
        self.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|g| g.is_finite())
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|g| *g *= factor);
        }
    }

    /// Rescale so the global norm does not exceed `max_norm`.
    pub fn clip_norm(&mut self, max_norm: f64) {
        let norm = self.norm();
        if norm > max_norm && norm.is_finite() {
            self.scale(max_norm / norm);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()))
    }

    pub fn clear(&mut self) {
        self.scale(0.0);
    }
}

/// Activations recorded by a forward pass, consumed by backward passes.
#[derive(Clone, Debug)]
pub struct Trace {
    /// Input followed by every hidden layer's post-ReLU activation.
    activations: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
    output: OutputActivation,
}

impl Mlp {
    /// ReLU hidden layers; weights and biases drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], output: OutputActivation, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(sizes, output)?;
        for layer in &mut net.layers {
            let bound = 1.0 / (layer.inputs as f64).sqrt();
            for p in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                *p = rng.random_range(-bound..bound);
            }
        }
        Ok(net)
    }

    /// Like [`Mlp::new`] but the output layer is drawn from `U(-bound, bound)`,
    /// so a fresh policy starts close to its neutral output.
    pub fn with_output_bound<R: Rng + ?Sized>(
        sizes: &[usize],
        output: OutputActivation,
        bound: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = Self::new(sizes, output, rng)?;
        if let Some(last) = net.layers.last_mut() {
            for p in last.weights.iter_mut().chain(last.bias.iter_mut()) {
                *p = rng.random_range(-bound..=bound);
            }
        }
        Ok(net)
    }

    pub fn zeros(sizes: &[usize], output: OutputActivation) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(BiclError::Contract(format!("invalid layer sizes {sizes:?}")));
        }
        Ok(Self {
            layers: sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
            output,
        })
    }

    pub fn from_layers(layers: Vec<Dense>, output: OutputActivation) -> Result<Self> {
        if layers.is_empty() {
            return Err(BiclError::Contract("network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].outputs != pair[1].inputs {
                return Err(BiclError::Contract("consecutive layer sizes disagree".into()));
            }
        }
        for l in &layers {
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(BiclError::Contract("layer parameter shapes disagree".into()));
            }
        }
        Ok(Self { layers, output })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.layers[0].inputs];
        sizes.extend(self.layers.iter().map(|l| l.outputs));
        sizes
    }

    pub fn input_len(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_len(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn parameters(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()))
    }

    pub fn parameters_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    /// Mutable access to the `idx`-th parameter in flat (layer, weights, bias) order.
    pub fn parameter_mut(&mut self, mut idx: usize) -> Option<&mut f64> {
        for l in &mut self.layers {
            if idx < l.weights.len() {
                return l.weights.get_mut(idx);
            }
            idx -= l.weights.len();
            if idx < l.bias.len() {
                return l.bias.get_mut(idx);
            }
            idx -= l.bias.len();
        }
        None
    }

    pub fn zero_grads(&self) -> Gradients {
        Gradients {
            layers: self.layers.iter().map(|l| Dense::zeros(l.inputs, l.outputs)).collect(),
        }
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.trace(input, None)?.output)
    }

    /// Forward pass where `mask[j] == false` removes output `j` from the softmax.
    pub fn forward_masked(&self, input: &[f64], mask: &[bool]) -> Result<Vec<f64>> {
        Ok(self.trace(input, Some(mask))?.output)
    }

    pub fn trace(&self, input: &[f64], mask: Option<&[bool]>) -> Result<Trace> {
        if input.len() != self.input_len() {
            return Err(BiclError::Contract(format!(
                "input length {} does not match network input {}",
                input.len(),
                self.input_len()
            )));
        }
        let mut activations = Vec::with_capacity(self.layers.len());
        activations.push(input.to_vec());
        let last = self.layers.len() - 1;
        let mut buf = Vec::new();
        for (li, layer) in self.layers.iter().enumerate() {
            layer.apply(&activations[li], &mut buf);
            if li < last {
                let mut h = std::mem::take(&mut buf);
                h.iter_mut().for_each(|v| *v = v.max(0.0));
                activations.push(h);
            }
        }
        let output = match self.output {
            OutputActivation::Identity => buf,
            OutputActivation::Tanh => buf.into_iter().map(f64::tanh).collect(),
            OutputActivation::Softmax => masked_softmax(&buf, mask)?,
        };
        Ok(Trace {
            activations,
            output,
        })
    }

    /// Gradient of `upstream . output` w.r.t. the output layer's pre-activation.
    fn output_delta(&self, trace: &Trace, upstream: &[f64]) -> Result<Vec<f64>> {
        if upstream.len() != trace.output.len() {
            return Err(BiclError::Contract(format!(
                "upstream gradient length {} does not match output {}",
                upstream.len(),
                trace.output.len()
            )));
        }
        let y = &trace.output;
        Ok(match self.output {
            OutputActivation::Identity => upstream.to_vec(),
            OutputActivation::Tanh => upstream.iter().zip(y).map(|(g, y)| g * (1.0 - y * y)).collect(),
            OutputActivation::Softmax => {
                let dot: f64 = upstream.iter().zip(y).map(|(g, p)| g * p).sum();
                upstream.iter().zip(y).map(|(g, p)| p * (g - dot)).collect()
            }
        })
    }

    fn propagate(&self, trace: &Trace, mut delta: Vec<f64>, mut grads: Option<&mut Gradients>) -> Vec<f64> {
        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let x = &trace.activations[li];
            if let Some(g) = grads.as_deref_mut() {
                let gl = &mut g.layers[li];
                for (o, d) in delta.iter().enumerate() {
                    if *d == 0.0 {
                        continue;
                    }
                    gl.bias[o] += d;
                    let row = &mut gl.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (w, xi) in row.iter_mut().zip(x) {
                        *w += d * xi;
                    }
                }
            }
            let mut prev = vec![0.0; layer.inputs];
            for (o, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (p, w) in prev.iter_mut().zip(row) {
                    *p += d * w;
                }
            }
            if li > 0 {
                // ReLU: subgradient 0 where the activation is not positive
                for (p, a) in prev.iter_mut().zip(x) {
                    if *a <= 0.0 {
                        *p = 0.0;
                    }
                }
            }
            delta = prev;
        }
        delta
    }

    /// Accumulates the parameter gradient of `upstream . output` into `grads`
    /// and returns the gradient w.r.t. the input.
    pub fn backward(&self, trace: &Trace, upstream: &[f64], grads: &mut Gradients) -> Result<Vec<f64>> {
        self.check_grads(grads)?;
        let delta = self.output_delta(trace, upstream)?;
        Ok(self.propagate(trace, delta, Some(grads)))
    }

    /// Like [`Mlp::backward`] but starting from a gradient w.r.t. the output
    /// pre-activation (logits), e.g. the fused softmax cross-entropy gradient.
    pub fn backward_logits(&self, trace: &Trace, dlogits: &[f64], grads: &mut Gradients) -> Result<Vec<f64>> {
        self.check_grads(grads)?;
        if dlogits.len() != self.output_len() {
            return Err(BiclError::Contract("logit gradient has the wrong length".into()));
        }
        Ok(self.propagate(trace, dlogits.to_vec(), Some(grads)))
    }

    /// Gradient of `upstream . output` w.r.t. the input only.
    pub fn input_gradient(&self, trace: &Trace, upstream: &[f64]) -> Result<Vec<f64>> {
        let delta = self.output_delta(trace, upstream)?;
        Ok(self.propagate(trace, delta, None))
    }

    fn check_grads(&self, grads: &Gradients) -> Result<()> {
        let same = grads.layers.len() == self.layers.len()
            && grads
                .layers
                .iter()
                .zip(&self.layers)
                .all(|(g, l)| g.inputs == l.inputs && g.outputs == l.outputs);
        if same {
            Ok(())
        } else {
            Err(BiclError::Contract("gradient buffer shape does not match network".into()))
        }
    }

    /// Polyak averaging `self <- tau * source + (1 - tau) * self`.
    pub fn soft_update(&mut self, source: &Mlp, tau: f64) {
        for (t, s) in self.parameters_mut().zip(source.parameters()) {
            *t = tau * s + (1.0 - tau) * *t;
        }
    }
}

/// Softmax over the unmasked entries; masked entries get probability zero.
pub fn masked_softmax(logits: &[f64], mask: Option<&[bool]>) -> Result<Vec<f64>> {
    let allowed = |j: usize| mask.map_or(true, |m| m.get(j).copied().unwrap_or(false));
    if let Some(m) = mask {
        if m.len() != logits.len() {
            return Err(BiclError::Contract(format!(
                "mask length {} does not match {} logits",
                m.len(),
                logits.len()
            )));
        }
    }
    let max = logits
        .iter()
        .enumerate()
        .filter(|&(j, _)| allowed(j))
        .map(|(_, &z)| z)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(BiclError::Contract("softmax mask excludes every output".into()));
    }
    let mut out: Vec<f64> = logits
        .iter()
        .enumerate()
        .map(|(j, &z)| if allowed(j) { (z - max).exp() } else { 0.0 })
        .collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= total);
    Ok(out)
}
