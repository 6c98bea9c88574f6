use alloc::vec;
use alloc::vec::Vec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::{self, Cache, ConvGeom};
use super::{xavier_uniform, LayerSpec, NnError, Scalar, Tensor};

/// A layer stack with its parameters. Parameter tensors are stored flat in
/// layer order, weight before bias.
#[derive(Clone, Debug, PartialEq)]
pub struct Network<T> {
    pub layers: Vec<LayerSpec>,
    pub input_shape: Vec<usize>,
    pub params: Vec<Tensor<T>>,
    /// `shapes[i]` is the input shape of layer `i`; the last entry is the
    /// network output.
    shapes: Vec<Vec<usize>>,
    /// Index of each layer's weight in `params`.
    param_at: Vec<Option<usize>>,
}

/// Activations and caches recorded by [`Network::forward_trace`].
#[derive(Clone, Debug)]
pub struct Trace<T> {
    pub acts: Vec<Vec<T>>,
    caches: Vec<Cache<T>>,
}

impl<T> Trace<T> {
    pub fn output(&self) -> &[T] {
        self.acts.last().expect("trace holds the input")
    }
}

impl<T: Scalar> Network<T> {
    /// Validates shapes layer by layer and allocates zeroed parameters.
    pub fn zeroed(layers: &[LayerSpec], input_shape: &[usize]) -> Result<Self, NnError> {
        let mut shapes = vec![input_shape.to_vec()];
        let mut params = Vec::new();
        let mut param_at = Vec::with_capacity(layers.len());
        for (i, layer) in layers.iter().enumerate() {
            let next = layer.output_shape(&shapes[i]).map_err(|reason| NnError::Shape {
                layer: i,
                kind: layer.kind(),
                reason,
            })?;
            shapes.push(next);
            match layer.param_shapes() {
                Some((w, b)) => {
                    param_at.push(Some(params.len()));
                    params.push(Tensor::zeros(&w));
                    params.push(Tensor::zeros(&b));
                }
                None => param_at.push(None),
            }
        }
        Ok(Self {
            layers: layers.to_vec(),
            input_shape: input_shape.to_vec(),
            params,
            shapes,
            param_at,
        })
    }

    /// Xavier-uniform weights, zero biases, drawn in layer order from one
    /// seeded stream.
    pub fn new(layers: &[LayerSpec], input_shape: &[usize], seed: u64) -> Result<Self, NnError> {
        let mut net = Self::zeroed(layers, input_shape)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (i, layer) in layers.iter().enumerate() {
            if let Some(p) = net.param_at[i] {
                let (fan_in, fan_out) = layer.fans();
                let shape = net.params[p].shape.clone();
                net.params[p] = xavier_uniform(&shape, fan_in, fan_out, &mut rng);
            }
        }
        Ok(net)
    }

    pub fn output_shape(&self) -> &[usize] {
        self.shapes.last().expect("at least the input shape")
    }

    pub fn layer_input_shape(&self, layer: usize) -> &[usize] {
        &self.shapes[layer]
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    /// (weight, bias) of layer `i`, if it has parameters.
    pub fn layer_params(&self, i: usize) -> Option<(&Tensor<T>, &Tensor<T>)> {
        self.param_at[i].map(|p| (&self.params[p], &self.params[p + 1]))
    }

    pub fn layer_params_mut(&mut self, i: usize) -> Option<(&mut Tensor<T>, &mut Tensor<T>)> {
        let p = self.param_at[i]?;
        let (a, b) = self.params.split_at_mut(p + 1);
        Some((&mut a[p], &mut b[0]))
    }

    pub fn cast<U: Scalar>(&self) -> Network<U> {
        Network {
            layers: self.layers.clone(),
            input_shape: self.input_shape.clone(),
            params: self.params.iter().map(Tensor::cast).collect(),
            shapes: self.shapes.clone(),
            param_at: self.param_at.clone(),
        }
    }

    /// Splits into layers `..at` and `at..`, keeping trained parameters.
    pub fn split_at(&self, at: usize) -> Result<(Self, Self), NnError> {
        let mut front = Self::zeroed(&self.layers[..at], &self.input_shape)?;
        let mut back = Self::zeroed(&self.layers[at..], &self.shapes[at])?;
        let cut = self.param_at[at..].iter().flatten().next().copied().unwrap_or(self.params.len());
        front.params = self.params[..cut].to_vec();
        back.params = self.params[cut..].to_vec();
        Ok((front, back))
    }

    pub fn zero_grad(&mut self) {
        self.params.iter_mut().for_each(Tensor::zero_grad);
    }

    fn check_input(&self, x: &[T]) -> Result<(), NnError> {
        let want: usize = self.input_shape.iter().product();
        if x.len() != want {
            return Err(NnError::Shape {
                layer: 0,
                kind: self.layers.first().map_or("input", LayerSpec::kind),
                reason: alloc::format!("input has {} values, model expects {:?}", x.len(), self.input_shape),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>, NnError> {
        let mut trace = self.forward_trace(x)?;
        Ok(trace.acts.pop().expect("non-empty"))
    }

    pub fn forward_trace(&self, x: &[T]) -> Result<Trace<T>, NnError> {
        self.check_input(x)?;
        let mut acts: Vec<Vec<T>> = Vec::with_capacity(self.layers.len() + 1);
        let mut caches = Vec::with_capacity(self.layers.len());
        acts.push(x.to_vec());
        for (i, layer) in self.layers.iter().enumerate() {
            let input = &acts[i];
            let in_shape = &self.shapes[i];
            let mut out = vec![T::zero(); self.shapes[i + 1].iter().product()];
            let cache = match layer {
                LayerSpec::Conv2d { .. } => {
                    let (w, b) = self.layer_params(i).expect("conv has params");
                    Cache::Cols(layers::conv_forward(&self.geom(i), input, &w.data, &b.data, &mut out))
                }
                LayerSpec::Linear { inputs, .. } => {
                    let (w, b) = self.layer_params(i).expect("linear has params");
                    layers::linear_forward(*inputs, input, &w.data, &b.data, &mut out);
                    Cache::None
                }
                LayerSpec::Relu => {
                    for (o, &v) in out.iter_mut().zip(input) {
                        *o = if v > T::zero() { v } else { T::zero() };
                    }
                    Cache::None
                }
                LayerSpec::Tanh => {
                    for (o, &v) in out.iter_mut().zip(input) {
                        *o = v.tanh();
                    }
                    Cache::None
                }
                LayerSpec::Sigmoid => {
                    for (o, &v) in out.iter_mut().zip(input) {
                        *o = layers::sigmoid(v);
                    }
                    Cache::None
                }
                LayerSpec::Softmax => {
                    out.copy_from_slice(input);
                    layers::softmax_in_place(&mut out);
                    Cache::None
                }
                LayerSpec::MaxPool { size } => Cache::Argmax(layers::maxpool_forward(in_shape, *size, input, &mut out)),
                LayerSpec::Flatten | LayerSpec::Reshape { .. } => {
                    out.copy_from_slice(input);
                    Cache::None
                }
                LayerSpec::Gru { inputs, hidden } => {
                    let (w, b) = self.layer_params(i).expect("gru has params");
                    let (h, steps) = layers::gru_forward(*inputs, *hidden, input, &w.data, &b.data);
                    out = h;
                    Cache::Gru(steps)
                }
                LayerSpec::Normalize => Cache::InvStd(layers::normalize_forward(in_shape, input, &mut out)),
                LayerSpec::Upsample { factor } => {
                    layers::upsample_forward(in_shape, *factor, input, &mut out);
                    Cache::None
                }
            };
            acts.push(out);
            caches.push(cache);
        }
        Ok(Trace { acts, caches })
    }

    fn geom(&self, i: usize) -> ConvGeom {
        let LayerSpec::Conv2d { in_channels, filters, kernel, stride, padding } = self.layers[i] else {
            unreachable!("geometry of a non-conv layer")
        };
        let (inp, out) = (&self.shapes[i], &self.shapes[i + 1]);
        ConvGeom {
            c: in_channels,
            h: inp[1],
            w: inp[2],
            o: filters,
            k: kernel,
            s: stride,
            p: padding,
            oh: out[1],
            ow: out[2],
        }
    }

    /// Backpropagates `grad_out` through a recorded trace, adding parameter
    /// gradients into each tensor's `grad` (call [`Network::zero_grad`] to
    /// reset), and returns the gradient with respect to the input.
    pub fn backward(&mut self, trace: &Trace<T>, grad_out: &[T]) -> Vec<T> {
        assert_eq!(grad_out.len(), trace.output().len(), "upstream gradient has the output's size");
        let mut g = grad_out.to_vec();
        for i in (0..self.layers.len()).rev() {
            let input = &trace.acts[i];
            let output = &trace.acts[i + 1];
            let mut gi = vec![T::zero(); input.len()];
            match &self.layers[i] {
                LayerSpec::Conv2d { .. } => {
                    let geom = self.geom(i);
                    let (w, b) = self.layer_params_mut(i).expect("conv has params");
                    let gb = b.grad_mut();
                    let wdata = &w.data;
                    let gw = w.grad.get_or_insert_with(|| vec![T::zero(); wdata.len()]);
                    let Cache::Cols(cols) = &trace.caches[i] else { unreachable!() };
                    layers::conv_backward(&geom, cols, wdata, &g, gw, gb, &mut gi);
                }
                LayerSpec::Linear { inputs, .. } => {
                    let inputs = *inputs;
                    let (w, b) = self.layer_params_mut(i).expect("linear has params");
                    let gb = b.grad_mut();
                    let wdata = &w.data;
                    let gw = w.grad.get_or_insert_with(|| vec![T::zero(); wdata.len()]);
                    layers::linear_backward(inputs, input, wdata, &g, gw, gb, &mut gi);
                }
                LayerSpec::Relu => {
                    for ((d, &u), &v) in gi.iter_mut().zip(&g).zip(input) {
                        *d = if v > T::zero() { u } else { T::zero() };
                    }
                }
                LayerSpec::Tanh => {
                    for ((d, &u), &y) in gi.iter_mut().zip(&g).zip(output) {
                        *d = u * (T::one() - y * y);
                    }
                }
                LayerSpec::Sigmoid => {
                    for ((d, &u), &y) in gi.iter_mut().zip(&g).zip(output) {
                        *d = u * y * (T::one() - y);
                    }
                }
                LayerSpec::Softmax => {
                    let dot: T = g.iter().zip(output).map(|(&u, &y)| u * y).sum();
                    for ((d, &u), &y) in gi.iter_mut().zip(&g).zip(output) {
                        *d = y * (u - dot);
                    }
                }
                LayerSpec::MaxPool { .. } => {
                    let Cache::Argmax(arg) = &trace.caches[i] else { unreachable!() };
                    for (&a, &u) in arg.iter().zip(&g) {
                        gi[a as usize] += u;
                    }
                }
                LayerSpec::Flatten | LayerSpec::Reshape { .. } => gi.copy_from_slice(&g),
                LayerSpec::Gru { inputs, hidden } => {
                    let (inputs, hidden) = (*inputs, *hidden);
                    let Cache::Gru(steps) = &trace.caches[i] else { unreachable!() };
                    let (w, b) = self.layer_params_mut(i).expect("gru has params");
                    let gb = b.grad_mut();
                    let wdata = &w.data;
                    let gw = w.grad.get_or_insert_with(|| vec![T::zero(); wdata.len()]);
                    layers::gru_backward(inputs, hidden, input, wdata, steps, &g, gw, gb, &mut gi);
                }
                LayerSpec::Normalize => {
                    let Cache::InvStd(inv) = &trace.caches[i] else { unreachable!() };
                    layers::normalize_backward(inv, output, &g, &mut gi);
                }
                LayerSpec::Upsample { factor } => {
                    layers::upsample_backward(&self.shapes[i], *factor, &g, &mut gi);
                }
            }
            g = gi;
        }
        g
    }
}
