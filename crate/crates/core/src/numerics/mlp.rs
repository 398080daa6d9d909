use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Width of every hidden layer in the policy, Q and value networks.
pub const HIDDEN_UNITS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub input: usize,
    pub output: usize,
    pub activation: Activation,
}

impl LayerShape {
    fn len(&self) -> usize {
        self.input * self.output + self.output
    }
}

/// Parameters of a fully connected network, stored flat.
///
/// Layer `k` occupies a contiguous block: its row-major `output x input`
/// weight matrix followed by its bias. Gradients and Adam moments use the
/// same container so every element-wise update is a zip over `values`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    shapes: Vec<LayerShape>,
    values: Vec<f64>,
}

/// Activations recorded by [`ParameterSet::forward`], consumed by `backward`.
#[derive(Debug, Clone)]
pub struct Cache {
    /// Input to each layer.
    inputs: Vec<Vec<f64>>,
    /// Pre-activation of each layer.
    pre: Vec<Vec<f64>>,
}

impl ParameterSet {
    /// Builds a network with the given layer widths: ReLU on hidden layers,
    /// linear output. Weights and biases are drawn uniformly in
    /// `±1/sqrt(fan_in)`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Config(format!("invalid layer sizes {sizes:?}")));
        }
        let shapes: Vec<LayerShape> = sizes
            .windows(2)
            .enumerate()
            .map(|(k, w)| LayerShape {
                input: w[0],
                output: w[1],
                activation: if k + 2 == sizes.len() {
                    Activation::Linear
                } else {
                    Activation::Relu
                },
            })
            .collect();
        let mut values = Vec::with_capacity(shapes.iter().map(LayerShape::len).sum());
        for shape in &shapes {
            let bound = 1.0 / (shape.input as f64).sqrt();
            for _ in 0..shape.len() {
                values.push(rng.random_range(-bound..bound));
            }
        }
        Ok(Self { shapes, values })
    }

    /// Builds from explicit shapes and values, checking that they chain.
    pub fn from_parts(shapes: Vec<LayerShape>, values: Vec<f64>) -> Result<Self> {
        let set = Self { shapes, values };
        set.validate()?;
        Ok(set)
    }

    /// A zero-filled set with the same shapes (gradient / moment container).
    pub fn zeros_like(&self) -> Self {
        Self {
            shapes: self.shapes.clone(),
            values: vec![0.0; self.values.len()],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.shapes.is_empty() {
            return Err(Error::Config("network has no layers".into()));
        }
        for pair in self.shapes.windows(2) {
            if pair[0].output != pair[1].input {
                return Err(Error::Config(format!(
                    "layer dimensions do not chain: {} -> {}",
                    pair[0].output, pair[1].input
                )));
            }
        }
        let expected: usize = self.shapes.iter().map(LayerShape::len).sum();
        if expected != self.values.len() {
            return Err(Error::Config(format!(
                "expected {expected} parameters, found {}",
                self.values.len()
            )));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("non-finite parameter".into()));
        }
        Ok(())
    }

    pub fn shapes(&self) -> &[LayerShape] {
        &self.shapes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.shapes[0].input
    }

    pub fn output_dim(&self) -> usize {
        self.shapes[self.shapes.len() - 1].output
    }

    pub fn same_shape(&self, other: &ParameterSet) -> bool {
        self.shapes == other.shapes
    }

    /// Multiplies the last layer's weights and bias by `factor`.
    pub fn scale_output_layer(&mut self, factor: f64) {
        let last = self.shapes[self.shapes.len() - 1].len();
        let n = self.values.len();
        for v in &mut self.values[n - last..] {
            *v *= factor;
        }
    }

    /// Weight (row-major) and bias slices of layer `k`.
    pub fn layer(&self, k: usize) -> (&[f64], &[f64]) {
        let off = self.offset(k);
        let s = self.shapes[k];
        let w = s.input * s.output;
        (
            &self.values[off..off + w],
            &self.values[off + w..off + w + s.output],
        )
    }

    fn offset(&self, k: usize) -> usize {
        self.shapes[..k].iter().map(LayerShape::len).sum()
    }

    /// Forward pass returning the output and the activation record.
    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, Cache)> {
        self.check_input(input)?;
        let mut inputs = Vec::with_capacity(self.shapes.len());
        let mut pre = Vec::with_capacity(self.shapes.len());
        let mut x = input.to_vec();
        let mut off = 0;
        for shape in &self.shapes {
            let z = affine(&self.values[off..off + shape.len()], shape, &x);
            off += shape.len();
            let out = activate(shape.activation, &z);
            inputs.push(std::mem::replace(&mut x, out));
            pre.push(z);
        }
        Ok((x, Cache { inputs, pre }))
    }

    /// Forward pass without keeping the activation record.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut x = input.to_vec();
        let mut off = 0;
        for shape in &self.shapes {
            let z = affine(&self.values[off..off + shape.len()], shape, &x);
            off += shape.len();
            x = activate(shape.activation, &z);
        }
        Ok(x)
    }

    /// Backward pass: accumulates `d loss / d params` into `grad` and
    /// returns `d loss / d input`.
    pub fn backward_into(
        &self,
        cache: &Cache,
        upstream: &[f64],
        grad: &mut ParameterSet,
    ) -> Result<Vec<f64>> {
        if !self.same_shape(grad) {
            return Err(Error::Config("gradient container shape mismatch".into()));
        }
        self.backprop(cache, upstream, Some(grad))
    }

    /// `d loss / d input` only, without touching any parameter gradient.
    pub fn input_gradient(&self, cache: &Cache, upstream: &[f64]) -> Result<Vec<f64>> {
        self.backprop(cache, upstream, None)
    }

    fn backprop(&self, cache: &Cache, upstream: &[f64], mut grad: Option<&mut ParameterSet>) -> Result<Vec<f64>> {
        if cache.inputs.len() != self.shapes.len() {
            return Err(Error::Config("cache does not match network depth".into()));
        }
        if upstream.len() != self.output_dim() {
            return Err(Error::Config(format!(
                "upstream gradient has length {}, expected {}",
                upstream.len(),
                self.output_dim()
            )));
        }
        let mut delta = upstream.to_vec();
        let mut end = self.values.len();
        for k in (0..self.shapes.len()).rev() {
            let shape = self.shapes[k];
            let start = end - shape.len();
            if shape.activation == Activation::Relu {
                for (d, z) in delta.iter_mut().zip(&cache.pre[k]) {
                    if *z <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let x = &cache.inputs[k];
            if x.len() != shape.input || cache.pre[k].len() != shape.output {
                return Err(Error::Config("cache shape mismatch".into()));
            }
            let wlen = shape.input * shape.output;
            if let Some(grad) = grad.as_deref_mut() {
                let g = &mut grad.values[start..end];
                let (gw, gb) = g.split_at_mut(wlen);
                for (o, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    gb[o] += d;
                    for (gwi, &xi) in gw[o * shape.input..(o + 1) * shape.input].iter_mut().zip(x) {
                        *gwi += d * xi;
                    }
                }
            }
            let w = &self.values[start..start + wlen];
            let mut next = vec![0.0; shape.input];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for (n, &wi) in next.iter_mut().zip(&w[o * shape.input..(o + 1) * shape.input]) {
                    *n += d * wi;
                }
            }
            delta = next;
            end = start;
        }
        Ok(delta)
    }

    /// Backward pass returning a fresh gradient and the input gradient.
    pub fn backward(&self, cache: &Cache, upstream: &[f64]) -> Result<(ParameterSet, Vec<f64>)> {
        let mut grad = self.zeros_like();
        let dx = self.backward_into(cache, upstream, &mut grad)?;
        Ok((grad, dx))
    }

    /// `self <- weight * other + (1 - weight) * self`, element-wise.
    pub fn blend_toward(&mut self, other: &ParameterSet, weight: f64) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::Config("blend between differently shaped networks".into()));
        }
        for (t, &s) in self.values.iter_mut().zip(&other.values) {
            *t = weight * s + (1.0 - weight) * *t;
        }
        Ok(())
    }

    /// Adds `factor * other` element-wise.
    pub fn add_scaled(&mut self, other: &ParameterSet, factor: f64) {
        debug_assert!(self.same_shape(other));
        for (a, &b) in self.values.iter_mut().zip(&other.values) {
            *a += factor * b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Euclidean distance between two equally shaped sets.
    pub fn distance(&self, other: &ParameterSet) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::Config(format!(
                "input has length {}, network expects {}",
                input.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }
}

fn affine(block: &[f64], shape: &LayerShape, x: &[f64]) -> Vec<f64> {
    let wlen = shape.input * shape.output;
    let (w, b) = block.split_at(wlen);
    w.chunks_exact(shape.input)
        .zip(b)
        .map(|(row, &bias)| row.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>() + bias)
        .collect()
}

fn activate(activation: Activation, z: &[f64]) -> Vec<f64> {
    match activation {
        Activation::Relu => z.iter().map(|&v| v.max(0.0)).collect(),
        Activation::Linear => z.to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identity_layer() -> ParameterSet {
        ParameterSet::from_parts(
            vec![LayerShape {
                input: 2,
                output: 2,
                activation: Activation::Linear,
            }],
            vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0],
        )
        .unwrap()
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let (out, _) = identity_layer().forward(&[1.0, 2.0]).unwrap();
        assert_eq!(out, vec![1.0, 2.0]);
    }

    #[test]
    fn relu_layer_clips_negatives() {
        let net = ParameterSet::from_parts(
            vec![LayerShape {
                input: 2,
                output: 2,
                activation: Activation::Relu,
            }],
            vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0],
        )
        .unwrap();
        assert_eq!(net.predict(&[-3.0, 4.0]).unwrap(), vec![0.0, 4.0]);
    }

    #[test]
    fn squared_output_gradient_by_hand() {
        // y = w.x + b with y = 3 at x = [1, 2]; loss = y^2 so dL/dw = 2*3*x.
        let net = ParameterSet::from_parts(
            vec![LayerShape {
                input: 2,
                output: 1,
                activation: Activation::Linear,
            }],
            vec![1.0, 1.0, 0.0],
        )
        .unwrap();
        let (y, cache) = net.forward(&[1.0, 2.0]).unwrap();
        assert_eq!(y, vec![3.0]);
        let (g, dx) = net.backward(&cache, &[2.0 * y[0]]).unwrap();
        assert_eq!(g.values(), &[6.0, 12.0, 6.0]);
        assert_eq!(dx, vec![6.0, 6.0]);
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = ParameterSet::new(&[4, 8, 8, 2], &mut rng).unwrap();
        let (_, cache) = net.forward(&[0.1, -0.2, 0.3, 0.4]).unwrap();
        let (g, dx) = net.backward(&cache, &[0.0, 0.0]).unwrap();
        assert!(g.values().iter().all(|&v| v == 0.0));
        assert!(dx.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dimension_errors() {
        let net = identity_layer();
        assert!(matches!(net.forward(&[1.0]), Err(Error::Config(_))));
        let (_, cache) = net.forward(&[1.0, 1.0]).unwrap();
        assert!(net.backward(&cache, &[1.0]).is_err());
        let bad = ParameterSet::from_parts(
            vec![
                LayerShape { input: 2, output: 3, activation: Activation::Relu },
                LayerShape { input: 4, output: 1, activation: Activation::Linear },
            ],
            vec![0.0; 9 + 5],
        );
        assert!(bad.is_err());
    }

    #[test]
    fn init_bounds_and_chaining() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let net = ParameterSet::new(&[7, 64, 64, 2], &mut rng).unwrap();
        net.validate().unwrap();
        let (w, _) = net.layer(0);
        let bound = 1.0 / 7f64.sqrt();
        assert!(w.iter().all(|v| v.abs() <= bound));
        assert_eq!(net.shapes()[2].activation, Activation::Linear);
        assert_eq!(net.shapes()[0].activation, Activation::Relu);
    }

    #[test]
    fn blend_weights() {
        let a = identity_layer();
        let mut t = a.zeros_like();
        t.values_mut().iter_mut().for_each(|v| *v = 1.0);
        let mut s = a.zeros_like();
        s.values_mut().iter_mut().for_each(|v| *v = 2.0);
        t.blend_toward(&s, 0.005).unwrap();
        assert!(t.values().iter().all(|&v| (v - 1.005).abs() < 1e-15));
    }

    #[test]
    fn forward_matches_plain_reevaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = ParameterSet::new(&[3, 5, 2], &mut rng).unwrap();
        let x = [0.4, -1.1, 0.7];
        let v = net.values();
        // layer 1: 5x3 weights then 5 biases; layer 2: 2x5 weights then 2 biases
        let mut h = [0.0; 5];
        for o in 0..5 {
            let mut z = v[15 + o];
            for i in 0..3 {
                z += v[o * 3 + i] * x[i];
            }
            h[o] = if z > 0.0 { z } else { 0.0 };
        }
        let base = 20;
        for o in 0..2 {
            let mut z = v[base + 10 + o];
            for i in 0..5 {
                z += v[base + o * 5 + i] * h[i];
            }
            assert!((net.predict(&x).unwrap()[o] - z).abs() < 1e-12);
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        use crate::numerics::gradcheck::check_gradient;
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for sizes in [vec![3, 4, 2], vec![5, 16, 16, 3], vec![7, 64, 64, 64, 2]] {
            let net = ParameterSet::new(&sizes, &mut rng).unwrap();
            let x: Vec<f64> = (0..sizes[0]).map(|_| rng.random_range(-1.0..1.0)).collect();
            let c: Vec<f64> = (0..*sizes.last().unwrap()).map(|_| rng.random_range(-1.0..1.0)).collect();
            // loss = sum_k c_k y_k^2 / 2
            let loss = |p: &ParameterSet| -> f64 {
                let y = p.predict(&x).unwrap();
                y.iter().zip(&c).map(|(y, c)| 0.5 * c * y * y).sum()
            };
            let (y, cache) = net.forward(&x).unwrap();
            let up: Vec<f64> = y.iter().zip(&c).map(|(y, c)| c * y).collect();
            let (g, _) = net.backward(&cache, &up).unwrap();
            let mut probe = net.clone();
            let check = check_gradient(net.values(), g.values(), 1e-4, |v| {
                probe.values_mut().copy_from_slice(v);
                loss(&probe)
            });
            assert!(check.passes(1e-4), "{sizes:?}: {check:?}");
        }
    }
}
