//! Small fully connected networks with hand-written reverse-mode gradients
//! and an Adam optimizer.
//!
//! Each [`Mlp`] keeps its parameters in one flat vector, layer by layer,
//! weights (row-major, `out x in`) before biases. Gradients use the same
//! layout, so optimizer and serialization code see plain slices.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observe::{DIRECT_DIM, INDIRECT_DIM, OBS_DIM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Linear,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the activation's output.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Linear => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn param_count(&self) -> usize {
        self.inputs * self.outputs + self.outputs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<LayerSpec>,
    pub params: Vec<f64>,
}

/// Inputs and outputs of every layer from one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpCache {
    pub rows: usize,
    /// `acts[0]` is the input, `acts[l + 1]` the output of layer `l`, each
    /// `rows` vectors stored one after another.
    pub acts: Vec<Vec<f64>>,
}

impl MlpCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("cache holds the input")
    }
}

impl Mlp {
    /// Chains `widths` with one activation per layer.
    pub fn new(widths: &[usize], activations: &[Activation]) -> Self {
        assert_eq!(widths.len(), activations.len() + 1);
        let layers: Vec<LayerSpec> = widths
            .windows(2)
            .zip(activations)
            .map(|(w, &activation)| LayerSpec {
                inputs: w[0],
                outputs: w[1],
                activation,
            })
            .collect();
        let n = layers.iter().map(LayerSpec::param_count).sum();
        Self {
            layers,
            params: vec![0.0; n],
        }
    }

    pub fn from_layers(layers: Vec<LayerSpec>) -> Result<Self> {
        for w in layers.windows(2) {
            if w[0].outputs != w[1].inputs {
                return Err(Error::Dimension {
                    expected: w[0].outputs,
                    got: w[1].inputs,
                });
            }
        }
        let n = layers.iter().map(LayerSpec::param_count).sum();
        Ok(Self {
            layers,
            params: vec![0.0; n],
        })
    }

    /// He-uniform weights for relu layers, Xavier-uniform otherwise; zero
    /// biases.
    pub fn init<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let mut off = 0;
        for l in &self.layers {
            let limit = match l.activation {
                Activation::Relu => (6.0 / l.inputs as f64).sqrt(),
                _ => (6.0 / (l.inputs + l.outputs) as f64).sqrt(),
            };
            let nw = l.inputs * l.outputs;
            for w in &mut self.params[off..off + nw] {
                *w = limit * (2.0 * rng.random::<f64>() - 1.0);
            }
            for b in &mut self.params[off + nw..off + l.param_count()] {
                *b = 0.0;
            }
            off += l.param_count();
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.outputs).unwrap_or(0)
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn forward(&self, x: &[f64]) -> Result<MlpCache> {
        self.forward_batch(x, 1)
    }

    /// Forward pass over `rows` inputs stored row after row in `x`.
    pub fn forward_batch(&self, x: &[f64], rows: usize) -> Result<MlpCache> {
        if x.len() != rows * self.input_dim() {
            return Err(Error::Dimension {
                expected: rows * self.input_dim(),
                got: x.len(),
            });
        }
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        let mut off = 0;
        for l in &self.layers {
            let input = acts.last().expect("non-empty");
            let (w, rest) = self.params[off..].split_at(l.inputs * l.outputs);
            let b = &rest[..l.outputs];
            let mut out: Vec<f64> = b.iter().copied().cycle().take(rows * l.outputs).collect();
            // out (rows x outputs) += input (rows x inputs) * w^T
            gemm(
                (rows, l.inputs, l.outputs),
                (input, l.inputs as isize, 1),
                (w, 1, l.inputs as isize),
                &mut out,
            );
            for z in out.iter_mut() {
                *z = l.activation.apply(*z);
            }
            acts.push(out);
            off += l.param_count();
        }
        Ok(MlpCache { rows, acts })
    }

    /// Accumulates parameter gradients into `grads` and returns the gradient
    /// with respect to the input, row by row like the cached batch.
    pub fn backward(
        &self,
        cache: &MlpCache,
        grad_out: &[f64],
        grads: &mut [f64],
    ) -> Result<Vec<f64>> {
        let rows = cache.rows;
        if cache.acts.len() != self.layers.len() + 1 || grad_out.len() != rows * self.output_dim() {
            return Err(Error::MissingCache);
        }
        if grads.len() != self.params.len() {
            return Err(Error::Dimension {
                expected: self.params.len(),
                got: grads.len(),
            });
        }
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut off = 0;
        for l in &self.layers {
            offsets.push(off);
            off += l.param_count();
        }
        let mut delta = grad_out.to_vec();
        for (li, l) in self.layers.iter().enumerate().rev() {
            let input = &cache.acts[li];
            let output = &cache.acts[li + 1];
            for (d, y) in delta.iter_mut().zip(output) {
                *d *= l.activation.derivative_from_output(*y);
            }
            let off = offsets[li];
            let nw = l.inputs * l.outputs;
            let w = &self.params[off..off + nw];
            let (gw, gb) = grads[off..off + l.param_count()].split_at_mut(nw);
            for row in delta.chunks_exact(l.outputs) {
                for (g, d) in gb.iter_mut().zip(row) {
                    *g += d;
                }
            }
            // gw (outputs x inputs) += delta^T * input
            gemm(
                (l.outputs, rows, l.inputs),
                (&delta, 1, l.outputs as isize),
                (input, l.inputs as isize, 1),
                gw,
            );
            let mut grad_in = vec![0.0; rows * l.inputs];
            // grad_in (rows x inputs) = delta * w
            gemm(
                (rows, l.outputs, l.inputs),
                (&delta, l.outputs as isize, 1),
                (w, l.inputs as isize, 1),
                &mut grad_in,
            );
            delta = grad_in;
        }
        Ok(delta)
    }
}

/// `c (m x n) += a (m x k) * b (k x n)` with explicit row and column
/// strides for `a` and `b`; `c` is dense row-major.
fn gemm(
    (m, k, n): (usize, usize, usize),
    (a, rsa, csa): (&[f64], isize, isize),
    (b, rsb, csb): (&[f64], isize, isize),
    c: &mut [f64],
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: the slices cover every index the strides reach (checked above
    // for the dense layouts used by the callers) and `c` does not alias them.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            1.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Which action dimensions a policy head controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyHead {
    /// all six
    Full,
    /// the three work-hour dimensions
    WorkHours,
    /// the three order dimensions
    Material,
}

impl PolicyHead {
    pub fn action_range(self) -> std::ops::Range<usize> {
        match self {
            PolicyHead::Full => 0..6,
            PolicyHead::WorkHours => 0..3,
            PolicyHead::Material => 3..6,
        }
    }

    pub fn dim(self) -> usize {
        self.action_range().len()
    }
}

/// Hidden widths of a bundle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    pub indirect_hidden: usize,
    pub feature: usize,
    pub trunk: usize,
    pub head_hidden: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            indirect_hidden: 64,
            feature: 12,
            trunk: 128,
            head_hidden: 64,
        }
    }
}

/// Basement, value head, policy head and the free log-std vector of one
/// agent network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkBundle {
    pub head: PolicyHead,
    /// indirect inputs to the feature vector
    pub indirect: Mlp,
    /// feature vector and direct inputs to the basement output
    pub trunk: Mlp,
    pub value: Mlp,
    pub policy: Mlp,
    pub logstd: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BundleCache {
    indirect: MlpCache,
    trunk: MlpCache,
    value: MlpCache,
    policy: MlpCache,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BundleOutput {
    pub mean: Vec<f64>,
    pub value: f64,
}

/// Outputs for a batch, one row per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutput {
    pub means: Vec<f64>,
    pub values: Vec<f64>,
}

/// Gradients shaped like a bundle's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct BundleGrads {
    pub indirect: Vec<f64>,
    pub trunk: Vec<f64>,
    pub value: Vec<f64>,
    pub policy: Vec<f64>,
    pub logstd: Vec<f64>,
}

impl BundleGrads {
    pub fn zeros_like(b: &NetworkBundle) -> Self {
        Self {
            indirect: vec![0.0; b.indirect.param_count()],
            trunk: vec![0.0; b.trunk.param_count()],
            value: vec![0.0; b.value.param_count()],
            policy: vec![0.0; b.policy.param_count()],
            logstd: vec![0.0; b.logstd.len()],
        }
    }

    pub fn slices(&self) -> [&[f64]; 5] {
        [
            &self.indirect,
            &self.trunk,
            &self.value,
            &self.policy,
            &self.logstd,
        ]
    }

    pub fn scale(&mut self, k: f64) {
        for v in [
            &mut self.indirect,
            &mut self.trunk,
            &mut self.value,
            &mut self.policy,
            &mut self.logstd,
        ] {
            v.iter_mut().for_each(|g| *g *= k);
        }
    }

    pub fn norm(&self) -> f64 {
        self.slices()
            .iter()
            .flat_map(|s| s.iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }
}

impl NetworkBundle {
    /// Zero-initialized bundle.
    pub fn new(head: PolicyHead, arch: Architecture) -> Self {
        use Activation::*;
        Self {
            head,
            indirect: Mlp::new(
                &[INDIRECT_DIM, arch.indirect_hidden, arch.feature],
                &[Relu, Relu],
            ),
            trunk: Mlp::new(
                &[arch.feature + DIRECT_DIM, arch.trunk, arch.trunk],
                &[Relu, Relu],
            ),
            value: Mlp::new(&[arch.trunk, arch.head_hidden, 1], &[Relu, Linear]),
            policy: Mlp::new(&[arch.trunk, arch.head_hidden, head.dim()], &[Tanh, Linear]),
            logstd: vec![0.0; head.dim()],
        }
    }

    pub fn initialized<R: Rng + ?Sized>(head: PolicyHead, arch: Architecture, rng: &mut R) -> Self {
        let mut b = Self::new(head, arch);
        for m in [&mut b.indirect, &mut b.trunk, &mut b.value, &mut b.policy] {
            m.init(rng);
        }
        b
    }

    pub fn action_dim(&self) -> usize {
        self.head.dim()
    }

    pub fn param_count(&self) -> usize {
        self.indirect.param_count()
            + self.trunk.param_count()
            + self.value.param_count()
            + self.policy.param_count()
            + self.logstd.len()
    }

    pub fn param_slices_mut(&mut self) -> [&mut [f64]; 5] {
        [
            &mut self.indirect.params,
            &mut self.trunk.params,
            &mut self.value.params,
            &mut self.policy.params,
            &mut self.logstd,
        ]
    }

    pub fn param_slices(&self) -> [&[f64]; 5] {
        [
            &self.indirect.params,
            &self.trunk.params,
            &self.value.params,
            &self.policy.params,
            &self.logstd,
        ]
    }

    /// Direct slots are 0..17, indirect slots 17..59 of the normalized
    /// observation.
    pub fn forward(&self, obs: &[f64]) -> Result<(BundleOutput, BundleCache)> {
        let (out, cache) = self.forward_batch(obs, 1)?;
        Ok((
            BundleOutput {
                mean: out.means,
                value: out.values[0],
            },
            cache,
        ))
    }

    /// Forward pass over `rows` observations stored one after another.
    pub fn forward_batch(&self, obs: &[f64], rows: usize) -> Result<(BatchOutput, BundleCache)> {
        if obs.len() != rows * OBS_DIM {
            return Err(Error::Dimension {
                expected: rows * OBS_DIM,
                got: obs.len(),
            });
        }
        let mut ind_in = Vec::with_capacity(rows * INDIRECT_DIM);
        for o in obs.chunks_exact(OBS_DIM) {
            ind_in.extend_from_slice(&o[DIRECT_DIM..]);
        }
        let indirect = self.indirect.forward_batch(&ind_in, rows)?;
        let feature = self.indirect.output_dim();
        let mut joined = Vec::with_capacity(rows * self.trunk.input_dim());
        for (f, o) in indirect
            .output()
            .chunks_exact(feature)
            .zip(obs.chunks_exact(OBS_DIM))
        {
            joined.extend_from_slice(f);
            joined.extend_from_slice(&o[..DIRECT_DIM]);
        }
        let trunk = self.trunk.forward_batch(&joined, rows)?;
        let value = self.value.forward_batch(trunk.output(), rows)?;
        let policy = self.policy.forward_batch(trunk.output(), rows)?;
        let out = BatchOutput {
            means: policy.output().to_vec(),
            values: value.output().to_vec(),
        };
        Ok((
            out,
            BundleCache {
                indirect,
                trunk,
                value,
                policy,
            },
        ))
    }

    /// Accumulates gradients of a scalar loss given its partial derivatives
    /// with respect to the policy mean, the value and the log-std vector.
    pub fn backward(
        &self,
        cache: &BundleCache,
        d_mean: &[f64],
        d_value: f64,
        d_logstd: &[f64],
        grads: &mut BundleGrads,
    ) -> Result<()> {
        self.backward_batch(cache, d_mean, &[d_value], d_logstd, grads)
    }

    /// Batched form of [`Self::backward`]: `d_mean` and `d_value` hold one
    /// row per cached observation, `d_logstd` is the total over the batch.
    pub fn backward_batch(
        &self,
        cache: &BundleCache,
        d_mean: &[f64],
        d_value: &[f64],
        d_logstd: &[f64],
        grads: &mut BundleGrads,
    ) -> Result<()> {
        let rows = cache.trunk.rows;
        if d_mean.len() != rows * self.action_dim() || d_logstd.len() != self.logstd.len() {
            return Err(Error::Dimension {
                expected: rows * self.action_dim(),
                got: d_mean.len(),
            });
        }
        let g_pol = self
            .policy
            .backward(&cache.policy, d_mean, &mut grads.policy)?;
        let g_val = self
            .value
            .backward(&cache.value, d_value, &mut grads.value)?;
        let g_trunk_out: Vec<f64> = g_pol.iter().zip(&g_val).map(|(a, b)| a + b).collect();
        let g_joined = self
            .trunk
            .backward(&cache.trunk, &g_trunk_out, &mut grads.trunk)?;
        let feature = self.indirect.output_dim();
        let g_feature: Vec<f64> = g_joined
            .chunks_exact(self.trunk.input_dim())
            .flat_map(|row| row[..feature].iter().copied())
            .collect();
        self.indirect
            .backward(&cache.indirect, &g_feature, &mut grads.indirect)?;
        for (g, d) in grads.logstd.iter_mut().zip(d_logstd) {
            *g += d;
        }
        Ok(())
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub steps: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            steps: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// One update of every parameter slice with its matching gradient.
    /// Non-finite gradients are rejected before anything changes.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::Dimension {
                expected: params.len(),
                got: grads.len(),
            });
        }
        for (p, g) in params.iter().zip(grads) {
            if p.len() != g.len() {
                return Err(Error::Dimension {
                    expected: p.len(),
                    got: g.len(),
                });
            }
        }
        if grads.iter().any(|g| g.iter().any(|x| !x.is_finite())) {
            return Err(Error::NonFinite("gradient".into()));
        }
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| vec![0.0; g.len()]).collect();
            self.v = self.m.clone();
        }
        self.steps += 1;
        let bc1 = 1.0 - self.beta1.powi(self.steps as i32);
        let bc2 = 1.0 - self.beta2.powi(self.steps as i32);
        for (s, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[s], &mut self.v[s]);
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let mh = m[i] / bc1;
                let vh = v[i] / bc2;
                p[i] -= self.lr * mh / (vh.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_network_outputs_zero() {
        let b = NetworkBundle::new(PolicyHead::Full, Architecture::default());
        let (out, _) = b.forward(&[0.3; OBS_DIM]).unwrap();
        assert_eq!(out.mean, vec![0.0; 6]);
        assert_eq!(out.value, 0.0);
    }

    #[test]
    fn head_widths() {
        let arch = Architecture::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for (head, dim) in [
            (PolicyHead::Full, 6),
            (PolicyHead::WorkHours, 3),
            (PolicyHead::Material, 3),
        ] {
            let b = NetworkBundle::initialized(head, arch, &mut rng);
            let (out, _) = b.forward(&[0.1; OBS_DIM]).unwrap();
            assert_eq!(out.mean.len(), dim);
            assert_eq!(b.indirect.output_dim(), 12);
            assert_eq!(b.trunk.output_dim(), 128);
            assert!(b.param_count() < 50_000);
        }
    }

    #[test]
    fn wrong_input_width_is_rejected() {
        let b = NetworkBundle::new(PolicyHead::Full, Architecture::default());
        assert!(matches!(
            b.forward(&[0.0; 10]),
            Err(Error::Dimension {
                expected: 59,
                got: 10
            })
        ));
    }

    #[test]
    fn value_bias_gradient_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = NetworkBundle::initialized(PolicyHead::Full, Architecture::default(), &mut rng);
        let (_, cache) = b.forward(&[0.2; OBS_DIM]).unwrap();
        let mut g = BundleGrads::zeros_like(&b);
        b.backward(&cache, &[0.0; 6], 1.0, &[0.0; 6], &mut g)
            .unwrap();
        assert_eq!(*g.value.last().unwrap(), 1.0);
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let b = NetworkBundle::initialized(PolicyHead::Full, Architecture::default(), &mut rng);
        let (_, cache) = b.forward(&[0.5; OBS_DIM]).unwrap();
        let mut g = BundleGrads::zeros_like(&b);
        b.backward(&cache, &[0.0; 6], 0.0, &[0.0; 6], &mut g)
            .unwrap();
        assert_eq!(g.norm(), 0.0);
    }

    /// L = Σ w·mean + ½·value² + Σ u·logstd², at a perturbed copy of `b`.
    fn probe_loss(b: &NetworkBundle, x: &[f64], w: &[f64], u: &[f64]) -> f64 {
        let (out, _) = b.forward(x).unwrap();
        let lin: f64 = out.mean.iter().zip(w).map(|(m, w)| m * w).sum();
        let ls: f64 = b.logstd.iter().zip(u).map(|(l, u)| u * l * l).sum();
        lin + 0.5 * out.value * out.value + ls
    }

    #[test]
    fn gradients_match_central_differences() {
        use rand::Rng;
        for (k, head) in [
            PolicyHead::Full,
            PolicyHead::WorkHours,
            PolicyHead::Material,
        ]
        .into_iter()
        .enumerate()
        {
            let mut rng = ChaCha8Rng::seed_from_u64(40 + k as u64);
            let mut b = NetworkBundle::initialized(head, Architecture::default(), &mut rng);
            for l in b.logstd.iter_mut() {
                *l = rng.random_range(-0.5..0.5);
            }
            // give the zero-initialized biases some slope to test against
            for s in b.param_slices_mut() {
                for p in s.iter_mut() {
                    *p += rng.random_range(-0.05..0.05);
                }
            }
            let x: Vec<f64> = (0..OBS_DIM).map(|_| rng.random_range(-2.0..2.0)).collect();
            let n = b.action_dim();
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();

            let (out, cache) = b.forward(&x).unwrap();
            let d_logstd: Vec<f64> = b.logstd.iter().zip(&u).map(|(l, u)| 2.0 * u * l).collect();
            let mut g = BundleGrads::zeros_like(&b);
            b.backward(&cache, &w, out.value, &d_logstd, &mut g)
                .unwrap();
            let analytic: Vec<Vec<f64>> = g.slices().iter().map(|s| s.to_vec()).collect();

            let sizes: Vec<usize> = b.param_slices().iter().map(|s| s.len()).collect();
            let h = 1e-6;
            for _ in 0..100 {
                let which = rng.random_range(0..5);
                let i = rng.random_range(0..sizes[which]);
                let orig = b.param_slices()[which][i];
                b.param_slices_mut()[which][i] = orig + h;
                let up = probe_loss(&b, &x, &w, &u);
                b.param_slices_mut()[which][i] = orig - h;
                let down = probe_loss(&b, &x, &w, &u);
                b.param_slices_mut()[which][i] = orig;
                let numeric = (up - down) / (2.0 * h);
                let a = analytic[which][i];
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
                assert!(
                    rel < 1e-4,
                    "{head:?} slice {which} index {i}: analytic {a}, numeric {numeric}"
                );
            }
        }
    }

    #[test]
    fn relu_blocks_negative_preactivations() {
        let mut m = Mlp::new(&[2, 2, 1], &[Activation::Relu, Activation::Linear]);
        // hidden unit 0 = x0 - x1, unit 1 = -(x0 + x1); output = h0 + h1
        m.params = vec![1.0, -1.0, -1.0, -1.0, 0.0, 0.0, 1.0, 1.0, 0.0];
        let c = m.forward(&[1.0, 0.5]).unwrap();
        assert_eq!(c.acts[1], vec![0.5, 0.0]);
        assert_eq!(c.output(), &[0.5]);
    }

    #[test]
    fn adam_first_step_by_hand() {
        let mut p = [1.0];
        let mut adam = Adam::new(1e-4);
        adam.step(&mut [&mut p[..]], &[&[0.5][..]]).unwrap();
        // m̂ = g, v̂ = g², so the step is lr·g/(|g| + eps)
        let expected = 1.0 - 1e-4 * 0.5 / (0.5 + 1e-8);
        assert!((p[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn adam_zero_gradient_is_a_no_op() {
        let mut p = vec![0.3, -0.2];
        let mut adam = Adam::new(1e-4);
        for _ in 0..5 {
            adam.step(&mut [&mut p[..]], &[&[0.0, 0.0][..]]).unwrap();
        }
        assert_eq!(p, vec![0.3, -0.2]);
    }

    #[test]
    fn adam_rejects_nan() {
        let mut p = [0.0];
        let mut adam = Adam::new(1e-4);
        assert!(adam.step(&mut [&mut p[..]], &[&[f64::NAN][..]]).is_err());
        assert_eq!(p[0], 0.0);
        assert_eq!(adam.steps, 0);
    }

    #[test]
    fn adam_minimizes_convex_quadratic() {
        // f(x) = Σ c_i (x_i - t_i)²
        let c = [1.0, 4.0, 0.5];
        let target = [0.3, -0.7, 1.2];
        let mut x = vec![0.0; 3];
        let mut adam = Adam::new(0.05);
        let grad =
            |x: &[f64]| -> Vec<f64> { (0..3).map(|i| 2.0 * c[i] * (x[i] - target[i])).collect() };
        for _ in 0..200 {
            let g = grad(&x);
            adam.step(&mut [&mut x[..]], &[&g[..]]).unwrap();
        }
        // Adam's effective step shrinks with |g|; finish with a few plain
        // adaptive steps at a smaller rate
        adam.lr = 1e-3;
        for _ in 0..2000 {
            let g = grad(&x);
            adam.step(&mut [&mut x[..]], &[&g[..]]).unwrap();
        }
        let g = grad(&x);
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm < 1e-6, "gradient norm {norm}");
    }
}
