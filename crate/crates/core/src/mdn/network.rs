use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::features::{FeatureSchema, FeatureVector};

/// Distance outputs: cumulative distance at 1..=5 s.
pub const HORIZON_STEPS: usize = 5;
pub const DEFAULT_HIDDEN: [usize; 2] = [64, 32];

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Fully connected ReLU network whose linear head parameterises a diagonal
/// Gaussian mixture over `horizon` cumulative distances.
///
/// Head layout per component: `[logit, mean[horizon], log_variance[horizon]]`.
/// All weights live in one flat vector, layer by layer, each layer as a
/// row-major `out x in` matrix followed by its bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdnModel {
    pub schema: FeatureSchema,
    pub components: usize,
    pub horizon: usize,
    /// `[input, hidden.., output]`
    pub sizes: Vec<usize>,
    pub params: Vec<f64>,
    /// Inputs are standardised as `(z - shift) / scale` before layer one.
    pub input_shift: Vec<f64>,
    pub input_scale: Vec<f64>,
    /// Means are de-standardised as `shift + scale * raw`; variances by `scale^2`.
    pub output_shift: Vec<f64>,
    pub output_scale: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub log_weight: f64,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub log_variance: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureOutput {
    pub components: Vec<MixtureComponent>,
}

impl MixtureOutput {
    /// Single Gaussian with the given means and standard deviations.
    pub fn gaussian(mean: Vec<f64>, std: &[f64]) -> Self {
        let variance: Vec<f64> = std.iter().map(|s| s * s).collect();
        Self {
            components: vec![MixtureComponent {
                weight: 1.0,
                log_weight: 0.0,
                mean,
                log_variance: variance.iter().map(|v| v.ln()).collect(),
                variance,
            }],
        }
    }

    pub fn dim(&self) -> usize {
        self.components[0].mean.len()
    }

    /// Index of the highest-weight component; ties go to the first.
    pub fn dominant(&self) -> usize {
        let mut best = 0;
        for (i, c) in self.components.iter().enumerate() {
            if c.weight > self.components[best].weight {
                best = i;
            }
        }
        best
    }

    pub fn is_normalised(&self, tol: f64) -> bool {
        let sum: f64 = self.components.iter().map(|c| c.weight).sum();
        (sum - 1.0).abs() <= tol && self.components.iter().all(|c| c.variance.iter().all(|&v| v > 0.0))
    }

    /// Mixture negative log likelihood of a single horizon step, treating
    /// each step's marginal as a 1-D mixture.
    pub fn marginal_nll(&self, step: usize, distance: f64) -> f64 {
        let terms: Vec<f64> = self
            .components
            .iter()
            .map(|c| {
                let e = distance - c.mean[step];
                c.log_weight - 0.5 * e * e / c.variance[step] - 0.5 * c.log_variance[step] - 0.5 * LN_2PI
            })
            .collect();
        -log_sum_exp(&terms)
    }
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn component_log_densities(out: &MixtureOutput, target: &[f64]) -> Result<Vec<f64>, ModelError> {
    let mut lp = Vec::with_capacity(out.components.len());
    for c in &out.components {
        if c.mean.len() != target.len() {
            return Err(ModelError::DimensionMismatch {
                expected: c.mean.len(),
                got: target.len(),
            });
        }
        let mut acc = c.log_weight;
        for k in 0..target.len() {
            if !(c.variance[k] > 0.0) {
                return Err(ModelError::NonPositiveVariance(c.variance[k]));
            }
            let e = target[k] - c.mean[k];
            acc += -0.5 * e * e / c.variance[k] - 0.5 * c.log_variance[k] - 0.5 * LN_2PI;
        }
        lp.push(acc);
    }
    Ok(lp)
}

/// Mixture negative log likelihood of `target`, via log-sum-exp over
/// components.
pub fn nll_loss(out: &MixtureOutput, target: &[f64]) -> Result<f64, ModelError> {
    Ok(-log_sum_exp(&component_log_densities(out, target)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub loss: f64,
    pub params: Vec<f64>,
}

#[derive(Default)]
pub(crate) struct Cache {
    /// Layer inputs; `acts[0]` is the standardised feature vector.
    acts: Vec<Vec<f64>>,
    /// Pre-activations of each layer.
    pre: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

impl MdnModel {
    /// Randomly initialised network (He-uniform hidden layers, small output
    /// layer, zero biases).
    pub fn new(schema: FeatureSchema, hidden: &[usize], components: usize, seed: u64) -> Self {
        let horizon = HORIZON_STEPS;
        let mut sizes = vec![schema.len()];
        sizes.extend_from_slice(hidden);
        sizes.push(components * (1 + 2 * horizon));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::new();
        for l in 0..sizes.len() - 1 {
            let (n_in, n_out) = (sizes[l], sizes[l + 1]);
            let last = l == sizes.len() - 2;
            let bound = if last {
                (6.0 / (n_in + n_out) as f64).sqrt() * 0.1
            } else {
                (6.0 / n_in as f64).sqrt()
            };
            params.extend((0..n_in * n_out).map(|_| rng.gen_range(-bound..bound)));
            params.extend(std::iter::repeat_n(0.0, n_out));
        }
        Self::with_params(schema, components, horizon, sizes, params)
    }

    pub fn zeros(schema: FeatureSchema, hidden: &[usize], components: usize) -> Self {
        let mut m = Self::new(schema, hidden, components, 0);
        m.params.iter_mut().for_each(|p| *p = 0.0);
        m
    }

    fn with_params(schema: FeatureSchema, components: usize, horizon: usize, sizes: Vec<usize>, params: Vec<f64>) -> Self {
        let n_in = sizes[0];
        Self {
            schema,
            components,
            horizon,
            sizes,
            params,
            input_shift: vec![0.0; n_in],
            input_scale: vec![1.0; n_in],
            output_shift: vec![0.0; horizon],
            output_scale: vec![1.0; horizon],
        }
    }

    /// A network that reproduces constant-velocity distances: the target
    /// speed (input 0, non-negative) passes through the ReLU layers
    /// unchanged and is multiplied by `t` in the head. Used for experts that
    /// have no training data.
    pub fn constant_velocity(schema: FeatureSchema, hidden: &[usize], std: &[f64]) -> Self {
        let mut m = Self::zeros(schema, hidden, 1);
        let mut offset = 0;
        for l in 0..m.sizes.len() - 1 {
            let (n_in, n_out) = (m.sizes[l], m.sizes[l + 1]);
            if l < m.sizes.len() - 2 {
                m.params[offset] = 1.0;
            } else {
                for k in 0..m.horizon {
                    m.params[offset + (1 + k) * n_in] = (k + 1) as f64;
                    let lv_row = 1 + m.horizon + k;
                    m.params[offset + n_in * n_out + lv_row] = 2.0 * std[k].ln();
                }
            }
            offset += n_in * n_out + n_out;
        }
        m
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn head_width(&self) -> usize {
        1 + 2 * self.horizon
    }

    /// Index ranges of the log-variance rows in the output layer (weights and
    /// biases), used to hold the variance fixed during training.
    pub(crate) fn log_variance_param_indices(&self) -> Vec<usize> {
        let layers = self.sizes.len() - 1;
        let mut offset = 0;
        for l in 0..layers - 1 {
            offset += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
        }
        let (n_in, n_out) = (self.sizes[layers - 1], self.sizes[layers]);
        let mut idx = Vec::new();
        for m in 0..self.components {
            for k in 0..self.horizon {
                let row = m * self.head_width() + 1 + self.horizon + k;
                idx.extend((0..n_in).map(|c| offset + row * n_in + c));
                idx.push(offset + n_in * n_out + row);
            }
        }
        idx
    }

    pub fn check_input(&self, z: &FeatureVector) -> Result<(), ModelError> {
        if z.schema != self.schema {
            return Err(ModelError::SchemaMismatch {
                expected: self.schema,
                got: z.schema,
            });
        }
        self.check_len(&z.values)
    }

    fn check_len(&self, values: &[f64]) -> Result<(), ModelError> {
        if values.len() != self.sizes[0] {
            return Err(ModelError::DimensionMismatch {
                expected: self.sizes[0],
                got: values.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, z: &FeatureVector) -> Result<MixtureOutput, ModelError> {
        self.check_input(z)?;
        let mut cache = Cache::default();
        self.run(&z.values, &mut cache);
        Ok(self.decode(cache.pre.last().unwrap()))
    }

    /// Forward pass on raw values without a schema check.
    pub fn forward_values(&self, values: &[f64]) -> Result<MixtureOutput, ModelError> {
        self.check_len(values)?;
        let mut cache = Cache::default();
        self.run(values, &mut cache);
        Ok(self.decode(cache.pre.last().unwrap()))
    }

    pub(crate) fn run(&self, values: &[f64], cache: &mut Cache) {
        let layers = self.sizes.len() - 1;
        cache.acts.resize_with(layers, Vec::new);
        cache.pre.resize_with(layers, Vec::new);
        let x = &mut cache.acts[0];
        x.clear();
        x.extend(
            values
                .iter()
                .zip(self.input_shift.iter().zip(&self.input_scale))
                .map(|(v, (s, c))| (v - s) / c),
        );
        let mut offset = 0;
        for l in 0..layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[offset..offset + n_in * n_out];
            let b = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            let pre = &mut cache.pre[l];
            pre.clear();
            let input = &cache.acts[l];
            for o in 0..n_out {
                let row = &w[o * n_in..(o + 1) * n_in];
                pre.push(b[o] + row.iter().zip(input).map(|(a, x)| a * x).sum::<f64>());
            }
            if l + 1 < layers {
                let relu: Vec<f64> = cache.pre[l].iter().map(|&v| v.max(0.0)).collect();
                cache.acts[l + 1] = relu;
            }
            offset += n_in * n_out + n_out;
        }
    }

    fn decode(&self, head: &[f64]) -> MixtureOutput {
        let hw = self.head_width();
        let logits: Vec<f64> = (0..self.components).map(|m| head[m * hw]).collect();
        let lse = log_sum_exp(&logits);
        let components = (0..self.components)
            .map(|m| {
                let base = m * hw;
                let log_weight = logits[m] - lse;
                let mean = (0..self.horizon)
                    .map(|k| self.output_shift[k] + self.output_scale[k] * head[base + 1 + k])
                    .collect();
                let log_variance: Vec<f64> = (0..self.horizon)
                    .map(|k| head[base + 1 + self.horizon + k] + 2.0 * self.output_scale[k].ln())
                    .collect();
                MixtureComponent {
                    weight: log_weight.exp(),
                    log_weight,
                    mean,
                    variance: log_variance.iter().map(|v| v.exp()).collect(),
                    log_variance,
                }
            })
            .collect();
        MixtureOutput { components }
    }

    /// Adds the gradient of the NLL at `(values, target)` into `grad` and
    /// returns the loss.
    pub(crate) fn accumulate(&self, values: &[f64], target: &[f64], grad: &mut [f64], cache: &mut Cache) -> Result<f64, ModelError> {
        self.check_len(values)?;
        self.run(values, cache);
        let out = self.decode(cache.pre.last().unwrap());
        let lp = component_log_densities(&out, target)?;
        let lse = log_sum_exp(&lp);

        let hw = self.head_width();
        let delta = &mut cache.delta;
        delta.clear();
        delta.resize(self.components * hw, 0.0);
        for (m, c) in out.components.iter().enumerate() {
            let resp = (lp[m] - lse).exp();
            let base = m * hw;
            delta[base] = c.weight - resp;
            for k in 0..self.horizon {
                let e = target[k] - c.mean[k];
                let inv = 1.0 / c.variance[k];
                delta[base + 1 + k] = -resp * e * inv * self.output_scale[k];
                delta[base + 1 + self.horizon + k] = resp * 0.5 * (1.0 - e * e * inv);
            }
        }

        let layers = self.sizes.len() - 1;
        let mut offsets = Vec::with_capacity(layers);
        let mut offset = 0;
        for l in 0..layers {
            offsets.push(offset);
            offset += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
        }
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let off = offsets[l];
            let input = &cache.acts[l];
            let delta = &cache.delta;
            {
                let (gw, gb) = grad[off..off + n_in * n_out + n_out].split_at_mut(n_in * n_out);
                for o in 0..n_out {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    gb[o] += d;
                    for (g, x) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(input) {
                        *g += d * x;
                    }
                }
            }
            if l > 0 {
                let w = &self.params[off..off + n_in * n_out];
                let prev_pre = &cache.pre[l - 1];
                let dp = &mut cache.delta_prev;
                dp.clear();
                dp.resize(n_in, 0.0);
                for o in 0..n_out {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    for (acc, a) in dp.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                        *acc += d * a;
                    }
                }
                for (acc, &p) in dp.iter_mut().zip(prev_pre) {
                    if p <= 0.0 {
                        *acc = 0.0;
                    }
                }
                std::mem::swap(&mut cache.delta, &mut cache.delta_prev);
            }
        }
        Ok(-lse)
    }

    /// Mean NLL over a dataset.
    pub fn mean_nll(&self, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64, ModelError> {
        if inputs.is_empty() {
            return Err(ModelError::EmptyDataset);
        }
        let mut total = 0.0;
        for (x, y) in inputs.iter().zip(targets) {
            total += nll_loss(&self.forward_values(x)?, y)?;
        }
        Ok(total / inputs.len() as f64)
    }
}

/// Analytic gradient of the NLL with respect to every parameter, in the
/// flat layout of [`MdnModel::params`].
pub fn gradients(model: &MdnModel, z: &FeatureVector, target: &[f64]) -> Result<Gradient, ModelError> {
    model.check_input(z)?;
    if target.len() != model.horizon {
        return Err(ModelError::DimensionMismatch {
            expected: model.horizon,
            got: target.len(),
        });
    }
    let mut params = vec![0.0; model.num_params()];
    let loss = model.accumulate(&z.values, target, &mut params, &mut Cache::default())?;
    Ok(Gradient { loss, params })
}
