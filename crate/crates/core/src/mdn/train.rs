use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::network::Cache;
use super::{MdnModel, ModelError};

/// Rows of `(features, cumulative distances)` for one expert schema.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn push(&mut self, input: Vec<f64>, target: Vec<f64>) {
        self.inputs.push(input);
        self.targets.push(target);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainParams {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    #[serde(default = "default_optimizer")]
    pub optimizer: Optimizer,
    /// Keep the log-variance head fixed.
    #[serde(default)]
    pub freeze_variance: bool,
}

fn default_optimizer() -> Optimizer {
    Optimizer::Adam
}

impl TrainParams {
    pub fn follow_lane() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 1024,
            epochs: 10,
            seed: 0,
            optimizer: Optimizer::Adam,
            freeze_variance: false,
        }
    }

    pub fn change_lane() -> Self {
        Self {
            batch_size: 32,
            epochs: 20,
            ..Self::follow_lane()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub samples: usize,
    pub initial_loss: f64,
    /// Mean NLL over the whole dataset after each epoch.
    pub epoch_losses: Vec<f64>,
}

impl TrainReport {
    pub fn final_loss(&self) -> f64 {
        self.epoch_losses.last().copied().unwrap_or(self.initial_loss)
    }
}

const CHUNK: usize = 64;

fn batch_gradient(model: &MdnModel, data: &Dataset, batch: &[usize]) -> Result<Vec<f64>, ModelError> {
    // fixed chunking and in-order reduction keep the sum deterministic
    let partials: Vec<Vec<f64>> = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut grad = vec![0.0; model.num_params()];
            let mut cache = Cache::default();
            for &i in chunk {
                model.accumulate(&data.inputs[i], &data.targets[i], &mut grad, &mut cache)?;
            }
            Ok(grad)
        })
        .collect::<Result<_, ModelError>>()?;
    let mut total = vec![0.0; model.num_params()];
    for p in partials {
        for (t, g) in total.iter_mut().zip(p) {
            *t += g;
        }
    }
    let scale = 1.0 / batch.len() as f64;
    total.iter_mut().for_each(|g| *g *= scale);
    Ok(total)
}

fn dataset_loss(model: &MdnModel, data: &Dataset) -> Result<f64, ModelError> {
    let idx: Vec<usize> = (0..data.len()).collect();
    let partial: Vec<f64> = idx
        .par_chunks(CHUNK)
        .map(|chunk| {
            chunk.iter().try_fold(0.0, |acc, &i| {
                let out = model.forward_values(&data.inputs[i])?;
                Ok(acc + super::nll_loss(&out, &data.targets[i])?)
            })
        })
        .collect::<Result<_, ModelError>>()?;
    Ok(partial.iter().sum::<f64>() / data.len() as f64)
}

/// Minibatch training of the mean NLL. Deterministic for a fixed seed.
pub fn train(model: &MdnModel, data: &Dataset, params: &TrainParams) -> Result<(MdnModel, TrainReport), ModelError> {
    if data.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    for (x, y) in data.inputs.iter().zip(&data.targets) {
        if x.len() != model.sizes[0] {
            return Err(ModelError::DimensionMismatch {
                expected: model.sizes[0],
                got: x.len(),
            });
        }
        if y.len() != model.horizon {
            return Err(ModelError::DimensionMismatch {
                expected: model.horizon,
                got: y.len(),
            });
        }
    }
    let mut model = model.clone();
    let frozen = if params.freeze_variance {
        model.log_variance_param_indices()
    } else {
        Vec::new()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = model.num_params();
    let (mut m1, mut m2) = (vec![0.0; n], vec![0.0; n]);
    let (beta1, beta2, eps) = (0.9f64, 0.999f64, 1e-8);
    let mut t = 0i32;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let initial_loss = dataset_loss(&model, data)?;
    let mut epoch_losses = Vec::with_capacity(params.epochs);
    let batch_size = params.batch_size.max(1);

    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(batch_size) {
            let mut grad = batch_gradient(&model, data, batch)?;
            for &i in &frozen {
                grad[i] = 0.0;
            }
            match params.optimizer {
                Optimizer::Sgd => {
                    for (p, g) in model.params.iter_mut().zip(&grad) {
                        *p -= params.learning_rate * g;
                    }
                }
                Optimizer::Adam => {
                    t += 1;
                    let c1 = 1.0 - beta1.powi(t);
                    let c2 = 1.0 - beta2.powi(t);
                    for i in 0..n {
                        let g = grad[i];
                        m1[i] = beta1 * m1[i] + (1.0 - beta1) * g;
                        m2[i] = beta2 * m2[i] + (1.0 - beta2) * g * g;
                        model.params[i] -= params.learning_rate * (m1[i] / c1) / ((m2[i] / c2).sqrt() + eps);
                    }
                }
            }
        }
        epoch_losses.push(dataset_loss(&model, data)?);
    }
    Ok((
        model,
        TrainReport {
            samples: data.len(),
            initial_loss,
            epoch_losses,
        },
    ))
}

impl MdnModel {
    /// Sets input and output standardisation from dataset statistics.
    /// Constant columns keep unit scale.
    pub fn fit_normalisation(&mut self, data: &Dataset) {
        if data.is_empty() {
            return;
        }
        let stats = |rows: &[Vec<f64>], dim: usize| {
            let n = rows.len() as f64;
            let mut mean = vec![0.0; dim];
            for r in rows {
                for (m, v) in mean.iter_mut().zip(r) {
                    *m += v / n;
                }
            }
            let mut var = vec![0.0; dim];
            for r in rows {
                for k in 0..dim {
                    var[k] += (r[k] - mean[k]).powi(2) / n;
                }
            }
            let scale: Vec<f64> = var.iter().map(|v| if v.sqrt() > 1e-6 { v.sqrt() } else { 1.0 }).collect();
            (mean, scale)
        };
        let (s, c) = stats(&data.inputs, self.sizes[0]);
        self.input_shift = s;
        self.input_scale = c;
        let (s, c) = stats(&data.targets, self.horizon);
        self.output_shift = s;
        self.output_scale = c;
    }
}
