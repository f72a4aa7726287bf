use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::Model;
use super::tensor::{Real, Tensor};
use super::NnError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub momentum: f64,
    /// Seeds the per-epoch shuffling.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { learning_rate: 1e-3, batch_size: 32, epochs: 10, momentum: 0.9, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(NnError::Config(format!("learning_rate must be >= 0, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(NnError::Config("batch_size must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(NnError::Config(format!("momentum must be in [0, 1), got {}", self.momentum)));
        }
        Ok(())
    }
}

/// Inputs of a common shape `[C, H, W]` with one target each.
#[derive(Clone, Debug)]
pub struct Dataset<'a, T> {
    pub sample_shape: [usize; 3],
    pub inputs: Vec<&'a [T]>,
    pub targets: Vec<T>,
}

impl<'a, T: Real> Dataset<'a, T> {
    pub fn new(sample_shape: [usize; 3], inputs: Vec<&'a [T]>, targets: Vec<T>) -> Result<Self, NnError> {
        let len: usize = sample_shape.iter().product();
        if inputs.len() != targets.len() {
            return Err(NnError::Shape(format!("{} inputs but {} targets", inputs.len(), targets.len())));
        }
        if let Some(i) = inputs.iter().position(|x| x.len() != len) {
            return Err(NnError::Shape(format!("input {i} has {} values, expected {len}", inputs[i].len())));
        }
        Ok(Dataset { sample_shape, inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Stacks the selected samples into a `[N, C, H, W]` batch.
    pub fn batch(&self, indices: &[usize]) -> (Tensor<T>, Vec<T>) {
        let [c, h, w] = self.sample_shape;
        let mut data = Vec::with_capacity(indices.len() * c * h * w);
        for &i in indices {
            data.extend_from_slice(self.inputs[i]);
        }
        let t = Tensor::from_vec(&[indices.len(), c, h, w], data).expect("dataset shapes are checked");
        (t, indices.iter().map(|&i| self.targets[i]).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean per-sample training loss of each epoch.
    pub loss_history: Vec<f64>,
}

/// Mini-batch SGD with momentum (`v = mu * v + g; w -= lr * v`) on the mean
/// squared error. Samples are reshuffled every epoch from `config.seed`.
pub fn train<T: Real>(
    model: &mut Model<T>,
    data: &Dataset<'_, T>,
    config: &TrainConfig,
) -> Result<TrainReport, NnError> {
    config.validate()?;
    if data.is_empty() {
        return Err(NnError::Config("training set is empty".into()));
    }
    let lr = T::from_f64_lossy(config.learning_rate);
    let mu = T::from_f64_lossy(config.momentum);
    let mut velocity = model.zero_grads();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut loss_history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let (x, y) = data.batch(chunk);
            let (loss, grads) =
                model.loss_and_grad(&x, &y).map_err(|e| NnError::Diverged { epoch, detail: e.to_string() })?;
            total += loss.to_f64().unwrap() * chunk.len() as f64;
            for ((p, v), g) in model.params.iter_mut().zip(&mut velocity).zip(&grads) {
                for ((w, vi), &gi) in p.value.data_mut().iter_mut().zip(v.data_mut()).zip(g.data()) {
                    *vi = mu * *vi + gi;
                    *w = *w - lr * *vi;
                }
            }
        }
        let mean = total / data.len() as f64;
        if !mean.is_finite() || model.params.iter().any(|p| !p.value.all_finite()) {
            return Err(NnError::Diverged { epoch, detail: format!("epoch loss {mean}") });
        }
        loss_history.push(mean);
    }
    Ok(TrainReport { loss_history })
}

/// Forward pass in batches; one prediction per input.
pub fn predict<T: Real>(
    model: &Model<T>,
    sample_shape: [usize; 3],
    inputs: &[&[T]],
    batch_size: usize,
) -> Result<Vec<T>, NnError> {
    let dummy = vec![T::zero(); inputs.len()];
    let data = Dataset::new(sample_shape, inputs.to_vec(), dummy)?;
    let idx: Vec<usize> = (0..inputs.len()).collect();
    let mut out = Vec::with_capacity(inputs.len());
    for chunk in idx.chunks(batch_size.max(1)) {
        let (x, _) = data.batch(chunk);
        out.extend(model.forward(&x)?);
    }
    Ok(out)
}
