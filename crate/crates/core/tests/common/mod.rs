#![allow(dead_code)]

use evsteer_core::events::{Event, EventStream, Polarity};
use evsteer_core::nn::{init_model, Model, ModelConfig, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A valid random stream: sorted timestamps (with ties), in-bounds pixels.
pub fn random_stream(seed: u64, max_events: usize) -> EventStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w: u16 = rng.random_range(1..=24);
    let h: u16 = rng.random_range(1..=24);
    let n = rng.random_range(0..=max_events);
    let mut t = rng.random_range(0..1_000u64);
    let events = (0..n)
        .map(|_| {
            t += rng.random_range(0..50u64);
            let p = if rng.random::<bool>() { Polarity::Pos } else { Polarity::Neg };
            Event::new(t, rng.random_range(0..w), rng.random_range(0..h), p)
        })
        .collect();
    EventStream::new(w, h, events).unwrap()
}

/// Largest relative error between analytic and central-difference gradients
/// over every parameter, with the worst parameter's name.
pub fn gradient_check(seed: u64, eps: f64) -> (f64, String) {
    let cfg = ModelConfig { input_channels: 2, stem_channels: 4, num_residual_blocks: 2, head_hidden: 6, seed };
    let mut model: Model<f64> = init_model(&cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    // The head starts at zero, which would hide every upstream gradient.
    for p in &mut model.params {
        if p.name.starts_with("head.fc2") || p.name.ends_with(".bias") {
            for v in p.value.data_mut() {
                *v = rng.random_range(-0.5..0.5);
            }
        }
    }
    let (n, c, h, w) = (4, 2, 8, 8);
    let x = Tensor::from_vec(&[n, c, h, w], (0..n * c * h * w).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
    let y: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
    let (_, grads) = model.loss_and_grad(&x, &y).unwrap();
    let mut worst = (0.0, String::new());
    #[allow(clippy::needless_range_loop)]
    for pi in 0..model.params.len() {
        for k in 0..model.params[pi].value.len() {
            let orig = model.params[pi].value.data()[k];
            model.params[pi].value.data_mut()[k] = orig + eps;
            let (lp, _) = model.loss_and_grad(&x, &y).unwrap();
            model.params[pi].value.data_mut()[k] = orig - eps;
            let (lm, _) = model.loss_and_grad(&x, &y).unwrap();
            model.params[pi].value.data_mut()[k] = orig;
            let numeric = (lp - lm) / (2.0 * eps);
            let analytic = grads[pi].data()[k];
            let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-6);
            if rel > worst.0 {
                worst = (rel, format!("{}[{k}] analytic={analytic:e} numeric={numeric:e}", model.params[pi].name));
            }
        }
    }
    worst
}
