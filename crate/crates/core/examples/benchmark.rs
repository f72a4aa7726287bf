//! Runs one benchmark experiment and prints its report as JSON.
//!
//! Usage: `benchmark [kind] [T_ms] [seed] [epochs]`; `LR` overrides the learning rate.

use std::time::Instant;

use evsteer_core::eval::{benchmark_experiment, benchmark_sim_config, run_experiment};
use evsteer_core::sim::generate_recording;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let kind = args.get(1).map_or("events", String::as_str).parse().expect("input kind");
    let t_ms: u64 = args.get(2).map_or(50, |s| s.parse().expect("T_ms"));
    let seed: u64 = args.get(3).map_or(1, |s| s.parse().expect("seed"));
    let start = Instant::now();
    let rec = generate_recording(&benchmark_sim_config(0)).expect("simulate");
    eprintln!("simulated {} events in {:.1?}", rec.events.len(), start.elapsed());
    let mut cfg = benchmark_experiment(kind, t_ms, seed);
    if let Some(e) = args.get(4) {
        cfg.train.epochs = e.parse().expect("epochs");
    }
    if let Ok(lr) = std::env::var("LR") {
        cfg.train.learning_rate = lr.parse().unwrap();
    }
    let start = Instant::now();
    let out = run_experiment(&rec, &cfg).expect("experiment");
    eprintln!("trained on {} samples in {:.1?}", out.n_train, start.elapsed());
    eprintln!("loss: {:?}", out.loss_history);
    println!("{}", serde_json::to_string(&out.report).unwrap());
}
