use serde::{Deserialize, Serialize};

use super::EvalError;

fn check_pair(pred: &[f64], obs: &[f64], min_len: usize) -> Result<(), EvalError> {
    if pred.len() != obs.len() {
        return Err(EvalError::LengthMismatch { pred: pred.len(), obs: obs.len() });
    }
    if pred.len() < min_len {
        return Err(EvalError::TooFewSamples { got: pred.len(), need: min_len });
    }
    Ok(())
}

/// Root-mean-squared error.
pub fn rmse(pred: &[f64], obs: &[f64]) -> Result<f64, EvalError> {
    check_pair(pred, obs, 1)?;
    let sse: f64 = pred.iter().zip(obs).map(|(p, o)| (p - o).powi(2)).sum();
    Ok((sse / pred.len() as f64).sqrt())
}

fn population_variance(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let (n, sum) = v.clone().fold((0usize, 0.0), |(n, s), x| (n + 1, s + x));
    let mean = sum / n as f64;
    v.map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64
}

/// Explained variance `1 - Var(pred - obs) / Var(obs)` with population variances.
pub fn eva(pred: &[f64], obs: &[f64]) -> Result<f64, EvalError> {
    check_pair(pred, obs, 2)?;
    let var_obs = population_variance(obs.iter().copied());
    if var_obs <= 0.0 {
        return Err(EvalError::ZeroVariance);
    }
    let var_res = population_variance(pred.iter().zip(obs).map(|(p, o)| p - o));
    Ok(1.0 - var_res / var_obs)
}

/// Median relative error of the samples whose `|obs|` falls in `[lo, hi)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelErrorBin {
    pub lo_deg: f64,
    pub hi_deg: f64,
    pub count: usize,
    /// `None` for an empty bin.
    pub median: Option<f64>,
}

pub const DEFAULT_ANGLE_EDGES: [f64; 7] = [0.0, 5.0, 10.0, 20.0, 40.0, 90.0, 180.0];

/// Bins samples by `|obs|` and reports the median of
/// `|pred - obs| / max(|obs|, 1)` per bin. The last bin is closed.
pub fn relative_error_by_angle(pred: &[f64], obs: &[f64], edges: &[f64]) -> Result<Vec<RelErrorBin>, EvalError> {
    check_pair(pred, obs, 0)?;
    if edges.len() < 2 || edges.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less)) {
        return Err(EvalError::BadBins);
    }
    let nb = edges.len() - 1;
    let mut per_bin: Vec<Vec<f64>> = vec![Vec::new(); nb];
    for (&p, &o) in pred.iter().zip(obs) {
        let a = o.abs();
        let i = edges.partition_point(|&e| e <= a);
        let bin = if i == 0 {
            continue;
        } else if i > nb {
            if a == edges[nb] {
                nb - 1
            } else {
                continue;
            }
        } else {
            i - 1
        };
        per_bin[bin].push((p - o).abs() / a.max(1.0));
    }
    Ok(per_bin
        .into_iter()
        .enumerate()
        .map(|(i, mut v)| {
            v.sort_by(f64::total_cmp);
            RelErrorBin { lo_deg: edges[i], hi_deg: edges[i + 1], count: v.len(), median: median_sorted(&v) }
        })
        .collect())
}

fn median_sorted(v: &[f64]) -> Option<f64> {
    match v.len() {
        0 => None,
        n if n % 2 == 1 => Some(v[n / 2]),
        n => Some(0.5 * (v[n / 2 - 1] + v[n / 2])),
    }
}
