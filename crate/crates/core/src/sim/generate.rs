//! Per-pixel log-intensity threshold event generation.
//!
//! Each pixel keeps a reference level `L_ref`, initialised to its
//! log-intensity at `t = 0`. Whenever the current level `L = ln(I + 1)`
//! departs from `L_ref` by at least the contrast threshold `C`, an event of
//! the corresponding sign is emitted and `L_ref` moves by `±C`. Brightness is
//! sampled on a dense grid; crossing times inside a grid step come from
//! linear interpolation of `L` and are floored to whole microseconds, so an
//! event detected at grid time `t_k` always carries a timestamp `< t_k`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use super::SimConfig;
use crate::events::{Event, EventStream, Polarity};
use crate::image::Image;

/// Maps an intensity to the log domain used for thresholding.
#[inline]
pub fn log_intensity(i: f64) -> f64 {
    (i.max(0.0) + 1.0).ln()
}

/// Sample times: every frame boundary plus `min(100, frame_period)` evenly
/// spread sub-steps per frame period, ending exactly at `duration`.
pub fn sampling_grid(duration_us: u64, frame_period_us: u64) -> Vec<u64> {
    let fp = frame_period_us.max(1);
    let sub = fp.min(100);
    let mut grid = Vec::with_capacity((duration_us / fp * sub + 2) as usize);
    let mut frame = 0u64;
    'outer: loop {
        let base = frame * fp;
        for j in 0..sub {
            let t = base + j * fp / sub;
            if t >= duration_us {
                break 'outer;
            }
            grid.push(t);
        }
        frame += 1;
    }
    grid.push(duration_us);
    grid
}

/// Runs the threshold model over `brightness(t)` sampled on `grid`.
///
/// Returns events sorted by time; ties are ordered by row-major pixel index
/// and then by emission order.
pub fn threshold_events(mut brightness: impl FnMut(u64) -> Image, grid: &[u64], contrast: f64) -> Vec<Event> {
    assert!(contrast > 0.0, "contrast threshold must be positive");
    let Some(&t0) = grid.first() else { return Vec::new() };
    let first = brightness(t0);
    let width = first.width();
    let mut reference: Vec<f64> = first.data().iter().map(|&i| log_intensity(i)).collect();
    let mut previous = reference.clone();
    let mut out = Vec::new();
    let mut step: Vec<(u64, usize, Polarity)> = Vec::new();
    for pair in grid.windows(2) {
        let (ta, tb) = (pair[0], pair[1]);
        let dt = (tb - ta) as f64;
        let img = brightness(tb);
        assert_eq!(img.data().len(), reference.len(), "brightness image size changed");
        step.clear();
        for (idx, (&i, (lref, lprev))) in
            img.data().iter().zip(reference.iter_mut().zip(previous.iter_mut())).enumerate()
        {
            let l = log_intensity(i);
            if (l - *lref).abs() >= contrast {
                let slope = l - *lprev;
                let crossing = |level: f64| {
                    let frac = ((level - *lprev) / slope).clamp(0.0, 1.0);
                    (ta + (frac * dt).floor() as u64).min(tb - 1)
                };
                while l - *lref >= contrast {
                    *lref += contrast;
                    step.push((crossing(*lref), idx, Polarity::Pos));
                }
                while *lref - l >= contrast {
                    *lref -= contrast;
                    step.push((crossing(*lref), idx, Polarity::Neg));
                }
            }
            *lprev = l;
        }
        step.sort_by_key(|&(t, idx, _)| (t, idx));
        out.extend(step.iter().map(|&(t, idx, p)| Event::new(t, (idx % width) as u16, (idx / width) as u16, p)));
    }
    out
}

/// Uniform background events: Poisson count, uniform pixel/time, fair polarity.
pub fn noise_events(config: &SimConfig, rng: &mut ChaCha8Rng) -> Vec<Event> {
    if config.noise_rate <= 0.0 || config.duration_us == 0 {
        return Vec::new();
    }
    let (w, h) = (config.width as u64, config.height as u64);
    let mean = config.noise_rate * (w * h) as f64 * config.duration_us as f64 * 1e-6;
    let n = Poisson::new(mean).map(|d| d.sample(rng) as usize).unwrap_or(0);
    let mut events: Vec<Event> = (0..n)
        .map(|_| {
            let t = rng.random_range(0..config.duration_us);
            let x = rng.random_range(0..w) as u16;
            let y = rng.random_range(0..h) as u16;
            let p = if rng.random::<bool>() { Polarity::Pos } else { Polarity::Neg };
            Event::new(t, x, y, p)
        })
        .collect();
    events.sort_by_key(|e| (e.t, e.y, e.x));
    events
}

/// Events for a brightness function under `config` (grid, threshold, noise).
pub fn generate_events(brightness: impl FnMut(u64) -> Image, config: &SimConfig) -> EventStream {
    let grid = sampling_grid(config.duration_us, config.frame_period_us);
    let mut events = threshold_events(brightness, &grid, config.contrast_threshold);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let noise = noise_events(config, &mut rng);
    if !noise.is_empty() {
        events = merge_by_time(events, noise);
    }
    EventStream::new(config.width, config.height, events).expect("simulator produced an invalid stream")
}

fn merge_by_time(a: Vec<Event>, b: Vec<Event>) -> Vec<Event> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut ia, mut ib) = (a.into_iter().peekable(), b.into_iter().peekable());
    loop {
        match (ia.peek(), ib.peek()) {
            (Some(x), Some(y)) => {
                if x.t <= y.t {
                    out.push(ia.next().unwrap());
                } else {
                    out.push(ib.next().unwrap());
                }
            }
            (Some(_), None) => out.extend(ia.by_ref()),
            (None, Some(_)) => out.extend(ib.by_ref()),
            (None, None) => break,
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{Profile, SceneKind, SceneSpec};

    fn config_1x1(duration_us: u64, frame_period_us: u64, contrast: f64) -> SimConfig {
        SimConfig {
            width: 1,
            height: 1,
            duration_us,
            contrast_threshold: contrast,
            frame_period_us,
            noise_rate: 0.0,
            seed: 1,
            scene: SceneSpec::new(SceneKind::TranslatingTexture, Profile::constant(0.0), Profile::constant(0.0)),
        }
    }

    /// Brightness whose log-intensity is `l(t)` on a 1x1 array.
    fn from_log(l: impl Fn(f64) -> f64) -> impl FnMut(u64) -> Image {
        move |t| Image::filled(1, 1, l(t as f64).exp() - 1.0)
    }

    #[test]
    fn grid_includes_frame_boundaries_and_end() {
        let g = sampling_grid(1_000, 500);
        assert_eq!(g.len(), 201);
        assert_eq!(g[100], 500);
        assert_eq!(*g.last().unwrap(), 1_000);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        // Frame period shorter than 100 samples: one sample per microsecond.
        assert_eq!(sampling_grid(50, 20), (0..=50).collect::<Vec<_>>());
    }

    #[test]
    fn constant_brightness_gives_no_events() {
        let cfg = config_1x1(100_000, 10_000, 0.2);
        assert!(generate_events(from_log(|_| 3.0), &cfg).is_empty());
    }

    #[test]
    fn ramp_of_three_and_a_half_thresholds() {
        let c = 0.2;
        let cfg = config_1x1(1_000_000, 50_000, c);
        let s = generate_events(from_log(move |t| 2.0 + 3.5 * c * t / 1e6), &cfg);
        assert_eq!(s.len(), 3);
        assert!(s.events().iter().all(|e| e.p == Polarity::Pos));
        // Linear ramp: crossings at 2/7, 4/7 and 6/7 of the duration.
        let ts: Vec<u64> = s.events().iter().map(|e| e.t).collect();
        for (t, k) in ts.iter().zip([2.0, 4.0, 6.0]) {
            assert!((*t as f64 - k / 7.0 * 1e6).abs() <= 1.0, "{ts:?}");
        }
    }

    /// Level-crossing oracle on a 1 us grid, scalar and self-contained.
    fn crossing_oracle(l: impl Fn(f64) -> f64, duration: u64, c: f64) -> Vec<(u64, i8)> {
        let mut out = Vec::new();
        let mut level = l(0.0);
        for t in 1..=duration {
            let v = l(t as f64);
            // A crossing inside (t-1, t] is stamped t-1.
            while v - level >= c {
                level += c;
                out.push((t - 1, 1));
            }
            while level - v >= c {
                level -= c;
                out.push((t - 1, -1));
            }
        }
        out
    }

    #[test]
    fn sinusoid_matches_dense_crossing_oracle() {
        let c = 0.15;
        let duration = 200_000;
        let l = |t: f64| 3.0 + 0.8 * (t / 9_000.0).sin() + 0.3 * (t / 2_300.0 + 1.0).sin();
        // frame period <= 100 us makes the simulator grid 1 us as well.
        let cfg = config_1x1(duration, 100, c);
        let s = generate_events(from_log(l), &cfg);
        let oracle = crossing_oracle(l, duration, c);
        let got: Vec<(u64, i8)> = s.events().iter().map(|e| (e.t, e.p.as_i8())).collect();
        assert_eq!(got.len(), oracle.len());
        assert_eq!(got, oracle);
        assert!(oracle.len() > 50);
    }

    #[test]
    fn monotone_brightening_is_all_positive() {
        let cfg = config_1x1(500_000, 10_000, 0.1);
        let s = generate_events(from_log(|t| 1.0 + (t / 1e5).sqrt()), &cfg);
        assert!(!s.is_empty());
        assert!(s.events().iter().all(|e| e.p.is_pos()));
    }

    #[test]
    fn noise_is_seeded_and_in_bounds() {
        let mut cfg = config_1x1(1_000_000, 10_000, 0.2);
        cfg.width = 16;
        cfg.height = 8;
        cfg.noise_rate = 5.0;
        let a = generate_events(|_| Image::filled(16, 8, 50.0), &cfg);
        let b = generate_events(|_| Image::filled(16, 8, 50.0), &cfg);
        assert_eq!(a, b);
        // Poisson mean 640.
        assert!((500..800).contains(&a.len()), "{}", a.len());
        assert!(a.validate().is_empty());
    }
}
