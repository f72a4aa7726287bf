use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

/// A scalar signal over time (seconds), e.g. steering angle or speed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Profile {
    Constant {
        value: f64,
    },
    /// `offset + sum(a * sin(2*pi*t/period + phase))`
    Sines {
        #[serde(default)]
        offset: f64,
        components: Vec<SineComponent>,
    },
    /// Piecewise-linear through `[t_s, value]` points, held flat outside them.
    Keyframes {
        points: Vec<[f64; 2]>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SineComponent {
    pub amplitude: f64,
    pub period_s: f64,
    #[serde(default)]
    pub phase_rad: f64,
}

impl Default for Profile {
    fn default() -> Self {
        Profile::Constant { value: 0.0 }
    }
}

impl Profile {
    pub fn constant(value: f64) -> Self {
        Profile::Constant { value }
    }

    pub fn value_at(&self, t_s: f64) -> f64 {
        match self {
            Profile::Constant { value } => *value,
            Profile::Sines { offset, components } => {
                offset
                    + components.iter().map(|c| c.amplitude * (TAU * t_s / c.period_s + c.phase_rad).sin()).sum::<f64>()
            }
            Profile::Keyframes { points } => {
                let Some(first) = points.first() else { return 0.0 };
                if t_s <= first[0] {
                    return first[1];
                }
                for w in points.windows(2) {
                    let ([t0, v0], [t1, v1]) = (w[0], w[1]);
                    if t_s <= t1 {
                        if t1 <= t0 {
                            return v1;
                        }
                        return v0 + (v1 - v0) * (t_s - t0) / (t1 - t0);
                    }
                }
                points.last().unwrap()[1]
            }
        }
    }

    /// Exact integral of the profile over `[t0_s, t1_s]`.
    pub fn integral(&self, t0_s: f64, t1_s: f64) -> f64 {
        self.antiderivative(t1_s) - self.antiderivative(t0_s)
    }

    fn antiderivative(&self, t: f64) -> f64 {
        match self {
            Profile::Constant { value } => value * t,
            Profile::Sines { offset, components } => {
                offset * t
                    - components
                        .iter()
                        .map(|c| c.amplitude * c.period_s / TAU * (TAU * t / c.period_s + c.phase_rad).cos())
                        .sum::<f64>()
            }
            Profile::Keyframes { points } => {
                let Some(first) = points.first() else { return 0.0 };
                // Measured from the first keyframe; constants cancel in `integral`.
                if t <= first[0] {
                    return first[1] * (t - first[0]);
                }
                let mut acc = 0.0;
                for w in points.windows(2) {
                    let ([t0, v0], [t1, v1]) = (w[0], w[1]);
                    if t <= t1 {
                        let v = self.value_at(t);
                        return acc + 0.5 * (v0 + v) * (t - t0);
                    }
                    acc += 0.5 * (v0 + v1) * (t1 - t0);
                }
                let last = points.last().unwrap();
                acc + last[1] * (t - last[0])
            }
        }
    }

    /// Conservative `(min, max)` over all time.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            Profile::Constant { value } => (*value, *value),
            Profile::Sines { offset, components } => {
                let amp: f64 = components.iter().map(|c| c.amplitude.abs()).sum();
                (offset - amp, offset + amp)
            }
            Profile::Keyframes { points } => {
                points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[1]), hi.max(p[1])))
            }
        }
    }

    pub(crate) fn is_well_formed(&self) -> bool {
        match self {
            Profile::Constant { value } => value.is_finite(),
            Profile::Sines { offset, components } => {
                offset.is_finite()
                    && components.iter().all(|c| c.amplitude.is_finite() && c.phase_rad.is_finite() && c.period_s > 0.0)
            }
            Profile::Keyframes { points } => {
                points.iter().all(|p| p[0].is_finite() && p[1].is_finite())
                    && points.windows(2).all(|w| w[0][0] <= w[1][0])
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trapezoid(p: &Profile, t0: f64, t1: f64) -> f64 {
        let n = 200_000;
        let h = (t1 - t0) / n as f64;
        let mut s = 0.5 * (p.value_at(t0) + p.value_at(t1));
        for i in 1..n {
            s += p.value_at(t0 + i as f64 * h);
        }
        s * h
    }

    #[test]
    fn integrals_match_quadrature() {
        let profiles = [
            Profile::constant(3.0),
            Profile::Sines {
                offset: 1.0,
                components: vec![
                    SineComponent { amplitude: 20.0, period_s: 7.0, phase_rad: 0.3 },
                    SineComponent { amplitude: -5.0, period_s: 1.3, phase_rad: 2.0 },
                ],
            },
            Profile::Keyframes { points: vec![[1.0, 0.0], [2.0, 10.0], [4.0, -6.0]] },
        ];
        for p in &profiles {
            for (t0, t1) in [(0.0, 5.0), (1.5, 3.7), (-1.0, 0.5)] {
                let exact = p.integral(t0, t1);
                let quad = trapezoid(p, t0, t1);
                assert!((exact - quad).abs() < 1e-6, "{p:?} [{t0},{t1}]: {exact} vs {quad}");
            }
        }
    }

    #[test]
    fn keyframes_hold_outside_range() {
        let p = Profile::Keyframes { points: vec![[1.0, 2.0], [3.0, 4.0]] };
        assert_eq!(p.value_at(0.0), 2.0);
        assert_eq!(p.value_at(2.0), 3.0);
        assert_eq!(p.value_at(10.0), 4.0);
        assert_eq!(p.bounds(), (2.0, 4.0));
    }
}
