//! Procedural scenes whose motion is driven by the steering/speed profiles.

use serde::{Deserialize, Serialize};

use super::profile::Profile;
use crate::image::Image;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneKind {
    /// A bright vertical bar translating horizontally (wraps around).
    TranslatingBar,
    /// Slanted log-sawtooth stripes translating horizontally.
    TranslatingTexture,
    /// Perspective road whose curvature follows the steering angle and
    /// whose lane dashes advance with speed.
    TurningRoad,
}

/// Appearance and motion-coupling parameters shared by all scene kinds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TextureParams {
    /// Dark and bright intensity levels (0..=255).
    pub low: f64,
    pub high: f64,
    /// Stripe period of the texture.
    pub period_px: f64,
    /// Width of the sharp falling edge of each stripe.
    pub edge_px: f64,
    /// Horizontal stripe shear per row.
    pub slant: f64,
    pub bar_width_px: f64,
    /// Horizontal image velocity per degree of steering.
    pub px_per_s_per_deg: f64,
    /// Scene motion at `t` follows the steering angle at `t + lead`.
    pub lead_us: u64,
    /// Road-centre shift at the horizon per degree of steering.
    pub curve_px_per_deg: f64,
    /// Ground distance between lane dashes.
    pub dash_period_m: f64,
}

impl Default for TextureParams {
    fn default() -> Self {
        TextureParams {
            low: 20.0,
            high: 200.0,
            period_px: 16.0,
            edge_px: 1.0,
            slant: 0.25,
            bar_width_px: 4.0,
            px_per_s_per_deg: 2.0,
            lead_us: 0,
            curve_px_per_deg: 0.5,
            dash_period_m: 6.0,
        }
    }
}

fn default_label_period() -> u64 {
    10_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub kind: SceneKind,
    /// Steering angle in degrees over time.
    #[serde(default)]
    pub angle: Profile,
    /// Vehicle speed in km/h over time.
    #[serde(default)]
    pub speed: Profile,
    #[serde(default)]
    pub texture: TextureParams,
    /// Cadence of the ground-truth label track.
    #[serde(default = "default_label_period")]
    pub label_period_us: u64,
}

impl SceneSpec {
    pub fn new(kind: SceneKind, angle: Profile, speed: Profile) -> Self {
        SceneSpec { kind, angle, speed, texture: TextureParams::default(), label_period_us: default_label_period() }
    }

    pub fn angle_at(&self, t_us: u64) -> f64 {
        self.angle.value_at(t_us as f64 * 1e-6)
    }

    pub fn speed_at(&self, t_us: u64) -> f64 {
        self.speed.value_at(t_us as f64 * 1e-6)
    }

    /// Horizontal displacement (pixels) accumulated over `[0, t]`.
    pub fn offset_px(&self, t_us: u64) -> f64 {
        let lead = self.texture.lead_us as f64 * 1e-6;
        let t = t_us as f64 * 1e-6;
        self.texture.px_per_s_per_deg * self.angle.integral(lead, t + lead)
    }

    /// Distance driven (metres) over `[0, t]`.
    pub fn distance_m(&self, t_us: u64) -> f64 {
        self.speed.integral(0.0, t_us as f64 * 1e-6) / 3.6
    }
}

/// Renders the scene intensity image (values in `[0, 255]`) at time `t_us`.
pub fn render_brightness(scene: &SceneSpec, width: usize, height: usize, t_us: u64) -> Image {
    match scene.kind {
        SceneKind::TranslatingBar => render_bar(scene, width, height, t_us),
        SceneKind::TranslatingTexture => render_texture(scene, width, height, t_us),
        SceneKind::TurningRoad => render_road(scene, width, height, t_us),
    }
}

fn render_bar(scene: &SceneSpec, width: usize, height: usize, t_us: u64) -> Image {
    let tp = &scene.texture;
    let w = width as f64;
    let centre = (0.5 * w + scene.offset_px(t_us)).rem_euclid(w);
    let half = 0.5 * tp.bar_width_px;
    let row: Vec<f64> = (0..width)
        .map(|x| {
            let mut d = (x as f64 + 0.5 - centre).abs();
            d = d.min(w - d);
            let cover = (half + 0.5 - d).clamp(0.0, 1.0);
            tp.low + (tp.high - tp.low) * cover
        })
        .collect();
    Image::from_fn(width, height, |x, _| row[x])
}

fn render_texture(scene: &SceneSpec, width: usize, height: usize, t_us: u64) -> Image {
    let tp = &scene.texture;
    let offset = scene.offset_px(t_us);
    let l_low = (tp.low + 1.0).ln();
    let span = (tp.high + 1.0).ln() - l_low;
    let period = tp.period_px;
    let edge = (tp.edge_px / period).clamp(1e-6, 0.5);
    Image::from_fn(width, height, |x, y| {
        let s = x as f64 + 0.5 - offset + tp.slant * (y as f64 + 0.5);
        let u = (s / period).rem_euclid(1.0);
        let r = if u < 1.0 - edge { u / (1.0 - edge) } else { (1.0 - u) / edge };
        (l_low + span * r).exp() - 1.0
    })
}

fn smoothstep(edge0: f64, edge1: f64, v: f64) -> f64 {
    let t = ((v - edge0) / (edge1 - edge0)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

fn render_road(scene: &SceneSpec, width: usize, height: usize, t_us: u64) -> Image {
    let tp = &scene.texture;
    let (w, h) = (width as f64, height as f64);
    let horizon = 0.35 * h;
    let alpha = scene.angle_at(t_us + tp.lead_us);
    let travelled = scene.distance_m(t_us);
    let sky = tp.low + 0.75 * (tp.high - tp.low);
    let grass = tp.low;
    let asphalt = tp.low + 0.35 * (tp.high - tp.low);
    let paint = tp.high;
    Image::from_fn(width, height, |x, y| {
        let yc = y as f64 + 0.5;
        if yc <= horizon {
            return sky;
        }
        // 0 at the horizon, 1 at the bottom row.
        let z = (yc - horizon) / (h - horizon);
        let centre = 0.5 * w + tp.curve_px_per_deg * alpha * (1.0 - z).powi(2);
        let half_width = 0.45 * w * z;
        let d = (x as f64 + 0.5 - centre).abs();
        let on_road = 1.0 - smoothstep(half_width - 0.5, half_width + 0.5, d);
        let line_w = (0.04 * w * z).max(0.5);
        let edge_line = 1.0 - smoothstep(line_w * 0.5, line_w * 0.5 + 1.0, (d - half_width).abs());
        // Ground distance grows like 1/z under a flat-ground perspective.
        let ground = 4.0 / z + travelled;
        let dash = 0.5 + 0.5 * (std::f64::consts::TAU * ground / tp.dash_period_m).sin();
        let centre_line = (1.0 - smoothstep(line_w * 0.5, line_w * 0.5 + 1.0, d)) * smoothstep(0.3, 0.7, dash);
        let base = grass + (asphalt - grass) * on_road;
        let base = base + (paint - base) * edge_line.max(centre_line);
        base.clamp(0.0, 255.0)
    })
}
