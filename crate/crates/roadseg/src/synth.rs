//! Procedural road scenes with exact ground truth, plus shadow, rain and
//! highlight degradations for corpus building.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::rainsnow::{synthesize_rain, RainSynthParams};
use crate::raster::{byte_clamp, BinaryMask, RgbRaster};

pub const ROAD_COLOR: [f64; 3] = [150.0, 112.0, 70.0];
pub const GRASS_COLOR: [f64; 3] = [84.0, 121.0, 63.0];
/// Per-channel attenuation of shadowed pixels; compresses the weakest channel
/// hardest so shadows read as saturated and dark.
pub const SHADOW_SCALE: [f64; 3] = [0.50, 0.42, 0.30];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DegradationKind {
    Shadow,
    Rain,
    Specular,
}

impl DegradationKind {
    pub fn name(self) -> &'static str {
        match self {
            DegradationKind::Shadow => "shadow",
            DegradationKind::Rain => "rain",
            DegradationKind::Specular => "specular",
        }
    }
}

/// One synthetic frame: the degraded image, its clean source, the pixels the
/// degradation touched, and the exact road ground truth.
#[derive(Debug, Clone)]
pub struct SynthFrame {
    pub name: String,
    pub kind: DegradationKind,
    pub degraded: RgbRaster,
    pub clean: RgbRaster,
    pub degradation_mask: BinaryMask,
    pub gt_road: BinaryMask,
    /// Exposure fraction for rain frames.
    pub alpha: Option<f64>,
}

/// Smooth lattice noise in [-1,1], bilinearly interpolated.
struct ValueNoise {
    cell: usize,
    grid_w: usize,
    grid: Vec<f64>,
}

impl ValueNoise {
    fn new(width: usize, height: usize, cell: usize, rng: &mut ChaCha8Rng) -> Self {
        let grid_w = width / cell + 2;
        let grid_h = height / cell + 2;
        let grid = (0..grid_w * grid_h).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Self { cell, grid_w, grid }
    }

    fn at(&self, x: usize, y: usize) -> f64 {
        let fx = x as f64 / self.cell as f64;
        let fy = y as f64 / self.cell as f64;
        let gx = fx.floor() as usize;
        let gy = fy.floor() as usize;
        let tx = fx - gx as f64;
        let ty = fy - gy as f64;
        let v00 = self.grid[gy * self.grid_w + gx];
        let v01 = self.grid[gy * self.grid_w + gx + 1];
        let v10 = self.grid[(gy + 1) * self.grid_w + gx];
        let v11 = self.grid[(gy + 1) * self.grid_w + gx + 1];
        (1.0 - ty) * ((1.0 - tx) * v00 + tx * v01) + ty * ((1.0 - tx) * v10 + tx * v11)
    }
}

/// Fractional half-width of the road at vertical position v (0 = top).
fn road_half_width(v: f64) -> f64 {
    0.03 + 0.32 * v
}

fn in_road(u: f64, v: f64) -> bool {
    (u - 0.5).abs() <= road_half_width(v)
}

/// A grass-flanked road widening toward the bottom of the frame, with smooth
/// brightness mottling and per-pixel noise. Returns the image and the road
/// ground truth.
pub fn base_scene(width: usize, height: usize, seed: u64) -> (RgbRaster, BinaryMask) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mottle = ValueNoise::new(width, height, 16, &mut rng);
    let gt = BinaryMask::from_fn(width, height, |x, y| {
        let u = (x as f64 + 0.5) / width as f64;
        let v = (y as f64 + 0.5) / height as f64;
        in_road(u, v)
    });
    let img = RgbRaster::from_fn(width, height, |x, y| {
        let v = (y as f64 + 0.5) / height as f64;
        let road = gt.get(x, y);
        let base = if road { ROAD_COLOR } else { GRASS_COLOR };
        // Mild vertical shading plus smooth mottle, both multiplicative so
        // class chromaticity stays put.
        let mottle_amp = if road { 0.04 } else { 0.07 };
        let shade = (0.97 + 0.06 * v) * (1.0 + mottle_amp * mottle.at(x, y));
        [0, 1, 2].map(|c| byte_clamp(base[c] * shade + rng.gen_range(-3.0..3.0)))
    });
    (img, gt)
}

fn mix_seed(seed: u64, kind: DegradationKind, index: usize) -> u64 {
    let kind_id = match kind {
        DegradationKind::Shadow => 1u64,
        DegradationKind::Rain => 2,
        DegradationKind::Specular => 3,
    };
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(kind_id * 1024 + index as u64)
}

fn paint_ellipse(mask: &mut BinaryMask, cx: f64, cy: f64, rx: f64, ry: f64) {
    let (w, h) = (mask.width(), mask.height());
    let x0 = ((cx - rx).floor().max(0.0)) as usize;
    let x1 = ((cx + rx).ceil().min(w as f64 - 1.0)) as usize;
    let y0 = ((cy - ry).floor().max(0.0)) as usize;
    let y1 = ((cy + ry).ceil().min(h as f64 - 1.0)) as usize;
    for y in y0..=y1 {
        for x in x0..=x1 {
            let dx = (x as f64 - cx) / rx;
            let dy = (y as f64 - cy) / ry;
            if dx * dx + dy * dy <= 1.0 {
                mask.set(x, y, true);
            }
        }
    }
}

/// Shadow degradation: one band across the road plus blobs on the grass, all
/// attenuated per `SHADOW_SCALE`.
fn apply_shadow(
    clean: &RgbRaster,
    gt: &BinaryMask,
    index: usize,
    rng: &mut ChaCha8Rng,
) -> (RgbRaster, BinaryMask) {
    let (w, h) = (clean.width(), clean.height());
    let mut mask = BinaryMask::filled(w, h, false);
    // Band across the road, clipped to the road polygon. It overlaps the top
    // of the seed trapezoid on some frames.
    let band_top = 0.46 + 0.03 * (index % 5) as f64;
    let band_height = 0.10 + 0.01 * (index % 3) as f64;
    for y in 0..h {
        let v = (y as f64 + 0.5) / h as f64;
        if v >= band_top && v <= band_top + band_height {
            for x in 0..w {
                if gt.get(x, y) {
                    mask.set(x, y, true);
                }
            }
        }
    }
    // Grass blobs left and right.
    for side in 0..2 {
        let cx = if side == 0 {
            rng.gen_range(0.06..0.16) * w as f64
        } else {
            rng.gen_range(0.84..0.94) * w as f64
        };
        let cy = rng.gen_range(0.25..0.75) * h as f64;
        let rx = rng.gen_range(0.05..0.09) * w as f64;
        let ry = rng.gen_range(0.08..0.14) * h as f64;
        let mut blob = BinaryMask::filled(w, h, false);
        paint_ellipse(&mut blob, cx, cy, rx, ry);
        for y in 0..h {
            for x in 0..w {
                if blob.get(x, y) && !gt.get(x, y) {
                    mask.set(x, y, true);
                }
            }
        }
    }
    let mut out = clean.clone();
    for y in 0..h {
        for x in 0..w {
            if mask.get(x, y) {
                let p = clean.pixel(x, y);
                out.set_pixel(
                    x,
                    y,
                    [0, 1, 2].map(|c| byte_clamp(f64::from(p[c]) * SHADOW_SCALE[c])),
                );
            }
        }
    }
    (out, mask)
}

/// Exposure fractions across the ten rain frames. Heavy exposures dominate:
/// light rain blends stay linearly consistent with the class colors and the
/// unfiltered pipeline shrugs them off, while exposures near one merge the
/// two classes under the streaks.
pub const RAIN_ALPHAS: [f64; 10] = [0.4, 0.95, 1.0, 0.95, 1.0, 0.7, 0.95, 1.0, 0.95, 1.0];

fn rain_params(index: usize, frame_seed: u64) -> RainSynthParams {
    RainSynthParams {
        alpha: RAIN_ALPHAS[index % RAIN_ALPHAS.len()],
        streak_intensity: 255,
        count: 1100,
        length: 44,
        angle_deg: 8.0,
        width: 2,
        rng_seed: frame_seed,
    }
}

/// The rain module's own denoising corpus: smooth synthetic backgrounds (no
/// pixel noise, so the clean signal is recoverable) with moderate streak
/// cover. Returns (clean, rained, streaks, alpha) per frame.
pub fn rain_module_corpus(seed: u64) -> Vec<(RgbRaster, RgbRaster, BinaryMask, f64)> {
    let alphas = [0.4, 0.7, 1.0];
    (0..10)
        .map(|index| {
            let frame_seed = seed
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add(4096 + index as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(frame_seed);
            // Smooth shading over a slowly drifting chroma; structure enters
            // all channels through the shared luminance, which a gray-guided
            // filter can track.
            let phases: [f64; 3] = [
                rng.gen_range(0.0..std::f64::consts::TAU),
                rng.gen_range(0.0..std::f64::consts::TAU),
                rng.gen_range(0.0..std::f64::consts::TAU),
            ];
            let clean = RgbRaster::from_fn(192, 144, |x, y| {
                let u = (x as f64 + 0.5) / 192.0;
                let v = (y as f64 + 0.5) / 144.0;
                let lum = 1.0
                    + 0.25 * (2.3 * u + phases[0]).sin() * (1.9 * v + phases[1]).cos()
                    + 0.15 * (3.4 * u + 2.2 * v + phases[2]).sin();
                let chroma = [
                    120.0 + 25.0 * u,
                    110.0 + 20.0 * v,
                    95.0 + 15.0 * (u + v) * 0.5,
                ];
                chroma.map(|c| byte_clamp(c * lum))
            });
            let alpha = alphas[index % alphas.len()];
            let params = RainSynthParams {
                alpha,
                streak_intensity: 255,
                count: 200,
                length: 28,
                angle_deg: 8.0,
                width: 1,
                rng_seed: frame_seed,
            };
            let (rained, streaks) = synthesize_rain(&clean, &params);
            (clean, rained, streaks, alpha)
        })
        .collect()
}

/// Highlight degradation: additive white glints on the road, on the grass,
/// and straddling the boundary.
fn apply_specular(clean: &RgbRaster, rng: &mut ChaCha8Rng) -> (RgbRaster, BinaryMask) {
    let (w, h) = (clean.width(), clean.height());
    let mut mask = BinaryMask::filled(w, h, false);
    for glint in 0..12 {
        let v = rng.gen_range(0.35..0.92);
        let half = road_half_width(v);
        let u = match glint % 4 {
            // On the road, including the seed trapezoid area.
            0 => 0.5 + rng.gen_range(-0.6..0.6) * half,
            // On the grass; these drive the unfiltered false alarms.
            1 | 2 => {
                if rng.gen_bool(0.5) {
                    rng.gen_range(0.05..(0.5 - half - 0.05).max(0.06))
                } else {
                    rng.gen_range((0.5 + half + 0.05).min(0.93)..0.94)
                }
            }
            // Straddling the left or right road edge.
            _ => {
                if rng.gen_bool(0.5) {
                    0.5 - half
                } else {
                    0.5 + half
                }
            }
        };
        let cx = u * w as f64;
        let cy = v * h as f64;
        let rx = rng.gen_range(0.022..0.042) * w as f64;
        let ry = rng.gen_range(0.026..0.048) * h as f64;
        paint_ellipse(&mut mask, cx, cy, rx, ry);
    }
    let mut out = clean.clone();
    for y in 0..h {
        for x in 0..w {
            if mask.get(x, y) {
                let strength = 255.0 * rng.gen_range(0.34..0.46);
                let p = clean.pixel(x, y);
                out.set_pixel(
                    x,
                    y,
                    [0, 1, 2].map(|c| byte_clamp(f64::from(p[c]) + strength)),
                );
            }
        }
    }
    (out, mask)
}

/// Builds one degraded frame; fully determined by (kind, index, seed, size).
pub fn synth_frame(
    kind: DegradationKind,
    index: usize,
    seed: u64,
    width: usize,
    height: usize,
) -> SynthFrame {
    let frame_seed = mix_seed(seed, kind, index);
    let (clean, gt_road) = base_scene(width, height, frame_seed);
    let mut rng = ChaCha8Rng::seed_from_u64(frame_seed.wrapping_add(0x5EED));
    let (degraded, degradation_mask, alpha) = match kind {
        DegradationKind::Shadow => {
            let (img, mask) = apply_shadow(&clean, &gt_road, index, &mut rng);
            (img, mask, None)
        }
        DegradationKind::Rain => {
            let params = rain_params(index, frame_seed);
            let (img, mask) = synthesize_rain(&clean, &params);
            (img, mask, Some(params.alpha))
        }
        DegradationKind::Specular => {
            let (img, mask) = apply_specular(&clean, &mut rng);
            (img, mask, None)
        }
    };
    SynthFrame {
        name: format!("{}_{:02}", kind.name(), index),
        kind,
        degraded,
        clean,
        degradation_mask,
        gt_road,
        alpha,
    }
}

/// The 30-frame corpus: ten shadow, ten rain, ten highlight frames.
pub fn standard_corpus(seed: u64, width: usize, height: usize) -> Vec<SynthFrame> {
    let mut frames = Vec::with_capacity(30);
    for kind in [
        DegradationKind::Shadow,
        DegradationKind::Rain,
        DegradationKind::Specular,
    ] {
        for index in 0..10 {
            frames.push(synth_frame(kind, index, seed, width, height));
        }
    }
    frames
}
