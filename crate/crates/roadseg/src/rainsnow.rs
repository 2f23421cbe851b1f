//! Rain and snow streak suppression with a guided filter pass, guidance
//! refinement, and a second pass; plus the streak synthesizer used to build
//! test corpora.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::raster::{box_mean, byte_clamp, BinaryMask, GrayRaster, RgbRaster};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum FilterError {
    #[error("input and guide dimensions differ")]
    DimensionMismatch,
}

/// Window half-width and regularizer for the guided filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuidedFilterParams {
    pub radius: usize,
    pub epsilon: f64,
}

impl Default for GuidedFilterParams {
    fn default() -> Self {
        Self {
            radius: 6,
            epsilon: 0.04,
        }
    }
}

/// Streak blending and geometry controls. `alpha` is the exposure fraction
/// weighting the streak intensity against the background.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RainSynthParams {
    pub alpha: f64,
    pub streak_intensity: u8,
    pub count: usize,
    pub length: usize,
    /// Degrees from vertical; positive leans right.
    pub angle_deg: f64,
    pub width: usize,
    pub rng_seed: u64,
}

impl Default for RainSynthParams {
    fn default() -> Self {
        Self {
            alpha: 0.7,
            streak_intensity: 255,
            count: 200,
            length: 30,
            angle_deg: 8.0,
            width: 1,
            rng_seed: 0,
        }
    }
}

/// Paints streaks over the background: covered pixels become
/// `round(alpha * intensity + (1 - alpha) * background)` per channel. The
/// returned mask marks streak coverage. Fully deterministic for a seed.
pub fn synthesize_rain(background: &RgbRaster, params: &RainSynthParams) -> (RgbRaster, BinaryMask) {
    assert!((0.0..=1.0).contains(&params.alpha), "alpha outside [0,1]");
    let (w, h) = (background.width(), background.height());
    let mut mask = BinaryMask::filled(w, h, false);
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let angle = params.angle_deg.to_radians();
    let (dx, dy) = (angle.sin(), angle.cos());
    // Perpendicular step for streak thickness.
    let (px, py) = (dy, -dx);
    for _ in 0..params.count {
        let x0 = rng.gen_range(0..w) as f64;
        let y0 = rng.gen_range(0..h + params.length) as f64 - params.length as f64;
        for t in 0..params.length {
            for k in 0..params.width.max(1) {
                let fx = x0 + t as f64 * dx + k as f64 * px;
                let fy = y0 + t as f64 * dy + k as f64 * py;
                let ix = fx.round();
                let iy = fy.round();
                if ix < 0.0 || iy < 0.0 || ix >= w as f64 || iy >= h as f64 {
                    continue;
                }
                mask.set(ix as usize, iy as usize, true);
            }
        }
    }
    let streak = f64::from(params.streak_intensity);
    let mut out = background.clone();
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let p = background.pixel(x, y);
            let blended = [0, 1, 2].map(|c| {
                byte_clamp(params.alpha * streak + (1.0 - params.alpha) * f64::from(p[c]))
            });
            out.set_pixel(x, y, blended);
        }
    }
    (out, mask)
}

/// Edge-preserving smoothing of `input` steered by `guide`.
///
/// Per clipped window: `a = cov(guide, input) / (var(guide) + epsilon)`,
/// `b = mean(input) - a * mean(guide)`; each output pixel averages a and b
/// over every window containing it and applies them to the guide. Windows
/// whose regularized variance vanishes (flat window, epsilon 0) contribute
/// `a = 0, b = mean(input)`.
pub fn guided_filter(
    input: &GrayRaster,
    guide: &GrayRaster,
    params: &GuidedFilterParams,
) -> Result<GrayRaster, FilterError> {
    if !input.same_size(guide) {
        return Err(FilterError::DimensionMismatch);
    }
    let r = params.radius;
    let mean_guide = box_mean(guide, r);
    let mean_input = box_mean(input, r);
    let corr_gi = box_mean(&guide.product(input), r);
    let corr_gg = box_mean(&guide.product(guide), r);
    let n = input.values().len();
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for i in 0..n {
        let mg = mean_guide.values()[i];
        let mi = mean_input.values()[i];
        let var = corr_gg.values()[i] - mg * mg;
        let cov = corr_gi.values()[i] - mg * mi;
        let denom = var + params.epsilon;
        let ak = if denom > 1e-12 { cov / denom } else { 0.0 };
        a.push(ak);
        b.push(mi - ak * mg);
    }
    let mean_a = box_mean(&GrayRaster::new(input.width(), input.height(), a), r);
    let mean_b = box_mean(&GrayRaster::new(input.width(), input.height(), b), r);
    let out = (0..n)
        .map(|i| mean_a.values()[i] * guide.values()[i] + mean_b.values()[i])
        .collect();
    Ok(GrayRaster::new(input.width(), input.height(), out))
}

/// Minimum gray-plane brightening (unit scale) for a pixel to count as a
/// streak candidate. Streak blending raises the gray plane by far more than
/// this; sensor noise and bright-side edge pixels stay below it, so they are
/// not eaten by the residual subtraction.
pub const CANDIDATE_MARGIN: f64 = 0.05;

/// Removes streaks with two guided passes.
///
/// Pass one smooths each channel against the image's own gray plane. Where
/// the smoothing darkened the gray plane beyond [`CANDIDATE_MARGIN`] (streaks
/// brighten pixels), the detail residual is treated as streak and subtracted,
/// giving a residual-removed reconstruction. The refined guidance averages
/// the smoothed gray plane with the gray plane of that reconstruction; pass
/// two re-filters the reconstruction against it, restoring edges the first
/// pass took out. Filtering the reconstruction rather than the raw input is
/// what actually discards streak energy: a guided pass over the raw channels
/// preserves window means, so it can only spread the streaks around.
pub fn remove_rain_snow(img: &RgbRaster, params: &GuidedFilterParams) -> RgbRaster {
    assert!(params.radius >= 1, "denoising radius must be >= 1");
    let gray = img.gray_plane();
    let channels = [0, 1, 2].map(|c| img.channel_plane(c));
    let smoothed =
        [0, 1, 2].map(|c| guided_filter(&channels[c], &gray, params).expect("same size"));

    let n = gray.values().len();
    let smoothed_gray = GrayRaster::new(
        img.width(),
        img.height(),
        (0..n)
            .map(|i| {
                (smoothed[0].values()[i] + smoothed[1].values()[i] + smoothed[2].values()[i]) / 3.0
            })
            .collect(),
    );
    // Streak candidates are pixels the smoothing darkened markedly.
    let mut residual_free: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for i in 0..n {
        let candidate = gray.values()[i] - smoothed_gray.values()[i] > CANDIDATE_MARGIN;
        for c in 0..3 {
            let original = channels[c].values()[i];
            residual_free[c].push(if candidate { smoothed[c].values()[i] } else { original });
        }
    }
    let refined_guide = GrayRaster::new(
        img.width(),
        img.height(),
        (0..n)
            .map(|i| {
                let residual_gray =
                    (residual_free[0][i] + residual_free[1][i] + residual_free[2][i]) / 3.0;
                (smoothed_gray.values()[i] + residual_gray) / 2.0
            })
            .collect(),
    );
    let output = residual_free.map(|plane| {
        let reconstruction = GrayRaster::new(img.width(), img.height(), plane);
        guided_filter(&reconstruction, &refined_guide, params).expect("same size")
    });
    RgbRaster::from_planes(&output[0], &output[1], &output[2])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::mean_abs_error;
    use rand::SeedableRng;

    /// Direct per-window evaluation with explicit loops.
    fn guided_oracle(input: &GrayRaster, guide: &GrayRaster, params: &GuidedFilterParams) -> GrayRaster {
        let (w, h) = (input.width(), input.height());
        let r = params.radius;
        let mut a = GrayRaster::filled(w, h, 0.0);
        let mut b = GrayRaster::filled(w, h, 0.0);
        for y in 0..h {
            for x in 0..w {
                let mut sum_g = 0.0;
                let mut sum_i = 0.0;
                let mut sum_gg = 0.0;
                let mut sum_gi = 0.0;
                let mut count = 0.0;
                for wy in y.saturating_sub(r)..=(y + r).min(h - 1) {
                    for wx in x.saturating_sub(r)..=(x + r).min(w - 1) {
                        let g = guide.get(wx, wy);
                        let i = input.get(wx, wy);
                        sum_g += g;
                        sum_i += i;
                        sum_gg += g * g;
                        sum_gi += g * i;
                        count += 1.0;
                    }
                }
                let mg = sum_g / count;
                let mi = sum_i / count;
                let var = sum_gg / count - mg * mg;
                let cov = sum_gi / count - mg * mi;
                let denom = var + params.epsilon;
                let ak = if denom > 1e-12 { cov / denom } else { 0.0 };
                a.set(x, y, ak);
                b.set(x, y, mi - ak * mg);
            }
        }
        GrayRaster::from_fn(w, h, |x, y| {
            let mut sum_a = 0.0;
            let mut sum_b = 0.0;
            let mut count = 0.0;
            for wy in y.saturating_sub(r)..=(y + r).min(h - 1) {
                for wx in x.saturating_sub(r)..=(x + r).min(w - 1) {
                    sum_a += a.get(wx, wy);
                    sum_b += b.get(wx, wy);
                    count += 1.0;
                }
            }
            (sum_a / count) * guide.get(x, y) + sum_b / count
        })
    }

    #[test]
    fn alpha_zero_keeps_background_but_marks_mask() {
        let bg = RgbRaster::from_fn(32, 24, |x, y| [(x * 3) as u8, (y * 5) as u8, 77]);
        let params = RainSynthParams {
            alpha: 0.0,
            count: 20,
            rng_seed: 5,
            ..Default::default()
        };
        let (out, mask) = synthesize_rain(&bg, &params);
        assert_eq!(out, bg);
        assert!(mask.count_ones() > 0);
    }

    #[test]
    fn alpha_one_paints_pure_intensity() {
        let bg = RgbRaster::filled(32, 24, [10, 20, 30]);
        let params = RainSynthParams {
            alpha: 1.0,
            streak_intensity: 255,
            count: 10,
            rng_seed: 6,
            ..Default::default()
        };
        let (out, mask) = synthesize_rain(&bg, &params);
        for y in 0..24 {
            for x in 0..32 {
                if mask.get(x, y) {
                    assert_eq!(out.pixel(x, y), [255, 255, 255]);
                } else {
                    assert_eq!(out.pixel(x, y), [10, 20, 30]);
                }
            }
        }
    }

    #[test]
    fn half_blend_rounds_half_up() {
        let bg = RgbRaster::filled(16, 16, [100, 100, 100]);
        let params = RainSynthParams {
            alpha: 0.5,
            streak_intensity: 255,
            count: 8,
            rng_seed: 7,
            ..Default::default()
        };
        let (out, mask) = synthesize_rain(&bg, &params);
        let mut checked = false;
        for y in 0..16 {
            for x in 0..16 {
                if mask.get(x, y) {
                    assert_eq!(out.pixel(x, y), [178, 178, 178]);
                    checked = true;
                }
            }
        }
        assert!(checked);
    }

    #[test]
    fn synthesis_is_deterministic() {
        let bg = RgbRaster::from_fn(40, 30, |x, y| [(x + y) as u8, x as u8, y as u8]);
        let params = RainSynthParams {
            rng_seed: 99,
            ..Default::default()
        };
        let first = synthesize_rain(&bg, &params);
        let second = synthesize_rain(&bg, &params);
        assert_eq!(first, second);
    }

    #[test]
    fn constant_input_passes_through() {
        let input = GrayRaster::filled(10, 10, 0.42);
        let guide = GrayRaster::from_fn(10, 10, |x, y| ((x * y) as f64).sin().abs());
        let params = GuidedFilterParams {
            radius: 2,
            epsilon: 0.01,
        };
        let out = guided_filter(&input, &guide, &params).unwrap();
        for &v in out.values() {
            assert!((v - 0.42).abs() < 1e-12);
        }
    }

    #[test]
    fn self_guidance_with_zero_epsilon_is_identity() {
        // A diagonal ramp: every window has genuine variance.
        let input = GrayRaster::from_fn(9, 9, |x, y| (x + 2 * y) as f64 / 24.0);
        let params = GuidedFilterParams {
            radius: 2,
            epsilon: 0.0,
        };
        let out = guided_filter(&input, &input, &params).unwrap();
        for (o, i) in out.values().iter().zip(input.values()) {
            assert!((o - i).abs() < 1e-9);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let a = GrayRaster::filled(4, 4, 0.0);
        let b = GrayRaster::filled(4, 5, 0.0);
        assert_eq!(
            guided_filter(&a, &b, &GuidedFilterParams::default()),
            Err(FilterError::DimensionMismatch)
        );
    }

    #[test]
    fn matches_naive_oracle_on_random_rasters() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        let params = GuidedFilterParams {
            radius: 2,
            epsilon: 0.01,
        };
        for _ in 0..100 {
            let input = GrayRaster::from_fn(12, 12, |_, _| rand::Rng::gen::<f64>(&mut rng));
            let guide = GrayRaster::from_fn(12, 12, |_, _| rand::Rng::gen::<f64>(&mut rng));
            let fast = guided_filter(&input, &guide, &params).unwrap();
            let slow = guided_oracle(&input, &guide, &params);
            for (a, b) in fast.values().iter().zip(slow.values()) {
                assert!((a - b).abs() <= 1e-9, "diff {}", (a - b).abs());
            }
        }
    }

    #[test]
    fn streak_free_constant_image_is_stable() {
        let img = RgbRaster::filled(24, 20, [90, 120, 150]);
        let out = remove_rain_snow(&img, &GuidedFilterParams::default());
        for (a, b) in out.pixels().iter().zip(img.pixels()) {
            for c in 0..3 {
                assert!((i16::from(a[c]) - i16::from(b[c])).abs() <= 1);
            }
        }
    }

    #[test]
    fn filtering_reduces_error_against_clean_background() {
        let clean = RgbRaster::from_fn(64, 48, |x, y| {
            [
                (60 + x / 2) as u8,
                (70 + y / 2) as u8,
                (80 + (x + y) / 4) as u8,
            ]
        });
        let params = RainSynthParams {
            alpha: 0.7,
            count: 60,
            length: 20,
            rng_seed: 12,
            ..Default::default()
        };
        let (rained, _) = synthesize_rain(&clean, &params);
        let filtered = remove_rain_snow(&rained, &GuidedFilterParams::default());
        let before = mean_abs_error(&rained, &clean);
        let after = mean_abs_error(&filtered, &clean);
        assert!(after < before, "after={after} before={before}");
    }

    #[test]
    fn removal_is_deterministic() {
        let clean = RgbRaster::from_fn(32, 32, |x, y| [(x * 7) as u8, (y * 5) as u8, 99]);
        let (rained, _) = synthesize_rain(&clean, &RainSynthParams::default());
        let a = remove_rain_snow(&rained, &GuidedFilterParams::default());
        let b = remove_rain_snow(&rained, &GuidedFilterParams::default());
        assert_eq!(a, b);
    }
}
