//! Highlight handling: dark-channel detection and specular-to-diffuse
//! suppression driven by maximum chromaticity.

use crate::raster::{byte_clamp, BinaryMask, GrayRaster, RgbRaster};
use crate::shadow::{otsu_threshold, OtsuError};

/// Patch half-width for the dark channel and the chromaticity controls for
/// the diffuse transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpecularParams {
    pub patch_radius: usize,
    /// Chromaticity tolerance around 1/3; pixels inside the band are treated
    /// as achromatic and skipped.
    pub achromatic_delta: f64,
    /// Percentile of the diffuse-population chromaticity used as the target.
    pub chroma_percentile: f64,
}

impl Default for SpecularParams {
    fn default() -> Self {
        Self {
            patch_radius: 1,
            achromatic_delta: 0.02,
            chroma_percentile: 0.95,
        }
    }
}

impl SpecularParams {
    fn validate(&self) {
        assert!(
            self.achromatic_delta > 0.0 && self.achromatic_delta < 1.0 / 3.0,
            "achromatic delta outside (0, 1/3)"
        );
        assert!(
            self.chroma_percentile > 0.0 && self.chroma_percentile <= 1.0,
            "percentile outside (0, 1]"
        );
    }
}

/// Minimum channel value per pixel, then the minimum over the clipped patch,
/// scaled to [0,1]. High values flag haze and highlights.
pub fn dark_channel(img: &RgbRaster, patch_radius: usize) -> GrayRaster {
    let (w, h) = (img.width(), img.height());
    let channel_min = GrayRaster::from_fn(w, h, |x, y| {
        let p = img.pixel(x, y);
        f64::from(p[0].min(p[1]).min(p[2])) / 255.0
    });
    if patch_radius == 0 {
        return channel_min;
    }
    // Rectangular window minimum is separable: rows then columns.
    let rows = GrayRaster::from_fn(w, h, |x, y| {
        let mut m = f64::INFINITY;
        for wx in x.saturating_sub(patch_radius)..=(x + patch_radius).min(w - 1) {
            m = m.min(channel_min.get(wx, y));
        }
        m
    });
    GrayRaster::from_fn(w, h, |x, y| {
        let mut m = f64::INFINITY;
        for wy in y.saturating_sub(patch_radius)..=(y + patch_radius).min(h - 1) {
            m = m.min(rows.get(x, wy));
        }
        m
    })
}

/// Marks pixels whose dark channel exceeds the automatic threshold.
/// A uniform dark channel yields an all-zero mask.
pub fn detect_highlight_mask(img: &RgbRaster, params: &SpecularParams) -> BinaryMask {
    let dc = dark_channel(img, params.patch_radius);
    match otsu_threshold(&dc, 256) {
        Ok(t) => BinaryMask::new(
            dc.width(),
            dc.height(),
            dc.values().iter().map(|&v| v > t).collect(),
        ),
        Err(OtsuError::UniformImage) => BinaryMask::filled(img.width(), img.height(), false),
    }
}

/// Maximum chromaticity of a pixel: dominant channel over the channel sum.
/// None for black pixels.
pub fn max_chromaticity(pixel: [u8; 3]) -> Option<f64> {
    let sum = f64::from(pixel[0]) + f64::from(pixel[1]) + f64::from(pixel[2]);
    if sum == 0.0 {
        return None;
    }
    let max = pixel[0].max(pixel[1]).max(pixel[2]);
    Some(f64::from(max) / sum)
}

/// Target diffuse chromaticity: the configured percentile (nearest-rank) of
/// chromaticity over non-masked pixels outside the achromatic band. Falls
/// back to 0.5 when no such pixels exist.
pub fn estimate_max_diffuse_chromaticity(
    img: &RgbRaster,
    mask: &BinaryMask,
    params: &SpecularParams,
) -> f64 {
    params.validate();
    let cutoff = 1.0 / 3.0 + params.achromatic_delta;
    let mut samples: Vec<f64> = Vec::new();
    for y in 0..img.height() {
        for x in 0..img.width() {
            if mask.get(x, y) {
                continue;
            }
            if let Some(chroma) = max_chromaticity(img.pixel(x, y)) {
                if chroma > cutoff {
                    samples.push(chroma);
                }
            }
        }
    }
    if samples.is_empty() {
        return 0.5;
    }
    samples.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite chromaticities"));
    let rank = (params.chroma_percentile * samples.len() as f64).ceil() as usize;
    samples[rank.clamp(1, samples.len()) - 1]
}

/// Continuous specular-to-diffuse correction of one pixel: subtract the
/// specular magnitude `(max - lambda_max * sum) / (1 - 3 * lambda_max)` from
/// every channel. Returns None when the pixel is skipped: black, inside the
/// achromatic band, or with negative magnitude (less saturated than the
/// diffuse estimate predicts).
pub fn diffuse_component(pixel: [u8; 3], lambda_max: f64, achromatic_delta: f64) -> Option<[f64; 3]> {
    let chroma = max_chromaticity(pixel)?;
    if chroma <= 1.0 / 3.0 + achromatic_delta {
        return None;
    }
    let sum = f64::from(pixel[0]) + f64::from(pixel[1]) + f64::from(pixel[2]);
    let max = f64::from(pixel[0].max(pixel[1]).max(pixel[2]));
    let magnitude = (max - lambda_max * sum) / (1.0 - 3.0 * lambda_max);
    if magnitude < 0.0 {
        return None;
    }
    Some([0, 1, 2].map(|c| f64::from(pixel[c]) - magnitude))
}

/// Applies the diffuse correction to every masked pixel, clamped to [0,255].
/// Unmasked and skipped pixels pass through unchanged.
pub fn remove_specular(img: &RgbRaster, mask: &BinaryMask, params: &SpecularParams) -> RgbRaster {
    assert!(
        img.width() == mask.width() && img.height() == mask.height(),
        "mask size mismatch"
    );
    params.validate();
    let lambda_max = estimate_max_diffuse_chromaticity(img, mask, params);
    let mut out = img.clone();
    for y in 0..img.height() {
        for x in 0..img.width() {
            if !mask.get(x, y) {
                continue;
            }
            if let Some(diffuse) = diffuse_component(img.pixel(x, y), lambda_max, params.achromatic_delta) {
                out.set_pixel(x, y, diffuse.map(byte_clamp));
            }
        }
    }
    out
}
