//! Shadow handling: saturation/value contrast index, histogram thresholding,
//! and per-region statistics transfer from a surrounding buffer ring.

use crate::morph::{connected_components, Connectivity};
use crate::raster::{byte_clamp, rgb_to_hsv, BinaryMask, GrayRaster, HsvRaster, RgbRaster};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum OtsuError {
    #[error("uniform image: no valid threshold split")]
    UniformImage,
}

/// Normalized saturation/value difference, (S-V)/(S+V), per pixel.
/// Zero where S+V is zero. Shadow pixels score high: saturated and dark.
pub fn compute_ndi(hsv: &HsvRaster) -> GrayRaster {
    let values = hsv
        .pixels()
        .iter()
        .map(|p| {
            let sum = p.saturation + p.value;
            if sum == 0.0 {
                0.0
            } else {
                (p.saturation - p.value) / sum
            }
        })
        .collect();
    GrayRaster::new(hsv.width(), hsv.height(), values)
}

/// Histogram threshold maximizing between-class variance.
///
/// Values are affinely mapped from [min,max] onto `bins` buckets; the split is
/// "bucket index <= t" against "> t". Returns the center of the winning bucket,
/// with ties broken toward the lowest qualifying bucket. Classification
/// downstream treats "above threshold" as strictly greater.
pub fn otsu_threshold(gray: &GrayRaster, bins: usize) -> Result<f64, OtsuError> {
    assert!(bins >= 2, "need at least two bins");
    let values = gray.values();
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if min == max {
        return Err(OtsuError::UniformImage);
    }
    let span = max - min;
    let mut hist = vec![0u64; bins];
    for &v in values {
        let idx = (((v - min) / span) * bins as f64) as usize;
        hist[idx.min(bins - 1)] += 1;
    }
    let total = values.len() as f64;
    let total_moment: f64 = hist
        .iter()
        .enumerate()
        .map(|(i, &c)| i as f64 * c as f64)
        .sum();
    let mut best_t = 0usize;
    let mut best_var = f64::NEG_INFINITY;
    let mut w0 = 0.0;
    let mut m0 = 0.0;
    for t in 0..bins - 1 {
        w0 += hist[t] as f64;
        m0 += t as f64 * hist[t] as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let mu0 = m0 / w0;
        let mu1 = (total_moment - m0) / w1;
        let var = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if var > best_var {
            best_var = var;
            best_t = t;
        }
    }
    Ok(min + (best_t as f64 + 0.5) * span / bins as f64)
}

/// Marks pixels whose index value exceeds the automatic threshold as shadow.
/// A uniform index image yields an all-zero mask.
pub fn detect_shadow_mask(img: &RgbRaster) -> BinaryMask {
    let ndi = compute_ndi(&rgb_to_hsv(img));
    match otsu_threshold(&ndi, 256) {
        Ok(t) => BinaryMask::new(
            ndi.width(),
            ndi.height(),
            ndi.values().iter().map(|&v| v > t).collect(),
        ),
        Err(OtsuError::UniformImage) => BinaryMask::filled(img.width(), img.height(), false),
    }
}

/// Per-channel mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelStats {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

impl ChannelStats {
    fn from_pixels(img: &RgbRaster, coords: &[(usize, usize)]) -> Option<Self> {
        if coords.is_empty() {
            return None;
        }
        let n = coords.len() as f64;
        let mut mean = [0.0f64; 3];
        for &(x, y) in coords {
            let p = img.pixel(x, y);
            for c in 0..3 {
                mean[c] += f64::from(p[c]);
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = [0.0f64; 3];
        for &(x, y) in coords {
            let p = img.pixel(x, y);
            for c in 0..3 {
                let d = f64::from(p[c]) - mean[c];
                var[c] += d * d;
            }
        }
        let std = [0, 1, 2].map(|c| (var[c] / n).sqrt());
        Some(Self { mean, std })
    }
}

/// One 8-connected shadow component with its non-shadow buffer ring and the
/// statistics driving compensation.
#[derive(Debug, Clone)]
pub struct ShadowRegion {
    pub id: u32,
    pub pixels: Vec<(usize, usize)>,
    /// Non-shadow pixels within Chebyshev distance `buffer_width` of the
    /// component. Empty when the component is fully surrounded by shadow.
    pub buffer: Vec<(usize, usize)>,
    pub stats: ChannelStats,
    /// Statistics the transfer maps onto: the ring when non-empty, otherwise
    /// all non-shadow pixels, otherwise `None` (component left unchanged).
    pub buffer_stats: Option<ChannelStats>,
    pub buffer_is_global: bool,
}

/// Labels the shadow mask and gathers per-component and per-buffer statistics.
pub fn analyze_shadow_regions(
    img: &RgbRaster,
    mask: &BinaryMask,
    buffer_width: usize,
) -> Vec<ShadowRegion> {
    assert!(
        img.width() == mask.width() && img.height() == mask.height(),
        "mask size mismatch"
    );
    assert!(buffer_width >= 1, "buffer width must be >= 1");
    let (w, h) = (img.width(), img.height());
    let labels = connected_components(mask, Connectivity::Eight);
    let count = labels.component_count() as usize;
    if count == 0 {
        return Vec::new();
    }
    let mut pixels: Vec<Vec<(usize, usize)>> = vec![Vec::new(); count];
    for y in 0..h {
        for x in 0..w {
            let l = labels.label(x, y);
            if l > 0 {
                pixels[(l - 1) as usize].push((x, y));
            }
        }
    }
    // Stamp array dedupes buffer membership per component.
    let mut stamp = vec![0u32; w * h];
    let global_nonshadow: Vec<(usize, usize)> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .filter(|&(x, y)| !mask.get(x, y))
        .collect();
    let global_stats = ChannelStats::from_pixels(img, &global_nonshadow);

    (0..count)
        .map(|i| {
            let id = (i + 1) as u32;
            let mut buffer = Vec::new();
            for &(x, y) in &pixels[i] {
                let x0 = x.saturating_sub(buffer_width);
                let y0 = y.saturating_sub(buffer_width);
                let x1 = (x + buffer_width).min(w - 1);
                let y1 = (y + buffer_width).min(h - 1);
                for ny in y0..=y1 {
                    for nx in x0..=x1 {
                        if !mask.get(nx, ny) && stamp[ny * w + nx] != id {
                            stamp[ny * w + nx] = id;
                            buffer.push((nx, ny));
                        }
                    }
                }
            }
            buffer.sort_unstable_by_key(|&(x, y)| (y, x));
            let stats = ChannelStats::from_pixels(img, &pixels[i]).expect("non-empty component");
            let ring_stats = ChannelStats::from_pixels(img, &buffer);
            let buffer_is_global = ring_stats.is_none() && global_stats.is_some();
            ShadowRegion {
                id,
                pixels: pixels[i].clone(),
                buffer,
                stats,
                buffer_stats: ring_stats.or(global_stats),
                buffer_is_global,
            }
        })
        .collect()
}

/// A component covering more than this fraction of the image is not treated
/// as a shadow region: it has no meaningful sunlit surroundings, and mapping
/// most of the frame onto the statistics of a small residue would replace the
/// scene instead of compensating a region.
pub const MAX_REGION_FRACTION: f64 = 0.5;

/// Remaps every shadow component by the mean-variance transfer
/// `I' = mu_buff + sigma_buff * (I - mu_k) / sigma_k` per channel, clamped to
/// [0,255]. Flat components (sigma 0) map onto the buffer mean. Pixels outside
/// the mask, components with no non-shadow pixels anywhere, and majority
/// components (see [`MAX_REGION_FRACTION`]) are untouched.
pub fn compensate_shadow(img: &RgbRaster, mask: &BinaryMask, buffer_width: usize) -> RgbRaster {
    let regions = analyze_shadow_regions(img, mask, buffer_width);
    let total = img.width() * img.height();
    let mut out = img.clone();
    for region in &regions {
        if region.pixels.len() as f64 > MAX_REGION_FRACTION * total as f64 {
            continue;
        }
        let Some(buffer_stats) = region.buffer_stats else {
            continue;
        };
        for &(x, y) in &region.pixels {
            let p = img.pixel(x, y);
            let mut mapped = [0u8; 3];
            for c in 0..3 {
                let transferred = if region.stats.std[c] == 0.0 {
                    buffer_stats.mean[c]
                } else {
                    buffer_stats.mean[c]
                        + buffer_stats.std[c] * (f64::from(p[c]) - region.stats.mean[c])
                            / region.stats.std[c]
                };
                mapped[c] = byte_clamp(transferred);
            }
            out.set_pixel(x, y, mapped);
        }
    }
    out
}
