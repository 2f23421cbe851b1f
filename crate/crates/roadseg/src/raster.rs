//! Image containers and the shared per-pixel primitives: RGB/HSV conversion
//! and windowed means with border clipping.

/// Row-major 8-bit RGB image. The input and output form of every pipeline stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbRaster {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl RgbRaster {
    /// Builds a raster from row-major pixel triples.
    ///
    /// Panics if the pixel count does not equal `width * height` or either
    /// dimension is zero.
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Self {
        assert!(width >= 1 && height >= 1, "raster dimensions must be >= 1");
        assert_eq!(pixels.len(), width * height, "pixel count mismatch");
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        Self::new(width, height, vec![rgb; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        self.pixels[y * self.width + x] = rgb;
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    /// One color channel as a unit-interval gray plane.
    pub fn channel_plane(&self, channel: usize) -> GrayRaster {
        assert!(channel < 3);
        let values = self
            .pixels
            .iter()
            .map(|p| f64::from(p[channel]) / 255.0)
            .collect();
        GrayRaster::new(self.width, self.height, values)
    }

    /// Channel mean normalized to [0,1]; the gray plane used as filter guidance.
    pub fn gray_plane(&self) -> GrayRaster {
        let values = self
            .pixels
            .iter()
            .map(|p| (f64::from(p[0]) + f64::from(p[1]) + f64::from(p[2])) / (3.0 * 255.0))
            .collect();
        GrayRaster::new(self.width, self.height, values)
    }

    /// Reassembles an RGB raster from three unit-interval planes, rounding
    /// half-up and clamping to [0,255].
    pub fn from_planes(r: &GrayRaster, g: &GrayRaster, b: &GrayRaster) -> Self {
        assert!(r.same_size(g) && g.same_size(b), "plane size mismatch");
        let pixels = (0..r.values.len())
            .map(|i| {
                [
                    unit_to_byte(r.values[i]),
                    unit_to_byte(g.values[i]),
                    unit_to_byte(b.values[i]),
                ]
            })
            .collect();
        Self::new(r.width, r.height, pixels)
    }
}

/// Row-major real-valued plane. Holds gray/value channels, index maps,
/// dark channels and filter intermediates.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayRaster {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl GrayRaster {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Self {
        assert!(width >= 1 && height >= 1, "raster dimensions must be >= 1");
        assert_eq!(values.len(), width * height, "value count mismatch");
        debug_assert!(values.iter().all(|v| v.is_finite()), "non-finite value");
        Self {
            width,
            height,
            values,
        }
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self::new(width, height, values)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.values[y * self.width + x] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn same_size(&self, other: &GrayRaster) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Pointwise product, used for window covariance statistics.
    pub fn product(&self, other: &GrayRaster) -> GrayRaster {
        assert!(self.same_size(other), "size mismatch");
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .collect();
        GrayRaster::new(self.width, self.height, values)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GrayRaster {
        GrayRaster::new(self.width, self.height, self.values.iter().map(|&v| f(v)).collect())
    }
}

/// Hue in degrees [0,360), undefined on achromatic pixels (saturation 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HsvPixel {
    pub hue: Option<f64>,
    pub saturation: f64,
    pub value: f64,
}

/// Per-pixel hue/saturation/value image; value is the channel mean scaled to [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct HsvRaster {
    width: usize,
    height: usize,
    pixels: Vec<HsvPixel>,
}

impl HsvRaster {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel(&self, x: usize, y: usize) -> HsvPixel {
        self.pixels[y * self.width + x]
    }

    pub fn pixels(&self) -> &[HsvPixel] {
        &self.pixels
    }
}

/// Row-major {0,1} mask: shadow/highlight maps, classifications, ground truth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Self {
        assert!(width >= 1 && height >= 1, "mask dimensions must be >= 1");
        assert_eq!(bits.len(), width * height, "bit count mismatch");
        Self {
            width,
            height,
            bits,
        }
    }

    pub fn filled(width: usize, height: usize, bit: bool) -> Self {
        Self::new(width, height, vec![bit; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self::new(width, height, bits)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, bit: bool) {
        self.bits[y * self.width + x] = bit;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn same_size(&self, other: &BinaryMask) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// Mean absolute per-channel difference between two same-sized images,
/// in gray levels.
pub fn mean_abs_error(a: &RgbRaster, b: &RgbRaster) -> f64 {
    assert!(
        a.width() == b.width() && a.height() == b.height(),
        "size mismatch"
    );
    let total: f64 = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(pa, pb)| {
            (0..3)
                .map(|c| (f64::from(pa[c]) - f64::from(pb[c])).abs())
                .sum::<f64>()
        })
        .sum();
    total / (a.pixels().len() * 3) as f64
}

/// Rounds half-up and clamps to an 8-bit channel; input is on the [0,1] scale.
pub fn unit_to_byte(v: f64) -> u8 {
    byte_clamp(v * 255.0)
}

/// Rounds half-up and clamps a [0,255]-scale value to a byte.
pub fn byte_clamp(v: f64) -> u8 {
    let r = (v + 0.5).floor();
    if r <= 0.0 {
        0
    } else if r >= 255.0 {
        255
    } else {
        r as u8
    }
}

/// Converts to hue/saturation/value form.
///
/// Value is the channel mean; saturation is one minus the min-to-mean ratio
/// (zero on black); hue comes from the cosine form, mirrored to 360°-θ when
/// blue exceeds green, and is undefined exactly on achromatic pixels.
pub fn rgb_to_hsv(img: &RgbRaster) -> HsvRaster {
    let pixels = img
        .pixels()
        .iter()
        .map(|&[r, g, b]| {
            let (rf, gf, bf) = (f64::from(r), f64::from(g), f64::from(b));
            let sum = rf + gf + bf;
            let value = sum / (3.0 * 255.0);
            let min = rf.min(gf).min(bf);
            let saturation = if sum == 0.0 { 0.0 } else { 1.0 - 3.0 * min / sum };
            let hue = if r == g && g == b {
                None
            } else {
                let num = 0.5 * ((rf - gf) + (rf - bf));
                let den = ((rf - gf).powi(2) + (rf - bf) * (gf - bf)).sqrt();
                let theta = (num / den).clamp(-1.0, 1.0).acos().to_degrees();
                Some(if b <= g { theta } else { 360.0 - theta })
            };
            HsvPixel {
                hue,
                saturation,
                value,
            }
        })
        .collect();
    HsvRaster {
        width: img.width(),
        height: img.height(),
        pixels,
    }
}

/// Mean over the (2r+1)² window around each pixel, clipped at the borders:
/// the divisor is the true in-bounds count, never padded.
pub fn box_mean(src: &GrayRaster, radius: usize) -> GrayRaster {
    if radius == 0 {
        return src.clone();
    }
    let (w, h) = (src.width(), src.height());
    // Integral image with a zero row/column on the top/left.
    let mut integral = vec![0.0f64; (w + 1) * (h + 1)];
    for y in 0..h {
        let mut row_sum = 0.0;
        for x in 0..w {
            row_sum += src.get(x, y);
            integral[(y + 1) * (w + 1) + (x + 1)] = integral[y * (w + 1) + (x + 1)] + row_sum;
        }
    }
    let sum_rect = |x0: usize, y0: usize, x1: usize, y1: usize| -> f64 {
        // Inclusive pixel rectangle [x0,x1] x [y0,y1].
        integral[(y1 + 1) * (w + 1) + (x1 + 1)] + integral[y0 * (w + 1) + x0]
            - integral[y0 * (w + 1) + (x1 + 1)]
            - integral[(y1 + 1) * (w + 1) + x0]
    };
    GrayRaster::from_fn(w, h, |x, y| {
        let x0 = x.saturating_sub(radius);
        let y0 = y.saturating_sub(radius);
        let x1 = (x + radius).min(w - 1);
        let y1 = (y + radius).min(h - 1);
        let count = ((x1 - x0 + 1) * (y1 - y0 + 1)) as f64;
        sum_rect(x0, y0, x1, y1) / count
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_box_mean(src: &GrayRaster, radius: usize) -> GrayRaster {
        let (w, h) = (src.width(), src.height());
        GrayRaster::from_fn(w, h, |x, y| {
            let mut sum = 0.0;
            let mut count = 0.0;
            for wy in y.saturating_sub(radius)..=(y + radius).min(h - 1) {
                for wx in x.saturating_sub(radius)..=(x + radius).min(w - 1) {
                    sum += src.get(wx, wy);
                    count += 1.0;
                }
            }
            sum / count
        })
    }

    #[test]
    fn hsv_white_is_achromatic() {
        let img = RgbRaster::filled(2, 2, [255, 255, 255]);
        let hsv = rgb_to_hsv(&img);
        for p in hsv.pixels() {
            assert_eq!(p.value, 1.0);
            assert_eq!(p.saturation, 0.0);
            assert_eq!(p.hue, None);
        }
    }

    #[test]
    fn hsv_black_uses_zero_sum_convention() {
        let img = RgbRaster::filled(1, 1, [0, 0, 0]);
        let p = rgb_to_hsv(&img).pixel(0, 0);
        assert_eq!(p.value, 0.0);
        assert_eq!(p.saturation, 0.0);
        assert_eq!(p.hue, None);
    }

    #[test]
    fn hsv_pure_red() {
        let img = RgbRaster::filled(1, 1, [255, 0, 0]);
        let p = rgb_to_hsv(&img).pixel(0, 0);
        assert!((p.value - 85.0 / 255.0).abs() < 1e-12);
        assert!((p.saturation - 1.0).abs() < 1e-12);
        assert!((p.hue.unwrap() - 0.0).abs() < 1e-9);
    }

    #[test]
    fn hsv_blue_dominant_uses_mirrored_hue() {
        // (200, 0, 100): theta = 30 degrees, blue > green so hue = 330.
        let img = RgbRaster::filled(1, 1, [200, 0, 100]);
        let p = rgb_to_hsv(&img).pixel(0, 0);
        assert!((p.hue.unwrap() - 330.0).abs() < 1e-9);
    }

    #[test]
    fn hsv_hue_defined_iff_chromatic() {
        // Saturation zero exactly when all channels are equal.
        for rgb in [[7u8, 7, 7], [0, 0, 0], [7, 7, 8], [200, 100, 50]] {
            let p = rgb_to_hsv(&RgbRaster::filled(1, 1, rgb)).pixel(0, 0);
            let achromatic = rgb[0] == rgb[1] && rgb[1] == rgb[2];
            assert_eq!(p.hue.is_none(), achromatic, "rgb={rgb:?}");
            assert_eq!(p.saturation == 0.0, achromatic, "rgb={rgb:?}");
        }
    }

    #[test]
    fn box_mean_constant_stays_constant() {
        let src = GrayRaster::filled(7, 5, 0.37);
        for radius in [0, 1, 3, 10] {
            let out = box_mean(&src, radius);
            for &v in out.values() {
                assert!((v - 0.37).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn box_mean_radius_zero_is_identity() {
        let src = GrayRaster::from_fn(4, 3, |x, y| (x * 7 + y) as f64 / 11.0);
        assert_eq!(box_mean(&src, 0), src);
    }

    #[test]
    fn box_mean_center_of_ramp() {
        // 3x3 values 0/8..8/8; full window mean at the center is 0.5.
        let src = GrayRaster::from_fn(3, 3, |x, y| (y * 3 + x) as f64 / 8.0);
        let out = box_mean(&src, 1);
        assert!((out.get(1, 1) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn box_mean_matches_naive_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let src = GrayRaster::from_fn(16, 16, |_, _| rng.gen::<f64>());
            for radius in [0, 1, 2, 5] {
                let fast = box_mean(&src, radius);
                let slow = naive_box_mean(&src, radius);
                for (a, b) in fast.values().iter().zip(slow.values()) {
                    assert!((a - b).abs() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn byte_rounding_is_half_up() {
        assert_eq!(unit_to_byte(0.5), 128);
        assert_eq!(byte_clamp(127.5), 128);
        assert_eq!(byte_clamp(-3.0), 0);
        assert_eq!(byte_clamp(300.0), 255);
        assert_eq!(byte_clamp(126.49), 126);
    }
}
