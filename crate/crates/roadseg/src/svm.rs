//! Linear support-vector classification of pixels: seed sampling from fixed
//! image regions, dual training by sequential pairwise optimization, and
//! whole-image labeling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::raster::{BinaryMask, RgbRaster};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SvmError {
    #[error("training set contains a single class")]
    SingleClass,
    #[error("seed region too small: need {needed} pixels, region has {available}")]
    RegionTooSmall { needed: usize, available: usize },
    #[error("malformed model file: {0}")]
    MalformedModel(String),
}

/// Labeled feature vectors; labels are +1 (road) or -1 (non-road).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    dim: usize,
    features: Vec<f64>,
    labels: Vec<f64>,
}

impl TrainingSet {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1);
        Self {
            dim,
            features: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn push(&mut self, sample: &[f64], label: f64) {
        assert_eq!(sample.len(), self.dim, "feature dimension mismatch");
        assert!(label == 1.0 || label == -1.0, "label must be +1 or -1");
        self.features.extend_from_slice(sample);
        self.labels.push(label);
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn has_both_classes(&self) -> bool {
        self.labels.iter().any(|&y| y > 0.0) && self.labels.iter().any(|&y| y < 0.0)
    }
}

/// Trained linear classifier: support vectors with their multipliers and
/// labels, the bias, and the hyperparameters used.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    dim: usize,
    support_vectors: Vec<f64>,
    multipliers: Vec<f64>,
    labels: Vec<f64>,
    bias: f64,
    pub c: f64,
    pub tol: f64,
    /// False when the sweep cap was hit before every optimality condition
    /// held; the model is still the best iterate.
    pub converged: bool,
}

impl SvmModel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn support_vector_count(&self) -> usize {
        self.multipliers.len()
    }

    pub fn support_vector(&self, i: usize) -> (&[f64], f64, f64) {
        (
            &self.support_vectors[i * self.dim..(i + 1) * self.dim],
            self.multipliers[i],
            self.labels[i],
        )
    }

    /// Effective weight vector of the linear decision function.
    pub fn weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.dim];
        for i in 0..self.multipliers.len() {
            let (x, lambda, y) = self.support_vector(i);
            for d in 0..self.dim {
                w[d] += lambda * y * x[d];
            }
        }
        w
    }

    /// Decision value before the sign.
    pub fn decision(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim);
        let mut sum = self.bias;
        for i in 0..self.multipliers.len() {
            let (sv, lambda, y) = self.support_vector(i);
            let dot: f64 = sv.iter().zip(x).map(|(a, b)| a * b).sum();
            sum += y * lambda * dot;
        }
        sum
    }

    /// Classification with the sign(0) = +1 convention.
    pub fn predict(&self, x: &[f64]) -> bool {
        self.decision(x) >= 0.0
    }

    /// Dual objective value of the stored multipliers.
    pub fn dual_objective(&self) -> f64 {
        let n = self.multipliers.len();
        let mut obj: f64 = self.multipliers.iter().sum();
        for i in 0..n {
            let (xi, li, yi) = self.support_vector(i);
            for j in 0..n {
                let (xj, lj, yj) = self.support_vector(j);
                let dot: f64 = xi.iter().zip(xj).map(|(a, b)| a * b).sum();
                obj -= 0.5 * li * lj * yi * yj * dot;
            }
        }
        obj
    }

    /// Plain-text serialization; floats carry 17 significant digits so the
    /// round trip is exact.
    pub fn to_text(&self) -> String {
        let mut out = String::from("svm-linear v1\n");
        out.push_str(&format!("{:.16e} {:.16e} {:.16e}\n", self.c, self.tol, self.bias));
        for i in 0..self.multipliers.len() {
            let (x, lambda, y) = self.support_vector(i);
            out.push_str(&format!("{:.16e} {}", lambda, if y > 0.0 { 1 } else { -1 }));
            for v in x {
                out.push_str(&format!(" {v:.16e}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, SvmError> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| SvmError::MalformedModel("empty file".into()))?;
        if header.trim() != "svm-linear v1" {
            return Err(SvmError::MalformedModel(format!("bad header `{header}`")));
        }
        let params = lines
            .next()
            .ok_or_else(|| SvmError::MalformedModel("missing parameter line".into()))?;
        let parse = |tok: &str| -> Result<f64, SvmError> {
            tok.parse::<f64>()
                .map_err(|_| SvmError::MalformedModel(format!("bad float `{tok}`")))
        };
        let toks: Vec<&str> = params.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(SvmError::MalformedModel("parameter line needs C tol b".into()));
        }
        let (c, tol, bias) = (parse(toks[0])?, parse(toks[1])?, parse(toks[2])?);
        let mut dim = None;
        let mut support_vectors = Vec::new();
        let mut multipliers = Vec::new();
        let mut labels = Vec::new();
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() < 3 {
                return Err(SvmError::MalformedModel(format!("short vector line `{line}`")));
            }
            multipliers.push(parse(toks[0])?);
            let y = match toks[1] {
                "1" => 1.0,
                "-1" => -1.0,
                other => return Err(SvmError::MalformedModel(format!("bad label `{other}`"))),
            };
            labels.push(y);
            let feats: Result<Vec<f64>, SvmError> = toks[2..].iter().map(|t| parse(t)).collect();
            let feats = feats?;
            match dim {
                None => dim = Some(feats.len()),
                Some(d) if d != feats.len() => {
                    return Err(SvmError::MalformedModel("inconsistent dimensions".into()))
                }
                _ => {}
            }
            support_vectors.extend(feats);
        }
        let dim = dim.ok_or_else(|| SvmError::MalformedModel("no support vectors".into()))?;
        Ok(Self {
            dim,
            support_vectors,
            multipliers,
            labels,
            bias,
            c,
            tol,
            converged: true,
        })
    }
}

const MAX_SWEEPS: usize = 10_000;
const LAMBDA_SNAP: f64 = 1e-10;

struct Optimizer<'a> {
    data: &'a TrainingSet,
    c: f64,
    tol: f64,
    alpha: Vec<f64>,
    w: Vec<f64>,
    b: f64,
}

impl<'a> Optimizer<'a> {
    fn new(data: &'a TrainingSet, c: f64, tol: f64) -> Self {
        Self {
            data,
            c,
            tol,
            alpha: vec![0.0; data.len()],
            w: vec![0.0; data.dim()],
            b: 0.0,
        }
    }

    fn decision(&self, x: &[f64]) -> f64 {
        self.w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.b
    }

    fn error(&self, i: usize) -> f64 {
        self.decision(self.data.sample(i)) - self.data.label(i)
    }

    fn dot(&self, i: usize, j: usize) -> f64 {
        self.data
            .sample(i)
            .iter()
            .zip(self.data.sample(j))
            .map(|(a, b)| a * b)
            .sum()
    }

    fn snap(&self, a: f64) -> f64 {
        if a < LAMBDA_SNAP {
            0.0
        } else if a > self.c - LAMBDA_SNAP {
            self.c
        } else {
            a
        }
    }

    fn take_step(&mut self, i1: usize, i2: usize) -> bool {
        if i1 == i2 {
            return false;
        }
        let (a1, a2) = (self.alpha[i1], self.alpha[i2]);
        let (y1, y2) = (self.data.label(i1), self.data.label(i2));
        let (e1, e2) = (self.error(i1), self.error(i2));
        let s = y1 * y2;
        let (lo, hi) = if s < 0.0 {
            ((a2 - a1).max(0.0), (self.c + a2 - a1).min(self.c))
        } else {
            ((a1 + a2 - self.c).max(0.0), (a1 + a2).min(self.c))
        };
        if lo >= hi {
            return false;
        }
        let k11 = self.dot(i1, i1);
        let k22 = self.dot(i2, i2);
        let k12 = self.dot(i1, i2);
        let eta = k11 + k22 - 2.0 * k12;
        let mut a2_new = if eta > 0.0 {
            (a2 + y2 * (e1 - e2) / eta).clamp(lo, hi)
        } else {
            // Flat direction: evaluate the dual at both bounds and move to
            // the better one.
            let f1 = y1 * (e1 - self.b) - a1 * k11 - s * a2 * k12;
            let f2 = y2 * (e2 - self.b) - s * a1 * k12 - a2 * k22;
            let l1 = a1 + s * (a2 - lo);
            let h1 = a1 + s * (a2 - hi);
            let lobj = l1 * f1 + lo * f2 + 0.5 * l1 * l1 * k11 + 0.5 * lo * lo * k22 + s * lo * l1 * k12;
            let hobj = h1 * f1 + hi * f2 + 0.5 * h1 * h1 * k11 + 0.5 * hi * hi * k22 + s * hi * h1 * k12;
            if lobj < hobj - 1e-12 {
                lo
            } else if lobj > hobj + 1e-12 {
                hi
            } else {
                return false;
            }
        };
        a2_new = self.snap(a2_new);
        if (a2_new - a2).abs() < 1e-12 * (a2_new + a2 + 1e-12) {
            return false;
        }
        let a1_new = self.snap(a1 + s * (a2 - a2_new));

        // Bias update from the two changed points (decision uses w.x + b).
        let b1 = self.b - e1 - y1 * (a1_new - a1) * k11 - y2 * (a2_new - a2) * k12;
        let b2 = self.b - e2 - y1 * (a1_new - a1) * k12 - y2 * (a2_new - a2) * k22;
        self.b = if a1_new > 0.0 && a1_new < self.c {
            b1
        } else if a2_new > 0.0 && a2_new < self.c {
            b2
        } else {
            (b1 + b2) / 2.0
        };

        for d in 0..self.data.dim() {
            self.w[d] += y1 * (a1_new - a1) * self.data.sample(i1)[d]
                + y2 * (a2_new - a2) * self.data.sample(i2)[d];
        }
        self.alpha[i1] = a1_new;
        self.alpha[i2] = a2_new;
        true
    }

    fn examine(&mut self, i2: usize) -> bool {
        let y2 = self.data.label(i2);
        let a2 = self.alpha[i2];
        let e2 = self.error(i2);
        let r2 = e2 * y2;
        let violates = (r2 < -self.tol && a2 < self.c) || (r2 > self.tol && a2 > 0.0);
        if !violates {
            return false;
        }
        // First choice: largest |e1 - e2| over non-bound multipliers.
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.data.len() {
            if self.alpha[i] > 0.0 && self.alpha[i] < self.c {
                let gap = (self.error(i) - e2).abs();
                if best.map_or(true, |(_, g)| gap > g) {
                    best = Some((i, gap));
                }
            }
        }
        if let Some((i1, _)) = best {
            if self.take_step(i1, i2) {
                return true;
            }
        }
        // Fall back to a deterministic scan: non-bound first, then all.
        for i1 in 0..self.data.len() {
            if self.alpha[i1] > 0.0 && self.alpha[i1] < self.c && self.take_step(i1, i2) {
                return true;
            }
        }
        for i1 in 0..self.data.len() {
            if self.take_step(i1, i2) {
                return true;
            }
        }
        false
    }

    fn run(&mut self) -> bool {
        let n = self.data.len();
        let mut examine_all = true;
        let mut sweeps = 0;
        loop {
            sweeps += 1;
            if sweeps > MAX_SWEEPS {
                return false;
            }
            let mut changed = 0usize;
            for i in 0..n {
                if examine_all || (self.alpha[i] > 0.0 && self.alpha[i] < self.c) {
                    changed += usize::from(self.examine(i));
                }
            }
            if examine_all {
                if changed == 0 {
                    return true;
                }
                examine_all = false;
            } else if changed == 0 {
                examine_all = true;
            }
        }
    }

    /// Bias per the margin-vector rule, with the feasible-interval midpoint
    /// as the fallback when no strictly interior multipliers exist.
    fn final_bias(&self) -> f64 {
        let mut margin_sum = 0.0;
        let mut margin_count = 0usize;
        for i in 0..self.data.len() {
            if self.alpha[i] > 0.0 && self.alpha[i] < self.c {
                let wx: f64 = self
                    .w
                    .iter()
                    .zip(self.data.sample(i))
                    .map(|(a, b)| a * b)
                    .sum();
                margin_sum += self.data.label(i) - wx;
                margin_count += 1;
            }
        }
        if margin_count > 0 {
            return margin_sum / margin_count as f64;
        }
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for i in 0..self.data.len() {
            let wx: f64 = self
                .w
                .iter()
                .zip(self.data.sample(i))
                .map(|(a, b)| a * b)
                .sum();
            let y = self.data.label(i);
            let at_upper = self.alpha[i] >= self.c;
            // lambda = 0 wants y*(wx+b) >= 1; lambda = C wants y*(wx+b) <= 1.
            if (y > 0.0) != at_upper {
                lo = lo.max(y - wx);
            } else {
                hi = hi.min(y - wx);
            }
        }
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) => (lo + hi) / 2.0,
            (true, false) => lo,
            (false, true) => hi,
            (false, false) => 0.0,
        }
    }
}

/// Solves the soft-margin dual with box constraint [0, C] by sequential
/// pairwise optimization until the optimality conditions hold within `tol`,
/// then keeps the vectors with positive multipliers.
pub fn train_svm(data: &TrainingSet, c: f64, tol: f64) -> Result<SvmModel, SvmError> {
    assert!(c > 0.0, "C must be positive");
    assert!(tol > 0.0, "tolerance must be positive");
    if !data.has_both_classes() {
        return Err(SvmError::SingleClass);
    }
    // Converge at half the tolerance so the recomputed bias keeps every
    // optimality condition within the full tolerance.
    let mut opt = Optimizer::new(data, c, tol * 0.5);
    let converged = opt.run();
    let bias = opt.final_bias();
    let mut support_vectors = Vec::new();
    let mut multipliers = Vec::new();
    let mut labels = Vec::new();
    for i in 0..data.len() {
        if opt.alpha[i] > 0.0 {
            support_vectors.extend_from_slice(data.sample(i));
            multipliers.push(opt.alpha[i]);
            labels.push(data.label(i));
        }
    }
    Ok(SvmModel {
        dim: data.dim(),
        support_vectors,
        multipliers,
        labels,
        bias,
        c,
        tol,
        converged,
    })
}

/// Labels every pixel with the model; bit 1 means road.
pub fn classify(model: &SvmModel, img: &RgbRaster) -> BinaryMask {
    let w = model.weights();
    assert_eq!(w.len(), 3, "pixel classification needs a 3-channel model");
    let bits = img
        .pixels()
        .iter()
        .map(|p| {
            let x = [
                f64::from(p[0]) / 255.0,
                f64::from(p[1]) / 255.0,
                f64::from(p[2]) / 255.0,
            ];
            w[0] * x[0] + w[1] * x[1] + w[2] * x[2] + model.bias() >= 0.0
        })
        .collect();
    BinaryMask::new(img.width(), img.height(), bits)
}

/// Fractional-coordinate seed regions: a bottom-center road trapezoid and two
/// top-corner non-road strips, all sampled without replacement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeedLayout {
    pub road_top_y: f64,
    pub road_bottom_y: f64,
    pub road_top_half_width: f64,
    pub road_bottom_half_width: f64,
    pub nonroad_top_fraction: f64,
    pub nonroad_strip_width: f64,
    pub samples_per_class: usize,
    pub rng_seed: u64,
}

impl Default for SeedLayout {
    fn default() -> Self {
        Self {
            road_top_y: 0.7,
            road_bottom_y: 1.0,
            road_top_half_width: 0.05,
            road_bottom_half_width: 0.15,
            nonroad_top_fraction: 0.15,
            nonroad_strip_width: 1.0 / 3.0,
            samples_per_class: 500,
            rng_seed: 0,
        }
    }
}

impl SeedLayout {
    pub fn validate(&self) -> bool {
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        in_unit(self.road_top_y)
            && in_unit(self.road_bottom_y)
            && in_unit(self.road_top_half_width)
            && in_unit(self.road_bottom_half_width)
            && in_unit(self.nonroad_top_fraction)
            && in_unit(self.nonroad_strip_width)
            && self.road_top_y < self.road_bottom_y
            && self.nonroad_top_fraction <= self.road_top_y
            && self.samples_per_class >= 1
    }

    fn in_road(&self, u: f64, v: f64) -> bool {
        if v < self.road_top_y || v > self.road_bottom_y {
            return false;
        }
        let t = (v - self.road_top_y) / (self.road_bottom_y - self.road_top_y);
        let half_width =
            self.road_top_half_width + t * (self.road_bottom_half_width - self.road_top_half_width);
        (u - 0.5).abs() <= half_width
    }

    fn in_nonroad(&self, u: f64, v: f64) -> bool {
        v <= self.nonroad_top_fraction
            && (u <= self.nonroad_strip_width || u >= 1.0 - self.nonroad_strip_width)
    }
}

fn sample_without_replacement(
    coords: &mut [(usize, usize)],
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<(usize, usize)> {
    // Partial Fisher-Yates.
    let n = coords.len();
    for i in 0..count {
        let j = rng.gen_range(i..n);
        coords.swap(i, j);
    }
    coords[..count].to_vec()
}

/// Draws `samples_per_class` road pixels (+1) and non-road pixels (-1) from
/// the layout regions with the layout's seeded generator.
pub fn sample_seeds(img: &RgbRaster, layout: &SeedLayout) -> Result<TrainingSet, SvmError> {
    assert!(layout.validate(), "invalid seed layout");
    let (w, h) = (img.width(), img.height());
    let mut road = Vec::new();
    let mut nonroad = Vec::new();
    for y in 0..h {
        let v = (y as f64 + 0.5) / h as f64;
        for x in 0..w {
            let u = (x as f64 + 0.5) / w as f64;
            if layout.in_road(u, v) {
                road.push((x, y));
            } else if layout.in_nonroad(u, v) {
                nonroad.push((x, y));
            }
        }
    }
    let needed = layout.samples_per_class;
    for region in [&road, &nonroad] {
        if region.len() < needed {
            return Err(SvmError::RegionTooSmall {
                needed,
                available: region.len(),
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(layout.rng_seed);
    let mut set = TrainingSet::new(3);
    for (coords, label) in [(&mut road, 1.0), (&mut nonroad, -1.0)] {
        for (x, y) in sample_without_replacement(coords.as_mut_slice(), needed, &mut rng) {
            let p = img.pixel(x, y);
            set.push(
                &[
                    f64::from(p[0]) / 255.0,
                    f64::from(p[1]) / 255.0,
                    f64::from(p[2]) / 255.0,
                ],
                label,
            );
        }
    }
    Ok(set)
}
