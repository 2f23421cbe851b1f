//! End-to-end detection: configured filters, per-image seed training,
//! pixel classification and morphological cleanup.

use crate::config::{FilterKind, PipelineConfig};
use crate::morph::{connected_components, fill_holes, largest_component, Connectivity, StructuringElement};
use crate::rainsnow::remove_rain_snow;
use crate::raster::{BinaryMask, RgbRaster};
use crate::shadow::{compensate_shadow, detect_shadow_mask};
use crate::specular::{detect_highlight_mask, remove_specular};
use crate::svm::{classify, sample_seeds, train_svm, SvmError, SvmModel};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("{stage} stage: {source}")]
    Svm {
        stage: &'static str,
        source: SvmError,
    },
}

/// Every stage output, kept for mask dumps and inspection.
#[derive(Debug, Clone)]
pub struct PipelineIntermediates {
    pub shadow_mask: Option<BinaryMask>,
    pub post_shadow: Option<RgbRaster>,
    pub post_rainsnow: Option<RgbRaster>,
    pub highlight_mask: Option<BinaryMask>,
    pub post_specular: Option<RgbRaster>,
    /// The image the classifier saw (after all enabled filters).
    pub filtered: RgbRaster,
    /// Raw classification before morphology.
    pub svm_mask: BinaryMask,
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub road_mask: BinaryMask,
    pub model: SvmModel,
    pub intermediates: PipelineIntermediates,
}

/// Filtered image plus the per-stage outputs of every enabled filter.
#[derive(Debug, Clone)]
pub struct FilterTrace {
    pub filtered: RgbRaster,
    pub shadow_mask: Option<BinaryMask>,
    pub post_shadow: Option<RgbRaster>,
    pub post_rainsnow: Option<RgbRaster>,
    pub highlight_mask: Option<BinaryMask>,
    pub post_specular: Option<RgbRaster>,
}

/// Applies the enabled filters in the configured order.
pub fn apply_filters(img: &RgbRaster, cfg: &PipelineConfig) -> FilterTrace {
    let mut trace = FilterTrace {
        filtered: img.clone(),
        shadow_mask: None,
        post_shadow: None,
        post_rainsnow: None,
        highlight_mask: None,
        post_specular: None,
    };
    for kind in cfg.filter_order {
        if !cfg.enabled(kind) {
            continue;
        }
        match kind {
            FilterKind::Shadow => {
                let mask = detect_shadow_mask(&trace.filtered);
                trace.filtered = compensate_shadow(&trace.filtered, &mask, cfg.buffer_width);
                trace.shadow_mask = Some(mask);
                trace.post_shadow = Some(trace.filtered.clone());
            }
            FilterKind::RainSnow => {
                trace.filtered = remove_rain_snow(&trace.filtered, &cfg.guided);
                trace.post_rainsnow = Some(trace.filtered.clone());
            }
            FilterKind::Specular => {
                let mask = detect_highlight_mask(&trace.filtered, &cfg.specular);
                trace.filtered = remove_specular(&trace.filtered, &mask, &cfg.specular);
                trace.highlight_mask = Some(mask);
                trace.post_specular = Some(trace.filtered.clone());
            }
        }
    }
    trace
}

/// Trains a model from the configured seed regions of the filtered image.
pub fn train_model(img: &RgbRaster, cfg: &PipelineConfig) -> Result<SvmModel, PipelineError> {
    let trace = apply_filters(img, cfg);
    train_model_on_filtered(&trace.filtered, cfg)
}

fn train_model_on_filtered(
    filtered: &RgbRaster,
    cfg: &PipelineConfig,
) -> Result<SvmModel, PipelineError> {
    let mut layout = cfg.seeds;
    layout.rng_seed = cfg.rng_seed;
    let seeds = sample_seeds(filtered, &layout).map_err(|source| PipelineError::Svm {
        stage: "seed sampling",
        source,
    })?;
    train_svm(&seeds, cfg.svm_c, cfg.svm_tol).map_err(|source| PipelineError::Svm {
        stage: "training",
        source,
    })
}

/// Full detection with a model trained on this image's own seed regions.
pub fn run_pipeline(img: &RgbRaster, cfg: &PipelineConfig) -> Result<PipelineRun, PipelineError> {
    run_pipeline_with_model(img, cfg, None)
}

/// Full detection; `model` skips per-image training when provided.
pub fn run_pipeline_with_model(
    img: &RgbRaster,
    cfg: &PipelineConfig,
    model: Option<SvmModel>,
) -> Result<PipelineRun, PipelineError> {
    let trace = apply_filters(img, cfg);
    let model = match model {
        Some(m) => m,
        None => train_model_on_filtered(&trace.filtered, cfg)?,
    };
    let svm_mask = classify(&model, &trace.filtered);
    let labels = connected_components(&svm_mask, Connectivity::Eight);
    let largest = largest_component(&labels);
    let road_mask = fill_holes(&largest, &StructuringElement::cross());
    Ok(PipelineRun {
        road_mask,
        model,
        intermediates: PipelineIntermediates {
            shadow_mask: trace.shadow_mask,
            post_shadow: trace.post_shadow,
            post_rainsnow: trace.post_rainsnow,
            highlight_mask: trace.highlight_mask,
            post_specular: trace.post_specular,
            filtered: trace.filtered,
            svm_mask,
        },
    })
}
