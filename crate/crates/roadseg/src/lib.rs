//! Road/non-road pixel classification for forward-facing road scenes.
//!
//! The pipeline runs four stages: raw RGB features, a filtering stage that
//! suppresses shadow, rain/snow and highlight noise, a linear SVM trained on
//! seed regions of the image, and morphological cleanup of the classified
//! mask. A synthetic-scene generator and an FNR/FPR harness support
//! with/without-filter comparisons on corpora with exact ground truth.

pub mod config;
pub mod eval;
pub mod morph;
pub mod netpbm;
pub mod pipeline;
pub mod rainsnow;
pub mod raster;
pub mod shadow;
pub mod specular;
pub mod svm;
pub mod synth;

pub use config::{ConfigError, FilterKind, PipelineConfig};
pub use eval::{batch_eval, compare_runs, confusion, rates, EvalError, EvalReport};
pub use netpbm::{load_pgm, load_ppm, save_mask_pgm, save_pgm, save_ppm, CodecError};
pub use pipeline::{run_pipeline, run_pipeline_with_model, PipelineError, PipelineRun};
pub use raster::{BinaryMask, GrayRaster, HsvRaster, RgbRaster};
pub use svm::{SeedLayout, SvmModel};
