//! Quantitative model/data comparison: tracking error, autocorrelation,
//! joint PDFs, KL divergence, and collapse detection.

pub mod autocorr;
pub mod collapse;
pub mod histogram;
pub mod report;
pub mod tracking;

pub use autocorr::{autocorrelation, autocorrelation_centered};
pub use collapse::{detect_collapse, CollapseKind};
pub use histogram::{joint_pdf, kl_divergence, Histogram2D, RangePolicy};
pub use report::{
    long_run_statistics, model_histogram, pdf_samples, truth_histogram, EvalReport, LongRunOptions,
    PdfVariables,
};
pub use tracking::{ensemble_tracking_error, TrackingResult};

/// Worker threads for embarrassingly parallel evaluation loops, pinned by the
/// DELAYCAST_THREADS environment variable (default 1). Reductions are by
/// index, so results do not depend on this value.
pub fn eval_threads() -> usize {
    std::env::var("DELAYCAST_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(1)
}
