//! Filtering, noise extraction and distribution fitting for recorded traces.

pub mod filter;
pub mod fit;
pub mod noise;

pub use filter::{apply_fir, design_fir, estimate_order, FilterSpec, FirFilter, RemezReport};
pub use fit::{
    default_bins, fit_distribution, fit_histogram, freedman_diaconis_bins, DistributionFit, Family,
    Histogram,
};
pub use noise::{extract_noise, first_half_window, NoiseExtraction, FIRST_WINDOW_SECONDS};
