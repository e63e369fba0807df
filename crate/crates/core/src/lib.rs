//! Hidden Markov random field segmentation of 2D grayscale images.
//!
//! Intensities are modeled as Gaussian per class, labels carry a Potts
//! prior over 4-neighborhoods, labels are estimated with iterated
//! conditional modes and class parameters are refit with EM. An optional
//! binary edge map removes smoothness coupling at edge pixels.

pub mod edge;
pub mod em;
pub mod error;
pub mod image;
pub mod io;
pub mod kmeans;
pub mod model;
pub mod mrf;
pub mod pipeline;

pub use edge::{canny_edges, load_edge_map, CannyParams, EdgeMap};
pub use em::{
    class_posterior, gaussian_pdf, hmrf_em, neighborhood_label_prior, update_parameters, EmConfig,
    EmOutcome, EnergyTrace, PosteriorField, TraceEntry,
};
pub use error::{Error, Result};
pub use image::{gaussian_blur, gaussian_kernel, mirror_expand, mirror_shrink, GaussianKernel, GrayImage, Grid};
pub use io::{load_image, save_label_image};
pub use kmeans::{kmeans_init, kmeans_restarts, KmeansOutcome};
pub use model::{ClassParams, LabelField, SIGMA_FLOOR};
pub use mrf::{
    clique_potential, icm_map, likelihood_energy_pixel, ml_labels, prior_energy,
    total_posterior_energy, EdgeRule, EnergyBreakdown, IcmConfig, Schedule,
};
pub use pipeline::{run_pipeline, segment, EdgeMode, KmeansInput, PipelineConfig, SegmentConfig, Segmentation};
