//! Texture defect detection for monochromatic 3D-textured (Jacquard)
//! fabrics.
//!
//! Two camera views of the same fabric region are each denoised, reduced to
//! a one-pixel contour skeleton, and summarized by the orientation energy of
//! their Hough transform. Six statistics per view feed a one-hidden-layer
//! perceptron that outputs a defect probability.
//!
//! Module map:
//! - [`image`]: grayscale/binary rasters and PGM (P5) I/O
//! - [`preproc`]: Gaussian, Laplacian, Otsu, Zhang-Suen thinning
//! - [`hough`]: `(rho, theta)` voting and direction density
//! - [`features`]: per-view statistics and the 12-value feature vector
//! - [`mlp`]: the perceptron, its training and model files
//! - [`synthgen`]: seeded synthetic fabric with injected defects
//! - [`pipeline`]: detection, streaming, evaluation, benchmarking
//! - [`corpus`]: the on-disk corpus layout

pub mod corpus;
pub mod features;
pub mod hough;
pub mod image;
pub mod mlp;
pub mod pipeline;
pub mod preproc;
pub mod synthgen;

pub use features::{combine, extract_features, FeatureVector, ViewFeatures, FEATURE_DIM};
pub use hough::{direction_density, hough_transform, DirectionDensity, HoughAccumulator};
pub use image::{read_pgm, write_pgm, BinaryImage, GrayImage};
pub use mlp::{load_model, save_model, train, Label, LabeledSample, MlpModel, TrainConfig};
pub use pipeline::{
    benchmark, detect, evaluate, run_stream, Classifier, Decision, EvalReport, LatencyStats, PipelineConfig,
    PipelineError, StreamEvent, StreamOptions,
};
pub use preproc::{preprocess, thin, PreprocConfig};
pub use synthgen::{generate, make_corpus, CorpusItem, DefectKind, FramePair, SynthSpec};
