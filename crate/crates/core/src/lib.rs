//! Clustering input/output time series by the dynamics of the linear systems
//! that generated them.
//!
//! The central measure is the extended cepstral distance: the power cepstrum
//! of an output minus that of its input isolates the system's contribution,
//! and a weighted squared difference of those contributions compares two
//! systems without identifying either. Baselines (Euclidean, DTW and its
//! Keogh bound, the plain cepstral distance, H2/H-infinity model norms) share
//! the same pairwise-matrix and hierarchical clustering pipeline.

pub mod clustering;
pub mod distances;
pub mod error;
pub mod evaluation;
pub mod io;
pub mod lti;
pub mod par;
pub mod rng;
pub mod signal;
pub mod spectral;

pub use clustering::{
    compute_matrix, cut, hierarchical_cluster, pairwise_matrix, Dendrogram, DistanceMatrix,
    Linkage, Measure, MeasureConfig, Merge, PairMetric, Partition,
};
pub use distances::{
    cepstral_distance, cepstral_norm, d_dtw_exact, d_euclidean, extended_cepstral_distance,
    lb_keogh, DtwConfig,
};
pub use error::{Error, Result};
pub use evaluation::{adjusted_rand_index, run_experiment, ExperimentConfig, ExperimentReport};
pub use lti::{
    circuit_model, discretize, h2_norm, hinf_norm, model_distance, simulate, CircuitComponents,
    ContinuousStateSpace, ModelNorm, StateSpace,
};
pub use par::Execution;
pub use signal::{
    build_paper_dataset, gen_lti_filtered_input, gen_multisine, gen_white_noise, IOPair,
    InputCounts, LabeledDataset, TimeSeries,
};
pub use spectral::{fft, power_cepstrum, welch_psd, Cepstrum, PowerSpectrum, WelchConfig, Window};
