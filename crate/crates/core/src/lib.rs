//! Cue Ball / Recall Net associative memory.
//!
//! Attribute groups ("cue balls") each hold a fixed set of cue neurons. A
//! cue neuron stores one whole binary image through its own recall-net
//! weights, recognizes that image through its cue weights, and is linked to
//! cue neurons of the neighboring balls. Presenting a stored image to one
//! ball recalls the linked images ball by ball along the chain.
//!
//! * [`pattern`]: PBM images, synthetic patterns, unit-norm vectors
//! * [`dataset`]: attribute/element manifests
//! * [`model`]: balls, neurons, cross links, elementary input–output maps
//! * [`learning`]: the three delta-rule learners and their orchestration
//! * [`recall`]: identification and chained recall
//! * [`persistence`]: binary weight archive

pub mod dataset;
pub mod learning;
pub mod model;
pub mod pattern;
pub mod persistence;
pub mod recall;

pub use dataset::{Dataset, DatasetError, DatasetManifest};
pub use learning::{
    default_chains, learn_u, learn_v, learn_w, train_system, ChainSpec, Group, LearnError, Phase,
    Series, TrainingRecord, TrainingReport,
};
pub use model::{threshold, CbrnSystem, CrossLink, CueBall, CueNeuron, ModelError, SystemConfig};
pub use pattern::{
    cosine, load_pbm, save_pbm, synth_pattern, vectorize, CodecError, PatternImage, PatternVector,
};
pub use persistence::{load_weights, save_weights, ArchiveError};
pub use recall::{
    chain_recall, identify, propagate, reconstruct, BallResponse, Firing, Outcome, RecallError,
    RecallTrace,
};

use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Recall(#[from] RecallError),
    #[error(transparent)]
    Archive(#[from] ArchiveError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
