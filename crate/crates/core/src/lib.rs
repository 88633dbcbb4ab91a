//! Clustering-based speaker diarization toolkit.
//!
//! The crate covers everything downstream of neural feature extraction:
//!
//! - [`timeline`]: interval algebra over time segments (the currency of
//!   every other module).
//! - [`rttm`]: RTTM diarization files and start/end label files.
//! - [`vad`]: fusion of several voice-activity systems by majority vote,
//!   short-silence bridging and ASR-distance pruning.
//! - [`segmentation`]: uniform sub-segmentation of speech, the frame to
//!   sub-segment map, and the embedding file format.
//! - [`plda`]: PLDA model storage, preprocessing, per-recording PCA,
//!   simultaneous diagonalization and pairwise log-likelihood-ratio scoring.
//! - [`ahc`]: agglomerative hierarchical clustering over a similarity matrix.
//! - [`vbx`]: Bayesian HMM refinement of an initial clustering, where HMM
//!   states are speakers and emissions come from the diagonalized PLDA.
//! - [`recluster`]: post-hoc merging of over-split speakers using one
//!   global embedding per speaker.
//! - [`overlap`]: second-speaker assignment inside detected overlap regions.
//! - [`metrics`]: DER with forgiveness collar, JER, frame-level metrics and
//!   speaker-count statistics.
//! - [`simulate`]: synthetic conversations drawn from the PLDA generative
//!   model, so the whole pipeline is testable without audio.
//! - [`pipeline`]: batch orchestration of all stages with per-stage oracle
//!   substitution.

pub mod ahc;
pub mod error;
pub mod hungarian;
pub mod linalg;
pub mod metrics;
pub mod overlap;
pub mod pipeline;
pub mod plda;
pub mod recluster;
pub mod rttm;
pub mod segmentation;
pub mod simulate;
pub mod timeline;
pub mod vad;
pub mod vbx;

pub use error::{Error, Result};
