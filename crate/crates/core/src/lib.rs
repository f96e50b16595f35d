//! Analysis toolkit for multi-channel electrophysiology recordings of
//! living substrates.
//!
//! The pipeline: ingest logger CSV exports, split the recording at the
//! stimulation trigger, tile both sides with variable-size windows, detect
//! spike events through analytic-signal envelopes, quantify each window
//! with a suite of complexity metrics (generalized entropies, diversity,
//! LZ76 and its shuffle-normalized form), and emit deterministic reports
//! and figures. A separate path transforms CT images with the 2D DCT and
//! compares energy-band distributions between regions.

pub mod dct;
pub mod envelope;
pub mod error;
pub mod ingest;
pub mod metrics;
pub mod plot;
pub mod report;
pub mod segment;
pub mod spike;
pub mod synth;

pub use error::{Error, Result};
pub use ingest::{GrayImage, Recording};
pub use report::{run_pipeline, PipelineConfig, TrialReport};
pub use spike::{detect_spikes, DetectorConfig, SpikeEvent};
