//! Prequential codelength measurement: online learners, the prequential
//! engine (MDL, EDL, SDL, regret), a model-driven arithmetic codec, toy
//! worlds with closed-form oracles, and a seeded experiment harness.

pub mod codec;
pub mod codelength;
pub mod error;
pub mod experiments;
pub mod learners;
pub mod prequential;
pub mod stats;
pub mod toymodels;

pub use codelength::{
    bits_to_nats, codelength, nats_to_bits, Codelength, Example, Input, LabelSpace,
    LabeledDataset, PredictiveDistribution, CLAMP_FLOOR,
};
pub use error::{EdlError, Result};
pub use learners::{LearnerKind, LearnerState};
pub use prequential::{
    edl, run_prequential, sdl, test_loss, EdlReport, PrequentialTrace, StoppingRule,
};
pub use toymodels::{ToySpec, ToyWorld};
