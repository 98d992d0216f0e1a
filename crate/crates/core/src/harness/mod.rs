//! Experiment orchestration: run configuration, training and evaluation
//! of every classifier, metrics, model files, the synthetic aggression
//! corpus and the command line interface.

mod cli;
pub mod config;
pub mod experiment;
pub mod metrics;
pub mod persist;
pub mod synth;

pub use cli::run_cli;
pub use config::{Classifier, DataFormat, EmbeddingSource, RunConfig};
pub use experiment::{
    check_gradients, evaluate, load_dataset, run_experiment, run_on, Prediction, Predictor,
    RunOutput,
};
pub use metrics::Metrics;
pub use persist::{load_model, save_model, Artifact};
pub use synth::{synth_aggression, Synth};
