//! Edge-conditioned graph network with an activity head and an LSTM
//! action decoder.

pub mod config;
pub mod ecc;
pub mod network;
pub mod train;

pub use config::{Conditioning, ModelConfig, StepReduction};
pub use ecc::{readout, EccLayer, GraphInput, Message};
pub use network::{argmax, Forward, LossParts, Model, Prediction};
pub use train::{accumulate, train, EpochLoss, TrainLog, TrainingSample};
