pub mod checkpoint;
pub mod data;
pub mod error;
pub mod eval;
pub mod gradsuite;
pub mod model;
pub mod metrics;
pub mod nafblock;
pub mod nn;
pub mod params;
pub mod rng;
pub mod scam;
pub mod tensor;
pub mod tlsc;
pub mod train;

pub use checkpoint::Checkpoint;
pub use error::{Error, Result};
pub use model::{build_model, count_params, infer, DropPlan, Model, ModelConfig, Variant};
pub use params::ParamStore;
pub use tlsc::PoolingPolicy;
pub use train::{Trainer, TrainConfig};
