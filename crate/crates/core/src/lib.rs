//! Neural-network regression of the electrical conductivity of
//! SiO2-CaO-MgO-Al2O3-FeO melts from temperature and composition.
//!
//! The pipeline is: load measurements ([`data`]), drop conductivity outliers,
//! split 80/20, min-max scale, train a single-hidden-layer ReLU network with
//! Adam on RMSE ([`network`], [`training`]), report AAE and the spread of the
//! deviations in S/m ([`evaluation`]) and rank the inputs with the
//! connection-weights method ([`sensitivity`]).

pub mod cli;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod model_file;
pub mod network;
pub mod report;
pub mod rng;
pub mod sensitivity;
pub mod synthetic;
pub mod training;

pub use data::{Dataset, LoadOptions, Sample, Scaler, SplitIndices};
pub use error::{Error, Result};
pub use evaluation::EvalReport;
pub use model_file::Model;
pub use network::Network;
pub use rng::RngState;
pub use sensitivity::SensitivityReport;
pub use training::{TrainConfig, TrainReport};
