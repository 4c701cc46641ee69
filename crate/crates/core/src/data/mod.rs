//! Synthetic data, dataset and model files, prediction.

mod io;
mod predict;
mod synthetic;

pub use io::{load_dataset, load_model, save_dataset, save_model, DatasetFormat};
pub use predict::{accuracy, confusion, predict, sign, Confusion, Model};
pub use synthetic::{gen_synthetic, SynthSpec, SyntheticData};
