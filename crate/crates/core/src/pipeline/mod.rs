//! Experiment configuration, scene sets, end-to-end runs, datasets and
//! studies.

mod config;
mod dataset;
mod run;
mod scenes;
mod studies;
mod toy;

pub use config::*;
pub use dataset::*;
pub use run::*;
pub use scenes::*;
pub use studies::*;
pub use toy::*;
