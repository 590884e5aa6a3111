pub mod error;
pub mod kernel;
pub mod optimizer;
pub mod par;
pub mod proxy;
pub mod report;
pub mod ridge;
pub mod scenario;
pub mod variation;

pub use error::{Error, Result};
