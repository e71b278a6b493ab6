pub mod correlation;
pub mod error;
pub mod linalg;
pub mod observables;
pub mod optimizer;
pub mod oracle;
pub mod scaling;
pub mod states;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
