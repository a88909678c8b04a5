pub mod covar_coes;
pub mod empirical;
pub mod error;
pub mod harness;
pub mod io;
pub mod models;
pub mod numerics;
pub mod oracle;
pub mod sample;
pub mod special;
pub mod tail_copula;

pub use error::{Error, Result};
