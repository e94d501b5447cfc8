pub mod competitors;
pub mod confregion;
pub mod copula;
pub mod dgp;
pub mod distributions;
pub mod dvine;
pub mod error;
pub mod estimate;
pub mod optimize;
pub mod regression;
pub mod seeds;
pub mod signtest;
pub mod sim;

pub use error::{Error, Result};
