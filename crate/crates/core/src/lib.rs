pub mod codes;
pub mod decoder;
pub mod error;
pub mod exec;
mod linalg;
pub mod model;
pub mod regression;
pub mod sim;
