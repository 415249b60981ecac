pub mod cli;
pub mod config;
pub mod fixture;
pub mod pipeline;
pub mod io;
pub mod transport;
pub mod vectors;
