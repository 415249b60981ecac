#![allow(dead_code)]

pub mod metrics;
pub mod refine_fuzz;
pub mod tiling;
