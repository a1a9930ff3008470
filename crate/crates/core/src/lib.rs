pub mod classify;
pub mod csp;
pub mod epoching;
pub mod model;
pub mod pipeline;
pub mod preprocess;
pub mod rng;
pub mod simulate;
mod row_major;
pub mod topomap;
