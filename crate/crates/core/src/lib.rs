//! Context trees from location traces: link GPS points to nearby mapped
//! elements, keep the ones a person actually interacted with, and cluster
//! those interactions into a hierarchy of contexts.

pub mod augment;
pub mod cluster;
pub mod filter;
pub mod geo;
pub mod ingest;
pub mod model;
pub mod summarise;
pub mod time;
pub mod prune;
pub mod analysis;
pub mod synth;
pub mod pipeline;
