//! Persona synthesis, IPIP-NEO-120 administration and Big Five evaluation.

pub mod domain;
pub mod ingest;
pub mod gateway;
pub mod seeds;
pub mod templates;
pub mod forge;
pub mod assessment;
pub mod analytics;
pub mod store;
pub mod pipeline;
pub mod evaluate;
pub mod export;
