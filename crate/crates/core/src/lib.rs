//! Core pipeline for linking technology and company rosters through
//! pretrained entity embeddings: embedding store, roster resolution,
//! orthogonal alignment, cross-similarity, clustering, 2D projection,
//! patent-correlation validation, and model/report serialization.

pub mod alignment;
pub mod clustering;
pub mod embedding;
pub mod linalg;
pub mod mapgen;
pub mod projection;
pub mod registry;
pub mod sigfig;
pub mod validation;
pub mod similarity;
