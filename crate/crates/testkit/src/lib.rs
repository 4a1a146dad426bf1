//! Support crate for the etlinks test suites: seeded random generators and
//! independent brute-force reference implementations. Nothing here is used
//! by the pipeline itself; references are deliberately naive so they stay
//! independent of the optimized production paths they check.

pub mod fixture;
pub mod oracle;
pub mod random;
