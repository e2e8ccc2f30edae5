//! Synthetic scenarios and slow reference computations for testing.

pub mod oracles;
pub mod pit;
pub mod quadrature;
pub mod scenario;
