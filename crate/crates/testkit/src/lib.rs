//! Slow, obviously-correct reference implementations. Nothing here shares
//! code paths with the solver it checks beyond the consumer-policy interface.

pub mod expectimax;
pub mod partition;
pub mod simplex;
