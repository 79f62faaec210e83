//! Independent reference implementations used to check the engine, the
//! dependency analysis and the miner.

pub mod interp;
pub mod itemsets;
pub mod lastwriter;
