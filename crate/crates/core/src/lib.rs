//! Compilers from Turing machines to tiling, semi-Thue and Post
//! correspondence systems, and evaluators for the one-way functions defined
//! over those systems.

pub mod bits;
pub mod closure;
pub mod coding;
pub mod instance;
pub mod inverter;
pub mod machine;
pub mod pcp;
pub mod sampler;
pub mod semithue;
pub mod stcompile;
pub mod suites;
pub mod tiling;
