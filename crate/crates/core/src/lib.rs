pub mod analysis;
pub mod blocks;
pub mod boxes;
pub mod detect;
pub mod error;
pub mod graph;
pub mod io;
pub mod ops;
pub mod postprocess;
pub mod selftest;
pub mod ssd;
pub mod tensor;
