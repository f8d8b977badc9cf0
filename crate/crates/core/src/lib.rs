pub mod bandsolver;
pub mod cli;
pub mod constants;
pub mod extraction;
pub mod measurement;
pub mod numerics;
pub mod synth;
