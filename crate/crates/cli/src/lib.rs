//! File formats and experiment harnesses behind the `psi-cli` binary.

pub mod bench;
pub mod demo;
pub mod keyfile;
pub mod sidecar;
