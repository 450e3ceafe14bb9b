//! One module per subcommand.

pub mod analyze;
pub mod kl;
pub mod sample;
pub mod selftest;
pub mod synth;
