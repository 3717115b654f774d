//! IO, parallel drivers, the simulation harness and the command-line front
//! end around [`swd_core`].

pub mod cli;
pub mod error;
pub mod io;
pub mod parallel;
pub mod report;
pub mod sim;

pub use error::{Error, Result};

/// Named substreams under the user's seed.
pub mod streams {
    pub const DIRECTIONS: u64 = 1;
    pub const SAMPLE_X: u64 = 2;
    pub const SAMPLE_Y: u64 = 3;
}
