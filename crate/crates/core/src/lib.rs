pub mod detdeg;
pub mod error;
pub mod geometry;
pub mod ncexpr;
pub mod numkernel;
pub mod par;
pub mod pencil;
pub mod selftest;
pub mod structure;

pub use error::{Error, Result};
