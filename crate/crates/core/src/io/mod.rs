//! Plain-text and PGM file formats shared by the dataset layout.

pub mod kv;
pub mod pgm;

pub use kv::KvFile;
pub use pgm::{Pgm, PgmData};
