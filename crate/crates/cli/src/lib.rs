//! Library side of the `safeland` command: run configuration, dataset
//! layout and the commands themselves.

pub mod commands;
pub mod config;
pub mod dataset;

use safeland_core::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NO_SITE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

/// Process exit status for a failed command.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io { .. } => EXIT_IO,
        Error::InvalidArgument(_) | Error::Parse { .. } | Error::Contract(_) => EXIT_USAGE,
    }
}
