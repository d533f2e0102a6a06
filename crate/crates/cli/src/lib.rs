//! File formats, image loading and command implementations for the
//! `rtsvd` command line tool.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod pgm;
pub mod tensor_file;
