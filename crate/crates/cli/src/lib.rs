//! Library side of the `stw` command line tool: spec parsing, commands and
//! JSON reports.

pub mod commands;
pub mod report;
pub mod spec;
