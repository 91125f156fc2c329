//! Configuration files, output formats and the commands of the `whomog` tool.

pub mod check;
pub mod config;
pub mod output;
pub mod run;

pub use check::{run_checks, CheckItem, CheckReport};
pub use config::{parse_config, parse_config_with_overrides, Command, RunConfig};
pub use output::{read_field, write_csv, write_field, FieldFile, Table};
pub use run::{run_cell, run_macro_command, run_micro_command, run_sweep_command};
