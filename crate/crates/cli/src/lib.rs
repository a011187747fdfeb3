//! Support code for the `fracbv` command-line tool: PGM image I/O, the
//! plain-text config format, field/image conversion, and run manifests.

pub mod config;
pub mod image;
pub mod manifest;
pub mod pgm;
