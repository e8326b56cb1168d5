//! HTTP session API and command-line front end for the dialog engine.

pub mod cli;
pub mod http;
