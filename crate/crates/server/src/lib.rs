//! Session-holding HTTP service and command-line front end for the
//! conversational QA pipeline.

pub mod api;
pub mod cli;
pub mod session;
pub mod views;
