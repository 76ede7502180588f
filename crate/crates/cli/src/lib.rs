//! Library surface of the batch front end: the experiment configuration
//! schema and its builders, shared by the binary and the test suites.

pub mod config;
