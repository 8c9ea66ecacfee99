//! File formats, pcap ingest, model files, benchmarking and the command-line
//! front end for [`hasprof_core`].

pub mod bench;
pub mod cli;
pub mod config;
pub mod corpus_io;
pub mod error;
pub mod model_io;
pub mod pcap;
pub mod report;
pub mod trace_io;

pub use error::{Error, Result};
