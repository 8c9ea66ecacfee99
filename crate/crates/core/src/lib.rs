//! Flow classification and play-back buffer state inference for HTTP adaptive
//! streaming, using only packet timing, size and direction.
//!
//! The crate is `no_std` with `alloc`; file formats, the command-line tool and
//! timing live in the `hasprof` crate.

#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` style checks deliberately reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod dataset;
pub mod eval;
pub mod features;
pub mod labels;
pub mod learn;
pub mod packet;
pub mod sim;
pub mod time;
pub mod trace;

pub use dataset::{Dataset, DatasetError};
pub use features::{FeatureKind, FeatureVector, StreamingExtractor, WindowConfig};
pub use labels::{BufferState, Label, LabelIndex, LabelInterval, ServiceClass, Task};
pub use learn::{Classifier, LearnError, Model, ModelKind, ModelSpec};
pub use packet::{Direction, Endpoint, FlowKey, FlowState, PacketError, PacketRecord, Protocol};
pub use time::Nanos;
