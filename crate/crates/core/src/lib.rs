//! Lossless storage of 8-bit grayscale observation streams for experience
//! replay.
//!
//! Frames are grouped into blocks of `f` consecutive steps (the frame stack
//! length). The first frame of each block is kept raw; the rest are stored
//! as sparse differences against it. Frame-stacked states are never stored:
//! each step keeps a row of `f` pointers into the frame ring instead.
//!
//! - [`frame`]: frames and the sparse/dense difference codec
//! - [`store`]: the storage backends (`full`, `half`, `none`) and their registry
//! - [`replay`]: transition metadata and seeded uniform sampling
//! - [`analytics`]: byte model, compression factor and density sweeps
//! - [`trace_io`]: trace and buffer file formats, synthetic trace generators

pub mod analytics;
pub mod bytes;
pub mod error;
pub mod frame;
pub mod replay;
pub mod store;
pub mod trace_io;

pub use analytics::AnalyticsReport;
pub use error::{Error, Result};
pub use frame::{decode_diff, encode_diff, DiffRecord, Frame};
pub use replay::{Batch, ReplayBuffer, TransitionMeta};
pub use store::{
    open_store, MemoryBreakdown, ObservationStore, State, StepIndex, StorageMode, StoreConfig, StoreRegistry,
};
pub use trace_io::{GeneratorParams, Trace};
