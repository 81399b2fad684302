//! Observation stores: a ring of frames addressed by global step, returning
//! frame-stacked states.
//!
//! Three interchangeable backends implement [`ObservationStore`]:
//!
//! | name   | layout                                                         |
//! |--------|----------------------------------------------------------------|
//! | `full` | one raw keyframe per block of `f` steps, sparse diffs for the rest, pointer rows |
//! | `half` | every frame raw, pointer rows                                  |
//! | `none` | every state materialized as `f` raw frames (uncompressed baseline) |
//!
//! Backends are created by name through a [`StoreRegistry`]. All of them share
//! the same eviction contract: the ring holds `capacity / f` blocks of `f`
//! steps, a block is evicted as a whole when the step starting its replacement
//! is appended, and a step is readable only while every frame its stack
//! references is resident.

mod compressed;
mod index;
mod indexed;
mod naive;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

pub use compressed::CompressedStore;
pub use indexed::IndexedStore;
pub use naive::NaiveStore;

pub(crate) use index::oldest_resident;

use crate::bytes::Reader;
use crate::error::{Error, Result};
use crate::frame::{check_dims, Frame};

/// Global, monotonically increasing step number.
pub type StepIndex = u64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StorageMode {
    /// Observation indexing plus sparse differential encoding.
    Full,
    /// Observation indexing only.
    Half,
    /// Uncompressed frame stacks.
    None,
}

impl StorageMode {
    pub const ALL: [StorageMode; 3] = [StorageMode::Full, StorageMode::Half, StorageMode::None];

    pub fn name(self) -> &'static str {
        match self {
            StorageMode::Full => "full",
            StorageMode::Half => "half",
            StorageMode::None => "none",
        }
    }

    /// Mode flag stored in buffer files.
    pub fn file_flag(self) -> u32 {
        match self {
            StorageMode::Full => 0,
            StorageMode::Half => 1,
            StorageMode::None => 2,
        }
    }

    pub fn from_file_flag(flag: u32) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.file_flag() == flag)
    }
}

impl fmt::Display for StorageMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StorageMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown storage mode '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StoreConfig {
    /// Steps held by the ring, `|D|`. Must be a multiple of `frame_stack`.
    pub capacity: usize,
    pub frame_stack: usize,
    pub height: usize,
    pub width: usize,
    pub mode: StorageMode,
}

impl StoreConfig {
    pub fn new(
        capacity: usize,
        frame_stack: usize,
        height: usize,
        width: usize,
        mode: StorageMode,
    ) -> Result<Self> {
        let config = Self {
            capacity,
            frame_stack,
            height,
            width,
            mode,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame_stack == 0 {
            return Err(Error::InvalidConfig("frame stack must be at least 1".into()));
        }
        if self.capacity == 0 || self.capacity % self.frame_stack != 0 {
            return Err(Error::InvalidConfig(format!(
                "capacity {} is not a positive multiple of frame stack {}",
                self.capacity, self.frame_stack
            )));
        }
        if self.capacity > u32::MAX as usize {
            return Err(Error::InvalidConfig(format!(
                "capacity {} does not fit 32-bit pointers",
                self.capacity
            )));
        }
        check_dims(self.height, self.width)
    }

    /// Keyframe slots, `d = |D| / f`.
    pub fn blocks(&self) -> usize {
        self.capacity / self.frame_stack
    }

    pub fn pixels_per_frame(&self) -> usize {
        self.height * self.width
    }

    /// Bytes needed to hold every state as `f` raw frames.
    pub fn uncompressed_bytes(&self) -> u64 {
        (self.pixels_per_frame() * self.capacity * self.frame_stack) as u64
    }
}

/// A frame-stacked state, oldest frame first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct State {
    frames: Vec<Frame>,
}

impl State {
    pub fn new(frames: Vec<Frame>) -> Result<Self> {
        let Some(first) = frames.first() else {
            return Err(Error::InvalidConfig("state needs at least one frame".into()));
        };
        if let Some(bad) = frames.iter().find(|f| !f.same_shape(first)) {
            return Err(Error::DimensionMismatch {
                expected_height: first.height(),
                expected_width: first.width(),
                height: bad.height(),
                width: bad.width(),
            });
        }
        Ok(Self { frames })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn last(&self) -> &Frame {
        self.frames.last().expect("state is never empty")
    }

    /// Appends the frames' pixels, oldest first, to `out`.
    pub fn write_pixels(&self, out: &mut Vec<u8>) {
        for frame in &self.frames {
            out.extend_from_slice(frame.pixels());
        }
    }
}

/// Model byte counts of a store.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MemoryBreakdown {
    pub keyframe_bytes: u64,
    pub sparse_overhead_bytes: u64,
    pub sparse_payload_bytes: u64,
    pub index_bytes: u64,
    pub total_bytes: u64,
}

impl MemoryBreakdown {
    pub(crate) fn from_parts(keyframe: u64, overhead: u64, payload: u64, index: u64) -> Self {
        Self {
            keyframe_bytes: keyframe,
            sparse_overhead_bytes: overhead,
            sparse_payload_bytes: payload,
            index_bytes: index,
            total_bytes: keyframe + overhead + payload + index,
        }
    }
}

/// Resident diff records, summarized.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PayloadStats {
    /// Entries across resident sparse records (`N`).
    pub sparse_entries: u64,
    pub dense_records: u64,
    /// Resident non-keyframe frames, sparse or dense.
    pub compressed_frames: u64,
    /// `4 * sparse_entries + H*W * dense_records`.
    pub payload_bytes: u64,
}

/// Storage backend for a stream of frames.
///
/// Writers (`append`, `set`) need exclusive access; readers may share.
pub trait ObservationStore: Send + Sync + fmt::Debug {
    fn config(&self) -> &StoreConfig;

    /// Next step index to be written.
    fn head(&self) -> StepIndex;

    /// Stores `frame` as step `head` and returns that step.
    fn append(&mut self, frame: &Frame, episode_start: bool) -> Result<StepIndex>;

    fn get(&self, step: StepIndex) -> Result<State>;

    /// Global steps whose frames make up `step`'s state.
    fn obs_inds(&self, step: StepIndex) -> Result<Vec<StepIndex>>;

    /// Inclusive range of readable steps, `None` when nothing is readable.
    fn valid_range(&self) -> Option<(StepIndex, StepIndex)>;

    fn memory_bytes(&self) -> MemoryBreakdown;

    fn payload_stats(&self) -> PayloadStats;

    /// Writes the frame, diff and pointer sections of the buffer file format.
    fn encode_sections(&self, out: &mut Vec<u8>);

    /// Writes the state for step `step`, which must equal `head`.
    ///
    /// Only the newest frame is stored. The state is treated as a
    /// continuation when its leading frames match the previous state's
    /// trailing frames, and as an episode start when all its frames are
    /// identical.
    fn set(&mut self, step: StepIndex, state: &State) -> Result<StepIndex> {
        let head = self.head();
        if step != head {
            return Err(Error::OutOfOrderSet { step, head });
        }
        let f = self.config().frame_stack;
        if state.len() != f {
            return Err(Error::InvalidConfig(format!(
                "state has {} frames, frame stack is {f}",
                state.len()
            )));
        }
        let frames = state.frames();
        let continues = match head.checked_sub(1).map(|prev| self.get(prev)) {
            Some(Ok(prev)) => prev.frames()[1..] == frames[..f - 1],
            _ => false,
        };
        let repeated = frames.iter().all(|fr| fr == &frames[0]);
        if !continues && !repeated && head > 0 {
            return Err(Error::StateMismatch);
        }
        self.append(state.last(), !continues)
    }
}

pub type Create = fn(StoreConfig) -> Result<Box<dyn ObservationStore>>;
pub type Decode = fn(StoreConfig, StepIndex, &mut Reader<'_>) -> Result<Box<dyn ObservationStore>>;

#[derive(Clone, Copy)]
struct Backend {
    mode: StorageMode,
    create: Create,
    decode: Decode,
}

/// Name-keyed table of store backends.
#[derive(Clone)]
pub struct StoreRegistry {
    backends: BTreeMap<&'static str, Backend>,
}

impl StoreRegistry {
    pub fn empty() -> Self {
        Self {
            backends: BTreeMap::new(),
        }
    }

    /// Registry with the `full`, `half` and `none` backends.
    pub fn builtin() -> Self {
        let mut reg = Self::empty();
        reg.register(StorageMode::Full, |c| Ok(Box::new(CompressedStore::new(c)?)), |c, h, r| {
            Ok(Box::new(CompressedStore::decode(c, h, r)?))
        });
        reg.register(StorageMode::Half, |c| Ok(Box::new(IndexedStore::new(c)?)), |c, h, r| {
            Ok(Box::new(IndexedStore::decode(c, h, r)?))
        });
        reg.register(StorageMode::None, |c| Ok(Box::new(NaiveStore::new(c)?)), |c, h, r| {
            Ok(Box::new(NaiveStore::decode(c, h, r)?))
        });
        reg
    }

    pub fn register(&mut self, mode: StorageMode, create: Create, decode: Decode) {
        self.backends.insert(
            mode.name(),
            Backend {
                mode,
                create,
                decode,
            },
        );
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.backends.keys().copied()
    }

    pub fn lookup(&self, name: &str) -> Option<StorageMode> {
        self.backends.get(name).map(|b| b.mode)
    }

    fn backend(&self, mode: StorageMode) -> Result<&Backend> {
        self.backends
            .get(mode.name())
            .ok_or_else(|| Error::InvalidConfig(format!("no backend registered for '{mode}'")))
    }

    pub fn create(&self, config: StoreConfig) -> Result<Box<dyn ObservationStore>> {
        config.validate()?;
        (self.backend(config.mode)?.create)(config)
    }

    pub(crate) fn decode(
        &self,
        config: StoreConfig,
        head: StepIndex,
        reader: &mut Reader<'_>,
    ) -> Result<Box<dyn ObservationStore>> {
        config.validate()?;
        (self.backend(config.mode)?.decode)(config, head, reader)
    }
}

impl Default for StoreRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl fmt::Debug for StoreRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.backends.keys()).finish()
    }
}

/// Creates a store through the builtin registry.
pub fn open_store(config: StoreConfig) -> Result<Box<dyn ObservationStore>> {
    StoreRegistry::builtin().create(config)
}

pub(crate) fn read_frames(
    reader: &mut Reader<'_>,
    count: usize,
    height: usize,
    width: usize,
) -> Result<Vec<Frame>> {
    (0..count)
        .map(|_| {
            let px = reader.take(height * width, "frame pixels")?;
            Frame::new(height, width, px.to_vec())
        })
        .collect()
}

#[cfg(test)]
mod tests;
