use crate::bytes::Reader;
use crate::error::Result;
use crate::frame::Frame;

use super::index::RingIndex;
use super::{read_frames, MemoryBreakdown, ObservationStore, PayloadStats, State, StepIndex, StoreConfig};

/// Every frame stored raw once; states are rebuilt from pointer rows.
#[derive(Clone, Debug)]
pub struct IndexedStore {
    config: StoreConfig,
    index: RingIndex,
    frames: Vec<Frame>,
}

impl IndexedStore {
    pub fn new(config: StoreConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            index: RingIndex::new(config.capacity, config.frame_stack),
            frames: vec![Frame::zeros(config.height, config.width)?; config.capacity],
            config,
        })
    }

    pub(crate) fn decode(config: StoreConfig, head: StepIndex, reader: &mut Reader<'_>) -> Result<Self> {
        let mut store = Self::new(config)?;
        let c = &store.config;
        store.frames = read_frames(reader, c.capacity, c.height, c.width)?;
        store.index = RingIndex::decode(c.capacity, c.frame_stack, head, reader)?;
        Ok(store)
    }
}

impl ObservationStore for IndexedStore {
    fn config(&self) -> &StoreConfig {
        &self.config
    }

    fn head(&self) -> StepIndex {
        self.index.head()
    }

    fn append(&mut self, frame: &Frame, episode_start: bool) -> Result<StepIndex> {
        frame.expect_shape(self.config.height, self.config.width)?;
        let placed = self.index.push(episode_start);
        if let Some(evicted) = placed.evicted {
            for slot in evicted {
                self.frames[slot].pixels_mut().fill(0);
            }
        }
        self.frames[placed.slot] = frame.clone();
        Ok(placed.step)
    }

    fn get(&self, step: StepIndex) -> Result<State> {
        let row = self.index.row(step)?;
        State::new(
            row.into_iter()
                .map(|src| self.frames[self.index.slot(src)].clone())
                .collect(),
        )
    }

    fn obs_inds(&self, step: StepIndex) -> Result<Vec<StepIndex>> {
        self.index.row(step)
    }

    fn valid_range(&self) -> Option<(StepIndex, StepIndex)> {
        self.index.valid_range()
    }

    fn memory_bytes(&self) -> MemoryBreakdown {
        let c = &self.config;
        MemoryBreakdown::from_parts(
            (c.pixels_per_frame() * c.capacity) as u64,
            0,
            0,
            4 * (c.capacity * c.frame_stack) as u64,
        )
    }

    fn payload_stats(&self) -> PayloadStats {
        PayloadStats::default()
    }

    fn encode_sections(&self, out: &mut Vec<u8>) {
        for frame in &self.frames {
            out.extend_from_slice(frame.pixels());
        }
        self.index.encode(out);
    }
}
