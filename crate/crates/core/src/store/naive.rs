use crate::bytes::Reader;
use crate::error::Result;
use crate::frame::Frame;

use super::index::RingIndex;
use super::{MemoryBreakdown, ObservationStore, PayloadStats, State, StepIndex, StoreConfig};

/// Uncompressed baseline: each step keeps its full `f`-frame state.
///
/// The pointer rows are kept for eviction bookkeeping only; they are not
/// part of this layout's byte model.
#[derive(Clone, Debug)]
pub struct NaiveStore {
    config: StoreConfig,
    index: RingIndex,
    /// `capacity` states of `f * H * W` bytes each.
    states: Vec<u8>,
}

impl NaiveStore {
    pub fn new(config: StoreConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            index: RingIndex::new(config.capacity, config.frame_stack),
            states: vec![0; config.capacity * config.frame_stack * config.pixels_per_frame()],
            config,
        })
    }

    fn state_len(&self) -> usize {
        self.config.frame_stack * self.config.pixels_per_frame()
    }

    fn state_bytes(&self, slot: usize) -> &[u8] {
        let len = self.state_len();
        &self.states[slot * len..(slot + 1) * len]
    }

    pub(crate) fn decode(config: StoreConfig, head: StepIndex, reader: &mut Reader<'_>) -> Result<Self> {
        let mut store = Self::new(config)?;
        let len = store.states.len();
        store.states = reader.take(len, "state frames")?.to_vec();
        let c = &store.config;
        store.index = RingIndex::decode(c.capacity, c.frame_stack, head, reader)?;
        Ok(store)
    }
}

impl ObservationStore for NaiveStore {
    fn config(&self) -> &StoreConfig {
        &self.config
    }

    fn head(&self) -> StepIndex {
        self.index.head()
    }

    fn append(&mut self, frame: &Frame, episode_start: bool) -> Result<StepIndex> {
        frame.expect_shape(self.config.height, self.config.width)?;
        let px = self.config.pixels_per_frame();
        let f = self.config.frame_stack;
        let prev = self.index.head().checked_sub(1);
        let prev_state = prev.map(|p| self.state_bytes(self.index.slot(p)).to_vec());

        let placed = self.index.push(episode_start);
        let step = placed.step;
        let len = self.state_len();
        if let Some(evicted) = placed.evicted {
            self.states[evicted.start * len..evicted.end * len].fill(0);
        }

        // The new row only references this step and steps covered by the
        // previous state, at position `src - step + f` of that state.
        let row = self.index.row_unchecked(step);
        let mut state = Vec::with_capacity(len);
        for &src in &row {
            if src == step {
                state.extend_from_slice(frame.pixels());
            } else {
                let k = (src + f as u64 - step) as usize;
                let prev = prev_state.as_ref().expect("row references a previous step");
                state.extend_from_slice(&prev[k * px..(k + 1) * px]);
            }
        }
        self.states[placed.slot * len..(placed.slot + 1) * len].copy_from_slice(&state);
        Ok(step)
    }

    fn get(&self, step: StepIndex) -> Result<State> {
        self.index.check_readable(step)?;
        let c = &self.config;
        let px = c.pixels_per_frame();
        let frames = self
            .state_bytes(self.index.slot(step))
            .chunks_exact(px)
            .map(|chunk| Frame::new(c.height, c.width, chunk.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        State::new(frames)
    }

    fn obs_inds(&self, step: StepIndex) -> Result<Vec<StepIndex>> {
        self.index.row(step)
    }

    fn valid_range(&self) -> Option<(StepIndex, StepIndex)> {
        self.index.valid_range()
    }

    fn memory_bytes(&self) -> MemoryBreakdown {
        MemoryBreakdown::from_parts(self.config.uncompressed_bytes(), 0, 0, 0)
    }

    fn payload_stats(&self) -> PayloadStats {
        PayloadStats::default()
    }

    fn encode_sections(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.states);
        self.index.encode(out);
    }
}
