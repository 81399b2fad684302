use crate::bytes::{put_i16, put_u32, Reader};
use crate::error::{Error, Result};
use crate::frame::{decode_diff, encode_diff, DiffRecord, Frame};

use super::index::RingIndex;
use super::{read_frames, MemoryBreakdown, ObservationStore, PayloadStats, State, StepIndex, StoreConfig};

/// High bit of a diff record's entry count marks a dense record.
const DENSE_FLAG: u32 = 0x8000_0000;
/// Entry count of an empty diff slot.
const ABSENT: u32 = 0xFFFF_FFFF;

/// Model cost of one diff slot's pointer.
const SLOT_POINTER_BYTES: u64 = 8;

/// Keyframe-blocked store: step `i` with `i mod f == 0` is kept raw, every
/// other step as a diff against its block's keyframe.
#[derive(Clone, Debug)]
pub struct CompressedStore {
    config: StoreConfig,
    index: RingIndex,
    keyframes: Vec<Frame>,
    /// `d x (f-1)` grid, row-major by block.
    diffs: Vec<Option<DiffRecord>>,
    stats: PayloadStats,
}

impl CompressedStore {
    pub fn new(config: StoreConfig) -> Result<Self> {
        config.validate()?;
        let d = config.blocks();
        let f = config.frame_stack;
        Ok(Self {
            index: RingIndex::new(config.capacity, f),
            keyframes: vec![Frame::zeros(config.height, config.width)?; d],
            diffs: vec![None; d * (f - 1)],
            stats: PayloadStats::default(),
            config,
        })
    }

    fn block_of(&self, step: StepIndex) -> usize {
        ((step / self.config.frame_stack as u64) % self.config.blocks() as u64) as usize
    }

    fn diff_slot(&self, step: StepIndex) -> usize {
        let f = self.config.frame_stack;
        self.block_of(step) * (f - 1) + (step % f as u64) as usize - 1
    }

    /// Resident diff record for a non-keyframe step.
    pub fn diff_record(&self, step: StepIndex) -> Option<&DiffRecord> {
        if step % self.config.frame_stack as u64 == 0 || step >= self.index.head() {
            return None;
        }
        self.diffs[self.diff_slot(step)].as_ref()
    }

    fn account(&mut self, record: &DiffRecord, sign: i64) {
        let s = &mut self.stats;
        let apply = |v: &mut u64, by: u64| {
            *v = if sign > 0 { *v + by } else { *v - by };
        };
        apply(&mut s.compressed_frames, 1);
        apply(&mut s.payload_bytes, record.payload_bytes() as u64);
        if record.is_dense() {
            apply(&mut s.dense_records, 1);
        } else {
            apply(&mut s.sparse_entries, record.entries() as u64);
        }
    }

    fn frame_at(&self, step: StepIndex) -> Result<Frame> {
        let keyframe = &self.keyframes[self.block_of(step)];
        if step % self.config.frame_stack as u64 == 0 {
            return Ok(keyframe.clone());
        }
        let diff = self.diffs[self.diff_slot(step)]
            .as_ref()
            .ok_or_else(|| Error::CorruptDiff(format!("missing diff record for step {step}")))?;
        decode_diff(keyframe, diff)
    }

    pub(crate) fn decode(config: StoreConfig, head: StepIndex, reader: &mut Reader<'_>) -> Result<Self> {
        let mut store = Self::new(config)?;
        let (h, w, f) = (store.config.height, store.config.width, store.config.frame_stack);
        store.keyframes = read_frames(reader, store.config.blocks(), h, w)?;

        let oldest = super::oldest_resident(head, store.config.capacity, f);
        let mut present = vec![false; store.diffs.len()];
        for step in oldest..head {
            if step % f as u64 != 0 {
                present[store.diff_slot(step)] = true;
            }
        }
        for (slot, expected) in present.into_iter().enumerate() {
            let record = read_record(reader, h, w)?;
            if record.is_some() != expected {
                return Err(Error::MalformedFile(format!(
                    "diff slot {slot} presence does not match head {head}"
                )));
            }
            if let Some(r) = &record {
                store.account(r, 1);
            }
            store.diffs[slot] = record;
        }
        store.index = RingIndex::decode(store.config.capacity, f, head, reader)?;
        Ok(store)
    }
}

fn read_record(reader: &mut Reader<'_>, height: usize, width: usize) -> Result<Option<DiffRecord>> {
    let count = reader.u32("diff entry count")?;
    if count == ABSENT {
        return Ok(None);
    }
    let record = if count & DENSE_FLAG != 0 {
        if (count & !DENSE_FLAG) as usize != height * width {
            return Err(Error::MalformedFile(format!(
                "dense record length {} does not match frame size",
                count & !DENSE_FLAG
            )));
        }
        DiffRecord::Dense(reader.take(height * width, "dense record")?.to_vec())
    } else {
        let n = count as usize;
        if 4 * n > height * width {
            return Err(Error::MalformedFile(format!("sparse record with {n} entries exceeds threshold")));
        }
        let mut inds = Vec::with_capacity(n);
        let mut vals = Vec::with_capacity(n);
        for _ in 0..n {
            inds.push((reader.u8("diff row")?, reader.u8("diff col")?));
        }
        for _ in 0..n {
            vals.push(reader.i16("diff value")?);
        }
        DiffRecord::Sparse { inds, vals }
    };
    record
        .validate(height, width)
        .map_err(|e| Error::MalformedFile(e.to_string()))?;
    Ok(Some(record))
}

fn write_record(out: &mut Vec<u8>, record: Option<&DiffRecord>) {
    match record {
        None => put_u32(out, ABSENT),
        Some(DiffRecord::Dense(pixels)) => {
            put_u32(out, pixels.len() as u32 | DENSE_FLAG);
            out.extend_from_slice(pixels);
        }
        Some(DiffRecord::Sparse { inds, vals }) => {
            put_u32(out, inds.len() as u32);
            for &(r, c) in inds {
                out.push(r);
                out.push(c);
            }
            for &v in vals {
                put_i16(out, v);
            }
        }
    }
}

impl ObservationStore for CompressedStore {
    fn config(&self) -> &StoreConfig {
        &self.config
    }

    fn head(&self) -> StepIndex {
        self.index.head()
    }

    fn append(&mut self, frame: &Frame, episode_start: bool) -> Result<StepIndex> {
        frame.expect_shape(self.config.height, self.config.width)?;
        let f = self.config.frame_stack;
        let placed = self.index.push(episode_start);
        let step = placed.step;
        let block = self.block_of(step);
        if step % f as u64 == 0 {
            for slot in block * (f - 1)..(block + 1) * (f - 1) {
                if let Some(old) = self.diffs[slot].take() {
                    self.account(&old, -1);
                }
            }
            self.keyframes[block] = frame.clone();
        } else {
            let record = encode_diff(&self.keyframes[block], frame)?;
            self.account(&record, 1);
            let slot = self.diff_slot(step);
            self.diffs[slot] = Some(record);
        }
        Ok(step)
    }

    fn get(&self, step: StepIndex) -> Result<State> {
        let row = self.index.row(step)?;
        let mut frames: Vec<Frame> = Vec::with_capacity(row.len());
        for (k, &src) in row.iter().enumerate() {
            // repeated pointers only occur at the front of a row
            if k > 0 && row[k - 1] == src {
                let prev = frames[k - 1].clone();
                frames.push(prev);
            } else {
                frames.push(self.frame_at(src)?);
            }
        }
        State::new(frames)
    }

    fn obs_inds(&self, step: StepIndex) -> Result<Vec<StepIndex>> {
        self.index.row(step)
    }

    fn valid_range(&self) -> Option<(StepIndex, StepIndex)> {
        self.index.valid_range()
    }

    fn memory_bytes(&self) -> MemoryBreakdown {
        let c = &self.config;
        let d = c.blocks() as u64;
        let f = c.frame_stack as u64;
        MemoryBreakdown::from_parts(
            c.pixels_per_frame() as u64 * d,
            SLOT_POINTER_BYTES * d * (f - 1),
            self.stats.payload_bytes,
            4 * c.capacity as u64 * f,
        )
    }

    fn payload_stats(&self) -> PayloadStats {
        self.stats
    }

    fn encode_sections(&self, out: &mut Vec<u8>) {
        for keyframe in &self.keyframes {
            out.extend_from_slice(keyframe.pixels());
        }
        for record in &self.diffs {
            write_record(out, record.as_ref());
        }
        self.index.encode(out);
    }
}
