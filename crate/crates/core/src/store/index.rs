//! Frame-stack pointer rows over a ring of step slots.
//!
//! Every backend shares this bookkeeping: which global steps are resident,
//! which steps have a fully resident frame stack, and the per-step pointer
//! row. Pointers are stored as ring slots (`step mod capacity`) in 32 bits;
//! the global step of a pointer is recovered from its offset to the row's
//! own slot, which is always smaller than the frame stack length.

use std::ops::Range;

use crate::bytes::{put_u32, Reader};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct RingIndex {
    capacity: usize,
    frame_stack: usize,
    head: u64,
    episode_start: u64,
    rows: Vec<u32>,
    lo: u64,
}

/// Where an appended step landed.
#[derive(Clone, Debug)]
pub(crate) struct Placement {
    pub step: u64,
    pub slot: usize,
    /// Slots of the block evicted by this append (including `slot`).
    pub evicted: Option<Range<usize>>,
}

impl RingIndex {
    pub(crate) fn new(capacity: usize, frame_stack: usize) -> Self {
        Self {
            capacity,
            frame_stack,
            head: 0,
            episode_start: 0,
            rows: vec![0; capacity * frame_stack],
            lo: 0,
        }
    }

    pub(crate) fn head(&self) -> u64 {
        self.head
    }

    pub(crate) fn slot(&self, step: u64) -> usize {
        (step % self.capacity as u64) as usize
    }

    /// First step whose frame is still stored.
    pub(crate) fn oldest_resident(&self) -> u64 {
        oldest_resident(self.head, self.capacity, self.frame_stack)
    }

    pub(crate) fn push(&mut self, episode_start: bool) -> Placement {
        let f = self.frame_stack;
        let step = self.head;
        let slot = self.slot(step);
        let evicted = if step % f as u64 == 0 && step >= self.capacity as u64 {
            self.rows[slot * f..(slot + f) * f].fill(0);
            Some(slot..slot + f)
        } else {
            None
        };
        if episode_start || step == 0 {
            self.episode_start = step;
        }
        for k in 0..f {
            let ptr = row_pointer(step, self.episode_start, f, k);
            self.rows[slot * f + k] = self.slot(ptr) as u32;
        }
        self.head += 1;
        self.advance_watermark();
        Placement {
            step,
            slot,
            evicted,
        }
    }

    fn advance_watermark(&mut self) {
        let oldest = self.oldest_resident();
        self.lo = self.lo.max(oldest);
        while self.lo < self.head && self.row_start(self.lo) < oldest {
            self.lo += 1;
        }
    }

    fn row_start(&self, step: u64) -> u64 {
        let slot = self.slot(step);
        self.global(step, slot, self.rows[slot * self.frame_stack])
    }

    fn global(&self, step: u64, slot: usize, ptr: u32) -> u64 {
        let cap = self.capacity;
        let offset = (slot + cap - ptr as usize) % cap;
        step - offset as u64
    }

    pub(crate) fn valid_range(&self) -> Option<(u64, u64)> {
        (self.lo < self.head).then(|| (self.lo, self.head - 1))
    }

    pub(crate) fn check_readable(&self, step: u64) -> Result<()> {
        if step >= self.head {
            return Err(Error::NotYetWritten {
                step,
                head: self.head,
            });
        }
        if step < self.lo {
            return Err(Error::Evicted(step));
        }
        Ok(())
    }

    /// Global steps referenced by `step`'s frame stack, oldest first.
    pub(crate) fn row(&self, step: u64) -> Result<Vec<u64>> {
        self.check_readable(step)?;
        Ok(self.row_unchecked(step))
    }

    pub(crate) fn row_unchecked(&self, step: u64) -> Vec<u64> {
        let slot = self.slot(step);
        let f = self.frame_stack;
        self.rows[slot * f..(slot + 1) * f]
            .iter()
            .map(|&p| self.global(step, slot, p))
            .collect()
    }

    pub(crate) fn encode(&self, out: &mut Vec<u8>) {
        for &p in &self.rows {
            put_u32(out, p);
        }
    }

    /// Reads a row section written by [`encode`](Self::encode) and checks
    /// every row against the pointer discipline.
    pub(crate) fn decode(
        capacity: usize,
        frame_stack: usize,
        head: u64,
        reader: &mut Reader<'_>,
    ) -> Result<Self> {
        let mut rows = Vec::with_capacity(capacity * frame_stack);
        for _ in 0..capacity * frame_stack {
            let p = reader.u32("obs_inds")?;
            if p as usize >= capacity {
                return Err(Error::MalformedFile(format!("pointer {p} outside capacity")));
            }
            rows.push(p);
        }
        let mut index = Self {
            capacity,
            frame_stack,
            head,
            episode_start: 0,
            rows,
            lo: 0,
        };
        let oldest = index.oldest_resident();
        let first_owner = head.saturating_sub(capacity as u64);
        for step in first_owner..head {
            let slot = index.slot(step);
            let stored = &index.rows[slot * frame_stack..(slot + 1) * frame_stack];
            if step < oldest {
                if stored.iter().any(|&p| p != 0) {
                    return Err(Error::MalformedFile(format!(
                        "evicted step {step} has a non-empty pointer row"
                    )));
                }
                continue;
            }
            let row = index.row_unchecked(step);
            let start = row[0];
            let expected: Vec<u64> = (0..frame_stack)
                .map(|k| row_pointer(step, start, frame_stack, k))
                .collect();
            if row != expected {
                return Err(Error::MalformedFile(format!(
                    "pointer row for step {step} violates frame-stack discipline"
                )));
            }
        }
        if head > 0 {
            index.episode_start = index.row_start(head - 1);
        }
        index.advance_watermark();
        Ok(index)
    }
}

/// First resident step for a ring holding `head` appended steps.
pub(crate) fn oldest_resident(head: u64, capacity: usize, frame_stack: usize) -> u64 {
    if head <= capacity as u64 {
        return 0;
    }
    let f = frame_stack as u64;
    let blocks = (capacity / frame_stack) as u64;
    let newest_block = (head - 1) / f;
    (newest_block + 1 - blocks) * f
}

/// `k`-th pointer of `step`'s row: `max(episode_start, step - f + 1 + k)`.
fn row_pointer(step: u64, episode_start: u64, frame_stack: usize, k: usize) -> u64 {
    let back = (frame_stack - 1 - k) as u64;
    step.saturating_sub(back).max(episode_start)
}
