//! Naive reference buffer for equivalence tests.
//!
//! Keeps every frame ever added and recomputes frame stacks, residency and
//! sampling candidates from scratch on each query. Shares nothing with the
//! library beyond the `Frame` type and the documented sampling procedure.

#![allow(dead_code)]

use deobs_core::{Frame, GeneratorParams, Trace};
use deobs_core::trace_io::{generate, GeneratorKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct OracleBuffer {
    pub capacity: usize,
    pub f: usize,
    pub frames: Vec<Frame>,
    pub starts: Vec<bool>,
    pub actions: Vec<Vec<u8>>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    episode_of: Vec<usize>,
}

impl OracleBuffer {
    pub fn new(capacity: usize, f: usize) -> Self {
        Self {
            capacity,
            f,
            frames: Vec::new(),
            starts: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            dones: Vec::new(),
            episode_of: Vec::new(),
        }
    }

    pub fn add(&mut self, frame: &Frame, action: Vec<u8>, reward: f64, done: bool, start: bool) {
        let first = self.frames.is_empty();
        self.frames.push(frame.clone());
        self.starts.push(start || first);
        let ep = if start || first { self.frames.len() - 1 } else { *self.episode_of.last().unwrap() };
        self.episode_of.push(ep);
        self.actions.push(action);
        self.rewards.push(reward);
        self.dones.push(done);
    }

    pub fn head(&self) -> usize {
        self.frames.len()
    }

    fn episode_start(&self, i: usize) -> usize {
        self.episode_of[i]
    }

    pub fn row(&self, i: usize) -> Vec<usize> {
        let ep = self.episode_start(i);
        (0..self.f)
            .map(|k| {
                let want = i as i64 - (self.f as i64 - 1) + k as i64;
                want.max(ep as i64) as usize
            })
            .collect()
    }

    /// Frame of step `j` is still held: its block is among the newest
    /// `capacity / f` blocks.
    pub fn resident(&self, j: usize) -> bool {
        let head = self.head();
        if j >= head {
            return false;
        }
        let blocks = self.capacity / self.f;
        let newest = (head - 1) / self.f;
        j / self.f + blocks > newest
    }

    pub fn readable(&self, i: usize) -> bool {
        i < self.head() && self.row(i).into_iter().all(|j| self.resident(j))
    }

    pub fn valid_range(&self) -> Option<(u64, u64)> {
        // nothing older than the last `capacity` steps can be resident
        let from = self.head().saturating_sub(self.capacity);
        let lo = (from..self.head()).find(|&i| self.readable(i))?;
        Some((lo as u64, self.head() as u64 - 1))
    }

    pub fn state(&self, i: usize) -> Vec<Frame> {
        self.row(i).into_iter().map(|j| self.frames[j].clone()).collect()
    }

    pub fn state_indices(&self, batch: usize, seed: u64) -> Vec<u64> {
        let (lo, hi) = self.valid_range().expect("non-empty");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..batch).map(|_| lo + rng.gen_range(0..hi - lo + 1)).collect()
    }

    pub fn transition_indices(&self, batch: usize, seed: u64) -> Vec<u64> {
        let (lo, hi) = self.valid_range().expect("non-empty");
        let candidates: Vec<u64> = (lo..hi)
            .filter(|&i| {
                let i = i as usize;
                self.readable(i + 1) && !(self.starts[i + 1] && !self.dones[i])
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..batch)
            .map(|_| candidates[rng.gen_range(0..candidates.len())])
            .collect()
    }

    /// Byte model with payload counted by brute-force pixel comparison of
    /// every resident non-keyframe against its block keyframe.
    pub fn model_bytes(&self, pixels: usize) -> u64 {
        let (cap, f) = (self.capacity as u64, self.f as u64);
        let d = cap / f;
        let mut payload = 0u64;
        for j in 0..self.head() {
            if j % self.f == 0 || !self.resident(j) {
                continue;
            }
            let key = &self.frames[j - j % self.f];
            let changed = key
                .pixels()
                .iter()
                .zip(self.frames[j].pixels())
                .filter(|(a, b)| a != b)
                .count();
            payload += if 4 * changed > pixels { pixels as u64 } else { 4 * changed as u64 };
        }
        pixels as u64 * d + 8 * d * (f - 1) + payload + 4 * cap * f
    }
}

/// Long trace of mixed static, drifting and noisy episodes.
pub fn mixed_trace(frames: usize, height: usize, width: usize, seed: u64) -> Trace {
    let params = GeneratorParams::new(
        GeneratorKind::Episodic {
            min_len: 1,
            max_len: 60,
            blob: 5,
            velocity: 1,
            rho: 0.02,
        },
        frames,
    )
    .with_size(height, width);
    generate(&params, seed).unwrap()
}

/// Synthetic metadata that exercises terminal and truncated episode ends.
pub fn meta_for(flags: &[bool], i: usize) -> (Vec<u8>, f64, bool) {
    let next_start = flags.get(i + 1).copied().unwrap_or(false);
    // every other episode ends by truncation rather than termination
    let done = next_start && (i % 2 == 0);
    (vec![(i % 251) as u8, (i / 251 % 256) as u8], i as f64 * 0.25, done)
}
