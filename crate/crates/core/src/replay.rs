//! Transition-level replay buffer over an [`ObservationStore`].
//!
//! Sampling is uniform with replacement and a pure function of the buffer
//! contents and the seed: a `ChaCha8Rng` seeded with `seed_from_u64(seed)`
//! draws each index with `gen_range(0..len)` over the candidate list, in
//! batch order. For states the candidates are every step of `valid_range`;
//! for transitions they are the steps `i` of `valid_range` whose successor
//! `i + 1` is also readable, excluding `i` when `i + 1` starts a new episode
//! without step `i` being terminal.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analytics::AnalyticsReport;
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::store::{oldest_resident, ObservationStore, State, StepIndex, StoreConfig, StoreRegistry};

/// Per-step data stored next to each observation.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionMeta {
    pub action: Vec<u8>,
    pub reward: f64,
    pub done: bool,
}

impl TransitionMeta {
    pub fn new(action: impl Into<Vec<u8>>, reward: f64, done: bool) -> Self {
        Self {
            action: action.into(),
            reward,
            done,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub indices: Vec<StepIndex>,
    pub states: Vec<State>,
    /// `len * action_width` bytes.
    pub actions: Vec<u8>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    pub next_states: Option<Vec<State>>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// States as one `[batch, f, H, W]` byte array.
    pub fn states_contiguous(&self) -> Vec<u8> {
        contiguous(&self.states)
    }

    pub fn next_states_contiguous(&self) -> Option<Vec<u8>> {
        self.next_states.as_deref().map(contiguous)
    }
}

fn contiguous(states: &[State]) -> Vec<u8> {
    let mut out = Vec::new();
    for state in states {
        state.write_pixels(&mut out);
    }
    out
}

#[derive(Debug)]
pub struct ReplayBuffer {
    store: Box<dyn ObservationStore>,
    action_width: usize,
    actions: Vec<u8>,
    rewards: Vec<f64>,
    dones: Vec<bool>,
    episode_starts: Vec<bool>,
}

impl ReplayBuffer {
    pub fn new(config: StoreConfig, action_width: usize) -> Result<Self> {
        Self::with_registry(&StoreRegistry::builtin(), config, action_width)
    }

    pub fn with_registry(registry: &StoreRegistry, config: StoreConfig, action_width: usize) -> Result<Self> {
        let store = registry.create(config)?;
        Ok(Self::from_store(store, action_width))
    }

    pub(crate) fn from_store(store: Box<dyn ObservationStore>, action_width: usize) -> Self {
        let cap = store.config().capacity;
        Self {
            store,
            action_width,
            actions: vec![0; cap * action_width],
            rewards: vec![0.0; cap],
            dones: vec![false; cap],
            episode_starts: vec![false; cap],
        }
    }

    pub(crate) fn restore_meta(
        &mut self,
        actions: Vec<u8>,
        rewards: Vec<f64>,
        dones: Vec<bool>,
        episode_starts: Vec<bool>,
    ) {
        self.actions = actions;
        self.rewards = rewards;
        self.dones = dones;
        self.episode_starts = episode_starts;
    }

    pub fn store(&self) -> &dyn ObservationStore {
        self.store.as_ref()
    }

    pub fn config(&self) -> &StoreConfig {
        self.store.config()
    }

    pub fn action_width(&self) -> usize {
        self.action_width
    }

    /// Steps appended so far.
    pub fn len(&self) -> u64 {
        self.store.head()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn slot(&self, step: StepIndex) -> usize {
        (step % self.config().capacity as u64) as usize
    }

    pub fn add(&mut self, frame: &Frame, meta: &TransitionMeta, episode_start: bool) -> Result<StepIndex> {
        let head = self.store.head();
        if meta.action.len() != self.action_width {
            return Err(Error::InvalidConfig(format!(
                "action has {} bytes, buffer expects {}",
                meta.action.len(),
                self.action_width
            )));
        }
        if let Some(prev) = head.checked_sub(1) {
            if self.dones[self.slot(prev)] && !episode_start {
                return Err(Error::EpisodeDiscipline(head));
            }
        }
        let step = self.store.append(frame, episode_start)?;
        let f = self.config().frame_stack;
        let slot = self.slot(step);
        if step % f as u64 == 0 && step >= self.config().capacity as u64 {
            for s in slot + 1..slot + f {
                self.actions[s * self.action_width..(s + 1) * self.action_width].fill(0);
                self.rewards[s] = 0.0;
                self.dones[s] = false;
                self.episode_starts[s] = false;
            }
        }
        self.actions[slot * self.action_width..(slot + 1) * self.action_width].copy_from_slice(&meta.action);
        self.rewards[slot] = meta.reward;
        self.dones[slot] = meta.done;
        self.episode_starts[slot] = episode_start || step == 0;
        Ok(step)
    }

    pub fn get(&self, step: StepIndex) -> Result<State> {
        self.store.get(step)
    }

    pub fn meta(&self, step: StepIndex) -> Result<TransitionMeta> {
        self.store.obs_inds(step)?;
        let slot = self.slot(step);
        Ok(TransitionMeta {
            action: self.actions[slot * self.action_width..(slot + 1) * self.action_width].to_vec(),
            reward: self.rewards[slot],
            done: self.dones[slot],
        })
    }

    pub fn is_episode_start(&self, step: StepIndex) -> Result<bool> {
        self.store.obs_inds(step)?;
        Ok(self.episode_starts[self.slot(step)])
    }

    pub fn valid_range(&self) -> Option<(StepIndex, StepIndex)> {
        self.store.valid_range()
    }

    /// Steps whose transition to `i + 1` may be sampled.
    pub fn transition_candidates(&self) -> Vec<StepIndex> {
        let Some((lo, hi)) = self.valid_range() else {
            return Vec::new();
        };
        (lo..hi)
            .filter(|&i| {
                let next = self.slot(i + 1);
                !self.episode_starts[next] || self.dones[self.slot(i)]
            })
            .collect()
    }

    pub fn sample_states(&self, batch_size: usize, seed: u64) -> Result<Batch> {
        if batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be positive".into()));
        }
        let (lo, hi) = self.valid_range().ok_or(Error::EmptyBuffer)?;
        let len = hi - lo + 1;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let indices: Vec<_> = (0..batch_size).map(|_| lo + rng.gen_range(0..len)).collect();
        self.gather(indices, false)
    }

    pub fn sample_transitions(&self, batch_size: usize, seed: u64) -> Result<Batch> {
        if batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be positive".into()));
        }
        if self.valid_range().is_none() {
            return Err(Error::EmptyBuffer);
        }
        let candidates = self.transition_candidates();
        if candidates.is_empty() {
            return Err(Error::NoValidTransitions);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let indices: Vec<_> = (0..batch_size)
            .map(|_| candidates[rng.gen_range(0..candidates.len())])
            .collect();
        self.gather(indices, true)
    }

    fn gather(&self, indices: Vec<StepIndex>, with_next: bool) -> Result<Batch> {
        let mut states = Vec::with_capacity(indices.len());
        let mut actions = Vec::with_capacity(indices.len() * self.action_width);
        let mut rewards = Vec::with_capacity(indices.len());
        let mut dones = Vec::with_capacity(indices.len());
        let mut next_states = with_next.then(|| Vec::with_capacity(indices.len()));
        for &i in &indices {
            states.push(self.store.get(i)?);
            let slot = self.slot(i);
            actions.extend_from_slice(&self.actions[slot * self.action_width..(slot + 1) * self.action_width]);
            rewards.push(self.rewards[slot]);
            dones.push(self.dones[slot]);
            if let Some(next) = next_states.as_mut() {
                next.push(self.store.get(i + 1)?);
            }
        }
        Ok(Batch {
            indices,
            states,
            actions,
            rewards,
            dones,
            next_states,
        })
    }

    pub fn stats(&self) -> AnalyticsReport {
        AnalyticsReport::measure(self.store.as_ref())
    }

    /// Metadata sections of the buffer file, in slot order.
    pub(crate) fn encode_meta(&self, out: &mut Vec<u8>) {
        crate::bytes::put_u32(out, self.action_width as u32);
        out.extend_from_slice(&self.actions);
        for &r in &self.rewards {
            crate::bytes::put_f64(out, r);
        }
        out.extend(self.dones.iter().map(|&d| d as u8));
        out.extend(self.episode_starts.iter().map(|&e| e as u8));
    }

    /// First step whose frame is still stored (may precede `valid_range`).
    pub fn oldest_resident(&self) -> StepIndex {
        let c = self.config();
        oldest_resident(self.len(), c.capacity, c.frame_stack)
    }
}
