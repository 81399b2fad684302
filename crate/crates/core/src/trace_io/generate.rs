//! Deterministic synthetic traces.
//!
//! - `Static`: one random frame repeated.
//! - `Drift`: a square blob bouncing diagonally over a fixed random
//!   background. Consecutive frames differ in at most `2 * blob^2` pixels,
//!   and so does any pair of frames in the trace.
//! - `Noise`: each pixel independently changes with probability `rho` per
//!   step, always to a different value.
//! - `Episodic`: episodes of uniformly random length, each independently one
//!   of the three kinds above with a fresh background.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::frame::{check_dims, Frame};

use super::Trace;

#[derive(Clone, Debug, PartialEq)]
pub enum GeneratorKind {
    Static,
    Drift { blob: usize, velocity: usize },
    Noise { rho: f64 },
    Episodic {
        min_len: usize,
        max_len: usize,
        blob: usize,
        velocity: usize,
        rho: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorParams {
    pub kind: GeneratorKind,
    pub frames: usize,
    pub height: usize,
    pub width: usize,
}

impl GeneratorParams {
    pub fn new(kind: GeneratorKind, frames: usize) -> Self {
        Self {
            kind,
            frames,
            height: 84,
            width: 84,
        }
    }

    pub fn with_size(mut self, height: usize, width: usize) -> Self {
        self.height = height;
        self.width = width;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::InvalidParams(msg));
        check_dims(self.height, self.width).map_err(|e| Error::InvalidParams(e.to_string()))?;
        if self.frames == 0 || self.frames > u32::MAX as usize {
            return invalid(format!("frame count {} out of range", self.frames));
        }
        let side = self.height.min(self.width);
        let check_blob = |blob: usize, velocity: usize| {
            if blob == 0 || blob > side {
                return invalid(format!("blob size {blob} must be in 1..={side}"));
            }
            if velocity > side {
                return invalid(format!("velocity {velocity} exceeds image side {side}"));
            }
            Ok(())
        };
        let check_rho = |rho: f64| {
            if !(0.0..=1.0).contains(&rho) {
                return invalid(format!("rho {rho} outside [0, 1]"));
            }
            Ok(())
        };
        match self.kind {
            GeneratorKind::Static => Ok(()),
            GeneratorKind::Drift { blob, velocity } => check_blob(blob, velocity),
            GeneratorKind::Noise { rho } => check_rho(rho),
            GeneratorKind::Episodic {
                min_len,
                max_len,
                blob,
                velocity,
                rho,
            } => {
                if min_len == 0 || min_len > max_len {
                    return invalid(format!("episode length range {min_len}..={max_len} is empty"));
                }
                check_blob(blob, velocity)?;
                check_rho(rho)
            }
        }
    }

    /// Expected fraction of pixels changing per step, where the mode defines
    /// one. For `Drift` this is the upper bound `2 * blob^2 / (H*W)`.
    pub fn expected_change_density(&self) -> Option<f64> {
        let px = (self.height * self.width) as f64;
        match self.kind {
            GeneratorKind::Static => Some(0.0),
            GeneratorKind::Drift { blob, .. } => Some((2.0 * (blob * blob) as f64 / px).min(1.0)),
            GeneratorKind::Noise { rho } => Some(rho),
            GeneratorKind::Episodic { .. } => None,
        }
    }
}

pub fn generate(params: &GeneratorParams, seed: u64) -> Result<Trace> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, w) = (params.height, params.width);
    let mut frames = Vec::with_capacity(params.frames);
    let mut starts = vec![0u64];
    match params.kind {
        GeneratorKind::Static => segment_static(&mut rng, h, w, params.frames, &mut frames),
        GeneratorKind::Drift { blob, velocity } => {
            segment_drift(&mut rng, h, w, params.frames, blob, velocity, &mut frames)
        }
        GeneratorKind::Noise { rho } => segment_noise(&mut rng, h, w, params.frames, rho, &mut frames),
        GeneratorKind::Episodic {
            min_len,
            max_len,
            blob,
            velocity,
            rho,
        } => {
            while frames.len() < params.frames {
                if !frames.is_empty() {
                    starts.push(frames.len() as u64);
                }
                let len = rng.gen_range(min_len..=max_len).min(params.frames - frames.len());
                match rng.gen_range(0..3) {
                    0 => segment_static(&mut rng, h, w, len, &mut frames),
                    1 => segment_drift(&mut rng, h, w, len, blob, velocity, &mut frames),
                    _ => segment_noise(&mut rng, h, w, len, rho, &mut frames),
                }
            }
        }
    }
    Trace::new(h, w, frames, starts)
}

fn random_frame(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Frame {
    let mut pixels = vec![0u8; h * w];
    rng.fill(pixels.as_mut_slice());
    Frame::new(h, w, pixels).expect("dimensions validated")
}

fn segment_static(rng: &mut ChaCha8Rng, h: usize, w: usize, len: usize, out: &mut Vec<Frame>) {
    let frame = random_frame(rng, h, w);
    out.extend(std::iter::repeat_n(frame, len));
}

fn segment_drift(
    rng: &mut ChaCha8Rng,
    h: usize,
    w: usize,
    len: usize,
    blob: usize,
    velocity: usize,
    out: &mut Vec<Frame>,
) {
    let background = random_frame(rng, h, w);
    let color: u8 = rng.gen();
    let (max_r, max_c) = ((h - blob) as i64, (w - blob) as i64);
    let mut r = rng.gen_range(0..=max_r);
    let mut c = rng.gen_range(0..=max_c);
    let v = velocity as i64;
    let mut vr = if rng.gen() { v } else { -v };
    let mut vc = if rng.gen() { v } else { -v };
    for _ in 0..len {
        let mut frame = background.clone();
        for dr in 0..blob {
            for dc in 0..blob {
                frame.set(r as usize + dr, c as usize + dc, color);
            }
        }
        out.push(frame);
        (r, vr) = bounce(r, vr, max_r);
        (c, vc) = bounce(c, vc, max_c);
    }
}

fn bounce(pos: i64, vel: i64, max: i64) -> (i64, i64) {
    let next = pos + vel;
    if (0..=max).contains(&next) {
        (next, vel)
    } else {
        let back = pos - vel;
        if (0..=max).contains(&back) {
            (back, -vel)
        } else {
            (pos, -vel)
        }
    }
}

fn segment_noise(rng: &mut ChaCha8Rng, h: usize, w: usize, len: usize, rho: f64, out: &mut Vec<Frame>) {
    if len == 0 {
        return;
    }
    let mut frame = random_frame(rng, h, w);
    out.push(frame.clone());
    for _ in 1..len {
        for px in frame.pixels_mut() {
            if rng.gen_bool(rho) {
                *px = px.wrapping_add(rng.gen_range(1..=255));
            }
        }
        out.push(frame.clone());
    }
}
