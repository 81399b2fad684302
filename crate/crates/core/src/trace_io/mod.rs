//! File formats and synthetic traces.
//!
//! Both formats use little-endian fixed-width integers.
//!
//! Trace file (`DEOBSTR1`):
//!
//! ```text
//! magic        8 bytes  "DEOBSTR1"
//! width        u32
//! height       u32
//! frame_count  u32      >= 1
//! episodes     u32      >= 1
//! starts       episodes x u32, strictly increasing, first is 0
//! frames       frame_count x (height*width) bytes, row-major
//! ```
//!
//! Buffer file (`DEOBSBF1`): see [`buffer`].

mod buffer;
mod generate;

use std::fs;
use std::path::Path;

pub use buffer::{load_buffer, read_buffer, read_buffer_with, save_buffer, write_buffer, BUFFER_MAGIC, BUFFER_VERSION};
pub use generate::{generate, GeneratorKind, GeneratorParams};

use crate::bytes::{put_u32, Reader};
use crate::error::{Error, Result};
use crate::frame::{check_dims, Frame};
use crate::replay::{ReplayBuffer, TransitionMeta};
use crate::store::StepIndex;

pub const TRACE_MAGIC: &[u8; 8] = b"DEOBSTR1";
const TRACE_HEADER_BYTES: usize = 24;

/// A recorded stream of frames with episode boundaries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    height: usize,
    width: usize,
    frames: Vec<Frame>,
    episode_starts: Vec<StepIndex>,
}

impl Trace {
    pub fn new(height: usize, width: usize, frames: Vec<Frame>, episode_starts: Vec<StepIndex>) -> Result<Self> {
        check_dims(height, width)?;
        if frames.is_empty() {
            return Err(Error::InvalidParams("trace needs at least one frame".into()));
        }
        for frame in &frames {
            frame.expect_shape(height, width)?;
        }
        if episode_starts.first() != Some(&0)
            || episode_starts.windows(2).any(|w| w[0] >= w[1])
            || episode_starts.last().is_some_and(|&s| s >= frames.len() as u64)
        {
            return Err(Error::InvalidParams(
                "episode starts must be strictly increasing, begin at 0 and lie within the trace".into(),
            ));
        }
        Ok(Self {
            height,
            width,
            frames,
            episode_starts,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
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

    pub fn episode_starts(&self) -> &[StepIndex] {
        &self.episode_starts
    }

    /// Per-step episode-start flags.
    pub fn start_flags(&self) -> Vec<bool> {
        let mut flags = vec![false; self.frames.len()];
        for &s in &self.episode_starts {
            flags[s as usize] = true;
        }
        flags
    }

    /// Metadata used when a trace is replayed into a buffer: a one-byte
    /// action `step mod 256`, zero reward, and `done` on the last step of
    /// every episode except the final one.
    pub fn synthetic_meta(&self, step: usize, next_is_start: bool) -> TransitionMeta {
        TransitionMeta::new(vec![(step % 256) as u8], 0.0, next_is_start)
    }

    /// Appends every frame of the trace to `buffer` with
    /// [`synthetic_meta`](Self::synthetic_meta).
    pub fn replay_into(&self, buffer: &mut ReplayBuffer) -> Result<()> {
        let flags = self.start_flags();
        for (i, frame) in self.frames.iter().enumerate() {
            let next_is_start = flags.get(i + 1).copied().unwrap_or(false);
            buffer.add(frame, &self.synthetic_meta(i, next_is_start), flags[i])?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let px = self.height * self.width;
        let mut out =
            Vec::with_capacity(TRACE_HEADER_BYTES + 4 * self.episode_starts.len() + px * self.frames.len());
        out.extend_from_slice(TRACE_MAGIC);
        put_u32(&mut out, self.width as u32);
        put_u32(&mut out, self.height as u32);
        put_u32(&mut out, self.frames.len() as u32);
        put_u32(&mut out, self.episode_starts.len() as u32);
        for &s in &self.episode_starts {
            put_u32(&mut out, s as u32);
        }
        for frame in &self.frames {
            out.extend_from_slice(frame.pixels());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        if r.take(8, "magic")? != TRACE_MAGIC {
            return Err(Error::MalformedFile("bad trace magic".into()));
        }
        let width = r.u32("width")? as usize;
        let height = r.u32("height")? as usize;
        let frame_count = r.u32("frame count")? as usize;
        let episodes = r.u32("episode count")? as usize;
        check_dims(height, width).map_err(|e| Error::MalformedFile(e.to_string()))?;
        let expected = (TRACE_HEADER_BYTES as u128)
            + 4 * episodes as u128
            + (frame_count as u128) * (height * width) as u128;
        if bytes.len() as u128 != expected {
            return Err(Error::MalformedFile(format!(
                "trace is {} bytes, header implies {expected}",
                bytes.len()
            )));
        }
        let starts = (0..episodes)
            .map(|_| r.u32("episode start").map(u64::from))
            .collect::<Result<Vec<_>>>()?;
        let frames = crate::store::read_frames(&mut r, frame_count, height, width)?;
        Self::new(height, width, frames, starts).map_err(|e| Error::MalformedFile(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

pub fn write_trace(trace: &Trace, destination: &mut impl std::io::Write) -> Result<()> {
    destination.write_all(&trace.to_bytes())?;
    Ok(())
}

pub fn read_trace(source: &mut impl std::io::Read) -> Result<Trace> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    Trace::from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_frames() -> Trace {
        Trace::new(
            84,
            84,
            vec![Frame::zeros(84, 84).unwrap(), Frame::filled(84, 84, 3).unwrap()],
            vec![0],
        )
        .unwrap()
    }

    #[test]
    fn two_frame_trace_size() {
        let bytes = two_frames().to_bytes();
        assert_eq!(bytes.len(), 14140);
        assert_eq!(&bytes[..8], b"DEOBSTR1");
        assert_eq!(Trace::from_bytes(&bytes).unwrap(), two_frames());
    }

    #[test]
    fn rejects_degenerate_and_corrupt_input() {
        assert!(Trace::new(84, 84, vec![], vec![0]).is_err());
        assert!(Trace::new(2, 2, vec![Frame::zeros(2, 2).unwrap()], vec![]).is_err());
        assert!(Trace::new(2, 2, vec![Frame::zeros(2, 2).unwrap(); 3], vec![0, 2, 1]).is_err());
        assert!(Trace::new(2, 2, vec![Frame::zeros(2, 2).unwrap(); 3], vec![0, 3]).is_err());

        let mut bytes = two_frames().to_bytes();
        bytes[0] = b'X';
        assert!(matches!(Trace::from_bytes(&bytes), Err(Error::MalformedFile(_))));
        let bytes = two_frames().to_bytes();
        assert!(Trace::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(Trace::from_bytes(&[]).is_err());

        // header-only file with zero frames
        let mut empty = TRACE_MAGIC.to_vec();
        for v in [84u32, 84, 0, 1, 0] {
            empty.extend_from_slice(&v.to_le_bytes());
        }
        assert_eq!(empty.len(), 28);
        assert!(matches!(Trace::from_bytes(&empty), Err(Error::MalformedFile(_))));
    }

    #[test]
    fn io_wrappers_roundtrip() {
        let t = two_frames();
        let mut buf = Vec::new();
        write_trace(&t, &mut buf).unwrap();
        assert_eq!(read_trace(&mut buf.as_slice()).unwrap(), t);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn trace_bytes_roundtrip(
            h in 1usize..12, w in 1usize..12,
            pixels in proptest::collection::vec(any::<u8>(), 1..600),
            breaks in proptest::collection::btree_set(1u64..50, 0..5),
        ) {
            let px = h * w;
            let n = (pixels.len() / px).max(1);
            let frames: Vec<Frame> = (0..n)
                .map(|i| Frame::new(h, w, (0..px).map(|j| pixels[(i * px + j) % pixels.len()]).collect()).unwrap())
                .collect();
            let mut starts = vec![0];
            starts.extend(breaks.into_iter().filter(|&b| b < n as u64));
            let t = Trace::new(h, w, frames, starts).unwrap();
            let bytes = t.to_bytes();
            let back = Trace::from_bytes(&bytes).unwrap();
            prop_assert_eq!(back.to_bytes(), bytes);
            prop_assert_eq!(back, t);
        }
    }
}
