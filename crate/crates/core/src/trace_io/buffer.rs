//! Buffer file format (`DEOBSBF1`, version 1).
//!
//! ```text
//! magic        8 bytes  "DEOBSBF1"
//! version      u32      1
//! width        u32
//! height       u32
//! f            u32
//! capacity     u32      |D|
//! head_low     u32      low and high halves of the 64-bit head
//! head_high    u32
//! mode         u32      0 = full, 1 = half, 2 = none
//! frames       full: d keyframes; half: |D| frames; none: |D| states of f frames
//! diffs        full only, d*(f-1) records in block-major order, each:
//!                u32 count; 0xFFFFFFFF = empty slot,
//!                high bit set = dense, followed by H*W pixels,
//!                otherwise count sparse entries: count x (row u8, col u8)
//!                then count x i16 values
//! obs_inds     |D| x f u32 ring-slot pointers
//! action_width u32
//! actions      |D| x action_width bytes
//! rewards      |D| x f64
//! dones        |D| x u8
//! starts       |D| x u8 episode-start flags
//! ```
//!
//! Slots whose step has been evicted are written zeroed (empty for diffs),
//! so a buffer's bytes depend only on its append history.

use std::fs;
use std::path::Path;

use crate::bytes::{put_u32, Reader};
use crate::error::{Error, Result};
use crate::replay::ReplayBuffer;
use crate::store::{StorageMode, StoreConfig, StoreRegistry};

pub const BUFFER_MAGIC: &[u8; 8] = b"DEOBSBF1";
pub const BUFFER_VERSION: u32 = 1;

pub fn write_buffer(buffer: &ReplayBuffer) -> Vec<u8> {
    let c = buffer.config();
    let head = buffer.len();
    let mut out = Vec::new();
    out.extend_from_slice(BUFFER_MAGIC);
    for v in [
        BUFFER_VERSION,
        c.width as u32,
        c.height as u32,
        c.frame_stack as u32,
        c.capacity as u32,
        head as u32,
        (head >> 32) as u32,
        c.mode.file_flag(),
    ] {
        put_u32(&mut out, v);
    }
    buffer.store().encode_sections(&mut out);
    buffer.encode_meta(&mut out);
    out
}

pub fn read_buffer(bytes: &[u8]) -> Result<ReplayBuffer> {
    read_buffer_with(&StoreRegistry::builtin(), bytes)
}

pub fn read_buffer_with(registry: &StoreRegistry, bytes: &[u8]) -> Result<ReplayBuffer> {
    let mut r = Reader::new(bytes);
    if r.take(8, "magic")? != BUFFER_MAGIC {
        return Err(Error::MalformedFile("bad buffer magic".into()));
    }
    let version = r.u32("version")?;
    if version != BUFFER_VERSION {
        return Err(Error::VersionMismatch(version));
    }
    let width = r.u32("width")? as usize;
    let height = r.u32("height")? as usize;
    let frame_stack = r.u32("frame stack")? as usize;
    let capacity = r.u32("capacity")? as usize;
    let head = r.u32("head")? as u64 | (r.u32("head")? as u64) << 32;
    let flag = r.u32("mode")?;
    let mode = StorageMode::from_file_flag(flag)
        .ok_or_else(|| Error::MalformedFile(format!("unknown mode flag {flag}")))?;
    let config = StoreConfig::new(capacity, frame_stack, height, width, mode)
        .map_err(|e| Error::MalformedFile(e.to_string()))?;

    let store = registry.decode(config, head, &mut r)?;
    let action_width = r.u32("action width")? as usize;
    let actions = r.take(capacity * action_width, "actions")?.to_vec();
    let rewards = (0..capacity).map(|_| r.f64("reward")).collect::<Result<Vec<_>>>()?;
    let dones = read_flags(&mut r, capacity, "dones")?;
    let starts = read_flags(&mut r, capacity, "episode starts")?;
    if r.remaining() != 0 {
        return Err(Error::MalformedFile(format!("{} trailing bytes", r.remaining())));
    }

    let mut buffer = ReplayBuffer::from_store(store, action_width);
    buffer.restore_meta(actions, rewards, dones, starts);
    Ok(buffer)
}

fn read_flags(r: &mut Reader<'_>, n: usize, what: &str) -> Result<Vec<bool>> {
    r.take(n, what)?
        .iter()
        .map(|&b| match b {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(Error::MalformedFile(format!("{what}: flag byte {other}"))),
        })
        .collect()
}

pub fn save_buffer(buffer: &ReplayBuffer, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, write_buffer(buffer))?;
    Ok(())
}

pub fn load_buffer(path: impl AsRef<Path>) -> Result<ReplayBuffer> {
    read_buffer(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::Frame;
    use crate::replay::TransitionMeta;

    fn sample_buffer(mode: StorageMode) -> ReplayBuffer {
        let mut buf = ReplayBuffer::new(StoreConfig::new(12, 4, 5, 6, mode).unwrap(), 3).unwrap();
        for i in 0..29u8 {
            let mut frame = Frame::zeros(5, 6).unwrap();
            frame.set((i % 5) as usize, (i % 6) as usize, i.wrapping_mul(37));
            if i % 10 == 3 {
                frame.pixels_mut().fill(i);
            }
            let done = i % 8 == 7;
            buf.add(&frame, &TransitionMeta::new(vec![i, 1, 2], i as f64, done), i % 8 == 0)
                .unwrap();
        }
        buf
    }

    #[test]
    fn roundtrip_every_mode() {
        for mode in StorageMode::ALL {
            let buf = sample_buffer(mode);
            let bytes = write_buffer(&buf);
            let back = read_buffer(&bytes).unwrap();
            assert_eq!(write_buffer(&back), bytes, "{mode}");
            assert_eq!(back.valid_range(), buf.valid_range());
            let (lo, hi) = buf.valid_range().unwrap();
            for i in lo..=hi {
                assert_eq!(back.get(i).unwrap(), buf.get(i).unwrap());
                assert_eq!(back.meta(i).unwrap(), buf.meta(i).unwrap());
            }
            assert_eq!(back.store().memory_bytes(), buf.store().memory_bytes());
            assert_eq!(back.sample_transitions(16, 9).unwrap(), buf.sample_transitions(16, 9).unwrap());
        }
    }

    #[test]
    fn header_layout() {
        let buf = sample_buffer(StorageMode::Half);
        let bytes = write_buffer(&buf);
        assert_eq!(&bytes[..8], b"DEOBSBF1");
        let word = |i: usize| u32::from_le_bytes(bytes[8 + 4 * i..12 + 4 * i].try_into().unwrap());
        assert_eq!(
            (0..8).map(word).collect::<Vec<_>>(),
            vec![1, 6, 5, 4, 12, 29, 0, 1]
        );
    }

    #[test]
    fn version_and_truncation_errors() {
        let bytes = write_buffer(&sample_buffer(StorageMode::Full));
        let mut v2 = bytes.clone();
        v2[8..12].copy_from_slice(&2u32.to_le_bytes());
        assert!(matches!(read_buffer(&v2), Err(Error::VersionMismatch(2))));

        // cut inside the diff section: header 40 + 3 keyframes of 30 bytes
        let cut = &bytes[..40 + 90 + 10];
        assert!(matches!(read_buffer(cut), Err(Error::MalformedFile(_))));
        assert!(matches!(read_buffer(&bytes[..bytes.len() - 1]), Err(Error::MalformedFile(_))));
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(read_buffer(&extra).is_err());
        let mut bad_mode = bytes;
        bad_mode[36..40].copy_from_slice(&7u32.to_le_bytes());
        assert!(read_buffer(&bad_mode).is_err());
    }

    #[test]
    fn continues_appending_after_load() {
        for mode in StorageMode::ALL {
            let mut a = sample_buffer(mode);
            let mut b = read_buffer(&write_buffer(&a)).unwrap();
            for i in 0..7u8 {
                let frame = Frame::filled(5, 6, i * 3).unwrap();
                let meta = TransitionMeta::new(vec![0, 0, i], 0.0, false);
                a.add(&frame, &meta, i == 0).unwrap();
                b.add(&frame, &meta, i == 0).unwrap();
            }
            assert_eq!(write_buffer(&a), write_buffer(&b));
        }
    }
}
