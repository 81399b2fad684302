//! Closed-form memory model and compression factor of the keyframe/diff
//! layout, plus measured reports for live stores.
//!
//! With `P = H*W` pixels per frame, `|D|` steps, frame stack `f`,
//! `d = |D| / f` keyframes and `N` stored sparse entries, the compressed
//! layout costs
//!
//! ```text
//! P*d + 8*d*(f-1) + 4*N + 4*|D|*f      bytes
//! ```
//!
//! against `P*|D|*f` bytes for raw frame stacks.

use std::fmt;

use crate::error::{Error, Result};
use crate::store::{ObservationStore, StorageMode};

/// Pixels in an 84x84 frame, the size the simplified factor assumes.
pub const PIXELS_84: usize = 84 * 84;

fn blocks(capacity: usize, f: usize) -> Result<usize> {
    if f == 0 || capacity % f != 0 {
        return Err(Error::InvalidConfig(format!(
            "capacity {capacity} is not a multiple of frame stack {f}"
        )));
    }
    Ok(capacity / f)
}

/// Model bytes of the compressed layout for `entries` sparse entries.
pub fn model_bytes(pixels_per_image: usize, d: usize, f: usize, entries: u64, capacity: usize) -> Result<u64> {
    if f == 0 || capacity != d * f {
        return Err(Error::InvalidConfig(format!(
            "capacity {capacity} != d*f = {d}*{f}"
        )));
    }
    let (p, d, f, cap) = (pixels_per_image as u64, d as u64, f as u64, capacity as u64);
    Ok(p * d + 8 * d * (f - 1) + 4 * entries + 4 * cap * f)
}

/// Uncompressed bytes over [`model_bytes`]; `entries` may be fractional.
pub fn compression_factor(pixels_per_image: usize, capacity: usize, f: usize, entries: f64) -> Result<f64> {
    let d = blocks(capacity, f)?;
    if !(entries >= 0.0) {
        return Err(Error::InvalidConfig(format!("negative entry count {entries}")));
    }
    let (p, d, ff, cap) = (pixels_per_image as f64, d as f64, f as f64, capacity as f64);
    let model = p * d + 8.0 * d * (ff - 1.0) + 4.0 * entries + 4.0 * cap * ff;
    if model <= 0.0 {
        return Err(Error::InvalidConfig("model size must be positive".into()));
    }
    Ok(p * cap * ff / model)
}

/// Factor at mean density `phi` (fraction of pixels stored per diff), with
/// `N = d*(f-1)*P*phi`. Independent of `|D|`.
pub fn factor_at_density(pixels_per_image: usize, f: usize, phi: f64) -> Result<f64> {
    let n = pixels_per_image as f64 * phi;
    compression_factor(pixels_per_image, f, f, (f as f64 - 1.0) * n)
}

/// The simplified 84x84 factor `1764f / ((1762 - n)/f + 2 + n)`, evaluated
/// as written.
///
/// This form drops the pointer-row term: substituting `d = |D|/f` and
/// `N = d(f-1)n` into [`compression_factor`] with `P = 7056` gives
/// `1764f / ((1762 - n)/f + 2 + n + f)`. The two therefore satisfy
/// `1764f / exact - 1764f / simplified == f`, i.e. a `4f` gap in the
/// unscaled per-step denominator. See [`simplified_gap`].
pub fn simplified_factor(f: f64, n: f64) -> f64 {
    1764.0 * f / ((1762.0 - n) / f + 2.0 + n)
}

/// Per-step denominator gap `7056f/exact - 7056f/simplified`, which equals `4f`.
pub fn simplified_gap(f: usize, n: f64) -> Result<f64> {
    let exact = factor_at_density(PIXELS_84, f, n / PIXELS_84 as f64)?;
    let simple = simplified_factor(f as f64, n);
    let num = PIXELS_84 as f64 * f as f64;
    Ok(num / exact - num / simple)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub frame_stack: usize,
    pub phi: f64,
    pub factor: f64,
}

/// Factor grid, row-major by frame stack then density.
pub fn sweep(f_values: &[usize], phi_values: &[f64], pixels_per_image: usize) -> Result<Vec<SweepRow>> {
    if f_values.is_empty() || phi_values.is_empty() {
        return Err(Error::InvalidConfig("sweep grids must be non-empty".into()));
    }
    let mut rows = Vec::with_capacity(f_values.len() * phi_values.len());
    for &f in f_values {
        for &phi in phi_values {
            if !(0.0..=1.0).contains(&phi) {
                return Err(Error::InvalidConfig(format!("phi {phi} outside [0, 1]")));
            }
            rows.push(SweepRow {
                frame_stack: f,
                phi,
                factor: factor_at_density(pixels_per_image, f, phi)?,
            });
        }
    }
    Ok(rows)
}

/// Measured memory statistics of a store.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalyticsReport {
    pub mode: StorageMode,
    /// `|D|`
    pub capacity: usize,
    /// `d = |D| / f`
    pub blocks: usize,
    pub frame_stack: usize,
    pub pixels_per_image: usize,
    pub steps_written: u64,
    /// Resident sparse entries, `N`.
    pub sparse_entries: u64,
    pub dense_records: u64,
    pub compressed_frames: u64,
    /// Diff payload bytes, dense records at `H*W` each.
    pub payload_bytes: u64,
    /// Mean payload per compressed frame in 4-byte entries.
    pub n_mean: f64,
    pub phi: f64,
    pub model_bytes: u64,
    pub uncompressed_bytes: u64,
    pub factor: f64,
}

impl AnalyticsReport {
    pub fn measure(store: &dyn ObservationStore) -> Self {
        let c = store.config();
        let stats = store.payload_stats();
        let mem = store.memory_bytes();
        let equivalent_entries = stats.payload_bytes as f64 / 4.0;
        let n_mean = if stats.compressed_frames == 0 {
            0.0
        } else {
            equivalent_entries / stats.compressed_frames as f64
        };
        let uncompressed = c.uncompressed_bytes();
        Self {
            mode: c.mode,
            capacity: c.capacity,
            blocks: c.blocks(),
            frame_stack: c.frame_stack,
            pixels_per_image: c.pixels_per_frame(),
            steps_written: store.head(),
            sparse_entries: stats.sparse_entries,
            dense_records: stats.dense_records,
            compressed_frames: stats.compressed_frames,
            payload_bytes: stats.payload_bytes,
            n_mean,
            phi: n_mean / c.pixels_per_frame() as f64,
            model_bytes: mem.total_bytes,
            uncompressed_bytes: uncompressed,
            factor: uncompressed as f64 / mem.total_bytes as f64,
        }
    }

    pub const CSV_HEADER: &'static str = "mode,capacity,d,f,pixels,steps,N,dense,compressed_frames,payload_bytes,n,phi,model_bytes,uncompressed_bytes,factor";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{:.6},{:.6},{},{},{:.6}",
            self.mode,
            self.capacity,
            self.blocks,
            self.frame_stack,
            self.pixels_per_image,
            self.steps_written,
            self.sparse_entries,
            self.dense_records,
            self.compressed_frames,
            self.payload_bytes,
            self.n_mean,
            self.phi,
            self.model_bytes,
            self.uncompressed_bytes,
            self.factor
        )
    }
}

impl fmt::Display for AnalyticsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "mode               {}", self.mode)?;
        writeln!(f, "capacity |D|       {}", self.capacity)?;
        writeln!(f, "keyframes d        {}", self.blocks)?;
        writeln!(f, "frame stack f      {}", self.frame_stack)?;
        writeln!(f, "steps written      {}", self.steps_written)?;
        writeln!(f, "sparse entries N   {}", self.sparse_entries)?;
        writeln!(f, "dense records      {}", self.dense_records)?;
        writeln!(f, "mean entries n     {:.3}", self.n_mean)?;
        writeln!(f, "phi                {:.6}", self.phi)?;
        writeln!(f, "uncompressed bytes {}", self.uncompressed_bytes)?;
        writeln!(f, "model bytes        {}", self.model_bytes)?;
        write!(f, "compression factor {:.4}", self.factor)
    }
}
