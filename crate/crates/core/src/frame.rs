//! Grayscale frames and the differential encoding between two of them.
//!
//! A [`DiffRecord`] stores `target - base` as a coordinate list of nonzero
//! pixel differences: one `(row, col)` pair of 8-bit coordinates and one
//! 16-bit signed value per entry, so each entry costs 4 bytes. When the
//! coordinate list would be larger than the raw frame (`4n > H*W`), the
//! record falls back to a verbatim copy of the target.

use crate::error::{Error, Result};

/// Largest supported image side. Coordinates are stored as `u8`.
pub const MAX_SIDE: usize = 256;

/// One 8-bit grayscale observation, row-major.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Frame {
    height: usize,
    width: usize,
    pixels: Vec<u8>,
}

impl Frame {
    pub fn new(height: usize, width: usize, pixels: Vec<u8>) -> Result<Self> {
        check_dims(height, width)?;
        if pixels.len() != height * width {
            return Err(Error::InvalidConfig(format!(
                "frame {height}x{width} needs {} pixels, got {}",
                height * width,
                pixels.len()
            )));
        }
        Ok(Self {
            height,
            width,
            pixels,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Result<Self> {
        Self::new(height, width, vec![0; height * width])
    }

    pub fn filled(height: usize, width: usize, value: u8) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: u8) {
        self.pixels[row * self.width + col] = value;
    }

    pub fn same_shape(&self, other: &Frame) -> bool {
        self.height == other.height && self.width == other.width
    }

    pub(crate) fn expect_shape(&self, height: usize, width: usize) -> Result<()> {
        if self.height != height || self.width != width {
            return Err(Error::DimensionMismatch {
                expected_height: height,
                expected_width: width,
                height: self.height,
                width: self.width,
            });
        }
        Ok(())
    }
}

pub(crate) fn check_dims(height: usize, width: usize) -> Result<()> {
    if height == 0 || width == 0 || height > MAX_SIDE || width > MAX_SIDE {
        return Err(Error::InvalidConfig(format!(
            "frame dimensions {height}x{width} outside 1..={MAX_SIDE}"
        )));
    }
    Ok(())
}

/// Encoded difference of a frame against a base frame.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DiffRecord {
    /// Nonzero differences, sorted row-major, no duplicate coordinates.
    Sparse { inds: Vec<(u8, u8)>, vals: Vec<i16> },
    /// Full copy of the target frame's pixels.
    Dense(Vec<u8>),
}

impl DiffRecord {
    pub fn empty() -> Self {
        DiffRecord::Sparse {
            inds: Vec::new(),
            vals: Vec::new(),
        }
    }

    pub fn is_dense(&self) -> bool {
        matches!(self, DiffRecord::Dense(_))
    }

    /// Number of stored sparse entries; zero for dense records.
    pub fn entries(&self) -> usize {
        match self {
            DiffRecord::Sparse { inds, .. } => inds.len(),
            DiffRecord::Dense(_) => 0,
        }
    }

    /// Model byte cost: `4n` for sparse, `H*W` for dense.
    pub fn payload_bytes(&self) -> usize {
        match self {
            DiffRecord::Sparse { inds, .. } => 4 * inds.len(),
            DiffRecord::Dense(pixels) => pixels.len(),
        }
    }

    /// Checks the structural invariants against a frame shape.
    pub fn validate(&self, height: usize, width: usize) -> Result<()> {
        match self {
            DiffRecord::Sparse { inds, vals } => {
                if inds.len() != vals.len() {
                    return Err(Error::CorruptDiff(format!(
                        "{} coordinates but {} values",
                        inds.len(),
                        vals.len()
                    )));
                }
                if 4 * inds.len() > height * width {
                    return Err(Error::CorruptDiff(format!(
                        "{} sparse entries exceed the dense threshold",
                        inds.len()
                    )));
                }
                let mut prev: Option<usize> = None;
                for (&(row, col), &val) in inds.iter().zip(vals) {
                    let (row, col) = (row as usize, col as usize);
                    if row >= height || col >= width {
                        return Err(Error::CorruptDiff(format!(
                            "coordinate ({row}, {col}) outside {height}x{width}"
                        )));
                    }
                    let pos = row * width + col;
                    if prev.is_some_and(|p| pos <= p) {
                        return Err(Error::CorruptDiff(
                            "entries not strictly row-major ascending".into(),
                        ));
                    }
                    prev = Some(pos);
                    if val == 0 || !(-255..=255).contains(&val) {
                        return Err(Error::CorruptDiff(format!("entry value {val} out of range")));
                    }
                }
                Ok(())
            }
            DiffRecord::Dense(pixels) => {
                if pixels.len() != height * width {
                    return Err(Error::CorruptDiff(format!(
                        "dense record has {} pixels, expected {}",
                        pixels.len(),
                        height * width
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Encodes `target - base`.
pub fn encode_diff(base: &Frame, target: &Frame) -> Result<DiffRecord> {
    target.expect_shape(base.height, base.width)?;
    let width = base.width;
    let total = base.len();

    let mut inds = Vec::new();
    let mut vals = Vec::new();
    for (pos, (&b, &t)) in base.pixels.iter().zip(&target.pixels).enumerate() {
        if b != t {
            // once past the threshold the sparse form can never win
            if 4 * (inds.len() + 1) > total {
                return Ok(DiffRecord::Dense(target.pixels.clone()));
            }
            inds.push(((pos / width) as u8, (pos % width) as u8));
            vals.push(t as i16 - b as i16);
        }
    }
    Ok(DiffRecord::Sparse { inds, vals })
}

/// Reconstructs a frame from its base and diff: `base + diff`.
pub fn decode_diff(base: &Frame, diff: &DiffRecord) -> Result<Frame> {
    match diff {
        DiffRecord::Dense(pixels) => {
            if pixels.len() != base.len() {
                return Err(Error::CorruptDiff(format!(
                    "dense record has {} pixels, expected {}",
                    pixels.len(),
                    base.len()
                )));
            }
            Ok(Frame {
                height: base.height,
                width: base.width,
                pixels: pixels.clone(),
            })
        }
        DiffRecord::Sparse { inds, vals } => {
            if inds.len() != vals.len() {
                return Err(Error::CorruptDiff("coordinate/value length mismatch".into()));
            }
            let mut out = base.clone();
            for (&(row, col), &val) in inds.iter().zip(vals) {
                let (row, col) = (row as usize, col as usize);
                if row >= base.height || col >= base.width {
                    return Err(Error::CorruptDiff(format!(
                        "coordinate ({row}, {col}) outside {}x{}",
                        base.height, base.width
                    )));
                }
                let idx = row * base.width + col;
                let value = out.pixels[idx] as i32 + val as i32;
                if !(0..=255).contains(&value) {
                    return Err(Error::CorruptDiff(format!(
                        "reconstructed value {value} at ({row}, {col}) outside 0..=255"
                    )));
                }
                out.pixels[idx] = value as u8;
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frame(h: usize, w: usize, px: &[(usize, usize, u8)]) -> Frame {
        let mut f = Frame::zeros(h, w).unwrap();
        for &(r, c, v) in px {
            f.set(r, c, v);
        }
        f
    }

    #[test]
    fn identical_frames_give_empty_sparse() {
        let f = frame(84, 84, &[(3, 3, 9), (80, 1, 200)]);
        let d = encode_diff(&f, &f).unwrap();
        assert_eq!(d, DiffRecord::empty());
        assert_eq!(d.payload_bytes(), 0);
    }

    #[test]
    fn moving_pixel_gives_two_entries() {
        let a = frame(84, 84, &[(10, 10, 200)]);
        let b = frame(84, 84, &[(11, 10, 200)]);
        let d = encode_diff(&a, &b).unwrap();
        assert_eq!(
            d,
            DiffRecord::Sparse {
                inds: vec![(10, 10), (11, 10)],
                vals: vec![-200, 200],
            }
        );
        assert_eq!(d.payload_bytes(), 8);
    }

    #[test]
    fn full_change_falls_back_to_dense() {
        let a = Frame::zeros(84, 84).unwrap();
        let b = Frame::filled(84, 84, 1).unwrap();
        let d = encode_diff(&a, &b).unwrap();
        assert!(d.is_dense());
        assert_eq!(d.payload_bytes(), 7056);
        assert_eq!(decode_diff(&a, &d).unwrap(), b);
    }

    #[test]
    fn dense_threshold_is_exact() {
        // 4x4 image: 4 changes -> 16 bytes == 16 pixels stays sparse, 5 goes dense
        let a = Frame::zeros(4, 4).unwrap();
        let mut b = a.clone();
        for i in 0..4 {
            b.pixels_mut()[i] = 7;
        }
        assert!(!encode_diff(&a, &b).unwrap().is_dense());
        b.pixels_mut()[4] = 7;
        assert!(encode_diff(&a, &b).unwrap().is_dense());
    }

    #[test]
    fn payload_bytes_model() {
        let sparse = DiffRecord::Sparse {
            inds: vec![(0, 0); 100],
            vals: vec![1; 100],
        };
        assert_eq!(sparse.payload_bytes(), 400);
        assert_eq!(DiffRecord::Dense(vec![0; 7056]).payload_bytes(), 7056);
    }

    #[test]
    fn decode_single_entry() {
        let base = Frame::zeros(8, 8).unwrap();
        let d = DiffRecord::Sparse {
            inds: vec![(3, 4)],
            vals: vec![17],
        };
        assert_eq!(decode_diff(&base, &d).unwrap(), frame(8, 8, &[(3, 4, 17)]));
        assert_eq!(decode_diff(&base, &DiffRecord::empty()).unwrap(), base);
    }

    #[test]
    fn mismatched_dimensions_rejected() {
        let a = Frame::zeros(8, 8).unwrap();
        let b = Frame::zeros(8, 9).unwrap();
        assert!(matches!(
            encode_diff(&a, &b),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn corrupt_records_rejected_on_decode() {
        let base = Frame::zeros(8, 8).unwrap();
        let out_of_bounds = DiffRecord::Sparse {
            inds: vec![(8, 0)],
            vals: vec![1],
        };
        assert!(matches!(
            decode_diff(&base, &out_of_bounds),
            Err(Error::CorruptDiff(_))
        ));
        let underflow = DiffRecord::Sparse {
            inds: vec![(0, 0)],
            vals: vec![-1],
        };
        assert!(matches!(
            decode_diff(&base, &underflow),
            Err(Error::CorruptDiff(_))
        ));
        assert!(decode_diff(&base, &DiffRecord::Dense(vec![0; 3])).is_err());
    }

    #[test]
    fn validate_catches_ordering_and_zero_values() {
        let unsorted = DiffRecord::Sparse {
            inds: vec![(1, 0), (0, 5)],
            vals: vec![1, 1],
        };
        assert!(unsorted.validate(8, 8).is_err());
        let zero = DiffRecord::Sparse {
            inds: vec![(0, 0)],
            vals: vec![0],
        };
        assert!(zero.validate(8, 8).is_err());
    }

    #[test]
    fn oversized_frames_rejected() {
        assert!(Frame::zeros(257, 4).is_err());
        assert!(Frame::zeros(256, 256).is_ok());
        assert!(Frame::new(2, 2, vec![0; 3]).is_err());
    }

    fn frame_pair() -> impl Strategy<Value = (Frame, Frame)> {
        (1usize..=24, 1usize..=24, 0.0f64..=1.0).prop_flat_map(|(h, w, p)| {
            (
                proptest::collection::vec(any::<u8>(), h * w),
                proptest::collection::vec((proptest::bool::weighted(p), any::<u8>()), h * w),
            )
                .prop_map(move |(a, changes)| {
                    let b = a
                        .iter()
                        .zip(&changes)
                        .map(|(&x, &(flip, y))| if flip { y } else { x })
                        .collect();
                    (Frame::new(h, w, a).unwrap(), Frame::new(h, w, b).unwrap())
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn roundtrip_and_size_cap((a, b) in frame_pair()) {
            let d = encode_diff(&a, &b).unwrap();
            prop_assert_eq!(decode_diff(&a, &d).unwrap(), b.clone());
            prop_assert!(d.payload_bytes() <= a.len());
            d.validate(a.height(), a.width()).unwrap();

            let differing = a.pixels().iter().zip(b.pixels()).filter(|(x, y)| x != y).count();
            prop_assert_eq!(d.is_dense(), 4 * differing > a.len());
            if !d.is_dense() {
                prop_assert_eq!(d.entries(), differing);
            }
            prop_assert_eq!(encode_diff(&a, &b).unwrap(), d);
        }
    }
}
