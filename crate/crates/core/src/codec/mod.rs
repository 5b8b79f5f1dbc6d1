//! Rotation-closed lexicographic code libraries.
//!
//! A square marker can be observed in any of four orientations, so a library
//! is only useful if every codeword stays at least `min_hamming_distance` away
//! from every quarter-turn rotation of every other codeword, and from its own
//! non-trivial rotations. A quarter turn of the physical marker is a circular
//! shift of the codeword by `code_length / 4` bits (see [`Codeword::rotate`]).

mod file;
mod generate;

pub use file::{builtin_library, format_library, parse_library, read_library, write_library, BUILTIN_DISTANCES};
pub use generate::{generate_library, generate_library_with, GenerateOptions, GenerationMode};

use crate::error::{Error, Result};

/// Number of distinguishable orientations of a square marker.
pub const ROTATIONS: u32 = 4;

/// A fixed-width binary word. Bit 0 is the first coding disk in the canonical
/// disk ordering.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Codeword {
    bits: u64,
    width: u32,
}

impl Codeword {
    pub fn new(bits: u64, width: u32) -> Result<Self> {
        if width == 0 || width > 64 {
            return Err(Error::invalid(format!("codeword width {width} not in 1..=64")));
        }
        if bits & !width_mask(width) != 0 {
            return Err(Error::invalid(format!("value {bits:#x} does not fit in {width} bits")));
        }
        Ok(Self { bits, width })
    }

    /// Builds a codeword from per-bit values, `bits[0]` becoming bit 0.
    pub fn from_bools(bits: &[bool]) -> Result<Self> {
        let value = bits
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &b)| acc | ((b as u64) << i));
        Self::new(value, bits.len() as u32)
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn bit(&self, index: u32) -> bool {
        (self.bits >> index) & 1 == 1
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.width).map(|i| self.bit(i)).collect()
    }

    /// Circular shift towards higher bit indices by `quarter_turns * width / 4`
    /// bits. This is what the disk layout does to the bits when the marker is
    /// turned by a quarter turn.
    pub fn rotate(&self, quarter_turns: u32) -> Codeword {
        debug_assert!(self.width.is_multiple_of(ROTATIONS));
        Codeword {
            bits: rotate_bits(self.bits, self.width, quarter_turns),
            width: self.width,
        }
    }

    /// XOR with `mask`; bits above the width are ignored.
    pub fn flip(&self, mask: u64) -> Codeword {
        Codeword {
            bits: (self.bits ^ mask) & width_mask(self.width),
            width: self.width,
        }
    }
}

pub(crate) fn width_mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

pub(crate) fn rotate_bits(bits: u64, width: u32, quarter_turns: u32) -> u64 {
    let shift = (quarter_turns % ROTATIONS) * (width / ROTATIONS);
    if shift == 0 {
        return bits;
    }
    ((bits << shift) | (bits >> (width - shift))) & width_mask(width)
}

/// Popcount of the XOR of two equal-width words.
pub fn hamming_distance(a: Codeword, b: Codeword) -> u32 {
    debug_assert_eq!(a.width, b.width, "hamming distance of different widths");
    (a.bits ^ b.bits).count_ones()
}

/// Result of matching a read word against a library.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DecodeResult {
    pub marker_id: usize,
    /// Quarter turns such that the read word equals `codeword.rotate(rotation)`
    /// up to the corrected bit errors.
    pub rotation: u32,
    pub hamming_distance: u32,
}

/// An ordered, immutable list of codewords closed under quarter-turn rotation.
#[derive(Clone, Debug)]
pub struct MarkerLibrary {
    code_length: u32,
    min_hamming_distance: u32,
    codewords: Vec<Codeword>,
    // All four rotations of every codeword, `id * 4 + rotation`.
    rotations: Vec<u64>,
}

impl PartialEq for MarkerLibrary {
    fn eq(&self, other: &Self) -> bool {
        self.code_length == other.code_length
            && self.min_hamming_distance == other.min_hamming_distance
            && self.codewords == other.codewords
    }
}

impl MarkerLibrary {
    /// Wraps an existing codeword list. The rotation-closure property is not
    /// checked here; use [`MarkerLibrary::verify_closure`] for that.
    pub fn new(code_length: u32, min_hamming_distance: u32, codewords: Vec<Codeword>) -> Result<Self> {
        if code_length == 0 || code_length > 64 || !code_length.is_multiple_of(ROTATIONS) {
            return Err(Error::invalid(format!(
                "code length {code_length} must be a positive multiple of 4 up to 64"
            )));
        }
        if min_hamming_distance == 0 {
            return Err(Error::invalid("minimum Hamming distance must be at least 1"));
        }
        if let Some(cw) = codewords.iter().find(|cw| cw.width != code_length) {
            return Err(Error::invalid(format!(
                "codeword of width {} in a {code_length}-bit library",
                cw.width
            )));
        }
        let rotations = codewords
            .iter()
            .flat_map(|cw| (0..ROTATIONS).map(move |r| cw.rotate(r).bits))
            .collect();
        Ok(Self {
            code_length,
            min_hamming_distance,
            codewords,
            rotations,
        })
    }

    pub fn code_length(&self) -> u32 {
        self.code_length
    }

    pub fn min_hamming_distance(&self) -> u32 {
        self.min_hamming_distance
    }

    pub fn codewords(&self) -> &[Codeword] {
        &self.codewords
    }

    pub fn codeword(&self, id: usize) -> Option<Codeword> {
        self.codewords.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    pub fn rotation_count(&self) -> u32 {
        ROTATIONS
    }

    /// `floor((min_hd - 1) / 2)`, the default correction budget.
    pub fn max_correctable(&self) -> u32 {
        (self.min_hamming_distance - 1) / 2
    }

    /// Exhaustive check of the closure invariants. Returns the first violating
    /// `(i, j, rotation, distance)`; `i == j` marks a self-rotation violation.
    pub fn verify_closure(&self) -> std::result::Result<(), (usize, usize, u32, u32)> {
        let d = self.min_hamming_distance;
        for (i, a) in self.codewords.iter().enumerate() {
            for r in 1..ROTATIONS {
                let dist = hamming_distance(*a, a.rotate(r));
                if dist < d {
                    return Err((i, i, r, dist));
                }
            }
            for j in (i + 1)..self.codewords.len() {
                let rots = &self.rotations[j * 4..j * 4 + 4];
                for (r, &rb) in rots.iter().enumerate() {
                    let dist = (a.bits ^ rb).count_ones();
                    if dist < d {
                        return Err((i, j, r as u32, dist));
                    }
                }
            }
        }
        Ok(())
    }

    /// Nearest codeword rotation to `read`, accepted if within `max_correct`
    /// bit errors. Ties resolve to the lowest id, then the lowest rotation.
    pub fn decode(&self, read: Codeword, max_correct: u32) -> Option<DecodeResult> {
        debug_assert_eq!(read.width, self.code_length);
        let mut best = (u32::MAX, 0usize);
        for (k, &rot) in self.rotations.iter().enumerate() {
            let dist = (read.bits ^ rot).count_ones();
            if dist < best.0 {
                best = (dist, k);
                if dist == 0 {
                    break;
                }
            }
        }
        (best.0 <= max_correct).then(|| DecodeResult {
            marker_id: best.1 / ROTATIONS as usize,
            rotation: (best.1 % ROTATIONS as usize) as u32,
            hamming_distance: best.0,
        })
    }
}

/// Free-function form of [`MarkerLibrary::decode`].
pub fn decode(read: Codeword, library: &MarkerLibrary, max_correct: u32) -> Option<DecodeResult> {
    library.decode(read, max_correct)
}

/// Fraction of code bits the library can correct, `floor((d - 1) / 2) / n`.
pub fn max_ber_correction(library: &MarkerLibrary) -> f64 {
    library.max_correctable() as f64 / library.code_length as f64
}
