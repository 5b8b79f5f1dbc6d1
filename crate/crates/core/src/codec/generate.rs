use super::{rotate_bits, Codeword, MarkerLibrary, ROTATIONS};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GenerationMode {
    /// Exhaustive lexicographic scan of all `2^n` words. Only for `n <= 16`.
    Direct,
    /// Quarter-length sub-codewords first, then full words as ordered 4-tuples
    /// of sub-codewords.
    Hierarchical,
}

#[derive(Clone, Debug)]
pub struct GenerateOptions {
    /// Minimum distance of the quarter-length sub-code used by hierarchical
    /// generation.
    pub sub_min_distance: u32,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        Self { sub_min_distance: 4 }
    }
}

const MAX_DIRECT_LENGTH: u32 = 16;
// Upper bound on the per-slab coverage bitmap (bits).
const MAX_SLAB_BITS: usize = 1 << 31;

pub fn generate_library(code_length: u32, min_hd: u32, mode: GenerationMode) -> Result<MarkerLibrary> {
    generate_library_with(code_length, min_hd, mode, &GenerateOptions::default())
}

pub fn generate_library_with(
    code_length: u32,
    min_hd: u32,
    mode: GenerationMode,
    options: &GenerateOptions,
) -> Result<MarkerLibrary> {
    if code_length == 0 || !code_length.is_multiple_of(ROTATIONS) || code_length > 64 {
        return Err(Error::invalid(format!(
            "code length {code_length} must be a positive multiple of 4 up to 64"
        )));
    }
    if min_hd == 0 {
        return Err(Error::invalid("minimum Hamming distance must be at least 1"));
    }
    let words = match mode {
        GenerationMode::Direct => {
            if code_length > MAX_DIRECT_LENGTH {
                return Err(Error::invalid(format!(
                    "direct generation is limited to {MAX_DIRECT_LENGTH} bits, got {code_length}"
                )));
            }
            direct(code_length, min_hd)
        }
        GenerationMode::Hierarchical => {
            if options.sub_min_distance == 0 {
                return Err(Error::invalid("sub-code distance must be at least 1"));
            }
            hierarchical(code_length, min_hd, options.sub_min_distance)?
        }
    };
    let codewords = words
        .into_iter()
        .map(|w| Codeword::new(w, code_length))
        .collect::<Result<Vec<_>>>()?;
    MarkerLibrary::new(code_length, min_hd, codewords)
}

fn self_distinct(word: u64, width: u32, min_hd: u32) -> bool {
    (1..ROTATIONS).all(|r| (word ^ rotate_bits(word, width, r)).count_ones() >= min_hd)
}

/// All masks of `width` bits with popcount below `radius`.
fn ball_masks(width: u32, radius: u32) -> Vec<u64> {
    (0u64..(1u64 << width)).filter(|m| m.count_ones() < radius).collect()
}

fn direct(width: u32, min_hd: u32) -> Vec<u64> {
    let size = 1usize << width;
    let mut covered = vec![false; size];
    let ball = ball_masks(width, min_hd);
    let mut accepted = Vec::new();
    for w in 0..size as u64 {
        if covered[w as usize] || !self_distinct(w, width, min_hd) {
            continue;
        }
        accepted.push(w);
        for r in 0..ROTATIONS {
            let rot = rotate_bits(w, width, r);
            for &m in &ball {
                covered[(rot ^ m) as usize] = true;
            }
        }
    }
    accepted
}

/// Plain (non-rotational) lexicode used as the sub-code alphabet.
fn lexicode(width: u32, min_hd: u32) -> Vec<u64> {
    let mut code: Vec<u64> = Vec::new();
    for w in 0..(1u64 << width) {
        if code.iter().all(|&c| (c ^ w).count_ones() >= min_hd) {
            code.push(w);
        }
    }
    code
}

/// Greedy acceptance over 4-tuples of sub-codewords in lexicographic tuple
/// order. A quarter turn of the full word is a cyclic shift of the tuple, so
/// full-word distances are sums of sub-code distances. Candidates are scanned
/// one first-block slab at a time against a coverage bitmap holding every
/// tuple within `min_hd - 1` of some rotation of an accepted word.
fn hierarchical(width: u32, min_hd: u32, sub_min_distance: u32) -> Result<Vec<u64>> {
    let sub_width = width / ROTATIONS;
    if sub_width > MAX_DIRECT_LENGTH {
        return Err(Error::invalid(format!(
            "sub-codeword length {sub_width} exceeds {MAX_DIRECT_LENGTH} bits"
        )));
    }
    let sub = lexicode(sub_width, sub_min_distance);
    let n = sub.len();
    if n.pow(3) > MAX_SLAB_BITS {
        return Err(Error::invalid(format!(
            "sub-code of {n} words is too large for hierarchical generation"
        )));
    }
    let dist: Vec<u8> = (0..n * n)
        .map(|k| (sub[k / n] ^ sub[k % n]).count_ones() as u8)
        .collect();
    // Neighbours of each sub-codeword, nearest first.
    let neighbours: Vec<Vec<(u8, u32)>> = (0..n)
        .map(|i| {
            let mut v: Vec<(u8, u32)> = (0..n).map(|j| (dist[i * n + j], j as u32)).collect();
            v.sort_unstable();
            v
        })
        .collect();

    let budget = min_hd - 1;
    let slab_len = n * n * n;
    let mut coverage = vec![0u64; slab_len.div_ceil(64)];
    let mut accepted: Vec<[u32; 4]> = Vec::new();

    // Marks every tuple (first, x1, x2, x3) within `budget` of `centre`.
    let mark = |coverage: &mut [u64], centre: &[u32; 4], first: u32| {
        let d0 = dist[first as usize * n + centre[0] as usize] as u32;
        if d0 > budget {
            return;
        }
        let b1 = budget - d0;
        for &(e1, j1) in &neighbours[centre[1] as usize] {
            if e1 as u32 > b1 {
                break;
            }
            let b2 = b1 - e1 as u32;
            for &(e2, j2) in &neighbours[centre[2] as usize] {
                if e2 as u32 > b2 {
                    break;
                }
                let b3 = b2 - e2 as u32;
                let base = (j1 as usize * n + j2 as usize) * n;
                for &(e3, j3) in &neighbours[centre[3] as usize] {
                    if e3 as u32 > b3 {
                        break;
                    }
                    let idx = base + j3 as usize;
                    coverage[idx >> 6] |= 1u64 << (idx & 63);
                }
            }
        }
    };
    let rotations_of = |t: &[u32; 4]| -> [[u32; 4]; 4] {
        let mut out = [[0u32; 4]; 4];
        for (r, rot) in out.iter_mut().enumerate() {
            for (j, slot) in rot.iter_mut().enumerate() {
                *slot = t[(j + 4 - r) % 4];
            }
        }
        out
    };
    let self_ok = |t: &[u32; 4]| -> bool {
        (1..4).all(|r| {
            let d: u32 = (0..4)
                .map(|j| dist[t[j] as usize * n + t[(j + 4 - r) % 4] as usize] as u32)
                .sum();
            d >= min_hd
        })
    };

    let words_per_slab = coverage.len();
    let tail_bits = slab_len % 64;
    for first in 0..n as u32 {
        coverage.iter_mut().for_each(|w| *w = 0);
        for t in &accepted {
            for rot in rotations_of(t) {
                mark(&mut coverage, &rot, first);
            }
        }
        for wi in 0..words_per_slab {
            let valid = if wi + 1 == words_per_slab && tail_bits != 0 {
                (1u64 << tail_bits) - 1
            } else {
                u64::MAX
            };
            let mut free = !coverage[wi] & valid;
            while free != 0 {
                let bit = free.trailing_zeros();
                let idx = wi * 64 + bit as usize;
                let cand = [first, (idx / (n * n)) as u32, ((idx / n) % n) as u32, (idx % n) as u32];
                free &= free - 1;
                if !self_ok(&cand) {
                    continue;
                }
                accepted.push(cand);
                for rot in rotations_of(&cand) {
                    mark(&mut coverage, &rot, first);
                }
                // Later bits of this word may have just been covered.
                free &= !coverage[wi];
            }
        }
    }

    Ok(accepted
        .iter()
        .map(|t| {
            t.iter()
                .enumerate()
                .fold(0u64, |acc, (i, &s)| acc | (sub[s as usize] << (i as u32 * sub_width)))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent greedy scan straight from the closure definition.
    fn brute_force(width: u32, min_hd: u32) -> Vec<u64> {
        let mut acc: Vec<u64> = Vec::new();
        for w in 0..(1u64 << width) {
            let self_ok = (1..4).all(|r| (w ^ rotate_bits(w, width, r)).count_ones() >= min_hd);
            let others_ok = acc
                .iter()
                .all(|&a| (0..4).all(|r| (w ^ rotate_bits(a, width, r)).count_ones() >= min_hd));
            if self_ok && others_ok {
                acc.push(w);
            }
        }
        acc
    }

    #[test]
    fn direct_four_bits_distance_one() {
        let lib = generate_library(4, 1, GenerationMode::Direct).unwrap();
        let words: Vec<u64> = lib.codewords().iter().map(|c| c.bits()).collect();
        assert_eq!(words, brute_force(4, 1));
        assert_eq!(words[0], 0b0001);
        assert!(lib.verify_closure().is_ok());
    }

    #[test]
    fn direct_matches_brute_force() {
        for (w, d) in [(8, 1), (8, 2), (8, 3), (12, 3), (12, 5), (16, 5)] {
            let lib = generate_library(w, d, GenerationMode::Direct).unwrap();
            let words: Vec<u64> = lib.codewords().iter().map(|c| c.bits()).collect();
            assert_eq!(words, brute_force(w, d), "width {w} distance {d}");
        }
    }

    #[test]
    fn impossible_distance_gives_empty_library() {
        let lib = generate_library(8, 9, GenerationMode::Direct).unwrap();
        assert!(lib.is_empty());
    }

    #[test]
    fn parameter_errors() {
        assert!(generate_library(10, 3, GenerationMode::Direct).is_err());
        assert!(generate_library(20, 3, GenerationMode::Direct).is_err());
        assert!(generate_library(8, 0, GenerationMode::Direct).is_err());
    }

    #[test]
    fn hierarchical_matches_tuple_brute_force() {
        // 16-bit words from 4-bit sub-codes: compare against a direct scan of
        // the tuple space in lexicographic order.
        let (width, d, d1) = (16u32, 5u32, 2u32);
        let sub = lexicode(4, d1);
        let mut expected: Vec<u64> = Vec::new();
        let n = sub.len();
        for idx in 0..n.pow(4) {
            let t = [idx / (n * n * n), (idx / (n * n)) % n, (idx / n) % n, idx % n];
            let w = t
                .iter()
                .enumerate()
                .fold(0u64, |acc, (i, &s)| acc | (sub[s] << (4 * i)));
            let self_ok = (1..4).all(|r| (w ^ rotate_bits(w, width, r)).count_ones() >= d);
            let others_ok = expected
                .iter()
                .all(|&a| (0..4).all(|r| (w ^ rotate_bits(a, width, r)).count_ones() >= d));
            if self_ok && others_ok {
                expected.push(w);
            }
        }
        let lib = generate_library_with(
            width,
            d,
            GenerationMode::Hierarchical,
            &GenerateOptions { sub_min_distance: d1 },
        )
        .unwrap();
        let words: Vec<u64> = lib.codewords().iter().map(|c| c.bits()).collect();
        assert_eq!(words, expected);
        assert!(!words.is_empty());
    }

    #[test]
    fn hd23_is_small_and_closed() {
        let lib = generate_library(48, 23, GenerationMode::Hierarchical).unwrap();
        assert!(!lib.is_empty());
        assert!(lib.len() <= 12);
        assert!(lib.verify_closure().is_ok());
    }

    #[test]
    fn size_monotone_in_distance() {
        let sizes: Vec<usize> = [13u32, 15, 17, 19]
            .iter()
            .map(|&d| generate_library(32, d, GenerationMode::Hierarchical).unwrap().len())
            .collect();
        assert!(sizes.windows(2).all(|w| w[0] >= w[1]), "{sizes:?}");
    }
}
