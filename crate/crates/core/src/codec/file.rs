//! Plain-text library files.
//!
//! ```text
//! STAGLIB v1 48 23
//! 0123456789AB
//! ...
//! ```
//!
//! One codeword per line as uppercase hex, `code_length / 4` digits.

use std::fmt::Write as _;
use std::path::Path;

use super::{Codeword, MarkerLibrary};
use crate::error::{Error, Result};

const MAGIC: &str = "STAGLIB";
const VERSION: &str = "v1";

pub fn format_library(library: &MarkerLibrary) -> String {
    let digits = library.code_length().div_ceil(4) as usize;
    let mut out = format!(
        "{MAGIC} {VERSION} {} {}\n",
        library.code_length(),
        library.min_hamming_distance()
    );
    for cw in library.codewords() {
        let _ = writeln!(out, "{:0digits$X}", cw.bits());
    }
    out
}

pub fn parse_library(text: &str) -> Result<MarkerLibrary> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(Error::LibraryParse {
        line: 1,
        msg: "missing header".into(),
    })?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let header_err = |msg: &str| Error::LibraryParse {
        line: 1,
        msg: msg.to_string(),
    };
    if fields.len() != 4 || fields[0] != MAGIC {
        return Err(header_err("expected `STAGLIB v1 <code_length> <min_hd>`"));
    }
    if fields[1] != VERSION {
        return Err(header_err("unsupported version"));
    }
    let code_length: u32 = fields[2].parse().map_err(|_| header_err("bad code length"))?;
    let min_hd: u32 = fields[3].parse().map_err(|_| header_err("bad minimum distance"))?;
    let digits = code_length.div_ceil(4) as usize;

    let mut codewords = Vec::new();
    for (idx, line) in lines {
        let token = line.trim();
        let err = |msg: String| Error::LibraryParse { line: idx + 1, msg };
        if token.len() != digits {
            return Err(err(format!("expected {digits} hex digits, got `{token}`")));
        }
        let value = u64::from_str_radix(token, 16).map_err(|e| err(e.to_string()))?;
        codewords.push(Codeword::new(value, code_length).map_err(|e| err(e.to_string()))?);
    }
    MarkerLibrary::new(code_length, min_hd, codewords)
}

pub fn read_library(path: impl AsRef<Path>) -> Result<MarkerLibrary> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_library(&text)
}

pub fn write_library(library: &MarkerLibrary, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_library(library)).map_err(|e| Error::io(path, e))
}

/// Minimum distances of the shipped 48-bit hierarchical libraries.
pub const BUILTIN_DISTANCES: [u32; 7] = [11, 13, 15, 17, 19, 21, 23];

/// A pre-generated 48-bit hierarchical library, identical to
/// `generate_library(48, min_hd, Hierarchical)` with default options.
pub fn builtin_library(min_hd: u32) -> Option<MarkerLibrary> {
    let text = match min_hd {
        11 => include_str!("../../libraries/hd11.staglib"),
        13 => include_str!("../../libraries/hd13.staglib"),
        15 => include_str!("../../libraries/hd15.staglib"),
        17 => include_str!("../../libraries/hd17.staglib"),
        19 => include_str!("../../libraries/hd19.staglib"),
        21 => include_str!("../../libraries/hd21.staglib"),
        23 => include_str!("../../libraries/hd23.staglib"),
        _ => return None,
    };
    Some(parse_library(text).expect("shipped library parses"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_matches_generator() {
        use crate::codec::{generate_library, GenerationMode};
        let lib = builtin_library(23).unwrap();
        assert_eq!(lib, generate_library(48, 23, GenerationMode::Hierarchical).unwrap());
        for hd in BUILTIN_DISTANCES {
            let lib = builtin_library(hd).unwrap();
            assert_eq!((lib.code_length(), lib.min_hamming_distance()), (48, hd));
        }
        assert!(builtin_library(12).is_none());
    }

    #[test]
    fn format_layout() {
        let lib = MarkerLibrary::new(
            48,
            23,
            vec![
                Codeword::new(0xABC, 48).unwrap(),
                Codeword::new(0xFFFF_0000_1234, 48).unwrap(),
            ],
        )
        .unwrap();
        let text = format_library(&lib);
        assert_eq!(text, "STAGLIB v1 48 23\n000000000ABC\nFFFF00001234\n");
        assert_eq!(parse_library(&text).unwrap(), lib);
    }

    #[test]
    fn rejects_malformed() {
        assert!(parse_library("").is_err());
        assert!(parse_library("LIB v1 48 23\n").is_err());
        assert!(parse_library("STAGLIB v2 48 23\n").is_err());
        assert!(parse_library("STAGLIB v1 48 23\n12345\n").is_err());
        assert!(parse_library("STAGLIB v1 48 23\nXYZXYZXYZXYZ\n").is_err());
        let empty = parse_library("STAGLIB v1 48 23\n").unwrap();
        assert!(empty.is_empty());
    }
}
