//! Hex memory-image text format.
//!
//! One token per line. `@XXXXXXXX` sets the load address; any other
//! non-empty line is exactly eight hex digits, one big-endian word, after
//! which the address advances by four. `#` starts a comment. Without an
//! `@` line, words load at the caller's default base.

use crate::memory::{ProgramImage, Segment};
use std::fmt::Write;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HexError {
    #[error("line {line}: {msg}")]
    FormatError { line: usize, msg: String },
}

pub fn emit_hex(image: &ProgramImage) -> String {
    let mut out = String::new();
    for seg in &image.segments {
        let _ = writeln!(out, "@{:08X}", seg.base);
        for w in &seg.words {
            let _ = writeln!(out, "{w:08X}");
        }
    }
    out
}

fn parse_hex8(tok: &str) -> Option<u32> {
    if tok.len() == 8 && tok.bytes().all(|b| b.is_ascii_hexdigit()) {
        u32::from_str_radix(tok, 16).ok()
    } else {
        None
    }
}

pub fn load_hex(text: &str, default_base: u32) -> Result<ProgramImage, HexError> {
    let mut segments: Vec<Segment> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let tok = raw.split('#').next().unwrap_or("").trim();
        if tok.is_empty() {
            continue;
        }
        let err = |msg: &str| HexError::FormatError { line, msg: msg.to_string() };
        if let Some(addr) = tok.strip_prefix('@') {
            let base = parse_hex8(addr).ok_or_else(|| err("expected @ followed by 8 hex digits"))?;
            if base % 4 != 0 {
                return Err(err("load address is not word aligned"));
            }
            segments.push(Segment { base, words: Vec::new() });
            continue;
        }
        let word = parse_hex8(tok).ok_or_else(|| err(&format!("malformed word `{tok}`")))?;
        if segments.is_empty() {
            segments.push(Segment { base: default_base, words: Vec::new() });
        }
        segments.last_mut().expect("segment pushed above").words.push(word);
    }
    Ok(ProgramImage { segments })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn emits_directive_and_words() {
        let img = ProgramImage::single(0x0040_0000, vec![0x2408_0005]);
        assert_eq!(emit_hex(&img), "@00400000\n24080005\n");
        assert_eq!(emit_hex(&ProgramImage::default()), "");
    }

    #[test]
    fn bare_word_loads_at_default_base() {
        let img = load_hex("40490FDA", 0x1001_0000).unwrap();
        assert_eq!(img, ProgramImage::single(0x1001_0000, vec![0x4049_0FDA]));
    }

    #[test]
    fn directive_and_comments() {
        let img = load_hex("@10010000\n3F800000", 0).unwrap();
        assert_eq!(img, ProgramImage::single(0x1001_0000, vec![0x3F80_0000]));
        let img = load_hex("# comment\n\n@00400000\n00000000", 0x1234_0000).unwrap();
        assert_eq!(img, ProgramImage::single(0x0040_0000, vec![0]));
        let img = load_hex("deadbeef   # trailing\n", 0).unwrap();
        assert_eq!(img.segments[0].words, vec![0xDEAD_BEEF]);
    }

    #[test]
    fn malformed_tokens() {
        for bad in ["1234567", "123456789", "zzzzzzzz", "@123", "@00400002", "0x12345678"] {
            assert!(matches!(load_hex(bad, 0), Err(HexError::FormatError { line: 1, .. })), "{bad}");
        }
        assert!(matches!(load_hex("00000000\nbad", 0), Err(HexError::FormatError { line: 2, .. })));
    }

    fn image() -> impl Strategy<Value = ProgramImage> {
        proptest::collection::vec(
            ((0u32..0x3FFF_FFFF).prop_map(|b| b * 4), proptest::collection::vec(any::<u32>(), 0..20)),
            0..5,
        )
        .prop_map(|segs| ProgramImage {
            segments: segs.into_iter().map(|(base, words)| Segment { base, words }).collect(),
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn emit_load_round_trip(img in image()) {
            prop_assert_eq!(load_hex(&emit_hex(&img), 0).unwrap(), img);
        }
    }
}
