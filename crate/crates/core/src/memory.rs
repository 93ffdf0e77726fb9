//! Instruction and data memories.
//!
//! Both memories are preloaded scratchpads holding big-endian words. An
//! optional direct-mapped cache model sits beside them: it only counts
//! hits and misses (and can charge a stall per miss), data always comes
//! from the backing store.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Width {
    Byte,
    Half,
    Word,
}

impl Width {
    pub fn bytes(self) -> u32 {
        match self {
            Width::Byte => 1,
            Width::Half => 2,
            Width::Word => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum MemError {
    #[error("misaligned {width:?} access at 0x{addr:08X}")]
    MisalignedAccess { addr: u32, width: Width },
    #[error("address 0x{0:08X} is outside memory")]
    AddressOutOfRange(u32),
    #[error("image segment at 0x{base:08X} with {len} words does not fit in memory")]
    ImageOutOfRange { base: u32, len: usize },
    #[error("image segments overlap at 0x{0:08X}")]
    ImageOverlap(u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CacheGeometry {
    pub size_bytes: u32,
    pub line_bytes: u32,
}

impl Default for CacheGeometry {
    fn default() -> Self {
        CacheGeometry { size_bytes: 4096, line_bytes: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MemoryConfig {
    pub imem_base: u32,
    pub imem_bytes: u32,
    pub dmem_base: u32,
    pub dmem_bytes: u32,
    pub cache_stats: bool,
    pub icache: CacheGeometry,
    pub dcache: CacheGeometry,
    /// Extra cycles charged to the accessing stage on a cache miss.
    pub miss_penalty: u32,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        MemoryConfig {
            imem_base: 0x0040_0000,
            imem_bytes: 64 * 1024,
            dmem_base: 0x1001_0000,
            dmem_bytes: 64 * 1024,
            cache_stats: false,
            icache: CacheGeometry::default(),
            dcache: CacheGeometry::default(),
            miss_penalty: 0,
        }
    }
}

impl MemoryConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        for (name, g) in [("icache", self.icache), ("dcache", self.dcache)] {
            if !g.line_bytes.is_power_of_two() || g.line_bytes < 4 {
                return bad(format!("{name} line size {} must be a power of two >= 4", g.line_bytes));
            }
            if !g.size_bytes.is_power_of_two() || g.size_bytes < g.line_bytes {
                return bad(format!(
                    "{name} size {} must be a power of two multiple of the line size",
                    g.size_bytes
                ));
            }
        }
        for (name, base, size, line) in [
            ("imem", self.imem_base, self.imem_bytes, self.icache.line_bytes),
            ("dmem", self.dmem_base, self.dmem_bytes, self.dcache.line_bytes),
        ] {
            if base % 4 != 0 {
                return bad(format!("{name} base 0x{base:08X} is not word aligned"));
            }
            if size == 0 || size % line != 0 {
                return bad(format!("{name} size {size} is not a multiple of the line size {line}"));
            }
            if (base as u64) + (size as u64) > 1 << 32 {
                return bad(format!("{name} extends past the 4 GiB address space"));
            }
        }
        let (a0, a1) = (self.imem_base as u64, self.imem_base as u64 + self.imem_bytes as u64);
        let (b0, b1) = (self.dmem_base as u64, self.dmem_base as u64 + self.dmem_bytes as u64);
        if a0 < b1 && b0 < a1 {
            return bad("instruction and data memories overlap".into());
        }
        Ok(())
    }

    /// One past the last data-memory byte; the initial stack pointer.
    pub fn dmem_top(&self) -> u32 {
        self.dmem_base.wrapping_add(self.dmem_bytes)
    }
}

/// A contiguous run of words to preload.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Segment {
    pub base: u32,
    pub words: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ProgramImage {
    pub segments: Vec<Segment>,
}

impl ProgramImage {
    pub fn single(base: u32, words: Vec<u32>) -> Self {
        ProgramImage { segments: vec![Segment { base, words }] }
    }

    pub fn is_empty(&self) -> bool {
        self.segments.iter().all(|s| s.words.is_empty())
    }

    pub fn word_count(&self) -> usize {
        self.segments.iter().map(|s| s.words.len()).sum()
    }

    /// Append another image's segments.
    pub fn merge(mut self, other: ProgramImage) -> Self {
        self.segments.extend(other.segments);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Region {
    base: u32,
    bytes: Vec<u8>,
}

impl Region {
    fn offset(&self, addr: u32, len: u32) -> Option<usize> {
        let off = addr.checked_sub(self.base)? as usize;
        (off + len as usize <= self.bytes.len()).then_some(off)
    }
}

/// Instruction memory plus data memory in one 32-bit address space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Memory {
    imem: Region,
    dmem: Region,
}

impl Memory {
    pub fn new(config: &MemoryConfig) -> Self {
        Memory {
            imem: Region { base: config.imem_base, bytes: vec![0; config.imem_bytes as usize] },
            dmem: Region { base: config.dmem_base, bytes: vec![0; config.dmem_bytes as usize] },
        }
    }

    fn locate(&self, addr: u32, len: u32) -> Option<(&Region, usize)> {
        [&self.imem, &self.dmem]
            .into_iter()
            .find_map(|r| r.offset(addr, len).map(|o| (r, o)))
    }

    fn locate_mut(&mut self, addr: u32, len: u32) -> Option<(&mut Region, usize)> {
        if let Some(o) = self.imem.offset(addr, len) {
            return Some((&mut self.imem, o));
        }
        self.dmem.offset(addr, len).map(|o| (&mut self.dmem, o))
    }

    pub fn load_image(&mut self, image: &ProgramImage) -> Result<(), MemError> {
        let mut spans: Vec<(u64, u64)> = Vec::new();
        for seg in &image.segments {
            let len = seg.words.len() as u32 * 4;
            let in_range = seg.words.is_empty()
                || (seg.base % 4 == 0 && self.locate(seg.base, len).is_some());
            if !in_range {
                return Err(MemError::ImageOutOfRange { base: seg.base, len: seg.words.len() });
            }
            let span = (seg.base as u64, seg.base as u64 + len as u64);
            if let Some(clash) = spans.iter().find(|s| s.0 < span.1 && span.0 < s.1) {
                return Err(MemError::ImageOverlap(clash.0.max(span.0) as u32));
            }
            spans.push(span);
        }
        for seg in &image.segments {
            for (i, w) in seg.words.iter().enumerate() {
                self.write(seg.base + 4 * i as u32, Width::Word, *w)?;
            }
        }
        Ok(())
    }

    fn check_align(addr: u32, width: Width) -> Result<(), MemError> {
        if !addr.is_multiple_of(width.bytes()) {
            Err(MemError::MisalignedAccess { addr, width })
        } else {
            Ok(())
        }
    }

    /// Big-endian read, sign- or zero-extended to 32 bits.
    pub fn read(&self, addr: u32, width: Width, signed: bool) -> Result<u32, MemError> {
        Self::check_align(addr, width)?;
        let n = width.bytes();
        let (region, off) = self.locate(addr, n).ok_or(MemError::AddressOutOfRange(addr))?;
        let raw = region.bytes[off..off + n as usize]
            .iter()
            .fold(0u32, |acc, &b| (acc << 8) | b as u32);
        Ok(match (width, signed) {
            (Width::Byte, true) => raw as u8 as i8 as i32 as u32,
            (Width::Half, true) => raw as u16 as i16 as i32 as u32,
            _ => raw,
        })
    }

    pub fn write(&mut self, addr: u32, width: Width, value: u32) -> Result<(), MemError> {
        Self::check_align(addr, width)?;
        let n = width.bytes();
        let (region, off) = self.locate_mut(addr, n).ok_or(MemError::AddressOutOfRange(addr))?;
        let bytes = value.to_be_bytes();
        region.bytes[off..off + n as usize].copy_from_slice(&bytes[4 - n as usize..]);
        Ok(())
    }

    /// Instruction fetch: word reads from instruction memory only.
    pub fn fetch(&self, addr: u32) -> Result<u32, MemError> {
        Self::check_align(addr, Width::Word)?;
        let off = self.imem.offset(addr, 4).ok_or(MemError::AddressOutOfRange(addr))?;
        let b = &self.imem.bytes[off..off + 4];
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub fn read_word(&self, addr: u32) -> Result<u32, MemError> {
        self.read(addr, Width::Word, false)
    }

    /// NUL-terminated string starting at `addr`.
    pub fn read_cstring(&self, addr: u32, limit: usize) -> Result<Vec<u8>, MemError> {
        let mut out = Vec::new();
        let mut a = addr;
        while out.len() < limit {
            let b = self.read(a, Width::Byte, false)? as u8;
            if b == 0 {
                break;
            }
            out.push(b);
            a = a.wrapping_add(1);
        }
        Ok(out)
    }

    pub fn imem_range(&self) -> (u32, u32) {
        (self.imem.base, self.imem.bytes.len() as u32)
    }

    pub fn dmem_range(&self) -> (u32, u32) {
        (self.dmem.base, self.dmem.bytes.len() as u32)
    }

    /// Raw backing bytes of (instruction, data) memory.
    pub fn contents(&self) -> (&[u8], &[u8]) {
        (&self.imem.bytes, &self.dmem.bytes)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheStats {
    pub accesses: u64,
    pub hits: u64,
    pub misses: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CacheOutcome {
    Hit,
    Miss,
}

/// Direct-mapped tag store used for hit/miss accounting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cache {
    tags: Vec<Option<u32>>,
    line_shift: u32,
    stats: CacheStats,
}

impl Cache {
    pub fn new(geometry: CacheGeometry) -> Self {
        let lines = (geometry.size_bytes / geometry.line_bytes) as usize;
        Cache {
            tags: vec![None; lines],
            line_shift: geometry.line_bytes.trailing_zeros(),
            stats: CacheStats::default(),
        }
    }

    fn index_tag(&self, addr: u32) -> (usize, u32) {
        let line = addr >> self.line_shift;
        let index = line as usize & (self.tags.len() - 1);
        (index, line >> self.tags.len().trailing_zeros())
    }

    /// Would `addr` hit right now? Does not touch statistics.
    pub fn probe(&self, addr: u32) -> CacheOutcome {
        let (index, tag) = self.index_tag(addr);
        if self.tags[index] == Some(tag) {
            CacheOutcome::Hit
        } else {
            CacheOutcome::Miss
        }
    }

    pub fn access(&mut self, addr: u32) -> CacheOutcome {
        let outcome = self.probe(addr);
        let (index, tag) = self.index_tag(addr);
        self.stats.accesses += 1;
        match outcome {
            CacheOutcome::Hit => self.stats.hits += 1,
            CacheOutcome::Miss => {
                self.stats.misses += 1;
                self.tags[index] = Some(tag);
            }
        }
        outcome
    }

    pub fn stats(&self) -> CacheStats {
        self.stats
    }
}
