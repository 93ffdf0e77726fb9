//! Two-pass assembler for the supported instruction subset.
//!
//! Pass one lays out `.text` and `.data`, sizing pseudo-instructions and
//! recording labels. Pass two encodes every statement with all symbols
//! known, so forward references work anywhere.

mod hex;

pub use hex::{emit_hex, load_hex, HexError};

use crate::isa::{self, encode, EncodeError, Format, Instruction, Opcode};
use crate::memory::{MemoryConfig, ProgramImage};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AsmErrorKind {
    #[error("{0}")]
    ParseError(String),
    #[error("unknown mnemonic `{0}`")]
    UnknownMnemonic(String),
    #[error("undefined label `{0}`")]
    UndefinedLabel(String),
    #[error("branch to `{0}` is out of range")]
    BranchOutOfRange(String),
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error(transparent)]
    Unencodable(#[from] EncodeError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct AsmError {
    pub line: usize,
    pub kind: AsmErrorKind,
}

/// Base addresses of the two sections.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub text_base: u32,
    pub data_base: u32,
}

impl Default for Layout {
    fn default() -> Self {
        Layout::from(&MemoryConfig::default())
    }
}

impl From<&MemoryConfig> for Layout {
    fn from(c: &MemoryConfig) -> Self {
        Layout { text_base: c.imem_base, data_base: c.dmem_base }
    }
}

pub type SymbolTable = BTreeMap<String, u32>;

/// Output of a successful assembly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assembly {
    pub text_base: u32,
    pub text: Vec<u32>,
    pub data_base: u32,
    pub data: Vec<u32>,
    pub symbols: SymbolTable,
}

impl Assembly {
    pub fn text_image(&self) -> ProgramImage {
        section_image(self.text_base, &self.text)
    }

    pub fn data_image(&self) -> ProgramImage {
        section_image(self.data_base, &self.data)
    }

    /// Both sections as one image.
    pub fn image(&self) -> ProgramImage {
        self.text_image().merge(self.data_image())
    }
}

fn section_image(base: u32, words: &[u32]) -> ProgramImage {
    if words.is_empty() {
        ProgramImage::default()
    } else {
        ProgramImage::single(base, words.to_vec())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Text,
    Data,
}

#[derive(Debug, Clone)]
enum Body {
    Instr { mnemonic: String, operands: Vec<String> },
    Words(Vec<String>),
    Halves(Vec<String>),
    Bytes(Vec<String>),
    Floats(Vec<String>),
    Raw(Vec<u8>),
}

#[derive(Debug, Clone)]
struct Stmt {
    line: usize,
    section: Section,
    addr: u32,
    body: Body,
}

struct Parser {
    layout: Layout,
    section: Section,
    text_pc: u32,
    data_pc: u32,
    symbols: SymbolTable,
    /// Labels waiting for the next statement, which may realign.
    pending: Vec<(usize, String)>,
    stmts: Vec<Stmt>,
}

pub fn assemble(src: &str, layout: Layout) -> Result<Assembly, AsmError> {
    let mut p = Parser {
        layout,
        section: Section::Text,
        text_pc: layout.text_base,
        data_pc: layout.data_base,
        symbols: SymbolTable::new(),
        pending: Vec::new(),
        stmts: Vec::new(),
    };
    for (n, line) in src.lines().enumerate() {
        p.line(n + 1, line).map_err(|kind| AsmError { line: n + 1, kind })?;
    }
    p.bind_pending(1).map_err(|(line, kind)| AsmError { line, kind })?;
    p.finish()
}

fn perr<T>(msg: impl Into<String>) -> Result<T, AsmErrorKind> {
    Err(AsmErrorKind::ParseError(msg.into()))
}

/// Drop a `#` comment, ignoring `#` inside string or char literals.
fn strip_comment(line: &str) -> &str {
    let mut in_str = false;
    let mut escaped = false;
    for (i, c) in line.char_indices() {
        match c {
            _ if escaped => escaped = false,
            '\\' if in_str => escaped = true,
            '"' => in_str = !in_str,
            '#' if !in_str => return &line[..i],
            _ => {}
        }
    }
    line
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_' || c == '.')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '$')
}

fn split_operands(s: &str) -> Vec<String> {
    let s = s.trim();
    if s.is_empty() {
        return Vec::new();
    }
    s.split(',').map(|o| o.trim().to_string()).collect()
}

fn parse_int(s: &str) -> Option<i64> {
    let s = s.trim();
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let v = if let Some(h) = body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) {
        i64::from_str_radix(h, 16).ok()?
    } else if body.bytes().all(|b| b.is_ascii_digit()) && !body.is_empty() {
        body.parse().ok()?
    } else {
        return None;
    };
    Some(if neg { -v } else { v })
}

fn parse_string_literal(s: &str) -> Result<Vec<u8>, AsmErrorKind> {
    let s = s.trim();
    let inner = match s.strip_prefix('"').and_then(|r| r.strip_suffix('"')) {
        Some(i) if s.len() >= 2 => i,
        _ => return perr(format!("expected a string literal, found `{s}`")),
    };
    let mut out = Vec::new();
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            let mut buf = [0u8; 4];
            out.extend_from_slice(c.encode_utf8(&mut buf).as_bytes());
            continue;
        }
        out.push(match chars.next() {
            Some('n') => b'\n',
            Some('t') => b'\t',
            Some('r') => b'\r',
            Some('0') => 0,
            Some('\\') => b'\\',
            Some('"') => b'"',
            Some('\'') => b'\'',
            other => return perr(format!("bad escape `\\{}`", other.map(String::from).unwrap_or_default())),
        });
    }
    Ok(out)
}

fn align_up(v: u32, to: u32) -> u32 {
    (v + to - 1) & !(to - 1)
}

/// Number of machine instructions a (pseudo-)instruction expands to.
fn instr_size(mnemonic: &str, operands: &[String]) -> Result<u32, AsmErrorKind> {
    Ok(match mnemonic {
        "la" => 2,
        "li" => {
            let v = operands
                .get(1)
                .and_then(|o| parse_int(o))
                .ok_or_else(|| AsmErrorKind::ParseError("li needs a register and an integer".into()))?;
            if !(i32::MIN as i64..=u32::MAX as i64).contains(&v) {
                return perr(format!("li immediate {v} does not fit in 32 bits"));
            }
            let fits_one = (-32768..=65535).contains(&v) || (v as u32) & 0xFFFF == 0;
            if fits_one {
                1
            } else {
                2
            }
        }
        _ => 1,
    })
}

impl Parser {
    fn pc(&mut self) -> &mut u32 {
        match self.section {
            Section::Text => &mut self.text_pc,
            Section::Data => &mut self.data_pc,
        }
    }

    fn bind_pending(&mut self, align: u32) -> Result<(), (usize, AsmErrorKind)> {
        let addr = align_up(*self.pc(), align);
        for (line, name) in std::mem::take(&mut self.pending) {
            if self.symbols.insert(name.clone(), addr).is_some() {
                return Err((line, AsmErrorKind::DuplicateLabel(name)));
            }
        }
        Ok(())
    }

    fn push(&mut self, line: usize, align: u32, size: u32, body: Body) -> Result<(), AsmErrorKind> {
        self.bind_pending(align).map_err(|(_, k)| k)?;
        let pc = align_up(*self.pc(), align);
        self.stmts.push(Stmt { line, section: self.section, addr: pc, body });
        *self.pc() = pc + size;
        Ok(())
    }

    fn line(&mut self, line: usize, raw: &str) -> Result<(), AsmErrorKind> {
        let mut rest = strip_comment(raw).trim();
        // leading labels
        while let Some(colon) = rest.find(':') {
            let name = rest[..colon].trim();
            if !is_ident(name) {
                break;
            }
            if self.symbols.contains_key(name) || self.pending.iter().any(|(_, p)| p == name) {
                return Err(AsmErrorKind::DuplicateLabel(name.to_string()));
            }
            self.pending.push((line, name.to_string()));
            rest = rest[colon + 1..].trim();
        }
        if rest.is_empty() {
            return Ok(());
        }
        let (head, tail) = match rest.find(char::is_whitespace) {
            Some(i) => (&rest[..i], rest[i..].trim()),
            None => (rest, ""),
        };
        if head.starts_with('.') {
            return self.directive(line, head, tail);
        }
        if self.section != Section::Text {
            return perr(format!("instruction `{head}` outside .text"));
        }
        let mnemonic = head.to_ascii_lowercase();
        let operands = split_operands(tail);
        let size = instr_size(&mnemonic, &operands)?;
        self.push(line, 4, size * 4, Body::Instr { mnemonic, operands })?;
        Ok(())
    }

    fn directive(&mut self, line: usize, name: &str, args: &str) -> Result<(), AsmErrorKind> {
        let list = || split_operands(args);
        match name {
            ".text" | ".data" => {
                self.bind_pending(1).map_err(|(_, k)| k)?;
                self.section = if name == ".text" { Section::Text } else { Section::Data };
            }
            ".globl" | ".global" => {}
            ".word" => {
                let v = list();
                let n = v.len() as u32;
                self.push(line, 4, 4 * n, Body::Words(v))?;
            }
            ".float" => {
                let v = list();
                let n = v.len() as u32;
                self.push(line, 4, 4 * n, Body::Floats(v))?;
            }
            ".half" => {
                let v = list();
                let n = v.len() as u32;
                self.push(line, 2, 2 * n, Body::Halves(v))?;
            }
            ".byte" => {
                let v = list();
                let n = v.len() as u32;
                self.push(line, 1, n, Body::Bytes(v))?;
            }
            ".space" => {
                let n = parse_int(args)
                    .filter(|n| (0..=1 << 24).contains(n))
                    .ok_or_else(|| AsmErrorKind::ParseError(format!("bad .space size `{args}`")))?;
                self.push(line, 1, n as u32, Body::Raw(vec![0; n as usize]))?;
            }
            ".ascii" | ".asciiz" => {
                let mut bytes = parse_string_literal(args)?;
                if name == ".asciiz" {
                    bytes.push(0);
                }
                let n = bytes.len() as u32;
                self.push(line, 1, n, Body::Raw(bytes))?;
            }
            ".align" => {
                let n = parse_int(args)
                    .filter(|n| (0..=12).contains(n))
                    .ok_or_else(|| AsmErrorKind::ParseError(format!("bad .align `{args}`")))?;
                let pc = align_up(*self.pc(), 1 << n);
                *self.pc() = pc;
                self.bind_pending(1).map_err(|(_, k)| k)?;
            }
            other => return perr(format!("unknown directive `{other}`")),
        }
        Ok(())
    }

    fn finish(self) -> Result<Assembly, AsmError> {
        let text_len = self.text_pc - self.layout.text_base;
        let data_len = self.data_pc - self.layout.data_base;
        let mut text = vec![0u8; align_up(text_len, 4) as usize];
        let mut data = vec![0u8; align_up(data_len, 4) as usize];
        for stmt in &self.stmts {
            let bytes = self
                .encode_stmt(stmt)
                .map_err(|kind| AsmError { line: stmt.line, kind })?;
            let (buf, base) = match stmt.section {
                Section::Text => (&mut text, self.layout.text_base),
                Section::Data => (&mut data, self.layout.data_base),
            };
            let off = (stmt.addr - base) as usize;
            buf[off..off + bytes.len()].copy_from_slice(&bytes);
        }
        let words = |b: &[u8]| -> Vec<u32> {
            b.chunks(4).map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]])).collect()
        };
        Ok(Assembly {
            text_base: self.layout.text_base,
            text: words(&text),
            data_base: self.layout.data_base,
            data: words(&data),
            symbols: self.symbols,
        })
    }

    fn value(&self, s: &str) -> Result<i64, AsmErrorKind> {
        if let Some(v) = parse_int(s) {
            return Ok(v);
        }
        if is_ident(s) {
            return self
                .symbols
                .get(s)
                .map(|&a| a as i64)
                .ok_or_else(|| AsmErrorKind::UndefinedLabel(s.to_string()));
        }
        perr(format!("expected an integer or label, found `{s}`"))
    }

    fn encode_stmt(&self, stmt: &Stmt) -> Result<Vec<u8>, AsmErrorKind> {
        let mut out = Vec::new();
        match &stmt.body {
            Body::Instr { mnemonic, operands } => {
                for (k, instr) in self.expand(stmt.addr, mnemonic, operands)?.iter().enumerate() {
                    debug_assert!(k < 2);
                    out.extend_from_slice(&encode(instr)?.to_be_bytes());
                }
            }
            Body::Words(vals) => {
                for v in vals {
                    let x = self.value(v)?;
                    check_range(x, i32::MIN as i64, u32::MAX as i64, ".word")?;
                    out.extend_from_slice(&(x as u32).to_be_bytes());
                }
            }
            Body::Halves(vals) => {
                for v in vals {
                    let x = self.value(v)?;
                    check_range(x, i16::MIN as i64, u16::MAX as i64, ".half")?;
                    out.extend_from_slice(&(x as u16).to_be_bytes());
                }
            }
            Body::Bytes(vals) => {
                for v in vals {
                    let x = self.value(v)?;
                    check_range(x, i8::MIN as i64, u8::MAX as i64, ".byte")?;
                    out.push(x as u8);
                }
            }
            Body::Floats(vals) => {
                for v in vals {
                    out.extend_from_slice(&parse_float_bits(v)?.to_be_bytes());
                }
            }
            Body::Raw(bytes) => out.extend_from_slice(bytes),
        }
        Ok(out)
    }

    fn gpr(&self, s: &str) -> Result<u8, AsmErrorKind> {
        isa::parse_gpr(s).ok_or_else(|| AsmErrorKind::ParseError(format!("expected a general register, found `{s}`")))
    }

    fn fpr(&self, s: &str) -> Result<u8, AsmErrorKind> {
        isa::parse_fpr(s).ok_or_else(|| AsmErrorKind::ParseError(format!("expected an FP register, found `{s}`")))
    }

    /// PC-relative 16-bit word offset to a label, or a literal offset.
    fn branch_offset(&self, pc: u32, target: &str) -> Result<u32, AsmErrorKind> {
        if let Some(v) = parse_int(target) {
            check_range(v, -32768, 32767, "branch offset")?;
            return Ok(v as u16 as u32);
        }
        let addr = self.value(target)? as u32;
        let delta = addr.wrapping_sub(pc.wrapping_add(4)) as i32 as i64;
        if delta % 4 != 0 || !(-32768 * 4..=32767 * 4).contains(&delta) {
            return Err(AsmErrorKind::BranchOutOfRange(target.to_string()));
        }
        Ok((delta / 4) as u16 as u32)
    }

    fn jump_index(&self, pc: u32, target: &str) -> Result<u32, AsmErrorKind> {
        let addr = self.value(target)?;
        check_range(addr, 0, u32::MAX as i64, "jump target")?;
        let addr = addr as u32;
        if !addr.is_multiple_of(4) || addr & 0xF000_0000 != pc.wrapping_add(4) & 0xF000_0000 {
            return Err(AsmErrorKind::BranchOutOfRange(target.to_string()));
        }
        Ok((addr >> 2) & 0x03FF_FFFF)
    }

    fn mem_operand(&self, s: &str) -> Result<(u32, u8), AsmErrorKind> {
        let open = s.find('(').ok_or_else(|| AsmErrorKind::ParseError(format!("expected offset(base), found `{s}`")))?;
        let close = s.rfind(')').filter(|&c| c > open && s[c + 1..].trim().is_empty());
        let close = close.ok_or_else(|| AsmErrorKind::ParseError(format!("unbalanced `{s}`")))?;
        let off = s[..open].trim();
        let off = if off.is_empty() { 0 } else { self.value(off)? };
        check_range(off, -32768, 32767, "memory offset")?;
        Ok((off as u16 as u32, self.gpr(s[open + 1..close].trim())?))
    }

    fn expand(&self, pc: u32, mnemonic: &str, ops: &[String]) -> Result<Vec<Instruction>, AsmErrorKind> {
        let want = |n: usize| -> Result<(), AsmErrorKind> {
            if ops.len() == n {
                Ok(())
            } else {
                perr(format!("`{mnemonic}` takes {n} operand(s), found {}", ops.len()))
            }
        };
        let new = Instruction::new;
        // pseudo-instructions
        match mnemonic {
            "nop" => {
                want(0)?;
                return Ok(vec![Instruction::nop()]);
            }
            "move" => {
                want(2)?;
                return Ok(vec![new(Opcode::Addu).with_rd(self.gpr(&ops[0])?).with_rs(self.gpr(&ops[1])?)]);
            }
            "b" => {
                want(1)?;
                return Ok(vec![new(Opcode::Beq).with_imm(self.branch_offset(pc, &ops[0])?)]);
            }
            "li" => {
                want(2)?;
                let rt = self.gpr(&ops[0])?;
                let v = self.value(&ops[1])?;
                return Ok(if (-32768..=32767).contains(&v) {
                    vec![new(Opcode::Addiu).with_rt(rt).with_imm(v as u16 as u32)]
                } else if (0..=65535).contains(&v) {
                    vec![new(Opcode::Ori).with_rt(rt).with_imm(v as u32)]
                } else if (v as u32) & 0xFFFF == 0 {
                    vec![new(Opcode::Aui).with_rt(rt).with_imm((v as u32) >> 16)]
                } else {
                    let v = v as u32;
                    vec![
                        new(Opcode::Aui).with_rt(rt).with_imm(v >> 16),
                        new(Opcode::Ori).with_rt(rt).with_rs(rt).with_imm(v & 0xFFFF),
                    ]
                });
            }
            "la" => {
                want(2)?;
                let rt = self.gpr(&ops[0])?;
                let v = self.value(&ops[1])?;
                check_range(v, 0, u32::MAX as i64, "address")?;
                let v = v as u32;
                return Ok(vec![
                    new(Opcode::Aui).with_rt(rt).with_imm(v >> 16),
                    new(Opcode::Ori).with_rt(rt).with_rs(rt).with_imm(v & 0xFFFF),
                ]);
            }
            "lui" => {
                want(2)?;
                let v = self.value(&ops[1])?;
                check_range(v, -32768, 65535, "lui immediate")?;
                return Ok(vec![new(Opcode::Aui).with_rt(self.gpr(&ops[0])?).with_imm(v as u16 as u32)]);
            }
            "jr" => {
                want(1)?;
                return Ok(vec![new(Opcode::Jalr).with_rs(self.gpr(&ops[0])?)]);
            }
            _ => {}
        }
        let op = Opcode::from_mnemonic(mnemonic)
            .ok_or_else(|| AsmErrorKind::UnknownMnemonic(mnemonic.to_string()))?;
        let i = match op.format() {
            Format::RegRegReg => {
                want(3)?;
                new(op).with_rd(self.gpr(&ops[0])?).with_rs(self.gpr(&ops[1])?).with_rt(self.gpr(&ops[2])?)
            }
            Format::ShiftVar => {
                want(3)?;
                new(op).with_rd(self.gpr(&ops[0])?).with_rt(self.gpr(&ops[1])?).with_rs(self.gpr(&ops[2])?)
            }
            Format::ShiftImm => {
                want(3)?;
                let sa = self.value(&ops[2])?;
                check_range(sa, 0, 31, "shift amount")?;
                new(op).with_rd(self.gpr(&ops[0])?).with_rt(self.gpr(&ops[1])?).with_sa(sa as u8)
            }
            Format::Jalr => match ops.len() {
                1 => new(op).with_rd(isa::REG_RA).with_rs(self.gpr(&ops[0])?),
                2 => new(op).with_rd(self.gpr(&ops[0])?).with_rs(self.gpr(&ops[1])?),
                n => return perr(format!("`jalr` takes 1 or 2 operands, found {n}")),
            },
            Format::Bare => {
                want(0)?;
                new(op)
            }
            Format::BranchZero => {
                want(2)?;
                new(op).with_rs(self.gpr(&ops[0])?).with_imm(self.branch_offset(pc, &ops[1])?)
            }
            Format::BranchCmp => {
                want(3)?;
                new(op)
                    .with_rs(self.gpr(&ops[0])?)
                    .with_rt(self.gpr(&ops[1])?)
                    .with_imm(self.branch_offset(pc, &ops[2])?)
            }
            Format::BranchLink => {
                want(1)?;
                new(op).with_imm(self.branch_offset(pc, &ops[0])?)
            }
            Format::Jump => {
                want(1)?;
                new(op).with_imm(self.jump_index(pc, &ops[0])?)
            }
            Format::ImmSigned | Format::ImmUnsigned | Format::Aui => {
                want(3)?;
                let v = self.value(&ops[2])?;
                let (lo, hi) = match op.format() {
                    Format::ImmSigned => (-32768, 32767),
                    Format::ImmUnsigned => (0, 65535),
                    _ => (-32768, 65535),
                };
                check_range(v, lo, hi, "immediate")?;
                new(op).with_rt(self.gpr(&ops[0])?).with_rs(self.gpr(&ops[1])?).with_imm(v as u16 as u32)
            }
            Format::Memory => {
                want(2)?;
                let data = if matches!(op, Opcode::Lwc1 | Opcode::Swc1) {
                    self.fpr(&ops[0])?
                } else {
                    self.gpr(&ops[0])?
                };
                let (off, base) = self.mem_operand(&ops[1])?;
                new(op).with_rt(data).with_rs(base).with_imm(off)
            }
            Format::Cop1Move => {
                want(2)?;
                new(op).with_rt(self.gpr(&ops[0])?).with_rd(self.fpr(&ops[1])?)
            }
            Format::Cop1Branch => {
                want(2)?;
                new(op).with_rt(self.fpr(&ops[0])?).with_imm(self.branch_offset(pc, &ops[1])?)
            }
            Format::FpThree => {
                want(3)?;
                Instruction::fp(op, self.fpr(&ops[0])?, self.fpr(&ops[1])?, self.fpr(&ops[2])?)
            }
            Format::FpTwo => {
                want(2)?;
                Instruction::fp(op, self.fpr(&ops[0])?, self.fpr(&ops[1])?, 0)
            }
        };
        Ok(vec![i])
    }
}

fn check_range(v: i64, lo: i64, hi: i64, what: &str) -> Result<(), AsmErrorKind> {
    if (lo..=hi).contains(&v) {
        Ok(())
    } else {
        perr(format!("{what} {v} out of range {lo}..={hi}"))
    }
}

/// `.float` operand: a decimal literal rounded to nearest-even binary32, or
/// `0x` raw bits.
fn parse_float_bits(s: &str) -> Result<u32, AsmErrorKind> {
    let t = s.trim();
    if let Some(h) = t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        return u32::from_str_radix(h, 16)
            .map_err(|_| AsmErrorKind::ParseError(format!("bad float bits `{t}`")));
    }
    t.parse::<f32>()
        .map(f32::to_bits)
        .map_err(|_| AsmErrorKind::ParseError(format!("bad float literal `{t}`")))
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "text@0x{:08X} data@0x{:08X}", self.text_base, self.data_base)
    }
}
