//! The supported MIPS32 Release 6 subset.
//!
//! Instructions are kept in a flat, position-keyed form: `rs`, `rt`, `rd`
//! and `sa` name the 5-bit fields at bits 25..21, 20..16, 15..11 and 10..6,
//! and `imm` holds the 16-bit immediate or the 26-bit jump index. Which
//! fields are meaningful depends on the opcode's [`Format`]; unused fields
//! are always zero in a decoded (canonical) instruction.
//!
//! COP1 arithmetic follows the hardware layout, so for `add.s fd, fs, ft`
//! the register numbers live in `sa` (fd), `rd` (fs) and `rt` (ft). Use the
//! [`Instruction::fd`], [`Instruction::fs`] and [`Instruction::ft`]
//! accessors rather than poking at the raw positions.

mod codec;
mod disasm;

pub use codec::{decode, encode, DecodeError, EncodeError};
pub use disasm::{disassemble, fpr_name, gpr_name, parse_fpr, parse_gpr};

use serde::{Deserialize, Serialize};
use std::fmt;

/// Canonical NOP (`sll $zero, $zero, 0`).
pub const NOP: u32 = 0;

/// Which register file a register index belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Bank {
    Gpr,
    Fpr,
}

/// A register in one of the two architectural register files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Reg {
    pub bank: Bank,
    pub index: u8,
}

impl Reg {
    pub const fn gpr(index: u8) -> Self {
        Reg { bank: Bank::Gpr, index }
    }

    pub const fn fpr(index: u8) -> Self {
        Reg { bank: Bank::Fpr, index }
    }

    /// `$zero` never holds a pending write.
    pub fn is_zero(self) -> bool {
        self.bank == Bank::Gpr && self.index == 0
    }
}

impl fmt::Display for Reg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.bank {
            Bank::Gpr => f.write_str(gpr_name(self.index)),
            Bank::Fpr => f.write_str(&fpr_name(self.index)),
        }
    }
}

pub const REG_V0: u8 = 2;
pub const REG_A0: u8 = 4;
pub const REG_SP: u8 = 29;
pub const REG_RA: u8 = 31;
pub const FREG_F12: u8 = 12;

/// Functional unit an instruction issues to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum UnitClass {
    Int,
    #[serde(rename = "LOADSTORE")]
    LoadStore,
    Branch,
    FpSimple,
    FpMed,
    FpLong,
}

impl UnitClass {
    pub const ALL: [UnitClass; 6] = [
        UnitClass::Int,
        UnitClass::LoadStore,
        UnitClass::Branch,
        UnitClass::FpSimple,
        UnitClass::FpMed,
        UnitClass::FpLong,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Operand layout of an opcode, used by the codec, the disassembler and the
/// assembler's operand parser.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    /// `op rd, rs, rt`
    RegRegReg,
    /// `op rd, rt, rs` (variable shifts)
    ShiftVar,
    /// `op rd, rt, sa`
    ShiftImm,
    /// `jalr rd, rs`
    Jalr,
    /// no operands
    Bare,
    /// `op rs, offset`
    BranchZero,
    /// `op rs, rt, offset`
    BranchCmp,
    /// `bal offset`
    BranchLink,
    /// `op target`
    Jump,
    /// `op rt, rs, imm` with sign-extended immediate
    ImmSigned,
    /// `op rt, rs, imm` with zero-extended immediate
    ImmUnsigned,
    /// `aui rt, rs, imm` (`lui rt, imm` when rs is `$zero`)
    Aui,
    /// `op rt, offset(rs)`; rt is an FPR for lwc1/swc1
    Memory,
    /// `op rt, fs` (mfc1 / mtc1)
    Cop1Move,
    /// `op ft, offset`
    Cop1Branch,
    /// `op fd, fs, ft`
    FpThree,
    /// `op fd, fs`
    FpTwo,
}

macro_rules! opcodes {
    ($($name:ident => $mn:literal, $fmt:ident, $unit:ident;)*) => {
        /// Every supported operation.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum Opcode {
            $($name,)*
        }

        impl Opcode {
            pub const ALL: &'static [Opcode] = &[$(Opcode::$name,)*];

            pub fn mnemonic(self) -> &'static str {
                match self {
                    $(Opcode::$name => $mn,)*
                }
            }

            pub fn format(self) -> Format {
                match self {
                    $(Opcode::$name => Format::$fmt,)*
                }
            }

            pub fn unit_class(self) -> UnitClass {
                match self {
                    $(Opcode::$name => UnitClass::$unit,)*
                }
            }

            pub fn from_mnemonic(s: &str) -> Option<Opcode> {
                match s {
                    $($mn => Some(Opcode::$name),)*
                    _ => None,
                }
            }
        }
    };
}

opcodes! {
    Sll => "sll", ShiftImm, Int;
    Srl => "srl", ShiftImm, Int;
    Sra => "sra", ShiftImm, Int;
    Sllv => "sllv", ShiftVar, Int;
    Srlv => "srlv", ShiftVar, Int;
    Srav => "srav", ShiftVar, Int;
    Add => "add", RegRegReg, Int;
    Addu => "addu", RegRegReg, Int;
    Sub => "sub", RegRegReg, Int;
    Subu => "subu", RegRegReg, Int;
    And => "and", RegRegReg, Int;
    Or => "or", RegRegReg, Int;
    Xor => "xor", RegRegReg, Int;
    Nor => "nor", RegRegReg, Int;
    Slt => "slt", RegRegReg, Int;
    Sltu => "sltu", RegRegReg, Int;
    Mul => "mul", RegRegReg, Int;
    Muh => "muh", RegRegReg, Int;
    Mulu => "mulu", RegRegReg, Int;
    Muhu => "muhu", RegRegReg, Int;
    Div => "div", RegRegReg, Int;
    Mod => "mod", RegRegReg, Int;
    Divu => "divu", RegRegReg, Int;
    Modu => "modu", RegRegReg, Int;
    Syscall => "syscall", Bare, Int;
    Break => "break", Bare, Int;
    Addiu => "addiu", ImmSigned, Int;
    Slti => "slti", ImmSigned, Int;
    Sltiu => "sltiu", ImmSigned, Int;
    Andi => "andi", ImmUnsigned, Int;
    Ori => "ori", ImmUnsigned, Int;
    Xori => "xori", ImmUnsigned, Int;
    Aui => "aui", Aui, Int;
    Lb => "lb", Memory, LoadStore;
    Lh => "lh", Memory, LoadStore;
    Lw => "lw", Memory, LoadStore;
    Lbu => "lbu", Memory, LoadStore;
    Lhu => "lhu", Memory, LoadStore;
    Sb => "sb", Memory, LoadStore;
    Sh => "sh", Memory, LoadStore;
    Sw => "sw", Memory, LoadStore;
    Lwc1 => "lwc1", Memory, LoadStore;
    Swc1 => "swc1", Memory, LoadStore;
    Beq => "beq", BranchCmp, Branch;
    Bne => "bne", BranchCmp, Branch;
    Blez => "blez", BranchZero, Branch;
    Bgtz => "bgtz", BranchZero, Branch;
    Bltz => "bltz", BranchZero, Branch;
    Bgez => "bgez", BranchZero, Branch;
    Bal => "bal", BranchLink, Branch;
    J => "j", Jump, Branch;
    Jal => "jal", Jump, Branch;
    Jalr => "jalr", Jalr, Branch;
    Bc1eqz => "bc1eqz", Cop1Branch, Branch;
    Bc1nez => "bc1nez", Cop1Branch, Branch;
    Mfc1 => "mfc1", Cop1Move, FpSimple;
    Mtc1 => "mtc1", Cop1Move, FpSimple;
    AbsS => "abs.s", FpTwo, FpSimple;
    NegS => "neg.s", FpTwo, FpSimple;
    MovS => "mov.s", FpTwo, FpSimple;
    CmpEqS => "cmp.eq.s", FpThree, FpSimple;
    CmpLtS => "cmp.lt.s", FpThree, FpSimple;
    CmpLeS => "cmp.le.s", FpThree, FpSimple;
    AddS => "add.s", FpThree, FpMed;
    SubS => "sub.s", FpThree, FpMed;
    MulS => "mul.s", FpThree, FpMed;
    CvtSW => "cvt.s.w", FpTwo, FpMed;
    CvtWS => "cvt.w.s", FpTwo, FpMed;
    TruncWS => "trunc.w.s", FpTwo, FpMed;
    DivS => "div.s", FpThree, FpLong;
    SqrtS => "sqrt.s", FpTwo, FpLong;
}

impl Opcode {
    pub fn is_load(self) -> bool {
        matches!(
            self,
            Opcode::Lb | Opcode::Lh | Opcode::Lw | Opcode::Lbu | Opcode::Lhu | Opcode::Lwc1
        )
    }

    pub fn is_store(self) -> bool {
        matches!(self, Opcode::Sb | Opcode::Sh | Opcode::Sw | Opcode::Swc1)
    }

    /// Branches whose direction depends on register values.
    pub fn is_conditional_branch(self) -> bool {
        matches!(
            self,
            Opcode::Beq
                | Opcode::Bne
                | Opcode::Blez
                | Opcode::Bgtz
                | Opcode::Bltz
                | Opcode::Bgez
                | Opcode::Bc1eqz
                | Opcode::Bc1nez
        )
    }

    /// Any instruction that may redirect control flow.
    pub fn is_control(self) -> bool {
        self.unit_class() == UnitClass::Branch
    }

    /// Integer multiply/divide family (shares the INT unit, latency overridable).
    pub fn is_muldiv(self) -> bool {
        matches!(
            self,
            Opcode::Mul
                | Opcode::Muh
                | Opcode::Mulu
                | Opcode::Muhu
                | Opcode::Div
                | Opcode::Mod
                | Opcode::Divu
                | Opcode::Modu
        )
    }
}

/// A fully decoded instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Instruction {
    pub op: Opcode,
    pub rs: u8,
    pub rt: u8,
    pub rd: u8,
    pub sa: u8,
    pub imm: u32,
}

/// Up to three source registers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Sources {
    regs: [Option<Reg>; 3],
}

impl Sources {
    fn of(list: &[Reg]) -> Self {
        let mut regs = [None; 3];
        for (slot, r) in regs.iter_mut().zip(list) {
            *slot = Some(*r);
        }
        Sources { regs }
    }

    pub fn iter(&self) -> impl Iterator<Item = Reg> + '_ {
        self.regs.iter().flatten().copied()
    }
}

impl Instruction {
    /// An instruction with every field zero; fill in the ones the format uses.
    pub const fn new(op: Opcode) -> Self {
        Instruction { op, rs: 0, rt: 0, rd: 0, sa: 0, imm: 0 }
    }

    pub fn nop() -> Self {
        Instruction::new(Opcode::Sll)
    }

    pub fn with_rs(mut self, v: u8) -> Self {
        self.rs = v;
        self
    }

    pub fn with_rt(mut self, v: u8) -> Self {
        self.rt = v;
        self
    }

    pub fn with_rd(mut self, v: u8) -> Self {
        self.rd = v;
        self
    }

    pub fn with_sa(mut self, v: u8) -> Self {
        self.sa = v;
        self
    }

    pub fn with_imm(mut self, v: u32) -> Self {
        self.imm = v;
        self
    }

    /// `op fd, fs, ft` / `op fd, fs` constructor for COP1 arithmetic.
    pub fn fp(op: Opcode, fd: u8, fs: u8, ft: u8) -> Self {
        Instruction::new(op).with_sa(fd).with_rd(fs).with_rt(ft)
    }

    pub fn fd(&self) -> u8 {
        self.sa
    }

    pub fn fs(&self) -> u8 {
        self.rd
    }

    pub fn ft(&self) -> u8 {
        self.rt
    }

    pub fn unit_class(&self) -> UnitClass {
        self.op.unit_class()
    }

    /// 16-bit immediate sign-extended.
    pub fn simm(&self) -> i32 {
        self.imm as u16 as i16 as i32
    }

    /// Absolute target of a PC-relative branch at `pc`.
    pub fn branch_target(&self, pc: u32) -> u32 {
        pc.wrapping_add(4).wrapping_add((self.simm() << 2) as u32)
    }

    /// Absolute target of a J/JAL at `pc`.
    pub fn jump_target(&self, pc: u32) -> u32 {
        (pc.wrapping_add(4) & 0xF000_0000) | (self.imm << 2)
    }

    /// Is this the canonical all-zero NOP?
    pub fn is_nop(&self) -> bool {
        self.op == Opcode::Sll && self.rd == 0 && self.rt == 0 && self.sa == 0
    }

    /// Destination register, if the instruction writes one. Writes to
    /// `$zero` are discarded and reported as no destination.
    pub fn dest(&self) -> Option<Reg> {
        use Opcode::*;
        let reg = match self.op.format() {
            Format::RegRegReg | Format::ShiftVar | Format::ShiftImm | Format::Jalr => {
                Reg::gpr(self.rd)
            }
            Format::ImmSigned | Format::ImmUnsigned | Format::Aui => Reg::gpr(self.rt),
            Format::Memory => match self.op {
                Lwc1 => Reg::fpr(self.rt),
                op if op.is_load() => Reg::gpr(self.rt),
                _ => return None,
            },
            Format::BranchLink => Reg::gpr(REG_RA),
            Format::Jump => {
                if self.op == Jal {
                    Reg::gpr(REG_RA)
                } else {
                    return None;
                }
            }
            Format::Cop1Move => match self.op {
                Mfc1 => Reg::gpr(self.rt),
                _ => Reg::fpr(self.fs()),
            },
            Format::FpThree | Format::FpTwo => Reg::fpr(self.fd()),
            Format::Bare | Format::BranchZero | Format::BranchCmp | Format::Cop1Branch => {
                return None
            }
        };
        if reg.is_zero() {
            None
        } else {
            Some(reg)
        }
    }

    pub fn writes_dest(&self) -> bool {
        self.dest().is_some()
    }

    /// Registers read by the instruction. `syscall` implicitly reads the
    /// service number and argument registers.
    pub fn sources(&self) -> Sources {
        use Opcode::*;
        let g = Reg::gpr;
        let f = Reg::fpr;
        match self.op.format() {
            Format::RegRegReg | Format::ShiftVar | Format::BranchCmp => {
                Sources::of(&[g(self.rs), g(self.rt)])
            }
            Format::ShiftImm => Sources::of(&[g(self.rt)]),
            Format::Jalr | Format::BranchZero | Format::ImmSigned | Format::ImmUnsigned => {
                Sources::of(&[g(self.rs)])
            }
            Format::Aui => Sources::of(&[g(self.rs)]),
            Format::Memory => match self.op {
                Sb | Sh | Sw => Sources::of(&[g(self.rs), g(self.rt)]),
                Swc1 => Sources::of(&[g(self.rs), f(self.rt)]),
                _ => Sources::of(&[g(self.rs)]),
            },
            Format::Bare => match self.op {
                Syscall => Sources::of(&[g(REG_V0), g(REG_A0), f(FREG_F12)]),
                _ => Sources::default(),
            },
            Format::BranchLink | Format::Jump => Sources::default(),
            Format::Cop1Move => match self.op {
                Mfc1 => Sources::of(&[f(self.fs())]),
                _ => Sources::of(&[g(self.rt)]),
            },
            Format::Cop1Branch => Sources::of(&[f(self.ft())]),
            Format::FpThree => Sources::of(&[f(self.fs()), f(self.ft())]),
            Format::FpTwo => Sources::of(&[f(self.fs())]),
        }
    }

    /// Zero every field the format does not use.
    pub fn canonical(&self) -> Instruction {
        let mut c = Instruction::new(self.op);
        match self.op.format() {
            Format::RegRegReg | Format::ShiftVar => {
                c.rs = self.rs;
                c.rt = self.rt;
                c.rd = self.rd;
            }
            Format::ShiftImm => {
                c.rt = self.rt;
                c.rd = self.rd;
                c.sa = self.sa;
            }
            Format::Jalr => {
                c.rs = self.rs;
                c.rd = self.rd;
            }
            Format::Bare => {}
            Format::BranchZero => {
                c.rs = self.rs;
                c.imm = self.imm & 0xFFFF;
            }
            Format::BranchCmp | Format::ImmSigned | Format::ImmUnsigned | Format::Aui
            | Format::Memory => {
                c.rs = self.rs;
                c.rt = self.rt;
                c.imm = self.imm & 0xFFFF;
            }
            Format::BranchLink => c.imm = self.imm & 0xFFFF,
            Format::Jump => c.imm = self.imm & 0x03FF_FFFF,
            Format::Cop1Move => {
                c.rt = self.rt;
                c.rd = self.rd;
            }
            Format::Cop1Branch => {
                c.rt = self.rt;
                c.imm = self.imm & 0xFFFF;
            }
            Format::FpThree => {
                c.rt = self.rt;
                c.rd = self.rd;
                c.sa = self.sa;
            }
            Format::FpTwo => {
                c.rd = self.rd;
                c.sa = self.sa;
            }
        }
        c
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&disassemble(self))
    }
}
