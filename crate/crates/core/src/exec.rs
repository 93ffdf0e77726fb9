//! Architectural semantics shared by the reference interpreter and the
//! pipeline model.
//!
//! [`execute`] evaluates one instruction against a register file and
//! memory. It performs stores and reads loads immediately but never writes
//! registers; the caller decides when the result becomes visible.

use crate::fpu::{self, ArithOp, CompareCond, Conversion};
use crate::isa::{Instruction, Opcode, Reg, REG_A0, REG_V0, FREG_F12};
use crate::memory::{MemError, Memory, Width};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RegFile {
    pub gpr: [u32; 32],
    pub fpr: [u32; 32],
}

impl RegFile {
    pub fn read(&self, r: Reg) -> u32 {
        match r.bank {
            crate::isa::Bank::Gpr => self.gpr[r.index as usize],
            crate::isa::Bank::Fpr => self.fpr[r.index as usize],
        }
    }

    /// Writes to `$zero` are dropped.
    pub fn write(&mut self, r: Reg, v: u32) {
        match r.bank {
            crate::isa::Bank::Gpr if r.index != 0 => self.gpr[r.index as usize] = v,
            crate::isa::Bank::Gpr => {}
            crate::isa::Bank::Fpr => self.fpr[r.index as usize] = v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Fault {
    #[error("illegal instruction 0x{word:08X} at 0x{pc:08X}")]
    IllegalInstruction { pc: u32, word: u32 },
    #[error("instruction fetch from 0x{pc:08X} outside instruction memory")]
    FetchOutOfRange { pc: u32 },
    #[error("integer overflow at 0x{pc:08X}")]
    IntegerOverflow { pc: u32 },
    #[error("memory fault at 0x{pc:08X}: {error}")]
    Memory { pc: u32, error: MemError },
    #[error("unknown syscall {code} at 0x{pc:08X}")]
    UnknownSyscall { pc: u32, code: u32 },
    #[error("break at 0x{pc:08X}")]
    Break { pc: u32 },
}

impl Fault {
    pub fn name(&self) -> &'static str {
        match self {
            Fault::IllegalInstruction { .. } => "illegal_instruction",
            Fault::FetchOutOfRange { .. } => "fetch_out_of_range",
            Fault::IntegerOverflow { .. } => "integer_overflow",
            Fault::Memory { error: MemError::MisalignedAccess { .. }, .. } => "misaligned_access",
            Fault::Memory { .. } => "address_out_of_range",
            Fault::UnknownSyscall { .. } => "unknown_syscall",
            Fault::Break { .. } => "break",
        }
    }

    pub fn pc(&self) -> u32 {
        match *self {
            Fault::IllegalInstruction { pc, .. }
            | Fault::FetchOutOfRange { pc }
            | Fault::IntegerOverflow { pc }
            | Fault::Memory { pc, .. }
            | Fault::UnknownSyscall { pc, .. }
            | Fault::Break { pc } => pc,
        }
    }
}

/// Why a machine stopped for good.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HaltReason {
    Exit,
    Fault(Fault),
}

impl HaltReason {
    pub fn name(&self) -> &'static str {
        match self {
            HaltReason::Exit => "exit",
            HaltReason::Fault(f) => f.name(),
        }
    }

    pub fn is_fault(&self) -> bool {
        matches!(self, HaltReason::Fault(_))
    }
}

impl std::fmt::Display for HaltReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HaltReason::Exit => f.write_str("exit"),
            HaltReason::Fault(fault) => write!(f, "{fault}"),
        }
    }
}

/// Environment call selected by `$v0`, with operands captured at issue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Service {
    PrintInt(i32),
    PrintFloat(u32),
    PrintString(u32),
    PrintChar(u8),
    Exit,
}

const STRING_LIMIT: usize = 1 << 16;

impl Service {
    fn select(pc: u32, v0: u32, a0: u32, f12: u32) -> Result<Service, Fault> {
        Ok(match v0 {
            1 => Service::PrintInt(a0 as i32),
            2 => Service::PrintFloat(f12),
            4 => Service::PrintString(a0),
            10 => Service::Exit,
            11 => Service::PrintChar(a0 as u8),
            code => return Err(Fault::UnknownSyscall { pc, code }),
        })
    }

    /// Carry out the call. Returns true for exit.
    pub fn perform(&self, pc: u32, mem: &Memory, out: &mut Vec<u8>) -> Result<bool, Fault> {
        match *self {
            Service::PrintInt(v) => out.extend_from_slice(v.to_string().as_bytes()),
            Service::PrintFloat(bits) => out.extend_from_slice(format_float(bits).as_bytes()),
            Service::PrintString(addr) => {
                let s = mem
                    .read_cstring(addr, STRING_LIMIT)
                    .map_err(|error| Fault::Memory { pc, error })?;
                out.extend_from_slice(&s);
            }
            Service::PrintChar(c) => out.push(c),
            Service::Exit => return Ok(true),
        }
        Ok(false)
    }
}

/// Shortest decimal text that reads back as the same binary32 value.
pub fn format_float(bits: u32) -> String {
    format!("{:?}", f32::from_bits(bits))
}

/// What one instruction did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Effect {
    /// Register result, delivered by the caller.
    pub write: Option<(Reg, u32)>,
    /// Architectural successor.
    pub next_pc: u32,
    /// Control transfer taken (always true for unconditional jumps).
    pub taken: bool,
    pub mem_addr: Option<u32>,
    pub service: Option<Service>,
}

fn width_of(op: Opcode) -> (Width, bool) {
    use Opcode::*;
    match op {
        Lb => (Width::Byte, true),
        Lbu | Sb => (Width::Byte, false),
        Lh => (Width::Half, true),
        Lhu | Sh => (Width::Half, false),
        _ => (Width::Word, false),
    }
}

pub fn execute(i: &Instruction, pc: u32, regs: &RegFile, mem: &mut Memory) -> Result<Effect, Fault> {
    use Opcode::*;
    let rs = regs.gpr[i.rs as usize];
    let rt = regs.gpr[i.rt as usize];
    let fs = regs.fpr[i.fs() as usize];
    let ft = regs.fpr[i.ft() as usize];
    let simm = i.simm() as u32;
    let mut effect = Effect {
        write: None,
        next_pc: pc.wrapping_add(4),
        taken: false,
        mem_addr: None,
        service: None,
    };
    let branch = |cond: bool, target: u32, e: &mut Effect| {
        if cond {
            e.taken = true;
            e.next_pc = target;
        }
    };
    let value: Option<u32> = match i.op {
        Sll => Some(rt << i.sa),
        Srl => Some(rt >> i.sa),
        Sra => Some(((rt as i32) >> i.sa) as u32),
        Sllv => Some(rt << (rs & 31)),
        Srlv => Some(rt >> (rs & 31)),
        Srav => Some(((rt as i32) >> (rs & 31)) as u32),
        Add => Some(
            (rs as i32)
                .checked_add(rt as i32)
                .ok_or(Fault::IntegerOverflow { pc })? as u32,
        ),
        Sub => Some(
            (rs as i32)
                .checked_sub(rt as i32)
                .ok_or(Fault::IntegerOverflow { pc })? as u32,
        ),
        Addu => Some(rs.wrapping_add(rt)),
        Subu => Some(rs.wrapping_sub(rt)),
        And => Some(rs & rt),
        Or => Some(rs | rt),
        Xor => Some(rs ^ rt),
        Nor => Some(!(rs | rt)),
        Slt => Some(((rs as i32) < (rt as i32)) as u32),
        Sltu => Some((rs < rt) as u32),
        Mul | Mulu => Some(rs.wrapping_mul(rt)),
        Muh => Some(((rs as i32 as i64 * rt as i32 as i64) >> 32) as u32),
        Muhu => Some(((rs as u64 * rt as u64) >> 32) as u32),
        Div => Some(if rt == 0 { 0 } else { (rs as i32).wrapping_div(rt as i32) as u32 }),
        Mod => Some(if rt == 0 { 0 } else { (rs as i32).wrapping_rem(rt as i32) as u32 }),
        Divu => Some(rs.checked_div(rt).unwrap_or(0)),
        Modu => Some(rs.checked_rem(rt).unwrap_or(0)),
        Syscall => {
            effect.service = Some(Service::select(
                pc,
                regs.gpr[REG_V0 as usize],
                regs.gpr[REG_A0 as usize],
                regs.fpr[FREG_F12 as usize],
            )?);
            None
        }
        Break => return Err(Fault::Break { pc }),
        Addiu => Some(rs.wrapping_add(simm)),
        Slti => Some(((rs as i32) < (simm as i32)) as u32),
        Sltiu => Some((rs < simm) as u32),
        Andi => Some(rs & i.imm),
        Ori => Some(rs | i.imm),
        Xori => Some(rs ^ i.imm),
        Aui => Some(rs.wrapping_add(i.imm << 16)),
        Lb | Lh | Lw | Lbu | Lhu | Lwc1 => {
            let addr = rs.wrapping_add(simm);
            let (w, signed) = width_of(i.op);
            effect.mem_addr = Some(addr);
            Some(mem.read(addr, w, signed).map_err(|error| Fault::Memory { pc, error })?)
        }
        Sb | Sh | Sw | Swc1 => {
            let addr = rs.wrapping_add(simm);
            let (w, _) = width_of(i.op);
            let v = if i.op == Swc1 { regs.fpr[i.rt as usize] } else { rt };
            effect.mem_addr = Some(addr);
            mem.write(addr, w, v).map_err(|error| Fault::Memory { pc, error })?;
            None
        }
        Beq | Bne | Blez | Bgtz | Bltz | Bgez | Bc1eqz | Bc1nez => {
            let cond = match i.op {
                Beq => rs == rt,
                Bne => rs != rt,
                Blez => rs as i32 <= 0,
                Bgtz => rs as i32 > 0,
                Bltz => (rs as i32) < 0,
                Bgez => rs as i32 >= 0,
                Bc1eqz => ft & 1 == 0,
                _ => ft & 1 != 0,
            };
            branch(cond, i.branch_target(pc), &mut effect);
            None
        }
        Bal => {
            branch(true, i.branch_target(pc), &mut effect);
            Some(pc.wrapping_add(4))
        }
        J | Jal => {
            branch(true, i.jump_target(pc), &mut effect);
            Some(pc.wrapping_add(4))
        }
        Jalr => {
            branch(true, rs, &mut effect);
            Some(pc.wrapping_add(4))
        }
        Mfc1 => Some(fs),
        Mtc1 => Some(rt),
        AbsS => Some(fpu::abs(fs)),
        NegS => Some(fpu::neg(fs)),
        MovS => Some(fs),
        CmpEqS | CmpLtS | CmpLeS => {
            let cond = match i.op {
                CmpEqS => CompareCond::Eq,
                CmpLtS => CompareCond::Lt,
                _ => CompareCond::Le,
            };
            Some(if fpu::compare(cond, fs, ft) { u32::MAX } else { 0 })
        }
        AddS => Some(fpu::arith(ArithOp::Add, fs, ft)),
        SubS => Some(fpu::arith(ArithOp::Sub, fs, ft)),
        MulS => Some(fpu::arith(ArithOp::Mul, fs, ft)),
        DivS => Some(fpu::arith(ArithOp::Div, fs, ft)),
        SqrtS => Some(fpu::sqrt(fs)),
        CvtSW => Some(fpu::convert(Conversion::SFromW, fs)),
        CvtWS => Some(fpu::convert(Conversion::WFromSNearest, fs)),
        TruncWS => Some(fpu::convert(Conversion::WFromSTrunc, fs)),
    };
    if let (Some(v), Some(r)) = (value, i.dest()) {
        effect.write = Some((r, v));
    }
    Ok(effect)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memory::MemoryConfig;

    fn run(i: Instruction, setup: impl FnOnce(&mut RegFile)) -> Result<Effect, Fault> {
        let mut regs = RegFile::default();
        setup(&mut regs);
        let mut mem = Memory::new(&MemoryConfig::default());
        execute(&i, 0x0040_0000, &regs, &mut mem)
    }

    fn rrr(op: Opcode, a: u32, b: u32) -> Result<u32, Fault> {
        let i = Instruction::new(op).with_rd(3).with_rs(1).with_rt(2);
        run(i, |r| {
            r.gpr[1] = a;
            r.gpr[2] = b;
        })
        .map(|e| e.write.unwrap().1)
    }

    #[test]
    fn add_traps_on_overflow_addu_wraps() {
        assert_eq!(rrr(Opcode::Add, i32::MAX as u32, 1), Err(Fault::IntegerOverflow { pc: 0x0040_0000 }));
        assert_eq!(rrr(Opcode::Addu, i32::MAX as u32, 1), Ok(0x8000_0000));
        assert!(rrr(Opcode::Sub, 0x8000_0000, 1).is_err());
    }

    #[test]
    fn multiply_divide_family() {
        assert_eq!(rrr(Opcode::Mul, -3i32 as u32, 5), Ok(-15i32 as u32));
        assert_eq!(rrr(Opcode::Muh, -1i32 as u32, 1), Ok(u32::MAX));
        assert_eq!(rrr(Opcode::Muhu, u32::MAX, 2), Ok(1));
        assert_eq!(rrr(Opcode::Div, -7i32 as u32, 2), Ok(-3i32 as u32));
        assert_eq!(rrr(Opcode::Mod, -7i32 as u32, 2), Ok(-1i32 as u32));
        assert_eq!(rrr(Opcode::Div, 5, 0), Ok(0));
        assert_eq!(rrr(Opcode::Div, 0x8000_0000, u32::MAX), Ok(0x8000_0000));
        assert_eq!(rrr(Opcode::Mod, 0x8000_0000, u32::MAX), Ok(0));
        assert_eq!(rrr(Opcode::Modu, 7, 0), Ok(0));
    }

    #[test]
    fn sltiu_compares_against_sign_extended_immediate() {
        let i = Instruction::new(Opcode::Sltiu).with_rt(3).with_rs(1).with_imm(0xFFFF);
        let e = run(i, |r| r.gpr[1] = 5).unwrap();
        assert_eq!(e.write, Some((Reg::gpr(3), 1)));
        let i = Instruction::new(Opcode::Ori).with_rt(3).with_rs(0).with_imm(0xFFFF);
        assert_eq!(run(i, |_| {}).unwrap().write, Some((Reg::gpr(3), 0xFFFF)));
    }

    #[test]
    fn zero_register_result_is_dropped() {
        let i = Instruction::new(Opcode::Addiu).with_rt(0).with_imm(5);
        assert_eq!(run(i, |_| {}).unwrap().write, None);
    }

    #[test]
    fn branches_and_links() {
        let beq = Instruction::new(Opcode::Beq).with_rs(1).with_rt(2).with_imm(0xFFFF);
        let e = run(beq, |_| {}).unwrap();
        assert!(e.taken);
        assert_eq!(e.next_pc, 0x0040_0000);
        let e = run(beq, |r| r.gpr[1] = 1).unwrap();
        assert!(!e.taken);
        assert_eq!(e.next_pc, 0x0040_0004);
        let jalr = Instruction::new(Opcode::Jalr).with_rs(4).with_rd(31);
        let e = run(jalr, |r| r.gpr[4] = 0x0040_0100).unwrap();
        assert_eq!((e.next_pc, e.write), (0x0040_0100, Some((Reg::gpr(31), 0x0040_0004))));
    }

    #[test]
    fn loads_and_stores_go_through_memory() {
        let mut regs = RegFile::default();
        regs.gpr[1] = 0x1001_0000;
        regs.gpr[2] = 0xFFFF_FF80;
        let mut mem = Memory::new(&MemoryConfig::default());
        let sb = Instruction::new(Opcode::Sb).with_rs(1).with_rt(2).with_imm(3);
        execute(&sb, 0, &regs, &mut mem).unwrap();
        let lb = Instruction::new(Opcode::Lb).with_rs(1).with_rt(5).with_imm(3);
        let lbu = Instruction::new(Opcode::Lbu).with_rs(1).with_rt(5).with_imm(3);
        assert_eq!(execute(&lb, 0, &regs, &mut mem).unwrap().write.unwrap().1, 0xFFFF_FF80);
        assert_eq!(execute(&lbu, 0, &regs, &mut mem).unwrap().write.unwrap().1, 0x80);
        let lw = Instruction::new(Opcode::Lw).with_rs(1).with_rt(5).with_imm(2);
        assert!(matches!(
            execute(&lw, 0, &regs, &mut mem),
            Err(Fault::Memory { error: MemError::MisalignedAccess { .. }, .. })
        ));
    }

    #[test]
    fn fp_compare_writes_mask() {
        let i = Instruction::fp(Opcode::CmpLtS, 3, 1, 2);
        let e = run(i, |r| {
            r.fpr[1] = 1.0f32.to_bits();
            r.fpr[2] = 2.0f32.to_bits();
        })
        .unwrap();
        assert_eq!(e.write, Some((Reg::fpr(3), u32::MAX)));
    }

    #[test]
    fn syscall_selects_service() {
        let i = Instruction::new(Opcode::Syscall);
        let e = run(i, |r| {
            r.gpr[2] = 1;
            r.gpr[4] = -5i32 as u32;
        })
        .unwrap();
        assert_eq!(e.service, Some(Service::PrintInt(-5)));
        assert!(matches!(run(i, |r| r.gpr[2] = 99), Err(Fault::UnknownSyscall { code: 99, .. })));
    }

    #[test]
    fn float_text() {
        assert_eq!(format_float(0x4049_0FDB), "3.1415927");
        assert_eq!(format_float(0x4049_0FDA), "3.1415925");
        assert_eq!(format_float(0x3F80_0000), "1.0");
    }
}
