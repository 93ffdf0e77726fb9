use super::{Format, Instruction, Opcode};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("illegal instruction word 0x{0:08X}")]
    IllegalInstruction(u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("{field} value {value} does not fit in {bits} bits for `{mnemonic}`")]
    UnencodableField {
        mnemonic: &'static str,
        field: &'static str,
        value: u32,
        bits: u32,
    },
}

const OP_SPECIAL: u32 = 0x00;
const OP_REGIMM: u32 = 0x01;
const OP_COP1: u32 = 0x11;

const FMT_MFC1: u32 = 0x00;
const FMT_MTC1: u32 = 0x04;
const FMT_BC1EQZ: u32 = 0x09;
const FMT_BC1NEZ: u32 = 0x0D;
const FMT_S: u32 = 0x10;
const FMT_W: u32 = 0x14;

/// Where an opcode lives in the encoding space.
enum Slot {
    /// SPECIAL with a function code and a fixed `sa` value (R6 mul/div use
    /// `sa` as a sub-opcode).
    Special { funct: u32, sa: Option<u32> },
    RegImm { rt: u32 },
    Primary { op: u32 },
    Cop1 { fmt: u32, funct: Option<u32> },
}

fn slot(op: Opcode) -> Slot {
    use Opcode::*;
    let special = |funct| Slot::Special { funct, sa: None };
    let muldiv = |funct, sa| Slot::Special { funct, sa: Some(sa) };
    let primary = |op| Slot::Primary { op };
    let s = |funct| Slot::Cop1 { fmt: FMT_S, funct: Some(funct) };
    match op {
        Sll => special(0x00),
        Srl => special(0x02),
        Sra => special(0x03),
        Sllv => special(0x04),
        Srlv => special(0x06),
        Srav => special(0x07),
        Jalr => special(0x09),
        Syscall => special(0x0C),
        Break => special(0x0D),
        Mul => muldiv(0x18, 2),
        Muh => muldiv(0x18, 3),
        Mulu => muldiv(0x19, 2),
        Muhu => muldiv(0x19, 3),
        Div => muldiv(0x1A, 2),
        Mod => muldiv(0x1A, 3),
        Divu => muldiv(0x1B, 2),
        Modu => muldiv(0x1B, 3),
        Add => special(0x20),
        Addu => special(0x21),
        Sub => special(0x22),
        Subu => special(0x23),
        And => special(0x24),
        Or => special(0x25),
        Xor => special(0x26),
        Nor => special(0x27),
        Slt => special(0x2A),
        Sltu => special(0x2B),
        Bltz => Slot::RegImm { rt: 0x00 },
        Bgez => Slot::RegImm { rt: 0x01 },
        Bal => Slot::RegImm { rt: 0x11 },
        J => primary(0x02),
        Jal => primary(0x03),
        Beq => primary(0x04),
        Bne => primary(0x05),
        Blez => primary(0x06),
        Bgtz => primary(0x07),
        Addiu => primary(0x09),
        Slti => primary(0x0A),
        Sltiu => primary(0x0B),
        Andi => primary(0x0C),
        Ori => primary(0x0D),
        Xori => primary(0x0E),
        Aui => primary(0x0F),
        Lb => primary(0x20),
        Lh => primary(0x21),
        Lw => primary(0x23),
        Lbu => primary(0x24),
        Lhu => primary(0x25),
        Sb => primary(0x28),
        Sh => primary(0x29),
        Sw => primary(0x2B),
        Lwc1 => primary(0x31),
        Swc1 => primary(0x39),
        Mfc1 => Slot::Cop1 { fmt: FMT_MFC1, funct: None },
        Mtc1 => Slot::Cop1 { fmt: FMT_MTC1, funct: None },
        Bc1eqz => Slot::Cop1 { fmt: FMT_BC1EQZ, funct: None },
        Bc1nez => Slot::Cop1 { fmt: FMT_BC1NEZ, funct: None },
        AddS => s(0x00),
        SubS => s(0x01),
        MulS => s(0x02),
        DivS => s(0x03),
        SqrtS => s(0x04),
        AbsS => s(0x05),
        MovS => s(0x06),
        NegS => s(0x07),
        TruncWS => s(0x0D),
        CvtWS => s(0x24),
        CvtSW => Slot::Cop1 { fmt: FMT_W, funct: Some(0x20) },
        CmpEqS => Slot::Cop1 { fmt: FMT_W, funct: Some(0x02) },
        CmpLtS => Slot::Cop1 { fmt: FMT_W, funct: Some(0x04) },
        CmpLeS => Slot::Cop1 { fmt: FMT_W, funct: Some(0x06) },
    }
}

fn check(op: Opcode, field: &'static str, value: u32, bits: u32) -> Result<u32, EncodeError> {
    if value >> bits != 0 {
        Err(EncodeError::UnencodableField { mnemonic: op.mnemonic(), field, value, bits })
    } else {
        Ok(value)
    }
}

/// Encode an instruction. Fields not used by the opcode's format are
/// ignored (encoded as zero).
pub fn encode(instr: &Instruction) -> Result<u32, EncodeError> {
    let i = instr.canonical();
    let op = i.op;
    let rs = check(op, "rs", i.rs as u32, 5)?;
    let rt = check(op, "rt", i.rt as u32, 5)?;
    let rd = check(op, "rd", i.rd as u32, 5)?;
    let sa = check(op, "sa", i.sa as u32, 5)?;
    // canonical() masks imm, so range-check the caller's value
    let imm = match op.format() {
        Format::Jump => check(op, "target", instr.imm, 26)?,
        Format::Bare | Format::RegRegReg | Format::ShiftVar | Format::ShiftImm | Format::Jalr
        | Format::Cop1Move | Format::FpThree | Format::FpTwo => 0,
        _ => check(op, "immediate", instr.imm, 16)?,
    };
    let fields = (rs << 21) | (rt << 16) | (rd << 11) | (sa << 6);
    Ok(match slot(op) {
        Slot::Special { funct, sa: fixed } => {
            let sa_bits = fixed.map(|v| v << 6).unwrap_or(0);
            (OP_SPECIAL << 26) | fields | sa_bits | funct
        }
        Slot::RegImm { rt } => (OP_REGIMM << 26) | (rs << 21) | (rt << 16) | imm,
        Slot::Primary { op } => (op << 26) | fields | imm,
        Slot::Cop1 { fmt, funct } => {
            (OP_COP1 << 26) | (fmt << 21) | (rt << 16) | (rd << 11) | (sa << 6) | imm | funct.unwrap_or(0)
        }
    })
}

/// Decode a word. Words outside the supported subset, including supported
/// opcodes with non-zero reserved fields, are rejected so that
/// `encode(decode(w)) == w` holds for every accepted word.
pub fn decode(word: u32) -> Result<Instruction, DecodeError> {
    use Opcode::*;
    let illegal = Err(DecodeError::IllegalInstruction(word));
    let op = word >> 26;
    let rs = ((word >> 21) & 31) as u8;
    let rt = ((word >> 16) & 31) as u8;
    let rd = ((word >> 11) & 31) as u8;
    let sa = ((word >> 6) & 31) as u8;
    let funct = word & 63;
    let imm16 = word & 0xFFFF;

    let opcode = match op {
        OP_SPECIAL => match (funct, sa) {
            (0x00, _) => Sll,
            (0x02, _) => Srl,
            (0x03, _) => Sra,
            (0x04, 0) => Sllv,
            (0x06, 0) => Srlv,
            (0x07, 0) => Srav,
            (0x09, 0) => Jalr,
            (0x0C, _) => Syscall,
            (0x0D, _) => Break,
            (0x18, 2) => Mul,
            (0x18, 3) => Muh,
            (0x19, 2) => Mulu,
            (0x19, 3) => Muhu,
            (0x1A, 2) => Div,
            (0x1A, 3) => Mod,
            (0x1B, 2) => Divu,
            (0x1B, 3) => Modu,
            (0x20, 0) => Add,
            (0x21, 0) => Addu,
            (0x22, 0) => Sub,
            (0x23, 0) => Subu,
            (0x24, 0) => And,
            (0x25, 0) => Or,
            (0x26, 0) => Xor,
            (0x27, 0) => Nor,
            (0x2A, 0) => Slt,
            (0x2B, 0) => Sltu,
            _ => return illegal,
        },
        OP_REGIMM => match rt {
            0x00 => Bltz,
            0x01 => Bgez,
            0x11 if rs == 0 => Bal,
            _ => return illegal,
        },
        0x02 => J,
        0x03 => Jal,
        0x04 => Beq,
        0x05 => Bne,
        0x06 if rt == 0 => Blez,
        0x07 if rt == 0 => Bgtz,
        0x09 => Addiu,
        0x0A => Slti,
        0x0B => Sltiu,
        0x0C => Andi,
        0x0D => Ori,
        0x0E => Xori,
        0x0F => Aui,
        0x20 => Lb,
        0x21 => Lh,
        0x23 => Lw,
        0x24 => Lbu,
        0x25 => Lhu,
        0x28 => Sb,
        0x29 => Sh,
        0x2B => Sw,
        0x31 => Lwc1,
        0x39 => Swc1,
        OP_COP1 => match (rs as u32, funct) {
            (FMT_MFC1, _) => Mfc1,
            (FMT_MTC1, _) => Mtc1,
            (FMT_BC1EQZ, _) => Bc1eqz,
            (FMT_BC1NEZ, _) => Bc1nez,
            (FMT_S, 0x00) => AddS,
            (FMT_S, 0x01) => SubS,
            (FMT_S, 0x02) => MulS,
            (FMT_S, 0x03) => DivS,
            (FMT_S, 0x04) => SqrtS,
            (FMT_S, 0x05) => AbsS,
            (FMT_S, 0x06) => MovS,
            (FMT_S, 0x07) => NegS,
            (FMT_S, 0x0D) => TruncWS,
            (FMT_S, 0x24) => CvtWS,
            (FMT_W, 0x20) => CvtSW,
            (FMT_W, 0x02) => CmpEqS,
            (FMT_W, 0x04) => CmpLtS,
            (FMT_W, 0x06) => CmpLeS,
            _ => return illegal,
        },
        _ => return illegal,
    };

    let instr = Instruction { op: opcode, rs, rt, rd, sa, imm: word & 0x03FF_FFFF };
    let instr = match opcode.format() {
        Format::Jump => Instruction { imm: word & 0x03FF_FFFF, ..Instruction::new(opcode) },
        Format::BranchZero | Format::BranchCmp | Format::BranchLink | Format::ImmSigned
        | Format::ImmUnsigned | Format::Aui | Format::Memory | Format::Cop1Branch => {
            Instruction { imm: imm16, ..instr }.canonical()
        }
        _ => instr.canonical(),
    };
    // Reject anything with bits in don't-care fields.
    match encode(&instr) {
        Ok(w) if w == word => Ok(instr),
        _ => illegal,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::UnitClass;

    #[test]
    fn decodes_addu() {
        let i = decode(0x0022_1821).unwrap();
        assert_eq!(i.op, Opcode::Addu);
        assert_eq!((i.rd, i.rs, i.rt), (3, 1, 2));
        assert_eq!(i.unit_class(), UnitClass::Int);
    }

    #[test]
    fn zero_word_is_nop() {
        let i = decode(0).unwrap();
        assert!(i.is_nop());
        assert_eq!(i.dest(), None);
    }

    #[test]
    fn decodes_add_s() {
        let i = decode(0x4607_3200).unwrap();
        assert_eq!(i.op, Opcode::AddS);
        assert_eq!((i.fd(), i.fs(), i.ft()), (8, 6, 7));
        assert_eq!(i.unit_class(), UnitClass::FpMed);
    }

    #[test]
    fn encodes_reference_words() {
        let addiu = Instruction::new(Opcode::Addiu).with_rt(8).with_imm(5);
        assert_eq!(encode(&addiu).unwrap(), 0x2408_0005);
        let lw = Instruction::new(Opcode::Lw).with_rt(8).with_rs(29).with_imm(4);
        assert_eq!(encode(&lw).unwrap(), 0x8FA8_0004);
        assert_eq!(encode(&Instruction::nop()).unwrap(), 0);
    }

    #[test]
    fn rejects_oversized_fields() {
        let bad = Instruction::new(Opcode::Addiu).with_rt(8).with_imm(0x1_0000);
        assert!(matches!(encode(&bad), Err(EncodeError::UnencodableField { .. })));
        let bad = Instruction::new(Opcode::Sll).with_rd(1).with_sa(32);
        assert!(encode(&bad).is_err());
        let bad = Instruction::new(Opcode::J).with_imm(1 << 26);
        assert!(encode(&bad).is_err());
    }

    #[test]
    fn rejects_words_outside_subset() {
        // pre-R6 MULT (HI/LO), ADDI (op 8 is a compact branch in R6), ROTR,
        // LWL, and a SYSCALL with a non-zero code field
        for w in [0x0022_0018u32, 0x2008_0001, 0x0020_1042, 0x8800_0000, 0x0000_010C] {
            assert!(decode(w).is_err(), "{w:08x}");
        }
    }

    #[test]
    fn r6_multiply_divide_encodings() {
        // mul $v1, $at, $v0 -> SPECIAL sa=2 funct=0x18
        let mul = Instruction::new(Opcode::Mul).with_rd(3).with_rs(1).with_rt(2);
        assert_eq!(encode(&mul).unwrap(), 0x0022_1898);
        let modu = Instruction::new(Opcode::Modu).with_rd(3).with_rs(1).with_rt(2);
        assert_eq!(encode(&modu).unwrap(), 0x0022_18DB);
        assert_eq!(decode(0x0022_18DB).unwrap(), modu);
    }

    #[test]
    fn cop1_compare_and_branch() {
        let cmp = Instruction::fp(Opcode::CmpLtS, 0, 1, 2);
        let w = encode(&cmp).unwrap();
        assert_eq!(w, 0x4682_0804);
        assert_eq!(decode(w).unwrap(), cmp);
        let b = Instruction::new(Opcode::Bc1nez).with_rt(0).with_imm(0xFFFE);
        assert_eq!(encode(&b).unwrap(), 0x45A0_FFFE);
    }

    #[test]
    fn every_opcode_has_an_encoding() {
        for &op in Opcode::ALL {
            let w = encode(&Instruction::new(op)).unwrap();
            // bal requires rs == 0 which the zero instruction satisfies
            assert_eq!(decode(w).unwrap().op, op, "{}", op.mnemonic());
        }
    }
}
