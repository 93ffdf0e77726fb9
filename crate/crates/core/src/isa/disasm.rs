use super::{Format, Instruction, Opcode};

const GPR_NAMES: [&str; 32] = [
    "$zero", "$at", "$v0", "$v1", "$a0", "$a1", "$a2", "$a3", "$t0", "$t1", "$t2", "$t3", "$t4",
    "$t5", "$t6", "$t7", "$s0", "$s1", "$s2", "$s3", "$s4", "$s5", "$s6", "$s7", "$t8", "$t9",
    "$k0", "$k1", "$gp", "$sp", "$fp", "$ra",
];

pub fn gpr_name(index: u8) -> &'static str {
    GPR_NAMES[index as usize & 31]
}

pub fn fpr_name(index: u8) -> String {
    format!("$f{}", index & 31)
}

/// Parse `$t0`, `$8`, `$s8` (alias of `$fp`) and friends.
pub fn parse_gpr(s: &str) -> Option<u8> {
    let name = s.strip_prefix('$')?;
    if let Ok(n) = name.parse::<u8>() {
        return (n < 32).then_some(n);
    }
    if name == "s8" {
        return Some(30);
    }
    GPR_NAMES.iter().position(|n| &n[1..] == name).map(|i| i as u8)
}

/// Parse `$f0`..`$f31`.
pub fn parse_fpr(s: &str) -> Option<u8> {
    let n: u8 = s.strip_prefix("$f")?.parse().ok()?;
    (n < 32).then_some(n)
}

/// Assembler-compatible text for an instruction. Branch operands are
/// printed as signed word offsets and jump operands as absolute addresses
/// within the current 256 MiB region, both of which the assembler accepts.
pub fn disassemble(i: &Instruction) -> String {
    let m = i.op.mnemonic();
    let g = gpr_name;
    match i.op.format() {
        Format::RegRegReg => format!("{m} {}, {}, {}", g(i.rd), g(i.rs), g(i.rt)),
        Format::ShiftVar => format!("{m} {}, {}, {}", g(i.rd), g(i.rt), g(i.rs)),
        Format::ShiftImm => {
            if i.is_nop() {
                "nop".to_string()
            } else {
                format!("{m} {}, {}, {}", g(i.rd), g(i.rt), i.sa)
            }
        }
        Format::Jalr => match i.rd {
            0 => format!("jr {}", g(i.rs)),
            31 => format!("jalr {}", g(i.rs)),
            rd => format!("jalr {}, {}", g(rd), g(i.rs)),
        },
        Format::Bare => m.to_string(),
        Format::BranchZero => format!("{m} {}, {}", g(i.rs), i.simm()),
        Format::BranchCmp => format!("{m} {}, {}, {}", g(i.rs), g(i.rt), i.simm()),
        Format::BranchLink => format!("{m} {}", i.simm()),
        Format::Jump => format!("{m} 0x{:08x}", i.imm << 2),
        Format::ImmSigned => format!("{m} {}, {}, {}", g(i.rt), g(i.rs), i.simm()),
        Format::ImmUnsigned => format!("{m} {}, {}, 0x{:x}", g(i.rt), g(i.rs), i.imm),
        Format::Aui => {
            if i.rs == 0 {
                format!("lui {}, 0x{:x}", g(i.rt), i.imm)
            } else {
                format!("{m} {}, {}, 0x{:x}", g(i.rt), g(i.rs), i.imm)
            }
        }
        Format::Memory => {
            let data = if matches!(i.op, Opcode::Lwc1 | Opcode::Swc1) {
                fpr_name(i.rt)
            } else {
                g(i.rt).to_string()
            };
            format!("{m} {data}, {}({})", i.simm(), g(i.rs))
        }
        Format::Cop1Move => format!("{m} {}, {}", g(i.rt), fpr_name(i.fs())),
        Format::Cop1Branch => format!("{m} {}, {}", fpr_name(i.ft()), i.simm()),
        Format::FpThree => {
            format!("{m} {}, {}, {}", fpr_name(i.fd()), fpr_name(i.fs()), fpr_name(i.ft()))
        }
        Format::FpTwo => format!("{m} {}, {}", fpr_name(i.fd()), fpr_name(i.fs())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::decode;

    #[test]
    fn reference_text() {
        assert_eq!(disassemble(&decode(0x2408_0005).unwrap()), "addiu $t0, $zero, 5");
        assert_eq!(disassemble(&decode(0).unwrap()), "nop");
        assert_eq!(disassemble(&decode(0x4607_3200).unwrap()), "add.s $f8, $f6, $f7");
        assert_eq!(disassemble(&decode(0x8FA8_0004).unwrap()), "lw $t0, 4($sp)");
        assert_eq!(disassemble(&decode(0x03E0_0009).unwrap()), "jr $ra");
    }

    #[test]
    fn register_names() {
        assert_eq!(parse_gpr("$t0"), Some(8));
        assert_eq!(parse_gpr("$8"), Some(8));
        assert_eq!(parse_gpr("$zero"), Some(0));
        assert_eq!(parse_gpr("$s8"), Some(30));
        assert_eq!(parse_gpr("$32"), None);
        assert_eq!(parse_gpr("t0"), None);
        assert_eq!(parse_fpr("$f31"), Some(31));
        assert_eq!(parse_fpr("$f32"), None);
    }
}
