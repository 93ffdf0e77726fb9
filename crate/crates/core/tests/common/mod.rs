#![allow(dead_code)]

use lagarto::isa::{encode, Format, Instruction, Opcode};
use lagarto::pipeline::{CycleReport, Machine, MachineConfig, RunLimits, RunStats};
use rand::Rng;

pub const PI_SOURCE: &str = include_str!("../../programs/pi.s");
pub const TEXT_BASE: u32 = 0x0040_0000;
pub const DATA_BASE: u32 = 0x1001_0000;
/// Base register for every memory access in generated straight-line code.
pub const MEM_BASE_REG: u8 = 16;

pub fn traced(src: &str, config: MachineConfig) -> (Machine, Vec<CycleReport>, RunStats) {
    let mut m = Machine::from_source(config, src).expect("program assembles");
    let mut reports = Vec::new();
    let stats = m.run_traced(&RunLimits::cycles(1_000_000), |r| reports.push(r.clone()));
    (m, reports, stats)
}

/// Any canonical instruction of the supported subset, fields uniformly
/// random within their widths.
pub fn random_instruction(rng: &mut impl Rng) -> Instruction {
    let op = Opcode::ALL[rng.gen_range(0..Opcode::ALL.len())];
    random_instruction_of(rng, op)
}

pub fn random_instruction_of(rng: &mut impl Rng, op: Opcode) -> Instruction {
    let imm_bits = if op.format() == Format::Jump { 26 } else { 16 };
    Instruction {
        op,
        rs: rng.gen_range(0..32),
        rt: rng.gen_range(0..32),
        rd: rng.gen_range(0..32),
        sa: rng.gen_range(0..32),
        imm: rng.gen::<u32>() & ((1 << imm_bits) - 1),
    }
    .canonical()
}

fn any(rng: &mut impl Rng) -> u8 {
    rng.gen_range(0..32)
}

fn dest(rng: &mut impl Rng) -> u8 {
    loop {
        let r = rng.gen_range(0..32);
        if r != MEM_BASE_REG {
            return r;
        }
    }
}

/// One non-control instruction whose memory accesses, if any, are aligned
/// and land inside the first KiB of data memory (based at `$s0`).
pub fn straight_line_instruction(rng: &mut impl Rng) -> Instruction {
    loop {
        let op = Opcode::ALL[rng.gen_range(0..Opcode::ALL.len())];
        if op.is_control() || op.format() == Format::Bare {
            continue;
        }
        // trapping adds would end most programs early
        if matches!(op, Opcode::Add | Opcode::Sub) && rng.gen_bool(0.7) {
            continue;
        }
        let i = match op.format() {
            Format::RegRegReg | Format::ShiftVar => {
                Instruction::new(op).with_rd(dest(rng)).with_rs(any(rng)).with_rt(any(rng))
            }
            Format::ShiftImm => {
                Instruction::new(op).with_rd(dest(rng)).with_rt(any(rng)).with_sa(any(rng))
            }
            Format::ImmSigned | Format::ImmUnsigned => Instruction::new(op)
                .with_rt(dest(rng))
                .with_rs(any(rng))
                .with_imm(rng.gen::<u16>() as u32),
            Format::Aui => {
                Instruction::new(op).with_rt(dest(rng)).with_rs(any(rng)).with_imm(rng.gen::<u16>() as u32)
            }
            Format::Memory => {
                let width = match op {
                    Opcode::Lb | Opcode::Lbu | Opcode::Sb => 1,
                    Opcode::Lh | Opcode::Lhu | Opcode::Sh => 2,
                    _ => 4,
                };
                let rt = if op.is_load() && op != Opcode::Lwc1 { dest(rng) } else { any(rng) };
                let offset = rng.gen_range(0..1024 / width) * width;
                Instruction::new(op).with_rs(MEM_BASE_REG).with_rt(rt).with_imm(offset)
            }
            Format::Cop1Move => {
                let rt = if op == Opcode::Mfc1 { dest(rng) } else { any(rng) };
                Instruction::new(op).with_rt(rt).with_rd(any(rng))
            }
            Format::FpThree | Format::FpTwo => Instruction::fp(op, any(rng), any(rng), any(rng)),
            _ => unreachable!("control formats filtered above"),
        };
        return i.canonical();
    }
}

/// Seed every register with random bits, run `body_len` random
/// straight-line instructions, then exit.
pub fn straight_line_program(rng: &mut impl Rng, body_len: usize) -> Vec<u32> {
    let mut prog = Vec::new();
    for r in 1..26u8 {
        let v: u32 = rng.gen();
        prog.push(Instruction::new(Opcode::Aui).with_rt(r).with_imm(v >> 16));
        prog.push(Instruction::new(Opcode::Ori).with_rt(r).with_rs(r).with_imm(v & 0xFFFF));
    }
    for f in 0..32u8 {
        prog.push(Instruction::new(Opcode::Mtc1).with_rt(rng.gen_range(1..26)).with_rd(f));
    }
    prog.push(Instruction::new(Opcode::Aui).with_rt(MEM_BASE_REG).with_imm(DATA_BASE >> 16));
    for _ in 0..body_len {
        prog.push(straight_line_instruction(rng));
    }
    prog.push(Instruction::new(Opcode::Addiu).with_rt(2).with_imm(10));
    prog.push(Instruction::new(Opcode::Syscall));
    prog.iter().map(|i| encode(i).expect("generated instruction encodes")).collect()
}

/// Host-float evaluation of the exact operation sequence the PI program
/// performs.
pub fn pi_host_oracle() -> u32 {
    let c = 640320.0f32;
    let power = |x: f32, n: u32| (0..n).fold(1.0f32, |acc, _| acc * x);
    let factorial = |n: u32| (1..=n).fold(1.0f32, |acc, i| acc * i as f32);
    let sqrt = |a: f32| {
        let mut x = a * 0.5;
        loop {
            let y = (x + a / x) * 0.5;
            // cmp.lt.s is false for unordered operands too
            if y.partial_cmp(&x) != Some(std::cmp::Ordering::Less) {
                return x;
            }
            x = y;
        }
    };
    let root = sqrt(power(c, 3));
    let mut sum = 0.0f32;
    for k in 0..3u32 {
        let linear = (13591409i32.wrapping_add(545140134i32.wrapping_mul(k as i32))) as f32;
        let mut t = factorial(6 * k) * linear;
        t /= factorial(3 * k);
        t /= power(factorial(k), 3);
        t /= power(c, 3 * k);
        if k % 2 == 0 {
            sum += t;
        } else {
            sum -= t;
        }
    }
    (root / (12.0 * sum)).to_bits()
}
