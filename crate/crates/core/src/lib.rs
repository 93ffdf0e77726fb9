//! Cycle-level model of the Lagarto I five-stage MIPS32 R6 pipeline, with
//! its assembler, reference interpreter and debug server.

pub mod asm;
pub mod exec;
pub mod fpu;
pub mod interp;
pub mod isa;
pub mod memory;
pub mod predictor;
pub mod pipeline;
pub mod debug;
