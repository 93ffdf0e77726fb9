//! Sequential reference interpreter: one instruction per step, no timing.
//! The pipeline must leave the machine in exactly the state this produces.

use crate::exec::{execute, Fault, HaltReason, RegFile};
use crate::isa::{decode, REG_SP};
use crate::memory::{MemError, Memory, MemoryConfig, ProgramImage};

#[derive(Debug, Clone)]
pub struct Interpreter {
    pub regs: RegFile,
    pub mem: Memory,
    pub pc: u32,
    pub output: Vec<u8>,
    pub halted: Option<HaltReason>,
    pub retired: u64,
}

impl Interpreter {
    pub fn new(config: &MemoryConfig, image: &ProgramImage) -> Result<Self, MemError> {
        let mut mem = Memory::new(config);
        mem.load_image(image)?;
        let mut regs = RegFile::default();
        regs.gpr[REG_SP as usize] = config.dmem_top();
        Ok(Interpreter {
            regs,
            mem,
            pc: config.imem_base,
            output: Vec::new(),
            halted: None,
            retired: 0,
        })
    }

    pub fn step(&mut self) {
        if self.halted.is_some() {
            return;
        }
        if let Err(f) = self.try_step() {
            self.halted = Some(HaltReason::Fault(f));
        }
    }

    fn try_step(&mut self) -> Result<(), Fault> {
        let pc = self.pc;
        let word = self.mem.fetch(pc).map_err(|_| Fault::FetchOutOfRange { pc })?;
        let instr = decode(word).map_err(|_| Fault::IllegalInstruction { pc, word })?;
        let effect = execute(&instr, pc, &self.regs, &mut self.mem)?;
        if let Some((r, v)) = effect.write {
            self.regs.write(r, v);
        }
        self.retired += 1;
        self.pc = effect.next_pc;
        if let Some(service) = effect.service {
            if service.perform(pc, &self.mem, &mut self.output)? {
                self.halted = Some(HaltReason::Exit);
            }
        }
        Ok(())
    }

    /// Step until halted or `max_steps` instructions have been attempted.
    pub fn run(&mut self, max_steps: u64) -> Option<&HaltReason> {
        for _ in 0..max_steps {
            if self.halted.is_some() {
                break;
            }
            self.step();
        }
        self.halted.as_ref()
    }
}
