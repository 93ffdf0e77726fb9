//! The five-stage in-order pipeline.
//!
//! Each cycle runs, in order: writeback (results whose ready cycle has
//! arrived are written and their instructions retire; branches resolve),
//! issue from register-read, then register-read ← decode ← fetch, then a
//! new fetch. Because writeback precedes issue, a result is usable by an
//! instruction issuing in the same cycle it is written, which is the
//! bypass network. An instruction issuing in cycle `t` into a unit of
//! latency `L` writes back in cycle `t + L`.

mod config;
mod report;
mod snapshot;

pub use config::{FunctionalUnitSpec, MachineConfig, UnitTable};
pub use report::{
    CacheEvent, CacheKind, CycleReport, Flush, IssueDecision, Occupant, PredictorEvent, RunStats,
    Stages, StallCause, StallCounts, StopReason, UnitOccupant,
};
pub use snapshot::{FprView, Snapshot};

use crate::asm::{assemble, AsmError, Layout};
use crate::exec::{execute, Fault, HaltReason, RegFile, Service};
use crate::isa::{decode, Bank, Instruction, Opcode, Reg, REG_SP};
use crate::memory::{Cache, CacheOutcome, ConfigError, MemError, Memory, ProgramImage};
use crate::predictor::BranchPredictor;
use sha2::{Digest, Sha256};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MachineError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("cannot load image: {0}")]
    Image(#[from] MemError),
    #[error("assembly failed: {0}")]
    Asm(#[from] AsmError),
}

#[derive(Debug, Clone, Default)]
pub struct RunLimits {
    pub max_cycles: u64,
    pub breakpoints: BTreeSet<u32>,
}

impl RunLimits {
    pub fn cycles(max_cycles: u64) -> Self {
        RunLimits { max_cycles, breakpoints: BTreeSet::new() }
    }
}

#[derive(Debug, Clone)]
struct Slot {
    occ: Occupant,
    decoded: Result<Instruction, Fault>,
    predicted_next: u32,
    /// Leaves fetch only in a later cycle (instruction-cache miss).
    ready_at: u64,
}

#[derive(Debug, Clone, Copy)]
struct Resolution {
    predicted_next: u32,
    actual_next: u32,
    taken: bool,
    target: u32,
    train: bool,
}

#[derive(Debug, Clone)]
struct InFlight {
    view: UnitOccupant,
    write: Option<(Reg, u32)>,
    resolution: Option<Resolution>,
    service: Option<Service>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Counters {
    retired: u64,
    branches: u64,
    mispredicts: u64,
    flushed: u64,
    stalls: StallCounts,
}

fn bank_index(b: Bank) -> usize {
    match b {
        Bank::Gpr => 0,
        Bank::Fpr => 1,
    }
}

#[derive(Debug, Clone)]
pub struct Machine {
    config: MachineConfig,
    image: ProgramImage,
    regs: RegFile,
    mem: Memory,
    predictor: Box<dyn BranchPredictor>,
    icache: Option<Cache>,
    dcache: Option<Cache>,
    cycle: u64,
    fetch_pc: u32,
    fetch_blocked: bool,
    fetch: Option<Slot>,
    decode: Option<Slot>,
    regread: Option<Slot>,
    in_flight: Vec<InFlight>,
    /// Ready cycle of the outstanding write to each register.
    pending: [[Option<u64>; 32]; 2],
    /// Writeback cycles already promised, per register file.
    wb_reserved: [BTreeSet<u64>; 2],
    unit_busy_until: [u64; 6],
    next_seq: u64,
    draining: Option<HaltReason>,
    halted: Option<HaltReason>,
    output: Vec<u8>,
    counters: Counters,
    last_stall: StallCause,
    last_retired: Vec<UnitOccupant>,
    bp_skip_seq: Option<u64>,
}

impl Machine {
    /// Build a machine with `image` preloaded, in the reset state.
    pub fn new(config: MachineConfig, image: ProgramImage) -> Result<Machine, MachineError> {
        config.validate()?;
        let predictor = config.predictor.build().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let mut m = Machine {
            regs: RegFile::default(),
            mem: Memory::new(&config.memory),
            predictor,
            icache: None,
            dcache: None,
            cycle: 0,
            fetch_pc: 0,
            fetch_blocked: false,
            fetch: None,
            decode: None,
            regread: None,
            in_flight: Vec::new(),
            pending: [[None; 32]; 2],
            wb_reserved: Default::default(),
            unit_busy_until: [0; 6],
            next_seq: 0,
            draining: None,
            halted: None,
            output: Vec::new(),
            counters: Counters::default(),
            last_stall: StallCause::None,
            last_retired: Vec::new(),
            bp_skip_seq: None,
            image,
            config,
        };
        m.reset()?;
        Ok(m)
    }

    pub fn from_source(config: MachineConfig, src: &str) -> Result<Machine, MachineError> {
        let asm = assemble(src, Layout::from(&config.memory))?;
        Machine::new(config, asm.image())
    }

    /// Back to cycle 0 with the current program reloaded and a cold predictor.
    pub fn reset(&mut self) -> Result<(), MemError> {
        let c = &self.config;
        let mut mem = Memory::new(&c.memory);
        mem.load_image(&self.image)?;
        self.mem = mem;
        self.regs = RegFile::default();
        self.regs.gpr[REG_SP as usize] = c.memory.dmem_top();
        self.predictor.reset();
        let caches = c.memory.cache_stats;
        self.icache = caches.then(|| Cache::new(c.memory.icache));
        self.dcache = caches.then(|| Cache::new(c.memory.dcache));
        self.cycle = 0;
        self.fetch_pc = c.memory.imem_base;
        self.fetch_blocked = false;
        self.fetch = None;
        self.decode = None;
        self.regread = None;
        self.in_flight.clear();
        self.pending = [[None; 32]; 2];
        self.wb_reserved = Default::default();
        self.unit_busy_until = [0; 6];
        self.next_seq = 0;
        self.draining = None;
        self.halted = None;
        self.output.clear();
        self.counters = Counters::default();
        self.last_stall = StallCause::None;
        self.last_retired.clear();
        self.bp_skip_seq = None;
        Ok(())
    }

    /// Replace the program and reset. On error the machine is unchanged.
    pub fn load(&mut self, image: ProgramImage) -> Result<(), MemError> {
        Memory::new(&self.config.memory).load_image(&image)?;
        self.image = image;
        self.reset()
    }

    pub fn config(&self) -> &MachineConfig {
        &self.config
    }

    pub fn image(&self) -> &ProgramImage {
        &self.image
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    /// Address of the oldest instruction not yet issued.
    pub fn pc(&self) -> u32 {
        [&self.regread, &self.decode, &self.fetch]
            .into_iter()
            .flatten()
            .next()
            .map_or(self.fetch_pc, |s| s.occ.pc)
    }

    pub fn fetch_pc(&self) -> u32 {
        self.fetch_pc
    }

    pub fn regs(&self) -> &RegFile {
        &self.regs
    }

    pub fn memory(&self) -> &Memory {
        &self.mem
    }

    pub fn memory_mut(&mut self) -> &mut Memory {
        &mut self.mem
    }

    pub fn output(&self) -> &[u8] {
        &self.output
    }

    pub fn is_halted(&self) -> bool {
        self.halted.is_some()
    }

    pub fn halt_reason(&self) -> Option<&HaltReason> {
        self.halted.as_ref()
    }

    pub fn predictor(&self) -> &dyn BranchPredictor {
        self.predictor.as_ref()
    }

    pub fn last_stall(&self) -> StallCause {
        self.last_stall
    }

    pub fn stats(&self) -> RunStats {
        let k = &self.counters;
        RunStats {
            cycles: self.cycle,
            instructions_retired: k.retired,
            ipc: if self.cycle == 0 { 0.0 } else { k.retired as f64 / self.cycle as f64 },
            branch_count: k.branches,
            mispredicts: k.mispredicts,
            flushed: k.flushed,
            stalls: k.stalls,
            icache: self.icache.as_ref().map(Cache::stats),
            dcache: self.dcache.as_ref().map(Cache::stats),
            halted: self.halted.is_some(),
            halt_reason: self.halted.as_ref().map(|h| h.name().to_string()),
            stop: None,
        }
    }

    /// Hash of memory contents.
    pub fn mem_digest(&self) -> String {
        let (i, d) = self.mem.contents();
        let mut h = Sha256::new();
        h.update(i);
        h.update(d);
        hex::encode(h.finalize())
    }

    /// Hash of all architectural state: registers, memory, program output
    /// and halt status.
    pub fn arch_digest(&self) -> String {
        let mut h = Sha256::new();
        for w in self.regs.gpr.iter().chain(&self.regs.fpr) {
            h.update(w.to_be_bytes());
        }
        let (i, d) = self.mem.contents();
        h.update(i);
        h.update(d);
        h.update((self.output.len() as u64).to_be_bytes());
        h.update(&self.output);
        h.update(self.halted.as_ref().map_or("running", |r| r.name()));
        hex::encode(h.finalize())
    }

    fn stages(&self) -> Stages {
        Stages {
            fetch: self.fetch.as_ref().map(|s| s.occ),
            decode: self.decode.as_ref().map(|s| s.occ),
            regread: self.regread.as_ref().map(|s| s.occ),
            execute: self.in_flight.iter().map(|f| f.view).collect(),
            writeback: self.last_retired.clone(),
        }
    }

    /// Latency the instruction would see if it issued now, including a
    /// data-cache miss penalty.
    fn effective_latency(&self, instr: &Instruction) -> u32 {
        let base = self.config.latency_of(instr);
        match &self.dcache {
            Some(dc) if instr.op.is_load() || instr.op.is_store() => {
                let addr = self.regs.gpr[instr.rs as usize].wrapping_add(instr.simm() as u32);
                match dc.probe(addr) {
                    CacheOutcome::Miss => base + self.config.memory.miss_penalty,
                    CacheOutcome::Hit => base,
                }
            }
            _ => base,
        }
    }

    fn syscall_in_flight(&self) -> bool {
        self.in_flight.iter().any(|f| f.service.is_some())
    }

    /// Could `instr` issue in cycle `cycle`, given what is in flight? Meant
    /// to be asked after that cycle's writeback.
    pub fn issue_check(&self, instr: &Instruction, cycle: u64) -> IssueDecision {
        let pending = |r: Reg| self.pending[bank_index(r.bank)][r.index as usize].is_some_and(|t| t > cycle);
        let serialize = instr.op == Opcode::Syscall && !self.in_flight.is_empty();
        if instr.sources().iter().any(pending) || serialize || self.syscall_in_flight() {
            return IssueDecision::Stall(StallCause::RawWait);
        }
        let dest = instr.dest();
        if dest.is_some_and(pending) {
            return IssueDecision::Stall(StallCause::WawWait);
        }
        let unit = instr.unit_class();
        if !self.config.units.get(unit).pipelined && self.unit_busy_until[unit.index()] > cycle {
            return IssueDecision::Stall(StallCause::UnitBusy);
        }
        if let Some(d) = dest {
            let at = cycle + self.effective_latency(instr) as u64;
            if self.wb_reserved[bank_index(d.bank)].contains(&at) {
                return IssueDecision::Stall(StallCause::WbPortConflict);
            }
        }
        IssueDecision::Issue
    }

    fn begin_halt(&mut self, reason: HaltReason) {
        self.fetch = None;
        self.decode = None;
        self.regread = None;
        self.fetch_blocked = true;
        self.draining = Some(reason);
    }

    /// Advance one clock cycle. On a halted machine this does nothing and
    /// returns an empty report.
    pub fn step_cycle(&mut self) -> CycleReport {
        let mut rep = CycleReport {
            cycle: self.cycle,
            stages: Stages::default(),
            stall_cause: StallCause::None,
            issued: None,
            flush: None,
            predictor: Vec::new(),
            retired: Vec::new(),
            cache: Vec::new(),
            halted: true,
        };
        if self.halted.is_some() {
            rep.stages = self.stages();
            return rep;
        }
        let c = self.cycle + 1;
        self.cycle = c;
        rep.cycle = c;

        self.writeback(c, &mut rep);
        if self.halted.is_none() && self.draining.is_none() {
            self.issue(c, &mut rep);
        }
        if self.halted.is_none() && self.draining.is_some() && self.in_flight.is_empty() {
            self.halted = self.draining.take();
        }
        if self.halted.is_none() && self.draining.is_none() {
            self.advance(c);
            self.fetch_next(c, &mut rep);
        }

        self.counters.stalls.record(rep.stall_cause);
        self.last_stall = rep.stall_cause;
        self.last_retired = rep.retired.clone();
        rep.stages = self.stages();
        rep.halted = self.halted.is_some();
        rep
    }

    fn writeback(&mut self, c: u64, rep: &mut CycleReport) {
        let (done, rest): (Vec<_>, Vec<_>) =
            std::mem::take(&mut self.in_flight).into_iter().partition(|f| f.view.ready_cycle <= c);
        self.in_flight = rest;
        for set in &mut self.wb_reserved {
            *set = set.split_off(&(c + 1));
        }
        for op in done {
            let pc = op.view.occupant.pc;
            if let Some((r, v)) = op.write {
                self.regs.write(r, v);
                let slot = &mut self.pending[bank_index(r.bank)][r.index as usize];
                if *slot == Some(op.view.ready_cycle) {
                    *slot = None;
                }
            }
            self.counters.retired += 1;
            rep.retired.push(op.view);
            if let Some(res) = op.resolution {
                self.resolve(pc, res, rep);
            }
            if let Some(service) = op.service {
                match service.perform(pc, &self.mem, &mut self.output) {
                    Ok(true) => self.halted = Some(HaltReason::Exit),
                    Ok(false) => {}
                    Err(f) => self.halted = Some(HaltReason::Fault(f)),
                }
            }
        }
    }

    fn resolve(&mut self, pc: u32, res: Resolution, rep: &mut CycleReport) {
        self.counters.branches += 1;
        if res.train {
            self.predictor.update(pc, res.taken, res.target);
        }
        let mispredict = res.predicted_next != res.actual_next;
        rep.predictor.push(PredictorEvent::Resolve {
            pc,
            taken: res.taken,
            target: res.actual_next,
            mispredict,
        });
        if mispredict {
            let squashed = [self.fetch.take(), self.decode.take(), self.regread.take()]
                .iter()
                .flatten()
                .count() as u32;
            self.counters.mispredicts += 1;
            self.counters.flushed += squashed as u64;
            self.fetch_pc = res.actual_next;
            self.fetch_blocked = false;
            rep.flush = Some(Flush { branch_pc: pc, redirect: res.actual_next, squashed });
        }
    }

    fn issue(&mut self, c: u64, rep: &mut CycleReport) {
        let Some(slot) = &self.regread else { return };
        let instr = match &slot.decoded {
            Ok(i) => *i,
            Err(f) => {
                let f = f.clone();
                self.begin_halt(HaltReason::Fault(f));
                return;
            }
        };
        if let IssueDecision::Stall(cause) = self.issue_check(&instr, c) {
            rep.stall_cause = cause;
            return;
        }
        let latency = self.effective_latency(&instr);
        let slot = self.regread.take().expect("checked above");
        let pc = slot.occ.pc;
        let effect = match execute(&instr, pc, &self.regs, &mut self.mem) {
            Ok(e) => e,
            Err(f) => {
                self.begin_halt(HaltReason::Fault(f));
                return;
            }
        };
        if let (Some(addr), Some(dc)) = (effect.mem_addr, self.dcache.as_mut()) {
            let outcome = dc.access(addr);
            rep.cache.push(CacheEvent { cache: CacheKind::Dcache, addr, outcome });
        }
        let unit = instr.unit_class();
        let ready = c + latency as u64;
        if let Some((r, _)) = effect.write {
            self.pending[bank_index(r.bank)][r.index as usize] = Some(ready);
            self.wb_reserved[bank_index(r.bank)].insert(ready);
        }
        self.unit_busy_until[unit.index()] = ready;
        let resolution = instr.op.is_control().then(|| {
            let conditional = instr.op.is_conditional_branch();
            Resolution {
                predicted_next: slot.predicted_next,
                actual_next: effect.next_pc,
                taken: effect.taken,
                target: if conditional { instr.branch_target(pc) } else { effect.next_pc },
                train: conditional || instr.op == Opcode::Jalr,
            }
        });
        let view = UnitOccupant { occupant: slot.occ, unit, issue_cycle: c, ready_cycle: ready };
        rep.issued = Some(view);
        self.in_flight.push(InFlight {
            view,
            write: effect.write,
            resolution,
            service: effect.service,
        });
    }

    fn advance(&mut self, c: u64) {
        if self.regread.is_none() {
            self.regread = self.decode.take();
        }
        if self.decode.is_none() && self.fetch.as_ref().is_some_and(|s| s.ready_at < c) {
            self.decode = self.fetch.take();
        }
    }

    fn predict_next(&mut self, i: &Instruction, pc: u32, rep: &mut CycleReport) -> u32 {
        let prediction = match i.op {
            Opcode::J | Opcode::Jal => return i.jump_target(pc),
            Opcode::Bal => return i.branch_target(pc),
            Opcode::Jalr => self.predictor.predict_indirect(pc),
            op if op.is_conditional_branch() => self.predictor.predict(pc),
            _ => return pc.wrapping_add(4),
        };
        rep.predictor.push(PredictorEvent::Predict {
            pc,
            taken: prediction.taken,
            target: prediction.target,
        });
        prediction.next_pc()
    }

    fn fetch_next(&mut self, c: u64, rep: &mut CycleReport) {
        if self.fetch.is_some() || self.fetch_blocked {
            return;
        }
        let pc = self.fetch_pc;
        let seq = self.next_seq;
        self.next_seq += 1;
        let mut ready_at = c;
        let (word, decoded, next) = match self.mem.fetch(pc) {
            Err(_) => {
                self.fetch_blocked = true;
                (0, Err(Fault::FetchOutOfRange { pc }), pc)
            }
            Ok(word) => {
                if let Some(ic) = self.icache.as_mut() {
                    let outcome = ic.access(pc);
                    rep.cache.push(CacheEvent { cache: CacheKind::Icache, addr: pc, outcome });
                    if outcome == CacheOutcome::Miss {
                        ready_at += self.config.memory.miss_penalty as u64;
                    }
                }
                match decode(word) {
                    Ok(i) => (word, Ok(i), self.predict_next(&i, pc, rep)),
                    Err(_) => (word, Err(Fault::IllegalInstruction { pc, word }), pc.wrapping_add(4)),
                }
            }
        };
        self.fetch = Some(Slot {
            occ: Occupant { pc, word, seq },
            decoded,
            predicted_next: next,
            ready_at,
        });
        self.fetch_pc = next;
    }

    /// Step one cycle unless the instruction in register-read sits on a
    /// breakpoint and would issue this cycle; then return `None` and leave
    /// the machine untouched.
    pub fn step_guarded(&mut self, breakpoints: &BTreeSet<u32>) -> Option<CycleReport> {
        let watched = self
            .regread
            .as_ref()
            .filter(|s| breakpoints.contains(&s.occ.pc) && Some(s.occ.seq) != self.bp_skip_seq)
            .map(|s| s.occ.seq);
        let Some(seq) = watched else { return Some(self.step_cycle()) };
        let mut probe = self.clone();
        let rep = probe.step_cycle();
        let still_waiting = probe.regread.as_ref().is_some_and(|s| s.occ.seq == seq);
        if still_waiting || rep.flush.is_some() {
            *self = probe;
            Some(rep)
        } else {
            None
        }
    }

    /// Let the instruction currently waiting in register-read pass its
    /// breakpoint once. Called when resuming from a breakpoint pause.
    pub fn resume_past_breakpoint(&mut self) {
        self.bp_skip_seq = self.regread.as_ref().map(|s| s.occ.seq);
    }

    pub fn run(&mut self, limits: &RunLimits) -> RunStats {
        self.run_traced(limits, |_| {})
    }

    /// Run until halt, breakpoint or `max_cycles` more cycles, handing
    /// every cycle's report to `sink`.
    pub fn run_traced(&mut self, limits: &RunLimits, mut sink: impl FnMut(&CycleReport)) -> RunStats {
        let start = self.cycle;
        self.resume_past_breakpoint();
        let stop = loop {
            if self.halted.is_some() {
                break StopReason::Halted;
            }
            if self.cycle - start >= limits.max_cycles {
                break StopReason::CycleLimit;
            }
            match self.step_guarded(&limits.breakpoints) {
                Some(rep) => sink(&rep),
                None => break StopReason::Breakpoint,
            }
        };
        RunStats { stop: Some(stop), ..self.stats() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn machine(src: &str) -> Machine {
        Machine::from_source(MachineConfig::default(), src).unwrap()
    }

    fn trace(src: &str) -> (Machine, Vec<CycleReport>) {
        let mut m = machine(src);
        let mut reps = Vec::new();
        m.run_traced(&RunLimits::cycles(100_000), |r| reps.push(r.clone()));
        (m, reps)
    }

    const EXIT: &str = "li $v0, 10\nsyscall\n";

    #[test]
    fn reset_state() {
        let m = machine("");
        assert_eq!(m.cycle(), 0);
        assert_eq!(m.pc(), 0x0040_0000);
        assert!(!m.is_halted());
        assert_eq!(m.regs().gpr[29], 0x1002_0000);
        assert!(m.regs().gpr.iter().enumerate().all(|(i, &v)| i == 29 || v == 0));
    }

    #[test]
    fn reset_is_idempotent() {
        let mut m = machine("addiu $t0, $zero, 5\n");
        let fresh = m.clone();
        m.run(&RunLimits::cycles(20));
        m.reset().unwrap();
        m.reset().unwrap();
        assert_eq!(m.arch_digest(), fresh.arch_digest());
        assert_eq!(m.stages(), fresh.stages());
    }

    #[test]
    fn addiu_then_exit() {
        let (m, _) = trace(&format!("addiu $t0, $zero, 5\n{EXIT}"));
        assert_eq!(m.regs().gpr[8], 5);
        assert_eq!(m.halt_reason(), Some(&HaltReason::Exit));
    }

    #[test]
    fn first_instruction_timeline() {
        let (_, reps) = trace(&format!("addu $t0, $t1, $t2\n{EXIT}"));
        assert_eq!(reps[0].stages.fetch.unwrap().pc, 0x0040_0000);
        assert_eq!(reps[1].stages.decode.unwrap().pc, 0x0040_0000);
        assert_eq!(reps[2].stages.regread.unwrap().pc, 0x0040_0000);
        assert_eq!(reps[3].issued.unwrap().occupant.pc, 0x0040_0000);
        assert_eq!(reps[4].retired[0].occupant.pc, 0x0040_0000);
    }

    #[test]
    fn zero_register_stays_zero() {
        let (m, reps) = trace(&format!("addiu $zero, $zero, 7\naddu $t0, $zero, $zero\n{EXIT}"));
        assert_eq!(m.regs().gpr[0], 0);
        assert_eq!(m.regs().gpr[8], 0);
        assert!(reps.iter().all(|r| r.stall_cause == StallCause::None));
    }

    #[test]
    fn integer_overflow_halts_after_draining() {
        let src = "li $t0, 0x7fffffff\ndiv.s $f1, $f2, $f3\nadd $t1, $t0, $t0\naddiu $t2, $zero, 1\n";
        let (m, _) = trace(src);
        assert!(matches!(m.halt_reason(), Some(HaltReason::Fault(Fault::IntegerOverflow { .. }))));
        assert_eq!(m.regs().gpr[10], 0);
        // the older div.s still retired
        assert_eq!(m.stats().instructions_retired, 3);
    }

    #[test]
    fn wrong_path_illegal_word_never_faults() {
        let src = format!("beq $zero, $zero, skip\n.word 0xFFFFFFFF\nskip: {EXIT}");
        let (m, _) = trace(&src);
        assert_eq!(m.halt_reason(), Some(&HaltReason::Exit));
    }

    #[test]
    fn running_off_the_end_faults() {
        let mut cfg = MachineConfig::default();
        cfg.memory.imem_bytes = 16;
        cfg.memory.icache.line_bytes = 16;
        let mut m = Machine::from_source(cfg, "nop\nnop\nnop\nnop").unwrap();
        m.run(&RunLimits::cycles(100));
        assert!(matches!(m.halt_reason(), Some(HaltReason::Fault(Fault::FetchOutOfRange { pc: 0x0040_0010 }))));
        assert_eq!(m.stats().instructions_retired, 4);
    }

    #[test]
    fn syscall_output() {
        let src = "li $v0, 1\nli $a0, 42\nsyscall\nli $v0, 11\nli $a0, 10\nsyscall\nli $v0, 10\nsyscall";
        let (m, _) = trace(src);
        assert_eq!(m.output(), b"42\n");
    }

    #[test]
    fn breakpoint_pauses_before_issue_and_resumes() {
        let src = format!("nop\nnop\nbp: addiu $t0, $zero, 1\n{EXIT}");
        let mut m = machine(&src);
        let bp = 0x0040_0008;
        let limits = RunLimits { max_cycles: 1000, breakpoints: [bp].into() };
        let s = m.run(&limits);
        assert_eq!(s.stop, Some(StopReason::Breakpoint));
        assert_eq!(m.pc(), bp);
        assert_eq!(m.regs().gpr[8], 0);
        let s = m.run(&limits);
        assert_eq!(s.stop, Some(StopReason::Halted));
        assert_eq!(m.regs().gpr[8], 1);
    }

    #[test]
    fn non_pipelined_unit_reports_unit_busy() {
        let mut cfg = MachineConfig::default();
        cfg.units.fp_long.pipelined = false;
        let src = format!("div.s $f1, $f2, $f3\ndiv.s $f4, $f5, $f6\n{EXIT}");
        let mut m = Machine::from_source(cfg, &src).unwrap();
        let mut causes = Vec::new();
        m.run_traced(&RunLimits::cycles(1000), |r| causes.push(r.stall_cause));
        assert_eq!(causes.iter().filter(|&&c| c == StallCause::UnitBusy).count(), 11);
    }

    #[test]
    fn writeback_port_conflict() {
        let src = format!("add.s $f1, $f2, $f3\nnop\nadd.s $f4, $f5, $f6\n{EXIT}");
        let (_, reps) = trace(&src);
        assert_eq!(reps.iter().filter(|r| r.stall_cause == StallCause::WbPortConflict).count(), 0);
        // mov.s would write back in the same cycle as add.s
        let src = format!("add.s $f1, $f2, $f3\naddiu $t0, $zero, 1\naddiu $t0, $zero, 1\nmov.s $f4, $f5\n{EXIT}");
        let (_, reps) = trace(&src);
        assert_eq!(reps.iter().filter(|r| r.stall_cause == StallCause::WbPortConflict).count(), 1);
    }

    #[test]
    fn waw_waits_for_long_write() {
        let src = format!("div.s $f2, $f4, $f6\nadd.s $f2, $f8, $f10\n{EXIT}");
        let (_, reps) = trace(&src);
        let waw = reps.iter().filter(|r| r.stall_cause == StallCause::WawWait).count();
        assert_eq!(waw, 11);
    }

    #[test]
    fn icache_miss_penalty_delays_fetch() {
        let src = format!("nop\n{EXIT}");
        let mut base = MachineConfig::default();
        base.memory.cache_stats = true;
        let mut slow = base.clone();
        slow.memory.miss_penalty = 5;
        let mut a = Machine::from_source(base, &src).unwrap();
        let mut b = Machine::from_source(slow, &src).unwrap();
        let sa = a.run(&RunLimits::cycles(1000));
        let sb = b.run(&RunLimits::cycles(1000));
        // the second miss is the next line, fetched behind the exit syscall
        assert_eq!(sa.icache.unwrap().misses, 2);
        assert_eq!(sb.cycles, sa.cycles + 5);
    }
}
