use super::report::{hex32, RunStats, Stages, StallCause};
use super::Machine;
use crate::exec::format_float;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FprView {
    pub hex: String,
    pub float: String,
}

/// Serializable copy of everything observable about a machine between
/// cycles.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub cycle: u64,
    pub pc: String,
    pub fetch_pc: String,
    pub halted: bool,
    pub halt_reason: Option<String>,
    pub halt_message: Option<String>,
    pub gpr: Vec<String>,
    pub fpr: Vec<FprView>,
    pub stages: Stages,
    pub stall_cause: StallCause,
    pub stats: RunStats,
    pub output: String,
    pub mem_digest: String,
}

impl Machine {
    pub fn snapshot(&self) -> Snapshot {
        let regs = self.regs();
        Snapshot {
            cycle: self.cycle(),
            pc: hex32(self.pc()),
            fetch_pc: hex32(self.fetch_pc()),
            halted: self.is_halted(),
            halt_reason: self.halt_reason().map(|h| h.name().to_string()),
            halt_message: self.halt_reason().map(|h| h.to_string()),
            gpr: regs.gpr.iter().map(|&v| hex32(v)).collect(),
            fpr: regs
                .fpr
                .iter()
                .map(|&v| FprView { hex: hex32(v), float: format_float(v) })
                .collect(),
            stages: self.stages(),
            stall_cause: self.last_stall(),
            stats: self.stats(),
            output: String::from_utf8_lossy(self.output()).into_owned(),
            mem_digest: self.mem_digest(),
        }
    }
}
