use crate::isa::{decode, disassemble, UnitClass};
use crate::memory::{CacheOutcome, CacheStats};
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};

/// Why the instruction in register-read did not issue this cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StallCause {
    #[default]
    None,
    RawWait,
    WawWait,
    WbPortConflict,
    UnitBusy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IssueDecision {
    Issue,
    Stall(StallCause),
}

pub(crate) fn hex32(v: u32) -> String {
    format!("0x{v:08X}")
}

fn serialize_hex<S: Serializer>(v: &u32, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&hex32(*v))
}

/// An instruction sitting in a stage. Serialized with its disassembly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Occupant {
    pub pc: u32,
    pub word: u32,
    pub seq: u64,
}

impl Occupant {
    pub fn text(&self) -> String {
        match decode(self.word) {
            Ok(i) => disassemble(&i),
            Err(_) => format!(".word 0x{:08X}", self.word),
        }
    }
}

impl Serialize for Occupant {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Occupant", 4)?;
        st.serialize_field("pc", &hex32(self.pc))?;
        st.serialize_field("word", &format!("{:08X}", self.word))?;
        st.serialize_field("seq", &self.seq)?;
        st.serialize_field("text", &self.text())?;
        st.end()
    }
}

/// An instruction inside a functional unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct UnitOccupant {
    #[serde(flatten)]
    pub occupant: Occupant,
    pub unit: UnitClass,
    pub issue_cycle: u64,
    pub ready_cycle: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Stages {
    pub fetch: Option<Occupant>,
    pub decode: Option<Occupant>,
    pub regread: Option<Occupant>,
    pub execute: Vec<UnitOccupant>,
    pub writeback: Vec<UnitOccupant>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Flush {
    #[serde(serialize_with = "serialize_hex")]
    pub branch_pc: u32,
    #[serde(serialize_with = "serialize_hex")]
    pub redirect: u32,
    /// Valid wrong-path instructions discarded.
    pub squashed: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PredictorEvent {
    Predict {
        #[serde(serialize_with = "serialize_hex")]
        pc: u32,
        taken: bool,
        #[serde(serialize_with = "serialize_hex")]
        target: u32,
    },
    Resolve {
        #[serde(serialize_with = "serialize_hex")]
        pc: u32,
        taken: bool,
        #[serde(serialize_with = "serialize_hex")]
        target: u32,
        mispredict: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CacheKind {
    Icache,
    Dcache,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CacheEvent {
    pub cache: CacheKind,
    #[serde(serialize_with = "serialize_hex")]
    pub addr: u32,
    pub outcome: CacheOutcome,
}

/// Everything that happened in one clock cycle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CycleReport {
    pub cycle: u64,
    pub stages: Stages,
    pub stall_cause: StallCause,
    pub issued: Option<UnitOccupant>,
    pub flush: Option<Flush>,
    pub predictor: Vec<PredictorEvent>,
    pub retired: Vec<UnitOccupant>,
    pub cache: Vec<CacheEvent>,
    pub halted: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StallCounts {
    #[serde(rename = "RAW_WAIT")]
    pub raw_wait: u64,
    #[serde(rename = "WAW_WAIT")]
    pub waw_wait: u64,
    #[serde(rename = "WB_PORT_CONFLICT")]
    pub wb_port_conflict: u64,
    #[serde(rename = "UNIT_BUSY")]
    pub unit_busy: u64,
}

impl StallCounts {
    pub fn record(&mut self, cause: StallCause) {
        match cause {
            StallCause::None => {}
            StallCause::RawWait => self.raw_wait += 1,
            StallCause::WawWait => self.waw_wait += 1,
            StallCause::WbPortConflict => self.wb_port_conflict += 1,
            StallCause::UnitBusy => self.unit_busy += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.raw_wait + self.waw_wait + self.wb_port_conflict + self.unit_busy
    }
}

/// How a `run` call ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Halted,
    Breakpoint,
    CycleLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub cycles: u64,
    pub instructions_retired: u64,
    pub ipc: f64,
    pub branch_count: u64,
    pub mispredicts: u64,
    pub flushed: u64,
    pub stalls: StallCounts,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub icache: Option<CacheStats>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dcache: Option<CacheStats>,
    pub halted: bool,
    pub halt_reason: Option<String>,
    pub stop: Option<StopReason>,
}
