use crate::isa::{Instruction, UnitClass};
use crate::memory::{ConfigError, MemoryConfig};
use crate::predictor::PredictorConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalUnitSpec {
    pub latency: u32,
    /// A pipelined unit accepts a new operation every cycle.
    pub pipelined: bool,
}

impl FunctionalUnitSpec {
    const fn pipelined(latency: u32) -> Self {
        FunctionalUnitSpec { latency, pipelined: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnitTable {
    #[serde(rename = "INT")]
    pub int: FunctionalUnitSpec,
    #[serde(rename = "LOADSTORE")]
    pub load_store: FunctionalUnitSpec,
    #[serde(rename = "BRANCH")]
    pub branch: FunctionalUnitSpec,
    #[serde(rename = "FP_SIMPLE")]
    pub fp_simple: FunctionalUnitSpec,
    #[serde(rename = "FP_MED")]
    pub fp_med: FunctionalUnitSpec,
    #[serde(rename = "FP_LONG")]
    pub fp_long: FunctionalUnitSpec,
}

impl Default for UnitTable {
    fn default() -> Self {
        UnitTable {
            int: FunctionalUnitSpec::pipelined(1),
            load_store: FunctionalUnitSpec::pipelined(2),
            branch: FunctionalUnitSpec::pipelined(1),
            fp_simple: FunctionalUnitSpec::pipelined(1),
            fp_med: FunctionalUnitSpec::pipelined(4),
            fp_long: FunctionalUnitSpec::pipelined(12),
        }
    }
}

impl UnitTable {
    pub fn get(&self, unit: UnitClass) -> FunctionalUnitSpec {
        match unit {
            UnitClass::Int => self.int,
            UnitClass::LoadStore => self.load_store,
            UnitClass::Branch => self.branch,
            UnitClass::FpSimple => self.fp_simple,
            UnitClass::FpMed => self.fp_med,
            UnitClass::FpLong => self.fp_long,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct MachineConfig {
    pub memory: MemoryConfig,
    pub predictor: PredictorConfig,
    pub units: UnitTable,
    /// Latency of MUL/MUH/DIV/MOD and their unsigned forms. Defaults to the
    /// INT unit latency.
    pub muldiv_latency: Option<u32>,
}

impl MachineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.memory.validate()?;
        self.predictor.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        for unit in UnitClass::ALL {
            if self.units.get(unit).latency == 0 {
                return Err(ConfigError::Invalid(format!("{unit:?} latency must be at least 1")));
            }
        }
        // Younger instructions issue the cycle after a branch; a slower
        // branch unit would let wrong-path work commit.
        if self.units.branch.latency != 1 {
            return Err(ConfigError::Invalid("BRANCH latency must be 1".into()));
        }
        if self.muldiv_latency == Some(0) {
            return Err(ConfigError::Invalid("muldiv_latency must be at least 1".into()));
        }
        Ok(())
    }

    /// Nominal issue-to-writeback latency, before cache penalties.
    pub fn latency_of(&self, instr: &Instruction) -> u32 {
        match self.muldiv_latency {
            Some(l) if instr.op.is_muldiv() => l,
            _ => self.units.get(instr.unit_class()).latency,
        }
    }
}
