use super::protocol::{Command, ErrorCode, Event, HexWord, PauseReason, Response};
use crate::asm::load_hex;
use crate::isa::{decode, disassemble};
use crate::memory::Width;
use crate::pipeline::Machine;
use serde_json::json;
use std::collections::BTreeSet;
use std::time::{Duration, Instant};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Paused,
    Running,
}

/// Most cycles simulated per `tick` when unthrottled, so commands still get
/// serviced promptly.
const UNTHROTTLED_BATCH: u64 = 20_000;
/// Minimum spacing of `running` events.
pub const RUNNING_EVENT_PERIOD: Duration = Duration::from_millis(100);
const MAX_READ_WORDS: u32 = 4096;

/// One debugger attached to one machine. Time is passed in by the caller so
/// throttling can be driven by a fake clock.
#[derive(Debug)]
pub struct DebugSession {
    machine: Machine,
    mode: Mode,
    rate_hz: f64,
    breakpoints: BTreeSet<u32>,
    run_origin: (Instant, u64),
    last_running_event: Option<Instant>,
}

impl DebugSession {
    pub fn new(machine: Machine) -> Self {
        DebugSession {
            machine,
            mode: Mode::Paused,
            rate_hz: 0.0,
            breakpoints: BTreeSet::new(),
            run_origin: (Instant::now(), 0),
            last_running_event: None,
        }
    }

    pub fn machine(&self) -> &Machine {
        &self.machine
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn breakpoints(&self) -> &BTreeSet<u32> {
        &self.breakpoints
    }

    /// Parse and service one text frame. Malformed input yields an error
    /// response; the session is never affected by it.
    pub fn handle_text(&mut self, text: &str, now: Instant) -> (Response, Vec<Event>) {
        match serde_json::from_str::<Command>(text) {
            Ok(cmd) => self.handle(cmd, now),
            Err(e) => (Response::error(ErrorCode::BadRequest, e.to_string()), Vec::new()),
        }
    }

    fn ok(&self) -> Response {
        Response::ok(self.machine.snapshot(), None)
    }

    fn ok_with(&self, data: serde_json::Value) -> Response {
        Response::ok(self.machine.snapshot(), Some(data))
    }

    fn paused(&self, reason: PauseReason) -> Event {
        Event::Paused { reason, snapshot: Box::new(self.machine.snapshot()) }
    }

    pub fn handle(&mut self, cmd: Command, now: Instant) -> (Response, Vec<Event>) {
        let mut events = Vec::new();
        let resp = match cmd {
            Command::Reset => {
                self.mode = Mode::Paused;
                match self.machine.reset() {
                    Ok(()) => self.ok(),
                    Err(e) => Response::error(ErrorCode::LoadFailed, e.to_string()),
                }
            }
            Command::Load { imem, dmem } => self.load(&imem, dmem.as_deref()),
            Command::Step { n } => {
                if self.mode == Mode::Running {
                    Response::error(ErrorCode::Busy, "pause before stepping")
                } else {
                    if let Some(reason) = self.advance(n) {
                        events.push(self.paused(reason));
                    }
                    self.ok()
                }
            }
            Command::Run => {
                if self.machine.is_halted() {
                    events.push(self.paused(PauseReason::Halt));
                } else if self.mode == Mode::Paused {
                    self.mode = Mode::Running;
                    self.machine.resume_past_breakpoint();
                    self.run_origin = (now, self.machine.cycle());
                    self.last_running_event = None;
                }
                self.ok()
            }
            Command::Pause => {
                if self.mode == Mode::Running {
                    self.mode = Mode::Paused;
                    events.push(self.paused(PauseReason::User));
                }
                self.ok()
            }
            Command::SetBreak { addr } | Command::ClearBreak { addr } if addr.0 % 4 != 0 => {
                Response::error(ErrorCode::BadAddress, format!("0x{:08X} is not word aligned", addr.0))
            }
            Command::SetBreak { addr } => {
                self.breakpoints.insert(addr.0);
                self.ok_with(self.breakpoint_list())
            }
            Command::ClearBreak { addr } => {
                self.breakpoints.remove(&addr.0);
                self.ok_with(self.breakpoint_list())
            }
            Command::ReadState => self.ok(),
            Command::ReadMem { addr, words } => self.read_mem(addr.0, words),
            Command::WriteMem { addr, words } => self.write_mem(addr.0, &words),
            Command::SetSpeed { hz } => {
                if !(hz.is_finite() && hz >= 0.0) {
                    Response::error(ErrorCode::BadRequest, "hz must be a non-negative number")
                } else {
                    self.rate_hz = hz;
                    self.run_origin = (now, self.machine.cycle());
                    self.ok_with(json!({ "hz": hz }))
                }
            }
            Command::Stats => {
                let stats = serde_json::to_value(self.machine.stats()).expect("stats serialize");
                self.ok_with(stats)
            }
        };
        (resp, events)
    }

    fn breakpoint_list(&self) -> serde_json::Value {
        let list: Vec<HexWord> = self.breakpoints.iter().map(|&a| HexWord(a)).collect();
        json!({ "breakpoints": list })
    }

    fn load(&mut self, imem: &str, dmem: Option<&str>) -> Response {
        let mem = &self.machine.config().memory;
        let text = match load_hex(imem, mem.imem_base) {
            Ok(i) => i,
            Err(e) => return Response::error(ErrorCode::LoadFailed, format!("imem: {e}")),
        };
        let data = match dmem.map(|d| load_hex(d, mem.dmem_base)).transpose() {
            Ok(d) => d.unwrap_or_default(),
            Err(e) => return Response::error(ErrorCode::LoadFailed, format!("dmem: {e}")),
        };
        match self.machine.load(text.merge(data)) {
            Ok(()) => {
                self.mode = Mode::Paused;
                self.ok()
            }
            Err(e) => Response::error(ErrorCode::LoadFailed, e.to_string()),
        }
    }

    fn read_mem(&self, addr: u32, words: u32) -> Response {
        if !addr.is_multiple_of(4) || words > MAX_READ_WORDS {
            return Response::error(
                ErrorCode::BadAddress,
                format!("need a word-aligned address and at most {MAX_READ_WORDS} words"),
            );
        }
        let mut values = Vec::with_capacity(words as usize);
        let mut disasm = Vec::with_capacity(words as usize);
        for k in 0..words {
            let a = addr.wrapping_add(4 * k);
            match self.machine.memory().read_word(a) {
                Ok(w) => {
                    values.push(HexWord(w));
                    disasm.push(match decode(w) {
                        Ok(i) => disassemble(&i),
                        Err(_) => format!(".word 0x{w:08X}"),
                    });
                }
                Err(e) => return Response::error(ErrorCode::BadAddress, e.to_string()),
            }
        }
        self.ok_with(json!({ "addr": HexWord(addr), "words": values, "disasm": disasm }))
    }

    fn write_mem(&mut self, addr: u32, words: &[HexWord]) -> Response {
        // validate everything first so a bad range writes nothing
        for k in 0..words.len() as u32 {
            if let Err(e) = self.machine.memory().read_word(addr.wrapping_add(4 * k)) {
                return Response::error(ErrorCode::BadAddress, e.to_string());
            }
        }
        for (k, w) in words.iter().enumerate() {
            let a = addr.wrapping_add(4 * k as u32);
            self.machine.memory_mut().write(a, Width::Word, w.0).expect("range checked");
        }
        self.ok()
    }

    /// Step up to `n` cycles, stopping early at a breakpoint or halt.
    fn advance(&mut self, n: u64) -> Option<PauseReason> {
        self.machine.resume_past_breakpoint();
        for _ in 0..n {
            if self.machine.is_halted() {
                return Some(PauseReason::Halt);
            }
            if self.machine.step_guarded(&self.breakpoints).is_none() {
                return Some(PauseReason::Breakpoint);
            }
        }
        self.machine.is_halted().then_some(PauseReason::Halt)
    }

    /// Cycles the throttle allows to have run by `now` since the run began.
    fn allowed_cycles(&self, now: Instant) -> u64 {
        let (t0, c0) = self.run_origin;
        let elapsed = now.saturating_duration_since(t0).as_secs_f64();
        c0 + (self.rate_hz * elapsed).floor() as u64
    }

    /// Advance a running session to `now`. Returns any events to push.
    pub fn tick(&mut self, now: Instant) -> Vec<Event> {
        if self.mode != Mode::Running {
            return Vec::new();
        }
        let budget = if self.rate_hz == 0.0 {
            UNTHROTTLED_BATCH
        } else {
            self.allowed_cycles(now).saturating_sub(self.machine.cycle())
        };
        let mut events = Vec::new();
        let mut stopped = None;
        for _ in 0..budget {
            if self.machine.is_halted() {
                stopped = Some(PauseReason::Halt);
                break;
            }
            if self.machine.step_guarded(&self.breakpoints).is_none() {
                stopped = Some(PauseReason::Breakpoint);
                break;
            }
        }
        if stopped.is_none() && self.machine.is_halted() {
            stopped = Some(PauseReason::Halt);
        }
        if let Some(reason) = stopped {
            self.mode = Mode::Paused;
            events.push(self.paused(reason));
        } else if self.last_running_event.is_none_or(|t| now.duration_since(t) >= RUNNING_EVENT_PERIOD) {
            self.last_running_event = Some(now);
            events.push(Event::Running { snapshot: Box::new(self.machine.snapshot()) });
        }
        events
    }

    /// When the owner should call [`tick`](Self::tick) next.
    pub fn next_tick(&self, now: Instant) -> Option<Instant> {
        if self.mode != Mode::Running {
            return None;
        }
        if self.rate_hz == 0.0 {
            return Some(now);
        }
        let (t0, c0) = self.run_origin;
        let next_cycle = self.machine.cycle() + 1 - c0;
        let due = t0 + Duration::from_secs_f64(next_cycle as f64 / self.rate_hz);
        let event_due = self.last_running_event.map_or(now, |t| t + RUNNING_EVENT_PERIOD);
        Some(due.min(event_due).max(now))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::MachineConfig;

    fn session(src: &str) -> DebugSession {
        DebugSession::new(Machine::from_source(MachineConfig::default(), src).unwrap())
    }

    const LOOP: &str = "loop: addiu $t0, $t0, 1\nb loop";

    #[test]
    fn step_advances_one_cycle() {
        let mut s = session(LOOP);
        let now = Instant::now();
        let (r, _) = s.handle_text(r#"{"cmd":"step","n":1}"#, now);
        assert_eq!(r.snapshot().unwrap().cycle, 1);
        let (r, _) = s.handle_text(r#"{"cmd":"step","n":5}"#, now);
        assert_eq!(r.snapshot().unwrap().cycle, 6);
    }

    #[test]
    fn throttled_run_follows_the_clock() {
        let mut s = session(LOOP);
        let t0 = Instant::now();
        s.handle(Command::SetSpeed { hz: 1.0 }, t0);
        s.handle(Command::Run, t0);
        for ms in (0..=3000).step_by(50) {
            s.tick(t0 + Duration::from_millis(ms));
        }
        assert_eq!(s.machine().cycle(), 3);
        let (_, ev) = s.handle(Command::Pause, t0 + Duration::from_millis(3000));
        assert!(matches!(ev[0], Event::Paused { reason: PauseReason::User, .. }));
        assert!(s.tick(t0 + Duration::from_secs(10)).is_empty());
        assert_eq!(s.machine().cycle(), 3);
    }

    #[test]
    fn speed_change_while_paused_applies_on_next_run() {
        let mut s = session(LOOP);
        let t0 = Instant::now();
        s.handle(Command::SetSpeed { hz: 10.0 }, t0);
        assert_eq!(s.mode(), Mode::Paused);
        let t1 = t0 + Duration::from_secs(5);
        s.handle(Command::Run, t1);
        s.tick(t1 + Duration::from_millis(1000));
        assert_eq!(s.machine().cycle(), 10);
    }

    #[test]
    fn breakpoint_fires_while_running() {
        let mut s = session("nop\nnop\nnop\naddiu $t0, $zero, 1\nli $v0, 10\nsyscall");
        let t0 = Instant::now();
        s.handle_text(r#"{"cmd":"set_break","addr":"0x0040000C"}"#, t0);
        s.handle(Command::Run, t0);
        let ev = s.tick(t0);
        let Event::Paused { reason, snapshot } = &ev[0] else { panic!("{ev:?}") };
        assert_eq!(*reason, PauseReason::Breakpoint);
        assert_eq!(snapshot.pc, "0x0040000C");
        assert_eq!(snapshot.gpr[8], "0x00000000");
        // resuming passes the breakpoint and runs to the end
        s.handle(Command::Run, t0);
        let ev = s.tick(t0);
        assert!(matches!(ev[0], Event::Paused { reason: PauseReason::Halt, .. }));
        assert_eq!(s.machine().regs().gpr[8], 1);
    }

    #[test]
    fn errors_leave_session_intact() {
        let mut s = session(LOOP);
        let now = Instant::now();
        s.handle(Command::Step { n: 4 }, now);
        let before = s.machine().snapshot();
        for bad in [
            "not json",
            r#"{"cmd":"read_mem","addr":"0x00000000","words":1}"#,
            r#"{"cmd":"read_mem","addr":"0x10010002","words":1}"#,
            r#"{"cmd":"write_mem","addr":"0x1001FFFC","words":["1","2"]}"#,
            r#"{"cmd":"load","imem":"xyz"}"#,
        ] {
            let (r, _) = s.handle_text(bad, now);
            assert!(!r.is_ok(), "{bad}");
        }
        assert_eq!(s.machine().snapshot(), before);
    }

    #[test]
    fn memory_round_trip_and_disassembly() {
        let mut s = session(LOOP);
        let now = Instant::now();
        let (r, _) = s.handle_text(r#"{"cmd":"write_mem","addr":"0x10010000","words":["DEADBEEF","0x24080005"]}"#, now);
        assert!(r.is_ok());
        let (r, _) = s.handle_text(r#"{"cmd":"read_mem","addr":"0x10010000","words":2}"#, now);
        let Response::Ok { data: Some(d), .. } = r else { panic!() };
        assert_eq!(d["words"], json!(["0xDEADBEEF", "0x24080005"]));
        assert_eq!(d["disasm"][1], "addiu $t0, $zero, 5");
    }

    #[test]
    fn load_replaces_program() {
        let mut s = session(LOOP);
        let now = Instant::now();
        let (r, _) = s.handle_text(r#"{"cmd":"load","imem":"@00400000\n24080005"}"#, now);
        assert!(r.is_ok());
        s.handle(Command::Step { n: 5 }, now);
        assert_eq!(s.machine().regs().gpr[8], 5);
    }
}
