//! C interface to the lagarto simulator.
//!
//! Machines are opaque heap handles. Fallible calls return a
//! [`LagartoStatus`]; the text of the most recent error on the calling
//! thread is available from [`lagarto_last_error_message`]. Strings handed
//! out by this library must be released with [`lagarto_string_free`].

use lagarto::asm::{assemble, emit_hex, load_hex, Layout};
use lagarto::pipeline::{Machine, MachineConfig, RunLimits};
use libc::{c_char, c_int};
use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

/// Simulator instance. Only ever handled through a pointer.
pub struct LagartoMachine {
    inner: Machine,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LagartoStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidConfig = 3,
    AssemblyFailed = 4,
    ImageFailed = 5,
    OutOfRange = 6,
    Panic = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn fail(status: LagartoStatus, msg: impl Into<String>) -> LagartoStatus {
    set_error(msg);
    status
}

/// Run `f`, turning a panic into [`LagartoStatus::Panic`].
fn guard(f: impl FnOnce() -> LagartoStatus) -> LagartoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(LagartoStatus::Panic, "internal panic"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, LagartoStatus> {
    if p.is_null() {
        return Err(fail(LagartoStatus::NullArgument, "null string argument"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(LagartoStatus::InvalidUtf8, "string argument is not UTF-8"))
}

/// A null `config_json` selects the default configuration.
unsafe fn config_arg(config_json: *const c_char) -> Result<MachineConfig, LagartoStatus> {
    if config_json.is_null() {
        return Ok(MachineConfig::default());
    }
    let text = str_arg(config_json)?;
    serde_json::from_str(text).map_err(|e| fail(LagartoStatus::InvalidConfig, e.to_string()))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map(CString::into_raw).unwrap_or(ptr::null_mut())
}

unsafe fn machine_out(out: *mut *mut LagartoMachine, m: Machine) {
    *out = Box::into_raw(Box::new(LagartoMachine { inner: m }));
}

/// Assemble `source` and build a machine ready to run it.
///
/// # Safety
/// `source` must be a NUL-terminated string, `config_json` null or a
/// NUL-terminated string, and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lagarto_machine_from_source(
    source: *const c_char,
    config_json: *const c_char,
    out: *mut *mut LagartoMachine,
) -> LagartoStatus {
    guard(|| {
        if out.is_null() {
            return fail(LagartoStatus::NullArgument, "null output pointer");
        }
        *out = ptr::null_mut();
        let src = match str_arg(source) {
            Ok(s) => s,
            Err(s) => return s,
        };
        let config = match config_arg(config_json) {
            Ok(c) => c,
            Err(s) => return s,
        };
        let asm = match assemble(src, Layout::from(&config.memory)) {
            Ok(a) => a,
            Err(e) => return fail(LagartoStatus::AssemblyFailed, e.to_string()),
        };
        match Machine::new(config, asm.image()) {
            Ok(m) => {
                machine_out(out, m);
                clear_error();
                LagartoStatus::Ok
            }
            Err(e) => fail(LagartoStatus::InvalidConfig, e.to_string()),
        }
    })
}

/// Build a machine from hex images. `dmem_hex` may be null.
///
/// # Safety
/// String arguments must be null (where allowed) or NUL-terminated, and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lagarto_machine_from_hex(
    imem_hex: *const c_char,
    dmem_hex: *const c_char,
    config_json: *const c_char,
    out: *mut *mut LagartoMachine,
) -> LagartoStatus {
    guard(|| {
        if out.is_null() {
            return fail(LagartoStatus::NullArgument, "null output pointer");
        }
        *out = ptr::null_mut();
        let config = match config_arg(config_json) {
            Ok(c) => c,
            Err(s) => return s,
        };
        let imem = match str_arg(imem_hex) {
            Ok(s) => s,
            Err(s) => return s,
        };
        let mut image = match load_hex(imem, config.memory.imem_base) {
            Ok(i) => i,
            Err(e) => return fail(LagartoStatus::ImageFailed, e.to_string()),
        };
        if !dmem_hex.is_null() {
            let dmem = match str_arg(dmem_hex) {
                Ok(s) => s,
                Err(s) => return s,
            };
            match load_hex(dmem, config.memory.dmem_base) {
                Ok(d) => image = image.merge(d),
                Err(e) => return fail(LagartoStatus::ImageFailed, e.to_string()),
            }
        }
        match Machine::new(config, image) {
            Ok(m) => {
                machine_out(out, m);
                clear_error();
                LagartoStatus::Ok
            }
            Err(e) => fail(LagartoStatus::ImageFailed, e.to_string()),
        }
    })
}

/// # Safety
/// `machine` must be null or a pointer obtained from this library that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn lagarto_machine_free(machine: *mut LagartoMachine) {
    if !machine.is_null() {
        drop(Box::from_raw(machine));
    }
}

/// Back to cycle 0 with the loaded program.
///
/// # Safety
/// `machine` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn lagarto_machine_reset(machine: *mut LagartoMachine) -> LagartoStatus {
    guard(|| {
        let Some(m) = machine.as_mut() else {
            return fail(LagartoStatus::NullArgument, "null machine");
        };
        match m.inner.reset() {
            Ok(()) => LagartoStatus::Ok,
            Err(e) => fail(LagartoStatus::ImageFailed, e.to_string()),
        }
    })
}

/// Advance up to `cycles` clock cycles, stopping early on halt.
///
/// # Safety
/// `machine` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn lagarto_machine_step(machine: *mut LagartoMachine, cycles: u64) -> LagartoStatus {
    guard(|| {
        let Some(m) = machine.as_mut() else {
            return fail(LagartoStatus::NullArgument, "null machine");
        };
        for _ in 0..cycles {
            if m.inner.is_halted() {
                break;
            }
            m.inner.step_cycle();
        }
        LagartoStatus::Ok
    })
}

/// Run until halt or until the machine's cycle counter reaches
/// `max_cycles`.
///
/// # Safety
/// `machine` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn lagarto_machine_run(machine: *mut LagartoMachine, max_cycles: u64) -> LagartoStatus {
    guard(|| {
        let Some(m) = machine.as_mut() else {
            return fail(LagartoStatus::NullArgument, "null machine");
        };
        m.inner.run(&RunLimits::cycles(max_cycles));
        LagartoStatus::Ok
    })
}

/// Cycles elapsed since reset; 0 for a null handle.
///
/// # Safety
/// `machine` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lagarto_machine_cycle(machine: *const LagartoMachine) -> u64 {
    machine.as_ref().map_or(0, |m| m.inner.cycle())
}

/// 1 when halted, 0 when still runnable, -1 for a null handle.
///
/// # Safety
/// `machine` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lagarto_machine_is_halted(machine: *const LagartoMachine) -> c_int {
    match machine.as_ref() {
        None => -1,
        Some(m) => m.inner.is_halted() as c_int,
    }
}

/// # Safety
/// `machine` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn lagarto_machine_read_gpr(
    machine: *const LagartoMachine,
    index: u32,
    out: *mut u32,
) -> LagartoStatus {
    read_reg(machine, index, out, false)
}

/// Raw bits of `$f<index>`.
///
/// # Safety
/// `machine` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn lagarto_machine_read_fpr(
    machine: *const LagartoMachine,
    index: u32,
    out: *mut u32,
) -> LagartoStatus {
    read_reg(machine, index, out, true)
}

unsafe fn read_reg(machine: *const LagartoMachine, index: u32, out: *mut u32, fp: bool) -> LagartoStatus {
    let (Some(m), false) = (machine.as_ref(), out.is_null()) else {
        return fail(LagartoStatus::NullArgument, "null argument");
    };
    if index >= 32 {
        return fail(LagartoStatus::OutOfRange, format!("register index {index} out of range"));
    }
    let regs = m.inner.regs();
    *out = if fp { regs.fpr[index as usize] } else { regs.gpr[index as usize] };
    LagartoStatus::Ok
}

/// Aligned word from instruction or data memory.
///
/// # Safety
/// `machine` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn lagarto_machine_read_word(
    machine: *const LagartoMachine,
    addr: u32,
    out: *mut u32,
) -> LagartoStatus {
    let (Some(m), false) = (machine.as_ref(), out.is_null()) else {
        return fail(LagartoStatus::NullArgument, "null argument");
    };
    match m.inner.memory().read_word(addr) {
        Ok(w) => {
            *out = w;
            LagartoStatus::Ok
        }
        Err(e) => fail(LagartoStatus::OutOfRange, e.to_string()),
    }
}

/// Full machine state as JSON, or null on a null handle.
///
/// # Safety
/// `machine` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lagarto_machine_snapshot_json(machine: *const LagartoMachine) -> *mut c_char {
    let Some(m) = machine.as_ref() else {
        set_error("null machine");
        return ptr::null_mut();
    };
    match serde_json::to_string(&m.inner.snapshot()) {
        Ok(s) => into_c_string(s),
        Err(e) => {
            set_error(e.to_string());
            ptr::null_mut()
        }
    }
}

/// Everything the program has printed so far.
///
/// # Safety
/// `machine` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lagarto_machine_output(machine: *const LagartoMachine) -> *mut c_char {
    let Some(m) = machine.as_ref() else {
        set_error("null machine");
        return ptr::null_mut();
    };
    into_c_string(String::from_utf8_lossy(m.inner.output()).into_owned())
}

/// Assemble `source` with the default memory layout. On success `*imem_out`
/// and `*dmem_out` receive hex image texts (the data image may be empty).
///
/// # Safety
/// `source` must be NUL-terminated; both out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn lagarto_assemble_to_hex(
    source: *const c_char,
    imem_out: *mut *mut c_char,
    dmem_out: *mut *mut c_char,
) -> LagartoStatus {
    guard(|| {
        if imem_out.is_null() || dmem_out.is_null() {
            return fail(LagartoStatus::NullArgument, "null output pointer");
        }
        *imem_out = ptr::null_mut();
        *dmem_out = ptr::null_mut();
        let src = match str_arg(source) {
            Ok(s) => s,
            Err(s) => return s,
        };
        match assemble(src, Layout::default()) {
            Ok(a) => {
                *imem_out = into_c_string(emit_hex(&a.text_image()));
                *dmem_out = into_c_string(emit_hex(&a.data_image()));
                clear_error();
                LagartoStatus::Ok
            }
            Err(e) => fail(LagartoStatus::AssemblyFailed, e.to_string()),
        }
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn lagarto_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn lagarto_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn lagarto_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
