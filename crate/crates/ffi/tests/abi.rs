use lagarto_ffi::*;
use std::ffi::{CStr, CString};
use std::ptr;

const PROGRAM: &str = "
    .text
main:
    li $t0, 6
    li $t1, 7
    mul $a0, $t0, $t1
    li $v0, 1
    syscall
    li $v0, 10
    syscall
";

fn last_error() -> String {
    let p = lagarto_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn take_string(p: *mut libc::c_char) -> String {
    assert!(!p.is_null());
    let s = unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned();
    unsafe { lagarto_string_free(p) };
    s
}

fn build(src: &str) -> *mut LagartoMachine {
    let src = CString::new(src).unwrap();
    let mut m = ptr::null_mut();
    let st = unsafe { lagarto_machine_from_source(src.as_ptr(), ptr::null(), &mut m) };
    assert_eq!(st, LagartoStatus::Ok);
    assert!(!m.is_null());
    m
}

#[test]
fn runs_a_program_to_completion() {
    let m = build(PROGRAM);
    unsafe {
        assert_eq!(lagarto_machine_is_halted(m), 0);
        assert_eq!(lagarto_machine_run(m, 10_000), LagartoStatus::Ok);
        assert_eq!(lagarto_machine_is_halted(m), 1);
        let mut v = 0;
        assert_eq!(lagarto_machine_read_gpr(m, 4, &mut v), LagartoStatus::Ok);
        assert_eq!(v, 42);
        assert_eq!(take_string(lagarto_machine_output(m)), "42");
        assert!(lagarto_machine_cycle(m) > 7);
        lagarto_machine_free(m);
    }
}

#[test]
fn stepping_and_reset() {
    let m = build(PROGRAM);
    unsafe {
        assert_eq!(lagarto_machine_step(m, 5), LagartoStatus::Ok);
        assert_eq!(lagarto_machine_cycle(m), 5);
        let mut v = 0;
        lagarto_machine_read_gpr(m, 8, &mut v);
        assert_eq!(v, 6, "first li writes back at cycle 5");
        assert_eq!(lagarto_machine_reset(m), LagartoStatus::Ok);
        assert_eq!(lagarto_machine_cycle(m), 0);
        lagarto_machine_read_gpr(m, 8, &mut v);
        assert_eq!(v, 0);
        lagarto_machine_free(m);
    }
}

#[test]
fn hex_images_round_trip_through_the_assembler() {
    let src = CString::new(
        "    .data\nval: .word 0x3FC00000\n    .text\n    la $t0, val\n    lwc1 $f1, 0($t0)\n    add.s $f2, $f1, $f1\n    li $v0, 10\n    syscall\n",
    )
    .unwrap();
    let (mut imem, mut dmem) = (ptr::null_mut(), ptr::null_mut());
    let st = unsafe { lagarto_assemble_to_hex(src.as_ptr(), &mut imem, &mut dmem) };
    assert_eq!(st, LagartoStatus::Ok);
    let imem = CString::new(take_string(imem)).unwrap();
    let dmem = CString::new(take_string(dmem)).unwrap();
    let mut m = ptr::null_mut();
    unsafe {
        assert_eq!(
            lagarto_machine_from_hex(imem.as_ptr(), dmem.as_ptr(), ptr::null(), &mut m),
            LagartoStatus::Ok
        );
        lagarto_machine_run(m, 1000);
        let mut f = 0;
        assert_eq!(lagarto_machine_read_fpr(m, 2, &mut f), LagartoStatus::Ok);
        assert_eq!(f, 0x4040_0000);
        let mut w = 0;
        assert_eq!(lagarto_machine_read_word(m, 0x1001_0000, &mut w), LagartoStatus::Ok);
        assert_eq!(w, 0x3FC0_0000);
        lagarto_machine_free(m);
    }
}

#[test]
fn snapshot_is_json() {
    let m = build(PROGRAM);
    unsafe {
        lagarto_machine_run(m, 10_000);
        let text = take_string(lagarto_machine_snapshot_json(m));
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["halted"], true);
        assert_eq!(v["gpr"][4], "0x0000002A");
        lagarto_machine_free(m);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    let bad = CString::new("    bogus $t0\n").unwrap();
    let mut m = ptr::null_mut();
    let st = unsafe { lagarto_machine_from_source(bad.as_ptr(), ptr::null(), &mut m) };
    assert_eq!(st, LagartoStatus::AssemblyFailed);
    assert!(m.is_null());
    assert!(last_error().contains("bogus"), "{}", last_error());

    let src = CString::new("nop\n").unwrap();
    let cfg = CString::new(r#"{"units":{"BRANCH":{"latency":3,"pipelined":true}}}"#).unwrap();
    let st = unsafe { lagarto_machine_from_source(src.as_ptr(), cfg.as_ptr(), &mut m) };
    assert_eq!(st, LagartoStatus::InvalidConfig);

    let cfg = CString::new("{not json").unwrap();
    let st = unsafe { lagarto_machine_from_source(src.as_ptr(), cfg.as_ptr(), &mut m) };
    assert_eq!(st, LagartoStatus::InvalidConfig);

    let garbage = CString::new("zzzz\n").unwrap();
    let st = unsafe { lagarto_machine_from_hex(garbage.as_ptr(), ptr::null(), ptr::null(), &mut m) };
    assert_eq!(st, LagartoStatus::ImageFailed);

    let st = unsafe { lagarto_machine_from_source(ptr::null(), ptr::null(), &mut m) };
    assert_eq!(st, LagartoStatus::NullArgument);
}

#[test]
fn out_of_range_reads() {
    let m = build(PROGRAM);
    let mut v = 0;
    unsafe {
        assert_eq!(lagarto_machine_read_gpr(m, 32, &mut v), LagartoStatus::OutOfRange);
        assert_eq!(lagarto_machine_read_word(m, 0x1001_0002, &mut v), LagartoStatus::OutOfRange);
        assert_eq!(lagarto_machine_read_word(m, 0, &mut v), LagartoStatus::OutOfRange);
        assert_eq!(lagarto_machine_read_gpr(m, 0, ptr::null_mut()), LagartoStatus::NullArgument);
        lagarto_machine_free(m);
    }
}

#[test]
fn null_handles_are_tolerated() {
    unsafe {
        lagarto_machine_free(ptr::null_mut());
        lagarto_string_free(ptr::null_mut());
        assert_eq!(lagarto_machine_is_halted(ptr::null()), -1);
        assert_eq!(lagarto_machine_cycle(ptr::null()), 0);
        assert_eq!(lagarto_machine_step(ptr::null_mut(), 1), LagartoStatus::NullArgument);
        assert!(lagarto_machine_snapshot_json(ptr::null()).is_null());
    }
}

#[test]
fn version_matches_package() {
    let v = unsafe { CStr::from_ptr(lagarto_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/lagarto.h")).unwrap();
    for name in [
        "lagarto_machine_from_source",
        "lagarto_machine_from_hex",
        "lagarto_machine_free",
        "lagarto_machine_reset",
        "lagarto_machine_step",
        "lagarto_machine_run",
        "lagarto_machine_cycle",
        "lagarto_machine_is_halted",
        "lagarto_machine_read_gpr",
        "lagarto_machine_read_fpr",
        "lagarto_machine_read_word",
        "lagarto_machine_snapshot_json",
        "lagarto_machine_output",
        "lagarto_assemble_to_hex",
        "lagarto_string_free",
        "lagarto_last_error_message",
        "lagarto_version",
        "LAGARTO_STATUS_OK",
        "typedef struct LagartoMachine LagartoMachine",
    ] {
        assert!(header.contains(name), "missing {name}");
    }
}
