//! IEEE-754 binary32 arithmetic in software.
//!
//! All results are rounded to nearest, ties to even. Every operation that
//! produces a NaN returns the canonical quiet NaN [`QNAN`]; input payloads
//! are not propagated. Exception flags are not modelled.

use serde::{Deserialize, Serialize};

pub const QNAN: u32 = 0x7FC0_0000;
const SIGN: u32 = 0x8000_0000;
const EXP_MASK: u32 = 0x7F80_0000;
const FRAC_MASK: u32 = 0x007F_FFFF;
const INF: u32 = EXP_MASK;
/// R6 result for an out-of-range or NaN float-to-integer conversion.
pub const INT_SATURATE: u32 = 0x7FFF_FFFF;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CompareCond {
    Eq,
    Lt,
    Le,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Conversion {
    /// int32 -> binary32
    SFromW,
    /// binary32 -> int32, round to nearest even
    WFromSNearest,
    /// binary32 -> int32, round toward zero
    WFromSTrunc,
}

fn is_nan(x: u32) -> bool {
    x & !SIGN > INF
}

fn is_inf(x: u32) -> bool {
    x & !SIGN == INF
}

fn is_zero(x: u32) -> bool {
    x & !SIGN == 0
}

fn sign_of(x: u32) -> bool {
    x & SIGN != 0
}

/// Finite non-zero operand as `sig * 2^exp` with bit 23 of `sig` set.
fn unpack(x: u32) -> (u64, i32) {
    let exp_field = ((x & EXP_MASK) >> 23) as i32;
    let frac = (x & FRAC_MASK) as u64;
    if exp_field == 0 {
        // subnormal: normalise so the leading one sits at bit 23
        let shift = frac.leading_zeros() as i32 - 40;
        (frac << shift, -149 - shift)
    } else {
        (frac | 1 << 23, exp_field - 150)
    }
}

/// Round `sig * 2^exp` to binary32. Any bits already discarded by the
/// caller must be OR-ed into bit 0 of `sig`, and `sig` must then carry at
/// least two bits below the final rounding position.
fn round_pack(negative: bool, exp: i32, sig: u64) -> u32 {
    let sign = if negative { SIGN } else { 0 };
    if sig == 0 {
        return sign;
    }
    let lz = sig.leading_zeros() as i32;
    let sig = (sig as u128) << lz;
    let exp = exp - lz;
    // value = 1.f * 2^(exp + 63); biased exponent of that
    let biased = exp + 63 + 127;
    let shift = if biased >= 1 { 40 } else { 40 + 1 - biased };
    let shift = shift.min(127) as u32;
    let mut mant = sig >> shift;
    let rem = sig & ((1u128 << shift) - 1);
    let half = 1u128 << (shift - 1);
    if rem > half || (rem == half && mant & 1 == 1) {
        mant += 1;
    }
    let mant = mant as u32;
    let bits = if biased >= 1 {
        // the hidden bit adds one to the exponent field; a carry out of the
        // mantissa bumps the exponent naturally
        (((biased - 1) as u32) << 23).wrapping_add(mant)
    } else {
        mant
    };
    if biased >= 255 || bits >= INF {
        sign | INF
    } else {
        sign | bits
    }
}

pub fn add(a: u32, b: u32) -> u32 {
    if is_nan(a) || is_nan(b) {
        return QNAN;
    }
    match (is_inf(a), is_inf(b)) {
        (true, true) => return if a == b { a } else { QNAN },
        (true, false) => return a,
        (false, true) => return b,
        _ => {}
    }
    match (is_zero(a), is_zero(b)) {
        // +0 unless both are -0
        (true, true) => return a & b,
        (true, false) => return b,
        (false, true) => return a,
        _ => {}
    }
    let (ma, ea) = unpack(a);
    let (mb, eb) = unpack(b);
    // 32 guard bits below the 24-bit significands
    let (mut big, mut small) = ((ma << 32, ea - 32, sign_of(a)), (mb << 32, eb - 32, sign_of(b)));
    if (small.1, small.0) > (big.1, big.0) {
        std::mem::swap(&mut big, &mut small);
    }
    let d = (big.1 - small.1) as u32;
    let aligned = if d >= 64 {
        (small.0 != 0) as u64
    } else {
        let lost = small.0 & ((1u64 << d) - 1);
        (small.0 >> d) | (lost != 0) as u64
    };
    if big.2 == small.2 {
        let (sum, carry) = big.0.overflowing_add(aligned);
        if carry {
            let sticky = sum & 1;
            let sig = (sum >> 1) | (1 << 63) | sticky;
            round_pack(big.2, big.1 + 1, sig)
        } else {
            round_pack(big.2, big.1, sum)
        }
    } else {
        let diff = big.0 - aligned;
        if diff == 0 {
            0
        } else {
            round_pack(big.2, big.1, diff)
        }
    }
}

pub fn sub(a: u32, b: u32) -> u32 {
    if is_nan(b) {
        return QNAN;
    }
    add(a, b ^ SIGN)
}

pub fn mul(a: u32, b: u32) -> u32 {
    if is_nan(a) || is_nan(b) {
        return QNAN;
    }
    let negative = sign_of(a) != sign_of(b);
    let sign = if negative { SIGN } else { 0 };
    if is_inf(a) || is_inf(b) {
        return if is_zero(a) || is_zero(b) { QNAN } else { sign | INF };
    }
    if is_zero(a) || is_zero(b) {
        return sign;
    }
    let (ma, ea) = unpack(a);
    let (mb, eb) = unpack(b);
    round_pack(negative, ea + eb, ma * mb)
}

pub fn div(a: u32, b: u32) -> u32 {
    if is_nan(a) || is_nan(b) {
        return QNAN;
    }
    let negative = sign_of(a) != sign_of(b);
    let sign = if negative { SIGN } else { 0 };
    match (is_inf(a), is_inf(b)) {
        (true, true) => return QNAN,
        (true, false) => return sign | INF,
        (false, true) => return sign,
        _ => {}
    }
    match (is_zero(a), is_zero(b)) {
        (true, true) => return QNAN,
        (false, true) => return sign | INF,
        (true, false) => return sign,
        _ => {}
    }
    let (ma, ea) = unpack(a);
    let (mb, eb) = unpack(b);
    // both significands in [2^23, 2^24), so the quotient has 40 or 41 bits
    let num = ma << 40;
    let q = num / mb;
    let sticky = (num % mb != 0) as u64;
    round_pack(negative, ea - eb - 40, q | sticky)
}

fn isqrt(n: u128) -> u128 {
    if n == 0 {
        return 0;
    }
    let mut x = 1u128 << ((128 - n.leading_zeros()).div_ceil(2));
    loop {
        let y = (x + n / x) >> 1;
        if y >= x {
            return x;
        }
        x = y;
    }
}

pub fn sqrt(a: u32) -> u32 {
    if is_nan(a) {
        return QNAN;
    }
    if is_zero(a) {
        return a;
    }
    if sign_of(a) {
        return QNAN;
    }
    if is_inf(a) {
        return a;
    }
    let (mut m, mut e) = unpack(a);
    if e & 1 != 0 {
        m <<= 1;
        e -= 1;
    }
    // root of m * 2^40 has at least 32 significant bits
    let n = (m as u128) << 40;
    let r = isqrt(n);
    let sticky = (r * r != n) as u64;
    round_pack(false, (e - 40) / 2, r as u64 | sticky)
}

pub fn arith(op: ArithOp, a: u32, b: u32) -> u32 {
    match op {
        ArithOp::Add => add(a, b),
        ArithOp::Sub => sub(a, b),
        ArithOp::Mul => mul(a, b),
        ArithOp::Div => div(a, b),
    }
}

/// Ordered comparison; false whenever either operand is NaN.
pub fn compare(cond: CompareCond, a: u32, b: u32) -> bool {
    if is_nan(a) || is_nan(b) {
        return false;
    }
    if is_zero(a) && is_zero(b) {
        return matches!(cond, CompareCond::Eq | CompareCond::Le);
    }
    // map to a monotonic integer key
    let key = |x: u32| -> i64 {
        if sign_of(x) {
            -((x & !SIGN) as i64)
        } else {
            x as i64
        }
    };
    let (ka, kb) = (key(a), key(b));
    match cond {
        CompareCond::Eq => ka == kb,
        CompareCond::Lt => ka < kb,
        CompareCond::Le => ka <= kb,
    }
}

fn int_to_float(x: u32) -> u32 {
    let v = x as i32;
    if v == 0 {
        return 0;
    }
    round_pack(v < 0, 0, v.unsigned_abs() as u64)
}

fn float_to_int(x: u32, truncate: bool) -> u32 {
    if is_nan(x) || is_inf(x) {
        return INT_SATURATE;
    }
    if is_zero(x) {
        return 0;
    }
    let negative = sign_of(x);
    let (m, e) = unpack(x);
    let magnitude: u64 = if e >= 0 {
        if e > 8 {
            return INT_SATURATE;
        }
        m << e
    } else {
        let s = (-e) as u32;
        if s >= 64 {
            // |x| < 2^-40: rounds to zero either way
            0
        } else {
            let q = m >> s;
            let rem = m & ((1u64 << s) - 1);
            let half = 1u64 << (s - 1);
            if !truncate && (rem > half || (rem == half && q & 1 == 1)) {
                q + 1
            } else {
                q
            }
        }
    };
    if negative {
        if magnitude > 1 << 31 {
            INT_SATURATE
        } else {
            (magnitude as i64).wrapping_neg() as i32 as u32
        }
    } else if magnitude > i32::MAX as u64 {
        INT_SATURATE
    } else {
        magnitude as u32
    }
}

pub fn convert(dir: Conversion, x: u32) -> u32 {
    match dir {
        Conversion::SFromW => int_to_float(x),
        Conversion::WFromSNearest => float_to_int(x, false),
        Conversion::WFromSTrunc => float_to_int(x, true),
    }
}

pub fn abs(x: u32) -> u32 {
    x & !SIGN
}

pub fn neg(x: u32) -> u32 {
    x ^ SIGN
}
