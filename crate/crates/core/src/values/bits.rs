//! Width-generic two's-complement arithmetic on raw bit patterns.
//!
//! Every value is a `u64` holding the low `width` bits of a bitvector,
//! with the unused high bits cleared. Operations are total and follow the
//! SMT-LIB `QF_BV` conventions (division by zero yields all ones, etc.) so
//! that the engine's own evaluator and an external solver agree on every
//! assignment. Wasm trap conditions are layered on top by [`trap_of`].

use super::{BinOp, RelOp};
use crate::trap::TrapKind;

#[inline]
pub fn mask(width: u8) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

#[inline]
pub fn sign_bit(width: u8) -> u64 {
    1u64 << (width - 1)
}

/// Interpret the low `width` bits as a signed integer.
#[inline]
pub fn to_signed(width: u8, bits: u64) -> i64 {
    let bits = bits & mask(width);
    if width >= 64 {
        bits as i64
    } else if bits & sign_bit(width) != 0 {
        (bits | !mask(width)) as i64
    } else {
        bits as i64
    }
}

#[inline]
fn neg(width: u8, x: u64) -> u64 {
    x.wrapping_neg() & mask(width)
}

#[inline]
fn is_neg(width: u8, x: u64) -> bool {
    x & sign_bit(width) != 0
}

fn udiv(width: u8, a: u64, b: u64) -> u64 {
    if b == 0 {
        mask(width)
    } else {
        a / b
    }
}

fn urem(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        a % b
    }
}

fn sdiv(width: u8, a: u64, b: u64) -> u64 {
    match (is_neg(width, a), is_neg(width, b)) {
        (false, false) => udiv(width, a, b),
        (true, false) => neg(width, udiv(width, neg(width, a), b)),
        (false, true) => neg(width, udiv(width, a, neg(width, b))),
        (true, true) => udiv(width, neg(width, a), neg(width, b)),
    }
}

fn srem(width: u8, a: u64, b: u64) -> u64 {
    match (is_neg(width, a), is_neg(width, b)) {
        (false, false) => urem(a, b),
        (true, false) => neg(width, urem(neg(width, a), b)),
        (false, true) => urem(a, neg(width, b)),
        (true, true) => neg(width, urem(neg(width, a), neg(width, b))),
    }
}

/// Total binary operation. Shift amounts are taken modulo the width, as in
/// Wasm (widths are powers of two wherever shifts occur).
pub fn binop(op: BinOp, width: u8, a: u64, b: u64) -> u64 {
    let m = mask(width);
    let (a, b) = (a & m, b & m);
    let r = match op {
        BinOp::Add => a.wrapping_add(b),
        BinOp::Sub => a.wrapping_sub(b),
        BinOp::Mul => a.wrapping_mul(b),
        BinOp::DivU => udiv(width, a, b),
        BinOp::RemU => urem(a, b),
        BinOp::DivS => sdiv(width, a, b),
        BinOp::RemS => srem(width, a, b),
        BinOp::And => a & b,
        BinOp::Or => a | b,
        BinOp::Xor => a ^ b,
        BinOp::Shl => {
            let k = (b % width as u64) as u32;
            a.checked_shl(k).unwrap_or(0)
        }
        BinOp::ShrU => {
            let k = (b % width as u64) as u32;
            a.checked_shr(k).unwrap_or(0)
        }
        BinOp::ShrS => {
            let k = (b % width as u64) as u32;
            (to_signed(width, a) >> k) as u64
        }
    };
    r & m
}

/// The Wasm trap, if any, raised by `op` on these operands.
pub fn trap_of(op: BinOp, width: u8, a: u64, b: u64) -> Option<TrapKind> {
    let m = mask(width);
    match op {
        BinOp::DivU | BinOp::DivS | BinOp::RemU | BinOp::RemS if b & m == 0 => {
            Some(TrapKind::IntegerDivideByZero)
        }
        BinOp::DivS if a & m == sign_bit(width) && b & m == m => Some(TrapKind::IntegerOverflow),
        _ => None,
    }
}

pub fn relop(op: RelOp, width: u8, a: u64, b: u64) -> bool {
    let m = mask(width);
    let (a, b) = (a & m, b & m);
    let (sa, sb) = (to_signed(width, a), to_signed(width, b));
    match op {
        RelOp::Eq => a == b,
        RelOp::Ne => a != b,
        RelOp::LtU => a < b,
        RelOp::GtU => a > b,
        RelOp::LeU => a <= b,
        RelOp::GeU => a >= b,
        RelOp::LtS => sa < sb,
        RelOp::GtS => sa > sb,
        RelOp::LeS => sa <= sb,
        RelOp::GeS => sa >= sb,
    }
}

/// Sign- or zero-extend a `from`-bit value to `to` bits.
pub fn extend(signed: bool, from: u8, to: u8, bits: u64) -> u64 {
    if signed {
        (to_signed(from, bits) as u64) & mask(to)
    } else {
        bits & mask(from)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signed_view() {
        assert_eq!(to_signed(8, 0xff), -1);
        assert_eq!(to_signed(32, 0x8000_0000), i32::MIN as i64);
        assert_eq!(to_signed(64, u64::MAX), -1);
    }

    #[test]
    fn smtlib_division_conventions() {
        assert_eq!(binop(BinOp::DivU, 8, 7, 0), 0xff);
        assert_eq!(binop(BinOp::RemU, 8, 7, 0), 7);
        assert_eq!(binop(BinOp::DivS, 8, 5, 0), 0xff);
        assert_eq!(binop(BinOp::DivS, 8, 0xfb, 0), 1);
        assert_eq!(binop(BinOp::RemS, 8, 0xfb, 0), 0xfb);
        // MIN / -1 wraps
        assert_eq!(binop(BinOp::DivS, 8, 0x80, 0xff), 0x80);
        assert_eq!(binop(BinOp::RemS, 8, 0x80, 0xff), 0);
    }

    #[test]
    fn signed_division_truncates_toward_zero() {
        for a in -128i64..128 {
            for b in -128i64..128 {
                if b == 0 || (a == -128 && b == -1) {
                    continue;
                }
                let (ua, ub) = (a as u64 & 0xff, b as u64 & 0xff);
                assert_eq!(to_signed(8, binop(BinOp::DivS, 8, ua, ub)), a / b);
                assert_eq!(to_signed(8, binop(BinOp::RemS, 8, ua, ub)), a % b);
            }
        }
    }

    #[test]
    fn traps() {
        assert_eq!(trap_of(BinOp::DivU, 32, 7, 0), Some(TrapKind::IntegerDivideByZero));
        assert_eq!(
            trap_of(BinOp::DivS, 32, 0x8000_0000, 0xffff_ffff),
            Some(TrapKind::IntegerOverflow)
        );
        assert_eq!(trap_of(BinOp::RemS, 32, 0x8000_0000, 0xffff_ffff), None);
        assert_eq!(trap_of(BinOp::Add, 32, 1, 0), None);
    }
}
