use std::fmt;

use super::{bits, BinOp, CvtOp, RelOp, Value, ValueType};
use crate::trap::TrapKind;

/// A concrete Wasm integer. All arithmetic wraps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Concrete {
    I32(i32),
    I64(i64),
}

impl Concrete {
    pub fn ty(self) -> ValueType {
        match self {
            Concrete::I32(_) => ValueType::I32,
            Concrete::I64(_) => ValueType::I64,
        }
    }

    /// The raw bit pattern, zero-extended.
    pub fn bits(self) -> u64 {
        match self {
            Concrete::I32(v) => v as u32 as u64,
            Concrete::I64(v) => v as u64,
        }
    }

    pub fn from_bits(ty: ValueType, bits: u64) -> Concrete {
        match ty {
            ValueType::I32 => Concrete::I32(bits as u32 as i32),
            ValueType::I64 => Concrete::I64(bits as i64),
        }
    }

    pub fn zero(ty: ValueType) -> Concrete {
        Concrete::from_bits(ty, 0)
    }

    pub fn is_true(self) -> bool {
        self.bits() != 0
    }

    pub fn as_i64(self) -> i64 {
        match self {
            Concrete::I32(v) => v as i64,
            Concrete::I64(v) => v,
        }
    }

    fn bool(b: bool) -> Concrete {
        Concrete::I32(b as i32)
    }
}

impl fmt::Display for Concrete {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Concrete::I32(v) => write!(f, "(i32 {v})"),
            Concrete::I64(v) => write!(f, "(i64 {v})"),
        }
    }
}

/// Wasm integer arithmetic. `lhs` is the second-from-top operand and `rhs`
/// the top of the stack.
pub fn concrete_binop(op: BinOp, lhs: Concrete, rhs: Concrete) -> Result<Concrete, TrapKind> {
    debug_assert_eq!(lhs.ty(), rhs.ty());
    let ty = lhs.ty();
    let w = ty.bits();
    if let Some(trap) = bits::trap_of(op, w, lhs.bits(), rhs.bits()) {
        return Err(trap);
    }
    Ok(Concrete::from_bits(ty, bits::binop(op, w, lhs.bits(), rhs.bits())))
}

pub fn concrete_relop(op: RelOp, lhs: Concrete, rhs: Concrete) -> Concrete {
    debug_assert_eq!(lhs.ty(), rhs.ty());
    Concrete::bool(bits::relop(op, lhs.ty().bits(), lhs.bits(), rhs.bits()))
}

fn convert(op: CvtOp, v: Concrete) -> Concrete {
    match (op, v) {
        (CvtOp::WrapI64, Concrete::I64(x)) => Concrete::I32(x as i32),
        (CvtOp::ExtendI32S, Concrete::I32(x)) => Concrete::I64(x as i64),
        (CvtOp::ExtendI32U, Concrete::I32(x)) => Concrete::I64(x as u32 as i64),
        _ => unreachable!("ill-typed conversion {op:?} on {v:?}"),
    }
}

impl Value for Concrete {
    type Byte = u8;

    fn constant(c: Concrete) -> Self {
        c
    }

    fn to_concrete(&self) -> Option<Concrete> {
        Some(*self)
    }

    fn binop(op: BinOp, lhs: &Self, rhs: &Self) -> Self {
        let w = lhs.ty().bits();
        Concrete::from_bits(lhs.ty(), bits::binop(op, w, lhs.bits(), rhs.bits()))
    }

    fn relop(op: RelOp, lhs: &Self, rhs: &Self) -> Self {
        concrete_relop(op, *lhs, *rhs)
    }

    fn eqz(v: &Self) -> Self {
        Concrete::bool(v.bits() == 0)
    }

    fn not(v: &Self) -> Self {
        Concrete::bool(v.bits() == 0)
    }

    fn convert(op: CvtOp, v: &Self) -> Self {
        convert(op, *v)
    }

    fn zero_byte() -> u8 {
        0
    }

    fn byte(b: u8) -> u8 {
        b
    }

    fn to_le_bytes(&self, n: usize) -> Vec<u8> {
        self.bits().to_le_bytes()[..n].to_vec()
    }

    fn from_le_bytes(bytes: &[u8], ty: ValueType, signed: bool) -> Self {
        let mut raw = [0u8; 8];
        raw[..bytes.len()].copy_from_slice(bytes);
        let v = u64::from_le_bytes(raw);
        let from = (bytes.len() * 8) as u8;
        Concrete::from_bits(ty, bits::extend(signed, from, ty.bits(), v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sub_overflow_from_swap_example() {
        let r = concrete_binop(BinOp::Sub, Concrete::I32(-2147483648), Concrete::I32(8388481)).unwrap();
        assert_eq!(r, Concrete::I32(2139095167));
    }

    #[test]
    fn add_wraps() {
        let r = concrete_binop(BinOp::Add, Concrete::I32(i32::MAX), Concrete::I32(1)).unwrap();
        assert_eq!(r, Concrete::I32(i32::MIN));
    }

    #[test]
    fn division_traps() {
        assert_eq!(
            concrete_binop(BinOp::DivU, Concrete::I32(7), Concrete::I32(0)),
            Err(TrapKind::IntegerDivideByZero)
        );
        assert_eq!(
            concrete_binop(BinOp::DivS, Concrete::I64(i64::MIN), Concrete::I64(-1)),
            Err(TrapKind::IntegerOverflow)
        );
        assert_eq!(
            concrete_binop(BinOp::RemS, Concrete::I32(i32::MIN), Concrete::I32(-1)),
            Ok(Concrete::I32(0))
        );
    }

    #[test]
    fn comparisons() {
        let (zero, minus_one) = (Concrete::I32(0), Concrete::I32(-1));
        assert_eq!(concrete_relop(RelOp::GtS, zero, minus_one), Concrete::I32(1));
        assert_eq!(concrete_relop(RelOp::GtU, zero, minus_one), Concrete::I32(0));
        assert_eq!(concrete_relop(RelOp::Eq, Concrete::I32(5), Concrete::I32(5)), Concrete::I32(1));
    }

    #[test]
    fn shifts_mask_their_amount() {
        let r = concrete_binop(BinOp::Shl, Concrete::I32(1), Concrete::I32(33)).unwrap();
        assert_eq!(r, Concrete::I32(2));
        let r = concrete_binop(BinOp::ShrS, Concrete::I64(-8), Concrete::I64(65)).unwrap();
        assert_eq!(r, Concrete::I64(-4));
    }

    #[test]
    fn byte_round_trip() {
        let v = Concrete::I32(0x0102_0304);
        assert_eq!(v.to_le_bytes(4), vec![4, 3, 2, 1]);
        assert_eq!(Concrete::from_le_bytes(&[0xff], ValueType::I32, true), Concrete::I32(-1));
        assert_eq!(Concrete::from_le_bytes(&[0xff], ValueType::I32, false), Concrete::I32(255));
        assert_eq!(Concrete::from_le_bytes(&[4, 3, 2, 1], ValueType::I32, false), v);
    }
}
