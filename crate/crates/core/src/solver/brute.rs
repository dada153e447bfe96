use super::model::Model;
use super::SatResult;
use crate::values::{Compiled, SymExpr};

/// Largest assignment space the exhaustive backend will enumerate.
pub const DEFAULT_CAP_BITS: u32 = 24;

/// Decide `pc` by trying every assignment of its symbols in order. The
/// first satisfying assignment becomes the model.
pub fn brute_check(pc: &[SymExpr], cap_bits: u32) -> SatResult {
    let compiled = Compiled::new(pc);
    let total: u32 = compiled.symbols.iter().map(|(_, w)| *w as u32).sum();
    if total > cap_bits {
        return SatResult::Unknown(format!("domain of {total} bits exceeds the {cap_bits}-bit enumeration cap"));
    }
    let mut assignment = vec![0u64; compiled.symbols.len()];
    let mut regs = Vec::new();
    for counter in 0..(1u64 << total) {
        let mut rest = counter;
        for (slot, (_, w)) in compiled.symbols.iter().enumerate() {
            assignment[slot] = rest & crate::values::bits::mask(*w);
            rest = rest.checked_shr(*w as u32).unwrap_or(0);
        }
        if compiled.all_true(&assignment, &mut regs) {
            let mut model = Model::new();
            for (slot, (id, w)) in compiled.symbols.iter().enumerate() {
                model.insert(*id, *w, assignment[slot]);
            }
            return SatResult::Sat(model);
        }
    }
    SatResult::Unsat
}
