use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use super::{bits, BinOp, Concrete, CvtOp, RelOp, Value, ValueType};

/// An immutable, structurally shared bitvector expression.
///
/// Constants are stored inline; every other node lives behind an `Arc` so
/// that sibling execution paths share subterms freely. The constructors
/// (`binop`, `relop`, ...) perform constant folding and a small set of local
/// rewrites; [`SymExpr::from_node`] builds a node verbatim.
#[derive(Clone)]
pub struct SymExpr(Repr);

#[derive(Clone)]
enum Repr {
    Const { width: u8, bits: u64 },
    Node(Arc<Inner>),
}

struct Inner {
    width: u8,
    node: Node,
}

/// Operator nodes. Byte indices in `Extract` are inclusive, little-endian
/// (byte 0 is the least significant).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Node {
    Symbol { id: u32, width: u8 },
    Binop { op: BinOp, lhs: SymExpr, rhs: SymExpr },
    /// Evaluates to a 32-bit 0/1.
    Relop { op: RelOp, lhs: SymExpr, rhs: SymExpr },
    /// Evaluates to a 32-bit 0/1.
    Eqz(SymExpr),
    /// Boolean negation of a truthiness value; 32-bit 0/1.
    Not(SymExpr),
    Extract { arg: SymExpr, hi: u8, lo: u8 },
    Concat { hi: SymExpr, lo: SymExpr },
    Extend { signed: bool, width: u8, arg: SymExpr },
}

/// Borrowed view of an expression's top node.
#[derive(Debug, Clone, Copy)]
pub enum ExprRef<'a> {
    Const { width: u8, bits: u64 },
    Node(&'a Node),
}

impl Node {
    fn width(&self) -> u8 {
        match self {
            Node::Symbol { width, .. } => *width,
            Node::Binop { lhs, .. } => lhs.width(),
            Node::Relop { .. } | Node::Eqz(_) | Node::Not(_) => 32,
            Node::Extract { hi, lo, .. } => 8 * (hi - lo + 1),
            Node::Concat { hi, lo } => hi.width() + lo.width(),
            Node::Extend { width, .. } => *width,
        }
    }

    fn check(&self) {
        match self {
            Node::Binop { lhs, rhs, .. } | Node::Relop { lhs, rhs, .. } => {
                assert_eq!(lhs.width(), rhs.width(), "operand width mismatch in {self:?}")
            }
            Node::Extract { arg, hi, lo } => {
                assert!(lo <= hi && 8 * (*hi as u32 + 1) <= arg.width() as u32, "bad extract {self:?}")
            }
            Node::Concat { hi, lo } => assert!(hi.width() as u32 + lo.width() as u32 <= 64),
            Node::Extend { width, arg, .. } => assert!(arg.width() <= *width && *width <= 64),
            _ => {}
        }
    }
}

impl SymExpr {
    pub fn constant(width: u8, bits: u64) -> SymExpr {
        SymExpr(Repr::Const { width, bits: bits & bits::mask(width) })
    }

    pub fn from_concrete(c: Concrete) -> SymExpr {
        SymExpr::constant(c.ty().bits(), c.bits())
    }

    pub fn i32(v: i32) -> SymExpr {
        SymExpr::constant(32, v as u32 as u64)
    }

    pub fn symbol(id: u32, ty: ValueType) -> SymExpr {
        SymExpr::from_node(Node::Symbol { id, width: ty.bits() })
    }

    /// A symbol of arbitrary width (used by test-scaled formulas).
    pub fn symbol_of_width(id: u32, width: u8) -> SymExpr {
        SymExpr::from_node(Node::Symbol { id, width })
    }

    /// Build `node` as-is, without folding.
    pub fn from_node(node: Node) -> SymExpr {
        node.check();
        SymExpr(Repr::Node(Arc::new(Inner { width: node.width(), node })))
    }

    pub fn width(&self) -> u8 {
        match &self.0 {
            Repr::Const { width, .. } => *width,
            Repr::Node(inner) => inner.width,
        }
    }

    pub fn view(&self) -> ExprRef<'_> {
        match &self.0 {
            Repr::Const { width, bits } => ExprRef::Const { width: *width, bits: *bits },
            Repr::Node(inner) => ExprRef::Node(&inner.node),
        }
    }

    pub fn node(&self) -> Option<&Node> {
        match &self.0 {
            Repr::Const { .. } => None,
            Repr::Node(inner) => Some(&inner.node),
        }
    }

    pub fn as_const(&self) -> Option<u64> {
        match self.0 {
            Repr::Const { bits, .. } => Some(bits),
            Repr::Node(_) => None,
        }
    }

    fn is_const(&self, v: u64) -> bool {
        self.as_const() == Some(v & bits::mask(self.width()))
    }

    /// True when the expression can only evaluate to 0 or 1.
    pub fn is_bool_valued(&self) -> bool {
        match self.view() {
            ExprRef::Const { bits, .. } => bits <= 1,
            ExprRef::Node(Node::Relop { .. } | Node::Eqz(_) | Node::Not(_)) => true,
            ExprRef::Node(_) => false,
        }
    }

    fn ptr_id(&self) -> Option<usize> {
        match &self.0 {
            Repr::Node(inner) => Some(Arc::as_ptr(inner) as usize),
            Repr::Const { .. } => None,
        }
    }

    // ---- folding constructors ----

    pub fn binop(op: BinOp, lhs: &SymExpr, rhs: &SymExpr) -> SymExpr {
        assert_eq!(lhs.width(), rhs.width(), "binop width mismatch");
        let w = lhs.width();
        if let (Some(a), Some(b)) = (lhs.as_const(), rhs.as_const()) {
            if bits::trap_of(op, w, a, b).is_none() {
                return SymExpr::constant(w, bits::binop(op, w, a, b));
            }
        }
        match op {
            BinOp::Add if rhs.is_const(0) => return lhs.clone(),
            BinOp::Add if lhs.is_const(0) => return rhs.clone(),
            BinOp::Sub if rhs.is_const(0) => return lhs.clone(),
            BinOp::Mul if rhs.is_const(1) => return lhs.clone(),
            BinOp::Mul if lhs.is_const(1) => return rhs.clone(),
            BinOp::Mul if lhs.is_const(0) || rhs.is_const(0) => return SymExpr::constant(w, 0),
            BinOp::Xor if lhs == rhs => return SymExpr::constant(w, 0),
            BinOp::And if lhs == rhs => return lhs.clone(),
            _ => {}
        }
        SymExpr::from_node(Node::Binop { op, lhs: lhs.clone(), rhs: rhs.clone() })
    }

    pub fn relop(op: RelOp, lhs: &SymExpr, rhs: &SymExpr) -> SymExpr {
        assert_eq!(lhs.width(), rhs.width(), "relop width mismatch");
        if let (Some(a), Some(b)) = (lhs.as_const(), rhs.as_const()) {
            return SymExpr::constant(32, bits::relop(op, lhs.width(), a, b) as u64);
        }
        SymExpr::from_node(Node::Relop { op, lhs: lhs.clone(), rhs: rhs.clone() })
    }

    pub fn eqz(arg: &SymExpr) -> SymExpr {
        if let Some(a) = arg.as_const() {
            return SymExpr::constant(32, (a == 0) as u64);
        }
        if let Some(Node::Relop { op, lhs, rhs }) = arg.node() {
            return SymExpr::relop(op.complement(), lhs, rhs);
        }
        SymExpr::from_node(Node::Eqz(arg.clone()))
    }

    pub fn not(arg: &SymExpr) -> SymExpr {
        if let Some(a) = arg.as_const() {
            return SymExpr::constant(32, (a == 0) as u64);
        }
        match arg.node() {
            Some(Node::Relop { op, lhs, rhs }) => return SymExpr::relop(op.complement(), lhs, rhs),
            Some(Node::Not(inner)) if inner.is_bool_valued() => return inner.clone(),
            Some(Node::Eqz(inner)) => {
                return SymExpr::relop(RelOp::Ne, inner, &SymExpr::constant(inner.width(), 0))
            }
            _ => {}
        }
        SymExpr::from_node(Node::Not(arg.clone()))
    }

    pub fn extract(arg: &SymExpr, hi: u8, lo: u8) -> SymExpr {
        let out_width = 8 * (hi - lo + 1);
        if lo == 0 && out_width == arg.width() {
            return arg.clone();
        }
        if let Some(a) = arg.as_const() {
            return SymExpr::constant(out_width, a >> (8 * lo as u32));
        }
        match arg.node() {
            Some(Node::Extract { arg: inner, lo: inner_lo, .. }) => {
                return SymExpr::extract(inner, inner_lo + hi, inner_lo + lo)
            }
            Some(Node::Concat { hi: h, lo: l }) => {
                let low_bytes = l.width() / 8;
                if hi < low_bytes {
                    return SymExpr::extract(l, hi, lo);
                }
                if lo >= low_bytes {
                    return SymExpr::extract(h, hi - low_bytes, lo - low_bytes);
                }
            }
            Some(Node::Extend { arg: inner, .. }) if 8 * (hi as u32 + 1) <= inner.width() as u32 => {
                return SymExpr::extract(inner, hi, lo)
            }
            _ => {}
        }
        SymExpr::from_node(Node::Extract { arg: arg.clone(), hi, lo })
    }

    pub fn concat(hi: &SymExpr, lo: &SymExpr) -> SymExpr {
        if let (Some(h), Some(l)) = (hi.as_const(), lo.as_const()) {
            return SymExpr::constant(hi.width() + lo.width(), (h << lo.width()) | l);
        }
        if let (
            Some(Node::Extract { arg: a1, hi: h1, lo: l1 }),
            Some(Node::Extract { arg: a2, hi: h2, lo: l2 }),
        ) = (hi.node(), lo.node())
        {
            if a1 == a2 && *l1 == h2 + 1 {
                return SymExpr::extract(a1, *h1, *l2);
            }
        }
        SymExpr::from_node(Node::Concat { hi: hi.clone(), lo: lo.clone() })
    }

    pub fn extend(signed: bool, width: u8, arg: &SymExpr) -> SymExpr {
        if arg.width() == width {
            return arg.clone();
        }
        if let Some(a) = arg.as_const() {
            return SymExpr::constant(width, bits::extend(signed, arg.width(), width, a));
        }
        SymExpr::from_node(Node::Extend { signed, width, arg: arg.clone() })
    }

    /// Rebuild bottom-up through the folding constructors.
    pub fn simplify(&self) -> SymExpr {
        let mut memo = HashMap::new();
        self.simplify_memo(&mut memo)
    }

    fn simplify_memo(&self, memo: &mut HashMap<usize, SymExpr>) -> SymExpr {
        let Some(key) = self.ptr_id() else { return self.clone() };
        if let Some(done) = memo.get(&key) {
            return done.clone();
        }
        let node = self.node().expect("non-constant");
        let out = match node {
            Node::Symbol { .. } => self.clone(),
            Node::Binop { op, lhs, rhs } => {
                SymExpr::binop(*op, &lhs.simplify_memo(memo), &rhs.simplify_memo(memo))
            }
            Node::Relop { op, lhs, rhs } => {
                SymExpr::relop(*op, &lhs.simplify_memo(memo), &rhs.simplify_memo(memo))
            }
            Node::Eqz(a) => SymExpr::eqz(&a.simplify_memo(memo)),
            Node::Not(a) => SymExpr::not(&a.simplify_memo(memo)),
            Node::Extract { arg, hi, lo } => SymExpr::extract(&arg.simplify_memo(memo), *hi, *lo),
            Node::Concat { hi, lo } => SymExpr::concat(&hi.simplify_memo(memo), &lo.simplify_memo(memo)),
            Node::Extend { signed, width, arg } => {
                SymExpr::extend(*signed, *width, &arg.simplify_memo(memo))
            }
        };
        memo.insert(key, out.clone());
        out
    }

    /// Every symbol occurring in the expression, as `(id, width)`, sorted.
    pub fn symbols(&self) -> Vec<(u32, u8)> {
        let mut out = Vec::new();
        collect_symbols(std::slice::from_ref(self), &mut out);
        out
    }

    /// Evaluate under `env`, which maps symbol ids to bit patterns.
    pub fn eval(&self, env: &dyn Fn(u32) -> Option<u64>) -> Option<u64> {
        let compiled = Compiled::new(std::slice::from_ref(self));
        let values: Option<Vec<u64>> = compiled.symbols.iter().map(|(id, _)| env(*id)).collect();
        Some(compiled.eval(&values?)[0])
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        self.render_into(&mut s);
        s
    }

    fn render_into(&self, out: &mut String) {
        use std::fmt::Write;
        match self.view() {
            ExprRef::Const { width, bits } => {
                let _ = write!(out, "({} {})", ty_name(width), bits::to_signed(width, bits));
            }
            ExprRef::Node(node) => match node {
                Node::Symbol { id, .. } => {
                    let _ = write!(out, "symbol_{id}");
                }
                Node::Binop { op, lhs, rhs } => {
                    let _ = write!(out, "({}.{} ", ty_name(lhs.width()), op.mnemonic());
                    lhs.render_into(out);
                    out.push(' ');
                    rhs.render_into(out);
                    out.push(')');
                }
                Node::Relop { op, lhs, rhs } => {
                    match op {
                        RelOp::Eq | RelOp::Ne => {
                            let _ = write!(out, "(bool.{} ", op.mnemonic());
                        }
                        _ => {
                            let _ = write!(out, "({}.{} ", ty_name(lhs.width()), op.mnemonic());
                        }
                    }
                    lhs.render_into(out);
                    out.push(' ');
                    rhs.render_into(out);
                    out.push(')');
                }
                Node::Eqz(a) => {
                    let _ = write!(out, "({}.eqz ", ty_name(a.width()));
                    a.render_into(out);
                    out.push(')');
                }
                Node::Not(a) => {
                    out.push_str("(bool.not ");
                    a.render_into(out);
                    out.push(')');
                }
                Node::Extract { arg, hi, lo } => {
                    out.push_str("(extract ");
                    arg.render_into(out);
                    let _ = write!(out, " {hi} {lo})");
                }
                Node::Concat { hi, lo } => {
                    out.push_str("(concat ");
                    hi.render_into(out);
                    out.push(' ');
                    lo.render_into(out);
                    out.push(')');
                }
                Node::Extend { signed, width, arg } => {
                    let sign = if *signed { 's' } else { 'u' };
                    if arg.width() == 32 && *width == 64 {
                        let _ = write!(out, "(i64.extend_i32_{sign} ");
                    } else {
                        let _ = write!(out, "({}.extend{}_{sign} ", ty_name(*width), arg.width());
                    }
                    arg.render_into(out);
                    out.push(')');
                }
            },
        }
    }
}

fn ty_name(width: u8) -> String {
    format!("i{width}")
}

impl PartialEq for SymExpr {
    fn eq(&self, other: &Self) -> bool {
        match (&self.0, &other.0) {
            (Repr::Const { width: w1, bits: b1 }, Repr::Const { width: w2, bits: b2 }) => {
                w1 == w2 && b1 == b2
            }
            (Repr::Node(a), Repr::Node(b)) => Arc::ptr_eq(a, b) || a.node == b.node,
            _ => false,
        }
    }
}

impl Eq for SymExpr {}

impl Hash for SymExpr {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match &self.0 {
            Repr::Const { width, bits } => {
                0u8.hash(state);
                width.hash(state);
                bits.hash(state);
            }
            Repr::Node(inner) => {
                1u8.hash(state);
                inner.node.hash(state);
            }
        }
    }
}

impl fmt::Debug for SymExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl fmt::Display for SymExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

fn collect_symbols(roots: &[SymExpr], out: &mut Vec<(u32, u8)>) {
    let mut seen = std::collections::HashSet::new();
    let mut stack: Vec<&SymExpr> = roots.iter().collect();
    while let Some(e) = stack.pop() {
        let Some(key) = e.ptr_id() else { continue };
        if !seen.insert(key) {
            continue;
        }
        match e.node().unwrap() {
            Node::Symbol { id, width } => out.push((*id, *width)),
            Node::Binop { lhs, rhs, .. } | Node::Relop { lhs, rhs, .. } => {
                stack.push(lhs);
                stack.push(rhs);
            }
            Node::Concat { hi, lo } => {
                stack.push(hi);
                stack.push(lo);
            }
            Node::Eqz(a) | Node::Not(a) => stack.push(a),
            Node::Extract { arg, .. } | Node::Extend { arg, .. } => stack.push(arg),
        }
    }
    out.sort_unstable();
    out.dedup();
}

/// All distinct symbols of a set of expressions, sorted by id.
pub(crate) fn symbols_of(roots: &[SymExpr]) -> Vec<(u32, u8)> {
    let mut out = Vec::new();
    collect_symbols(roots, &mut out);
    out
}

/// A set of expressions flattened into a straight-line program over their
/// shared DAG, for repeated evaluation under many assignments.
pub struct Compiled {
    /// Symbols in slot order (sorted by id).
    pub symbols: Vec<(u32, u8)>,
    steps: Vec<Step>,
    roots: Vec<Operand>,
}

#[derive(Clone, Copy)]
enum Operand {
    Const(u64),
    Slot(usize),
}

enum Step {
    Symbol(usize),
    Binop(BinOp, u8, Operand, Operand),
    Relop(RelOp, u8, Operand, Operand),
    IsZero(Operand),
    Extract(Operand, u8, u8),
    Concat(Operand, Operand, u8),
    Extend(bool, u8, u8, Operand),
}

impl Compiled {
    pub fn new(roots: &[SymExpr]) -> Compiled {
        let symbols = symbols_of(roots);
        let slot_of: HashMap<u32, usize> = symbols.iter().enumerate().map(|(i, (id, _))| (*id, i)).collect();
        let mut c = Compiled { symbols, steps: Vec::new(), roots: Vec::new() };
        let mut memo = HashMap::new();
        for r in roots {
            let op = c.lower(r, &slot_of, &mut memo);
            c.roots.push(op);
        }
        c
    }

    fn lower(&mut self, e: &SymExpr, slots: &HashMap<u32, usize>, memo: &mut HashMap<usize, Operand>) -> Operand {
        let Some(key) = e.ptr_id() else {
            return Operand::Const(e.as_const().unwrap());
        };
        if let Some(op) = memo.get(&key) {
            return *op;
        }
        // Explicit post-order to keep deep chains off the call stack.
        let mut work: Vec<(SymExpr, bool)> = vec![(e.clone(), false)];
        while let Some((cur, expanded)) = work.pop() {
            let Some(k) = cur.ptr_id() else { continue };
            if memo.contains_key(&k) {
                continue;
            }
            let node = cur.node().unwrap();
            let children: Vec<&SymExpr> = match node {
                Node::Symbol { .. } => vec![],
                Node::Binop { lhs, rhs, .. } | Node::Relop { lhs, rhs, .. } => vec![lhs, rhs],
                Node::Concat { hi, lo } => vec![hi, lo],
                Node::Eqz(a) | Node::Not(a) => vec![a],
                Node::Extract { arg, .. } | Node::Extend { arg, .. } => vec![arg],
            };
            if !expanded {
                let pending: Vec<SymExpr> = children
                    .iter()
                    .filter(|c| c.ptr_id().is_some_and(|ck| !memo.contains_key(&ck)))
                    .map(|c| (*c).clone())
                    .collect();
                work.push((cur.clone(), true));
                for c in pending {
                    work.push((c, false));
                }
                continue;
            }
            let get = |c: &SymExpr, memo: &HashMap<usize, Operand>| match c.ptr_id() {
                None => Operand::Const(c.as_const().unwrap()),
                Some(ck) => memo[&ck],
            };
            let step = match node {
                Node::Symbol { id, .. } => Step::Symbol(slots[id]),
                Node::Binop { op, lhs, rhs } => Step::Binop(*op, lhs.width(), get(lhs, memo), get(rhs, memo)),
                Node::Relop { op, lhs, rhs } => Step::Relop(*op, lhs.width(), get(lhs, memo), get(rhs, memo)),
                Node::Eqz(a) | Node::Not(a) => Step::IsZero(get(a, memo)),
                Node::Extract { arg, hi, lo } => Step::Extract(get(arg, memo), *hi, *lo),
                Node::Concat { hi, lo } => Step::Concat(get(hi, memo), get(lo, memo), lo.width()),
                Node::Extend { signed, width, arg } => Step::Extend(*signed, arg.width(), *width, get(arg, memo)),
            };
            self.steps.push(step);
            memo.insert(k, Operand::Slot(self.steps.len() - 1));
        }
        memo[&key]
    }

    /// Evaluate every root; `assignment[i]` is the value of `symbols[i]`.
    pub fn eval(&self, assignment: &[u64]) -> Vec<u64> {
        let mut regs = vec![0u64; self.steps.len()];
        self.eval_into(assignment, &mut regs);
        self.roots.iter().map(|r| read(&regs, *r)).collect()
    }

    /// Evaluate and report whether every root is nonzero.
    pub fn all_true(&self, assignment: &[u64], regs: &mut Vec<u64>) -> bool {
        regs.resize(self.steps.len(), 0);
        self.eval_into(assignment, regs);
        self.roots.iter().all(|r| read(regs, *r) != 0)
    }

    fn eval_into(&self, assignment: &[u64], regs: &mut [u64]) {
        for (i, step) in self.steps.iter().enumerate() {
            let v = match *step {
                Step::Symbol(slot) => assignment[slot] & bits::mask(self.symbols[slot].1),
                Step::Binop(op, w, a, b) => bits::binop(op, w, read(regs, a), read(regs, b)),
                Step::Relop(op, w, a, b) => bits::relop(op, w, read(regs, a), read(regs, b)) as u64,
                Step::IsZero(a) => (read(regs, a) == 0) as u64,
                Step::Extract(a, hi, lo) => {
                    (read(regs, a) >> (8 * lo as u32)) & bits::mask(8 * (hi - lo + 1))
                }
                Step::Concat(h, l, lw) => (read(regs, h) << lw) | read(regs, l),
                Step::Extend(signed, from, to, a) => bits::extend(signed, from, to, read(regs, a)),
            };
            regs[i] = v;
        }
    }
}

#[inline]
fn read(regs: &[u64], op: Operand) -> u64 {
    match op {
        Operand::Const(c) => c,
        Operand::Slot(s) => regs[s],
    }
}

impl Value for SymExpr {
    type Byte = SymExpr;

    fn constant(c: Concrete) -> Self {
        SymExpr::from_concrete(c)
    }

    fn to_concrete(&self) -> Option<Concrete> {
        let bits = self.as_const()?;
        ValueType::from_bits(self.width()).map(|ty| Concrete::from_bits(ty, bits))
    }

    fn binop(op: BinOp, lhs: &Self, rhs: &Self) -> Self {
        SymExpr::binop(op, lhs, rhs)
    }

    fn relop(op: RelOp, lhs: &Self, rhs: &Self) -> Self {
        SymExpr::relop(op, lhs, rhs)
    }

    fn eqz(v: &Self) -> Self {
        SymExpr::eqz(v)
    }

    fn not(v: &Self) -> Self {
        SymExpr::not(v)
    }

    fn convert(op: CvtOp, v: &Self) -> Self {
        match op {
            CvtOp::WrapI64 => SymExpr::extract(v, 3, 0),
            CvtOp::ExtendI32S => SymExpr::extend(true, 64, v),
            CvtOp::ExtendI32U => SymExpr::extend(false, 64, v),
        }
    }

    fn zero_byte() -> SymExpr {
        SymExpr::constant(8, 0)
    }

    fn byte(b: u8) -> SymExpr {
        SymExpr::constant(8, b as u64)
    }

    fn to_le_bytes(&self, n: usize) -> Vec<SymExpr> {
        (0..n as u8).map(|i| SymExpr::extract(self, i, i)).collect()
    }

    fn from_le_bytes(bytes: &[SymExpr], ty: ValueType, signed: bool) -> Self {
        let mut acc = bytes[0].clone();
        for b in &bytes[1..] {
            acc = SymExpr::concat(b, &acc);
        }
        SymExpr::extend(signed, ty.bits(), &acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(id: u32) -> SymExpr {
        SymExpr::symbol(id, ValueType::I32)
    }

    #[test]
    fn renders_wasm_mnemonics() {
        let e = SymExpr::binop(
            BinOp::Add,
            &SymExpr::i32(42),
            &SymExpr::binop(BinOp::Mul, &s(2), &s(2)),
        );
        assert_eq!(e.render(), "(i32.add (i32 42) (i32.mul symbol_2 symbol_2))");
        assert_eq!(SymExpr::i32(42).render(), "(i32 42)");
        assert_eq!(s(0).render(), "symbol_0");
        assert_eq!(SymExpr::relop(RelOp::Eq, &s(0), &s(1)).render(), "(bool.eq symbol_0 symbol_1)");
        assert_eq!(SymExpr::relop(RelOp::GeS, &s(0), &s(1)).render(), "(i32.ge_s symbol_0 symbol_1)");
    }

    #[test]
    fn folds_constants() {
        assert_eq!(SymExpr::binop(BinOp::Add, &SymExpr::i32(2), &SymExpr::i32(3)), SymExpr::i32(5));
        assert_eq!(SymExpr::binop(BinOp::Xor, &s(0), &s(0)), SymExpr::i32(0));
        assert_eq!(SymExpr::binop(BinOp::Mul, &s(0), &SymExpr::i32(0)), SymExpr::i32(0));
        assert_eq!(SymExpr::binop(BinOp::Sub, &s(3), &SymExpr::i32(0)), s(3));
        // trapping division is left for the interpreter
        let d = SymExpr::binop(BinOp::DivU, &SymExpr::i32(1), &SymExpr::i32(0));
        assert!(d.as_const().is_none());
    }

    #[test]
    fn negation_of_comparison_flips_it() {
        let gt = SymExpr::relop(RelOp::GtS, &s(0), &s(1));
        assert_eq!(SymExpr::not(&gt), SymExpr::relop(RelOp::LeS, &s(0), &s(1)));
        let b = SymExpr::from_node(Node::Eqz(s(0)));
        let back = SymExpr::not(&SymExpr::not(&b));
        assert_eq!(back, SymExpr::relop(RelOp::Eq, &s(0), &SymExpr::i32(0)));
        for v in [0u64, 1, 0xffff_ffff] {
            assert_eq!(back.eval(&|_| Some(v)), b.eval(&|_| Some(v)));
        }
    }

    #[test]
    fn byte_split_and_rejoin_is_identity() {
        let x = s(0);
        let bytes = x.to_le_bytes(4);
        assert_eq!(SymExpr::from_le_bytes(&bytes, ValueType::I32, false), x);
        let low = SymExpr::from_le_bytes(&bytes[..2], ValueType::I32, false);
        assert_eq!(low.render(), "(i32.extend16_u (extract symbol_0 1 0))");
    }

    #[test]
    fn compiled_evaluation_shares_subterms() {
        let mut e = s(0);
        for _ in 0..200 {
            e = SymExpr::binop(BinOp::Add, &e, &e);
        }
        let c = Compiled::new(std::slice::from_ref(&e));
        assert_eq!(c.steps.len(), 201);
        assert_eq!(c.eval(&[3]), vec![0]);
        assert_eq!(e.eval(&|_| Some(1)), Some(0));
    }
}
