//! SMT-LIB2 (`QF_BV`) text for path conditions, and parsing of solver
//! `(get-model)` replies.

use std::collections::HashMap;
use std::fmt::Write;

use super::model::Model;
use crate::values::{symbols_of, BinOp, ExprRef, Node, RelOp, SymExpr};

pub fn symbol_name(id: u32) -> String {
    format!("s{id}")
}

pub fn declare(id: u32, width: u8) -> String {
    format!("(declare-const {} (_ BitVec {width}))", symbol_name(id))
}

fn bv_literal(width: u8, bits: u64) -> String {
    format!("#x{:0digits$x}", bits, digits = width as usize / 4)
}

fn bv_op(op: BinOp) -> &'static str {
    match op {
        BinOp::Add => "bvadd",
        BinOp::Sub => "bvsub",
        BinOp::Mul => "bvmul",
        BinOp::DivS => "bvsdiv",
        BinOp::DivU => "bvudiv",
        BinOp::RemS => "bvsrem",
        BinOp::RemU => "bvurem",
        BinOp::And => "bvand",
        BinOp::Or => "bvor",
        BinOp::Xor => "bvxor",
        BinOp::Shl => "bvshl",
        BinOp::ShrS => "bvashr",
        BinOp::ShrU => "bvlshr",
    }
}

fn rel_op(op: RelOp) -> &'static str {
    match op {
        RelOp::Eq => "=",
        RelOp::Ne => "distinct",
        RelOp::LtS => "bvslt",
        RelOp::LtU => "bvult",
        RelOp::GtS => "bvsgt",
        RelOp::GtU => "bvugt",
        RelOp::LeS => "bvsle",
        RelOp::LeU => "bvule",
        RelOp::GeS => "bvsge",
        RelOp::GeU => "bvuge",
    }
}

/// Prints terms, let-binding subterms that occur more than once so that
/// shared DAGs stay linear in size.
struct Printer {
    shared: HashMap<*const Node, String>,
}

impl Printer {
    fn key(e: &SymExpr) -> Option<*const Node> {
        e.node().map(|n| n as *const Node)
    }

    fn children(e: &SymExpr) -> Vec<&SymExpr> {
        match e.node() {
            None | Some(Node::Symbol { .. }) => vec![],
            Some(Node::Binop { lhs, rhs, .. } | Node::Relop { lhs, rhs, .. }) => vec![lhs, rhs],
            Some(Node::Concat { hi, lo }) => vec![hi, lo],
            Some(Node::Eqz(a) | Node::Not(a)) => vec![a],
            Some(Node::Extract { arg, .. } | Node::Extend { arg, .. }) => vec![arg],
        }
    }

    /// Render `root` as a formula (boolean sort).
    fn assertion(root: &SymExpr) -> String {
        // Count parents per node, then bind multiply-referenced compound
        // nodes in post-order.
        let mut refs: HashMap<*const Node, usize> = HashMap::new();
        let mut order: Vec<SymExpr> = Vec::new();
        let mut stack = vec![(root.clone(), false)];
        let mut visited = std::collections::HashSet::new();
        while let Some((e, done)) = stack.pop() {
            let Some(k) = Printer::key(&e) else { continue };
            if done {
                order.push(e);
                continue;
            }
            if !visited.insert(k) {
                continue;
            }
            stack.push((e.clone(), true));
            for c in Printer::children(&e) {
                if let Some(ck) = Printer::key(c) {
                    *refs.entry(ck).or_default() += 1;
                    stack.push((c.clone(), false));
                }
            }
        }
        let mut p = Printer { shared: HashMap::new() };
        let mut bindings = Vec::new();
        for e in &order {
            let k = Printer::key(e).unwrap();
            let compound = !matches!(e.node(), Some(Node::Symbol { .. }));
            if compound && refs.get(&k).copied().unwrap_or(0) > 1 && Printer::key(e) != Printer::key(root) {
                let name = format!("t{}", bindings.len());
                let body = p.term(e);
                bindings.push((name.clone(), body));
                p.shared.insert(k, name);
            }
        }
        let mut out = String::new();
        for (name, body) in &bindings {
            let _ = write!(out, "(let (({name} {body})) ");
        }
        out.push_str(&p.formula(root));
        out.push_str(&")".repeat(bindings.len()));
        out
    }

    fn formula(&self, e: &SymExpr) -> String {
        match e.view() {
            ExprRef::Const { bits, .. } => if bits != 0 { "true" } else { "false" }.to_string(),
            ExprRef::Node(Node::Relop { op, lhs, rhs }) if !self.is_shared(e) => {
                format!("({} {} {})", rel_op(*op), self.term(lhs), self.term(rhs))
            }
            ExprRef::Node(Node::Eqz(a) | Node::Not(a)) if !self.is_shared(e) => {
                format!("(= {} {})", self.term(a), bv_literal(a.width(), 0))
            }
            _ => format!("(distinct {} {})", self.term(e), bv_literal(e.width(), 0)),
        }
    }

    fn is_shared(&self, e: &SymExpr) -> bool {
        Printer::key(e).is_some_and(|k| self.shared.contains_key(&k))
    }

    fn term(&self, e: &SymExpr) -> String {
        if let Some(name) = Printer::key(e).and_then(|k| self.shared.get(&k)) {
            return name.clone();
        }
        let bool_to_bv = |f: String| format!("(ite {f} #x00000001 #x00000000)");
        match e.view() {
            ExprRef::Const { width, bits } => bv_literal(width, bits),
            ExprRef::Node(node) => match node {
                Node::Symbol { id, .. } => symbol_name(*id),
                Node::Binop { op, lhs, rhs } => {
                    let (l, r) = (self.term(lhs), self.term(rhs));
                    match op {
                        // Wasm takes shift amounts modulo the width.
                        BinOp::Shl | BinOp::ShrS | BinOp::ShrU => format!(
                            "({} {l} (bvurem {r} {}))",
                            bv_op(*op),
                            bv_literal(lhs.width(), lhs.width() as u64)
                        ),
                        _ => format!("({} {l} {r})", bv_op(*op)),
                    }
                }
                Node::Relop { op, lhs, rhs } => {
                    bool_to_bv(format!("({} {} {})", rel_op(*op), self.term(lhs), self.term(rhs)))
                }
                Node::Eqz(a) | Node::Not(a) => {
                    bool_to_bv(format!("(= {} {})", self.term(a), bv_literal(a.width(), 0)))
                }
                Node::Extract { arg, hi, lo } => {
                    format!("((_ extract {} {}) {})", 8 * *hi as u32 + 7, 8 * *lo as u32, self.term(arg))
                }
                Node::Concat { hi, lo } => format!("(concat {} {})", self.term(hi), self.term(lo)),
                Node::Extend { signed, width, arg } => {
                    let kind = if *signed { "sign_extend" } else { "zero_extend" };
                    format!("((_ {kind} {}) {})", width - arg.width(), self.term(arg))
                }
            },
        }
    }
}

/// `(assert ...)` for one truthiness conjunct.
pub fn assertion(conjunct: &SymExpr) -> String {
    format!("(assert {})", Printer::assertion(conjunct))
}

/// A complete, self-contained query for `pc`.
pub fn render_smtlib(pc: &[SymExpr]) -> String {
    let mut out = String::from("(set-logic QF_BV)\n");
    for (id, width) in symbols_of(pc) {
        out.push_str(&declare(id, width));
        out.push('\n');
    }
    for c in pc {
        out.push_str(&assertion(c));
        out.push('\n');
    }
    out.push_str("(check-sat)\n(get-model)\n");
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

/// Parse a sequence of s-expressions; `None` if parentheses do not balance.
pub fn parse_sexps(text: &str) -> Option<Vec<Sexp>> {
    let mut stack: Vec<Vec<Sexp>> = vec![Vec::new()];
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '(' => stack.push(Vec::new()),
            ')' => {
                let done = stack.pop()?;
                stack.last_mut()?.push(Sexp::List(done));
            }
            ';' => {
                for c in chars.by_ref() {
                    if c == '\n' {
                        break;
                    }
                }
            }
            '|' => {
                let mut atom = String::new();
                for c in chars.by_ref() {
                    if c == '|' {
                        break;
                    }
                    atom.push(c);
                }
                stack.last_mut()?.push(Sexp::Atom(atom));
            }
            c if c.is_whitespace() => {}
            c => {
                let mut atom = String::from(c);
                while let Some(&n) = chars.peek() {
                    if n == '(' || n == ')' || n.is_whitespace() {
                        break;
                    }
                    atom.push(n);
                    chars.next();
                }
                stack.last_mut()?.push(Sexp::Atom(atom));
            }
        }
    }
    if stack.len() != 1 {
        return None;
    }
    stack.pop()
}

fn parse_bv_value(v: &Sexp) -> Option<(u64, Option<u8>)> {
    match v {
        Sexp::Atom(a) => {
            if let Some(hex) = a.strip_prefix("#x") {
                Some((u64::from_str_radix(hex, 16).ok()?, Some((hex.len() * 4) as u8)))
            } else if let Some(bin) = a.strip_prefix("#b") {
                Some((u64::from_str_radix(bin, 2).ok()?, Some(bin.len() as u8)))
            } else {
                None
            }
        }
        // (_ bvN W)
        Sexp::List(items) => match items.as_slice() {
            [Sexp::Atom(u), Sexp::Atom(n), Sexp::Atom(w)] if u == "_" => {
                Some((n.strip_prefix("bv")?.parse().ok()?, w.parse().ok()))
            }
            _ => None,
        },
    }
}

/// Extract `(define-fun sN () (_ BitVec W) value)` entries from a
/// `(get-model)` reply. Names other than `sN` are ignored.
pub fn parse_model(reply: &str) -> Option<Model> {
    let sexps = parse_sexps(reply)?;
    let mut model = Model::new();
    let mut stack: Vec<&Sexp> = sexps.iter().collect();
    while let Some(s) = stack.pop() {
        let Sexp::List(items) = s else { continue };
        match items.as_slice() {
            [Sexp::Atom(kw), Sexp::Atom(name), Sexp::List(args), sort, value] if kw == "define-fun" && args.is_empty() => {
                let Some(id) = name.strip_prefix('s').and_then(|n| n.parse::<u32>().ok()) else { continue };
                let width = match sort {
                    Sexp::List(parts) => match parts.as_slice() {
                        [Sexp::Atom(u), Sexp::Atom(bv), Sexp::Atom(w)] if u == "_" && bv == "BitVec" => w.parse().ok()?,
                        _ => continue,
                    },
                    _ => continue,
                };
                let (bits, _) = parse_bv_value(value)?;
                model.insert(id, width, bits);
            }
            _ => stack.extend(items.iter()),
        }
    }
    Some(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::values::ValueType;

    fn s(id: u32) -> SymExpr {
        SymExpr::symbol(id, ValueType::I32)
    }

    #[test]
    fn signed_comparison_maps_directly() {
        let pc = vec![SymExpr::relop(RelOp::GtS, &s(0), &s(1))];
        let text = render_smtlib(&pc);
        assert!(text.starts_with("(set-logic QF_BV)\n"));
        assert!(text.contains("(declare-const s0 (_ BitVec 32))"));
        assert!(text.contains("(assert (bvsgt s0 s1))"));
        assert!(text.ends_with("(check-sat)\n(get-model)\n"));
    }

    #[test]
    fn empty_condition_has_no_asserts() {
        let text = render_smtlib(&[]);
        assert!(!text.contains("assert"));
        assert!(text.contains("(check-sat)"));
    }

    #[test]
    fn plain_values_use_nonzero_truthiness() {
        let text = assertion(&s(3));
        assert_eq!(text, "(assert (distinct s3 #x00000000))");
    }

    #[test]
    fn shared_subterms_are_let_bound() {
        let mut e = s(0);
        for _ in 0..40 {
            e = SymExpr::binop(BinOp::Add, &e, &e);
        }
        let text = assertion(&SymExpr::relop(RelOp::Eq, &e, &SymExpr::i32(0)));
        assert!(text.len() < 4000, "{}", text.len());
        assert!(text.contains("(let ((t0 (bvadd s0 s0)))"));
    }

    #[test]
    fn parses_z3_style_models() {
        let reply = "(\n  (define-fun s1 () (_ BitVec 32)\n    #xfffffffe)\n  (define-fun s0 () (_ BitVec 8)\n    #b00000101)\n)";
        let m = parse_model(reply).unwrap();
        assert_eq!(m.get(1), Some(0xffff_fffe));
        assert_eq!(m.get(0), Some(5));
        assert_eq!(m.width_of(0), Some(8));
        let old = "(model (define-fun s2 () (_ BitVec 64) (_ bv7 64)))";
        assert_eq!(parse_model(old).unwrap().get(2), Some(7));
    }
}
