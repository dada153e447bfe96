use std::fmt::Write;

use super::ast::*;
use crate::values::ValueType;

/// Render a module in the flat text format. Names are not preserved;
/// every reference is printed as an index.
pub fn print_module(m: &Module) -> String {
    let mut out = String::from("(module");
    for t in &m.types {
        let _ = write!(out, "\n  (type (func{}))", signature(t));
    }
    for imp in &m.imports {
        let _ = write!(out, "\n  (import {} {} (func{}))", string(imp.module.as_bytes()), string(imp.name.as_bytes()), signature(&imp.ty));
    }
    if let Some(t) = &m.table {
        let _ = write!(out, "\n  (table {} funcref)", limits(t));
    }
    if let Some(mem) = &m.memory {
        let _ = write!(out, "\n  (memory {})", limits(mem));
    }
    for g in &m.globals {
        let ty = if g.mutable { format!("(mut {})", g.ty) } else { g.ty.to_string() };
        let _ = write!(out, "\n  (global {ty} ({}.const {}))", g.init.ty(), g.init.as_i64());
    }
    for e in &m.exports {
        let kind = match e.kind {
            ExportKind::Func => "func",
            ExportKind::Memory => "memory",
            ExportKind::Table => "table",
            ExportKind::Global => "global",
        };
        let _ = write!(out, "\n  (export {} ({kind} {}))", string(e.name.as_bytes()), e.index);
    }
    for e in &m.elems {
        let _ = write!(out, "\n  (elem (i32.const {}) func", e.offset as i32);
        for f in &e.funcs {
            let _ = write!(out, " {f}");
        }
        out.push(')');
    }
    for d in &m.datas {
        let _ = write!(out, "\n  (data (i32.const {}) {})", d.offset as i32, string(&d.bytes));
    }
    for f in &m.funcs {
        let _ = write!(out, "\n  (func{}", signature(&f.ty));
        if !f.locals.is_empty() {
            out.push_str(" (local");
            for l in &f.locals {
                let _ = write!(out, " {l}");
            }
            out.push(')');
        }
        body(&mut out, &f.body, 2);
        out.push(')');
    }
    out.push_str(")\n");
    out
}

fn limits(l: &Limits) -> String {
    match l.max {
        Some(max) => format!("{} {max}", l.min),
        None => l.min.to_string(),
    }
}

fn types(kw: &str, ts: &[ValueType]) -> String {
    if ts.is_empty() {
        return String::new();
    }
    let mut s = format!(" ({kw}");
    for t in ts {
        let _ = write!(s, " {t}");
    }
    s.push(')');
    s
}

fn signature(t: &FuncType) -> String {
    format!("{}{}", types("param", &t.params), types("result", &t.results))
}

fn string(bytes: &[u8]) -> String {
    let mut s = String::from("\"");
    for &b in bytes {
        if b.is_ascii_graphic() && b != b'"' && b != b'\\' || b == b' ' {
            s.push(b as char);
        } else {
            let _ = write!(s, "\\{b:02x}");
        }
    }
    s.push('"');
    s
}

fn block_type(bt: &BlockType) -> String {
    match bt {
        Some(t) => format!(" (result {t})"),
        None => String::new(),
    }
}

fn body(out: &mut String, code: &[Instr], depth: usize) {
    for i in code {
        let pad = "  ".repeat(depth);
        let _ = write!(out, "\n{pad}");
        match i {
            Instr::Block(bt, b) | Instr::Loop(bt, b) => {
                let _ = write!(out, "{}{}", i.name(), block_type(bt));
                body(out, b, depth + 1);
                let _ = write!(out, "\n{pad}end");
            }
            Instr::If(bt, then, els) => {
                let _ = write!(out, "if{}", block_type(bt));
                body(out, then, depth + 1);
                if !els.is_empty() {
                    let _ = write!(out, "\n{pad}else");
                    body(out, els, depth + 1);
                }
                let _ = write!(out, "\n{pad}end");
            }
            Instr::Const(c) => {
                let _ = write!(out, "{} {}", i.name(), c.as_i64());
            }
            Instr::LocalGet(k)
            | Instr::LocalSet(k)
            | Instr::LocalTee(k)
            | Instr::GlobalGet(k)
            | Instr::GlobalSet(k)
            | Instr::Br(k)
            | Instr::BrIf(k)
            | Instr::Call(k) => {
                let _ = write!(out, "{} {k}", i.name());
            }
            Instr::Load { arg, .. } | Instr::Store { arg, .. } => {
                out.push_str(&i.name());
                if arg.offset != 0 {
                    let _ = write!(out, " offset={}", arg.offset);
                }
            }
            Instr::CallIndirect(t) => {
                let _ = write!(out, "call_indirect{}", signature(t));
            }
            _ => out.push_str(&i.name()),
        }
    }
}
