use std::collections::HashMap;

use super::ast::*;
use super::sexpr::{read_all, Pos, SExpr};
use super::{ParseError, ParseErrorKind};
use crate::values::{BinOp, Concrete, CvtOp, RelOp, ValueType};

type Result<T> = std::result::Result<T, ParseError>;

fn syntax(pos: Pos, message: impl Into<String>) -> ParseError {
    ParseError { line: pos.line, col: pos.col, kind: ParseErrorKind::Syntax(message.into()) }
}

fn unsupported(pos: Pos, feature: impl Into<String>) -> ParseError {
    ParseError { line: pos.line, col: pos.col, kind: ParseErrorKind::Unsupported(feature.into()) }
}

fn unknown_opcode(pos: Pos, op: &str) -> ParseError {
    ParseError { line: pos.line, col: pos.col, kind: ParseErrorKind::UnknownOpcode(op.to_string()) }
}

/// Core instructions that exist in WebAssembly but are outside the subset.
const OUTSIDE_SUBSET: &[&str] = &[
    "br_table",
    "return_call",
    "return_call_indirect",
    "call_ref",
    "select_t",
    "memory.copy",
    "memory.fill",
    "memory.init",
    "data.drop",
    "elem.drop",
    "table.get",
    "table.set",
    "table.size",
    "table.grow",
    "table.fill",
    "table.copy",
    "table.init",
    "ref.null",
    "ref.is_null",
    "ref.func",
    "try",
    "catch",
    "throw",
    "rethrow",
    "delegate",
    "i32.clz",
    "i32.ctz",
    "i32.popcnt",
    "i32.rotl",
    "i32.rotr",
    "i64.clz",
    "i64.ctz",
    "i64.popcnt",
    "i64.rotl",
    "i64.rotr",
    "i32.extend8_s",
    "i32.extend16_s",
    "i64.extend8_s",
    "i64.extend16_s",
    "i64.extend32_s",
    "i64.load8_s",
    "i64.load8_u",
    "i64.load16_s",
    "i64.load16_u",
    "i64.load32_s",
    "i64.load32_u",
    "i64.store8",
    "i64.store16",
    "i64.store32",
    "i32.trunc_f32_s",
    "i32.trunc_f32_u",
    "i32.trunc_f64_s",
    "i32.trunc_f64_u",
    "i64.trunc_f32_s",
    "i64.trunc_f32_u",
    "i64.trunc_f64_s",
    "i64.trunc_f64_u",
    "i32.trunc_sat_f32_s",
    "i32.trunc_sat_f32_u",
    "i32.trunc_sat_f64_s",
    "i32.trunc_sat_f64_u",
    "i64.trunc_sat_f32_s",
    "i64.trunc_sat_f32_u",
    "i64.trunc_sat_f64_s",
    "i64.trunc_sat_f64_u",
    "i32.reinterpret_f32",
    "i64.reinterpret_f64",
];

fn float_feature(op: &str) -> Option<&'static str> {
    let prefix = op.split('.').next().unwrap_or(op);
    match prefix {
        "f32" => Some("f32"),
        "f64" => Some("f64"),
        "v128" | "i8x16" | "i16x8" | "i32x4" | "i64x2" | "f32x4" | "f64x2" => Some("simd"),
        _ => None,
    }
}

fn value_type(e: &SExpr) -> Result<ValueType> {
    match e.atom() {
        Some("i32") => Ok(ValueType::I32),
        Some("i64") => Ok(ValueType::I64),
        Some("f32") => Err(unsupported(e.pos(), "f32")),
        Some("f64") => Err(unsupported(e.pos(), "f64")),
        Some("v128") => Err(unsupported(e.pos(), "simd")),
        Some(t @ ("funcref" | "externref" | "anyref")) => Err(unsupported(e.pos(), format!("reference type {t}"))),
        _ => Err(syntax(e.pos(), "expected a value type")),
    }
}

fn is_id(e: &SExpr) -> bool {
    e.atom().is_some_and(|a| a.starts_with('$'))
}

/// Parse an integer literal of the given bit width. Both signed and
/// unsigned spellings are accepted; the result is the two's-complement
/// bit pattern.
pub(crate) fn parse_int(text: &str, bits: u32) -> Option<u64> {
    let (neg, rest) = match text.as_bytes().first() {
        Some(b'-') => (true, &text[1..]),
        Some(b'+') => (false, &text[1..]),
        _ => (false, text),
    };
    if rest.is_empty() || rest.starts_with('_') || rest.ends_with('_') || rest.contains("__") {
        return None;
    }
    let clean: String = rest.chars().filter(|c| *c != '_').collect();
    let magnitude = match clean.strip_prefix("0x") {
        Some(hex) if !hex.is_empty() => u128::from_str_radix(hex, 16).ok()?,
        Some(_) => return None,
        None if clean.bytes().all(|b| b.is_ascii_digit()) => clean.parse::<u128>().ok()?,
        None => return None,
    };
    let limit = 1u128 << bits;
    if neg {
        if magnitude > limit / 2 {
            return None;
        }
        Some(((limit - magnitude) % limit) as u64)
    } else {
        if magnitude >= limit {
            return None;
        }
        Some(magnitude as u64)
    }
}

fn parse_u32(e: &SExpr) -> Result<u32> {
    e.atom()
        .filter(|a| !a.starts_with(['-', '+']))
        .and_then(|a| parse_int(a, 32))
        .map(|v| v as u32)
        .ok_or_else(|| syntax(e.pos(), "expected an unsigned 32-bit integer"))
}

#[derive(Default)]
struct Names {
    funcs: HashMap<String, u32>,
    globals: HashMap<String, u32>,
    types: HashMap<String, u32>,
}

fn resolve(map: &HashMap<String, u32>, e: &SExpr, what: &str) -> Result<u32> {
    match e.atom() {
        Some(a) if a.starts_with('$') => {
            map.get(a).copied().ok_or_else(|| syntax(e.pos(), format!("unknown {what} {a}")))
        }
        Some(_) => parse_u32(e),
        None => Err(syntax(e.pos(), format!("expected a {what} index"))),
    }
}

fn bind(map: &mut HashMap<String, u32>, e: &SExpr, index: u32, what: &str) -> Result<()> {
    let name = e.atom().unwrap().to_string();
    if map.insert(name.clone(), index).is_some() {
        return Err(syntax(e.pos(), format!("duplicate {what} {name}")));
    }
    Ok(())
}

struct ModuleParser {
    names: Names,
    module: Module,
    /// Whether a function definition has been seen; imports must precede it.
    seen_definition: bool,
}

/// Parse a module in the text format.
pub fn parse_module(text: &str) -> Result<Module> {
    let top = read_all(text)?;
    let fields: &[SExpr] = match top.as_slice() {
        [] => return Err(syntax(Pos { line: 1, col: 1 }, "empty input")),
        [one] if one.head() == Some("module") => {
            let items = one.list_headed("module").unwrap();
            if items.first().is_some_and(is_id) {
                &items[1..]
            } else {
                items
            }
        }
        // Bare module fields are also accepted.
        fields => fields,
    };
    let mut p = ModuleParser { names: Names::default(), module: Module::default(), seen_definition: false };
    p.collect(fields)?;
    for field in fields {
        p.field(field)?;
    }
    Ok(p.module)
}

impl ModuleParser {
    /// Types and index-space names, so that later fields can refer forward.
    fn collect(&mut self, fields: &[SExpr]) -> Result<()> {
        let mut import_count = 0u32;
        let mut defined = Vec::new();
        let mut globals = 0u32;
        for f in fields {
            let SExpr::List(items, pos) = f else {
                return Err(syntax(f.pos(), "expected a module field"));
            };
            match f.head() {
                Some("type") => {
                    let mut i = 1;
                    let index = self.module.types.len() as u32;
                    if items.get(i).is_some_and(is_id) {
                        bind(&mut self.names.types, &items[i], index, "type")?;
                        i += 1;
                    }
                    let func = items
                        .get(i)
                        .and_then(|e| e.list_headed("func"))
                        .ok_or_else(|| syntax(*pos, "expected (func ...) in type definition"))?;
                    let mut j = 0;
                    let (ty, _) = self.inline_signature(func, &mut j)?;
                    if j != func.len() {
                        return Err(syntax(func[j].pos(), "unexpected item in function type"));
                    }
                    self.module.types.push(ty);
                }
                Some("import") => {
                    let desc = items.get(3).ok_or_else(|| syntax(*pos, "incomplete import"))?;
                    if desc.head() == Some("func") {
                        let inner = desc.list_headed("func").unwrap();
                        if inner.first().is_some_and(is_id) {
                            bind(&mut self.names.funcs, &inner[0], import_count, "function")?;
                        }
                        import_count += 1;
                    }
                }
                Some("func") => {
                    let inner = &items[1..];
                    let inline_import = inner.iter().any(|e| e.head() == Some("import"));
                    let name = inner.first().filter(|e| is_id(e));
                    if inline_import {
                        if let Some(n) = name {
                            bind(&mut self.names.funcs, n, import_count, "function")?;
                        }
                        import_count += 1;
                    } else {
                        defined.push(name);
                    }
                }
                Some("global") => {
                    if let Some(n) = items.get(1).filter(|e| is_id(e)) {
                        bind(&mut self.names.globals, n, globals, "global")?;
                    }
                    globals += 1;
                }
                _ => {}
            }
        }
        for (k, name) in defined.into_iter().enumerate() {
            if let Some(n) = name {
                bind(&mut self.names.funcs, n, import_count + k as u32, "function")?;
            }
        }
        Ok(())
    }

    /// `(param ...)* (result ...)*`, returning the parameter names.
    fn inline_signature(&self, items: &[SExpr], i: &mut usize) -> Result<(FuncType, Vec<Option<String>>)> {
        let mut ty = FuncType::default();
        let mut names = Vec::new();
        while let Some(params) = items.get(*i).and_then(|e| e.list_headed("param")) {
            if params.len() == 2 && is_id(&params[0]) {
                names.push(Some(params[0].atom().unwrap().to_string()));
                ty.params.push(value_type(&params[1])?);
            } else {
                for p in params {
                    if is_id(p) {
                        return Err(syntax(p.pos(), "a named parameter declares exactly one type"));
                    }
                    names.push(None);
                    ty.params.push(value_type(p)?);
                }
            }
            *i += 1;
        }
        while let Some(results) = items.get(*i).and_then(|e| e.list_headed("result")) {
            for r in results {
                ty.results.push(value_type(r)?);
            }
            *i += 1;
        }
        Ok((ty, names))
    }

    /// `(type x)? (param ...)* (result ...)*`
    fn type_use(&self, items: &[SExpr], i: &mut usize) -> Result<(FuncType, Vec<Option<String>>)> {
        let start = items.get(*i).map(|e| e.pos());
        let declared = match items.get(*i).and_then(|e| e.list_headed("type")) {
            Some([idx]) => {
                let k = resolve(&self.names.types, idx, "type")?;
                let ty = self.module.types.get(k as usize).ok_or_else(|| syntax(idx.pos(), format!("type index {k} out of range")))?;
                *i += 1;
                Some(ty.clone())
            }
            Some(_) => return Err(syntax(items[*i].pos(), "malformed type use")),
            None => None,
        };
        let before = *i;
        let (inline, names) = self.inline_signature(items, i)?;
        match declared {
            Some(ty) if *i == before => {
                let n = ty.params.len();
                Ok((ty, vec![None; n]))
            }
            Some(ty) => {
                if ty != inline {
                    return Err(syntax(start.unwrap(), "inline signature does not match the referenced type"));
                }
                Ok((ty, names))
            }
            None => Ok((inline, names)),
        }
    }

    fn exports_inline(&mut self, items: &[SExpr], i: &mut usize, kind: ExportKind, index: u32) -> Result<()> {
        while let Some(ex) = items.get(*i).and_then(|e| e.list_headed("export")) {
            match ex {
                [SExpr::Str(name, pos)] => {
                    let name = String::from_utf8(name.clone()).map_err(|_| syntax(*pos, "export name is not UTF-8"))?;
                    self.module.exports.push(Export { name, kind, index });
                }
                _ => return Err(syntax(items[*i].pos(), "malformed inline export")),
            }
            *i += 1;
        }
        Ok(())
    }

    fn field(&mut self, field: &SExpr) -> Result<()> {
        let SExpr::List(items, pos) = field else { unreachable!() };
        let pos = *pos;
        match field.head() {
            Some("type") => Ok(()),
            Some("import") => self.import(items, pos),
            Some("func") => self.func(items, pos),
            Some("global") => self.global(items, pos),
            Some("memory") => self.memory(items, pos),
            Some("table") => self.table(items, pos),
            Some("export") => self.export(items, pos),
            Some("elem") => self.elem(items, pos),
            Some("data") => self.data(items, pos),
            Some("start") => Err(unsupported(pos, "start function")),
            Some(other) => Err(syntax(pos, format!("unknown module field `{other}`"))),
            None => Err(syntax(pos, "expected a module field")),
        }
    }

    fn import(&mut self, items: &[SExpr], pos: Pos) -> Result<()> {
        let (module, name) = match (items.get(1), items.get(2)) {
            (Some(SExpr::Str(m, _)), Some(SExpr::Str(n, _))) => {
                (String::from_utf8_lossy(m).into_owned(), String::from_utf8_lossy(n).into_owned())
            }
            _ => return Err(syntax(pos, "expected module and item names in import")),
        };
        let desc = items.get(3).ok_or_else(|| syntax(pos, "incomplete import"))?;
        if items.len() > 4 {
            return Err(syntax(items[4].pos(), "unexpected item after import descriptor"));
        }
        match desc.head() {
            Some("func") => {
                let inner = desc.list_headed("func").unwrap();
                let mut i = usize::from(inner.first().is_some_and(is_id));
                let (ty, _) = self.type_use(inner, &mut i)?;
                if i != inner.len() {
                    return Err(syntax(inner[i].pos(), "unexpected item in imported function"));
                }
                self.push_import(Import { module, name, ty }, pos)
            }
            Some(kind @ ("memory" | "table" | "global")) => Err(unsupported(desc.pos(), format!("{kind} import"))),
            _ => Err(syntax(desc.pos(), "malformed import descriptor")),
        }
    }

    fn push_import(&mut self, import: Import, pos: Pos) -> Result<()> {
        if self.seen_definition {
            return Err(syntax(pos, "imports must come before function definitions"));
        }
        self.module.imports.push(import);
        Ok(())
    }

    fn func(&mut self, items: &[SExpr], pos: Pos) -> Result<()> {
        let mut i = 1;
        if items.get(i).is_some_and(is_id) {
            i += 1;
        }
        let index = if items.iter().any(|e| e.head() == Some("import")) {
            self.module.imports.len()
        } else {
            self.module.func_count()
        } as u32;
        self.exports_inline(items, &mut i, ExportKind::Func, index)?;
        if let Some(imp) = items.get(i).and_then(|e| e.list_headed("import")) {
            let (module, name) = match imp {
                [SExpr::Str(m, _), SExpr::Str(n, _)] => {
                    (String::from_utf8_lossy(m).into_owned(), String::from_utf8_lossy(n).into_owned())
                }
                _ => return Err(syntax(items[i].pos(), "malformed inline import")),
            };
            i += 1;
            let (ty, _) = self.type_use(items, &mut i)?;
            if i != items.len() {
                return Err(syntax(items[i].pos(), "an imported function has no body"));
            }
            return self.push_import(Import { module, name, ty }, pos);
        }
        let (ty, param_names) = self.type_use(items, &mut i)?;
        let mut locals_by_name = HashMap::new();
        for (k, n) in param_names.iter().enumerate() {
            if let Some(n) = n {
                if locals_by_name.insert(n.clone(), k as u32).is_some() {
                    return Err(syntax(pos, format!("duplicate local {n}")));
                }
            }
        }
        let mut locals = Vec::new();
        while let Some(decl) = items.get(i).and_then(|e| e.list_headed("local")) {
            if decl.len() == 2 && is_id(&decl[0]) {
                let k = (ty.params.len() + locals.len()) as u32;
                bind(&mut locals_by_name, &decl[0], k, "local")?;
                locals.push(value_type(&decl[1])?);
            } else {
                for d in decl {
                    locals.push(value_type(d)?);
                }
            }
            i += 1;
        }
        let mut ctx = BodyParser { module: self, locals: locals_by_name, labels: Vec::new() };
        let (body, _) = ctx.seq(items, &mut i, &[])?;
        self.seen_definition = true;
        self.module.funcs.push(Func { ty, locals, body });
        Ok(())
    }

    fn const_expr(&self, items: &[SExpr], pos: Pos) -> Result<Concrete> {
        let mut ctx = BodyParser { module: self, locals: HashMap::new(), labels: Vec::new() };
        let mut i = 0;
        let (code, _) = ctx.seq(items, &mut i, &[])?;
        match code.as_slice() {
            [Instr::Const(c)] => Ok(*c),
            [Instr::GlobalGet(_)] => Err(unsupported(pos, "global.get in a constant expression")),
            _ => Err(syntax(pos, "expected a single constant instruction")),
        }
    }

    fn global(&mut self, items: &[SExpr], pos: Pos) -> Result<()> {
        let mut i = 1;
        if items.get(i).is_some_and(is_id) {
            i += 1;
        }
        let index = self.module.globals.len() as u32;
        self.exports_inline(items, &mut i, ExportKind::Global, index)?;
        if items.get(i).is_some_and(|e| e.head() == Some("import")) {
            return Err(unsupported(items[i].pos(), "global import"));
        }
        let gt = items.get(i).ok_or_else(|| syntax(pos, "missing global type"))?;
        let (ty, mutable) = match gt.list_headed("mut") {
            Some([t]) => (value_type(t)?, true),
            Some(_) => return Err(syntax(gt.pos(), "malformed mutable global type")),
            None => (value_type(gt)?, false),
        };
        let init = self.const_expr(&items[i + 1..], pos)?;
        self.module.globals.push(Global { ty, mutable, init });
        Ok(())
    }

    fn limits(&self, items: &[SExpr], i: &mut usize, pos: Pos) -> Result<Limits> {
        let min = parse_u32(items.get(*i).ok_or_else(|| syntax(pos, "missing limits"))?)?;
        *i += 1;
        let max = match items.get(*i).and_then(|e| e.atom()) {
            Some(a) if a.as_bytes()[0].is_ascii_digit() => {
                let m = parse_u32(&items[*i])?;
                *i += 1;
                Some(m)
            }
            _ => None,
        };
        Ok(Limits { min, max })
    }

    fn memory(&mut self, items: &[SExpr], pos: Pos) -> Result<()> {
        if self.module.memory.is_some() {
            return Err(unsupported(pos, "multiple memories"));
        }
        let mut i = 1;
        if items.get(i).is_some_and(is_id) {
            i += 1;
        }
        self.exports_inline(items, &mut i, ExportKind::Memory, 0)?;
        match items.get(i).and_then(|e| e.head()) {
            Some("import") => return Err(unsupported(items[i].pos(), "memory import")),
            Some("data") => return Err(unsupported(items[i].pos(), "inline memory data")),
            _ => {}
        }
        if items.get(i).and_then(|e| e.atom()) == Some("i64") {
            return Err(unsupported(items[i].pos(), "memory64"));
        }
        let limits = self.limits(items, &mut i, pos)?;
        if i != items.len() {
            return Err(syntax(items[i].pos(), "unexpected item in memory declaration"));
        }
        self.module.memory = Some(limits);
        Ok(())
    }

    fn table(&mut self, items: &[SExpr], pos: Pos) -> Result<()> {
        if self.module.table.is_some() {
            return Err(unsupported(pos, "multiple tables"));
        }
        let mut i = 1;
        if items.get(i).is_some_and(is_id) {
            i += 1;
        }
        self.exports_inline(items, &mut i, ExportKind::Table, 0)?;
        if items.get(i).is_some_and(|e| e.head() == Some("import")) {
            return Err(unsupported(items[i].pos(), "table import"));
        }
        let reftype = |e: &SExpr| -> Result<()> {
            match e.atom() {
                Some("funcref" | "anyfunc") => Ok(()),
                Some("externref") => Err(unsupported(e.pos(), "reference type externref")),
                _ => Err(syntax(e.pos(), "expected funcref")),
            }
        };
        if items.get(i).and_then(|e| e.atom()).is_some_and(|a| !a.as_bytes()[0].is_ascii_digit()) {
            // Abbreviation: (table funcref (elem f*)).
            reftype(&items[i])?;
            let elems = items
                .get(i + 1)
                .and_then(|e| e.list_headed("elem"))
                .ok_or_else(|| syntax(pos, "expected limits or an inline element list"))?;
            let funcs = elems.iter().map(|e| resolve(&self.names.funcs, e, "function")).collect::<Result<Vec<_>>>()?;
            let n = funcs.len() as u32;
            self.module.table = Some(Limits { min: n, max: Some(n) });
            self.module.elems.push(Elem { offset: 0, funcs });
            return Ok(());
        }
        let limits = self.limits(items, &mut i, pos)?;
        reftype(items.get(i).ok_or_else(|| syntax(pos, "missing table element type"))?)?;
        if i + 1 != items.len() {
            return Err(syntax(items[i + 1].pos(), "unexpected item in table declaration"));
        }
        self.module.table = Some(limits);
        Ok(())
    }

    fn export(&mut self, items: &[SExpr], pos: Pos) -> Result<()> {
        let name = match items.get(1) {
            Some(SExpr::Str(n, p)) => String::from_utf8(n.clone()).map_err(|_| syntax(*p, "export name is not UTF-8"))?,
            _ => return Err(syntax(pos, "expected an export name")),
        };
        let desc = items.get(2).ok_or_else(|| syntax(pos, "missing export descriptor"))?;
        let (kind, index) = match (desc.head(), desc) {
            (Some("func"), SExpr::List(d, _)) if d.len() == 2 => (ExportKind::Func, resolve(&self.names.funcs, &d[1], "function")?),
            (Some("global"), SExpr::List(d, _)) if d.len() == 2 => {
                (ExportKind::Global, resolve(&self.names.globals, &d[1], "global")?)
            }
            (Some("memory"), SExpr::List(d, _)) if d.len() == 2 => (ExportKind::Memory, parse_u32(&d[1]).unwrap_or(0)),
            (Some("table"), SExpr::List(d, _)) if d.len() == 2 => (ExportKind::Table, parse_u32(&d[1]).unwrap_or(0)),
            _ => return Err(syntax(desc.pos(), "malformed export descriptor")),
        };
        if items.len() > 3 {
            return Err(syntax(items[3].pos(), "unexpected item after export descriptor"));
        }
        self.module.exports.push(Export { name, kind, index });
        Ok(())
    }

    /// An active segment offset: `(offset instr)` or a bare folded constant.
    fn offset(&self, items: &[SExpr], i: &mut usize, pos: Pos) -> Result<u32> {
        let e = items.get(*i).ok_or_else(|| syntax(pos, "missing segment offset"))?;
        let c = match e.list_headed("offset") {
            Some(inner) => self.const_expr(inner, e.pos())?,
            None if e.head().is_some_and(|h| h.contains('.')) => self.const_expr(std::slice::from_ref(e), e.pos())?,
            None => return Err(unsupported(e.pos(), "passive or declarative segment")),
        };
        *i += 1;
        match c {
            Concrete::I32(v) => Ok(v as u32),
            Concrete::I64(_) => Err(syntax(e.pos(), "segment offset must be an i32 constant")),
        }
    }

    fn elem(&mut self, items: &[SExpr], pos: Pos) -> Result<()> {
        let mut i = 1;
        if items.get(i).is_some_and(is_id) {
            i += 1;
        }
        if let Some(t) = items.get(i).and_then(|e| e.list_headed("table")) {
            if t.len() != 1 || resolve(&HashMap::new(), &t[0], "table").ok() != Some(0) {
                return Err(unsupported(items[i].pos(), "multiple tables"));
            }
            i += 1;
        }
        let offset = self.offset(items, &mut i, pos)?;
        if items.get(i).and_then(|e| e.atom()) == Some("func") {
            i += 1;
        }
        let mut funcs = Vec::new();
        for e in &items[i..] {
            if e.head().is_some() {
                return Err(unsupported(e.pos(), "element expressions"));
            }
            funcs.push(resolve(&self.names.funcs, e, "function")?);
        }
        self.module.elems.push(Elem { offset, funcs });
        Ok(())
    }

    fn data(&mut self, items: &[SExpr], pos: Pos) -> Result<()> {
        let mut i = 1;
        if items.get(i).is_some_and(is_id) {
            i += 1;
        }
        if let Some(m) = items.get(i).and_then(|e| e.list_headed("memory")) {
            if m.len() != 1 || parse_u32(&m[0]).ok() != Some(0) {
                return Err(unsupported(items[i].pos(), "multiple memories"));
            }
            i += 1;
        }
        if items.get(i).is_some_and(|e| matches!(e, SExpr::Str(..))) || i == items.len() {
            return Err(unsupported(pos, "passive data segment"));
        }
        let offset = self.offset(items, &mut i, pos)?;
        let mut bytes = Vec::new();
        for e in &items[i..] {
            match e {
                SExpr::Str(b, _) => bytes.extend_from_slice(b),
                _ => return Err(syntax(e.pos(), "expected a string in data segment")),
            }
        }
        self.module.datas.push(Data { offset, bytes });
        Ok(())
    }
}

struct BodyParser<'m> {
    module: &'m ModuleParser,
    locals: HashMap<String, u32>,
    /// Enclosing block labels, innermost last.
    labels: Vec<Option<String>>,
}

impl BodyParser<'_> {
    /// A flat instruction sequence, possibly interleaved with folded
    /// instructions, up to one of `stop` (or the end of `items` when `stop`
    /// is empty).
    fn seq(&mut self, items: &[SExpr], i: &mut usize, stop: &[&str]) -> Result<(Vec<Instr>, Option<String>)> {
        let mut out = Vec::new();
        loop {
            let Some(item) = items.get(*i) else {
                if stop.is_empty() {
                    return Ok((out, None));
                }
                let pos = items.last().map(|e| e.pos()).unwrap_or(Pos { line: 1, col: 1 });
                return Err(syntax(pos, format!("missing `{}`", stop.join("` or `"))));
            };
            match item {
                SExpr::List(..) => {
                    *i += 1;
                    self.folded(item, &mut out)?;
                }
                SExpr::Atom(a, pos) => {
                    if stop.contains(&a.as_str()) {
                        *i += 1;
                        return Ok((out, Some(a.clone())));
                    }
                    if a == "end" || a == "else" {
                        return Err(syntax(*pos, format!("unexpected `{a}`")));
                    }
                    self.plain(items, i, &mut out)?;
                }
                SExpr::Str(_, pos) => return Err(syntax(*pos, "unexpected string")),
            }
        }
    }

    fn label(&self, items: &[SExpr], i: &mut usize) -> Option<String> {
        let l = items.get(*i).filter(|e| is_id(e)).map(|e| e.atom().unwrap().to_string());
        if l.is_some() {
            *i += 1;
        }
        l
    }

    fn end_label(&self, items: &[SExpr], i: &mut usize, label: &Option<String>) -> Result<()> {
        if let Some(e) = items.get(*i).filter(|e| is_id(e)) {
            if label.as_deref() != e.atom() {
                return Err(syntax(e.pos(), "mismatched block label"));
            }
            *i += 1;
        }
        Ok(())
    }

    fn block_type(&self, items: &[SExpr], i: &mut usize) -> Result<BlockType> {
        let mut results = Vec::new();
        if let Some(t) = items.get(*i).and_then(|e| e.list_headed("type")) {
            let pos = items[*i].pos();
            let k = match t {
                [x] => resolve(&self.module.names.types, x, "type")?,
                _ => return Err(syntax(pos, "malformed type use")),
            };
            let ft = self.module.module.types.get(k as usize).ok_or_else(|| syntax(pos, "type index out of range"))?;
            if !ft.params.is_empty() {
                return Err(unsupported(pos, "block parameters"));
            }
            results.extend_from_slice(&ft.results);
            *i += 1;
        }
        if items.get(*i).is_some_and(|e| e.head() == Some("param")) {
            return Err(unsupported(items[*i].pos(), "block parameters"));
        }
        let pos = items.get(*i).map(|e| e.pos());
        while let Some(r) = items.get(*i).and_then(|e| e.list_headed("result")) {
            for t in r {
                results.push(value_type(t)?);
            }
            *i += 1;
        }
        match results.as_slice() {
            [] => Ok(None),
            [t] => Ok(Some(*t)),
            _ => Err(unsupported(pos.unwrap_or(Pos { line: 1, col: 1 }), "multi-value")),
        }
    }

    fn folded(&mut self, e: &SExpr, out: &mut Vec<Instr>) -> Result<()> {
        let SExpr::List(items, pos) = e else { unreachable!() };
        let Some(op) = items.first().and_then(SExpr::atom) else {
            return Err(syntax(*pos, "expected an instruction"));
        };
        let mut i = 1;
        match op {
            "block" | "loop" => {
                let label = self.label(items, &mut i);
                let bt = self.block_type(items, &mut i)?;
                self.labels.push(label);
                let body = self.seq(items, &mut i, &[]);
                self.labels.pop();
                let (body, _) = body?;
                out.push(if op == "block" { Instr::Block(bt, body) } else { Instr::Loop(bt, body) });
            }
            "if" => {
                let label = self.label(items, &mut i);
                let bt = self.block_type(items, &mut i)?;
                while let Some(c) = items.get(i).filter(|e| !matches!(e.head(), Some("then" | "else"))) {
                    if !matches!(c, SExpr::List(..)) {
                        return Err(syntax(c.pos(), "expected a folded condition"));
                    }
                    self.folded(c, out)?;
                    i += 1;
                }
                self.labels.push(label);
                let arms = self.if_arms(items, &mut i, *pos);
                self.labels.pop();
                let (then, els) = arms?;
                out.push(Instr::If(bt, then, els));
            }
            "then" | "else" | "end" => return Err(syntax(*pos, format!("unexpected `{op}`"))),
            _ => {
                let instr = self.simple(op, *pos, items, &mut i)?;
                for operand in &items[i..] {
                    match operand {
                        SExpr::List(..) => self.folded(operand, out)?,
                        other => return Err(syntax(other.pos(), format!("unexpected immediate for `{op}`"))),
                    }
                }
                out.push(instr);
            }
        }
        Ok(())
    }

    fn if_arms(&mut self, items: &[SExpr], i: &mut usize, pos: Pos) -> Result<(Vec<Instr>, Vec<Instr>)> {
        let then_items = items
            .get(*i)
            .and_then(|e| e.list_headed("then"))
            .ok_or_else(|| syntax(pos, "folded `if` needs a (then ...) arm"))?;
        *i += 1;
        let (then, _) = self.seq(then_items, &mut 0, &[])?;
        let els = match items.get(*i).and_then(|e| e.list_headed("else")) {
            Some(else_items) => {
                *i += 1;
                self.seq(else_items, &mut 0, &[])?.0
            }
            None => Vec::new(),
        };
        if let Some(extra) = items.get(*i) {
            return Err(syntax(extra.pos(), "unexpected item after `if` arms"));
        }
        Ok((then, els))
    }

    /// A flat instruction starting at `items[*i]`.
    fn plain(&mut self, items: &[SExpr], i: &mut usize, out: &mut Vec<Instr>) -> Result<()> {
        let SExpr::Atom(op, pos) = &items[*i] else { unreachable!() };
        let pos = *pos;
        *i += 1;
        match op.as_str() {
            "block" | "loop" => {
                let label = self.label(items, i);
                let bt = self.block_type(items, i)?;
                self.labels.push(label.clone());
                let body = self.seq(items, i, &["end"]);
                self.labels.pop();
                let (body, _) = body?;
                self.end_label(items, i, &label)?;
                out.push(if op == "block" { Instr::Block(bt, body) } else { Instr::Loop(bt, body) });
            }
            "if" => {
                let label = self.label(items, i);
                let bt = self.block_type(items, i)?;
                self.labels.push(label.clone());
                let arms = (|| {
                    let (then, stop) = self.seq(items, i, &["else", "end"])?;
                    let mut els = Vec::new();
                    if stop.as_deref() == Some("else") {
                        self.end_label(items, i, &label)?;
                        els = self.seq(items, i, &["end"])?.0;
                    }
                    Ok((then, els))
                })();
                self.labels.pop();
                let (then, els) = arms?;
                self.end_label(items, i, &label)?;
                out.push(Instr::If(bt, then, els));
            }
            _ => {
                let instr = self.simple(op, pos, items, i)?;
                out.push(instr);
            }
        }
        Ok(())
    }

    fn index_imm(&self, items: &[SExpr], i: &mut usize, pos: Pos, op: &str) -> Result<SExpr> {
        let e = items.get(*i).filter(|e| e.atom().is_some()).ok_or_else(|| syntax(pos, format!("`{op}` needs an index")))?;
        *i += 1;
        Ok(e.clone())
    }

    fn label_depth(&self, e: &SExpr) -> Result<u32> {
        match e.atom() {
            Some(a) if a.starts_with('$') => self
                .labels
                .iter()
                .rev()
                .position(|l| l.as_deref() == Some(a))
                .map(|d| d as u32)
                .ok_or_else(|| syntax(e.pos(), format!("unknown label {a}"))),
            _ => parse_u32(e),
        }
    }

    fn mem_arg(&self, items: &[SExpr], i: &mut usize) -> Result<MemArg> {
        let mut arg = MemArg { offset: 0 };
        if let Some(e) = items.get(*i) {
            if let Some(v) = e.atom().and_then(|a| a.strip_prefix("offset=")) {
                arg.offset = parse_int(v, 32).ok_or_else(|| syntax(e.pos(), "bad offset"))? as u32;
                *i += 1;
            }
        }
        if let Some(e) = items.get(*i) {
            if let Some(v) = e.atom().and_then(|a| a.strip_prefix("align=")) {
                let align = parse_int(v, 32).ok_or_else(|| syntax(e.pos(), "bad alignment"))?;
                if !align.is_power_of_two() {
                    return Err(syntax(e.pos(), "alignment must be a power of two"));
                }
                *i += 1;
            }
        }
        Ok(arg)
    }

    /// A non-structured instruction and its immediates.
    fn simple(&self, op: &str, pos: Pos, items: &[SExpr], i: &mut usize) -> Result<Instr> {
        if let Some(feature) = float_feature(op) {
            return Err(unsupported(pos, feature));
        }
        if OUTSIDE_SUBSET.contains(&op) {
            return Err(unsupported(pos, format!("instruction {op}")));
        }
        let ty_of = |prefix: &str| match prefix {
            "i32" => Some(ValueType::I32),
            "i64" => Some(ValueType::I64),
            _ => None,
        };
        let instr = match op {
            "drop" => Instr::Drop,
            "select" => {
                if let Some(r) = items.get(*i).and_then(|e| e.list_headed("result")) {
                    for t in r {
                        value_type(t)?;
                    }
                    *i += 1;
                }
                Instr::Select
            }
            "nop" => Instr::Nop,
            "unreachable" => Instr::Unreachable,
            "return" => Instr::Return,
            "memory.size" => Instr::MemorySize,
            "memory.grow" => Instr::MemoryGrow,
            "local.get" | "local.set" | "local.tee" => {
                let e = self.index_imm(items, i, pos, op)?;
                let k = resolve(&self.locals, &e, "local")?;
                match op {
                    "local.get" => Instr::LocalGet(k),
                    "local.set" => Instr::LocalSet(k),
                    _ => Instr::LocalTee(k),
                }
            }
            "global.get" | "global.set" => {
                let e = self.index_imm(items, i, pos, op)?;
                let k = resolve(&self.module.names.globals, &e, "global")?;
                if op == "global.get" {
                    Instr::GlobalGet(k)
                } else {
                    Instr::GlobalSet(k)
                }
            }
            "br" | "br_if" => {
                let e = self.index_imm(items, i, pos, op)?;
                let d = self.label_depth(&e)?;
                if op == "br" {
                    Instr::Br(d)
                } else {
                    Instr::BrIf(d)
                }
            }
            "call" => {
                let e = self.index_imm(items, i, pos, op)?;
                Instr::Call(resolve(&self.module.names.funcs, &e, "function")?)
            }
            "call_indirect" => {
                if let Some(t) = items.get(*i).filter(|e| e.atom().is_some()) {
                    if parse_u32(t).ok() != Some(0) {
                        return Err(unsupported(t.pos(), "multiple tables"));
                    }
                    *i += 1;
                }
                let (ty, names) = self.module.type_use(items, i)?;
                if names.iter().any(Option::is_some) {
                    return Err(syntax(pos, "call_indirect parameters cannot be named"));
                }
                Instr::CallIndirect(ty)
            }
            "i32.wrap_i64" => Instr::Convert(CvtOp::WrapI64),
            "i64.extend_i32_s" => Instr::Convert(CvtOp::ExtendI32S),
            "i64.extend_i32_u" => Instr::Convert(CvtOp::ExtendI32U),
            "i32.load" | "i64.load" | "i32.load8_s" | "i32.load8_u" | "i32.load16_s" | "i32.load16_u" => {
                let ty = ty_of(&op[..3]).unwrap();
                let (width, signed) = match &op[4..] {
                    "load" => (ty.bytes() as u8, false),
                    "load8_s" => (1, true),
                    "load8_u" => (1, false),
                    "load16_s" => (2, true),
                    _ => (2, false),
                };
                Instr::Load { ty, width, signed, arg: self.mem_arg(items, i)? }
            }
            "i32.store" | "i64.store" | "i32.store8" | "i32.store16" => {
                let ty = ty_of(&op[..3]).unwrap();
                let width = match &op[4..] {
                    "store" => ty.bytes() as u8,
                    "store8" => 1,
                    _ => 2,
                };
                Instr::Store { ty, width, arg: self.mem_arg(items, i)? }
            }
            _ => {
                let Some((prefix, rest)) = op.split_once('.') else {
                    return Err(unknown_opcode(pos, op));
                };
                let Some(ty) = ty_of(prefix) else {
                    return Err(unknown_opcode(pos, op));
                };
                if rest == "const" {
                    let e = items.get(*i).filter(|e| e.atom().is_some()).ok_or_else(|| syntax(pos, "missing constant"))?;
                    let bits = parse_int(e.atom().unwrap(), ty.bits() as u32)
                        .ok_or_else(|| syntax(e.pos(), format!("invalid {ty} literal")))?;
                    *i += 1;
                    Instr::Const(Concrete::from_bits(ty, bits))
                } else if rest == "eqz" {
                    Instr::Eqz(ty)
                } else if let Some(b) = BinOp::from_mnemonic(rest) {
                    Instr::Binop(ty, b)
                } else if let Some(r) = RelOp::from_mnemonic(rest) {
                    Instr::Relop(ty, r)
                } else {
                    return Err(unknown_opcode(pos, op));
                }
            }
        };
        Ok(instr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_literals() {
        assert_eq!(parse_int("42", 32), Some(42));
        assert_eq!(parse_int("-1", 32), Some(0xffff_ffff));
        assert_eq!(parse_int("0xffff_ffff", 32), Some(0xffff_ffff));
        assert_eq!(parse_int("4294967296", 32), None);
        assert_eq!(parse_int("-2147483648", 32), Some(0x8000_0000));
        assert_eq!(parse_int("-2147483649", 32), None);
        assert_eq!(parse_int("1__0", 32), None);
        assert_eq!(parse_int("-9223372036854775808", 64), Some(1 << 63));
    }

    #[test]
    fn folded_and_flat_agree() {
        let folded = parse_module("(module (func (result i32) (i32.add (i32.const 1) (i32.const 2))))").unwrap();
        let flat = parse_module("(module (func (result i32) i32.const 1 i32.const 2 i32.add))").unwrap();
        assert_eq!(folded, flat);
    }

    #[test]
    fn labels_resolve_to_depths() {
        let m = parse_module(
            "(module (func $f (param $n i32)
               block $out
                 loop $top
                   (br_if $out (i32.eqz (local.get $n)))
                   (local.set $n (i32.sub (local.get $n) (i32.const 1)))
                   br $top
                 end
               end))",
        )
        .unwrap();
        let Instr::Block(None, outer) = &m.funcs[0].body[0] else { panic!() };
        let Instr::Loop(None, inner) = &outer[0] else { panic!() };
        assert!(inner.contains(&Instr::BrIf(1)));
        assert!(inner.contains(&Instr::Br(0)));
    }

    #[test]
    fn error_kinds() {
        let e = parse_module("(module (func (f32.const 1)))").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Unsupported("f32".into()));
        let e = parse_module("(module (func i32.frobnicate))").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::UnknownOpcode("i32.frobnicate".into()));
        assert_eq!((e.line, e.col), (1, 15));
        let e = parse_module("(module (func br_table 0))").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Unsupported(_)));
        let e = parse_module("(module (func (param f64)))").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Unsupported("f64".into()));
    }

    #[test]
    fn imports_come_first_in_the_index_space() {
        let m = parse_module(
            r#"(module
                 (func $main (export "main") (drop (call $sym)))
                 (import "owi" "i32_symbol" (func $sym (result i32))))"#,
        );
        assert!(m.is_err());
        let m = parse_module(
            r#"(module
                 (import "owi" "i32_symbol" (func $sym (result i32)))
                 (func $main (export "main") (drop (call $sym))))"#,
        )
        .unwrap();
        assert_eq!(m.exported_func("main"), Some(1));
        assert_eq!(m.funcs[0].body, vec![Instr::Call(0), Instr::Drop]);
    }
}
