use std::collections::BTreeMap;
use std::fmt;

use crate::values::{bits, Concrete, ValueType};

/// A satisfying assignment: symbol id to `(width, bits)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Model {
    entries: BTreeMap<u32, (u8, u64)>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown width tag `{0}`")]
    BadTag(String),
    #[error("symbol_{0} appears twice")]
    Duplicate(u32),
}

impl Model {
    pub fn new() -> Model {
        Model::default()
    }

    pub fn insert(&mut self, id: u32, width: u8, bits: u64) {
        self.entries.insert(id, (width, bits & bits::mask(width)));
    }

    pub fn get(&self, id: u32) -> Option<u64> {
        self.entries.get(&id).map(|(_, b)| *b)
    }

    pub fn width_of(&self, id: u32) -> Option<u8> {
        self.entries.get(&id).map(|(w, _)| *w)
    }

    /// The value of a full-width symbol as a Wasm value.
    pub fn concrete(&self, id: u32) -> Option<Concrete> {
        let (w, b) = *self.entries.get(&id)?;
        ValueType::from_bits(w).map(|ty| Concrete::from_bits(ty, b))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, u8, u64)> + '_ {
        self.entries.iter().map(|(id, (w, b))| (*id, *w, *b))
    }

    /// The `(model ...)` block, indented two spaces, without a trailing
    /// newline.
    pub fn render(&self) -> String {
        if self.entries.is_empty() {
            return "  (model)".to_string();
        }
        let mut out = String::from("  (model");
        for (id, (w, b)) in &self.entries {
            out.push_str(&format!("\n    (symbol_{id} (i{w} {}))", bits::to_signed(*w, *b)));
        }
        out.push(')');
        out
    }

    /// Parse the rendered form. A leading `Model:` header is accepted.
    pub fn parse(text: &str) -> Result<Model, ModelParseError> {
        let mut tokens = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            if line.trim() == "Model:" {
                continue;
            }
            let mut cur = String::new();
            for ch in line.chars() {
                match ch {
                    '(' | ')' => {
                        if !cur.is_empty() {
                            tokens.push((std::mem::take(&mut cur), line_no));
                        }
                        tokens.push((ch.to_string(), line_no));
                    }
                    c if c.is_whitespace() => {
                        if !cur.is_empty() {
                            tokens.push((std::mem::take(&mut cur), line_no));
                        }
                    }
                    c => cur.push(c),
                }
            }
            if !cur.is_empty() {
                tokens.push((cur, line_no));
            }
        }
        let mut it = tokens.into_iter().peekable();
        let expect = |want: &str, it: &mut std::iter::Peekable<std::vec::IntoIter<(String, usize)>>| {
            match it.next() {
                Some((t, _)) if t == want => Ok(()),
                Some((t, line)) => Err(ModelParseError::Syntax { line, message: format!("expected `{want}`, found `{t}`") }),
                None => Err(ModelParseError::Syntax { line: 0, message: format!("expected `{want}`, found end of input") }),
            }
        };
        expect("(", &mut it)?;
        expect("model", &mut it)?;
        let mut model = Model::new();
        loop {
            match it.next() {
                Some((t, _)) if t == ")" => break,
                Some((t, line)) if t == "(" => {
                    let (name, nline) = it.next().ok_or(ModelParseError::Syntax { line, message: "truncated".into() })?;
                    let id: u32 = name
                        .strip_prefix("symbol_")
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| ModelParseError::Syntax { line: nline, message: format!("bad symbol name `{name}`") })?;
                    expect("(", &mut it)?;
                    let (tag, tline) = it.next().ok_or(ModelParseError::Syntax { line, message: "truncated".into() })?;
                    let width: u8 = tag
                        .strip_prefix('i')
                        .and_then(|w| w.parse().ok())
                        .filter(|w| [8u8, 16, 32, 64].contains(w))
                        .ok_or_else(|| ModelParseError::BadTag(tag.clone()))?;
                    let (num, vline) = it.next().ok_or(ModelParseError::Syntax { line: tline, message: "truncated".into() })?;
                    let value: i128 = num
                        .parse()
                        .map_err(|_| ModelParseError::Syntax { line: vline, message: format!("bad number `{num}`") })?;
                    let min = -(1i128 << (width - 1));
                    let max = (1i128 << width) - 1;
                    if value < min || value > max {
                        return Err(ModelParseError::Syntax { line: vline, message: format!("{num} does not fit in i{width}") });
                    }
                    expect(")", &mut it)?;
                    expect(")", &mut it)?;
                    if model.entries.contains_key(&id) {
                        return Err(ModelParseError::Duplicate(id));
                    }
                    model.insert(id, width, value as u64);
                }
                Some((t, line)) => {
                    return Err(ModelParseError::Syntax { line, message: format!("unexpected `{t}`") })
                }
                None => return Err(ModelParseError::Syntax { line: 0, message: "unterminated model".into() }),
            }
        }
        if let Some((t, line)) = it.next() {
            return Err(ModelParseError::Syntax { line, message: format!("trailing `{t}`") });
        }
        Ok(model)
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_two_symbol_block() {
        let mut m = Model::new();
        m.insert(0, 32, 2147483646);
        m.insert(1, 32, (-2147483647i32) as u32 as u64);
        assert_eq!(
            m.render(),
            "  (model\n    (symbol_0 (i32 2147483646))\n    (symbol_1 (i32 -2147483647)))"
        );
        assert_eq!(Model::parse(&m.render()).unwrap(), m);
        assert_eq!(Model::parse(&format!("Model:\n{m}\n")).unwrap(), m);
    }

    #[test]
    fn empty_and_wide_models() {
        assert_eq!(Model::new().render(), "  (model)");
        let mut m = Model::new();
        m.insert(0, 64, u64::MAX);
        assert_eq!(m.render(), "  (model\n    (symbol_0 (i64 -1)))");
        assert_eq!(Model::parse("(model)").unwrap(), Model::new());
    }

    #[test]
    fn rejects_bad_tags_and_ranges() {
        assert!(matches!(Model::parse("(model (symbol_0 (f32 1)))"), Err(ModelParseError::BadTag(_))));
        assert!(Model::parse("(model (symbol_0 (i8 300)))").is_err());
        assert!(Model::parse("(model (symbol_0 (i32 1))").is_err());
    }
}
