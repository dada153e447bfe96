//! Tokenizer and s-expression reader for the text format.

use super::{ParseError, ParseErrorKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SExpr {
    Atom(String, Pos),
    Str(Vec<u8>, Pos),
    List(Vec<SExpr>, Pos),
}

impl SExpr {
    pub fn pos(&self) -> Pos {
        match self {
            SExpr::Atom(_, p) | SExpr::Str(_, p) | SExpr::List(_, p) => *p,
        }
    }

    pub fn atom(&self) -> Option<&str> {
        match self {
            SExpr::Atom(a, _) => Some(a),
            _ => None,
        }
    }

    /// The items of a list whose first element is the keyword `kw`.
    pub fn list_headed(&self, kw: &str) -> Option<&[SExpr]> {
        match self {
            SExpr::List(items, _) if items.first().and_then(SExpr::atom) == Some(kw) => Some(&items[1..]),
            _ => None,
        }
    }

    /// The head keyword of a list.
    pub fn head(&self) -> Option<&str> {
        match self {
            SExpr::List(items, _) => items.first().and_then(SExpr::atom),
            _ => None,
        }
    }
}

struct Reader<'a> {
    src: &'a [u8],
    at: usize,
    line: u32,
    col: u32,
}

fn err(pos: Pos, message: impl Into<String>) -> ParseError {
    ParseError { line: pos.line, col: pos.col, kind: ParseErrorKind::Syntax(message.into()) }
}

impl<'a> Reader<'a> {
    fn pos(&self) -> Pos {
        Pos { line: self.line, col: self.col }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.at).copied()
    }

    fn peek2(&self) -> Option<u8> {
        self.src.get(self.at + 1).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.at += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else if c & 0xc0 != 0x80 {
            // Count characters, not UTF-8 continuation bytes.
            self.col += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) -> Result<(), ParseError> {
        loop {
            match (self.peek(), self.peek2()) {
                (Some(c), _) if c.is_ascii_whitespace() => {
                    self.bump();
                }
                (Some(b';'), Some(b';')) => {
                    while let Some(c) = self.bump() {
                        if c == b'\n' {
                            break;
                        }
                    }
                }
                (Some(b'('), Some(b';')) => {
                    let start = self.pos();
                    self.bump();
                    self.bump();
                    let mut depth = 1;
                    while depth > 0 {
                        match (self.peek(), self.peek2()) {
                            (Some(b'('), Some(b';')) => {
                                self.bump();
                                self.bump();
                                depth += 1;
                            }
                            (Some(b';'), Some(b')')) => {
                                self.bump();
                                self.bump();
                                depth -= 1;
                            }
                            (Some(_), _) => {
                                self.bump();
                            }
                            (None, _) => return Err(err(start, "unterminated block comment")),
                        }
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    fn string(&mut self) -> Result<Vec<u8>, ParseError> {
        let start = self.pos();
        self.bump();
        let mut out = Vec::new();
        loop {
            let here = self.pos();
            match self.bump() {
                None | Some(b'\n') => return Err(err(start, "unterminated string")),
                Some(b'"') => return Ok(out),
                Some(b'\\') => match self.bump() {
                    Some(b'n') => out.push(b'\n'),
                    Some(b't') => out.push(b'\t'),
                    Some(b'r') => out.push(b'\r'),
                    Some(b'\\') => out.push(b'\\'),
                    Some(b'\'') => out.push(b'\''),
                    Some(b'"') => out.push(b'"'),
                    Some(b'u') => {
                        if self.bump() != Some(b'{') {
                            return Err(err(here, "malformed unicode escape"));
                        }
                        let mut hex = String::new();
                        loop {
                            match self.bump() {
                                Some(b'}') => break,
                                Some(c) if c.is_ascii_hexdigit() || c == b'_' => {
                                    if c != b'_' {
                                        hex.push(c as char)
                                    }
                                }
                                _ => return Err(err(here, "malformed unicode escape")),
                            }
                        }
                        let ch = u32::from_str_radix(&hex, 16)
                            .ok()
                            .and_then(char::from_u32)
                            .ok_or_else(|| err(here, "invalid unicode scalar value"))?;
                        let mut buf = [0u8; 4];
                        out.extend_from_slice(ch.encode_utf8(&mut buf).as_bytes());
                    }
                    Some(h) if h.is_ascii_hexdigit() => {
                        let l = self.bump().filter(u8::is_ascii_hexdigit).ok_or_else(|| err(here, "malformed hex escape"))?;
                        let v = u8::from_str_radix(std::str::from_utf8(&[h, l]).unwrap(), 16).unwrap();
                        out.push(v);
                    }
                    _ => return Err(err(here, "unknown escape sequence")),
                },
                Some(c) => out.push(c),
            }
        }
    }

    fn atom(&mut self) -> String {
        let mut s = Vec::new();
        while let Some(c) = self.peek() {
            if c.is_ascii_whitespace() || c == b'(' || c == b')' || c == b'"' || c == b';' {
                break;
            }
            s.push(c);
            self.bump();
        }
        String::from_utf8_lossy(&s).into_owned()
    }
}

/// Read every top-level s-expression in `src`.
pub fn read_all(src: &str) -> Result<Vec<SExpr>, ParseError> {
    let mut r = Reader { src: src.as_bytes(), at: 0, line: 1, col: 1 };
    // Each open list: its items and where it started.
    let mut open: Vec<(Vec<SExpr>, Pos)> = Vec::new();
    let mut top = Vec::new();
    loop {
        r.skip_trivia()?;
        let pos = r.pos();
        let item = match r.peek() {
            None => break,
            Some(b'(') => {
                r.bump();
                open.push((Vec::new(), pos));
                continue;
            }
            Some(b')') => {
                r.bump();
                let (items, start) = open.pop().ok_or_else(|| err(pos, "unbalanced `)`"))?;
                SExpr::List(items, start)
            }
            Some(b'"') => SExpr::Str(r.string()?, pos),
            Some(_) => {
                let a = r.atom();
                if a.is_empty() {
                    return Err(err(pos, "unexpected character"));
                }
                SExpr::Atom(a, pos)
            }
        };
        match open.last_mut() {
            Some((items, _)) => items.push(item),
            None => top.push(item),
        }
    }
    if let Some((_, start)) = open.last() {
        return Err(err(*start, "unclosed `(`"));
    }
    Ok(top)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_and_nesting() {
        let src = "(module ;; line\n (; block (; nested ;) ;) (func $f))";
        let top = read_all(src).unwrap();
        assert_eq!(top.len(), 1);
        let SExpr::List(items, _) = &top[0] else { panic!() };
        assert_eq!(items.len(), 2);
        assert_eq!(items[1].head(), Some("func"));
        assert_eq!(items[1].pos(), Pos { line: 2, col: 27 });
    }

    #[test]
    fn strings() {
        let top = read_all(r#"("a\00\ff\n\u{41}")"#).unwrap();
        let SExpr::List(items, _) = &top[0] else { panic!() };
        assert_eq!(items[0], SExpr::Str(vec![b'a', 0, 0xff, b'\n', b'A'], Pos { line: 1, col: 2 }));
    }

    #[test]
    fn unbalanced() {
        assert!(read_all("(module").is_err());
        assert!(read_all("(module))").is_err());
        assert!(read_all("(; open").is_err());
    }
}
