use std::fmt;

/// Line/column of a token in the source text, both 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Sexpr {
    Atom(String, Pos),
    List(Vec<Sexpr>, Pos),
}

impl Sexpr {
    pub fn pos(&self) -> Pos {
        match self {
            Sexpr::Atom(_, p) | Sexpr::List(_, p) => *p,
        }
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            Sexpr::Atom(s, _) => Some(s),
            Sexpr::List(..) => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Sexpr]> {
        match self {
            Sexpr::List(items, _) => Some(items),
            Sexpr::Atom(..) => None,
        }
    }

    /// Short rendering used in error messages.
    pub fn describe(&self) -> String {
        match self {
            Sexpr::Atom(s, _) => s.clone(),
            Sexpr::List(items, _) => match items.first().and_then(Sexpr::as_atom) {
                Some(head) => format!("({head} ...)"),
                None if items.is_empty() => "()".to_string(),
                None => "(...)".to_string(),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SexprError {
    pub pos: Pos,
    pub expected: String,
    pub found: String,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    pos: Pos,
}

#[derive(Debug, PartialEq)]
enum Token {
    Open,
    Close,
    Sym(String),
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer { chars: text.chars().peekable(), pos: Pos { line: 1, col: 1 } }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.pos.line += 1;
            self.pos.col = 1;
        } else {
            self.pos.col += 1;
        }
        Some(c)
    }

    fn next_token(&mut self) -> Option<(Token, Pos)> {
        loop {
            match self.chars.peek().copied() {
                None => return None,
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some(';') => {
                    while let Some(c) = self.bump() {
                        if c == '\n' {
                            break;
                        }
                    }
                }
                Some(_) => break,
            }
        }
        let start = self.pos;
        match self.bump()? {
            '(' => Some((Token::Open, start)),
            ')' => Some((Token::Close, start)),
            c => {
                let mut sym = String::new();
                sym.extend(c.to_lowercase());
                while let Some(&c) = self.chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                        break;
                    }
                    sym.extend(c.to_lowercase());
                    self.bump();
                }
                Some((Token::Sym(sym), start))
            }
        }
    }
}

/// Reads exactly one top-level s-expression. PDDL is case-insensitive, so
/// symbols come back lowercased.
pub fn parse_one(text: &str) -> Result<Sexpr, SexprError> {
    let mut lexer = Lexer::new(text);
    let first = lexer.next_token().ok_or(SexprError {
        pos: lexer.pos,
        expected: "`(`".into(),
        found: "end of input".into(),
    })?;
    let expr = read(&mut lexer, first)?;
    if let Some((tok, pos)) = lexer.next_token() {
        return Err(SexprError { pos, expected: "end of input".into(), found: token_text(&tok) });
    }
    Ok(expr)
}

fn token_text(tok: &Token) -> String {
    match tok {
        Token::Open => "(".into(),
        Token::Close => ")".into(),
        Token::Sym(s) => s.clone(),
    }
}

fn read(lexer: &mut Lexer<'_>, (tok, pos): (Token, Pos)) -> Result<Sexpr, SexprError> {
    match tok {
        Token::Sym(s) => Ok(Sexpr::Atom(s, pos)),
        Token::Close => Err(SexprError { pos, expected: "`(` or a symbol".into(), found: ")".into() }),
        Token::Open => {
            let mut items = Vec::new();
            loop {
                let next = lexer.next_token().ok_or(SexprError {
                    pos: lexer.pos,
                    expected: "`)`".into(),
                    found: "end of input".into(),
                })?;
                if next.0 == Token::Close {
                    return Ok(Sexpr::List(items, pos));
                }
                items.push(read(lexer, next)?);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_lists_and_comments() {
        let e = parse_one("; header\n(a (B c) ; trailing\n ())").unwrap();
        let items = e.as_list().unwrap();
        assert_eq!(items[0].as_atom(), Some("a"));
        assert_eq!(items[1].as_list().unwrap()[0].as_atom(), Some("b"));
        assert_eq!(items[2].as_list().unwrap().len(), 0);
        assert_eq!(items[1].pos(), Pos { line: 2, col: 4 });
    }

    #[test]
    fn unbalanced_input_is_reported() {
        let err = parse_one("(a (b)").unwrap_err();
        assert_eq!(err.found, "end of input");
        let err = parse_one("(a) b").unwrap_err();
        assert_eq!(err.found, "b");
        assert_eq!(err.pos, Pos { line: 1, col: 5 });
    }
}
