//! Boolean bug predicates over option-enabled atoms and a minimum level.
//!
//! Grammar (keywords are case-insensitive, `NOT` binds tighter than `AND`,
//! which binds tighter than `OR`):
//!
//! ```text
//! expr  := and ("OR" and)*
//! and   := unary ("AND" unary)*
//! unary := "NOT" unary | atom
//! atom  := "opt(" NAME ")" | "level_at_least(" LABEL ")" | "(" expr ")"
//! ```

use std::collections::BTreeSet;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Predicate {
    Opt(String),
    LevelAtLeast(String),
    Not(Box<Predicate>),
    And(Box<Predicate>, Box<Predicate>),
    Or(Box<Predicate>, Box<Predicate>),
}

impl Predicate {
    pub fn parse(text: &str) -> Result<Self, String> {
        let tokens = lex(text)?;
        let mut parser = Parser { tokens, pos: 0 };
        let expr = parser.expr()?;
        match parser.peek() {
            None => Ok(expr),
            Some(tok) => Err(format!("unexpected `{tok}` after expression")),
        }
    }

    /// Evaluates the predicate. `enabled` answers option atoms, `at_least`
    /// answers level atoms.
    pub fn eval(&self, enabled: &dyn Fn(&str) -> bool, at_least: &dyn Fn(&str) -> bool) -> bool {
        match self {
            Predicate::Opt(name) => enabled(name),
            Predicate::LevelAtLeast(label) => at_least(label),
            Predicate::Not(p) => !p.eval(enabled, at_least),
            Predicate::And(a, b) => a.eval(enabled, at_least) && b.eval(enabled, at_least),
            Predicate::Or(a, b) => a.eval(enabled, at_least) || b.eval(enabled, at_least),
        }
    }

    pub fn options(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.collect(&mut out, &mut BTreeSet::new());
        out
    }

    pub fn levels(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.collect(&mut BTreeSet::new(), &mut out);
        out
    }

    fn collect<'a>(&'a self, opts: &mut BTreeSet<&'a str>, levels: &mut BTreeSet<&'a str>) {
        match self {
            Predicate::Opt(n) => {
                opts.insert(n);
            }
            Predicate::LevelAtLeast(l) => {
                levels.insert(l);
            }
            Predicate::Not(p) => p.collect(opts, levels),
            Predicate::And(a, b) | Predicate::Or(a, b) => {
                a.collect(opts, levels);
                b.collect(opts, levels);
            }
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::Opt(n) => write!(f, "opt({n})"),
            Predicate::LevelAtLeast(l) => write!(f, "level_at_least({l})"),
            Predicate::Not(p) => write!(f, "NOT {p}"),
            Predicate::And(a, b) => write!(f, "({a} AND {b})"),
            Predicate::Or(a, b) => write!(f, "({a} OR {b})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    LParen,
    RParen,
    Word(String),
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::LParen => f.write_str("("),
            Token::RParen => f.write_str(")"),
            Token::Word(w) => f.write_str(w),
        }
    }
}

fn lex(text: &str) -> Result<Vec<Token>, String> {
    let mut tokens = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            '(' => {
                chars.next();
                tokens.push(Token::LParen);
            }
            ')' => {
                chars.next();
                tokens.push(Token::RParen);
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            c if is_word_char(c) => {
                let mut word = String::new();
                while let Some(&c) = chars.peek() {
                    if !is_word_char(c) {
                        break;
                    }
                    word.push(c);
                    chars.next();
                }
                tokens.push(Token::Word(word));
            }
            other => return Err(format!("unexpected character `{other}`")),
        }
    }
    Ok(tokens)
}

fn is_word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '+' | '.' | '=')
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let tok = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        tok
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Token::Word(w)) if w.eq_ignore_ascii_case(kw))
    }

    fn expect(&mut self, want: Token) -> Result<(), String> {
        match self.next() {
            Some(tok) if tok == want => Ok(()),
            Some(tok) => Err(format!("expected `{want}`, found `{tok}`")),
            None => Err(format!("expected `{want}`, found end of input")),
        }
    }

    fn expr(&mut self) -> Result<Predicate, String> {
        let mut lhs = self.and()?;
        while self.at_keyword("OR") {
            self.pos += 1;
            let rhs = self.and()?;
            lhs = Predicate::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Predicate, String> {
        let mut lhs = self.unary()?;
        while self.at_keyword("AND") {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Predicate::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Predicate, String> {
        if self.at_keyword("NOT") {
            self.pos += 1;
            return Ok(Predicate::Not(Box::new(self.unary()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Predicate, String> {
        match self.next() {
            Some(Token::LParen) => {
                let inner = self.expr()?;
                self.expect(Token::RParen)?;
                Ok(inner)
            }
            Some(Token::Word(w)) if w == "opt" || w == "level_at_least" => {
                self.expect(Token::LParen)?;
                let arg = match self.next() {
                    Some(Token::Word(a)) => a,
                    Some(tok) => {
                        return Err(format!("expected a name in `{w}(...)`, found `{tok}`"))
                    }
                    None => return Err(format!("unterminated `{w}(`")),
                };
                self.expect(Token::RParen)?;
                Ok(if w == "opt" {
                    Predicate::Opt(arg)
                } else {
                    Predicate::LevelAtLeast(arg)
                })
            }
            Some(tok) => Err(format!("unexpected `{tok}`")),
            None => Err("unexpected end of predicate".to_string()),
        }
    }
}
