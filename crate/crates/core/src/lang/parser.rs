//! Hand-written recursive descent parser over a character cursor.
//!
//! Expressions never span lines; declarations are separated by newlines.

use std::str::FromStr;

use thiserror::Error;

use super::ast::*;
use crate::dictionary::{OrderKind, SetOp};
use crate::scale::{Level, OperSEntry, Scale};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spanned<T> {
    pub line: usize,
    pub col: usize,
    pub node: T,
}

const DECL_KEYWORDS: [&str; 10] = ["universe", "dict", "family", "member", "series", "scale", "oper", "rule", "alias", "init"];

type PResult<T> = Result<T, SyntaxError>;

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic()
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '-' || c == '_'
}

struct Cursor {
    chars: Vec<char>,
    pos: usize,
}

impl Cursor {
    fn new(text: &str) -> Self {
        Cursor {
            chars: text.chars().collect(),
            pos: 0,
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.chars.get(self.pos + n).copied()
    }

    fn peek_str(&self, s: &str) -> bool {
        s.chars().enumerate().all(|(i, c)| self.peek_at(i) == Some(c))
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += 1;
        Some(c)
    }

    fn at_end(&self) -> bool {
        self.pos >= self.chars.len()
    }

    fn line_col(&self, pos: usize) -> (usize, usize) {
        let mut line = 1;
        let mut col = 1;
        for &c in &self.chars[..pos.min(self.chars.len())] {
            if c == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
        }
        (line, col)
    }

    fn error_at(&self, pos: usize, message: impl Into<String>) -> SyntaxError {
        let (line, col) = self.line_col(pos);
        SyntaxError {
            line,
            col,
            message: message.into(),
        }
    }

    fn error(&self, message: impl Into<String>) -> SyntaxError {
        self.error_at(self.pos, message)
    }

    fn found(&self) -> String {
        match self.peek() {
            None => "end of input".to_string(),
            Some('\n') => "end of line".to_string(),
            Some(c) => format!("`{c}`"),
        }
    }

    fn expected(&self, what: &str) -> SyntaxError {
        self.error(format!("expected {what}, found {}", self.found()))
    }

    fn skip_comment(&mut self) {
        while let Some(c) = self.peek() {
            if c == '\n' {
                break;
            }
            self.pos += 1;
        }
    }

    /// Spaces, tabs and comments; stops at a newline.
    fn skip_inline(&mut self) {
        while let Some(c) = self.peek() {
            match c {
                ' ' | '\t' | '\r' => self.pos += 1,
                '#' => self.skip_comment(),
                _ => break,
            }
        }
    }

    fn skip_all(&mut self) {
        loop {
            self.skip_inline();
            if self.peek() == Some('\n') {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn peek_ident(&self) -> Option<String> {
        let first = self.peek()?;
        if !is_ident_start(first) {
            return None;
        }
        let mut n = 1;
        while self.peek_at(n).is_some_and(is_ident_char) {
            n += 1;
        }
        Some(self.chars[self.pos..self.pos + n].iter().collect())
    }

    fn ident(&mut self) -> Option<String> {
        let id = self.peek_ident()?;
        self.pos += id.chars().count();
        Some(id)
    }

    fn expect_ident(&mut self, what: &str) -> PResult<String> {
        self.ident().ok_or_else(|| self.expected(what))
    }

    fn keyword(&mut self, kw: &str) -> bool {
        if self.peek_ident().as_deref() == Some(kw) {
            self.pos += kw.chars().count();
            true
        } else {
            false
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> PResult<()> {
        if self.keyword(kw) {
            Ok(())
        } else {
            Err(self.expected(&format!("`{kw}`")))
        }
    }

    fn expect_char(&mut self, c: char) -> PResult<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.expected(&format!("`{c}`")))
        }
    }

    /// Raw text up to (not including) a closing `close`, with comments removed.
    fn raw_until(&mut self, close: char) -> PResult<String> {
        let start = self.pos;
        let mut out = String::new();
        loop {
            match self.peek() {
                None => return Err(self.error_at(start, format!("unterminated list, missing `{close}`"))),
                Some(c) if c == close => {
                    self.pos += 1;
                    return Ok(out);
                }
                Some('#') => self.skip_comment(),
                Some(c) => {
                    out.push(c);
                    self.pos += 1;
                }
            }
        }
    }

    fn end_of_decl(&mut self) -> PResult<()> {
        self.skip_inline();
        match self.peek() {
            None | Some('\n') => Ok(()),
            _ => Err(self.expected("end of line")),
        }
    }
}

fn split_labels(raw: &str) -> Vec<String> {
    raw.split([',', '\n']).map(str::trim).filter(|s| !s.is_empty()).map(str::to_string).collect()
}

// ---------------------------------------------------------------- expressions

fn binkw(c: &Cursor) -> Option<SetOp> {
    c.peek_ident().and_then(|w| SetOp::from_keyword(&w))
}

fn expr(c: &mut Cursor) -> PResult<DictExpr> {
    let mut left = postfix(c)?;
    loop {
        c.skip_inline();
        let Some(op) = binkw(c) else { break };
        c.keyword(op.keyword());
        let right = postfix(c)?;
        left = DictExpr::Binary(op, Box::new(left), Box::new(right));
    }
    Ok(left)
}

fn postfix(c: &mut Cursor) -> PResult<DictExpr> {
    let base = primary(c)?;
    let mut sections = Vec::new();
    loop {
        c.skip_inline();
        if !c.peek_str("//") {
            break;
        }
        c.pos += 2;
        c.skip_inline();
        sections.push(c.expect_ident("section name after `//`")?);
    }
    Ok(if sections.is_empty() {
        base
    } else {
        DictExpr::Expand(Box::new(base), sections)
    })
}

fn primary(c: &mut Cursor) -> PResult<DictExpr> {
    c.skip_inline();
    if c.peek() == Some('(') {
        c.pos += 1;
        let inner = expr(c)?;
        c.skip_inline();
        c.expect_char(')')?;
        return Ok(inner);
    }
    if let Some(op) = binkw(c) {
        c.keyword(op.keyword());
        let family = primary(c)?;
        let mut kept = Vec::new();
        loop {
            c.skip_inline();
            if c.peek() != Some('|') {
                break;
            }
            c.pos += 1;
            c.skip_inline();
            kept.push(c.expect_ident("parameter name after `|`")?);
        }
        if kept.is_empty() {
            return Err(c.expected("`|` after collapsed family"));
        }
        return Ok(DictExpr::Collapse(op, Box::new(family), kept));
    }
    if c.keyword("order") {
        c.skip_inline();
        let kind = match c.ident().as_deref() {
            Some("lex") => OrderKind::Lexicographic,
            Some("num") => OrderKind::Numeric,
            _ => return Err(c.expected("`lex` or `num`")),
        };
        let arg = primary(c)?;
        return Ok(DictExpr::Order(kind, Box::new(arg)));
    }
    let name = c.expect_ident("dictionary expression")?;
    if c.peek() != Some('(') {
        return Ok(DictExpr::Name(name));
    }
    c.pos += 1;
    let params = param_list(c)?;
    Ok(DictExpr::Hierarchy(name, params))
}

/// Comma-separated expressions up to `)`; the opening parenthesis is already consumed.
fn param_list(c: &mut Cursor) -> PResult<Vec<DictExpr>> {
    let mut params = vec![expr(c)?];
    loop {
        c.skip_inline();
        match c.peek() {
            Some(',') => {
                c.pos += 1;
                params.push(expr(c)?);
            }
            Some(')') => {
                c.pos += 1;
                return Ok(params);
            }
            _ => return Err(c.expected("`,` or `)`")),
        }
    }
}

/// Parse one dictionary expression; the whole input must be consumed.
pub fn parse_expr(text: &str) -> Result<DictExpr, SyntaxError> {
    let mut c = Cursor::new(text);
    let e = expr(&mut c)?;
    c.skip_all();
    if !c.at_end() {
        return Err(c.expected("end of expression"));
    }
    Ok(e)
}

// ---------------------------------------------------------------- declarations

fn universe_decl(c: &mut Cursor) -> PResult<Decl> {
    c.skip_inline();
    let name = c.expect_ident("universe name")?;
    c.skip_inline();
    c.expect_char(':')?;
    c.skip_inline();
    let kind = c.expect_ident("universe kind")?;
    c.skip_inline();
    let members = if c.peek() == Some('{') {
        c.pos += 1;
        Some(split_labels(&c.raw_until('}')?))
    } else {
        None
    };
    Ok(Decl::Universe { name, kind, members })
}

fn dict_decl(c: &mut Cursor) -> PResult<Decl> {
    c.skip_inline();
    let name = c.expect_ident("dictionary name")?;
    c.skip_inline();
    if c.peek() == Some('=') {
        c.pos += 1;
        let e = expr(c)?;
        return Ok(Decl::DictExpr { name, expr: e });
    }
    c.expect_keyword("from")?;
    c.skip_inline();
    let universe = c.expect_ident("universe name")?;
    c.skip_inline();
    c.expect_char('{')?;
    let members = split_labels(&c.raw_until('}')?);
    Ok(Decl::Dict { name, universe, members })
}

fn family_decl(c: &mut Cursor) -> PResult<Decl> {
    c.skip_inline();
    let name = c.expect_ident("family name")?;
    c.expect_char('(')?;
    let params = param_list(c)?;
    c.skip_inline();
    let universe = if c.keyword("from") {
        c.skip_inline();
        Some(c.expect_ident("universe name")?)
    } else {
        None
    };
    Ok(Decl::Family { name, params, universe })
}

fn member_decl(c: &mut Cursor) -> PResult<Decl> {
    c.skip_inline();
    let family = c.expect_ident("family name")?;
    c.expect_char('(')?;
    let key = split_labels(&c.raw_until(')')?);
    c.skip_inline();
    c.expect_keyword("from")?;
    c.skip_inline();
    let universe = c.expect_ident("universe name")?;
    c.skip_inline();
    c.expect_char('{')?;
    let members = split_labels(&c.raw_until('}')?);
    Ok(Decl::Member {
        family,
        key,
        universe,
        members,
    })
}

/// Skip whitespace, comments, newlines and `;` separators inside a block.
fn skip_block_separators(c: &mut Cursor) {
    loop {
        c.skip_all();
        if c.peek() == Some(';') {
            c.pos += 1;
        } else {
            break;
        }
    }
}

fn end_of_item(c: &mut Cursor) -> PResult<()> {
    c.skip_inline();
    match c.peek() {
        Some(';' | '\n' | '}') => Ok(()),
        _ => Err(c.expected("`;`, newline or `}`")),
    }
}

fn absent(c: &mut Cursor) -> bool {
    c.skip_inline();
    if c.peek() == Some('-') && !c.peek_at(1).is_some_and(is_ident_char) {
        c.pos += 1;
        true
    } else {
        false
    }
}

fn series_decl(c: &mut Cursor) -> PResult<Decl> {
    let start = c.pos;
    c.skip_inline();
    let type_name = c.expect_ident("series type name")?;
    c.skip_inline();
    c.expect_char('{')?;
    let (mut names, mut attrs, mut columns, mut rows) = (None, Vec::new(), None, None);
    loop {
        skip_block_separators(c);
        if c.peek() == Some('}') {
            c.pos += 1;
            break;
        }
        if c.at_end() {
            return Err(c.error_at(start, "unterminated series block"));
        }
        let key = c.expect_ident("`names`, `attrs`, `columns` or `rows`")?;
        c.skip_inline();
        c.expect_char('=')?;
        match key.as_str() {
            "names" => names = if absent(c) { None } else { Some(expr(c)?) },
            "attrs" => {
                attrs.clear();
                if !absent(c) {
                    loop {
                        let e = expr(c)?;
                        attrs.extend(e.cross_items().into_iter().cloned());
                        c.skip_inline();
                        if c.peek() == Some(',') {
                            c.pos += 1;
                        } else {
                            break;
                        }
                    }
                }
            }
            "columns" => columns = Some(expr(c)?),
            "rows" => rows = Some(expr(c)?),
            other => return Err(c.error(format!("unknown series field `{other}`"))),
        }
        end_of_item(c)?;
    }
    let columns = columns.ok_or_else(|| c.error_at(start, format!("series `{type_name}` lacks columns")))?;
    let rows = rows.ok_or_else(|| c.error_at(start, format!("series `{type_name}` lacks rows")))?;
    Ok(Decl::Series(SeriesDef {
        type_name,
        names,
        attrs,
        columns,
        rows,
    }))
}

fn level(c: &mut Cursor) -> PResult<Level> {
    let pos = c.pos;
    let word = c.expect_ident("scale level")?;
    Level::from_str(&word).map_err(|e| c.error_at(pos, e.to_string()))
}

fn unit(c: &mut Cursor) -> PResult<Option<String>> {
    c.skip_inline();
    if c.keyword("unit") {
        c.skip_inline();
        Ok(Some(c.expect_ident("unit name")?))
    } else {
        Ok(None)
    }
}

fn scale_decl(c: &mut Cursor) -> PResult<Decl> {
    c.skip_inline();
    let mut target = c.expect_ident("scale target")?;
    if c.peek() == Some('.') {
        c.pos += 1;
        target.push('.');
        target.push_str(&c.expect_ident("column name")?);
    }
    c.skip_inline();
    c.expect_char(':')?;
    c.skip_inline();
    let level = level(c)?;
    let unit = unit(c)?;
    c.skip_inline();
    let universe = if c.keyword("in") {
        c.skip_inline();
        Some(c.expect_ident("universe name")?)
    } else {
        None
    };
    Ok(Decl::Scale {
        target,
        level,
        unit,
        universe,
    })
}

fn signature(c: &mut Cursor) -> PResult<(String, Scale)> {
    c.skip_inline();
    let universe = c.expect_ident("universe name")?;
    c.skip_inline();
    let level = level(c)?;
    let unit = unit(c)?;
    Ok((universe, Scale::new(level, unit.as_deref())))
}

fn oper_decl(c: &mut Cursor) -> PResult<Decl> {
    c.skip_inline();
    let op_name = c.expect_ident("operation name")?;
    c.skip_inline();
    c.expect_char('(')?;
    let mut args = vec![signature(c)?];
    loop {
        c.skip_inline();
        match c.peek() {
            Some(',') => {
                c.pos += 1;
                args.push(signature(c)?);
            }
            Some(')') => {
                c.pos += 1;
                break;
            }
            _ => return Err(c.expected("`,` or `)`")),
        }
    }
    c.skip_inline();
    if !c.peek_str("->") {
        return Err(c.expected("`->`"));
    }
    c.pos += 2;
    let result = signature(c)?;
    Ok(Decl::Oper(OperSEntry { op_name, args, result }))
}

fn name_list(c: &mut Cursor) -> PResult<Vec<String>> {
    if absent(c) {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    loop {
        c.skip_inline();
        out.push(c.expect_ident("series type name")?);
        c.skip_inline();
        if c.peek() == Some(',') {
            c.pos += 1;
        } else {
            return Ok(out);
        }
    }
}

fn column_ref(c: &mut Cursor) -> PResult<ColumnRef> {
    c.skip_inline();
    let series = c.expect_ident("series type name")?;
    c.expect_char('.')?;
    let column = c.expect_ident("column name")?;
    Ok(ColumnRef { series, column })
}

fn arith(c: &mut Cursor) -> PResult<Arith> {
    let mut left = arith_term(c)?;
    loop {
        c.skip_inline();
        let op = match c.peek() {
            Some('+') => ArithOp::Add,
            Some('-') => ArithOp::Sub,
            _ => break,
        };
        c.pos += 1;
        let right = arith_term(c)?;
        left = Arith::Bin(op, Box::new(left), Box::new(right));
    }
    Ok(left)
}

fn arith_term(c: &mut Cursor) -> PResult<Arith> {
    let mut left = arith_factor(c)?;
    loop {
        c.skip_inline();
        let op = match c.peek() {
            Some('*') => ArithOp::Mul,
            Some('/') => ArithOp::Div,
            _ => break,
        };
        c.pos += 1;
        let right = arith_factor(c)?;
        left = Arith::Bin(op, Box::new(left), Box::new(right));
    }
    Ok(left)
}

fn arith_factor(c: &mut Cursor) -> PResult<Arith> {
    c.skip_inline();
    match c.peek() {
        Some('(') => {
            c.pos += 1;
            let inner = arith(c)?;
            c.skip_inline();
            c.expect_char(')')?;
            Ok(inner)
        }
        Some(d) if d.is_ascii_digit() => {
            let start = c.pos;
            while c.peek().is_some_and(|x| x.is_ascii_digit() || x == '.') {
                c.pos += 1;
            }
            let text: String = c.chars[start..c.pos].iter().collect();
            text.parse::<f64>().map(Arith::Num).map_err(|_| c.error_at(start, format!("bad number `{text}`")))
        }
        _ => column_ref(c).map(Arith::Col),
    }
}

fn formula(c: &mut Cursor) -> PResult<Formula> {
    let target = column_ref(c)?;
    c.skip_inline();
    c.expect_char('=')?;
    c.skip_inline();
    let save = c.pos;
    if c.keyword("accum") {
        c.skip_inline();
        if c.peek() == Some('(') {
            c.pos += 1;
            c.skip_inline();
            let fpos = c.pos;
            let fname = c.expect_ident("accumulation function")?;
            let func = AccumFn::from_name(&fname)
                .ok_or_else(|| c.error_at(fpos, format!("unknown accumulation function `{fname}`")))?;
            c.skip_inline();
            c.expect_char(',')?;
            let src = column_ref(c)?;
            c.skip_inline();
            c.expect_char(')')?;
            return Ok(Formula {
                target,
                body: FormulaBody::Accum(func, src),
            });
        }
        c.pos = save;
    }
    Ok(Formula {
        target,
        body: FormulaBody::Arith(arith(c)?),
    })
}

fn rule_decl(c: &mut Cursor) -> PResult<Decl> {
    let start = c.pos;
    c.skip_inline();
    let name = c.expect_ident("rule name")?;
    c.skip_inline();
    c.expect_char('{')?;
    let (mut inputs, mut outputs, mut formulas) = (Vec::new(), Vec::new(), Vec::new());
    loop {
        skip_block_separators(c);
        if c.peek() == Some('}') {
            c.pos += 1;
            break;
        }
        if c.at_end() {
            return Err(c.error_at(start, "unterminated rule block"));
        }
        let save = c.pos;
        match c.ident().as_deref() {
            Some(kw @ ("in" | "out")) if {
                c.skip_inline();
                c.peek() == Some(':')
            } =>
            {
                c.pos += 1;
                let list = name_list(c)?;
                if kw == "in" {
                    inputs = list;
                } else {
                    outputs = list;
                }
            }
            _ => {
                c.pos = save;
                formulas.push(formula(c)?);
            }
        }
        end_of_item(c)?;
    }
    Ok(Decl::Rule(RuleDef {
        name,
        inputs,
        outputs,
        formulas,
    }))
}

fn alias_decl(c: &mut Cursor) -> PResult<Decl> {
    c.skip_inline();
    let alias = c.expect_ident("alias name")?;
    c.skip_inline();
    c.expect_char('=')?;
    c.skip_inline();
    let canonical = c.expect_ident("dimension name")?;
    Ok(Decl::Alias { alias, canonical })
}

fn init_decl(c: &mut Cursor) -> PResult<Decl> {
    c.skip_inline();
    let rule = c.expect_ident("rule name")?;
    c.skip_inline();
    let kind = if c.keyword("at-start") {
        InitKind::AtStart
    } else if c.keyword("on-event") {
        c.skip_inline();
        InitKind::OnEvent(c.expect_ident("event name")?)
    } else {
        return Err(c.expected("`at-start` or `on-event`"));
    };
    Ok(Decl::Init(InitDecl { rule, kind }))
}

fn decl(c: &mut Cursor) -> PResult<Decl> {
    let pos = c.pos;
    let Some(kw) = c.ident() else {
        return Err(c.expected("declaration"));
    };
    let d = match kw.as_str() {
        "universe" => universe_decl(c),
        "dict" => dict_decl(c),
        "family" => family_decl(c),
        "member" => member_decl(c),
        "series" => series_decl(c),
        "scale" => scale_decl(c),
        "oper" => oper_decl(c),
        "rule" => rule_decl(c),
        "alias" => alias_decl(c),
        "init" => init_decl(c),
        other => Err(c.error_at(pos, format!("unknown declaration `{other}`"))),
    }?;
    c.end_of_decl()?;
    Ok(d)
}

/// Skip to the next line that starts with a declaration keyword.
fn recover(c: &mut Cursor) {
    loop {
        while let Some(ch) = c.bump() {
            if ch == '\n' {
                break;
            }
        }
        if c.at_end() {
            return;
        }
        let save = c.pos;
        c.skip_inline();
        let starts_decl = c.peek_ident().is_some_and(|w| DECL_KEYWORDS.contains(&w.as_str()));
        c.pos = save;
        if starts_decl {
            return;
        }
    }
}

/// Parse a workspace file. Errors are collected, one per failed declaration.
pub fn parse_file(text: &str) -> Result<Vec<Spanned<Decl>>, Vec<SyntaxError>> {
    let mut c = Cursor::new(text);
    let mut decls = Vec::new();
    let mut errors = Vec::new();
    loop {
        c.skip_all();
        if c.at_end() {
            break;
        }
        let (line, col) = c.line_col(c.pos);
        match decl(&mut c) {
            Ok(node) => decls.push(Spanned { line, col, node }),
            Err(e) => {
                errors.push(e);
                recover(&mut c);
            }
        }
    }
    if errors.is_empty() {
        Ok(decls)
    } else {
        Err(errors)
    }
}
