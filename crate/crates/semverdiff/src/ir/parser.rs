//! MVIL parser and per-method validation.
//!
//! Parsing is total: either a fully validated class list comes back, or a
//! list of diagnostics, never a partial model. Syntax recovery happens at
//! statement granularity (skip to the next `;`), so one malformed statement
//! does not hide later errors in the same file.

use std::collections::btree_map::Entry;
use std::fmt;

use super::{
    BinOpKind, BlockInfo, ClassDef, FieldDef, Literal, MethodIR, Operand, RelOpKind, Signature,
    Statement, StatementKind, TryRegion, Type, Visibility,
};

/// Parser diagnostic: syntax errors carry the offending token position,
/// semantic errors point at the construct that failed validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagnosticKind {
    Syntax,
    Semantic,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            DiagnosticKind::Syntax => "syntax error",
            DiagnosticKind::Semantic => "semantic error",
        };
        write!(f, "{}:{}: {kind}: {}", self.line, self.col, self.message)
    }
}

/// Parses one MVIL file into validated classes.
pub fn parse_module(text: &str) -> Result<Vec<ClassDef>, Vec<Diagnostic>> {
    let tokens = match lex(text) {
        Ok(tokens) => tokens,
        Err(diag) => return Err(vec![diag]),
    };
    let mut parser = Parser {
        tokens,
        pos: 0,
        diagnostics: Vec::new(),
    };
    let classes = parser.parse_classes();
    if parser.diagnostics.is_empty() {
        Ok(classes)
    } else {
        Err(parser.diagnostics)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Comma,
    Semi,
    Colon,
    Eq,
    Dot,
    DotDot,
    Arrow,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(v) => write!(f, "`#{v}`"),
            Tok::Str(s) => write!(f, "string \"{s}\""),
            Tok::LBrace => write!(f, "`{{`"),
            Tok::RBrace => write!(f, "`}}`"),
            Tok::LParen => write!(f, "`(`"),
            Tok::RParen => write!(f, "`)`"),
            Tok::Comma => write!(f, "`,`"),
            Tok::Semi => write!(f, "`;`"),
            Tok::Colon => write!(f, "`:`"),
            Tok::Eq => write!(f, "`=`"),
            Tok::Dot => write!(f, "`.`"),
            Tok::DotDot => write!(f, "`..`"),
            Tok::Arrow => write!(f, "`->`"),
            Tok::Eof => write!(f, "end of file"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, Diagnostic> {
    let mut tokens = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut col) = (1usize, 1usize);

    macro_rules! push {
        ($tok:expr, $l:expr, $c:expr) => {
            tokens.push(Token {
                tok: $tok,
                line: $l,
                col: $c,
            })
        };
    }

    while let Some(&c) = chars.peek() {
        let (tline, tcol) = (line, col);
        let mut bump = |chars: &mut std::iter::Peekable<std::str::Chars>| {
            let c = chars.next();
            match c {
                Some('\n') => {
                    line += 1;
                    col = 1;
                }
                Some(_) => col += 1,
                None => {}
            }
            c
        };
        match c {
            ' ' | '\t' | '\r' | '\n' => {
                bump(&mut chars);
            }
            '/' => {
                bump(&mut chars);
                if chars.peek() == Some(&'/') {
                    while let Some(&n) = chars.peek() {
                        if n == '\n' {
                            break;
                        }
                        bump(&mut chars);
                    }
                } else {
                    return Err(Diagnostic {
                        kind: DiagnosticKind::Syntax,
                        line: tline,
                        col: tcol,
                        message: "stray `/`; comments start with `//`".into(),
                    });
                }
            }
            '{' => {
                bump(&mut chars);
                push!(Tok::LBrace, tline, tcol);
            }
            '}' => {
                bump(&mut chars);
                push!(Tok::RBrace, tline, tcol);
            }
            '(' => {
                bump(&mut chars);
                push!(Tok::LParen, tline, tcol);
            }
            ')' => {
                bump(&mut chars);
                push!(Tok::RParen, tline, tcol);
            }
            ',' => {
                bump(&mut chars);
                push!(Tok::Comma, tline, tcol);
            }
            ';' => {
                bump(&mut chars);
                push!(Tok::Semi, tline, tcol);
            }
            ':' => {
                bump(&mut chars);
                push!(Tok::Colon, tline, tcol);
            }
            '=' => {
                bump(&mut chars);
                push!(Tok::Eq, tline, tcol);
            }
            '.' => {
                bump(&mut chars);
                if chars.peek() == Some(&'.') {
                    bump(&mut chars);
                    push!(Tok::DotDot, tline, tcol);
                } else {
                    push!(Tok::Dot, tline, tcol);
                }
            }
            '-' => {
                bump(&mut chars);
                if chars.peek() == Some(&'>') {
                    bump(&mut chars);
                    push!(Tok::Arrow, tline, tcol);
                } else {
                    return Err(Diagnostic {
                        kind: DiagnosticKind::Syntax,
                        line: tline,
                        col: tcol,
                        message: "stray `-`; negative literals are written `#-n`".into(),
                    });
                }
            }
            '#' => {
                bump(&mut chars);
                let mut digits = String::new();
                if chars.peek() == Some(&'-') {
                    digits.push('-');
                    bump(&mut chars);
                }
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_digit() {
                        digits.push(d);
                        bump(&mut chars);
                    } else {
                        break;
                    }
                }
                let value = digits.parse::<i64>().map_err(|_| Diagnostic {
                    kind: DiagnosticKind::Syntax,
                    line: tline,
                    col: tcol,
                    message: format!("malformed integer literal `#{digits}`"),
                })?;
                push!(Tok::Int(value), tline, tcol);
            }
            '"' => {
                bump(&mut chars);
                let mut s = String::new();
                loop {
                    match bump(&mut chars) {
                        Some('"') => break,
                        Some('\n') | None => {
                            return Err(Diagnostic {
                                kind: DiagnosticKind::Syntax,
                                line: tline,
                                col: tcol,
                                message: "unterminated string literal".into(),
                            })
                        }
                        Some(c) => s.push(c),
                    }
                }
                push!(Tok::Str(s), tline, tcol);
            }
            c if c.is_ascii_digit() => {
                let mut digits = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_digit() {
                        digits.push(d);
                        bump(&mut chars);
                    } else {
                        break;
                    }
                }
                let value = digits.parse::<i64>().map_err(|_| Diagnostic {
                    kind: DiagnosticKind::Syntax,
                    line: tline,
                    col: tcol,
                    message: format!("malformed integer `{digits}`"),
                })?;
                push!(Tok::Int(value), tline, tcol);
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut ident = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        ident.push(c);
                        bump(&mut chars);
                    } else {
                        break;
                    }
                }
                push!(Tok::Ident(ident), tline, tcol);
            }
            other => {
                return Err(Diagnostic {
                    kind: DiagnosticKind::Syntax,
                    line: tline,
                    col: tcol,
                    message: format!("unexpected character `{other}`"),
                })
            }
        }
    }
    tokens.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    diagnostics: Vec<Diagnostic>,
}

/// Raw block collected during parsing, before flattening into `MethodIR`.
struct RawBlock {
    label: String,
    label_line: usize,
    label_col: usize,
    stmts: Vec<Statement>,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn peek2(&self) -> &Token {
        &self.tokens[(self.pos + 1).min(self.tokens.len() - 1)]
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error_at(&mut self, token: &Token, kind: DiagnosticKind, message: String) {
        self.diagnostics.push(Diagnostic {
            kind,
            line: token.line,
            col: token.col,
            message,
        });
    }

    fn syntax_error(&mut self, message: String) -> ParseAbort {
        let token = self.peek().clone();
        self.error_at(&token, DiagnosticKind::Syntax, message);
        ParseAbort
    }

    fn expect(&mut self, expected: Tok) -> Result<Token, ParseAbort> {
        if self.peek().tok == expected {
            Ok(self.next())
        } else {
            let found = self.peek().tok.clone();
            Err(self.syntax_error(format!("expected {expected}, found {found}")))
        }
    }

    fn expect_ident(&mut self, what: &str) -> Result<(String, Token), ParseAbort> {
        match self.peek().tok.clone() {
            Tok::Ident(name) => {
                let token = self.next();
                Ok((name, token))
            }
            found => Err(self.syntax_error(format!("expected {what}, found {found}"))),
        }
    }

    /// Skips tokens until just past the next `;`, or to a brace boundary.
    fn recover_to_semi(&mut self) {
        loop {
            match self.peek().tok {
                Tok::Semi => {
                    self.next();
                    return;
                }
                Tok::RBrace | Tok::Eof => return,
                _ => {
                    self.next();
                }
            }
        }
    }

    fn parse_classes(&mut self) -> Vec<ClassDef> {
        let mut classes = Vec::new();
        loop {
            match self.peek().tok.clone() {
                Tok::Eof => break,
                Tok::Ident(kw) if kw == "class" => {
                    if let Ok(class) = self.parse_class() {
                        if classes.iter().any(|c: &ClassDef| c.name == class.name) {
                            let token = self.peek().clone();
                            self.error_at(
                                &token,
                                DiagnosticKind::Semantic,
                                format!("duplicate class `{}` in file", class.name),
                            );
                        } else {
                            classes.push(class);
                        }
                    } else {
                        // Class-level recovery: skip to the next top-level `class`.
                        loop {
                            match self.peek().tok.clone() {
                                Tok::Eof => break,
                                Tok::Ident(kw) if kw == "class" => break,
                                _ => {
                                    self.next();
                                }
                            }
                        }
                    }
                }
                found => {
                    let _ = self.syntax_error(format!("expected `class`, found {found}"));
                    self.next();
                }
            }
        }
        classes
    }

    fn parse_class(&mut self) -> Result<ClassDef, ParseAbort> {
        self.expect(Tok::Ident("class".into()))?;
        let (name, _) = self.expect_ident("class name")?;
        self.expect(Tok::LBrace)?;
        let mut class = ClassDef {
            name,
            fields: Vec::new(),
            methods: std::collections::BTreeMap::new(),
        };
        loop {
            match self.peek().tok.clone() {
                Tok::RBrace => {
                    self.next();
                    break;
                }
                Tok::Ident(kw) if kw == "field" => {
                    self.next();
                    let ty_token = self.peek().clone();
                    let (ty_name, _) = self.expect_ident("field type")?;
                    let ty = Type::from_name(&ty_name);
                    if ty == Type::Void {
                        self.error_at(
                            &ty_token,
                            DiagnosticKind::Semantic,
                            "field cannot have type void".into(),
                        );
                    }
                    let (fname, ftoken) = self.expect_ident("field name")?;
                    self.expect(Tok::Semi)?;
                    if class.fields.iter().any(|f| f.name == fname) {
                        self.error_at(
                            &ftoken,
                            DiagnosticKind::Semantic,
                            format!("duplicate field `{}` in class `{}`", fname, class.name),
                        );
                    } else {
                        class.fields.push(FieldDef { name: fname, ty });
                    }
                }
                Tok::Ident(kw) if kw == "method" => {
                    let method = self.parse_method(&class.name)?;
                    let key = (
                        method.signature.method_name.clone(),
                        method.signature.param_types.clone(),
                    );
                    match class.methods.entry(key) {
                        Entry::Occupied(_) => {
                            let token = self.peek().clone();
                            self.error_at(
                                &token,
                                DiagnosticKind::Semantic,
                                format!(
                                    "duplicate method signature `{}`",
                                    method.signature.display_string()
                                ),
                            );
                        }
                        Entry::Vacant(slot) => {
                            slot.insert(method);
                        }
                    }
                }
                found => {
                    return Err(self.syntax_error(format!(
                        "expected `field`, `method` or `}}`, found {found}"
                    )))
                }
            }
        }
        Ok(class)
    }

    fn parse_method(&mut self, class_name: &str) -> Result<MethodIR, ParseAbort> {
        self.expect(Tok::Ident("method".into()))?;
        let (vis_name, vis_token) = self.expect_ident("visibility")?;
        let visibility = match vis_name.as_str() {
            "public" => Visibility::Public,
            "private" => Visibility::Private,
            other => {
                self.error_at(
                    &vis_token,
                    DiagnosticKind::Syntax,
                    format!("expected `public` or `private`, found `{other}`"),
                );
                Visibility::Public
            }
        };
        let (ret_name, _) = self.expect_ident("return type")?;
        let return_type = Type::from_name(&ret_name);
        let (method_name, _) = self.expect_ident("method name")?;
        self.expect(Tok::LParen)?;
        let mut param_types = Vec::new();
        let mut param_names = Vec::new();
        if self.peek().tok != Tok::RParen {
            loop {
                let (ty_name, _) = self.expect_ident("parameter type")?;
                let (pname, _) = self.expect_ident("parameter name")?;
                param_types.push(Type::from_name(&ty_name));
                param_names.push(pname);
                if self.peek().tok == Tok::Comma {
                    self.next();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;
        self.expect(Tok::LBrace)?;

        let signature = Signature {
            class_name: class_name.to_string(),
            method_name,
            param_types,
            return_type,
            visibility,
        };
        let param_names_for_body = param_names;

        let mut blocks: Vec<RawBlock> = Vec::new();
        let mut try_regions: Vec<(TryRegion, Token)> = Vec::new();
        let mut next_id = 0usize;
        loop {
            match self.peek().tok.clone() {
                Tok::RBrace => {
                    self.next();
                    break;
                }
                Tok::Ident(kw) if kw == "try" => {
                    let token = self.peek().clone();
                    match self.parse_try_region() {
                        Ok(region) => try_regions.push((region, token)),
                        Err(ParseAbort) => self.recover_to_semi(),
                    }
                }
                Tok::Ident(label) if self.peek2().tok == Tok::Colon => {
                    let label_token = self.next();
                    self.next(); // colon
                    blocks.push(RawBlock {
                        label,
                        label_line: label_token.line,
                        label_col: label_token.col,
                        stmts: Vec::new(),
                    });
                }
                Tok::Eof => {
                    return Err(self.syntax_error("unterminated method body".into()));
                }
                _ => {
                    if blocks.is_empty() {
                        let found = self.peek().tok.clone();
                        let _ = self.syntax_error(format!(
                            "statement before the first block label, found {found}"
                        ));
                        self.recover_to_semi();
                        continue;
                    }
                    match self.parse_statement(next_id) {
                        Ok(stmt) => {
                            next_id += 1;
                            blocks.last_mut().unwrap().stmts.push(stmt);
                        }
                        Err(ParseAbort) => self.recover_to_semi(),
                    }
                }
            }
        }

        let method = build_method(signature, param_names_for_body, blocks, try_regions, self);
        Ok(method)
    }

    fn parse_try_region(&mut self) -> Result<TryRegion, ParseAbort> {
        self.expect(Tok::Ident("try".into()))?;
        let (start_label, _) = self.expect_ident("block label")?;
        self.expect(Tok::DotDot)?;
        let (end_label, _) = self.expect_ident("block label")?;
        self.expect(Tok::Ident("catch".into()))?;
        let (exception, _) = self.expect_ident("exception type")?;
        self.expect(Tok::Arrow)?;
        let (handler_label, _) = self.expect_ident("handler label")?;
        self.expect(Tok::Semi)?;
        Ok(TryRegion {
            start_label,
            end_label,
            exception,
            handler_label,
        })
    }

    fn parse_statement(&mut self, id: usize) -> Result<Statement, ParseAbort> {
        let kind = match self.peek().tok.clone() {
            Tok::Ident(kw) if kw == "putfield" => {
                self.next();
                let object = self.parse_operand()?;
                self.expect(Tok::Comma)?;
                let (class, field) = self.parse_field_ref()?;
                self.expect(Tok::Comma)?;
                let value = self.parse_operand()?;
                StatementKind::FieldStore {
                    object,
                    class,
                    field,
                    value,
                }
            }
            Tok::Ident(kw) if kw == "return" => {
                self.next();
                let value = if self.peek().tok == Tok::Semi {
                    None
                } else {
                    Some(self.parse_operand()?)
                };
                StatementKind::Return { value }
            }
            Tok::Ident(kw) if kw == "throw" => {
                self.next();
                let (exception, _) = self.expect_ident("exception type")?;
                StatementKind::Throw { exception }
            }
            Tok::Ident(kw) if kw == "branch" => {
                self.next();
                let cond = self.parse_operand()?;
                self.expect(Tok::Comma)?;
                let (then_label, _) = self.expect_ident("block label")?;
                self.expect(Tok::Comma)?;
                let (else_label, _) = self.expect_ident("block label")?;
                StatementKind::Branch {
                    cond,
                    then_label,
                    else_label,
                }
            }
            Tok::Ident(kw) if kw == "goto" => {
                self.next();
                let (label, _) = self.expect_ident("block label")?;
                StatementKind::Goto { label }
            }
            Tok::Ident(kw) if kw == "call" => {
                // Void call without a defined local.
                self.next();
                let (callee, args) = self.parse_call_tail()?;
                StatementKind::Call {
                    def: None,
                    callee,
                    args,
                }
            }
            Tok::Ident(def) => {
                let def_token = self.next();
                if def == "this" {
                    self.error_at(
                        &def_token,
                        DiagnosticKind::Semantic,
                        "`this` cannot be assigned".into(),
                    );
                }
                self.expect(Tok::Eq)?;
                self.parse_assignment_rhs(def)?
            }
            found => return Err(self.syntax_error(format!("expected a statement, found {found}"))),
        };
        self.expect(Tok::Semi)?;
        Ok(Statement { id, kind })
    }

    fn parse_assignment_rhs(&mut self, def: String) -> Result<StatementKind, ParseAbort> {
        let (kw, kw_token) = self.expect_ident("statement keyword")?;
        Ok(match kw.as_str() {
            "param" => {
                let index = match self.peek().tok.clone() {
                    Tok::Int(v) if v >= 0 => {
                        self.next();
                        v as usize
                    }
                    found => {
                        return Err(
                            self.syntax_error(format!("expected parameter index, found {found}"))
                        )
                    }
                };
                StatementKind::ParamBind { def, index }
            }
            "const" => {
                let value = match self.peek().tok.clone() {
                    Tok::Int(v) => {
                        self.next();
                        Literal::Int(v)
                    }
                    Tok::Str(s) => {
                        self.next();
                        Literal::Str(s)
                    }
                    Tok::Ident(b) if b == "true" => {
                        self.next();
                        Literal::Bool(true)
                    }
                    Tok::Ident(b) if b == "false" => {
                        self.next();
                        Literal::Bool(false)
                    }
                    found => {
                        return Err(self.syntax_error(format!("expected a literal, found {found}")))
                    }
                };
                StatementKind::ConstAssign { def, value }
            }
            "binop" => {
                let (op_name, op_token) = self.expect_ident("binary operator")?;
                let op = BinOpKind::from_name(&op_name).unwrap_or_else(|| {
                    self.error_at(
                        &op_token,
                        DiagnosticKind::Syntax,
                        format!("unknown binary operator `{op_name}`"),
                    );
                    BinOpKind::Add
                });
                let lhs = self.parse_operand()?;
                self.expect(Tok::Comma)?;
                let rhs = self.parse_operand()?;
                StatementKind::BinOp { def, op, lhs, rhs }
            }
            "relop" => {
                let (op_name, op_token) = self.expect_ident("relational operator")?;
                let op = RelOpKind::from_name(&op_name).unwrap_or_else(|| {
                    self.error_at(
                        &op_token,
                        DiagnosticKind::Syntax,
                        format!("unknown relational operator `{op_name}`"),
                    );
                    RelOpKind::Eq
                });
                let lhs = self.parse_operand()?;
                self.expect(Tok::Comma)?;
                let rhs = self.parse_operand()?;
                StatementKind::RelOpAssign { def, op, lhs, rhs }
            }
            "call" => {
                let (callee, args) = self.parse_call_tail()?;
                StatementKind::Call {
                    def: Some(def),
                    callee,
                    args,
                }
            }
            "new" => {
                let (class, _) = self.expect_ident("class name")?;
                StatementKind::NewObject { def, class }
            }
            "getfield" => {
                let object = self.parse_operand()?;
                self.expect(Tok::Comma)?;
                let (class, field) = self.parse_field_ref()?;
                StatementKind::FieldLoad {
                    def,
                    object,
                    class,
                    field,
                }
            }
            other => {
                self.error_at(
                    &kw_token,
                    DiagnosticKind::Syntax,
                    format!("unknown statement keyword `{other}`"),
                );
                return Err(ParseAbort);
            }
        })
    }

    /// Parses `Class.name(t1,t2):ret` plus an optional argument list.
    fn parse_call_tail(&mut self) -> Result<(Signature, Vec<Operand>), ParseAbort> {
        let (class_name, _) = self.expect_ident("callee class")?;
        self.expect(Tok::Dot)?;
        let (method_name, _) = self.expect_ident("callee method")?;
        self.expect(Tok::LParen)?;
        let mut param_types = Vec::new();
        if self.peek().tok != Tok::RParen {
            loop {
                let (ty_name, _) = self.expect_ident("parameter type")?;
                param_types.push(Type::from_name(&ty_name));
                if self.peek().tok == Tok::Comma {
                    self.next();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;
        self.expect(Tok::Colon)?;
        let (ret_name, _) = self.expect_ident("return type")?;
        let callee = Signature {
            class_name,
            method_name,
            param_types,
            return_type: Type::from_name(&ret_name),
            visibility: Visibility::Public,
        };
        let mut args = Vec::new();
        if self.peek().tok != Tok::Semi {
            loop {
                args.push(self.parse_operand()?);
                if self.peek().tok == Tok::Comma {
                    self.next();
                } else {
                    break;
                }
            }
        }
        Ok((callee, args))
    }

    fn parse_field_ref(&mut self) -> Result<(String, String), ParseAbort> {
        let (class, _) = self.expect_ident("class name")?;
        self.expect(Tok::Dot)?;
        let (field, _) = self.expect_ident("field name")?;
        Ok((class, field))
    }

    fn parse_operand(&mut self) -> Result<Operand, ParseAbort> {
        match self.peek().tok.clone() {
            Tok::Int(v) => {
                self.next();
                Ok(Operand::Literal(Literal::Int(v)))
            }
            Tok::Str(s) => {
                self.next();
                Ok(Operand::Literal(Literal::Str(s)))
            }
            Tok::Ident(name) => {
                self.next();
                Ok(match name.as_str() {
                    "this" => Operand::This,
                    "true" => Operand::Literal(Literal::Bool(true)),
                    "false" => Operand::Literal(Literal::Bool(false)),
                    _ => Operand::Local(name),
                })
            }
            found => Err(self.syntax_error(format!("expected an operand, found {found}"))),
        }
    }
}

/// Marker for aborted productions; the diagnostic is already recorded.
struct ParseAbort;

fn build_method(
    signature: Signature,
    param_names: Vec<String>,
    raw_blocks: Vec<RawBlock>,
    try_regions: Vec<(TryRegion, Token)>,
    parser: &mut Parser,
) -> MethodIR {
    let mut statements = Vec::new();
    let mut blocks = Vec::new();
    for raw in &raw_blocks {
        let start = statements.len();
        statements.extend(raw.stmts.iter().cloned());
        blocks.push(BlockInfo {
            label: raw.label.clone(),
            start,
            end: statements.len(),
        });
    }
    let method = MethodIR {
        signature,
        param_names,
        statements,
        blocks,
        try_regions: try_regions.iter().map(|(r, _)| r.clone()).collect(),
    };
    validate_method(&method, &raw_blocks, &try_regions, parser);
    method
}

fn validate_method(
    method: &MethodIR,
    raw_blocks: &[RawBlock],
    try_regions: &[(TryRegion, Token)],
    parser: &mut Parser,
) {
    let sig = method.signature.display_string();
    let mut semantic = |line: usize, col: usize, message: String| {
        parser.diagnostics.push(Diagnostic {
            kind: DiagnosticKind::Semantic,
            line,
            col,
            message: format!("{message} (in {sig})"),
        });
    };

    if raw_blocks.is_empty() {
        semantic(0, 0, "method body has no blocks".into());
        return;
    }
    if raw_blocks[0].label != "entry" {
        semantic(
            raw_blocks[0].label_line,
            raw_blocks[0].label_col,
            format!(
                "first block must be labeled `entry`, found `{}`",
                raw_blocks[0].label
            ),
        );
    }
    let mut seen = std::collections::BTreeSet::new();
    for raw in raw_blocks {
        if !seen.insert(raw.label.clone()) {
            semantic(
                raw.label_line,
                raw.label_col,
                format!("duplicate block label `{}`", raw.label),
            );
        }
    }
    // Every block except the last must end in a terminator; no block may
    // contain a terminator before its final statement.
    for (i, raw) in raw_blocks.iter().enumerate() {
        let is_last = i + 1 == raw_blocks.len();
        if raw.stmts.is_empty() {
            if !is_last {
                semantic(
                    raw.label_line,
                    raw.label_col,
                    format!("non-terminal block `{}` is empty", raw.label),
                );
            }
            continue;
        }
        for stmt in &raw.stmts[..raw.stmts.len() - 1] {
            if stmt.is_terminator() {
                semantic(
                    raw.label_line,
                    raw.label_col,
                    format!(
                        "terminator `{}` in the middle of block `{}`",
                        stmt.kind_name(),
                        raw.label
                    ),
                );
            }
        }
        if !is_last && !raw.stmts.last().unwrap().is_terminator() {
            semantic(
                raw.label_line,
                raw.label_col,
                format!(
                    "non-terminal block `{}` must end in branch/goto/return/throw",
                    raw.label
                ),
            );
        }
    }

    let label_exists = |label: &str| raw_blocks.iter().any(|b| b.label == label);
    for raw in raw_blocks {
        for stmt in &raw.stmts {
            match &stmt.kind {
                StatementKind::Branch {
                    then_label,
                    else_label,
                    ..
                } => {
                    for label in [then_label, else_label] {
                        if !label_exists(label) {
                            semantic(
                                raw.label_line,
                                raw.label_col,
                                format!("branch target `{label}` does not exist"),
                            );
                        }
                    }
                }
                StatementKind::Goto { label } => {
                    if !label_exists(label) {
                        semantic(
                            raw.label_line,
                            raw.label_col,
                            format!("goto target `{label}` does not exist"),
                        );
                    }
                }
                StatementKind::ParamBind { index, .. } => {
                    if *index >= method.signature.param_types.len() {
                        semantic(
                            raw.label_line,
                            raw.label_col,
                            format!(
                                "param index {index} out of range for {} parameter(s)",
                                method.signature.param_types.len()
                            ),
                        );
                    }
                }
                StatementKind::Return { value } => {
                    let is_void = method.signature.return_type == Type::Void;
                    if is_void && value.is_some() {
                        semantic(
                            raw.label_line,
                            raw.label_col,
                            "void method returns a value".into(),
                        );
                    }
                    if !is_void && value.is_none() {
                        semantic(
                            raw.label_line,
                            raw.label_col,
                            "non-void method returns without a value".into(),
                        );
                    }
                }
                _ => {}
            }
        }
    }

    for (region, token) in try_regions {
        for label in [
            &region.start_label,
            &region.end_label,
            &region.handler_label,
        ] {
            if !label_exists(label) {
                semantic(
                    token.line,
                    token.col,
                    format!("try region references unknown block `{label}`"),
                );
            }
        }
        let start = raw_blocks
            .iter()
            .position(|b| b.label == region.start_label);
        let end = raw_blocks.iter().position(|b| b.label == region.end_label);
        if let (Some(s), Some(e)) = (start, end) {
            if s > e {
                semantic(
                    token.line,
                    token.col,
                    format!(
                        "try region `{}..{}` is reversed",
                        region.start_label, region.end_label
                    ),
                );
            }
        }
    }

    // Definedness lint: every used local must have a def with a smaller
    // statement id somewhere in the method.
    let mut defined_at: std::collections::BTreeMap<&str, usize> = std::collections::BTreeMap::new();
    for stmt in &method.statements {
        if let Some(def) = stmt.def() {
            defined_at.entry(def).or_insert(stmt.id);
        }
    }
    for raw in raw_blocks {
        for stmt in &raw.stmts {
            for operand in stmt.uses() {
                if let Some(local) = operand.as_local() {
                    match defined_at.get(local) {
                        Some(&first_def) if first_def < stmt.id => {}
                        _ => semantic(
                            raw.label_line,
                            raw.label_col,
                            format!("use of undefined local `{local}`"),
                        ),
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::pretty_print;

    const MINIMAL: &str = r#"
class C {
  field int f;
  method public int inc(int a) {
  entry:
    p0 = param 0;
    r = binop add p0, #1;
    return r;
  }
}
"#;

    #[test]
    fn minimal_program_parses_to_three_statements() {
        let classes = parse_module(MINIMAL).expect("parse");
        assert_eq!(classes.len(), 1);
        let class = &classes[0];
        assert_eq!(class.name, "C");
        assert_eq!(class.fields.len(), 1);
        let method = class.methods.values().next().unwrap();
        assert_eq!(method.signature.display_string(), "C.inc(int):int");
        assert_eq!(method.statements.len(), 3);
        assert_eq!(method.blocks.len(), 1);
        assert_eq!(method.blocks[0].label, "entry");
        assert_eq!(method.params(), vec!["p0"]);
    }

    #[test]
    fn goto_to_missing_label_is_a_semantic_error() {
        let text = r#"
class C {
  method public void run() {
  entry:
    goto missing;
  }
}
"#;
        let errs = parse_module(text).expect_err("should fail");
        assert!(errs
            .iter()
            .any(|d| d.kind == DiagnosticKind::Semantic && d.message.contains("missing")));
    }

    #[test]
    fn statement_recovery_reports_multiple_errors() {
        let text = r#"
class C {
  method public void run() {
  entry:
    x = frobnicate y;
    z = blarg w;
    return;
  }
}
"#;
        let errs = parse_module(text).expect_err("should fail");
        assert!(errs.len() >= 2, "expected two diagnostics, got {errs:?}");
    }

    #[test]
    fn non_terminal_block_requires_terminator() {
        let text = r#"
class C {
  method public int f() {
  entry:
    a = const #1;
  next:
    return a;
  }
}
"#;
        let errs = parse_module(text).expect_err("should fail");
        assert!(errs
            .iter()
            .any(|d| d.message.contains("branch/goto/return/throw")));
    }

    #[test]
    fn undefined_local_is_linted() {
        let text = r#"
class C {
  method public int f() {
  entry:
    r = binop add ghost, #1;
    return r;
  }
}
"#;
        let errs = parse_module(text).expect_err("should fail");
        assert!(errs.iter().any(|d| d.message.contains("ghost")));
    }

    #[test]
    fn entry_label_is_mandatory() {
        let text = r#"
class C {
  method public void f() {
  start:
    return;
  }
}
"#;
        let errs = parse_module(text).expect_err("should fail");
        assert!(errs.iter().any(|d| d.message.contains("entry")));
    }

    #[test]
    fn try_region_and_all_statement_kinds_round_trip() {
        let text = r#"
class Box {
  field int value;
  field string name;
  method public int work(int a, long b) {
  entry:
    p0 = param 0;
    p1 = param 1;
    c0 = const #42;
    s0 = const "hello";
    t0 = const true;
    sum = binop add p0, c0;
    cmp = relop lt sum, #100;
    obj = new Box;
    v = getfield obj, Box.value;
    putfield obj, Box.value, sum;
    r = call Box.helper(int):int sum;
    call Box.log(string):void s0;
    branch cmp, ok, bad;
  ok:
    return r;
  bad:
    throw Overflow;
  handler:
    goto ok;
    try entry..bad catch Overflow -> handler;
  }
  method public int helper(int x) {
  entry:
    p0 = param 0;
    return p0;
  }
  method public void log(string msg) {
  entry:
    return;
  }
}
"#;
        let classes = parse_module(text).expect("parse");
        let printed = pretty_print(&classes);
        let reparsed = parse_module(&printed).expect("reparse");
        assert_eq!(classes, reparsed);
    }

    #[test]
    fn duplicate_method_signature_is_rejected() {
        let text = r#"
class C {
  method public int f(int a) {
  entry:
    p = param 0;
    return p;
  }
  method private int f(int b) {
  entry:
    p = param 0;
    return p;
  }
}
"#;
        let errs = parse_module(text).expect_err("should fail");
        assert!(errs.iter().any(|d| d.message.contains("duplicate method")));
    }
}
