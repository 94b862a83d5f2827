//! MVIL model types.
//!
//! MVIL is a line-oriented three-address IR: a module is a set of classes,
//! each class declares typed fields and methods, and every method body is a
//! list of labeled basic blocks whose statements carry at most one defined
//! local. The first block of a method is always labeled `entry`, and every
//! block except the last must end in `branch`, `goto`, `return`, or `throw`.
//! Try regions are declared after the blocks they cover.

pub mod loader;
pub mod parser;

use std::fmt;

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Primitive and class types. The only widening conversion is int -> long.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Type {
    Int,
    Long,
    Bool,
    Str,
    Void,
    Class(String),
}

impl Type {
    /// True when a value of `self` may be used where `target` is expected
    /// without an explicit cast (identity or int -> long widening).
    pub fn widens_to(&self, target: &Type) -> bool {
        self == target || (*self == Type::Int && *target == Type::Long)
    }

    pub fn from_name(name: &str) -> Type {
        match name {
            "int" => Type::Int,
            "long" => Type::Long,
            "bool" => Type::Bool,
            "string" => Type::Str,
            "void" => Type::Void,
            other => Type::Class(other.to_string()),
        }
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Int => write!(f, "int"),
            Type::Long => write!(f, "long"),
            Type::Bool => write!(f, "bool"),
            Type::Str => write!(f, "string"),
            Type::Void => write!(f, "void"),
            Type::Class(name) => write!(f, "{name}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Visibility {
    Public,
    Private,
}

impl fmt::Display for Visibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Visibility::Public => write!(f, "public"),
            Visibility::Private => write!(f, "private"),
        }
    }
}

/// Fully qualified method signature. Two methods are the same declaration
/// only when every component matches; call sites omit visibility, which
/// defaults to public when a signature is read back from its string form.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Signature {
    pub class_name: String,
    pub method_name: String,
    pub param_types: Vec<Type>,
    pub return_type: Type,
    pub visibility: Visibility,
}

impl Signature {
    /// Canonical string form `Class.method(t1,t2):ret`, visibility excluded.
    pub fn display_string(&self) -> String {
        let params: Vec<String> = self.param_types.iter().map(|t| t.to_string()).collect();
        format!(
            "{}.{}({}):{}",
            self.class_name,
            self.method_name,
            params.join(","),
            self.return_type
        )
    }

    /// Parses the canonical string form produced by [`display_string`].
    pub fn parse_str(text: &str) -> Option<Signature> {
        let (head, ret) = text.rsplit_once(':')?;
        let open = head.find('(')?;
        if !head.ends_with(')') {
            return None;
        }
        let (qualified, params_raw) = (&head[..open], &head[open + 1..head.len() - 1]);
        let (class_name, method_name) = qualified.split_once('.')?;
        if class_name.is_empty() || method_name.is_empty() || ret.is_empty() {
            return None;
        }
        let param_types = if params_raw.is_empty() {
            Vec::new()
        } else {
            params_raw
                .split(',')
                .map(|p| Type::from_name(p.trim()))
                .collect()
        };
        Some(Signature {
            class_name: class_name.to_string(),
            method_name: method_name.to_string(),
            param_types,
            return_type: Type::from_name(ret),
            visibility: Visibility::Public,
        })
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.display_string())
    }
}

/// Literal operand: integers are written `#n`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Literal {
    Int(i64),
    Str(String),
    Bool(bool),
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Int(v) => write!(f, "#{v}"),
            Literal::Str(s) => write!(f, "\"{s}\""),
            Literal::Bool(b) => write!(f, "{b}"),
        }
    }
}

/// Operand of a statement: a local, the implicit receiver, or a literal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Operand {
    Local(String),
    This,
    Literal(Literal),
}

impl Operand {
    pub fn as_local(&self) -> Option<&str> {
        match self {
            Operand::Local(name) => Some(name),
            _ => None,
        }
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Local(name) => write!(f, "{name}"),
            Operand::This => write!(f, "this"),
            Operand::Literal(lit) => write!(f, "{lit}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BinOpKind {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    And,
    Or,
    Xor,
    Shl,
    Shr,
    Concat,
}

impl BinOpKind {
    pub fn name(&self) -> &'static str {
        match self {
            BinOpKind::Add => "add",
            BinOpKind::Sub => "sub",
            BinOpKind::Mul => "mul",
            BinOpKind::Div => "div",
            BinOpKind::Rem => "rem",
            BinOpKind::And => "and",
            BinOpKind::Or => "or",
            BinOpKind::Xor => "xor",
            BinOpKind::Shl => "shl",
            BinOpKind::Shr => "shr",
            BinOpKind::Concat => "concat",
        }
    }

    pub fn from_name(name: &str) -> Option<BinOpKind> {
        Some(match name {
            "add" => BinOpKind::Add,
            "sub" => BinOpKind::Sub,
            "mul" => BinOpKind::Mul,
            "div" => BinOpKind::Div,
            "rem" => BinOpKind::Rem,
            "and" => BinOpKind::And,
            "or" => BinOpKind::Or,
            "xor" => BinOpKind::Xor,
            "shl" => BinOpKind::Shl,
            "shr" => BinOpKind::Shr,
            "concat" => BinOpKind::Concat,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RelOpKind {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl RelOpKind {
    pub fn name(&self) -> &'static str {
        match self {
            RelOpKind::Lt => "lt",
            RelOpKind::Le => "le",
            RelOpKind::Gt => "gt",
            RelOpKind::Ge => "ge",
            RelOpKind::Eq => "eq",
            RelOpKind::Ne => "ne",
        }
    }

    pub fn from_name(name: &str) -> Option<RelOpKind> {
        Some(match name {
            "lt" => RelOpKind::Lt,
            "le" => RelOpKind::Le,
            "gt" => RelOpKind::Gt,
            "ge" => RelOpKind::Ge,
            "eq" => RelOpKind::Eq,
            "ne" => RelOpKind::Ne,
            _ => return None,
        })
    }

    /// Logical negation of the comparison.
    pub fn negate(&self) -> RelOpKind {
        match self {
            RelOpKind::Lt => RelOpKind::Ge,
            RelOpKind::Ge => RelOpKind::Lt,
            RelOpKind::Le => RelOpKind::Gt,
            RelOpKind::Gt => RelOpKind::Le,
            RelOpKind::Eq => RelOpKind::Ne,
            RelOpKind::Ne => RelOpKind::Eq,
        }
    }
}

/// One MVIL statement. `id` is the ordinal of the statement within its
/// method, counted across blocks in declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Statement {
    pub id: usize,
    pub kind: StatementKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum StatementKind {
    ParamBind {
        def: String,
        index: usize,
    },
    ConstAssign {
        def: String,
        value: Literal,
    },
    BinOp {
        def: String,
        op: BinOpKind,
        lhs: Operand,
        rhs: Operand,
    },
    RelOpAssign {
        def: String,
        op: RelOpKind,
        lhs: Operand,
        rhs: Operand,
    },
    Call {
        def: Option<String>,
        callee: Signature,
        args: Vec<Operand>,
    },
    NewObject {
        def: String,
        class: String,
    },
    FieldLoad {
        def: String,
        object: Operand,
        class: String,
        field: String,
    },
    FieldStore {
        object: Operand,
        class: String,
        field: String,
        value: Operand,
    },
    Return {
        value: Option<Operand>,
    },
    Throw {
        exception: String,
    },
    Branch {
        cond: Operand,
        then_label: String,
        else_label: String,
    },
    Goto {
        label: String,
    },
}

impl Statement {
    /// Local defined by this statement, when the kind defines one.
    pub fn def(&self) -> Option<&str> {
        match &self.kind {
            StatementKind::ParamBind { def, .. }
            | StatementKind::ConstAssign { def, .. }
            | StatementKind::BinOp { def, .. }
            | StatementKind::RelOpAssign { def, .. }
            | StatementKind::NewObject { def, .. }
            | StatementKind::FieldLoad { def, .. } => Some(def),
            StatementKind::Call { def, .. } => def.as_deref(),
            _ => None,
        }
    }

    /// Operands read by this statement, in syntactic order.
    pub fn uses(&self) -> Vec<&Operand> {
        match &self.kind {
            StatementKind::BinOp { lhs, rhs, .. } | StatementKind::RelOpAssign { lhs, rhs, .. } => {
                vec![lhs, rhs]
            }
            StatementKind::Call { args, .. } => args.iter().collect(),
            StatementKind::FieldLoad { object, .. } => vec![object],
            StatementKind::FieldStore { object, value, .. } => vec![object, value],
            StatementKind::Return { value } => value.iter().collect(),
            StatementKind::Branch { cond, .. } => vec![cond],
            _ => Vec::new(),
        }
    }

    /// True for statements that end a basic block.
    pub fn is_terminator(&self) -> bool {
        matches!(
            self.kind,
            StatementKind::Return { .. }
                | StatementKind::Throw { .. }
                | StatementKind::Branch { .. }
                | StatementKind::Goto { .. }
        )
    }

    pub(crate) fn kind_name(&self) -> &'static str {
        match &self.kind {
            StatementKind::ParamBind { .. } => "param_bind",
            StatementKind::ConstAssign { .. } => "const_assign",
            StatementKind::BinOp { .. } => "binop",
            StatementKind::RelOpAssign { .. } => "relop_assign",
            StatementKind::Call { .. } => "call",
            StatementKind::NewObject { .. } => "new_object",
            StatementKind::FieldLoad { .. } => "field_load",
            StatementKind::FieldStore { .. } => "field_store",
            StatementKind::Return { .. } => "return",
            StatementKind::Throw { .. } => "throw",
            StatementKind::Branch { .. } => "branch",
            StatementKind::Goto { .. } => "goto",
        }
    }
}

/// Label plus the half-open statement range of a block inside the flat
/// statement list of its method.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockInfo {
    pub label: String,
    pub start: usize,
    pub end: usize,
}

/// Exception region: covers blocks `start_label..=end_label` in declaration
/// order and routes a thrown `exception` to `handler_label`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TryRegion {
    pub start_label: String,
    pub end_label: String,
    pub exception: String,
    pub handler_label: String,
}

/// A method body in flattened form: `statements` holds every statement in
/// declaration order and `blocks` slices it into labeled basic blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodIR {
    pub signature: Signature,
    pub param_names: Vec<String>,
    pub statements: Vec<Statement>,
    pub blocks: Vec<BlockInfo>,
    pub try_regions: Vec<TryRegion>,
}

impl MethodIR {
    /// Ordered local names bound by `param_bind` statements.
    pub fn params(&self) -> Vec<&str> {
        self.statements
            .iter()
            .filter_map(|s| match &s.kind {
                StatementKind::ParamBind { def, .. } => Some(def.as_str()),
                _ => None,
            })
            .collect()
    }

    /// Index of the block containing statement `id`.
    pub fn block_of(&self, id: usize) -> usize {
        self.blocks
            .iter()
            .position(|b| id >= b.start && id < b.end)
            .unwrap_or(0)
    }

    pub fn block_index(&self, label: &str) -> Option<usize> {
        self.blocks.iter().position(|b| b.label == label)
    }

    pub fn block_statements(&self, block: usize) -> &[Statement] {
        let info = &self.blocks[block];
        &self.statements[info.start..info.end]
    }

    /// Distinct `class.field` names read by this method.
    pub fn fields_read(&self) -> BTreeSet<(String, String)> {
        self.statements
            .iter()
            .filter_map(|s| match &s.kind {
                StatementKind::FieldLoad { class, field, .. } => {
                    Some((class.clone(), field.clone()))
                }
                _ => None,
            })
            .collect()
    }

    /// Distinct `class.field` names written by this method.
    pub fn fields_written(&self) -> BTreeSet<(String, String)> {
        self.statements
            .iter()
            .filter_map(|s| match &s.kind {
                StatementKind::FieldStore { class, field, .. } => {
                    Some((class.clone(), field.clone()))
                }
                _ => None,
            })
            .collect()
    }

    /// Signatures of every call site in the body, with statement ids.
    pub fn call_sites(&self) -> Vec<(usize, &Signature)> {
        self.statements
            .iter()
            .filter_map(|s| match &s.kind {
                StatementKind::Call { callee, .. } => Some((s.id, callee)),
                _ => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldDef {
    pub name: String,
    pub ty: Type,
}

/// Parsed class: fields plus methods keyed by `(name, param types)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassDef {
    pub name: String,
    pub fields: Vec<FieldDef>,
    pub methods: BTreeMap<(String, Vec<Type>), MethodIR>,
}

impl ClassDef {
    pub fn field_type(&self, field: &str) -> Option<&Type> {
        self.fields.iter().find(|f| f.name == field).map(|f| &f.ty)
    }

    pub fn methods_ordered(&self) -> impl Iterator<Item = &MethodIR> {
        self.methods.values()
    }
}

/// Parsed `X.Y.Z` version.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Version {
    pub major: u64,
    pub minor: u64,
    pub patch: u64,
}

impl Version {
    pub fn parse(text: &str) -> Option<Version> {
        let mut parts = text.trim().split('.');
        let major = parts.next()?.parse().ok()?;
        let minor = parts.next()?.parse().ok()?;
        let patch = parts.next()?.parse().ok()?;
        if parts.next().is_some() {
            return None;
        }
        Some(Version {
            major,
            minor,
            patch,
        })
    }
}

impl fmt::Display for Version {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}.{}", self.major, self.minor, self.patch)
    }
}

/// One fully loaded and validated version of the library.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModuleSnapshot {
    pub version: Version,
    pub classes: BTreeMap<String, ClassDef>,
}

impl ModuleSnapshot {
    /// Resolves a call-site signature to a method declared in this snapshot.
    /// Returns `None` for external callees (class not present here).
    pub fn resolve(&self, callee: &Signature) -> Option<&MethodIR> {
        self.classes
            .get(&callee.class_name)?
            .methods
            .get(&(callee.method_name.clone(), callee.param_types.clone()))
    }

    pub fn is_external(&self, callee: &Signature) -> bool {
        self.resolve(callee).is_none()
    }

    pub fn method(&self, sig: &Signature) -> Option<&MethodIR> {
        let m = self.resolve(sig)?;
        (m.signature == *sig).then_some(m)
    }

    /// Every public method of the snapshot, sorted by signature.
    pub fn public_methods(&self) -> Vec<&MethodIR> {
        let mut out: Vec<&MethodIR> = self
            .classes
            .values()
            .flat_map(|c| c.methods_ordered())
            .filter(|m| m.signature.visibility == Visibility::Public)
            .collect();
        out.sort_by(|a, b| a.signature.cmp(&b.signature));
        out
    }

    pub fn class_field_exists(&self, class: &str, field: &str) -> bool {
        self.classes
            .get(class)
            .map(|c| c.field_type(field).is_some())
            .unwrap_or(false)
    }
}

/// Pretty-prints a list of classes back to MVIL source.
///
/// The printer is the inverse of the parser up to whitespace: reparsing its
/// output yields a structurally equal model, which the round-trip tests rely
/// on.
pub fn pretty_print(classes: &[ClassDef]) -> String {
    let mut out = String::new();
    for class in classes {
        out.push_str(&format!("class {} {{\n", class.name));
        for field in &class.fields {
            out.push_str(&format!("  field {} {};\n", field.ty, field.name));
        }
        for method in class.methods.values() {
            print_method(&mut out, method);
        }
        out.push_str("}\n");
    }
    out
}

fn print_method(out: &mut String, method: &MethodIR) {
    let sig = &method.signature;
    let params: Vec<String> = sig
        .param_types
        .iter()
        .zip(method.param_names.iter())
        .map(|(t, n)| format!("{t} {n}"))
        .collect();
    out.push_str(&format!(
        "  method {} {} {}({}) {{\n",
        sig.visibility,
        sig.return_type,
        sig.method_name,
        params.join(", ")
    ));
    for block in &method.blocks {
        out.push_str(&format!("  {}:\n", block.label));
        for stmt in &method.statements[block.start..block.end] {
            out.push_str(&format!("    {};\n", print_statement(stmt)));
        }
    }
    for region in &method.try_regions {
        out.push_str(&format!(
            "    try {}..{} catch {} -> {};\n",
            region.start_label, region.end_label, region.exception, region.handler_label
        ));
    }
    out.push_str("  }\n");
}

fn print_statement(stmt: &Statement) -> String {
    match &stmt.kind {
        StatementKind::ParamBind { def, index } => format!("{def} = param {index}"),
        StatementKind::ConstAssign { def, value } => format!("{def} = const {value}"),
        StatementKind::BinOp { def, op, lhs, rhs } => {
            format!("{def} = binop {} {lhs}, {rhs}", op.name())
        }
        StatementKind::RelOpAssign { def, op, lhs, rhs } => {
            format!("{def} = relop {} {lhs}, {rhs}", op.name())
        }
        StatementKind::Call { def, callee, args } => {
            let args: Vec<String> = args.iter().map(|a| a.to_string()).collect();
            let call = if args.is_empty() {
                format!("call {}", callee.display_string())
            } else {
                format!("call {} {}", callee.display_string(), args.join(", "))
            };
            match def {
                Some(d) => format!("{d} = {call}"),
                None => call,
            }
        }
        StatementKind::NewObject { def, class } => format!("{def} = new {class}"),
        StatementKind::FieldLoad {
            def,
            object,
            class,
            field,
        } => format!("{def} = getfield {object}, {class}.{field}"),
        StatementKind::FieldStore {
            object,
            class,
            field,
            value,
        } => format!("putfield {object}, {class}.{field}, {value}"),
        StatementKind::Return { value } => match value {
            Some(v) => format!("return {v}"),
            None => "return".to_string(),
        },
        StatementKind::Throw { exception } => format!("throw {exception}"),
        StatementKind::Branch {
            cond,
            then_label,
            else_label,
        } => format!("branch {cond}, {then_label}, {else_label}"),
        StatementKind::Goto { label } => format!("goto {label}"),
    }
}
