//! Abstract syntax of the core language: integers, booleans, functional
//! arrays, array quantifiers and monoid aggregates.

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

/// Stable identifier of a statement inside a [`Program`].
#[derive(
    Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct ControlPoint(pub u32);

impl fmt::Display for ControlPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Type {
    Int,
    Bool,
    Array(Box<Type>),
}

impl Type {
    pub fn array_of(elem: Type) -> Type {
        Type::Array(Box::new(elem))
    }

    pub fn elem(&self) -> Option<&Type> {
        match self {
            Type::Array(e) => Some(e),
            _ => None,
        }
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Int => write!(f, "Int"),
            Type::Bool => write!(f, "Bool"),
            Type::Array(e) => write!(f, "Array {e}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UnOp {
    Not,
    Neg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
    Add,
    Sub,
    Mul,
    Div,
    Mod,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "%",
        }
    }

    pub fn is_arith(self) -> bool {
        matches!(
            self,
            BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Mod
        )
    }

    pub fn is_order(self) -> bool {
        matches!(self, BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge)
    }
}

/// Two-parameter predicate `lambda(value, index). body`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Lambda {
    pub value_param: String,
    pub index_param: String,
    pub body: Box<Expr>,
}

impl Lambda {
    pub fn new(value_param: &str, index_param: &str, body: Expr) -> Self {
        Lambda {
            value_param: value_param.to_string(),
            index_param: index_param.to_string(),
            body: Box::new(body),
        }
    }

    /// Substitutes the two parameters with the given expressions.
    pub fn apply(&self, value: &Expr, index: &Expr) -> Expr {
        let mut map = std::collections::BTreeMap::new();
        map.insert(self.value_param.clone(), value.clone());
        map.insert(self.index_param.clone(), index.clone());
        self.body.substitute(&map)
    }

    /// Equality modulo renaming of the parameters.
    pub fn alpha_eq(&self, other: &Lambda) -> bool {
        let v = Expr::Var("\u{1}v".into());
        let i = Expr::Var("\u{1}i".into());
        self.apply(&v, &i) == other.apply(&v, &i)
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut fv = self.body.free_vars();
        fv.remove(&self.value_param);
        fv.remove(&self.index_param);
        fv
    }
}

/// Built-in monoid homomorphisms usable in aggregates.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HomId {
    Sum,
    Max,
    Min,
    Count(Lambda),
}

impl HomId {
    pub fn keyword(&self) -> &'static str {
        match self {
            HomId::Sum => "\\sum",
            HomId::Max => "\\max",
            HomId::Min => "\\min",
            HomId::Count(_) => "\\count",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Quant {
    Forall,
    Exists,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Expr {
    Int(BigInt),
    Bool(bool),
    /// Neutral element of `\max`; below every integer.
    NegInf,
    /// Neutral element of `\min`; above every integer.
    PosInf,
    Var(String),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Select(Box<Expr>, Box<Expr>),
    Store(Box<Expr>, Box<Expr>, Box<Expr>),
    /// `const(v, n)`: the array that is `v` everywhere. `n` is documentation only.
    ConstArray(Box<Expr>, Box<Expr>),
    Quantified {
        kind: Quant,
        array: Box<Expr>,
        lo: Box<Expr>,
        hi: Box<Expr>,
        pred: Lambda,
    },
    Aggregate {
        hom: HomId,
        array: Box<Expr>,
        lo: Box<Expr>,
        hi: Box<Expr>,
    },
}

impl Expr {
    pub fn int(v: i64) -> Expr {
        Expr::Int(BigInt::from(v))
    }

    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn not(e: Expr) -> Expr {
        Expr::Unary(UnOp::Not, Box::new(e))
    }

    pub fn bin(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Binary(op, Box::new(l), Box::new(r))
    }

    pub fn eq(l: Expr, r: Expr) -> Expr {
        Expr::bin(BinOp::Eq, l, r)
    }

    pub fn and(l: Expr, r: Expr) -> Expr {
        Expr::bin(BinOp::And, l, r)
    }

    pub fn or(l: Expr, r: Expr) -> Expr {
        Expr::bin(BinOp::Or, l, r)
    }

    pub fn add(l: Expr, r: Expr) -> Expr {
        Expr::bin(BinOp::Add, l, r)
    }

    pub fn sub(l: Expr, r: Expr) -> Expr {
        Expr::bin(BinOp::Sub, l, r)
    }

    pub fn mul(l: Expr, r: Expr) -> Expr {
        Expr::bin(BinOp::Mul, l, r)
    }

    pub fn select(a: Expr, i: Expr) -> Expr {
        Expr::Select(Box::new(a), Box::new(i))
    }

    pub fn store(a: Expr, i: Expr, v: Expr) -> Expr {
        Expr::Store(Box::new(a), Box::new(i), Box::new(v))
    }

    pub fn const_array(v: Expr, n: Expr) -> Expr {
        Expr::ConstArray(Box::new(v), Box::new(n))
    }

    pub fn quantified(kind: Quant, array: Expr, lo: Expr, hi: Expr, pred: Lambda) -> Expr {
        Expr::Quantified {
            kind,
            array: Box::new(array),
            lo: Box::new(lo),
            hi: Box::new(hi),
            pred,
        }
    }

    pub fn aggregate(hom: HomId, array: Expr, lo: Expr, hi: Expr) -> Expr {
        Expr::Aggregate {
            hom,
            array: Box::new(array),
            lo: Box::new(lo),
            hi: Box::new(hi),
        }
    }

    /// Conjunction of a list; `true` when empty.
    pub fn conj(parts: impl IntoIterator<Item = Expr>) -> Expr {
        let mut it = parts.into_iter();
        match it.next() {
            None => Expr::Bool(true),
            Some(first) => it.fold(first, Expr::and),
        }
    }

    /// Flattens nested `&&` into a list of conjuncts.
    pub fn conjuncts(&self) -> Vec<Expr> {
        match self {
            Expr::Binary(BinOp::And, l, r) => {
                let mut v = l.conjuncts();
                v.extend(r.conjuncts());
                v
            }
            Expr::Bool(true) => vec![],
            e => vec![e.clone()],
        }
    }

    /// Variables or integer/boolean literals.
    pub fn is_atom(&self) -> bool {
        match self {
            Expr::Int(_) | Expr::Bool(_) | Expr::Var(_) | Expr::NegInf | Expr::PosInf => true,
            Expr::Unary(UnOp::Neg, e) => matches!(**e, Expr::Int(_)),
            _ => false,
        }
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            Expr::Var(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<&BigInt> {
        match self {
            Expr::Int(v) => Some(v),
            _ => None,
        }
    }

    /// Whether the node is one of the constructs that normalization confines
    /// to the right-hand side of simple assignments.
    pub fn is_special(&self) -> bool {
        matches!(
            self,
            Expr::Select(..) | Expr::Store(..) | Expr::Quantified { .. } | Expr::Aggregate { .. }
        )
    }

    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Int(_) | Expr::Bool(_) | Expr::NegInf | Expr::PosInf | Expr::Var(_) => vec![],
            Expr::Unary(_, e) => vec![e],
            Expr::Binary(_, l, r) => vec![l, r],
            Expr::Select(a, i) => vec![a, i],
            Expr::Store(a, i, v) => vec![a, i, v],
            Expr::ConstArray(v, n) => vec![v, n],
            Expr::Quantified { array, lo, hi, .. } | Expr::Aggregate { array, lo, hi, .. } => {
                vec![array, lo, hi]
            }
        }
    }

    /// Free program variables (lambda parameters are bound).
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free_vars(&mut out);
        out
    }

    fn collect_free_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Quantified { pred, .. } => {
                for c in self.children() {
                    c.collect_free_vars(out);
                }
                out.extend(pred.free_vars());
            }
            Expr::Aggregate {
                hom: HomId::Count(pred),
                ..
            } => {
                for c in self.children() {
                    c.collect_free_vars(out);
                }
                out.extend(pred.free_vars());
            }
            _ => {
                for c in self.children() {
                    c.collect_free_vars(out);
                }
            }
        }
    }

    pub fn mentions(&self, var: &str) -> bool {
        self.free_vars().contains(var)
    }

    /// Capture-avoiding only in the sense that lambda parameters shadow the map.
    pub fn substitute(&self, map: &std::collections::BTreeMap<String, Expr>) -> Expr {
        let sub = |e: &Expr| Box::new(e.substitute(map));
        match self {
            Expr::Var(v) => map.get(v).cloned().unwrap_or_else(|| self.clone()),
            Expr::Int(_) | Expr::Bool(_) | Expr::NegInf | Expr::PosInf => self.clone(),
            Expr::Unary(op, e) => Expr::Unary(*op, sub(e)),
            Expr::Binary(op, l, r) => Expr::Binary(*op, sub(l), sub(r)),
            Expr::Select(a, i) => Expr::Select(sub(a), sub(i)),
            Expr::Store(a, i, v) => Expr::Store(sub(a), sub(i), sub(v)),
            Expr::ConstArray(v, n) => Expr::ConstArray(sub(v), sub(n)),
            Expr::Quantified {
                kind,
                array,
                lo,
                hi,
                pred,
            } => Expr::Quantified {
                kind: *kind,
                array: sub(array),
                lo: sub(lo),
                hi: sub(hi),
                pred: pred.substitute_free(map),
            },
            Expr::Aggregate { hom, array, lo, hi } => Expr::Aggregate {
                hom: match hom {
                    HomId::Count(p) => HomId::Count(p.substitute_free(map)),
                    h => h.clone(),
                },
                array: sub(array),
                lo: sub(lo),
                hi: sub(hi),
            },
        }
    }

    /// Renames free variables.
    pub fn rename(&self, renaming: &std::collections::BTreeMap<String, String>) -> Expr {
        let map = renaming
            .iter()
            .map(|(k, v)| (k.clone(), Expr::Var(v.clone())))
            .collect();
        self.substitute(&map)
    }

    /// Whether any node satisfies `pred` (not descending into lambda bodies).
    pub fn any(&self, pred: &dyn Fn(&Expr) -> bool) -> bool {
        pred(self) || self.children().into_iter().any(|c| c.any(pred))
    }

    /// Folds products of integer literals, bottom-up.
    pub fn fold_literal_products(&self) -> Expr {
        match self {
            Expr::Binary(op, l, r) => {
                let l = l.fold_literal_products();
                let r = r.fold_literal_products();
                match (op, &l, &r) {
                    (BinOp::Mul, Expr::Int(a), Expr::Int(b)) => Expr::Int(a * b),
                    _ => Expr::Binary(*op, Box::new(l), Box::new(r)),
                }
            }
            Expr::Unary(op, e) => Expr::Unary(*op, Box::new(e.fold_literal_products())),
            _ => self.clone(),
        }
    }
}

impl Lambda {
    fn substitute_free(&self, map: &std::collections::BTreeMap<String, Expr>) -> Lambda {
        let mut inner = map.clone();
        inner.remove(&self.value_param);
        inner.remove(&self.index_param);
        Lambda {
            value_param: self.value_param.clone(),
            index_param: self.index_param.clone(),
            body: Box::new(self.body.substitute(&inner)),
        }
    }
}

/// Where a statement came from.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Provenance {
    /// Present in the program being verified.
    #[default]
    Original,
    /// Ghost-variable initialisation prepended by instrumentation.
    GhostInit,
    /// Part of the replacement block for the statement at `point`.
    Rewrite { point: ControlPoint, rule: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Stmt {
    pub label: ControlPoint,
    pub prov: Provenance,
    /// User-visible marker, written `/*NAME*/` after the statement.
    pub marker: Option<String>,
    pub kind: StmtKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StmtKind {
    Skip,
    Assign { target: String, value: Expr },
    Block(Vec<Stmt>),
    While { cond: Expr, body: Box<Stmt> },
    If {
        cond: Expr,
        then_branch: Box<Stmt>,
        else_branch: Box<Stmt>,
    },
    Assert(Expr),
    Assume(Expr),
}

impl Stmt {
    pub fn new(kind: StmtKind) -> Stmt {
        Stmt {
            label: ControlPoint::default(),
            prov: Provenance::Original,
            marker: None,
            kind,
        }
    }

    pub fn skip() -> Stmt {
        Stmt::new(StmtKind::Skip)
    }

    pub fn assign(target: &str, value: Expr) -> Stmt {
        Stmt::new(StmtKind::Assign {
            target: target.to_string(),
            value,
        })
    }

    pub fn block(stmts: Vec<Stmt>) -> Stmt {
        Stmt::new(StmtKind::Block(stmts))
    }

    pub fn while_loop(cond: Expr, body: Stmt) -> Stmt {
        Stmt::new(StmtKind::While {
            cond,
            body: Box::new(body),
        })
    }

    pub fn if_else(cond: Expr, then_branch: Stmt, else_branch: Stmt) -> Stmt {
        Stmt::new(StmtKind::If {
            cond,
            then_branch: Box::new(then_branch),
            else_branch: Box::new(else_branch),
        })
    }

    pub fn assert(cond: Expr) -> Stmt {
        Stmt::new(StmtKind::Assert(cond))
    }

    pub fn assume(cond: Expr) -> Stmt {
        Stmt::new(StmtKind::Assume(cond))
    }

    pub fn with_marker(mut self, marker: &str) -> Stmt {
        self.marker = Some(marker.to_string());
        self
    }

    /// Direct sub-statements.
    pub fn children(&self) -> Vec<&Stmt> {
        match &self.kind {
            StmtKind::Block(v) => v.iter().collect(),
            StmtKind::While { body, .. } => vec![body],
            StmtKind::If {
                then_branch,
                else_branch,
                ..
            } => vec![then_branch, else_branch],
            _ => vec![],
        }
    }

    pub fn children_mut(&mut self) -> Vec<&mut Stmt> {
        match &mut self.kind {
            StmtKind::Block(v) => v.iter_mut().collect(),
            StmtKind::While { body, .. } => vec![body],
            StmtKind::If {
                then_branch,
                else_branch,
                ..
            } => vec![then_branch, else_branch],
            _ => vec![],
        }
    }

    /// Pre-order traversal.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Stmt)) {
        f(self);
        for c in self.children() {
            c.walk(f);
        }
    }

    pub fn walk_mut(&mut self, f: &mut dyn FnMut(&mut Stmt)) {
        f(self);
        for c in self.children_mut() {
            c.walk_mut(f);
        }
    }

    /// Expressions directly owned by this statement (not by children).
    pub fn exprs(&self) -> Vec<&Expr> {
        match &self.kind {
            StmtKind::Assign { value, .. } => vec![value],
            StmtKind::While { cond, .. } | StmtKind::If { cond, .. } => vec![cond],
            StmtKind::Assert(e) | StmtKind::Assume(e) => vec![e],
            StmtKind::Skip | StmtKind::Block(_) => vec![],
        }
    }

    pub fn max_label(&self) -> u32 {
        let mut m = 0;
        self.walk(&mut |s| m = m.max(s.label.0));
        m
    }

    /// Whether the statement tree contains a loop.
    pub fn has_loop(&self) -> bool {
        let mut found = false;
        self.walk(&mut |s| found |= matches!(s.kind, StmtKind::While { .. }));
        found
    }

    /// Variables assigned anywhere in the tree.
    pub fn assigned_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.walk(&mut |s| {
            if let StmtKind::Assign { target, .. } = &s.kind {
                out.insert(target.clone());
            }
        });
        out
    }

    pub fn find(&self, label: ControlPoint) -> Option<&Stmt> {
        let mut hit = None;
        self.walk(&mut |s| {
            if s.label == label && hit.is_none() {
                hit = Some(s);
            }
        });
        hit
    }
}

/// A typed variable declaration. `input` variables are declared `= nondet`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Decl {
    pub name: String,
    pub ty: Type,
    pub input: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Program {
    pub decls: Vec<Decl>,
    pub body: Stmt,
}

impl Program {
    pub fn new(decls: Vec<Decl>, body: Stmt) -> Program {
        Program { decls, body }
    }

    pub fn decl(&self, name: &str) -> Option<&Decl> {
        self.decls.iter().find(|d| d.name == name)
    }

    pub fn var_type(&self, name: &str) -> Option<&Type> {
        self.decl(name).map(|d| &d.ty)
    }

    pub fn inputs(&self) -> impl Iterator<Item = &Decl> {
        self.decls.iter().filter(|d| d.input)
    }

    /// Assigns labels `0, 1, 2, ...` in pre-order.
    pub fn relabel(&mut self) {
        let mut next = 0u32;
        self.body.walk_mut(&mut |s| {
            s.label = ControlPoint(next);
            next += 1;
        });
    }

    pub fn next_label(&self) -> u32 {
        self.body.max_label() + 1
    }

    /// Labels of all statements, in pre-order.
    pub fn labels(&self) -> Vec<ControlPoint> {
        let mut v = Vec::new();
        self.body.walk(&mut |s| v.push(s.label));
        v
    }

    pub fn find(&self, label: ControlPoint) -> Option<&Stmt> {
        self.body.find(label)
    }

    /// Looks a statement up by its `/*NAME*/` marker.
    pub fn find_marker(&self, marker: &str) -> Option<&Stmt> {
        let mut hit = None;
        self.body.walk(&mut |s| {
            if hit.is_none() && s.marker.as_deref() == Some(marker) {
                hit = Some(s);
            }
        });
        hit
    }

    /// Loop-head labels (while statements), in pre-order.
    pub fn loop_heads(&self) -> Vec<ControlPoint> {
        let mut v = Vec::new();
        self.body.walk(&mut |s| {
            if matches!(s.kind, StmtKind::While { .. }) {
                v.push(s.label);
            }
        });
        v
    }
}
