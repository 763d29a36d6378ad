use super::ast::*;
use super::lexer::{tokenize, TokKind, Token};
use super::ParseError;

const KEYWORDS: [&str; 18] = [
    "skip", "while", "if", "else", "assert", "assume", "true", "false", "select", "store", "const",
    "forall", "exists", "nondet", "inf", "Int", "Bool", "Array",
];

pub fn is_keyword(name: &str) -> bool {
    KEYWORDS.contains(&name)
}

/// Parses a whole program. Labels are assigned in pre-order.
pub fn parse(src: &str) -> Result<Program, ParseError> {
    let mut p = Parser {
        toks: tokenize(src)?,
        pos: 0,
        decls: Vec::new(),
    };
    let mut stmts = Vec::new();
    while !p.at_eof() {
        p.item(&mut stmts)?;
    }
    let mut prog = Program::new(p.decls, Stmt::block(stmts));
    prog.relabel();
    Ok(prog)
}

/// Parses a single expression (used by tests and the witness tooling).
pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    let mut p = Parser {
        toks: tokenize(src)?,
        pos: 0,
        decls: Vec::new(),
    };
    let e = p.expr()?;
    if !p.at_eof() {
        return Err(p.error(&["end of input"]));
    }
    Ok(e)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    decls: Vec<Decl>,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn peek_at(&self, n: usize) -> &TokKind {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].kind
    }

    fn at_eof(&self) -> bool {
        matches!(self.peek().kind, TokKind::Eof)
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> ParseError {
        let t = self.peek();
        ParseError::new(
            t.line,
            t.col,
            expected.iter().map(|s| s.to_string()).collect(),
            &t.describe(),
        )
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(&self.peek().kind, TokKind::Punct(q) if *q == p)
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(&self.peek().kind, TokKind::Ident(q) if q == w)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> Result<Token, ParseError> {
        if self.is_punct(p) {
            Ok(self.bump())
        } else {
            Err(self.error(&[&format!("`{p}`")]))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match &self.peek().kind {
            TokKind::Ident(s) if !is_keyword(s) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => Err(self.error(&["identifier"])),
        }
    }

    fn at_type(&self) -> bool {
        self.is_word("Int") || self.is_word("Bool") || self.is_word("Array")
    }

    fn ty(&mut self) -> Result<Type, ParseError> {
        if self.eat_punct("(") {
            let t = self.ty()?;
            self.expect_punct(")")?;
            return Ok(t);
        }
        match &self.peek().kind {
            TokKind::Ident(s) if s == "Int" => {
                self.bump();
                Ok(Type::Int)
            }
            TokKind::Ident(s) if s == "Bool" => {
                self.bump();
                Ok(Type::Bool)
            }
            TokKind::Ident(s) if s == "Array" => {
                self.bump();
                Ok(Type::array_of(self.ty()?))
            }
            _ => Err(self.error(&["`Int`", "`Bool`", "`Array`"])),
        }
    }

    /// A declaration or a statement; statements are appended to `out`.
    fn item(&mut self, out: &mut Vec<Stmt>) -> Result<(), ParseError> {
        if self.at_type() {
            let ty = self.ty()?;
            let name = self.ident()?;
            let mut input = false;
            if self.eat_punct("=") {
                if self.is_word("nondet") {
                    self.bump();
                    input = true;
                } else {
                    let value = self.expr()?;
                    let semi = self.expect_punct(";")?;
                    let mut s = Stmt::assign(&name, value);
                    s.marker = semi.marker_after;
                    out.push(s);
                    self.decls.push(Decl { name, ty, input });
                    return Ok(());
                }
            }
            self.expect_punct(";")?;
            self.decls.push(Decl { name, ty, input });
            return Ok(());
        }
        let s = self.stmt()?;
        out.push(s);
        Ok(())
    }

    fn body(&mut self) -> Result<Stmt, ParseError> {
        let s = self.stmt()?;
        Ok(match s.kind {
            StmtKind::Block(_) => s,
            _ => Stmt::block(vec![s]),
        })
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        if self.eat_punct("{") {
            let mut stmts = Vec::new();
            while !self.is_punct("}") {
                if self.at_eof() {
                    return Err(self.error(&["`}`"]));
                }
                self.item(&mut stmts)?;
            }
            let close = self.bump();
            let mut s = Stmt::block(stmts);
            s.marker = close.marker_after;
            return Ok(s);
        }
        let word = match &self.peek().kind {
            TokKind::Ident(w) => w.clone(),
            _ => return Err(self.error(&["statement"])),
        };
        let (kind, end) = match word.as_str() {
            "skip" => {
                self.bump();
                (StmtKind::Skip, self.expect_punct(";")?)
            }
            "while" => {
                self.bump();
                self.expect_punct("(")?;
                let cond = self.expr()?;
                self.expect_punct(")")?;
                let body = self.body()?;
                let marker = body.marker.clone();
                let mut s = Stmt::while_loop(cond, body);
                s.marker = marker;
                if let StmtKind::While { body, .. } = &mut s.kind {
                    body.marker = None;
                }
                return Ok(s);
            }
            "if" => {
                self.bump();
                self.expect_punct("(")?;
                let cond = self.expr()?;
                self.expect_punct(")")?;
                let mut then_b = self.body()?;
                let mut else_b = if self.is_word("else") {
                    self.bump();
                    self.body()?
                } else {
                    Stmt::block(vec![])
                };
                let marker = else_b.marker.take().or_else(|| then_b.marker.take());
                let mut s = Stmt::if_else(cond, then_b, else_b);
                s.marker = marker;
                return Ok(s);
            }
            "assert" | "assume" => {
                self.bump();
                self.expect_punct("(")?;
                let cond = self.expr()?;
                self.expect_punct(")")?;
                let end = self.expect_punct(";")?;
                let kind = if word == "assert" {
                    StmtKind::Assert(cond)
                } else {
                    StmtKind::Assume(cond)
                };
                (kind, end)
            }
            _ => {
                let target = self.ident()?;
                let value = if self.eat_punct("[") {
                    let idx = self.expr()?;
                    self.expect_punct("]")?;
                    self.expect_punct("=")?;
                    let v = self.expr()?;
                    Expr::store(Expr::Var(target.clone()), idx, v)
                } else {
                    self.expect_punct("=")?;
                    self.expr()?
                };
                let end = self.expect_punct(";")?;
                (StmtKind::Assign { target, value }, end)
            }
        };
        let mut s = Stmt::new(kind);
        s.marker = end.marker_after;
        Ok(s)
    }

    pub fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut l = self.and_expr()?;
        while self.eat_punct("||") {
            let r = self.and_expr()?;
            l = Expr::or(l, r);
        }
        Ok(l)
    }

    fn and_expr(&mut self) -> Result<Expr, ParseError> {
        let mut l = self.eq_expr()?;
        while self.eat_punct("&&") {
            let r = self.eq_expr()?;
            l = Expr::and(l, r);
        }
        Ok(l)
    }

    fn eq_expr(&mut self) -> Result<Expr, ParseError> {
        let l = self.rel_expr()?;
        for (p, op) in [("==", BinOp::Eq), ("!=", BinOp::Ne)] {
            if self.eat_punct(p) {
                let r = self.rel_expr()?;
                return Ok(Expr::bin(op, l, r));
            }
        }
        Ok(l)
    }

    fn rel_expr(&mut self) -> Result<Expr, ParseError> {
        let l = self.add_expr()?;
        for (p, op) in [
            ("<=", BinOp::Le),
            (">=", BinOp::Ge),
            ("<", BinOp::Lt),
            (">", BinOp::Gt),
        ] {
            if self.eat_punct(p) {
                let r = self.add_expr()?;
                return Ok(Expr::bin(op, l, r));
            }
        }
        Ok(l)
    }

    fn add_expr(&mut self) -> Result<Expr, ParseError> {
        let mut l = self.mul_expr()?;
        loop {
            let op = if self.eat_punct("+") {
                BinOp::Add
            } else if self.eat_punct("-") {
                BinOp::Sub
            } else {
                return Ok(l);
            };
            let r = self.mul_expr()?;
            l = Expr::bin(op, l, r);
        }
    }

    fn mul_expr(&mut self) -> Result<Expr, ParseError> {
        let mut l = self.unary()?;
        loop {
            let op = if self.eat_punct("*") {
                BinOp::Mul
            } else if self.eat_punct("/") {
                BinOp::Div
            } else if self.eat_punct("%") {
                BinOp::Mod
            } else {
                return Ok(l);
            };
            let r = self.unary()?;
            l = Expr::bin(op, l, r);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat_punct("!") {
            return Ok(Expr::not(self.unary()?));
        }
        if self.is_punct("-") {
            self.bump();
            match self.peek().kind.clone() {
                TokKind::Int(v) => {
                    self.bump();
                    return Ok(Expr::Int(-v));
                }
                TokKind::Ident(w) if w == "inf" => {
                    self.bump();
                    return Ok(Expr::NegInf);
                }
                _ => return Ok(Expr::Unary(UnOp::Neg, Box::new(self.unary()?))),
            }
        }
        if self.is_punct("+") && matches!(self.peek_at(1), TokKind::Ident(w) if w == "inf") {
            self.bump();
            self.bump();
            return Ok(Expr::PosInf);
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.primary()?;
        while self.eat_punct("[") {
            let i = self.expr()?;
            self.expect_punct("]")?;
            e = Expr::select(e, i);
        }
        Ok(e)
    }

    fn args(&mut self, n: usize) -> Result<Vec<Expr>, ParseError> {
        self.expect_punct("(")?;
        let mut v = Vec::new();
        for k in 0..n {
            if k > 0 {
                self.expect_punct(",")?;
            }
            v.push(self.expr()?);
        }
        Ok(v)
    }

    fn lambda(&mut self) -> Result<Lambda, ParseError> {
        if self.eat_punct("(") {
            let l = self.lambda()?;
            self.expect_punct(")")?;
            return Ok(l);
        }
        if !matches!(self.peek().kind, TokKind::Lambda) {
            return Err(self.error(&["`lambda`"]));
        }
        self.bump();
        self.expect_punct("(")?;
        let v = self.ident()?;
        self.expect_punct(",")?;
        let i = self.ident()?;
        self.expect_punct(")")?;
        self.expect_punct(".")?;
        let body = self.expr()?;
        Ok(Lambda::new(&v, &i, body))
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let tok = self.peek().clone();
        match tok.kind {
            TokKind::Int(v) => {
                self.bump();
                Ok(Expr::Int(v))
            }
            TokKind::Punct("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            TokKind::Builtin(ref name) => {
                self.bump();
                let hom = match name.as_str() {
                    "sum" => HomId::Sum,
                    "max" => HomId::Max,
                    "min" => HomId::Min,
                    "count" => HomId::Count(Lambda::new("_", "_", Expr::Bool(true))),
                    _ => {
                        return Err(ParseError::new(
                            tok.line,
                            tok.col,
                            vec!["`\\sum`, `\\max`, `\\min` or `\\count`".into()],
                            &tok.describe(),
                        ))
                    }
                };
                let a = self.args(3)?;
                let hom = if let HomId::Count(_) = hom {
                    self.expect_punct(",")?;
                    HomId::Count(self.lambda()?)
                } else {
                    hom
                };
                self.expect_punct(")")?;
                let [arr, lo, hi]: [Expr; 3] = a.try_into().expect("three args");
                Ok(Expr::aggregate(hom, arr, lo, hi))
            }
            TokKind::Ident(w) => match w.as_str() {
                "true" | "false" => {
                    self.bump();
                    Ok(Expr::Bool(w == "true"))
                }
                "inf" => {
                    self.bump();
                    Ok(Expr::PosInf)
                }
                "select" => {
                    self.bump();
                    let mut a = self.args(2)?;
                    self.expect_punct(")")?;
                    let i = a.pop().unwrap();
                    Ok(Expr::select(a.pop().unwrap(), i))
                }
                "store" => {
                    self.bump();
                    let mut a = self.args(3)?;
                    self.expect_punct(")")?;
                    let v = a.pop().unwrap();
                    let i = a.pop().unwrap();
                    Ok(Expr::store(a.pop().unwrap(), i, v))
                }
                "const" => {
                    self.bump();
                    let mut a = self.args(2)?;
                    self.expect_punct(")")?;
                    let n = a.pop().unwrap();
                    Ok(Expr::const_array(a.pop().unwrap(), n))
                }
                "forall" | "exists" => {
                    self.bump();
                    let a = self.args(3)?;
                    self.expect_punct(",")?;
                    let pred = self.lambda()?;
                    self.expect_punct(")")?;
                    let kind = if w == "forall" {
                        Quant::Forall
                    } else {
                        Quant::Exists
                    };
                    let [arr, lo, hi]: [Expr; 3] = a.try_into().expect("three args");
                    Ok(Expr::quantified(kind, arr, lo, hi, pred))
                }
                _ => Ok(Expr::Var(self.ident()?)),
            },
            _ => Err(self.error(&["expression"])),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_skip() {
        let p = parse("skip;").unwrap();
        assert_eq!(p.body.kind, StmtKind::Block(vec![Stmt::skip().relabelled(1)]));
    }

    #[test]
    fn reports_position_of_missing_rhs() {
        let err = parse("Int x;\nx = ;").unwrap_err();
        assert_eq!((err.line, err.col), (2, 5));
        assert!(err.expected.iter().any(|e| e == "expression"));
    }

    #[test]
    fn desugars_indexing() {
        let p = parse("Array Int a; Int x; a[1] = a[0];").unwrap();
        match &p.body.children()[0].kind {
            StmtKind::Assign { target, value } => {
                assert_eq!(target, "a");
                assert_eq!(
                    *value,
                    Expr::store(
                        Expr::var("a"),
                        Expr::int(1),
                        Expr::select(Expr::var("a"), Expr::int(0))
                    )
                );
            }
            k => panic!("unexpected {k:?}"),
        }
    }

    #[test]
    fn nondet_declares_input_without_statement() {
        let p = parse("Int N = nondet; Int i = 0;").unwrap();
        assert!(p.decl("N").unwrap().input);
        assert!(!p.decl("i").unwrap().input);
        assert_eq!(p.body.children().len(), 1);
    }

    #[test]
    fn negative_literals_and_infinities() {
        assert_eq!(parse_expr("-3").unwrap(), Expr::int(-3));
        assert_eq!(parse_expr("-inf").unwrap(), Expr::NegInf);
        assert_eq!(parse_expr("+inf").unwrap(), Expr::PosInf);
        assert_eq!(
            parse_expr("-(3)").unwrap(),
            Expr::Unary(UnOp::Neg, Box::new(Expr::int(3)))
        );
    }

    #[test]
    fn quantifier_and_aggregate_syntax() {
        let e = parse_expr("forall(a, 0, N, lambda(x, i). x == i)").unwrap();
        assert!(matches!(e, Expr::Quantified { kind: Quant::Forall, .. }));
        let e = parse_expr("\\count(a, 0, N, λ(x, i). x > 0)").unwrap();
        assert!(matches!(
            e,
            Expr::Aggregate {
                hom: HomId::Count(_),
                ..
            }
        ));
    }

    impl Stmt {
        fn relabelled(mut self, l: u32) -> Stmt {
            self.label = ControlPoint(l);
            self
        }
    }
}
