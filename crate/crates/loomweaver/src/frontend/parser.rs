//! Recursive-descent parser producing a resolved [`Function`].
//!
//! Name resolution happens during parsing: loads must reference declared
//! arrays with matching rank, and index expressions must be affine in the
//! declared iterators. Directive arguments that may name iterators created
//! by earlier directives are resolved later, in `validate`.

use std::collections::BTreeMap;

use crate::affine::AffineExpr;
use crate::diag::Diagnostic;
use crate::frontend::ast::*;
use crate::frontend::lexer::{lex, Token, TokenKind};

pub fn parse_program(src: &str) -> Result<Function, Vec<Diagnostic>> {
    let tokens = lex(src).map_err(|e| vec![Diagnostic::error(e.message).at(e.line, e.col)])?;
    let mut p = Parser {
        tokens,
        pos: 0,
        func: None,
    };
    match p.program() {
        Ok(f) => Ok(f),
        Err(d) => Err(vec![d]),
    }
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    func: Option<Function>,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn peek2(&self) -> &Token {
        &self.tokens[(self.pos + 1).min(self.tokens.len() - 1)]
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos.min(self.tokens.len() - 1)].clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn err(&self, msg: impl Into<String>) -> Diagnostic {
        let t = self.peek();
        Diagnostic::error(msg).at(t.line, t.col)
    }

    fn expect(&mut self, kind: TokenKind) -> Result<Token, Diagnostic> {
        if self.peek().kind == kind {
            Ok(self.next())
        } else {
            Err(self.err(format!("expected {kind}, found {}", self.peek().kind)))
        }
    }

    fn ident(&mut self) -> Result<String, Diagnostic> {
        match &self.peek().kind {
            TokenKind::Ident(s) => {
                let s = s.clone();
                self.next();
                Ok(s)
            }
            other => Err(self.err(format!("expected identifier, found {other}"))),
        }
    }

    fn int(&mut self) -> Result<i64, Diagnostic> {
        let neg = if self.peek().kind == TokenKind::Minus {
            self.next();
            true
        } else {
            false
        };
        match self.peek().kind {
            TokenKind::Int(v) => {
                self.next();
                Ok(if neg { v.wrapping_neg() } else { v })
            }
            ref other => Err(self.err(format!("expected integer, found {other}"))),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), Diagnostic> {
        match &self.peek().kind {
            TokenKind::Ident(s) if s == kw => {
                self.next();
                Ok(())
            }
            other => Err(self.err(format!("expected `{kw}`, found {other}"))),
        }
    }

    fn func(&self) -> &Function {
        self.func.as_ref().expect("function in scope")
    }

    fn func_mut(&mut self) -> &mut Function {
        self.func.as_mut().expect("function in scope")
    }

    fn program(&mut self) -> Result<Function, Diagnostic> {
        self.keyword("func")?;
        let name = self.ident()?;
        self.func = Some(Function {
            name,
            placeholders: Vec::new(),
            computes: Vec::new(),
            directives: Vec::new(),
        });
        self.expect(TokenKind::LBrace)?;
        // declared iterators, shared by all computes of the function
        let mut iters: BTreeMap<String, IterVar> = BTreeMap::new();
        let mut iter_order: Vec<String> = Vec::new();
        loop {
            match &self.peek().kind {
                TokenKind::Ident(s) if s == "iter" => {
                    self.next();
                    let name = self.ident()?;
                    self.expect(TokenKind::Eq)?;
                    let lower = self.int()?;
                    self.expect(TokenKind::DotDot)?;
                    let upper = self.int()?;
                    self.expect(TokenKind::Semi)?;
                    if lower >= upper {
                        return Err(self.err(format!(
                            "iterator `{name}` has empty range {lower}..{upper}"
                        )));
                    }
                    if iters
                        .insert(
                            name.clone(),
                            IterVar {
                                name: name.clone(),
                                lower,
                                upper,
                            },
                        )
                        .is_some()
                    {
                        return Err(self.err(format!("duplicate iterator `{name}`")));
                    }
                    iter_order.push(name);
                }
                TokenKind::Ident(s) if s == "array" => {
                    self.next();
                    let name = self.ident()?;
                    self.expect(TokenKind::Colon)?;
                    let dt_name = self.ident()?;
                    let dtype = DataType::parse(&dt_name)
                        .ok_or_else(|| self.err(format!("unknown data type `{dt_name}`")))?;
                    let mut shape = Vec::new();
                    while self.peek().kind == TokenKind::LBracket {
                        self.next();
                        let extent = self.int()?;
                        self.expect(TokenKind::RBracket)?;
                        if extent < 1 {
                            return Err(self.err(format!(
                                "array `{name}` has non-positive extent {extent}"
                            )));
                        }
                        shape.push(extent);
                    }
                    if shape.is_empty() {
                        return Err(self.err(format!("array `{name}` needs at least one dimension")));
                    }
                    let dir_kw = self.ident()?;
                    let dir = match dir_kw.as_str() {
                        "in" => PortDir::In,
                        "out" => PortDir::Out,
                        "inout" => PortDir::InOut,
                        "temp" => PortDir::Temp,
                        other => {
                            return Err(
                                self.err(format!("expected in/out/inout/temp, found `{other}`"))
                            )
                        }
                    };
                    self.expect(TokenKind::Semi)?;
                    if self.func().placeholder(&name).is_some() {
                        return Err(self.err(format!("duplicate array `{name}`")));
                    }
                    self.func_mut().placeholders.push(Placeholder {
                        name,
                        dtype,
                        shape,
                        dir,
                    });
                }
                TokenKind::Ident(s) if s == "compute" => {
                    self.compute(&iters)?;
                }
                TokenKind::Ident(s) if s == "schedule" => {
                    self.next();
                    self.expect(TokenKind::LBrace)?;
                    while self.peek().kind != TokenKind::RBrace {
                        self.directive()?;
                    }
                    self.expect(TokenKind::RBrace)?;
                    break;
                }
                TokenKind::RBrace => break,
                other => {
                    return Err(self.err(format!(
                        "expected `iter`, `array`, `compute` or `schedule`, found {other}"
                    )))
                }
            }
        }
        self.expect(TokenKind::RBrace)?;
        self.expect(TokenKind::Eof)?;
        Ok(self.func.take().unwrap())
    }

    fn compute(&mut self, iters: &BTreeMap<String, IterVar>) -> Result<(), Diagnostic> {
        self.keyword("compute")?;
        let name = self.ident()?;
        if self.func().compute(&name).is_some() {
            return Err(self.err(format!("duplicate compute `{name}`")));
        }
        self.expect(TokenKind::LParen)?;
        let mut used: Vec<IterVar> = Vec::new();
        loop {
            let iv_name = self.ident()?;
            let iv = iters
                .get(&iv_name)
                .ok_or_else(|| self.err(format!("unknown iterator `{iv_name}`")))?;
            if used.iter().any(|u| u.name == iv_name) {
                return Err(self.err(format!("iterator `{iv_name}` listed twice")));
            }
            used.push(iv.clone());
            if self.peek().kind == TokenKind::Comma {
                self.next();
            } else {
                break;
            }
        }
        self.expect(TokenKind::RParen)?;
        self.expect(TokenKind::LBrace)?;

        let scope: Vec<&str> = used.iter().map(|iv| iv.name.as_str()).collect();
        let (dest, dest_indices) = self.access(&scope)?;
        let op = match self.peek().kind {
            TokenKind::Eq => {
                self.next();
                AssignOp::Assign
            }
            TokenKind::PlusEq => {
                self.next();
                AssignOp::Accumulate
            }
            ref other => return Err(self.err(format!("expected `=` or `+=`, found {other}"))),
        };
        let rhs = self.expr(&scope)?;
        self.expect(TokenKind::Semi)?;
        self.expect(TokenKind::RBrace)?;

        self.func_mut().computes.push(Compute {
            name,
            iters: used,
            dest,
            dest_indices,
            op,
            rhs,
        });
        Ok(())
    }

    /// `IDENT ("[" affine "]")+` with rank and affine checks.
    fn access(&mut self, scope: &[&str]) -> Result<(String, Vec<AffineExpr>), Diagnostic> {
        let array = self.ident()?;
        let rank = match self.func().placeholder(&array) {
            Some(p) => p.rank(),
            None => return Err(self.err(format!("unknown array `{array}`"))),
        };
        let mut indices = Vec::new();
        while self.peek().kind == TokenKind::LBracket {
            self.next();
            let e = self.expr(scope)?;
            let aff = to_affine(&e)
                .ok_or_else(|| self.err(format!("non-affine index expression for `{array}`")))?;
            self.expect(TokenKind::RBracket)?;
            indices.push(aff);
        }
        if indices.len() != rank {
            return Err(self.err(format!(
                "array `{array}` has rank {rank}, got {} indices",
                indices.len()
            )));
        }
        Ok((array, indices))
    }

    fn expr(&mut self, scope: &[&str]) -> Result<Expr, Diagnostic> {
        let mut lhs = self.term(scope)?;
        loop {
            let op = match self.peek().kind {
                TokenKind::Plus => BinOp::Add,
                TokenKind::Minus => BinOp::Sub,
                _ => break,
            };
            self.next();
            let rhs = self.term(scope)?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self, scope: &[&str]) -> Result<Expr, Diagnostic> {
        let mut lhs = self.factor(scope)?;
        loop {
            let op = match self.peek().kind {
                TokenKind::Star => BinOp::Mul,
                TokenKind::Slash => BinOp::Div,
                _ => break,
            };
            self.next();
            let rhs = self.factor(scope)?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn factor(&mut self, scope: &[&str]) -> Result<Expr, Diagnostic> {
        match self.peek().kind.clone() {
            TokenKind::Minus => {
                self.next();
                Ok(Expr::Neg(Box::new(self.factor(scope)?)))
            }
            TokenKind::Int(v) => {
                self.next();
                Ok(Expr::Lit(Lit::Int(v)))
            }
            TokenKind::Float(v) => {
                self.next();
                Ok(Expr::Lit(Lit::Float(v)))
            }
            TokenKind::LParen => {
                self.next();
                let e = self.expr(scope)?;
                self.expect(TokenKind::RParen)?;
                Ok(e)
            }
            TokenKind::Ident(name) => {
                // Array access if followed by `[`, otherwise an iterator.
                if self.peek2().kind == TokenKind::LBracket {
                    let (array, indices) = self.access(scope)?;
                    Ok(Expr::Load { array, indices })
                } else {
                    if !scope.contains(&name.as_str()) {
                        return Err(self.err(format!("unknown identifier `{name}`")));
                    }
                    self.next();
                    Ok(Expr::Iter(name))
                }
            }
            other => Err(self.err(format!("expected expression, found {other}"))),
        }
    }

    fn directive(&mut self) -> Result<(), Diagnostic> {
        let recv = self.ident()?;
        self.expect(TokenKind::Dot)?;
        let prim = self.ident()?;
        self.expect(TokenKind::LParen)?;
        let d = match prim.as_str() {
            "interchange" => {
                let a = self.ident()?;
                self.expect(TokenKind::Comma)?;
                let b = self.ident()?;
                ScheduleDirective::Interchange {
                    compute: recv,
                    a,
                    b,
                }
            }
            "split" => {
                let dim = self.ident()?;
                self.expect(TokenKind::Comma)?;
                let factor = self.int()?;
                self.expect(TokenKind::Comma)?;
                let outer = self.ident()?;
                self.expect(TokenKind::Comma)?;
                let inner = self.ident()?;
                ScheduleDirective::Split {
                    compute: recv,
                    dim,
                    factor,
                    outer,
                    inner,
                }
            }
            "tile" => {
                let i = self.ident()?;
                self.expect(TokenKind::Comma)?;
                let j = self.ident()?;
                self.expect(TokenKind::Comma)?;
                let ti = self.int()?;
                self.expect(TokenKind::Comma)?;
                let tj = self.int()?;
                self.expect(TokenKind::Comma)?;
                let i0 = self.ident()?;
                self.expect(TokenKind::Comma)?;
                let j0 = self.ident()?;
                self.expect(TokenKind::Comma)?;
                let i1 = self.ident()?;
                self.expect(TokenKind::Comma)?;
                let j1 = self.ident()?;
                ScheduleDirective::Tile {
                    compute: recv,
                    i,
                    j,
                    ti,
                    tj,
                    i0,
                    j0,
                    i1,
                    j1,
                }
            }
            "skew" => {
                let i = self.ident()?;
                self.expect(TokenKind::Comma)?;
                let j = self.ident()?;
                self.expect(TokenKind::Comma)?;
                let t1 = self.int()?;
                self.expect(TokenKind::Comma)?;
                let t2 = self.int()?;
                self.expect(TokenKind::Comma)?;
                let ni = self.ident()?;
                self.expect(TokenKind::Comma)?;
                let nj = self.ident()?;
                ScheduleDirective::Skew {
                    compute: recv,
                    i,
                    j,
                    t1,
                    t2,
                    ni,
                    nj,
                }
            }
            "after" => {
                let base = self.ident()?;
                self.expect(TokenKind::Comma)?;
                let level = match self.peek().kind.clone() {
                    TokenKind::Ident(name) => {
                        self.next();
                        AfterLevel::Dim(name)
                    }
                    TokenKind::Minus | TokenKind::Int(_) => {
                        let v = self.int()?;
                        if v != -1 {
                            return Err(
                                self.err("after level must be an iterator name or -1".to_string())
                            );
                        }
                        AfterLevel::Root
                    }
                    other => {
                        return Err(self.err(format!(
                            "expected iterator name or -1, found {other}"
                        )))
                    }
                };
                ScheduleDirective::After {
                    compute: recv,
                    base,
                    level,
                }
            }
            "pipeline" => {
                let dim = self.ident()?;
                self.expect(TokenKind::Comma)?;
                let ii = self.int()?;
                ScheduleDirective::Pipeline {
                    compute: recv,
                    dim,
                    ii,
                }
            }
            "unroll" => {
                let dim = self.ident()?;
                self.expect(TokenKind::Comma)?;
                let factor = self.int()?;
                ScheduleDirective::Unroll {
                    compute: recv,
                    dim,
                    factor,
                }
            }
            "partition" => {
                self.expect(TokenKind::LBrace)?;
                let mut factors = Vec::new();
                loop {
                    factors.push(self.int()?);
                    if self.peek().kind == TokenKind::Comma {
                        self.next();
                    } else {
                        break;
                    }
                }
                self.expect(TokenKind::RBrace)?;
                self.expect(TokenKind::Comma)?;
                let kind_tok = self.next();
                let kind = match kind_tok.kind {
                    TokenKind::Str(s) => PartitionKind::parse(&s),
                    TokenKind::Ident(s) => PartitionKind::parse(&s),
                    _ => None,
                }
                .ok_or_else(|| self.err("expected \"cyclic\", \"block\" or \"complete\""))?;
                ScheduleDirective::Partition {
                    array: recv,
                    factors,
                    kind,
                }
            }
            "auto_dse" => {
                let path = match self.peek().kind.clone() {
                    TokenKind::Str(s) => {
                        self.next();
                        Some(s)
                    }
                    _ => None,
                };
                if recv != self.func().name {
                    return Err(self.err(format!(
                        "auto_dse applies to the function, expected `{}`",
                        self.func().name
                    )));
                }
                ScheduleDirective::AutoDse { path }
            }
            other => return Err(self.err(format!("unknown scheduling primitive `{other}`"))),
        };
        self.expect(TokenKind::RParen)?;
        self.expect(TokenKind::Semi)?;

        // Compute/array receivers must exist; iterator arguments are
        // checked in validate, where directive-created names are known.
        if let Some(recv) = d.receiver() {
            let is_partition = matches!(d, ScheduleDirective::Partition { .. });
            let known = if is_partition {
                self.func().placeholder(recv).is_some()
            } else {
                self.func().compute(recv).is_some()
            };
            if !known {
                let what = if is_partition { "array" } else { "compute" };
                return Err(self.err(format!("unknown {what} `{recv}`")));
            }
        }
        if let ScheduleDirective::After { base, .. } = &d {
            if self.func().compute(base).is_none() {
                return Err(self.err(format!("unknown compute `{base}`")));
            }
        }
        self.func_mut().directives.push(d);
        Ok(())
    }
}

/// Extract the affine form of an index expression: a linear combination
/// of iterator names plus an integer constant.
pub fn to_affine(e: &Expr) -> Option<AffineExpr> {
    match e {
        Expr::Lit(Lit::Int(v)) => Some(AffineExpr::constant(*v)),
        Expr::Lit(Lit::Float(_)) => None,
        Expr::Iter(name) => Some(AffineExpr::dim(name.clone())),
        Expr::Load { .. } => None,
        Expr::Neg(inner) => to_affine(inner).map(|a| a.scale(-1)),
        Expr::Bin(op, l, r) => {
            let la = to_affine(l)?;
            let ra = to_affine(r)?;
            match op {
                BinOp::Add => Some(la.add(&ra)),
                BinOp::Sub => Some(la.sub(&ra)),
                BinOp::Mul => {
                    if let Some(c) = la.as_constant() {
                        Some(ra.scale(c))
                    } else if let Some(c) = ra.as_constant() {
                        Some(la.scale(c))
                    } else {
                        None
                    }
                }
                BinOp::Div => match (la.as_constant(), ra.as_constant()) {
                    (Some(a), Some(b)) if b != 0 => Some(AffineExpr::constant(
                        // truncating division, matching expression semantics
                        a.wrapping_div(b),
                    )),
                    _ => None,
                },
            }
        }
    }
}
