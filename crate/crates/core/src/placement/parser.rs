use super::ast::{BinOp, Expr, ExprKind, Stmt, UnOp};
use super::lexer::{tokenize, Tok};
use super::{PlacementError, Pos, MAX_STATEMENTS};
use crate::road::AgentRotation;

/// Deepest expression tree accepted; keeps parsing and evaluation off the
/// end of the stack.
pub const MAX_DEPTH: usize = 100;

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
    depth: usize,
}

pub(crate) fn parse(source: &str) -> Result<Vec<Stmt>, PlacementError> {
    let mut p = Parser {
        toks: tokenize(source)?,
        at: 0,
        depth: 0,
    };
    let mut stmts = Vec::new();
    while p.peek() != &Tok::Eof {
        if stmts.len() == MAX_STATEMENTS {
            return Err(PlacementError::TooLarge {
                statements: MAX_STATEMENTS + 1,
            });
        }
        let stmt = p.statement()?;
        check_depth(&stmt)?;
        p.expect(&Tok::Semi, "`;` after statement")?;
        stmts.push(stmt);
    }
    let returns: Vec<usize> = stmts
        .iter()
        .enumerate()
        .filter(|(_, s)| matches!(s, Stmt::Return { .. }))
        .map(|(i, _)| i)
        .collect();
    match returns.as_slice() {
        [i] if *i == stmts.len() - 1 => Ok(stmts),
        [] => {
            let pos = p.pos();
            Err(PlacementError::Syntax {
                line: pos.line,
                column: pos.column,
                message: "program must end with a `return` statement".into(),
            })
        }
        [first, ..] => {
            let pos = match &stmts[*first] {
                Stmt::Return { pos, .. } | Stmt::Let { pos, .. } => *pos,
            };
            Err(PlacementError::Syntax {
                line: pos.line,
                column: pos.column,
                message: "exactly one `return`, as the last statement, is allowed".into(),
            })
        }
    }
}

/// Long operator chains build deep trees without recursing in the parser,
/// so depth is measured again here, iteratively.
fn check_depth(stmt: &Stmt) -> Result<(), PlacementError> {
    let (Stmt::Let { value, .. } | Stmt::Return { value, .. }) = stmt;
    let mut stack = vec![(value, 1usize)];
    while let Some((e, d)) = stack.pop() {
        if d > MAX_DEPTH {
            return Err(PlacementError::Syntax {
                line: e.pos.line,
                column: e.pos.column,
                message: format!("expression nests deeper than {MAX_DEPTH} levels"),
            });
        }
        let mut children = Vec::new();
        match &e.kind {
            ExprKind::Call { args, .. } | ExprKind::List(args) => children.extend(args),
            ExprKind::Record(fields) => children.extend(fields.iter().map(|(_, v)| v)),
            ExprKind::Index { target, index } => children.extend([&**target, &**index]),
            ExprKind::Field { target, .. } => children.push(target),
            ExprKind::Unary { operand, .. } => children.push(operand),
            ExprKind::Binary { lhs, rhs, .. } => children.extend([&**lhs, &**rhs]),
            ExprKind::If { cond, then, otherwise } => children.extend([&**cond, &**then, &**otherwise]),
            _ => {}
        }
        stack.extend(children.into_iter().map(|c| (c, d + 1)));
    }
    Ok(())
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> (Tok, Pos) {
        let t = self.toks[self.at].clone();
        if self.at < self.toks.len() - 1 {
            self.at += 1;
        }
        t
    }

    fn error<T>(&self, expected: &str) -> Result<T, PlacementError> {
        let pos = self.pos();
        Err(PlacementError::Syntax {
            line: pos.line,
            column: pos.column,
            message: format!("expected {expected}, found {}", self.peek().describe()),
        })
    }

    fn expect(&mut self, tok: &Tok, expected: &str) -> Result<Pos, PlacementError> {
        if self.peek() == tok {
            Ok(self.bump().1)
        } else {
            self.error(expected)
        }
    }

    fn ident(&mut self, expected: &str) -> Result<String, PlacementError> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.bump();
                Ok(name)
            }
            _ => self.error(expected),
        }
    }

    fn statement(&mut self) -> Result<Stmt, PlacementError> {
        let pos = self.pos();
        match self.peek() {
            Tok::Let => {
                self.bump();
                let name = self.ident("a variable name after `let`")?;
                self.expect(&Tok::Assign, "`=`")?;
                let value = self.expr()?;
                Ok(Stmt::Let { name, value, pos })
            }
            Tok::Return => {
                self.bump();
                let value = self.expr()?;
                Ok(Stmt::Return { value, pos })
            }
            _ => self.error("`let` or `return`"),
        }
    }

    fn expr(&mut self) -> Result<Expr, PlacementError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return self.error(&format!("a shallower expression (nesting limit is {MAX_DEPTH})"));
        }
        let e = self.expr_inner();
        self.depth -= 1;
        e
    }

    fn expr_inner(&mut self) -> Result<Expr, PlacementError> {
        if self.peek() == &Tok::If {
            let pos = self.bump().1;
            let cond = self.expr()?;
            self.expect(&Tok::Then, "`then`")?;
            let then = self.expr()?;
            self.expect(&Tok::Else, "`else`")?;
            let otherwise = self.expr()?;
            return Ok(Expr {
                kind: ExprKind::If {
                    cond: Box::new(cond),
                    then: Box::new(then),
                    otherwise: Box::new(otherwise),
                },
                pos,
            });
        }
        self.or_expr()
    }

    fn binary_chain(
        &mut self,
        next: fn(&mut Self) -> Result<Expr, PlacementError>,
        ops: &[(Tok, BinOp)],
        repeat: bool,
    ) -> Result<Expr, PlacementError> {
        let mut lhs = next(self)?;
        loop {
            let Some(op) = ops.iter().find(|(t, _)| t == self.peek()).map(|(_, op)| *op) else {
                return Ok(lhs);
            };
            let pos = self.bump().1;
            let rhs = next(self)?;
            lhs = Expr {
                kind: ExprKind::Binary {
                    op,
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                },
                pos,
            };
            if !repeat {
                if ops.iter().any(|(t, _)| t == self.peek()) {
                    return self.error("an operator other than a second comparison (comparisons do not chain)");
                }
                return Ok(lhs);
            }
        }
    }

    fn or_expr(&mut self) -> Result<Expr, PlacementError> {
        self.binary_chain(Self::and_expr, &[(Tok::OrOr, BinOp::Or)], true)
    }

    fn and_expr(&mut self) -> Result<Expr, PlacementError> {
        self.binary_chain(Self::cmp_expr, &[(Tok::AndAnd, BinOp::And)], true)
    }

    fn cmp_expr(&mut self) -> Result<Expr, PlacementError> {
        self.binary_chain(
            Self::add_expr,
            &[
                (Tok::EqEq, BinOp::Eq),
                (Tok::NotEq, BinOp::Ne),
                (Tok::Lt, BinOp::Lt),
                (Tok::Le, BinOp::Le),
                (Tok::Gt, BinOp::Gt),
                (Tok::Ge, BinOp::Ge),
            ],
            false,
        )
    }

    fn add_expr(&mut self) -> Result<Expr, PlacementError> {
        self.binary_chain(
            Self::mul_expr,
            &[(Tok::Plus, BinOp::Add), (Tok::Minus, BinOp::Sub)],
            true,
        )
    }

    fn mul_expr(&mut self) -> Result<Expr, PlacementError> {
        self.binary_chain(
            Self::unary,
            &[(Tok::Star, BinOp::Mul), (Tok::Slash, BinOp::Div)],
            true,
        )
    }

    fn unary(&mut self) -> Result<Expr, PlacementError> {
        let op = match self.peek() {
            Tok::Minus => UnOp::Neg,
            Tok::Bang => UnOp::Not,
            _ => return self.postfix(),
        };
        let pos = self.bump().1;
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return self.error(&format!("a shallower expression (nesting limit is {MAX_DEPTH})"));
        }
        let operand = self.unary();
        self.depth -= 1;
        let operand = operand?;
        Ok(Expr {
            kind: ExprKind::Unary {
                op,
                operand: Box::new(operand),
            },
            pos,
        })
    }

    fn postfix(&mut self) -> Result<Expr, PlacementError> {
        let mut e = self.primary()?;
        loop {
            match self.peek() {
                Tok::LBracket => {
                    let pos = self.bump().1;
                    let index = self.expr()?;
                    self.expect(&Tok::RBracket, "`]`")?;
                    e = Expr {
                        kind: ExprKind::Index {
                            target: Box::new(e),
                            index: Box::new(index),
                        },
                        pos,
                    };
                }
                Tok::Dot => {
                    let pos = self.bump().1;
                    let name = self.ident("a field name after `.`")?;
                    e = Expr {
                        kind: ExprKind::Field {
                            target: Box::new(e),
                            name,
                        },
                        pos,
                    };
                }
                _ => return Ok(e),
            }
        }
    }

    fn comma_list<T>(
        &mut self,
        close: &Tok,
        close_desc: &str,
        mut item: impl FnMut(&mut Self) -> Result<T, PlacementError>,
    ) -> Result<Vec<T>, PlacementError> {
        let mut items = Vec::new();
        loop {
            if self.peek() == close {
                self.bump();
                return Ok(items);
            }
            items.push(item(self)?);
            match self.peek() {
                Tok::Comma => {
                    self.bump();
                }
                t if t == close => {}
                _ => return self.error(&format!("`,` or {close_desc}")),
            }
        }
    }

    fn primary(&mut self) -> Result<Expr, PlacementError> {
        let (tok, pos) = self.bump();
        let kind = match tok {
            Tok::Num(n) => ExprKind::Number(n),
            Tok::Str(s) => ExprKind::Str(s),
            Tok::True => ExprKind::Bool(true),
            Tok::False => ExprKind::Bool(false),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(&Tok::RParen, "`)`")?;
                return Ok(e);
            }
            Tok::LBracket => ExprKind::List(self.comma_list(&Tok::RBracket, "`]`", Self::expr)?),
            Tok::LBrace => ExprKind::Record(self.comma_list(&Tok::RBrace, "`}`", |p| {
                let key = match p.peek().clone() {
                    Tok::Ident(k) | Tok::Str(k) => {
                        p.bump();
                        k
                    }
                    _ => return p.error("a field name"),
                };
                p.expect(&Tok::Colon, "`:` after field name")?;
                Ok((key, p.expr()?))
            })?),
            Tok::Ident(name) => match name.as_str() {
                "FORWARD" => ExprKind::Rotation(AgentRotation::Forward),
                "BACKWARD" => ExprKind::Rotation(AgentRotation::Backward),
                // AgentRotation.FORWARD spelling is accepted as well
                "AgentRotation" if self.peek() == &Tok::Dot => {
                    self.bump();
                    match self.ident("FORWARD or BACKWARD")?.as_str() {
                        "FORWARD" => ExprKind::Rotation(AgentRotation::Forward),
                        "BACKWARD" => ExprKind::Rotation(AgentRotation::Backward),
                        _ => {
                            self.at -= 1;
                            return self.error("FORWARD or BACKWARD");
                        }
                    }
                }
                _ if self.peek() == &Tok::LParen => {
                    self.bump();
                    let args = self.comma_list(&Tok::RParen, "`)`", Self::expr)?;
                    ExprKind::Call { name, args }
                }
                _ => ExprKind::Var(name),
            },
            other => {
                return Err(PlacementError::Syntax {
                    line: pos.line,
                    column: pos.column,
                    message: format!("expected an expression, found {}", other.describe()),
                })
            }
        };
        Ok(Expr { kind, pos })
    }
}
