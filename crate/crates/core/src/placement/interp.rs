use std::collections::BTreeMap;
use std::rc::Rc;

use super::ast::{BinOp, Expr, ExprKind, Stmt, UnOp};
use super::registry::{ToolContext, ToolRegistry};
use super::value::Value;
use super::{PlacementError, Pos};
use crate::road::RoadGraph;

/// Names handled by the interpreter itself rather than the tool registry.
pub const BUILTINS: &[&str] = &["len", "fail", "min", "max", "abs"];

pub(crate) struct Machine<'a> {
    graph: &'a RoadGraph,
    registry: &'a ToolRegistry,
    budget: usize,
    steps: usize,
    env: BTreeMap<String, Value>,
}

impl<'a> Machine<'a> {
    pub(crate) fn new(graph: &'a RoadGraph, registry: &'a ToolRegistry, budget: usize) -> Self {
        let mut env = BTreeMap::new();
        env.insert("graph".to_string(), Value::Graph);
        Self {
            graph,
            registry,
            budget,
            steps: 0,
            env,
        }
    }

    pub(crate) fn run(&mut self, stmts: &[Stmt]) -> Result<Value, PlacementError> {
        for stmt in stmts {
            match stmt {
                Stmt::Let { name, value, pos } => {
                    if name == "graph" {
                        return Err(runtime(*pos, "`graph` cannot be rebound"));
                    }
                    let v = self.eval(value)?;
                    self.env.insert(name.clone(), v);
                }
                Stmt::Return { value, .. } => return self.eval(value),
            }
        }
        // the parser guarantees a trailing return
        Err(PlacementError::ResultShape("program did not return a value".into()))
    }

    fn tick(&mut self) -> Result<(), PlacementError> {
        self.steps += 1;
        if self.steps > self.budget {
            return Err(PlacementError::BudgetExceeded { budget: self.budget });
        }
        Ok(())
    }

    fn eval(&mut self, e: &Expr) -> Result<Value, PlacementError> {
        self.tick()?;
        let pos = e.pos;
        match &e.kind {
            ExprKind::Number(n) => Ok(Value::Number(*n)),
            ExprKind::Str(s) => Ok(Value::Str(Rc::from(s.as_str()))),
            ExprKind::Bool(b) => Ok(Value::Bool(*b)),
            ExprKind::Rotation(r) => Ok(Value::Rotation(*r)),
            ExprKind::Var(name) => self.env.get(name).cloned().ok_or_else(|| PlacementError::UnknownVariable {
                name: name.clone(),
                line: pos.line,
                column: pos.column,
            }),
            ExprKind::List(items) => {
                let vals = items.iter().map(|i| self.eval(i)).collect::<Result<Vec<_>, _>>()?;
                Ok(Value::List(Rc::new(vals)))
            }
            ExprKind::Record(fields) => {
                let mut out = BTreeMap::new();
                for (k, v) in fields {
                    let v = self.eval(v)?;
                    if out.insert(k.clone(), v).is_some() {
                        return Err(runtime(pos, format!("field `{k}` appears twice in record")));
                    }
                }
                Ok(Value::Record(Rc::new(out)))
            }
            ExprKind::Index { target, index } => {
                let t = self.eval(target)?;
                let i = self.eval(index)?;
                index_value(&t, &i, pos)
            }
            ExprKind::Field { target, name } => {
                let t = self.eval(target)?;
                field_value(&t, name, pos)
            }
            ExprKind::Unary { op, operand } => {
                let v = self.eval(operand)?;
                match (op, v) {
                    (UnOp::Neg, Value::Number(n)) => Ok(Value::Number(-n)),
                    (UnOp::Not, Value::Bool(b)) => Ok(Value::Bool(!b)),
                    (UnOp::Neg, v) => Err(type_error(pos, format!("cannot negate a {}", v.type_name()))),
                    (UnOp::Not, v) => Err(type_error(pos, format!("`!` needs a boolean, got a {}", v.type_name()))),
                }
            }
            ExprKind::Binary { op, lhs, rhs } => self.binary(*op, lhs, rhs, pos),
            ExprKind::If { cond, then, otherwise } => match self.eval(cond)? {
                Value::Bool(true) => self.eval(then),
                Value::Bool(false) => self.eval(otherwise),
                v => Err(type_error(pos, format!("`if` condition must be a boolean, got a {}", v.type_name()))),
            },
            ExprKind::Call { name, args } => self.call(name, args, pos),
        }
    }

    fn binary(&mut self, op: BinOp, lhs: &Expr, rhs: &Expr, pos: Pos) -> Result<Value, PlacementError> {
        if matches!(op, BinOp::And | BinOp::Or) {
            let l = self.eval(lhs)?;
            let Value::Bool(l) = l else {
                return Err(type_error(pos, format!("logical operator needs booleans, got a {}", l.type_name())));
            };
            if (op == BinOp::And && !l) || (op == BinOp::Or && l) {
                return Ok(Value::Bool(l));
            }
            return match self.eval(rhs)? {
                Value::Bool(r) => Ok(Value::Bool(r)),
                r => Err(type_error(pos, format!("logical operator needs booleans, got a {}", r.type_name()))),
            };
        }
        let l = self.eval(lhs)?;
        let r = self.eval(rhs)?;
        match op {
            BinOp::Eq | BinOp::Ne => {
                let same = match (&l, &r) {
                    (Value::Number(a), Value::Number(b)) => a == b,
                    (Value::Bool(a), Value::Bool(b)) => a == b,
                    (Value::Str(a), Value::Str(b)) => a == b,
                    (Value::Rotation(a), Value::Rotation(b)) => a == b,
                    _ => {
                        return Err(type_error(
                            pos,
                            format!("cannot compare a {} with a {}", l.type_name(), r.type_name()),
                        ))
                    }
                };
                Ok(Value::Bool(same == (op == BinOp::Eq)))
            }
            _ => {
                let (Value::Number(a), Value::Number(b)) = (&l, &r) else {
                    return Err(type_error(
                        pos,
                        format!("arithmetic and ordering need numbers, got a {} and a {}", l.type_name(), r.type_name()),
                    ));
                };
                let (a, b) = (*a, *b);
                let out = match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(PlacementError::DivisionByZero {
                                line: pos.line,
                                column: pos.column,
                            });
                        }
                        a / b
                    }
                    BinOp::Lt => return Ok(Value::Bool(a < b)),
                    BinOp::Le => return Ok(Value::Bool(a <= b)),
                    BinOp::Gt => return Ok(Value::Bool(a > b)),
                    BinOp::Ge => return Ok(Value::Bool(a >= b)),
                    _ => unreachable!(),
                };
                if !out.is_finite() {
                    return Err(runtime(pos, "arithmetic produced a non-finite number"));
                }
                Ok(Value::Number(out))
            }
        }
    }

    fn call(&mut self, name: &str, args: &[Expr], pos: Pos) -> Result<Value, PlacementError> {
        if BUILTINS.contains(&name) {
            let vals = args.iter().map(|a| self.eval(a)).collect::<Result<Vec<_>, _>>()?;
            return builtin(name, &vals, pos);
        }
        let Some(tool) = self.registry.get(name) else {
            return Err(PlacementError::UnknownTool {
                name: name.to_string(),
                line: pos.line,
                column: pos.column,
            });
        };
        let sig = &tool.signature;
        if args.len() != sig.params.len() {
            return Err(PlacementError::Arity {
                tool: name.to_string(),
                expected: sig.params.len(),
                found: args.len(),
                line: pos.line,
                column: pos.column,
            });
        }
        let vals = args.iter().map(|a| self.eval(a)).collect::<Result<Vec<_>, _>>()?;
        for ((pname, ty), v) in sig.params.iter().zip(&vals) {
            if !ty.accepts(v) {
                return Err(type_error(
                    pos,
                    format!("`{name}` expects {pname}: {}, got a {}", ty.describe(), v.type_name()),
                ));
            }
        }
        let ctx = ToolContext { graph: self.graph };
        (tool.func)(&ctx, &vals).map_err(|message| PlacementError::Tool {
            tool: name.to_string(),
            message,
        })
    }
}

fn runtime(pos: Pos, message: impl Into<String>) -> PlacementError {
    PlacementError::Runtime {
        line: pos.line,
        column: pos.column,
        message: message.into(),
    }
}

fn type_error(pos: Pos, message: impl Into<String>) -> PlacementError {
    PlacementError::Type {
        line: pos.line,
        column: pos.column,
        message: message.into(),
    }
}

fn builtin(name: &str, args: &[Value], pos: Pos) -> Result<Value, PlacementError> {
    let arity = |n: usize| {
        if args.len() == n {
            Ok(())
        } else {
            Err(PlacementError::Arity {
                tool: name.to_string(),
                expected: n,
                found: args.len(),
                line: pos.line,
                column: pos.column,
            })
        }
    };
    let number = |v: &Value| {
        v.as_number()
            .ok_or_else(|| type_error(pos, format!("`{name}` expects numbers, got a {}", v.type_name())))
    };
    match name {
        "len" => {
            arity(1)?;
            match &args[0] {
                Value::List(items) => Ok(Value::Number(items.len() as f64)),
                v => Err(type_error(pos, format!("`len` expects a list, got a {}", v.type_name()))),
            }
        }
        "fail" => {
            arity(1)?;
            match &args[0] {
                Value::Str(msg) => Err(PlacementError::Raised {
                    message: msg.to_string(),
                    line: pos.line,
                    column: pos.column,
                }),
                v => Err(type_error(pos, format!("`fail` expects a string, got a {}", v.type_name()))),
            }
        }
        "min" | "max" => {
            arity(2)?;
            let (a, b) = (number(&args[0])?, number(&args[1])?);
            Ok(Value::Number(if name == "min" { a.min(b) } else { a.max(b) }))
        }
        "abs" => {
            arity(1)?;
            Ok(Value::Number(number(&args[0])?.abs()))
        }
        _ => unreachable!("only names in BUILTINS reach here"),
    }
}

fn list_index(len: usize, i: &Value, pos: Pos) -> Result<usize, PlacementError> {
    let Value::Number(n) = i else {
        return Err(type_error(pos, format!("index must be a number, got a {}", i.type_name())));
    };
    if n.fract() != 0.0 {
        return Err(type_error(pos, format!("index must be a whole number, got {n}")));
    }
    let idx = if *n < 0.0 { len as f64 + n } else { *n };
    if idx < 0.0 || idx >= len as f64 {
        return Err(runtime(pos, format!("index {n} out of range for length {len}")));
    }
    Ok(idx as usize)
}

fn index_value(target: &Value, index: &Value, pos: Pos) -> Result<Value, PlacementError> {
    match target {
        Value::List(items) => Ok(items[list_index(items.len(), index, pos)?].clone()),
        Value::Route(route) => {
            let wps = route.waypoints();
            Ok(Value::Location(wps[list_index(wps.len(), index, pos)?]))
        }
        Value::Record(fields) => match index {
            Value::Str(key) => fields
                .get(key.as_ref())
                .cloned()
                .ok_or_else(|| runtime(pos, format!("record has no field `{key}`"))),
            v => Err(type_error(pos, format!("record index must be a string, got a {}", v.type_name()))),
        },
        v => Err(type_error(pos, format!("cannot index a {}", v.type_name()))),
    }
}

fn field_value(target: &Value, name: &str, pos: Pos) -> Result<Value, PlacementError> {
    let missing = || runtime(pos, format!("a {} has no field `{name}`", target.type_name()));
    match target {
        Value::Record(fields) => fields.get(name).cloned().ok_or_else(missing),
        Value::Transform(t) => Ok(match name {
            "location" => Value::Location(t.location()),
            "x" => Value::Number(t.x),
            "y" => Value::Number(t.y),
            "z" => Value::Number(t.z),
            "pitch" => Value::Number(t.pitch),
            "yaw" => Value::Number(t.yaw),
            "roll" => Value::Number(t.roll),
            _ => return Err(missing()),
        }),
        Value::Location(l) => Ok(match name {
            "x" => Value::Number(l.x),
            "y" => Value::Number(l.y),
            "z" => Value::Number(l.z),
            _ => return Err(missing()),
        }),
        Value::Route(r) => match name {
            "length" => Ok(Value::Number(r.length())),
            _ => Err(missing()),
        },
        _ => Err(missing()),
    }
}
