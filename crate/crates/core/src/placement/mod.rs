//! A small, non-Turing-complete language for placing agents on a road graph.
//!
//! Programs are a sequence of `let` bindings ending in one `return`. The only
//! functions callable are the registered tools plus a handful of builtins, so
//! a program cannot touch the filesystem, the network or the clock.

mod ast;
mod interp;
mod lexer;
mod parser;
pub mod registry;
mod result;
pub mod value;

use thiserror::Error;

use crate::config::{AgentRole, SceneConfig};
use crate::road::RoadGraph;

pub use ast::{BinOp, Expr, ExprKind, Stmt, UnOp};
pub use interp::BUILTINS;
pub use registry::{SemanticType, Tool, ToolContext, ToolFn, ToolRegistry, ToolSignature};
pub use result::{AgentPlacement, PlacedTrigger, PlacementResult, MAX_SPAWN_LATERAL, ON_ROUTE_TOLERANCE};
pub use value::Value;

pub const MAX_STATEMENTS: usize = 500;
pub const MAX_STEPS: usize = 10_000;

/// 1-based source position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlacementError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("program has {statements} statements, more than the limit of {MAX_STATEMENTS}")]
    TooLarge { statements: usize },
    #[error("unknown tool `{name}` at line {line}, column {column}")]
    UnknownTool { name: String, line: usize, column: usize },
    #[error("unknown variable `{name}` at line {line}, column {column}")]
    UnknownVariable { name: String, line: usize, column: usize },
    #[error("`{tool}` takes {expected} arguments, got {found} (line {line}, column {column})")]
    Arity {
        tool: String,
        expected: usize,
        found: usize,
        line: usize,
        column: usize,
    },
    #[error("type error at line {line}, column {column}: {message}")]
    Type { line: usize, column: usize, message: String },
    #[error("{message}")]
    Tool { tool: String, message: String },
    #[error("{message}")]
    Raised { message: String, line: usize, column: usize },
    #[error("division by zero at line {line}, column {column}")]
    DivisionByZero { line: usize, column: usize },
    #[error("runtime error at line {line}, column {column}: {message}")]
    Runtime { line: usize, column: usize, message: String },
    #[error("evaluation exceeded the budget of {budget} steps")]
    BudgetExceeded { budget: usize },
    #[error("invalid placement result: {0}")]
    ResultShape(String),
    #[error("cannot apply placement to scene: {0}")]
    Apply(String),
}

impl PlacementError {
    /// True for errors found before any evaluation happened.
    pub fn is_static(&self) -> bool {
        matches!(self, PlacementError::Syntax { .. } | PlacementError::TooLarge { .. })
    }
}

/// A parsed program, kept together with its source text.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacementProgram {
    source: String,
    stmts: Vec<Stmt>,
}

impl PlacementProgram {
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn statements(&self) -> &[Stmt] {
        &self.stmts
    }
}

pub fn parse_program(source: &str) -> Result<PlacementProgram, PlacementError> {
    Ok(PlacementProgram {
        source: source.to_string(),
        stmts: parser::parse(source)?,
    })
}

/// Runs a program against the standard tool library.
pub fn interpret(program: &PlacementProgram, graph: &RoadGraph) -> Result<PlacementResult, PlacementError> {
    interpret_with(program, graph, &ToolRegistry::standard())
}

pub fn interpret_with(
    program: &PlacementProgram,
    graph: &RoadGraph,
    registry: &ToolRegistry,
) -> Result<PlacementResult, PlacementError> {
    let value = evaluate(program, graph, registry, MAX_STEPS)?;
    PlacementResult::from_value(&value).map_err(PlacementError::ResultShape)
}

/// Evaluates to the raw returned value, without interpreting it as a placement.
pub fn evaluate(
    program: &PlacementProgram,
    graph: &RoadGraph,
    registry: &ToolRegistry,
    budget: usize,
) -> Result<Value, PlacementError> {
    interp::Machine::new(graph, registry, budget).run(&program.stmts)
}

/// Tool documentation as given to the model.
pub fn registry_doc() -> String {
    ToolRegistry::standard().doc()
}

/// Writes a placement into a scene and marks it resolved.
///
/// Result keys name scene agents; a list-form result uses `subject` and
/// `lead`, which also match the agent holding that role. Every scene agent
/// must be placed, the subject included.
pub fn apply_to_scene(
    scene: &SceneConfig,
    result: &PlacementResult,
    program: &PlacementProgram,
) -> Result<SceneConfig, PlacementError> {
    let apply_err = |m: String| PlacementError::Apply(m);
    let mut out = scene.clone();
    let resolve = |key: &str| -> Option<usize> {
        if let Some(i) = scene.agents.iter().position(|a| a.id == key) {
            return Some(i);
        }
        let role = match key {
            "subject" => AgentRole::Subject,
            "lead" => AgentRole::Lead,
            _ => return None,
        };
        let mut with_role = scene.agents.iter().enumerate().filter(|(_, a)| a.role == role);
        match (with_role.next(), with_role.next()) {
            (Some((i, _)), None) => Some(i),
            _ => None,
        }
    };
    let mut placed = vec![false; scene.agents.len()];
    for (key, p) in &result.agents {
        let i = resolve(key).ok_or_else(|| apply_err(format!("result places `{key}`, which is not a scene agent")))?;
        if placed[i] {
            return Err(apply_err(format!("agent `{}` is placed twice", scene.agents[i].id)));
        }
        placed[i] = true;
        out.agents[i].spawn = Some(p.spawn);
        out.agents[i].target = Some(p.target);
    }
    if !scene.agents.iter().any(|a| a.role == AgentRole::Subject) {
        return Err(apply_err("scene has no subject agent".into()));
    }
    if let Some((i, _)) = placed.iter().enumerate().find(|(_, p)| !**p) {
        return Err(apply_err(format!("agent `{}` was not placed", scene.agents[i].id)));
    }
    if let Some(t) = &result.trigger {
        let i = resolve(&t.agent).ok_or_else(|| apply_err(format!("trigger agent `{}` is not a scene agent", t.agent)))?;
        let w = resolve(&t.spec.watched_agent)
            .ok_or_else(|| apply_err(format!("watched agent `{}` is not a scene agent", t.spec.watched_agent)))?;
        let mut spec = t.spec.clone();
        spec.watched_agent = scene.agents[w].id.clone();
        out.agents[i].trigger = Some(spec);
    }
    if let Some(min) = result.route_min_length {
        out.route_min_length = Some(min);
    }
    out.route = Some(result.route.to_points());
    out.placement_program = Some(program.source().to_string());
    out.resolved = true;
    Ok(out)
}

#[cfg(test)]
pub(crate) mod tests;
