use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reducers::{ReductionMethod, ReductionPlan, Scope, DEFAULT_TARGET_DIM};

/// A reduction plan under the name method rows refer to it by.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedPlan {
    pub name: String,
    pub plan: ReductionPlan,
}

impl NamedPlan {
    pub fn new(name: impl Into<String>, plan: ReductionPlan) -> Self {
        Self {
            name: name.into(),
            plan,
        }
    }
}

/// The standard method names with their default plans.
pub fn builtin_methods() -> Vec<NamedPlan> {
    use ReductionMethod::*;
    let local = |m| ReductionPlan {
        method: m,
        scope: Scope::Local,
        target_dim: DEFAULT_TARGET_DIM,
        pca_postprocess: false,
    };
    vec![
        NamedPlan::new("DC", local(Dct)),
        NamedPlan::new("g-DC", ReductionPlan::for_method(GlobalDct)),
        NamedPlan::new("PC", local(Pca)),
        NamedPlan::new("CHI", local(Chi)),
        NamedPlan::new("LB", local(LbpChi)),
        NamedPlan::new("CoOC", local(Cooc)),
        NamedPlan::new("GEP", local(Gep)),
        NamedPlan::new("GMTP", local(Gmtp)),
        NamedPlan::new("RAW", ReductionPlan::raw()),
    ]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowKind {
    /// Sum-rule fusion of every classifier built with one of `methods`, minus those on
    /// the last `drop_last` selected layers.
    Fusion {
        methods: Vec<String>,
        drop_last: usize,
    },
    /// Forward floating selection of at most `max_size` classifiers.
    Sffs { max_size: usize },
}

/// One line of the results table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodRow {
    pub label: String,
    pub kind: RowKind,
}

impl MethodRow {
    pub fn methods(&self) -> &[String] {
        match &self.kind {
            RowKind::Fusion { methods, .. } => methods,
            RowKind::Sffs { .. } => &[],
        }
    }
}

fn unknown_method(name: &str, known: &[String]) -> Error {
    Error::config(format!(
        "unknown method {name:?}; valid methods: {}",
        known.join(", ")
    ))
}

fn parse_count(text: &str, row: &str) -> Result<usize> {
    text.parse::<usize>()
        .map_err(|_| Error::config(format!("row {row:?}: {text:?} is not a count")))
}

/// Parses `DC`, `DC+GMTP`, `(DC+GMTP)-2` or `SFFS(10)`; method names must be in `known`.
pub fn parse_row(text: &str, known: &[String]) -> Result<MethodRow> {
    let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if compact.is_empty() {
        return Err(Error::config("empty method row"));
    }
    if let Some(inner) = compact
        .strip_prefix("SFFS(")
        .and_then(|rest| rest.strip_suffix(')'))
    {
        let max_size = parse_count(inner, &compact)?;
        if max_size == 0 {
            return Err(Error::config(format!("row {compact:?}: SFFS size must be at least 1")));
        }
        return Ok(MethodRow {
            label: compact.clone(),
            kind: RowKind::Sffs { max_size },
        });
    }
    let (body, drop_last) = if let Some(rest) = compact.strip_prefix('(') {
        let close = rest
            .rfind(')')
            .ok_or_else(|| Error::config(format!("row {compact:?}: unbalanced parenthesis")))?;
        let tail = &rest[close + 1..];
        let drop = match tail.strip_prefix('-') {
            Some(n) => parse_count(n, &compact)?,
            None if tail.is_empty() => 0,
            None => {
                return Err(Error::config(format!(
                    "row {compact:?}: expected \"-k\" after the parenthesis"
                )))
            }
        };
        (&rest[..close], drop)
    } else {
        (compact.as_str(), 0)
    };
    let mut methods: Vec<String> = Vec::new();
    for name in body.split('+') {
        if name.is_empty() {
            return Err(Error::config(format!("row {compact:?}: empty method name")));
        }
        if !known.iter().any(|k| k == name) {
            return Err(unknown_method(name, known));
        }
        if !methods.iter().any(|m| m == name) {
            methods.push(name.to_string());
        }
    }
    Ok(MethodRow {
        label: compact,
        kind: RowKind::Fusion { methods, drop_last },
    })
}
