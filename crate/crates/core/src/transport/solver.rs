use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::entropic::{solve_entropic, EntropicOptions};
use super::plan::{BlockPlan, DualPotentials};
use super::problem::TransportProblem;
use super::simplex::{solve_exact, DEFAULT_CAP};
use crate::error::{Result, SotxError};

/// A block-LP solver selectable by name.
pub trait TransportSolver: Send + Sync {
    fn name(&self) -> &'static str;

    fn solve(&self, p: &TransportProblem) -> Result<(BlockPlan, DualPotentials)>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default = "default_cap")]
    pub cap: usize,
}

fn default_cap() -> usize {
    DEFAULT_CAP
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self {
            kind: "exact".into(),
            epsilon: None,
            cap: DEFAULT_CAP,
        }
    }
}

struct Exact {
    cap: usize,
}

impl TransportSolver for Exact {
    fn name(&self) -> &'static str {
        "exact"
    }

    fn solve(&self, p: &TransportProblem) -> Result<(BlockPlan, DualPotentials)> {
        solve_exact(p, self.cap)
    }
}

struct Entropic {
    opts: EntropicOptions,
    cap: usize,
}

impl TransportSolver for Entropic {
    fn name(&self) -> &'static str {
        "entropic"
    }

    fn solve(&self, p: &TransportProblem) -> Result<(BlockPlan, DualPotentials)> {
        let points = p.n_sources() + p.n_targets();
        if points > self.cap {
            return Err(SotxError::SizeCap { points, cap: self.cap });
        }
        solve_entropic(p, &self.opts)
    }
}

type Factory = fn(&SolverSpec) -> Result<Box<dyn TransportSolver>>;

fn registry() -> BTreeMap<&'static str, Factory> {
    let mut r: BTreeMap<&'static str, Factory> = BTreeMap::new();
    r.insert("exact", |s| Ok(Box::new(Exact { cap: s.cap })));
    r.insert("entropic", |s| {
        let epsilon = s
            .epsilon
            .ok_or_else(|| SotxError::Invalid("entropic solver needs epsilon".into()))?;
        Ok(Box::new(Entropic {
            opts: EntropicOptions {
                epsilon,
                ..Default::default()
            },
            cap: s.cap,
        }))
    });
    r
}

pub fn solver_names() -> Vec<&'static str> {
    registry().keys().copied().collect()
}

pub fn build_solver(spec: &SolverSpec) -> Result<Box<dyn TransportSolver>> {
    let factory = registry().get(spec.kind.as_str()).copied().ok_or_else(|| SotxError::Unknown {
        kind: "solver",
        name: spec.kind.clone(),
    })?;
    factory(spec)
}
