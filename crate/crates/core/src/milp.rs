//! Solver-agnostic mixed-integer linear model.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::instance::TerminalId;
use crate::spacetime::ArcId;

pub type VarId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VarFamily {
    X,
    YSo,
    YPu,
    U,
    Z1,
    Z2,
    W1,
    W2,
    /// Columns read from a file that follow no naming convention.
    Other,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Subject {
    None,
    Arc(ArcId),
    Terminal(TerminalId),
    TerminalDay(TerminalId, u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrality {
    Continuous,
    Integer,
    Binary,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Variable {
    pub id: VarId,
    pub name: String,
    pub family: VarFamily,
    pub subject: Subject,
    pub lower: f64,
    pub upper: f64,
    pub integrality: Integrality,
    /// Tag reported when a value leaves the variable's bounds.
    pub bound_tag: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinearConstraint {
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    pub tag: String,
}

impl LinearConstraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * values[v]).sum()
    }
}

/// Which objective term a coefficient belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CostComponent {
    Ownership,
    Deadhead,
    LightTravel,
    WorkEvents,
    Other,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ObjectiveTerm {
    pub var: VarId,
    pub coef: f64,
    pub component: CostComponent,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub ownership: f64,
    pub deadhead: f64,
    pub light_travel: f64,
    pub work_events: f64,
    pub other: f64,
}

impl Decomposition {
    pub fn total(&self) -> f64 {
        self.ownership + self.deadhead + self.light_travel + self.work_events + self.other
    }

    fn add(&mut self, c: CostComponent, v: f64) {
        match c {
            CostComponent::Ownership => self.ownership += v,
            CostComponent::Deadhead => self.deadhead += v,
            CostComponent::LightTravel => self.light_travel += v,
            CostComponent::WorkEvents => self.work_events += v,
            CostComponent::Other => self.other += v,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct MilpModel {
    pub variables: Vec<Variable>,
    pub constraints: Vec<LinearConstraint>,
    pub objective: Vec<ObjectiveTerm>,
    pub offset: f64,
    pub offset_component: Option<CostComponent>,
    /// Starting assignment, one value per variable.
    #[serde(skip)]
    pub start: Option<Vec<i64>>,
    #[serde(skip)]
    index: HashMap<String, VarId>,
}

impl MilpModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        family: VarFamily,
        subject: Subject,
        lower: f64,
        upper: f64,
        integrality: Integrality,
    ) -> VarId {
        let name = name.into();
        let id = self.variables.len();
        assert!(!self.index.contains_key(&name), "duplicate variable {name}");
        self.index.insert(name.clone(), id);
        self.variables.push(Variable {
            id,
            bound_tag: format!("bound:{name}"),
            name,
            family,
            subject,
            lower,
            upper,
            integrality,
        });
        id
    }

    /// Adds a constraint after merging repeated variables and dropping
    /// zero coefficients.
    pub fn add_constraint(&mut self, terms: Vec<(VarId, f64)>, sense: Sense, rhs: f64, tag: impl Into<String>) {
        let terms = canonical_terms(terms);
        for &(v, _) in &terms {
            assert!(v < self.variables.len(), "undeclared variable {v}");
        }
        self.constraints.push(LinearConstraint {
            terms,
            sense,
            rhs,
            tag: tag.into(),
        });
    }

    pub fn add_objective(&mut self, var: VarId, coef: f64, component: CostComponent) {
        if coef != 0.0 {
            self.objective.push(ObjectiveTerm { var, coef, component });
        }
    }

    pub fn var_id(&self, name: &str) -> Option<VarId> {
        self.index.get(name).copied()
    }

    pub fn var(&self, name: &str) -> Option<&Variable> {
        self.var_id(name).map(|i| &self.variables[i])
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn count_family(&self, family: VarFamily) -> usize {
        self.variables.iter().filter(|v| v.family == family).count()
    }

    /// Dense objective vector with all components summed.
    pub fn cost_vector(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.variables.len()];
        for t in &self.objective {
            c[t.var] += t.coef;
        }
        c
    }

    pub fn evaluate(&self, values: &[f64]) -> (f64, Decomposition) {
        let mut d = Decomposition::default();
        for t in &self.objective {
            d.add(t.component, t.coef * values[t.var]);
        }
        d.add(self.offset_component.unwrap_or(CostComponent::Other), self.offset);
        (d.total(), d)
    }

    pub fn constraints_tagged<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a LinearConstraint> + 'a {
        self.constraints.iter().filter(move |c| c.tag.starts_with(prefix))
    }
}

pub(crate) fn canonical_terms(terms: Vec<(VarId, f64)>) -> Vec<(VarId, f64)> {
    let mut terms = terms;
    terms.sort_by_key(|t| t.0);
    let mut out: Vec<(VarId, f64)> = Vec::with_capacity(terms.len());
    for (v, c) in terms {
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 += c,
            _ => out.push((v, c)),
        }
    }
    out.retain(|t| t.1 != 0.0);
    out
}
