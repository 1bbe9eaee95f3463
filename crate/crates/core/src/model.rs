//! Locomotive assignment model over a space-time network, plus the
//! work-event activation extensions.
//!
//! Variable names: `x_a{arc}`, `yso_a{arc}`, `ypu_a{arc}`, `u_a{arc}`,
//! `z1_k{k}`, `z2_k{k}_d{d}`, `w1_k{k}`, `w2_k{k}_d{d}`.
//!
//! Constraint tags: `flow:node_{n}`, `so:arc_{a}`, `pu:arc_{a}`,
//! `lt:arc_{a}`, `mutex:arc_{a}` (transition arc), and for extensions
//! `{version}:({row}):k{k}_d{d}` or `{version}:({row})` for budget rows,
//! where `version` is one of `V1`, `V1p`, `V2`, `V3`, `V4`, `V5`. Bound
//! violations of train-arc flows are reported as `cap:leg_{a}`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::instance::{BaselinePlan, CostParams, RailcarEvent, TerminalId, DAY_MINUTES};
use crate::milp::{CostComponent, Integrality, MilpModel, Sense, Subject, VarFamily, VarId};
use crate::solver::{check_feasibility, Solution};
use crate::spacetime::{ArcId, ArcKind, SpaceTimeNetwork};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("{version} requires parameter {param}")]
    MissingParameter { version: Extension, param: &'static str },
    #[error("{0} requires a baseline work-event plan")]
    MissingBaseline(Extension),
    #[error("starting solution has no value for variable {0}")]
    MissingVariable(String),
    #[error("starting solution violates: {}", .0.join(", "))]
    InfeasibleStart(Vec<String>),
}

pub fn x_name(a: ArcId) -> String {
    format!("x_a{a}")
}
pub fn yso_name(a: ArcId) -> String {
    format!("yso_a{a}")
}
pub fn ypu_name(a: ArcId) -> String {
    format!("ypu_a{a}")
}
pub fn u_name(a: ArcId) -> String {
    format!("u_a{a}")
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelOptions {
    /// Forbid a pick-up and a set-out at the same stop.
    pub mutual_exclusion: bool,
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self { mutual_exclusion: true }
    }
}

/// Upper bound on the flow of any arc: no optimal circulation carries more
/// units than all train legs can hold together.
fn flow_cap(net: &SpaceTimeNetwork, costs: &CostParams) -> f64 {
    let legs = net.arcs.iter().filter(|a| a.kind == ArcKind::Train).count();
    (legs as u64 * costs.f as u64) as f64
}

/// Work-event cost coefficients at one stop.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RcTerm {
    pub transition: ArcId,
    pub setout_arc: ArcId,
    pub pickup_arc: ArcId,
    pub setout_coef: f64,
    pub pickup_coef: f64,
}

pub fn rc_coefficients(event: RailcarEvent, costs: &CostParams) -> (f64, f64) {
    let (c1, c2, c3) = (costs.c1, costs.c2, costs.c3);
    match event {
        RailcarEvent::SetOut => (c1, c2),
        RailcarEvent::PickUp => (c2, c1),
        RailcarEvent::NoEvent => (c3, c3),
        RailcarEvent::Both => (c1, c1),
    }
}

pub fn rc_penalty_terms(net: &SpaceTimeNetwork, costs: &CostParams) -> Vec<RcTerm> {
    net.arcs_of_kind(ArcKind::Transition, |_| true)
        .into_iter()
        .filter_map(|a| {
            let (so, pu) = a.stop_arcs?;
            let event = a.flags?.event()?;
            let (setout_coef, pickup_coef) = rc_coefficients(event, costs);
            Some(RcTerm {
                transition: a.id,
                setout_arc: so,
                pickup_arc: pu,
                setout_coef,
                pickup_coef,
            })
        })
        .collect()
}

/// Builds the base model on a network that already holds its light arcs.
pub fn build_base_model(net: &SpaceTimeNetwork, costs: &CostParams, opts: &ModelOptions) -> MilpModel {
    let mut m = MilpModel::new();
    let cap = flow_cap(net, costs);
    let f = costs.f as f64;
    let rho = costs.rho_u as f64;

    let mut x = Vec::with_capacity(net.arcs.len());
    for a in &net.arcs {
        let id = if a.kind == ArcKind::Train {
            let v = m.add_var(x_name(a.id), VarFamily::X, Subject::Arc(a.id), a.b as f64, f, Integrality::Integer);
            m.variables[v].bound_tag = format!("cap:leg_{}", a.id);
            v
        } else {
            m.add_var(x_name(a.id), VarFamily::X, Subject::Arc(a.id), 0.0, cap, Integrality::Integer)
        };
        x.push(id);
    }

    let mut offset = 0.0;
    for a in &net.arcs {
        if a.wrap_count > 0 {
            m.add_objective(x[a.id], costs.q * a.wrap_count as f64, CostComponent::Ownership);
        }
        match a.kind {
            ArcKind::Train => {
                let g = costs.unit_cost(a.travel);
                m.add_objective(x[a.id], g, CostComponent::Deadhead);
                offset -= g * a.b as f64;
            }
            ArcKind::Light => {
                m.add_objective(x[a.id], costs.unit_cost(a.travel), CostComponent::LightTravel);
            }
            _ => {}
        }
    }
    m.offset = offset;
    m.offset_component = Some(CostComponent::Deadhead);

    for a in net.setout_arcs() {
        let y = m.add_var(yso_name(a.id), VarFamily::YSo, Subject::Arc(a.id), 0.0, 1.0, Integrality::Binary);
        m.add_constraint(vec![(x[a.id], 1.0), (y, -f)], Sense::Le, 0.0, format!("so:arc_{}", a.id));
    }
    for a in net.pickup_arcs() {
        let y = m.add_var(ypu_name(a.id), VarFamily::YPu, Subject::Arc(a.id), 0.0, 1.0, Integrality::Binary);
        m.add_constraint(vec![(x[a.id], 1.0), (y, -f)], Sense::Le, 0.0, format!("pu:arc_{}", a.id));
    }
    for a in net.arcs_of_kind(ArcKind::Light, |_| true) {
        let u_cap = (cap / rho).ceil();
        let u = m.add_var(u_name(a.id), VarFamily::U, Subject::Arc(a.id), 0.0, u_cap, Integrality::Integer);
        m.add_constraint(vec![(x[a.id], 1.0), (u, -rho)], Sense::Le, 0.0, format!("lt:arc_{}", a.id));
        m.add_objective(u, costs.light_fixed_cost(a.travel), CostComponent::LightTravel);
    }

    for n in &net.nodes {
        let mut terms: Vec<(VarId, f64)> = net.in_arcs[n.id].iter().map(|&a| (x[a], 1.0)).collect();
        terms.extend(net.out_arcs[n.id].iter().map(|&a| (x[a], -1.0)));
        m.add_constraint(terms, Sense::Eq, 0.0, format!("flow:node_{}", n.id));
    }

    for t in rc_penalty_terms(net, costs) {
        let so = m.var_id(&yso_name(t.setout_arc)).expect("set-out variable");
        let pu = m.var_id(&ypu_name(t.pickup_arc)).expect("pick-up variable");
        m.add_objective(so, t.setout_coef, CostComponent::WorkEvents);
        m.add_objective(pu, t.pickup_coef, CostComponent::WorkEvents);
        if opts.mutual_exclusion {
            m.add_constraint(vec![(so, 1.0), (pu, 1.0)], Sense::Le, 1.0, format!("mutex:arc_{}", t.transition));
        }
    }
    m
}

/// Work-event variables grouped by the terminal and day of their stop. The
/// day is taken from the arrival at the stop.
pub fn group_events_by_terminal_day(net: &SpaceTimeNetwork, m: &MilpModel) -> BTreeMap<(TerminalId, u32), Vec<VarId>> {
    let mut out: BTreeMap<(TerminalId, u32), Vec<VarId>> = BTreeMap::new();
    for a in net.arcs_of_kind(ArcKind::Transition, |_| true) {
        let Some((so, pu)) = a.stop_arcs else { continue };
        let tail = net.node(a.tail);
        let day = (tail.time / DAY_MINUTES) as u32;
        let entry = out.entry((tail.terminal, day)).or_default();
        entry.extend(m.var_id(&yso_name(so)));
        entry.extend(m.var_id(&ypu_name(pu)));
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Extension {
    V0,
    V1,
    V1Prime,
    V2,
    V3,
    V4,
    V5,
}

impl Extension {
    pub fn tag(self) -> &'static str {
        match self {
            Extension::V0 => "V0",
            Extension::V1 => "V1",
            Extension::V1Prime => "V1p",
            Extension::V2 => "V2",
            Extension::V3 => "V3",
            Extension::V4 => "V4",
            Extension::V5 => "V5",
        }
    }

    pub fn needs_baseline(self) -> bool {
        matches!(self, Extension::V1 | Extension::V1Prime | Extension::V2 | Extension::V3)
    }
}

impl fmt::Display for Extension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Extension {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_uppercase().as_str() {
            "V0" => Ok(Extension::V0),
            "V1" => Ok(Extension::V1),
            "V1P" | "V1'" | "V1PRIME" => Ok(Extension::V1Prime),
            "V2" => Ok(Extension::V2),
            "V3" => Ok(Extension::V3),
            "V4" => Ok(Extension::V4),
            "V5" => Ok(Extension::V5),
            _ => Err(format!("unknown extension {s:?} (V0, V1, V1p, V2, V3, V4, V5)")),
        }
    }
}

pub const DEFAULT_THETA: u32 = 6;

#[derive(Clone, Debug, PartialEq)]
pub struct ExtensionConfig {
    pub version: Extension,
    pub lambda: Option<u32>,
    /// Daily cap on work events per terminal; `None` means unlimited.
    pub theta: Option<u32>,
    pub alpha_c: Option<u32>,
    pub alpha_d: Option<u32>,
    pub alpha_e: Option<u32>,
    pub alpha_f: Option<u32>,
}

impl ExtensionConfig {
    pub fn new(version: Extension) -> Self {
        Self {
            version,
            lambda: None,
            theta: Some(DEFAULT_THETA),
            alpha_c: None,
            alpha_d: None,
            alpha_e: None,
            alpha_f: None,
        }
    }

    /// Sets the budget parameter that belongs to the version.
    pub fn with_budget(mut self, value: u32) -> Self {
        match self.version {
            Extension::V0 | Extension::V1Prime => {}
            Extension::V1 => self.lambda = Some(value),
            Extension::V2 => self.alpha_c = Some(value),
            Extension::V3 => self.alpha_d = Some(value),
            Extension::V4 => self.alpha_e = Some(value),
            Extension::V5 => self.alpha_f = Some(value),
        }
        self
    }

    pub fn with_theta(mut self, theta: Option<u32>) -> Self {
        self.theta = theta;
        self
    }

    /// The budget parameter of the version, if it has one.
    pub fn budget(&self) -> Option<u32> {
        match self.version {
            Extension::V0 | Extension::V1Prime => None,
            Extension::V1 => self.lambda,
            Extension::V2 => self.alpha_c,
            Extension::V3 => self.alpha_d,
            Extension::V4 => self.alpha_e,
            Extension::V5 => self.alpha_f,
        }
    }
}

fn need(v: Option<u32>, version: Extension, param: &'static str) -> Result<u32, ModelError> {
    v.ok_or(ModelError::MissingParameter { version, param })
}

struct Rows<'a> {
    m: MilpModel,
    groups: &'a BTreeMap<(TerminalId, u32), Vec<VarId>>,
    theta: Option<u32>,
}

impl Rows<'_> {
    fn events(&self, k: TerminalId, d: u32) -> Option<Vec<(VarId, f64)>> {
        let vars = self.groups.get(&(k, d))?;
        (!vars.is_empty()).then(|| vars.iter().map(|&v| (v, 1.0)).collect())
    }

    fn cap(&mut self, k: TerminalId, d: u32, rhs: f64, tag: String) {
        if let Some(t) = self.events(k, d) {
            self.m.add_constraint(t, Sense::Le, rhs, tag);
        }
    }

    fn theta_cap(&mut self, k: TerminalId, d: u32, tag: String) {
        if let Some(theta) = self.theta {
            self.cap(k, d, theta as f64, tag);
        }
    }

    fn zero(&mut self, k: TerminalId, d: u32, tag: String) {
        if let Some(t) = self.events(k, d) {
            self.m.add_constraint(t, Sense::Eq, 0.0, tag);
        }
    }

    /// Σ events ≤ θ · activation, with θ = ∞ replaced by the number of
    /// event variables in the row.
    fn gated(&mut self, k: TerminalId, d: u32, gate: VarId, tag: String) {
        if let Some(mut t) = self.events(k, d) {
            let m = self.theta.map(|x| x as f64).unwrap_or(t.len() as f64);
            t.push((gate, -m));
            self.m.add_constraint(t, Sense::Le, 0.0, tag);
        }
    }
}

fn kd(k: TerminalId, d: u32) -> String {
    format!("k{}_d{}", k.0, d)
}

/// Returns a copy of `m` with the constraint families of the configured
/// version added.
pub fn apply_extension(
    m: &MilpModel,
    net: &SpaceTimeNetwork,
    baseline: Option<&BaselinePlan>,
    cfg: &ExtensionConfig,
) -> Result<MilpModel, ModelError> {
    let v = cfg.version;
    if v == Extension::V0 {
        return Ok(m.clone());
    }
    let base = match baseline {
        Some(b) => Some(b),
        None if v.needs_baseline() => return Err(ModelError::MissingBaseline(v)),
        None => None,
    };
    let n_terms = net.terminal_count();
    let days = base.map(|b| b.days).unwrap_or_else(|| net.costs.days());
    let groups = group_events_by_terminal_day(net, m);
    let mut rows = Rows {
        m: m.clone(),
        groups: &groups,
        theta: cfg.theta,
    };
    let terminals: Vec<TerminalId> = (0..n_terms).map(TerminalId).collect();
    let h = |k: TerminalId, d: u32| base.map(|b| b.count(k, d)).unwrap_or(0);
    let t = v.tag();

    match v {
        Extension::V0 => unreachable!(),
        Extension::V1 => {
            let lambda = need(cfg.lambda, v, "lambda")?;
            for &k in &terminals {
                for d in 0..days {
                    if h(k, d) > 0 {
                        rows.cap(k, d, (h(k, d) + lambda) as f64, format!("{t}:(11):{}", kd(k, d)));
                        rows.theta_cap(k, d, format!("{t}:(12):{}", kd(k, d)));
                    } else {
                        rows.zero(k, d, format!("{t}:(13):{}", kd(k, d)));
                    }
                }
            }
        }
        Extension::V1Prime | Extension::V2 | Extension::V3 => {
            let base = base.expect("checked above");
            let inactive: Vec<TerminalId> = base.inactive_terminals(n_terms);
            let alpha = match v {
                Extension::V2 => Some(need(cfg.alpha_c, v, "alpha_c")?),
                Extension::V3 => Some(need(cfg.alpha_d, v, "alpha_d")?),
                _ => None,
            };
            let mut z1 = BTreeMap::new();
            if v == Extension::V2 {
                for &k in &inactive {
                    let z = rows.m.add_var(format!("z1_k{}", k.0), VarFamily::Z1, Subject::Terminal(k), 0.0, 1.0, Integrality::Binary);
                    z1.insert(k, z);
                }
                let terms = z1.values().map(|&z| (z, 1.0)).collect();
                rows.m.add_constraint(terms, Sense::Le, alpha.unwrap() as f64, format!("{t}:(16)"));
            }
            let mut z2 = Vec::new();
            for &k in &terminals {
                for d in 0..days {
                    let here = kd(k, d);
                    if h(k, d) > 0 {
                        rows.cap(k, d, 2.0 * h(k, d) as f64, format!("{t}:(14):{here}"));
                        rows.theta_cap(k, d, format!("{t}:(15):{here}"));
                    } else if let Some(&z) = z1.get(&k) {
                        rows.gated(k, d, z, format!("{t}:(17):{here}"));
                    } else if v == Extension::V3 {
                        let z = rows.m.add_var(
                            format!("z2_k{}_d{}", k.0, d),
                            VarFamily::Z2,
                            Subject::TerminalDay(k, d),
                            0.0,
                            1.0,
                            Integrality::Binary,
                        );
                        z2.push(z);
                        rows.gated(k, d, z, format!("{t}:(20):{here}"));
                    } else {
                        rows.zero(k, d, format!("{t}:(13):{here}"));
                    }
                }
            }
            if v == Extension::V3 {
                let terms = z2.iter().map(|&z| (z, 1.0)).collect();
                rows.m.add_constraint(terms, Sense::Le, alpha.unwrap() as f64, format!("{t}:(19)"));
            }
        }
        Extension::V4 => {
            let alpha = need(cfg.alpha_e, v, "alpha_e")?;
            let mut w = Vec::new();
            for &k in &terminals {
                let g = rows.m.add_var(format!("w1_k{}", k.0), VarFamily::W1, Subject::Terminal(k), 0.0, 1.0, Integrality::Binary);
                w.push(g);
                for d in 0..days {
                    rows.gated(k, d, g, format!("{t}:(23):{}", kd(k, d)));
                }
            }
            let terms = w.iter().map(|&z| (z, 1.0)).collect();
            rows.m.add_constraint(terms, Sense::Le, alpha as f64, format!("{t}:(22)"));
        }
        Extension::V5 => {
            let alpha = need(cfg.alpha_f, v, "alpha_f")?;
            let mut w = Vec::new();
            for &k in &terminals {
                for d in 0..days {
                    let g = rows.m.add_var(
                        format!("w2_k{}_d{}", k.0, d),
                        VarFamily::W2,
                        Subject::TerminalDay(k, d),
                        0.0,
                        1.0,
                        Integrality::Binary,
                    );
                    w.push(g);
                    rows.gated(k, d, g, format!("{t}:(26):{}", kd(k, d)));
                }
            }
            let terms = w.iter().map(|&z| (z, 1.0)).collect();
            rows.m.add_constraint(terms, Sense::Le, alpha as f64, format!("{t}:(25)"));
        }
    }
    Ok(rows.m)
}

/// Attaches a starting assignment taken from `sol`. Activation variables
/// missing from `sol` are set to 1 exactly when a work event occurs in a row
/// they gate. The assignment must satisfy every constraint of `m`.
pub fn warm_start_from(m: &MilpModel, sol: &Solution) -> Result<MilpModel, ModelError> {
    let mut values: Vec<Option<i64>> = m.variables.iter().map(|v| sol.values.get(&v.name).copied()).collect();
    for (i, v) in m.variables.iter().enumerate() {
        if values[i].is_some() {
            continue;
        }
        if !matches!(v.family, VarFamily::Z1 | VarFamily::Z2 | VarFamily::W1 | VarFamily::W2) {
            return Err(ModelError::MissingVariable(v.name.clone()));
        }
        let used = m
            .constraints
            .iter()
            .filter(|c| c.terms.iter().any(|&(t, coef)| t == i && coef < 0.0))
            .any(|c| c.terms.iter().any(|&(t, _)| t != i && values[t].unwrap_or(0) != 0));
        values[i] = Some(used as i64);
    }
    let values: Vec<i64> = values.into_iter().map(|v| v.expect("filled")).collect();
    let violations = check_feasibility(m, &values);
    if !violations.is_empty() {
        return Err(ModelError::InfeasibleStart(violations.into_iter().map(|v| v.tag).collect()));
    }
    let mut out = m.clone();
    out.start = Some(values);
    Ok(out)
}
