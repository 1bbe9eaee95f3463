//! Plan statistics: fleet size, work events, repositioning and the weekly
//! locomotive-minute ledger.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::milp::{Decomposition, MilpModel};
use crate::model::{group_events_by_terminal_day, u_name, x_name, yso_name, ypu_name};
use crate::solver::{check_solution, Solution, SolverError, Status};
use crate::spacetime::{ArcKind, SpaceTimeNetwork};

#[derive(Debug, Error, PartialEq)]
pub enum ReportError {
    #[error("solution has no incumbent (status {0})")]
    NoIncumbent(Status),
    #[error("solution violates: {}", .0.join(", "))]
    Infeasible(Vec<String>),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Locomotive-minutes per activity over one week.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ActivityLedger {
    pub active: f64,
    pub deadhead: f64,
    pub pre_departure: f64,
    pub post_arrival: f64,
    pub connection: f64,
    pub light_travel: f64,
    pub idle: f64,
}

impl ActivityLedger {
    pub fn total(&self) -> f64 {
        self.active
            + self.deadhead
            + self.pre_departure
            + self.post_arrival
            + self.connection
            + self.light_travel
            + self.idle
    }

    pub fn scaled(&self, by: f64) -> Self {
        Self {
            active: self.active * by,
            deadhead: self.deadhead * by,
            pre_departure: self.pre_departure * by,
            post_arrival: self.post_arrival * by,
            connection: self.connection * by,
            light_travel: self.light_travel * by,
            idle: self.idle * by,
        }
    }

    pub fn named(&self) -> [(&'static str, f64); 7] {
        [
            ("active", self.active),
            ("deadhead", self.deadhead),
            ("pre_departure", self.pre_departure),
            ("post_arrival", self.post_arrival),
            ("connection", self.connection),
            ("light_travel", self.light_travel),
            ("idle", self.idle),
        ]
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HeatCell {
    pub terminal: usize,
    pub day: u32,
    pub events: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KpiReport {
    pub objective: f64,
    pub fleet_size: i64,
    pub work_events: i64,
    pub pickup_events: i64,
    pub setout_events: i64,
    pub pickup_units: i64,
    pub setout_units: i64,
    pub active_terminals: usize,
    pub active_terminal_days: usize,
    pub event_opportunities: usize,
    pub coverage_ratio: f64,
    pub light_arcs_used: usize,
    pub light_trains: i64,
    pub light_od_pairs: usize,
    pub dh_minutes: f64,
    pub lt_minutes: f64,
    pub minutes: ActivityLedger,
    /// `minutes` divided by `fleet_size * horizon`; all zero for an empty fleet.
    pub shares: ActivityLedger,
    /// `minutes` divided by the number of trains.
    pub per_train: ActivityLedger,
    pub decomposition: Decomposition,
    pub heatmap: Vec<HeatCell>,
}

pub fn compute_kpis(net: &SpaceTimeNetwork, m: &MilpModel, sol: &Solution) -> Result<KpiReport, ReportError> {
    let Some(objective) = sol.objective else {
        return Err(ReportError::NoIncumbent(sol.status));
    };
    let bad = check_solution(m, &sol.values)?;
    if !bad.is_empty() {
        return Err(ReportError::Infeasible(bad.into_iter().map(|v| v.tag).collect()));
    }
    let (_, decomposition) = crate::solver::evaluate_objective(m, &sol.values)?;

    let mut r = KpiReport {
        objective,
        fleet_size: 0,
        work_events: 0,
        pickup_events: 0,
        setout_events: 0,
        pickup_units: 0,
        setout_units: 0,
        active_terminals: 0,
        active_terminal_days: 0,
        event_opportunities: 0,
        coverage_ratio: 0.0,
        light_arcs_used: 0,
        light_trains: 0,
        light_od_pairs: 0,
        dh_minutes: 0.0,
        lt_minutes: 0.0,
        minutes: ActivityLedger::default(),
        shares: ActivityLedger::default(),
        per_train: ActivityLedger::default(),
        decomposition,
        heatmap: Vec::new(),
    };
    let mut od = BTreeSet::new();
    let led = &mut r.minutes;
    for a in &net.arcs {
        let x = sol.value(&x_name(a.id));
        let xf = x as f64;
        r.fleet_size += x * a.wrap_count as i64;
        match a.kind {
            ArcKind::Train => {
                let b = a.b as f64;
                led.active += b * a.travel as f64;
                led.deadhead += (xf - b) * a.travel as f64;
            }
            ArcKind::GroundDeparture => led.pre_departure += xf * a.span as f64,
            ArcKind::ArrivalGround => led.post_arrival += xf * a.span as f64,
            ArcKind::Transition => led.connection += xf * a.span as f64,
            ArcKind::Ground => led.idle += xf * a.span as f64,
            ArcKind::Light => {
                led.light_travel += xf * a.travel as f64;
                led.idle += xf * (a.span - a.travel) as f64;
                if x > 0 {
                    r.light_arcs_used += 1;
                    r.light_trains += sol.value(&u_name(a.id));
                    od.insert((net.node(a.tail).terminal, net.node(a.head).terminal));
                }
            }
        }
        if a.setout {
            r.setout_events += sol.value(&yso_name(a.id));
            r.setout_units += x;
        }
        if a.pickup {
            r.pickup_events += sol.value(&ypu_name(a.id));
            r.pickup_units += x;
        }
    }
    r.dh_minutes = r.minutes.deadhead;
    r.lt_minutes = r.minutes.light_travel;
    r.light_od_pairs = od.len();
    r.work_events = r.pickup_events + r.setout_events;
    r.event_opportunities = net.setout_arcs().len() + net.pickup_arcs().len();
    if r.event_opportunities > 0 {
        r.coverage_ratio = r.work_events as f64 / r.event_opportunities as f64;
    }

    let mut terminals = BTreeSet::new();
    for ((k, d), vars) in group_events_by_terminal_day(net, m) {
        let events: i64 = vars.iter().map(|&v| sol.value(&m.variables[v].name)).sum();
        if events > 0 {
            terminals.insert(k);
            r.active_terminal_days += 1;
        }
        r.heatmap.push(HeatCell {
            terminal: k.0,
            day: d,
            events,
        });
    }
    r.active_terminals = terminals.len();

    let capacity = (r.fleet_size * net.horizon) as f64;
    if capacity > 0.0 {
        r.shares = r.minutes.scaled(1.0 / capacity);
    }
    if net.train_count > 0 {
        r.per_train = r.minutes.scaled(1.0 / net.train_count as f64);
    }
    Ok(r)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KpiMetric {
    pub metric: String,
    pub value: f64,
}

/// Scalar KPIs in a fixed order.
pub fn kpi_rows(r: &KpiReport) -> Vec<KpiMetric> {
    let mut out: Vec<(String, f64)> = vec![
        ("objective".into(), r.objective),
        ("fleet_size".into(), r.fleet_size as f64),
        ("work_events".into(), r.work_events as f64),
        ("pickup_events".into(), r.pickup_events as f64),
        ("setout_events".into(), r.setout_events as f64),
        ("pickup_units".into(), r.pickup_units as f64),
        ("setout_units".into(), r.setout_units as f64),
        ("active_terminals".into(), r.active_terminals as f64),
        ("active_terminal_days".into(), r.active_terminal_days as f64),
        ("event_opportunities".into(), r.event_opportunities as f64),
        ("coverage_ratio".into(), r.coverage_ratio),
        ("light_arcs_used".into(), r.light_arcs_used as f64),
        ("light_trains".into(), r.light_trains as f64),
        ("light_od_pairs".into(), r.light_od_pairs as f64),
        ("dh_minutes".into(), r.dh_minutes),
        ("lt_minutes".into(), r.lt_minutes),
        ("cost_ownership".into(), r.decomposition.ownership),
        ("cost_deadhead".into(), r.decomposition.deadhead),
        ("cost_light_travel".into(), r.decomposition.light_travel),
        ("cost_work_events".into(), r.decomposition.work_events),
    ];
    for (prefix, led) in [("minutes", &r.minutes), ("share", &r.shares), ("per_train", &r.per_train)] {
        for (name, v) in led.named() {
            out.push((format!("{prefix}_{name}"), v));
        }
    }
    out.into_iter().map(|(metric, value)| KpiMetric { metric, value }).collect()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::instance::{CostParams, Instance, Terminal, TerminalId, Train, TrainLeg, TransitTable};
    use crate::pipeline::{solve_plan, PlanConfig};

    /// Two terminals, one train each way, three days apart.
    pub(crate) fn m2() -> Instance {
        let mut transit = TransitTable::new();
        transit.insert(TerminalId(0), TerminalId(1), 600);
        transit.insert(TerminalId(1), TerminalId(0), 600);
        let leg = |o, d, dep| Train {
            id: format!("T{}", o + 1),
            legs: vec![TrainLeg {
                seq: 1,
                origin: TerminalId(o),
                destination: TerminalId(d),
                departure: dep,
                arrival: dep + 600,
                power: 1,
            }],
            stops: vec![],
        };
        Instance {
            terminals: ["A", "B"]
                .iter()
                .map(|c| Terminal {
                    code: c.to_string(),
                    name: c.to_string(),
                })
                .collect(),
            transit,
            trains: vec![leg(0, 1, 480), leg(1, 0, 3360)],
            costs: CostParams::default(),
            baseline: None,
        }
    }

    #[test]
    fn m2_minute_ledger() {
        let inst = m2();
        let plan = solve_plan(&inst, &PlanConfig::default()).unwrap();
        assert!(plan.solution.is_optimal());
        let r = compute_kpis(&plan.net, &plan.model, &plan.solution).unwrap();
        assert_eq!(r.fleet_size, 1);
        assert_eq!(r.objective, inst.costs.q);
        assert_eq!(r.minutes.active, 1200.0);
        assert_eq!(r.minutes.pre_departure, 120.0);
        assert_eq!(r.minutes.post_arrival, 240.0);
        assert_eq!(r.minutes.idle, 8520.0);
        assert_eq!(r.dh_minutes, 0.0);
        assert_eq!(r.lt_minutes, 0.0);
        assert!((r.shares.total() - 1.0).abs() < 1e-9);
        assert_eq!(r.per_train.active, 600.0);
    }

    #[test]
    fn infeasible_solution_is_rejected() {
        let inst = m2();
        let plan = solve_plan(&inst, &PlanConfig::default()).unwrap();
        let mut sol = plan.solution.clone();
        for v in sol.values.values_mut() {
            *v = 0;
        }
        assert!(matches!(
            compute_kpis(&plan.net, &plan.model, &sol),
            Err(ReportError::Infeasible(_))
        ));
        let empty = Solution::infeasible(0, 0.0);
        assert_eq!(
            compute_kpis(&plan.net, &plan.model, &empty),
            Err(ReportError::NoIncumbent(Status::Infeasible))
        );
    }
}
