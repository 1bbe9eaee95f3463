//! Cost sensitivity sweeps and extension ladders.

use std::fmt;
use std::str::FromStr;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::instance::{CostParams, Instance};
use crate::lighttravel::LtOptions;
use crate::model::{warm_start_from, Extension, ExtensionConfig, ModelOptions};
use crate::pipeline::{build_plan_model, solve_plan, PipelineError, PlanConfig};
use crate::report::compute_kpis;
use crate::solver::{solve_bb, Solution, SolveBudget, Status};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    /// Ownership cost.
    #[default]
    Q,
    /// Light-train fixed charge rate.
    E,
    /// The three work-event costs together.
    C,
    /// Per-unit relocation rate on train and light arcs.
    G,
}

impl SweepParam {
    pub fn scale(self, base: &CostParams, factor: f64) -> CostParams {
        let mut c = base.clone();
        match self {
            SweepParam::Q => c.q *= factor,
            SweepParam::E => c.e_rate *= factor,
            SweepParam::C => {
                c.c1 *= factor;
                c.c2 *= factor;
                c.c3 *= factor;
            }
            SweepParam::G => c.g_rate *= factor,
        }
        c
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParam::Q => "q",
            SweepParam::E => "e",
            SweepParam::C => "c",
            SweepParam::G => "g",
        })
    }
}

impl FromStr for SweepParam {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "q" => Ok(SweepParam::Q),
            "e" => Ok(SweepParam::E),
            "c" => Ok(SweepParam::C),
            "g" => Ok(SweepParam::G),
            _ => Err(format!("unknown sweep parameter {s:?} (q, e, c, g)")),
        }
    }
}

/// 0.1, 0.2, ..., 1.0, 2.0, ..., 10.0
pub fn default_factors() -> Vec<f64> {
    let mut f: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
    f.extend((2..=10).map(|i| i as f64));
    f
}

#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub parameter: SweepParam,
    pub factors: Vec<f64>,
    pub lt: LtOptions,
    pub budget: SolveBudget,
    pub parallel: bool,
}

impl SweepConfig {
    pub fn new(parameter: SweepParam) -> Self {
        Self {
            parameter,
            factors: default_factors(),
            lt: LtOptions::default(),
            budget: SolveBudget::default(),
            parallel: true,
        }
    }
}

/// Columns: parameter, factor, status, objective, lower_bound, fleet_size,
/// work_events, dh_minutes, lt_minutes, light_trains, nodes, wall_time, error.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub parameter: SweepParam,
    pub factor: f64,
    pub status: Option<Status>,
    pub objective: Option<f64>,
    pub lower_bound: Option<f64>,
    pub fleet_size: Option<i64>,
    pub work_events: Option<i64>,
    pub dh_minutes: Option<f64>,
    pub lt_minutes: Option<f64>,
    pub light_trains: Option<i64>,
    pub nodes: u64,
    pub wall_time: f64,
    pub error: Option<String>,
}

fn sweep_row(inst: &Instance, cfg: &SweepConfig, factor: f64) -> SweepRow {
    let mut scaled = inst.clone();
    scaled.costs = cfg.parameter.scale(&inst.costs, factor);
    let plan_cfg = PlanConfig {
        lt: cfg.lt.clone(),
        budget: cfg.budget.clone(),
        ..PlanConfig::default()
    };
    let mut row = SweepRow {
        parameter: cfg.parameter,
        factor,
        ..SweepRow::default()
    };
    let plan = match solve_plan(&scaled, &plan_cfg) {
        Ok(p) => p,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };
    let s = &plan.solution;
    row.status = Some(s.status);
    row.objective = s.objective;
    row.lower_bound = s.bounds.lower;
    row.nodes = s.node_count;
    row.wall_time = s.wall_time;
    if s.status == Status::BudgetExceeded {
        row.error = Some("budget exceeded".into());
    }
    if s.has_incumbent() {
        match compute_kpis(&plan.net, &plan.model, s) {
            Ok(k) => {
                row.fleet_size = Some(k.fleet_size);
                row.work_events = Some(k.work_events);
                row.dh_minutes = Some(k.dh_minutes);
                row.lt_minutes = Some(k.lt_minutes);
                row.light_trains = Some(k.light_trains);
            }
            Err(e) => row.error = Some(e.to_string()),
        }
    }
    row
}

/// One row per factor, in factor order. Failures are recorded in the row.
pub fn run_sweep(inst: &Instance, cfg: &SweepConfig) -> Vec<SweepRow> {
    if cfg.parallel {
        cfg.factors.par_iter().map(|&f| sweep_row(inst, cfg, f)).collect()
    } else {
        cfg.factors.iter().map(|&f| sweep_row(inst, cfg, f)).collect()
    }
}

#[derive(Clone, Debug)]
pub struct LadderConfig {
    /// Versions with their budget grids; V0 and V1p ignore the grid.
    pub steps: Vec<(Extension, Vec<u32>)>,
    pub theta: Option<u32>,
    pub warm_chain: bool,
    pub lt: LtOptions,
    pub budget: SolveBudget,
}

/// Budget grids from zero up to full activation: terminals in steps of 1,
/// terminal-days in steps of 5, `lambda` 0..=3.
pub fn default_ladder(inst: &Instance) -> Vec<(Extension, Vec<u32>)> {
    let n = inst.terminals.len();
    let days = inst.costs.days();
    let (inactive_t, inactive_d) = match &inst.baseline {
        Some(b) => (b.inactive_terminals(n).len(), b.inactive_days(n).len()),
        None => (0, 0),
    };
    let stepped = |top: usize, step: usize| -> Vec<u32> {
        let mut g: Vec<u32> = (0..=top).step_by(step).map(|v| v as u32).collect();
        if g.last() != Some(&(top as u32)) {
            g.push(top as u32);
        }
        g
    };
    vec![
        (Extension::V1, (0..=3).collect()),
        (Extension::V2, stepped(inactive_t, 1)),
        (Extension::V3, stepped(inactive_d, 5)),
        (Extension::V4, stepped(n, 1)),
        (Extension::V5, stepped(n * days as usize, 5)),
    ]
}

/// Columns: version, budget, status, objective, lower_bound,
/// improvement_pct, fleet_size, work_events, active_terminals,
/// active_terminal_days, warm_started, nodes, wall_time, error.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LadderRow {
    pub version: String,
    pub budget: Option<u32>,
    pub status: Option<Status>,
    pub objective: Option<f64>,
    pub lower_bound: Option<f64>,
    /// Objective reduction relative to V1p, in percent.
    pub improvement_pct: Option<f64>,
    pub fleet_size: Option<i64>,
    pub work_events: Option<i64>,
    pub active_terminals: Option<usize>,
    pub active_terminal_days: Option<usize>,
    pub warm_started: bool,
    pub nodes: u64,
    pub wall_time: f64,
    pub error: Option<String>,
}

fn ladder_cell(inst: &Instance, cfg: &LadderConfig, ext: ExtensionConfig, warm: Option<&Solution>) -> (LadderRow, Option<Solution>) {
    let mut row = LadderRow {
        version: ext.version.tag().to_string(),
        budget: ext.budget(),
        ..LadderRow::default()
    };
    let plan_cfg = PlanConfig {
        lt: cfg.lt.clone(),
        extension: ext,
        model: ModelOptions::default(),
        budget: cfg.budget.clone(),
    };
    let run = || -> Result<_, PipelineError> {
        let (net, mut model) = build_plan_model(inst, &plan_cfg)?;
        let mut warmed = false;
        if let Some(prev) = warm {
            match warm_start_from(&model, prev) {
                Ok(m) => {
                    model = m;
                    warmed = true;
                }
                Err(e) => warn!("{} budget {:?}: warm start rejected: {e}", row.version, row.budget),
            }
        }
        let sol = solve_bb(&model, &cfg.budget)?;
        Ok((net, model, sol, warmed))
    };
    match run() {
        Err(e) => {
            row.error = Some(e.to_string());
            (row, None)
        }
        Ok((net, model, sol, warmed)) => {
            row.warm_started = warmed;
            row.status = Some(sol.status);
            row.objective = sol.objective;
            row.lower_bound = sol.bounds.lower;
            row.nodes = sol.node_count;
            row.wall_time = sol.wall_time;
            if sol.status == Status::BudgetExceeded {
                row.error = Some("budget exceeded".into());
            }
            if sol.has_incumbent() {
                match compute_kpis(&net, &model, &sol) {
                    Ok(k) => {
                        row.fleet_size = Some(k.fleet_size);
                        row.work_events = Some(k.work_events);
                        row.active_terminals = Some(k.active_terminals);
                        row.active_terminal_days = Some(k.active_terminal_days);
                    }
                    Err(e) => row.error = Some(e.to_string()),
                }
                (row, Some(sol))
            } else {
                (row, None)
            }
        }
    }
}

/// Solves V1p, then every version over its grid. With `warm_chain` each
/// cell starts from the previous cell of the same version. Versions run in
/// parallel with each other; rows keep the configured order.
pub fn run_extension_ladder(inst: &Instance, cfg: &LadderConfig) -> Vec<LadderRow> {
    let v1p = ExtensionConfig::new(Extension::V1Prime).with_theta(cfg.theta);
    let (base_row, _) = ladder_cell(inst, cfg, v1p, None);
    let reference = base_row.objective;

    let per_version: Vec<Vec<LadderRow>> = cfg
        .steps
        .par_iter()
        .map(|(version, grid)| {
            let cells: Vec<Option<u32>> = match version {
                Extension::V0 | Extension::V1Prime => vec![None],
                _ => grid.iter().copied().map(Some).collect(),
            };
            let mut prev: Option<Solution> = None;
            let mut rows = Vec::with_capacity(cells.len());
            for b in cells {
                let mut ext = ExtensionConfig::new(*version).with_theta(cfg.theta);
                if let Some(b) = b {
                    ext = ext.with_budget(b);
                }
                let warm = if cfg.warm_chain { prev.as_ref() } else { None };
                let (row, sol) = ladder_cell(inst, cfg, ext, warm);
                if sol.is_some() {
                    prev = sol;
                }
                rows.push(row);
            }
            rows
        })
        .collect();

    let mut out = vec![base_row];
    out.extend(per_version.into_iter().flatten());
    for r in &mut out {
        if let (Some(base), Some(obj)) = (reference, r.objective) {
            if base != 0.0 {
                r.improvement_pct = Some((base - obj) / base.abs() * 100.0);
            }
        }
    }
    out
}
