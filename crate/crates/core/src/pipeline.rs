//! Instance to solved plan: validation, network, light arcs, model, solve.

use thiserror::Error;

use crate::instance::{validate_instance, Instance, Severity};
use crate::lighttravel::{generate_light_arcs, LightTravelError, LtOptions};
use crate::milp::MilpModel;
use crate::model::{apply_extension, build_base_model, ExtensionConfig, Extension, ModelError, ModelOptions};
use crate::solver::{solve_bb, Solution, SolveBudget, SolverError};
use crate::spacetime::{build_network, SpaceTimeNetwork};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("instance is invalid: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error(transparent)]
    LightTravel(#[from] LightTravelError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Clone, Debug)]
pub struct PlanConfig {
    pub lt: LtOptions,
    pub extension: ExtensionConfig,
    pub model: ModelOptions,
    pub budget: SolveBudget,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self {
            lt: LtOptions::default(),
            extension: ExtensionConfig::new(Extension::V0),
            model: ModelOptions::default(),
            budget: SolveBudget::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Plan {
    pub net: SpaceTimeNetwork,
    pub model: MilpModel,
    pub solution: Solution,
}

/// Network with light arcs and the model for it, without solving.
pub fn build_plan_model(inst: &Instance, cfg: &PlanConfig) -> Result<(SpaceTimeNetwork, MilpModel), PipelineError> {
    let errors: Vec<String> = validate_instance(inst)
        .into_iter()
        .filter(|v| v.severity == Severity::Error)
        .map(|v| format!("{}: {}", v.code, v.message))
        .collect();
    if !errors.is_empty() {
        return Err(PipelineError::Invalid(errors));
    }
    let base = build_network(inst);
    let light = generate_light_arcs(inst, &base, &cfg.lt)?;
    let net = base.with_light_arcs(&light);
    let m = build_base_model(&net, &inst.costs, &cfg.model);
    let m = apply_extension(&m, &net, inst.baseline.as_ref(), &cfg.extension)?;
    Ok((net, m))
}

pub fn solve_plan(inst: &Instance, cfg: &PlanConfig) -> Result<Plan, PipelineError> {
    let (net, model) = build_plan_model(inst, cfg)?;
    let solution = solve_bb(&model, &cfg.budget)?;
    Ok(Plan { net, model, solution })
}
