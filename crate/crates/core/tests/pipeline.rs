mod common;

use railplan_core::lighttravel::{LtMethod, LtOptions};
use railplan_core::model::{Extension, ExtensionConfig};
use railplan_core::pipeline::{build_plan_model, solve_plan, PipelineError, PlanConfig};
use railplan_core::report::{compute_kpis, kpi_rows};
use railplan_core::solver::{evaluate_objective, solve_enumeration, Solution, Status, DEFAULT_ENUMERATION_CAP};
use railplan_core::spacetime::ArcKind;
use railplan_core::table::{parse_report, render, Format};

#[test]
fn m2_needs_one_locomotive() {
    let inst = common::m2();
    let plan = solve_plan(&inst, &PlanConfig::default()).unwrap();
    assert_eq!(plan.solution.status, Status::Optimal);
    let k = compute_kpis(&plan.net, &plan.model, &plan.solution).unwrap();
    assert_eq!(k.fleet_size, 1);
    assert_eq!(k.light_arcs_used, 0);
    let (obj, d) = evaluate_objective(&plan.model, &plan.solution.values).unwrap();
    assert_eq!(obj, inst.costs.q);
    assert_eq!((d.ownership, d.deadhead, d.light_travel, d.work_events), (inst.costs.q, 0.0, 0.0, 0.0));
}

#[test]
fn m2_agrees_with_enumeration() {
    let (_, m) = build_plan_model(&common::m2(), &PlanConfig::default()).unwrap();
    let en = solve_enumeration(&m, DEFAULT_ENUMERATION_CAP).unwrap();
    assert_eq!(en.objective, Some(10_000.0));
}

#[test]
fn threshold_trap_prefers_light_travel() {
    let inst = common::threshold_trap();
    let plan = solve_plan(&inst, &PlanConfig::default()).unwrap();
    let k = compute_kpis(&plan.net, &plan.model, &plan.solution).unwrap();
    assert_eq!(k.fleet_size, 1);
    assert_eq!(k.light_trains, 1);
    assert_eq!(k.lt_minutes, 600.0);
    assert_eq!(k.light_od_pairs, 1);

    let mcf = PlanConfig {
        lt: LtOptions {
            method: LtMethod::Mcf,
            ..LtOptions::default()
        },
        ..PlanConfig::default()
    };
    let plan = solve_plan(&inst, &mcf).unwrap();
    assert!(plan.net.arcs.iter().all(|a| a.kind != ArcKind::Light));
    let k = compute_kpis(&plan.net, &plan.model, &plan.solution).unwrap();
    assert_eq!(k.fleet_size, 2);
    assert_eq!(k.dh_minutes, 600.0);
}

#[test]
fn extensions_without_baseline_fail() {
    let cfg = PlanConfig {
        extension: ExtensionConfig::new(Extension::V2).with_budget(1),
        ..PlanConfig::default()
    };
    assert!(matches!(build_plan_model(&common::m2(), &cfg), Err(PipelineError::Model(_))));
}

#[test]
fn invalid_instance_is_refused() {
    let mut inst = common::m2();
    inst.trains[0].legs[0].power = 9;
    assert!(matches!(build_plan_model(&inst, &PlanConfig::default()), Err(PipelineError::Invalid(_))));
}

#[test]
fn solution_json_round_trip() {
    let plan = solve_plan(&common::fig1(), &PlanConfig::default()).unwrap();
    let back: Solution = serde_json::from_str(&plan.solution.to_json()).unwrap();
    assert_eq!(back.values, plan.solution.values);
    assert_eq!(back.objective, plan.solution.objective);
    let k = compute_kpis(&plan.net, &plan.model, &back).unwrap();
    let rows = kpi_rows(&k);
    let csv = render(&rows, Format::Csv).unwrap();
    assert_eq!(parse_report::<railplan_core::report::KpiMetric>(&csv, Format::Csv).unwrap(), rows);
}
