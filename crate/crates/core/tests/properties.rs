mod common;

use proptest::prelude::*;

use railplan_core::instance::{generate_synthetic, instance_to_json, is_valid, net_power_balance, parse_instance};
use railplan_core::lighttravel::{build_mcf, check_mcf_optimality, reduce_exact, solve_mcf, LtMethod, LtOptions};
use railplan_core::model::{Extension, ExtensionConfig};
use railplan_core::pipeline::{build_plan_model, solve_plan, PlanConfig};
use railplan_core::report::compute_kpis;
use railplan_core::solver::mps::{read_mps, write_mps};
use railplan_core::solver::check_solution;
use railplan_core::spacetime::{build_network, ArcKind, NodeKind};

fn instance() -> impl Strategy<Value = railplan_core::instance::Instance> {
    (any::<u64>(), 2usize..=5, 1usize..=6, 1usize..=3)
        .prop_map(|(seed, k, t, l)| generate_synthetic(seed, k, t, l).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn synthetic_instances_are_valid(inst in instance()) {
        prop_assert!(is_valid(&inst));
        prop_assert_eq!(net_power_balance(&inst).iter().sum::<i64>(), 0);
        let back = parse_instance(&instance_to_json(&inst)).unwrap();
        prop_assert_eq!(back, inst);
    }

    #[test]
    fn every_arc_closes_the_week(inst in instance()) {
        let base = build_network(&inst);
        let net = base.with_light_arcs(&reduce_exact(&base));
        for a in &net.arcs {
            let (t, h) = (net.node(a.tail), net.node(a.head));
            prop_assert_eq!(t.time + a.span, h.time + net.horizon * a.wrap_count as i64);
            prop_assert!(a.travel <= a.span && a.span >= 0);
        }
        for k in 0..inst.terminals.len() {
            let wraps = net
                .arcs_of_kind(ArcKind::Ground, |a| a.wrap() && net.node(a.tail).terminal.0 == k)
                .len();
            prop_assert_eq!(wraps, 1);
        }
    }

    #[test]
    fn reduced_arcs_run_from_arrivals_to_departures(inst in instance()) {
        let net = build_network(&inst);
        for a in reduce_exact(&net) {
            let (t, h) = (net.node(a.tail), net.node(a.head));
            prop_assert_eq!(t.kind, NodeKind::ArrivalGround);
            prop_assert_eq!(h.kind, NodeKind::GroundDeparture);
            prop_assert_eq!(Some(a.travel), inst.transit.get(t.terminal, h.terminal));
            prop_assert!(a.span - a.travel < net.horizon);
        }
    }

    #[test]
    fn flow_heuristic_is_optimal(inst in instance()) {
        let p = build_mcf(&inst, None).unwrap();
        let f = solve_mcf(&p).unwrap();
        prop_assert!(check_mcf_optimality(&p, &f).is_ok());
    }

    #[test]
    fn mps_round_trip(inst in instance()) {
        let (_, m) = build_plan_model(&inst, &PlanConfig::default()).unwrap();
        let back = read_mps(&write_mps(&m)).unwrap();
        prop_assert_eq!(back.num_vars(), m.num_vars());
        prop_assert_eq!(back.cost_vector(), m.cost_vector());
        prop_assert_eq!(back.offset, m.offset);
        for (a, b) in m.constraints.iter().zip(&back.constraints) {
            prop_assert_eq!(&a.terms, &b.terms);
            prop_assert_eq!((a.sense, a.rhs), (b.sense, b.rhs));
            prop_assert_eq!(&a.tag, &b.tag);
        }
        for (a, b) in m.variables.iter().zip(&back.variables) {
            prop_assert_eq!((&a.name, a.lower, a.upper, a.integrality), (&b.name, b.lower, b.upper, b.integrality));
            prop_assert_eq!((a.family, a.subject), (b.family, b.subject));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solved_plans_balance_their_minutes(seed in any::<u64>(), method in prop_oneof![Just(LtMethod::Exact), Just(LtMethod::Mcf)]) {
        let inst = common::micro(seed);
        let cfg = PlanConfig {
            lt: LtOptions { method, ..LtOptions::default() },
            ..PlanConfig::default()
        };
        let plan = solve_plan(&inst, &cfg).unwrap();
        if plan.solution.has_incumbent() {
            prop_assert!(check_solution(&plan.model, &plan.solution.values).unwrap().is_empty());
            let k = compute_kpis(&plan.net, &plan.model, &plan.solution).unwrap();
            prop_assert!(k.fleet_size > 0);
            prop_assert!((k.shares.total() - 1.0).abs() < 1e-9);
            prop_assert!((0.0..=1.0).contains(&k.coverage_ratio));
            prop_assert!(k.dh_minutes >= 0.0 && k.lt_minutes >= 0.0);
            let b = plan.solution.bounds;
            prop_assert!(b.lower.unwrap() <= plan.solution.objective.unwrap() + 1e-9);
        }
    }

    #[test]
    fn tighter_work_event_caps_never_help(seed in any::<u64>()) {
        let inst = generate_synthetic(seed, 3, 3, 3).unwrap();
        let solve = |ext: ExtensionConfig| {
            let cfg = PlanConfig { extension: ext, ..PlanConfig::default() };
            solve_plan(&inst, &cfg).unwrap().solution.objective
        };
        let free = solve(ExtensionConfig::new(Extension::V0));
        let capped = solve(ExtensionConfig::new(Extension::V4).with_budget(1));
        if let (Some(f), Some(c)) = (free, capped) {
            prop_assert!(f <= c + 1e-9);
        } else {
            prop_assert!(free.is_some() || capped.is_none());
        }
    }
}
