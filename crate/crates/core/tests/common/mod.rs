//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use railplan_core::instance::{
    generate_synthetic, CostParams, Instance, RailcarEvent, RailcarFlags, Terminal, TerminalId, Train, TrainLeg,
    TransitTable,
};
use railplan_core::milp::{CostComponent, Integrality, MilpModel, Sense, Subject, VarFamily};

pub fn terminals(codes: &[&str]) -> Vec<Terminal> {
    codes
        .iter()
        .map(|c| Terminal {
            code: c.to_string(),
            name: c.to_string(),
        })
        .collect()
}

pub fn leg(seq: u32, o: usize, d: usize, dep: i64, minutes: i64, power: u32) -> TrainLeg {
    TrainLeg {
        seq,
        origin: TerminalId(o),
        destination: TerminalId(d),
        departure: dep,
        arrival: (dep + minutes).rem_euclid(10_080),
        power,
    }
}

fn uniform_transit(n: usize, minutes: impl Fn(usize, usize) -> i64) -> TransitTable {
    let mut t = TransitTable::new();
    for a in 0..n {
        for b in 0..n {
            if a != b {
                t.insert(TerminalId(a), TerminalId(b), minutes(a, b));
            }
        }
    }
    t
}

/// Two terminals, T1 A->B Monday 08:00 and T2 B->A Wednesday 08:00, one
/// unit of power each, 600 minutes apart.
pub fn m2() -> Instance {
    Instance {
        terminals: terminals(&["A", "B"]),
        transit: uniform_transit(2, |_, _| 600),
        trains: vec![
            Train {
                id: "T1".into(),
                legs: vec![leg(1, 0, 1, 480, 600, 1)],
                stops: vec![],
            },
            Train {
                id: "T2".into(),
                legs: vec![leg(1, 1, 0, 3360, 600, 1)],
                stops: vec![],
            },
        ],
        costs: CostParams::default(),
        baseline: None,
    }
}

/// Three terminals: a two-leg train T3 -> T2 -> T1 with a pick-up stop at
/// T2 and a one-leg train T1 -> T3.
pub fn fig1() -> Instance {
    let transit = uniform_transit(3, |a, b| 300 + 60 * (a + b) as i64);
    let t = |a: usize, b: usize| transit.get(TerminalId(a), TerminalId(b)).unwrap();
    let d2 = 1_000 + t(2, 1) + 240;
    Instance {
        terminals: terminals(&["T1", "T2", "T3"]),
        trains: vec![
            Train {
                id: "A".into(),
                legs: vec![leg(1, 2, 1, 1_000, t(2, 1), 2), leg(2, 1, 0, d2, t(1, 0), 2)],
                stops: vec![RailcarFlags::from_event(RailcarEvent::PickUp)],
            },
            Train {
                id: "B".into(),
                legs: vec![leg(1, 0, 2, 5_000, t(0, 2), 2)],
                stops: vec![],
            },
        ],
        transit,
        costs: CostParams::default(),
        baseline: None,
    }
}

/// One loaded train A -> B and an unpowered return train that leaves B
/// before the loaded one arrives. The flow heuristic sees a single surplus
/// unit at B, which does not pass its threshold, so it inserts no arc;
/// returning by light train keeps the fleet at one, deadheading on the
/// return train needs a second locomotive.
pub fn threshold_trap() -> Instance {
    Instance {
        terminals: terminals(&["A", "B"]),
        transit: uniform_transit(2, |_, _| 600),
        trains: vec![
            Train {
                id: "L".into(),
                legs: vec![leg(1, 0, 1, 0, 600, 1)],
                stops: vec![],
            },
            Train {
                id: "R".into(),
                legs: vec![leg(1, 1, 0, 500, 600, 0)],
                stops: vec![],
            },
        ],
        costs: CostParams::default(),
        baseline: None,
    }
}

/// Seeded micro instance: 2 to 4 terminals, 2 to 6 trains, up to 2 legs.
pub fn micro(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let n_terminals = rng.random_range(2..=4);
    let n_trains = rng.random_range(2..=6);
    generate_synthetic(seed, n_terminals, n_trains, 2).expect("valid arguments")
}

/// Random bounded integer program with `n` variables.
pub fn random_ip(seed: u64, n: usize) -> MilpModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = MilpModel::new();
    for j in 0..n {
        let binary = rng.random_bool(0.3);
        let (up, int) = if binary {
            (1.0, Integrality::Binary)
        } else {
            (rng.random_range(1..=3) as f64, Integrality::Integer)
        };
        let lo = if binary { 0.0 } else { rng.random_range(-1..=0) as f64 };
        m.add_var(format!("v{j}"), VarFamily::Other, Subject::None, lo, up, int);
        m.add_objective(j, rng.random_range(-9..=9) as f64, CostComponent::Other);
    }
    for r in 0..rng.random_range(2..=n / 2 + 2) {
        let mut terms = Vec::new();
        for j in 0..n {
            if rng.random_bool(0.4) {
                terms.push((j, rng.random_range(-4..=5) as f64));
            }
        }
        let sense = [Sense::Le, Sense::Le, Sense::Ge, Sense::Eq][rng.random_range(0..4usize)];
        let rhs = rng.random_range(-2..=6) as f64;
        m.add_constraint(terms, sense, rhs, format!("r{r}"));
    }
    m.offset = rng.random_range(-5..=5) as f64;
    m
}
