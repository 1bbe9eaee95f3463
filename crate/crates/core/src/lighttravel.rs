//! Light-travel arc generation.
//!
//! Three arc sets are available: the exact reduction (arrival-ground nodes
//! to the first reachable ground-departure node, keeping only the latest
//! origin per head), the full candidate set for micro instances, and the
//! minimum-cost-flow heuristic that inserts arcs for heavily used terminal
//! pairs only.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use log::warn;
use thiserror::Error;

use crate::instance::{net_power_balance, Instance, TerminalId};
use crate::spacetime::{LightArcSpec, NodeId, NodeKind, SpaceTimeNetwork};

pub const DEFAULT_FULL_CAP: usize = 200;
pub const DEFAULT_WINDOW_MINUTES: i64 = 480;
pub const DEFAULT_THRESHOLD: i64 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum LightTravelError {
    #[error("full enumeration is limited to {cap} ground nodes, network has {actual}")]
    CapExceeded { cap: usize, actual: usize },
    #[error("penalization factor must exceed 2, got {0}")]
    BadAlpha(f64),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("no light-travel path from surplus terminal {from} to deficit terminal {to}")]
    Disconnected { from: TerminalId, to: TerminalId },
    #[error("flow fails the optimality check: {0}")]
    NotOptimal(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum LtMethod {
    #[default]
    Exact,
    Mcf,
    Full,
}

impl FromStr for LtMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "exact" => Ok(LtMethod::Exact),
            "mcf" => Ok(LtMethod::Mcf),
            "full" => Ok(LtMethod::Full),
            other => Err(format!("unknown light-travel method {other:?} (exact, mcf, full)")),
        }
    }
}

impl fmt::Display for LtMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LtMethod::Exact => "exact",
            LtMethod::Mcf => "mcf",
            LtMethod::Full => "full",
        })
    }
}

/// Knobs for [`generate_light_arcs`].
#[derive(Clone, Debug, PartialEq)]
pub struct LtOptions {
    pub method: LtMethod,
    pub full_cap: usize,
    pub mcf_window: i64,
    pub mcf_threshold: i64,
    /// `None` uses the mean positive train frequency.
    pub mcf_alpha: Option<f64>,
}

impl Default for LtOptions {
    fn default() -> Self {
        Self {
            method: LtMethod::Exact,
            full_cap: DEFAULT_FULL_CAP,
            mcf_window: DEFAULT_WINDOW_MINUTES,
            mcf_threshold: DEFAULT_THRESHOLD,
            mcf_alpha: None,
        }
    }
}

pub fn generate_light_arcs(
    inst: &Instance,
    net: &SpaceTimeNetwork,
    opts: &LtOptions,
) -> Result<Vec<LightArcSpec>, LightTravelError> {
    match opts.method {
        LtMethod::Exact => Ok(reduce_exact(net)),
        LtMethod::Full => enumerate_full_arcs(net, opts.full_cap),
        LtMethod::Mcf => {
            let p = build_mcf(inst, opts.mcf_alpha)?;
            let flow = solve_mcf(&p)?;
            mcf_insert_arcs(net, &flow, opts.mcf_window, opts.mcf_threshold)
        }
    }
}

/// First node at terminal `to` passing `accept`, reached by leaving `tail`
/// and travelling `travel` minutes. Returns the head and the elapsed span.
fn first_reachable(
    net: &SpaceTimeNetwork,
    tail: NodeId,
    to: TerminalId,
    travel: i64,
    accept: impl Fn(NodeKind) -> bool,
) -> Option<(NodeId, i64)> {
    let h = net.horizon;
    let arrive = (net.node(tail).time + travel).rem_euclid(h);
    let chain = &net.chains[to.0];
    let after = chain
        .iter()
        .find(|&&n| net.node(n).time >= arrive && accept(net.node(n).kind))
        .map(|&n| (n, net.node(n).time - arrive));
    let head = after.or_else(|| {
        chain
            .iter()
            .find(|&&n| accept(net.node(n).kind))
            .map(|&n| (n, net.node(n).time + h - arrive))
    })?;
    Some((head.0, travel + head.1))
}

fn spec(net: &SpaceTimeNetwork, tail: NodeId, head: NodeId, travel: i64, span: i64) -> LightArcSpec {
    let h = net.horizon;
    LightArcSpec {
        tail,
        head,
        travel,
        span,
        wrap_count: ((net.node(tail).time + span) / h) as u32,
        fixed_cost: net.costs.light_fixed_cost(travel),
        unit_cost: net.costs.unit_cost(travel),
    }
}

fn sort_specs(net: &SpaceTimeNetwork, arcs: &mut [LightArcSpec]) {
    arcs.sort_by_key(|a| {
        let (t, h) = (net.node(a.tail), net.node(a.head));
        (t.terminal, t.time, a.tail, h.terminal, h.time, a.head)
    });
}

/// Every ground node to the first ground node at or after arrival at every
/// other terminal.
pub fn enumerate_full_arcs(net: &SpaceTimeNetwork, cap: usize) -> Result<Vec<LightArcSpec>, LightTravelError> {
    let actual = net.ground_node_count();
    if actual > cap {
        return Err(LightTravelError::CapExceeded { cap, actual });
    }
    let mut out = Vec::new();
    for chain in &net.chains {
        for &tail in chain {
            let from = net.node(tail).terminal;
            for k in 0..net.terminal_count() {
                let to = TerminalId(k);
                if to == from {
                    continue;
                }
                let Some(travel) = net.transit.get(from, to) else {
                    continue;
                };
                if let Some((head, span)) = first_reachable(net, tail, to, travel, |_| true) {
                    out.push(spec(net, tail, head, travel, span));
                }
            }
        }
    }
    sort_specs(net, &mut out);
    Ok(out)
}

/// Exact reduction: earliest reachability from arrival-ground nodes, then
/// one arc per (origin terminal, ground-departure head) from the origin that
/// leaves least idle time at the destination.
pub fn reduce_exact(net: &SpaceTimeNetwork) -> Vec<LightArcSpec> {
    // (origin terminal, head) -> (slack, chain position, arc)
    let mut best: BTreeMap<(TerminalId, NodeId), (i64, usize, LightArcSpec)> = BTreeMap::new();
    for chain in &net.chains {
        for (pos, &tail) in chain.iter().enumerate() {
            if net.node(tail).kind != NodeKind::ArrivalGround {
                continue;
            }
            let from = net.node(tail).terminal;
            for k in 0..net.terminal_count() {
                let to = TerminalId(k);
                if to == from {
                    continue;
                }
                let Some(travel) = net.transit.get(from, to) else {
                    continue;
                };
                let Some((head, span)) =
                    first_reachable(net, tail, to, travel, |kind| kind == NodeKind::GroundDeparture)
                else {
                    continue;
                };
                let slack = span - travel;
                let cand = (slack, pos, spec(net, tail, head, travel, span));
                match best.get(&(from, head)) {
                    Some((s, p, _)) if (*s, std::cmp::Reverse(*p)) <= (slack, std::cmp::Reverse(pos)) => {}
                    _ => {
                        best.insert((from, head), cand);
                    }
                }
            }
        }
    }
    let mut out: Vec<LightArcSpec> = best.into_values().map(|(_, _, a)| a).collect();
    sort_specs(net, &mut out);
    out
}

// ---------------------------------------------------------------------------
// Minimum-cost-flow heuristic

/// Terminal-pair cost: the transit minutes, inflated by `alpha` or
/// `alpha^2` when many trains already run between the pair.
pub fn mcf_cost(delta_ij: f64, o_ij: u32, alpha: f64) -> Result<f64, LightTravelError> {
    if !(alpha > 2.0) {
        return Err(LightTravelError::BadAlpha(alpha));
    }
    if !(delta_ij > 0.0) {
        return Err(LightTravelError::Argument(format!("distance must be positive, got {delta_ij}")));
    }
    let o = o_ij as f64;
    Ok(if o_ij <= 2 {
        delta_ij
    } else if o < alpha {
        delta_ij * alpha
    } else {
        delta_ij * alpha * alpha
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct McfProblem {
    /// Positive entries are surplus terminals.
    pub supplies: Vec<i64>,
    /// Ordered terminal pairs with a transit entry, with their transit minutes.
    pub distance: BTreeMap<(TerminalId, TerminalId), i64>,
    /// Trains per week between the pair in either direction.
    pub frequency: BTreeMap<(TerminalId, TerminalId), u32>,
    pub alpha: f64,
}

impl McfProblem {
    pub fn cost(&self, i: TerminalId, j: TerminalId) -> Option<f64> {
        let d = *self.distance.get(&(i, j))?;
        let o = self.frequency.get(&(i, j)).copied().unwrap_or(0);
        Some(mcf_cost(d as f64, o, self.alpha).expect("alpha checked at construction"))
    }
}

/// Value used when the mean frequency leaves no room for the middle band.
const ALPHA_FLOOR: f64 = 3.0;

pub fn build_mcf(inst: &Instance, alpha: Option<f64>) -> Result<McfProblem, LightTravelError> {
    let mut frequency: BTreeMap<(TerminalId, TerminalId), u32> = BTreeMap::new();
    for leg in inst.legs() {
        let (a, b) = (leg.origin, leg.destination);
        *frequency.entry((a, b)).or_default() += 1;
        *frequency.entry((b, a)).or_default() += 1;
    }
    let alpha = match alpha {
        Some(a) if !(a > 2.0) => return Err(LightTravelError::BadAlpha(a)),
        Some(a) => a,
        None => {
            // each unordered pair counted once
            let counts: Vec<u32> = frequency
                .iter()
                .filter(|((a, b), &o)| a < b && o > 0)
                .map(|(_, &o)| o)
                .collect();
            let mean = if counts.is_empty() {
                0.0
            } else {
                counts.iter().sum::<u32>() as f64 / counts.len() as f64
            };
            if mean > 2.0 {
                mean
            } else {
                ALPHA_FLOOR
            }
        }
    };
    let distance = inst
        .transit
        .iter()
        .filter(|(a, b, _)| a != b)
        .map(|(a, b, m)| ((a, b), m))
        .collect();
    Ok(McfProblem {
        supplies: net_power_balance(inst),
        distance,
        frequency,
        alpha,
    })
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct McfFlow {
    pub flows: BTreeMap<(TerminalId, TerminalId), i64>,
    pub cost: f64,
}

const EPS: f64 = 1e-9;

/// Bellman-Ford over the residual graph. Forward arcs are uncapacitated,
/// backward arcs carry the current flow.
fn shortest_paths(
    n: usize,
    arcs: &[(usize, usize, f64)],
    flow: &[i64],
    src: usize,
) -> (Vec<f64>, Vec<Option<(usize, bool)>>) {
    let mut dist = vec![f64::INFINITY; n];
    let mut pred: Vec<Option<(usize, bool)>> = vec![None; n];
    dist[src] = 0.0;
    for _ in 0..n {
        let mut changed = false;
        for (idx, &(a, b, c)) in arcs.iter().enumerate() {
            if dist[a] + c < dist[b] - EPS {
                dist[b] = dist[a] + c;
                pred[b] = Some((idx, true));
                changed = true;
            }
            if flow[idx] > 0 && dist[b] - c < dist[a] - EPS {
                dist[a] = dist[b] - c;
                pred[a] = Some((idx, false));
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    (dist, pred)
}

/// Integral min-cost flow by successive shortest paths. Sources are served
/// in terminal order and each path goes to the nearest remaining sink, ties
/// to the lower terminal id.
pub fn solve_mcf(p: &McfProblem) -> Result<McfFlow, LightTravelError> {
    let n = p.supplies.len();
    if p.supplies.iter().sum::<i64>() != 0 {
        return Err(LightTravelError::Argument("supplies do not sum to zero".into()));
    }
    let arcs: Vec<(usize, usize, f64)> = p
        .distance
        .keys()
        .map(|&(a, b)| (a.0, b.0, p.cost(a, b).expect("listed pair")))
        .collect();
    let mut flow = vec![0i64; arcs.len()];
    let mut rem = p.supplies.clone();

    while let Some(s) = rem.iter().position(|&v| v > 0) {
        let (dist, pred) = shortest_paths(n, &arcs, &flow, s);
        let sink = (0..n)
            .filter(|&t| rem[t] < 0 && dist[t].is_finite())
            .min_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)));
        let Some(t) = sink else {
            let to = rem.iter().position(|&v| v < 0).expect("balanced supplies");
            return Err(LightTravelError::Disconnected {
                from: TerminalId(s),
                to: TerminalId(to),
            });
        };
        let mut path = Vec::new();
        let mut amount = rem[s].min(-rem[t]);
        let mut v = t;
        while v != s {
            let (idx, fwd) = pred[v].expect("reachable");
            path.push((idx, fwd));
            if fwd {
                v = arcs[idx].0;
            } else {
                amount = amount.min(flow[idx]);
                v = arcs[idx].1;
            }
        }
        for (idx, fwd) in path {
            flow[idx] += if fwd { amount } else { -amount };
        }
        rem[s] -= amount;
        rem[t] += amount;
    }

    let mut out = McfFlow::default();
    for (idx, &(a, b, c)) in arcs.iter().enumerate() {
        if flow[idx] > 0 {
            out.flows.insert((TerminalId(a), TerminalId(b)), flow[idx]);
            out.cost += c * flow[idx] as f64;
        }
    }
    check_mcf_optimality(p, &out)?;
    Ok(out)
}

/// Verifies balance and the absence of negative residual cycles, which is
/// equivalent to the existence of node potentials satisfying complementary
/// slackness.
pub fn check_mcf_optimality(p: &McfProblem, f: &McfFlow) -> Result<(), LightTravelError> {
    let n = p.supplies.len();
    let mut net = vec![0i64; n];
    for (&(a, b), &x) in &f.flows {
        if x < 0 {
            return Err(LightTravelError::NotOptimal(format!("negative flow on {a}->{b}")));
        }
        net[a.0] -= x;
        net[b.0] += x;
    }
    for k in 0..n {
        if net[k] + p.supplies[k] != 0 {
            return Err(LightTravelError::NotOptimal(format!("terminal {} is unbalanced", TerminalId(k))));
        }
    }
    // potentials from a virtual root connected to every node at cost 0
    let mut pi = vec![0.0f64; n];
    let residual: Vec<(usize, usize, f64)> = p
        .distance
        .keys()
        .flat_map(|&(a, b)| {
            let c = p.cost(a, b).expect("listed pair");
            let x = f.flows.get(&(a, b)).copied().unwrap_or(0);
            let back = (x > 0).then_some((b.0, a.0, -c));
            std::iter::once((a.0, b.0, c)).chain(back)
        })
        .collect();
    for round in 0..=n {
        let mut changed = false;
        for &(a, b, c) in &residual {
            if pi[a] + c < pi[b] - 1e-7 {
                pi[b] = pi[a] + c;
                changed = true;
            }
        }
        if !changed {
            return Ok(());
        }
        if round == n {
            break;
        }
    }
    Err(LightTravelError::NotOptimal("negative-cost residual cycle".into()))
}

/// Inserts light arcs for terminal pairs whose heuristic flow exceeds
/// `threshold`: one arc per time window, leaving from the earliest
/// arrival-ground node of the window at the origin. Windows without such a
/// node borrow from the nearest window that has one, preferring the
/// preceding window on ties.
pub fn mcf_insert_arcs(
    net: &SpaceTimeNetwork,
    flow: &McfFlow,
    window_minutes: i64,
    threshold: i64,
) -> Result<Vec<LightArcSpec>, LightTravelError> {
    if window_minutes <= 0 {
        return Err(LightTravelError::Argument(format!("window must be positive, got {window_minutes}")));
    }
    let h = net.horizon;
    let n_windows = ((h + window_minutes - 1) / window_minutes) as usize;
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (&(i, j), &x) in &flow.flows {
        if x <= threshold {
            continue;
        }
        let Some(travel) = net.transit.get(i, j) else {
            warn!("no transit entry for {i}->{j}; skipping");
            continue;
        };
        let mut origin: Vec<Option<NodeId>> = vec![None; n_windows];
        for &n in &net.chains[i.0] {
            let node = net.node(n);
            if node.kind != NodeKind::ArrivalGround {
                continue;
            }
            let w = (node.time / window_minutes) as usize;
            if origin[w].is_none() {
                origin[w] = Some(n);
            }
        }
        if origin.iter().all(Option::is_none) {
            warn!("terminal {i} has no arrival-ground node; no light arcs towards {j}");
            continue;
        }
        for w in 0..n_windows {
            let tail = (0..n_windows)
                .flat_map(|d| [(w + n_windows - d) % n_windows, (w + d) % n_windows])
                .find_map(|v| origin[v])
                .expect("some window has an origin");
            if let Some((head, span)) = first_reachable(net, tail, j, travel, |_| true) {
                if seen.insert((tail, head)) {
                    out.push(spec(net, tail, head, travel, span));
                }
            }
        }
    }
    sort_specs(net, &mut out);
    Ok(out)
}
