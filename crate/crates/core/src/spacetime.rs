//! Cyclic weekly space-time network.
//!
//! Every leg contributes four nodes (ground-departure, departure, arrival,
//! arrival-ground) and three arcs (ground-departure, train, arrival-ground).
//! Intermediate stops add a transition arc, each terminal gets an initial
//! node at time 0, and the ground nodes of a terminal are chained in time
//! order with one wrap-around ground arc closing the cycle.
//!
//! Arc timing is carried in two fields. `span` is the elapsed time between
//! the tail event and the head event, which for light arcs includes waiting
//! at the destination and may exceed one horizon. `travel` is the time spent
//! on the activity itself (the transit time for light arcs, the span for
//! everything else). `wrap_count` is how often the arc crosses time 0, so the
//! number of units in the fleet is `sum(x * wrap_count)`.

use std::path::Path;

use serde::Serialize;

use crate::instance::{CostParams, Instance, RailcarFlags, TerminalId, TransitTable};

pub type NodeId = usize;
pub type ArcId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Initial,
    GroundDeparture,
    Departure,
    Arrival,
    ArrivalGround,
}

impl NodeKind {
    pub fn is_ground(self) -> bool {
        matches!(self, NodeKind::Initial | NodeKind::GroundDeparture | NodeKind::ArrivalGround)
    }

    /// Order of coincident ground nodes inside a chain.
    fn chain_rank(self) -> u8 {
        match self {
            NodeKind::Initial => 0,
            NodeKind::ArrivalGround => 1,
            NodeKind::GroundDeparture => 2,
            _ => 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ArcKind {
    Train,
    Transition,
    GroundDeparture,
    ArrivalGround,
    Ground,
    Light,
}

/// Position of a leg: `inst.trains[train].legs[leg]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct LegRef {
    pub train: usize,
    pub leg: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    pub terminal: TerminalId,
    pub time: i64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub leg: Option<LegRef>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Arc {
    pub id: ArcId,
    pub kind: ArcKind,
    pub tail: NodeId,
    pub head: NodeId,
    pub span: i64,
    pub travel: i64,
    pub wrap_count: u32,
    /// Train, ground-departure and arrival-ground arcs belong to a leg.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub leg: Option<LegRef>,
    /// Power demand on train arcs, 0 elsewhere.
    pub b: u32,
    /// Pick-up opportunity: ground-departure arc of a leg with seq > 1.
    pub pickup: bool,
    /// Set-out opportunity: arrival-ground arc of a leg that is not the last.
    pub setout: bool,
    #[serde(skip)]
    pub flags: Option<RailcarFlags>,
    /// Transition arcs only: the set-out arc leaving the tail and the
    /// pick-up arc entering the head.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop_arcs: Option<(ArcId, ArcId)>,
    /// Light arcs only: fixed charge per light train and cost per unit.
    pub fixed_cost: f64,
    pub unit_cost: f64,
}

impl Arc {
    pub fn wrap(&self) -> bool {
        self.wrap_count > 0
    }
}

/// A light-travel arc to be merged into a network.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LightArcSpec {
    pub tail: NodeId,
    pub head: NodeId,
    pub travel: i64,
    pub span: i64,
    pub wrap_count: u32,
    pub fixed_cost: f64,
    pub unit_cost: f64,
}

impl LightArcSpec {
    pub fn wrap(&self) -> bool {
        self.wrap_count > 0
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SpaceTimeNetwork {
    pub horizon: i64,
    pub nodes: Vec<Node>,
    pub arcs: Vec<Arc>,
    #[serde(skip)]
    pub in_arcs: Vec<Vec<ArcId>>,
    #[serde(skip)]
    pub out_arcs: Vec<Vec<ArcId>>,
    /// Ground nodes per terminal in chain order, starting at the initial node.
    #[serde(skip)]
    pub chains: Vec<Vec<NodeId>>,
    #[serde(skip)]
    pub transit: TransitTable,
    #[serde(skip)]
    pub costs: CostParams,
    #[serde(skip)]
    pub train_count: usize,
}

/// True when an activity starting at `tail_time` and lasting `duration`
/// reaches or passes the end of the horizon.
pub fn classify_wrap(tail_time: i64, _head_time: i64, duration: i64, horizon: i64) -> bool {
    tail_time + duration >= horizon
}

fn wraps(tail_time: i64, span: i64, horizon: i64) -> u32 {
    ((tail_time + span) / horizon) as u32
}

struct Builder {
    h: i64,
    nodes: Vec<Node>,
    arcs: Vec<Arc>,
}

impl Builder {
    fn node(&mut self, kind: NodeKind, terminal: TerminalId, time: i64, leg: Option<LegRef>) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(Node {
            id,
            kind,
            terminal,
            time: time.rem_euclid(self.h),
            leg,
        });
        id
    }

    fn arc(&mut self, kind: ArcKind, tail: NodeId, head: NodeId, span: i64) -> ArcId {
        let id = self.arcs.len();
        let wrap_count = if span == 0 {
            0
        } else {
            wraps(self.nodes[tail].time, span, self.h)
        };
        self.arcs.push(Arc {
            id,
            kind,
            tail,
            head,
            span,
            travel: span,
            wrap_count,
            leg: None,
            b: 0,
            pickup: false,
            setout: false,
            flags: None,
            stop_arcs: None,
            fixed_cost: 0.0,
            unit_cost: 0.0,
        });
        id
    }
}

/// Builds the network without light-travel arcs.
pub fn build_network(inst: &Instance) -> SpaceTimeNetwork {
    let h = inst.costs.horizon;
    let prep = inst.costs.prep_minutes;
    let inspect = inst.costs.inspect_minutes;
    let mut b = Builder {
        h,
        nodes: Vec::new(),
        arcs: Vec::new(),
    };
    for k in inst.terminal_ids() {
        b.node(NodeKind::Initial, k, 0, None);
    }

    // (gd, dep, arr, ag) node ids per leg
    let mut leg_nodes: Vec<Vec<[NodeId; 4]>> = Vec::with_capacity(inst.trains.len());
    for (ti, train) in inst.trains.iter().enumerate() {
        let mut per = Vec::with_capacity(train.legs.len());
        for (li, leg) in train.legs.iter().enumerate() {
            let r = Some(LegRef { train: ti, leg: li });
            let gd = b.node(NodeKind::GroundDeparture, leg.origin, leg.departure - prep, r);
            let dep = b.node(NodeKind::Departure, leg.origin, leg.departure, r);
            let arr = b.node(NodeKind::Arrival, leg.destination, leg.arrival, r);
            let ag = b.node(NodeKind::ArrivalGround, leg.destination, leg.arrival + inspect, r);
            per.push([gd, dep, arr, ag]);
        }
        leg_nodes.push(per);
    }

    let mut gd_arc = vec![Vec::new(); inst.trains.len()];
    let mut ag_arc = vec![Vec::new(); inst.trains.len()];
    for (ti, train) in inst.trains.iter().enumerate() {
        let last = train.legs.len() - 1;
        for (li, leg) in train.legs.iter().enumerate() {
            let r = Some(LegRef { train: ti, leg: li });
            let [gd, dep, arr, ag] = leg_nodes[ti][li];
            let t = b.arc(ArcKind::Train, dep, arr, (leg.arrival - leg.departure).rem_euclid(h));
            b.arcs[t].leg = r;
            b.arcs[t].b = leg.power;

            let g = b.arc(ArcKind::GroundDeparture, gd, dep, prep);
            b.arcs[g].leg = r;
            b.arcs[g].pickup = li > 0;
            gd_arc[ti].push(g);

            let a = b.arc(ArcKind::ArrivalGround, arr, ag, inspect);
            b.arcs[a].leg = r;
            b.arcs[a].setout = li < last;
            ag_arc[ti].push(a);
        }
    }
    for (ti, train) in inst.trains.iter().enumerate() {
        for (si, flags) in train.stops.iter().enumerate() {
            let arr = leg_nodes[ti][si][2];
            let dep = leg_nodes[ti][si + 1][1];
            let span = (b.nodes[dep].time - b.nodes[arr].time).rem_euclid(h);
            let c = b.arc(ArcKind::Transition, arr, dep, span);
            b.arcs[c].flags = Some(*flags);
            b.arcs[c].stop_arcs = Some((ag_arc[ti][si], gd_arc[ti][si + 1]));
        }
    }

    let mut chains: Vec<Vec<NodeId>> = vec![Vec::new(); inst.terminals.len()];
    for n in &b.nodes {
        if n.kind.is_ground() {
            chains[n.terminal.0].push(n.id);
        }
    }
    for chain in &mut chains {
        chain.sort_by_key(|&n| (b.nodes[n].time, b.nodes[n].kind.chain_rank(), n));
        for w in chain.windows(2) {
            let span = b.nodes[w[1]].time - b.nodes[w[0]].time;
            let a = b.arc(ArcKind::Ground, w[0], w[1], span);
            // coincident nodes never wrap, whatever the arithmetic says
            b.arcs[a].wrap_count = 0;
        }
        let last = *chain.last().expect("chain holds the initial node");
        let first = chain[0];
        let span = h - b.nodes[last].time;
        let a = b.arc(ArcKind::Ground, last, first, span);
        b.arcs[a].wrap_count = 1;
    }

    let mut net = SpaceTimeNetwork {
        horizon: h,
        nodes: b.nodes,
        arcs: b.arcs,
        in_arcs: Vec::new(),
        out_arcs: Vec::new(),
        chains,
        transit: inst.transit.clone(),
        costs: inst.costs.clone(),
        train_count: inst.trains.len(),
    };
    net.rebuild_incidence();
    net
}

impl SpaceTimeNetwork {
    fn rebuild_incidence(&mut self) {
        self.in_arcs = vec![Vec::new(); self.nodes.len()];
        self.out_arcs = vec![Vec::new(); self.nodes.len()];
        for a in &self.arcs {
            self.out_arcs[a.tail].push(a.id);
            self.in_arcs[a.head].push(a.id);
        }
    }

    pub fn terminal_count(&self) -> usize {
        self.chains.len()
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn arc(&self, id: ArcId) -> &Arc {
        &self.arcs[id]
    }

    pub fn ground_node_count(&self) -> usize {
        self.chains.iter().map(Vec::len).sum()
    }

    /// Arcs of one kind passing `pred`, ordered by tail terminal, tail time
    /// and arc id.
    pub fn arcs_of_kind(&self, kind: ArcKind, pred: impl Fn(&Arc) -> bool) -> Vec<&Arc> {
        let mut out: Vec<&Arc> = self.arcs.iter().filter(|a| a.kind == kind && pred(a)).collect();
        out.sort_by_key(|a| {
            let t = &self.nodes[a.tail];
            (t.terminal, t.time, a.id)
        });
        out
    }

    pub fn pickup_arcs(&self) -> Vec<&Arc> {
        self.arcs_of_kind(ArcKind::GroundDeparture, |a| a.pickup)
    }

    pub fn setout_arcs(&self) -> Vec<&Arc> {
        self.arcs_of_kind(ArcKind::ArrivalGround, |a| a.setout)
    }

    /// Returns a copy with the light arcs appended after the existing arcs.
    pub fn with_light_arcs(&self, specs: &[LightArcSpec]) -> SpaceTimeNetwork {
        let mut net = self.clone();
        for s in specs {
            let id = net.arcs.len();
            net.arcs.push(Arc {
                id,
                kind: ArcKind::Light,
                tail: s.tail,
                head: s.head,
                span: s.span,
                travel: s.travel,
                wrap_count: s.wrap_count,
                leg: None,
                b: 0,
                pickup: false,
                setout: false,
                flags: None,
                stop_arcs: None,
                fixed_cost: s.fixed_cost,
                unit_cost: s.unit_cost,
            });
            net.out_arcs[s.tail].push(id);
            net.in_arcs[s.head].push(id);
        }
        net
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serializes")
    }

    pub fn dump(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_json())
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::instance::{RailcarEvent, Terminal, Train, TrainLeg};

    pub(crate) fn terminals(n: usize) -> Vec<Terminal> {
        (0..n)
            .map(|i| Terminal {
                code: format!("T{}", i + 1),
                name: format!("T{}", i + 1),
            })
            .collect()
    }

    /// Three terminals: a two-leg train T3 -> T2 -> T1 with a pick-up stop
    /// at T2 and a one-leg train T1 -> T3.
    pub(crate) fn fig1() -> Instance {
        let mut transit = TransitTable::new();
        for a in 0..3 {
            for b in 0..3 {
                if a != b {
                    transit.insert(TerminalId(a), TerminalId(b), 300 + 60 * (a + b) as i64);
                }
            }
        }
        let t = |a: usize, b: usize| transit.get(TerminalId(a), TerminalId(b)).unwrap();
        let d1 = 1_000;
        let a1 = d1 + t(2, 1);
        let d2 = a1 + 240;
        let a2 = d2 + t(1, 0);
        let d3 = 5_000;
        let legs = vec![
            TrainLeg {
                seq: 1,
                origin: TerminalId(2),
                destination: TerminalId(1),
                departure: d1,
                arrival: a1,
                power: 2,
            },
            TrainLeg {
                seq: 2,
                origin: TerminalId(1),
                destination: TerminalId(0),
                departure: d2,
                arrival: a2,
                power: 2,
            },
        ];
        Instance {
            terminals: terminals(3),
            transit: transit.clone(),
            trains: vec![
                Train {
                    id: "A".into(),
                    legs,
                    stops: vec![RailcarFlags::from_event(RailcarEvent::PickUp)],
                },
                Train {
                    id: "B".into(),
                    legs: vec![TrainLeg {
                        seq: 1,
                        origin: TerminalId(0),
                        destination: TerminalId(2),
                        departure: d3,
                        arrival: d3 + t(0, 2),
                        power: 2,
                    }],
                    stops: vec![],
                },
            ],
            costs: CostParams::default(),
            baseline: None,
        }
    }

    pub(crate) fn single_leg(dep: i64, minutes: i64) -> Instance {
        let mut transit = TransitTable::new();
        transit.insert(TerminalId(0), TerminalId(1), minutes);
        transit.insert(TerminalId(1), TerminalId(0), minutes);
        Instance {
            terminals: terminals(2),
            transit,
            trains: vec![Train {
                id: "A".into(),
                legs: vec![TrainLeg {
                    seq: 1,
                    origin: TerminalId(0),
                    destination: TerminalId(1),
                    departure: dep,
                    arrival: (dep + minutes) % 10_080,
                    power: 2,
                }],
                stops: vec![],
            }],
            costs: CostParams::default(),
            baseline: None,
        }
    }

    #[test]
    fn fig1_structure() {
        let inst = fig1();
        assert!(crate::instance::validate_instance(&inst).is_empty());
        let net = build_network(&inst);
        assert_eq!(net.pickup_arcs().len(), 1);
        assert_eq!(net.setout_arcs().len(), 1);
        assert_eq!(net.arcs_of_kind(ArcKind::Transition, |_| true).len(), 1);
        assert_eq!(net.arcs_of_kind(ArcKind::Ground, |a| a.wrap()).len(), 3);
        assert_eq!(net.arcs_of_kind(ArcKind::Train, |_| true).len(), 3);
        // the set-out arc is the arrival-ground arc of leg 1 at T2
        let so = net.setout_arcs()[0];
        assert_eq!(so.leg, Some(LegRef { train: 0, leg: 0 }));
        assert_eq!(net.node(so.tail).terminal, TerminalId(1));
        let pu = net.pickup_arcs()[0];
        assert_eq!(pu.leg, Some(LegRef { train: 0, leg: 1 }));
        let c = net.arcs_of_kind(ArcKind::Transition, |_| true)[0];
        assert_eq!(c.stop_arcs, Some((so.id, pu.id)));
    }

    #[test]
    fn single_leg_node_times() {
        let net = build_network(&single_leg(100, 600));
        let gd: Vec<_> = net.nodes.iter().filter(|n| n.kind == NodeKind::GroundDeparture).collect();
        let ag: Vec<_> = net.nodes.iter().filter(|n| n.kind == NodeKind::ArrivalGround).collect();
        assert_eq!(gd[0].time, 40);
        assert_eq!(ag[0].time, 820);
        assert!(net.pickup_arcs().is_empty());
        assert!(net.setout_arcs().is_empty());
    }

    #[test]
    fn early_departure_wraps_ground_departure_arc() {
        let net = build_network(&single_leg(30, 600));
        let g = net.arcs_of_kind(ArcKind::GroundDeparture, |_| true)[0];
        assert_eq!(net.node(g.tail).time, 10_050);
        assert!(g.wrap());
    }

    #[test]
    fn classify_wrap_cases() {
        assert!(classify_wrap(10_000, 200, 280, 10_080));
        assert!(!classify_wrap(0, 500, 500, 10_080));
        assert!(classify_wrap(9_900, 0, 180, 10_080));
    }

    #[test]
    fn counts_are_linear_in_legs() {
        let inst = crate::instance::generate_synthetic(3, 4, 8, 3).unwrap();
        let net = build_network(&inst);
        let legs = inst.leg_count();
        let stops: usize = inst.trains.iter().map(|t| t.legs.len() - 1).sum();
        assert_eq!(net.arcs_of_kind(ArcKind::Train, |_| true).len(), legs);
        assert_eq!(net.arcs_of_kind(ArcKind::GroundDeparture, |_| true).len(), legs);
        assert_eq!(net.arcs_of_kind(ArcKind::ArrivalGround, |_| true).len(), legs);
        assert_eq!(net.arcs_of_kind(ArcKind::Transition, |_| true).len(), stops);
        assert_eq!(net.arcs_of_kind(ArcKind::Ground, |a| a.wrap()).len(), 4);
        for n in &net.nodes {
            if n.kind != NodeKind::Initial {
                assert!(!net.in_arcs[n.id].is_empty() && !net.out_arcs[n.id].is_empty());
            }
        }
    }

    #[test]
    fn arc_spans_match_node_times() {
        let inst = crate::instance::generate_synthetic(11, 5, 12, 3).unwrap();
        let net = build_network(&inst);
        let h = net.horizon;
        for a in &net.arcs {
            let (t, hd) = (net.node(a.tail).time, net.node(a.head).time);
            assert_eq!((t + a.span).rem_euclid(h), hd, "arc {}", a.id);
            assert_eq!(t + a.span, hd + h * a.wrap_count as i64, "arc {}", a.id);
        }
    }

    #[test]
    fn chains_visit_each_ground_node_once() {
        let inst = crate::instance::generate_synthetic(5, 3, 6, 2).unwrap();
        let net = build_network(&inst);
        let ground = net.nodes.iter().filter(|n| n.kind.is_ground()).count();
        assert_eq!(net.ground_node_count(), ground);
        for (k, chain) in net.chains.iter().enumerate() {
            assert_eq!(net.node(chain[0]).kind, NodeKind::Initial);
            for w in chain.windows(2) {
                assert!(net.node(w[0]).time <= net.node(w[1]).time);
            }
            assert!(chain.iter().all(|&n| net.node(n).terminal == TerminalId(k)));
        }
    }

    #[test]
    fn dump_is_deterministic() {
        let inst = fig1();
        assert_eq!(build_network(&inst).to_json(), build_network(&inst).to_json());
    }
}
