//! Problem data: terminals, transit times, the weekly train schedule with
//! power demands and railcar flags, cost parameters and the baseline
//! work-event plan.
//!
//! Instances are loaded from a versioned JSON document, validated against a
//! fixed list of invariants, or generated synthetically from a seed.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

/// Length of the cyclic planning horizon in minutes (one week).
pub const WEEK_MINUTES: i64 = 10_080;
/// Minutes per day, used to bucket work events into terminal-days.
pub const DAY_MINUTES: i64 = 1_440;
/// Version written to and accepted from instance files.
pub const SCHEMA_VERSION: u32 = 1;

/// Index of a terminal within its instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TerminalId(pub usize);

impl fmt::Display for TerminalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "k{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Terminal {
    pub code: String,
    pub name: String,
}

/// Directed transit times between terminals. Entries may be asymmetric.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TransitTable {
    entries: BTreeMap<(TerminalId, TerminalId), i64>,
}

impl TransitTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, from: TerminalId, to: TerminalId, minutes: i64) {
        self.entries.insert((from, to), minutes);
    }

    pub fn get(&self, from: TerminalId, to: TerminalId) -> Option<i64> {
        self.entries.get(&(from, to)).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (TerminalId, TerminalId, i64)> + '_ {
        self.entries.iter().map(|(&(a, b), &m)| (a, b, m))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// One scheduled segment of a train journey.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrainLeg {
    /// 1-based position within the train.
    pub seq: u32,
    pub origin: TerminalId,
    pub destination: TerminalId,
    /// Departure, minutes in `[0, H)`.
    pub departure: i64,
    /// Arrival, minutes in `[0, H)`.
    pub arrival: i64,
    /// Active locomotives required on the leg.
    pub power: u32,
}

/// Railcar activity at the intermediate stop between two consecutive legs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RailcarFlags {
    pub pu: bool,
    pub so: bool,
    pub no: bool,
    pub both: bool,
}

/// The single railcar event category of a well-formed [`RailcarFlags`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RailcarEvent {
    PickUp,
    SetOut,
    NoEvent,
    Both,
}

impl RailcarFlags {
    pub fn from_event(event: RailcarEvent) -> Self {
        let mut f = Self::default();
        match event {
            RailcarEvent::PickUp => f.pu = true,
            RailcarEvent::SetOut => f.so = true,
            RailcarEvent::NoEvent => f.no = true,
            RailcarEvent::Both => f.both = true,
        }
        f
    }

    fn count(&self) -> usize {
        [self.pu, self.so, self.no, self.both].iter().filter(|&&b| b).count()
    }

    /// The event category, or `None` unless exactly one flag is set.
    pub fn event(&self) -> Option<RailcarEvent> {
        if self.count() != 1 {
            return None;
        }
        Some(if self.pu {
            RailcarEvent::PickUp
        } else if self.so {
            RailcarEvent::SetOut
        } else if self.no {
            RailcarEvent::NoEvent
        } else {
            RailcarEvent::Both
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Train {
    pub id: String,
    pub legs: Vec<TrainLeg>,
    /// `stops[i]` describes the stop between `legs[i]` and `legs[i + 1]`.
    pub stops: Vec<RailcarFlags>,
}

/// Cost coefficients and operating limits.
///
/// Light-travel fixed charges and relocation costs are linear in transit
/// minutes: `e_l = e_rate * minutes`, `g_l = g_rate * minutes`.
#[derive(Clone, Debug, PartialEq)]
pub struct CostParams {
    /// Weekly ownership cost per locomotive.
    pub q: f64,
    /// Work event aligned with the railcar event.
    pub c1: f64,
    /// Work event mismatched with the railcar event.
    pub c2: f64,
    /// Stand-alone work event.
    pub c3: f64,
    pub e_rate: f64,
    pub g_rate: f64,
    /// Maximum locomotives on a train leg.
    pub f: u32,
    /// Maximum locomotives on a light train.
    pub rho_u: u32,
    pub prep_minutes: i64,
    pub inspect_minutes: i64,
    pub horizon: i64,
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            q: 10_000.0,
            c1: 20.0,
            c2: 50.0,
            c3: 100.0,
            e_rate: 2.0,
            g_rate: 1.0,
            f: 4,
            rho_u: 4,
            prep_minutes: 60,
            inspect_minutes: 120,
            horizon: WEEK_MINUTES,
        }
    }
}

impl CostParams {
    pub fn light_fixed_cost(&self, minutes: i64) -> f64 {
        self.e_rate * minutes as f64
    }

    pub fn unit_cost(&self, minutes: i64) -> f64 {
        self.g_rate * minutes as f64
    }

    pub fn days(&self) -> u32 {
        ((self.horizon + DAY_MINUTES - 1) / DAY_MINUTES) as u32
    }
}

/// Baseline work-event counts `h[k, d]`. Missing entries are zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BaselinePlan {
    pub days: u32,
    events: BTreeMap<(TerminalId, u32), u32>,
}

impl BaselinePlan {
    pub fn new(days: u32) -> Self {
        Self {
            days,
            events: BTreeMap::new(),
        }
    }

    pub fn set(&mut self, terminal: TerminalId, day: u32, count: u32) {
        if count == 0 {
            self.events.remove(&(terminal, day));
        } else {
            self.events.insert((terminal, day), count);
        }
    }

    pub fn count(&self, terminal: TerminalId, day: u32) -> u32 {
        self.events.get(&(terminal, day)).copied().unwrap_or(0)
    }

    /// Non-zero entries in `(terminal, day)` order.
    pub fn entries(&self) -> impl Iterator<Item = (TerminalId, u32, u32)> + '_ {
        self.events.iter().map(|(&(k, d), &c)| (k, d, c))
    }

    pub fn is_active_day(&self, terminal: TerminalId, day: u32) -> bool {
        self.count(terminal, day) > 0
    }

    pub fn is_active_terminal(&self, terminal: TerminalId) -> bool {
        self.events.keys().any(|&(k, _)| k == terminal)
    }

    /// Terminals with no baseline work events on any day (`K^I`).
    pub fn inactive_terminals(&self, n_terminals: usize) -> Vec<TerminalId> {
        (0..n_terminals)
            .map(TerminalId)
            .filter(|&k| !self.is_active_terminal(k))
            .collect()
    }

    /// Terminal-day pairs without baseline work events (`KD^I`).
    pub fn inactive_days(&self, n_terminals: usize) -> Vec<(TerminalId, u32)> {
        let mut out = Vec::new();
        for k in 0..n_terminals {
            for d in 0..self.days {
                if !self.is_active_day(TerminalId(k), d) {
                    out.push((TerminalId(k), d));
                }
            }
        }
        out
    }

    pub fn active_day_count(&self) -> usize {
        self.events.len()
    }

    pub fn active_terminal_count(&self) -> usize {
        self.events.keys().map(|&(k, _)| k).collect::<BTreeSet<_>>().len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub terminals: Vec<Terminal>,
    pub transit: TransitTable,
    pub trains: Vec<Train>,
    pub costs: CostParams,
    pub baseline: Option<BaselinePlan>,
}

impl Instance {
    pub fn horizon(&self) -> i64 {
        self.costs.horizon
    }

    pub fn terminal_ids(&self) -> impl Iterator<Item = TerminalId> {
        (0..self.terminals.len()).map(TerminalId)
    }

    pub fn terminal_code(&self, k: TerminalId) -> &str {
        &self.terminals[k.0].code
    }

    pub fn terminal_by_code(&self, code: &str) -> Option<TerminalId> {
        self.terminals.iter().position(|t| t.code == code).map(TerminalId)
    }

    pub fn leg_count(&self) -> usize {
        self.trains.iter().map(|t| t.legs.len()).sum()
    }

    pub fn legs(&self) -> impl Iterator<Item = &TrainLeg> {
        self.trains.iter().flat_map(|t| t.legs.iter())
    }
}

// ---------------------------------------------------------------------------
// Validation

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

/// A violated invariant. `code` is stable and machine-readable.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub code: &'static str,
    pub severity: Severity,
    pub message: String,
}

impl Violation {
    fn error(code: &'static str, message: impl Into<String>) -> Self {
        Self {
            code,
            severity: Severity::Error,
            message: message.into(),
        }
    }

    fn warning(code: &'static str, message: impl Into<String>) -> Self {
        Self {
            code,
            severity: Severity::Warning,
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

/// Checks every instance invariant. An empty list means the instance is
/// valid. Legs that need no power are reported as `ZERO_POWER` warnings.
pub fn validate_instance(inst: &Instance) -> Vec<Violation> {
    let mut out = Vec::new();
    let h = inst.costs.horizon;
    let n = inst.terminals.len();
    let known = |k: TerminalId| k.0 < n;

    let mut codes = BTreeSet::new();
    for t in &inst.terminals {
        if !codes.insert(t.code.as_str()) {
            out.push(Violation::error(
                "DUPLICATE_TERMINAL",
                format!("terminal id {:?} appears more than once", t.code),
            ));
        }
    }

    let c = &inst.costs;
    if h <= 0 {
        out.push(Violation::error("HORIZON_INVALID", format!("horizon {h} must be positive")));
    }
    for (name, v) in [
        ("q", c.q),
        ("c1", c.c1),
        ("c2", c.c2),
        ("c3", c.c3),
        ("e_rate", c.e_rate),
        ("g_rate", c.g_rate),
    ] {
        if !(v >= 0.0) || !v.is_finite() {
            out.push(Violation::error("NEGATIVE_COST", format!("cost {name} = {v} must be finite and >= 0")));
        }
    }
    if !(c.c1 <= c.c2 && c.c2 <= c.c3) {
        out.push(Violation::error(
            "COST_ORDER",
            format!("expected c1 <= c2 <= c3, got {} / {} / {}", c.c1, c.c2, c.c3),
        ));
    }
    if c.rho_u < 1 {
        out.push(Violation::error("LIGHT_CAP_ZERO", "rho_u must be at least 1"));
    }
    for (name, v) in [("prep", c.prep_minutes), ("inspect", c.inspect_minutes)] {
        if v < 0 || v >= h.max(1) {
            out.push(Violation::error(
                "GROUND_TIME_OUT_OF_RANGE",
                format!("{name} minutes {v} must lie in [0, {h})"),
            ));
        }
    }

    for (a, b, m) in inst.transit.iter() {
        if !known(a) || !known(b) {
            out.push(Violation::error("UNKNOWN_TERMINAL", format!("transit entry {a}->{b} names an unknown terminal")));
        } else if m <= 0 || m >= h {
            out.push(Violation::error(
                "TRANSIT_OUT_OF_RANGE",
                format!("transit {}->{} = {m} must lie in (0, {h})", inst.terminal_code(a), inst.terminal_code(b)),
            ));
        }
    }

    let mut train_ids = BTreeSet::new();
    for train in &inst.trains {
        let tid = &train.id;
        if !train_ids.insert(tid.as_str()) {
            out.push(Violation::error("DUPLICATE_TRAIN", format!("train id {tid:?} appears more than once")));
        }
        if train.legs.is_empty() {
            out.push(Violation::error("EMPTY_TRAIN", format!("train {tid} has no legs")));
            continue;
        }
        for (i, leg) in train.legs.iter().enumerate() {
            let name = format!("train {tid} leg {}", leg.seq);
            if leg.seq as usize != i + 1 {
                out.push(Violation::error(
                    "SEQ_NOT_CONTIGUOUS",
                    format!("{name}: expected sequence index {}", i + 1),
                ));
            }
            if !known(leg.origin) || !known(leg.destination) {
                out.push(Violation::error("UNKNOWN_TERMINAL", format!("{name} names an unknown terminal")));
                continue;
            }
            if !(0..h).contains(&leg.departure) || !(0..h).contains(&leg.arrival) {
                out.push(Violation::error(
                    "TIME_OUT_OF_RANGE",
                    format!("{name}: departure {} / arrival {} must lie in [0, {h})", leg.departure, leg.arrival),
                ));
            }
            match inst.transit.get(leg.origin, leg.destination) {
                None => out.push(Violation::error(
                    "MISSING_TRANSIT",
                    format!(
                        "{name}: no transit entry for {}->{}",
                        inst.terminal_code(leg.origin),
                        inst.terminal_code(leg.destination)
                    ),
                )),
                Some(m) if h > 0 && (leg.arrival - leg.departure).rem_euclid(h) != m.rem_euclid(h) => {
                    out.push(Violation::error(
                        "DURATION_MISMATCH",
                        format!(
                            "{name}: arrival - departure = {} but transit {}->{} is {m}",
                            (leg.arrival - leg.departure).rem_euclid(h),
                            inst.terminal_code(leg.origin),
                            inst.terminal_code(leg.destination)
                        ),
                    ))
                }
                Some(_) => {}
            }
            if leg.power > c.f {
                out.push(Violation::error(
                    "POWER_EXCEEDS_CAP",
                    format!("{name}: power demand {} exceeds f = {}", leg.power, c.f),
                ));
            }
            if leg.power == 0 {
                out.push(Violation::warning("ZERO_POWER", format!("{name} requires no locomotives")));
            }
            if let Some(next) = train.legs.get(i + 1) {
                if next.origin != leg.destination {
                    out.push(Violation::error(
                        "LEG_DISCONTINUOUS",
                        format!("{name} ends where leg {} does not start", next.seq),
                    ));
                }
            }
        }
        if train.stops.len() != train.legs.len() - 1 {
            out.push(Violation::error(
                "STOP_COUNT_MISMATCH",
                format!(
                    "train {tid} has {} legs but {} stop records",
                    train.legs.len(),
                    train.stops.len()
                ),
            ));
        }
        for (i, flags) in train.stops.iter().enumerate() {
            match flags.count() {
                1 => {}
                0 => out.push(Violation::error(
                    "FLAGS_EMPTY",
                    format!("train {tid} stop after leg {}: no railcar flag set", i + 1),
                )),
                _ => out.push(Violation::error(
                    "FLAGS_NOT_EXCLUSIVE",
                    format!("train {tid} stop after leg {}: more than one railcar flag set", i + 1),
                )),
            }
        }
    }

    if let Some(base) = &inst.baseline {
        for (k, d, _) in base.entries() {
            if !known(k) {
                out.push(Violation::error("UNKNOWN_TERMINAL", format!("baseline entry names unknown terminal {k}")));
            }
            if d >= base.days {
                out.push(Violation::error(
                    "BASELINE_DAY_OUT_OF_RANGE",
                    format!("baseline day {d} outside 0..{}", base.days),
                ));
            }
        }
    }
    out
}

/// True when [`validate_instance`] reports no error-severity violation.
pub fn is_valid(inst: &Instance) -> bool {
    validate_instance(inst).iter().all(|v| v.severity != Severity::Error)
}

/// Weekly locomotive balance per terminal: power arriving minus power
/// departing. Positive entries are surplus terminals.
pub fn net_power_balance(inst: &Instance) -> Vec<i64> {
    let mut bal = vec![0i64; inst.terminals.len()];
    for leg in inst.legs() {
        bal[leg.destination.0] += leg.power as i64;
        bal[leg.origin.0] -= leg.power as i64;
    }
    bal
}

// ---------------------------------------------------------------------------
// File format

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("field {field}: {message}")]
    Field { field: String, message: String },
    #[error("invalid instance: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("bad generator arguments: {0}")]
    Argument(String),
}

fn flag<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Bool(bool),
        Int(u64),
    }
    match Raw::deserialize(d)? {
        Raw::Bool(b) => Ok(b),
        Raw::Int(0) => Ok(false),
        Raw::Int(1) => Ok(true),
        Raw::Int(n) => Err(serde::de::Error::custom(format!("flag must be 0 or 1, got {n}"))),
    }
}

fn one_zero<S: serde::Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_u8(*v as u8)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileInstance {
    schema_version: u32,
    terminals: Vec<FileTerminal>,
    transit: Vec<FileTransit>,
    trains: Vec<FileTrain>,
    costs: FileCosts,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    baseline: Option<FileBaseline>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileTerminal {
    id: String,
    #[serde(default)]
    name: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileTransit {
    from: String,
    to: String,
    minutes: i64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileTrain {
    id: String,
    legs: Vec<FileLeg>,
    #[serde(default)]
    stops: Vec<FileStop>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileLeg {
    seq: u32,
    from: String,
    to: String,
    dep: i64,
    arr: i64,
    b: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileStop {
    after_seq: u32,
    flags: FileFlags,
}

#[derive(Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileFlags {
    #[serde(default, deserialize_with = "flag", serialize_with = "one_zero")]
    pu: bool,
    #[serde(default, deserialize_with = "flag", serialize_with = "one_zero")]
    so: bool,
    #[serde(default, deserialize_with = "flag", serialize_with = "one_zero")]
    no: bool,
    #[serde(default, deserialize_with = "flag", serialize_with = "one_zero")]
    both: bool,
}

fn default_prep() -> i64 {
    CostParams::default().prep_minutes
}
fn default_inspect() -> i64 {
    CostParams::default().inspect_minutes
}
fn default_horizon() -> i64 {
    WEEK_MINUTES
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileCosts {
    q: f64,
    c1: f64,
    c2: f64,
    c3: f64,
    e_rate: f64,
    g_rate: f64,
    f: u32,
    rho_u: u32,
    #[serde(default = "default_prep")]
    prep: i64,
    #[serde(default = "default_inspect")]
    inspect: i64,
    #[serde(default = "default_horizon")]
    horizon: i64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileBaseline {
    days: u32,
    events: Vec<FileEvent>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileEvent {
    terminal: String,
    day: u32,
    count: u32,
}

impl FileInstance {
    fn into_instance(self) -> Result<Instance, InstanceError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(InstanceError::Field {
                field: "schema_version".into(),
                message: format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            });
        }
        let terminals: Vec<Terminal> = self
            .terminals
            .into_iter()
            .map(|t| Terminal {
                name: if t.name.is_empty() { t.id.clone() } else { t.name },
                code: t.id,
            })
            .collect();
        let lookup = |code: &str, field: String| -> Result<TerminalId, InstanceError> {
            terminals
                .iter()
                .position(|t| t.code == code)
                .map(TerminalId)
                .ok_or_else(|| InstanceError::Field {
                    field,
                    message: format!("unknown terminal {code:?}"),
                })
        };

        let mut transit = TransitTable::new();
        for (i, e) in self.transit.iter().enumerate() {
            let a = lookup(&e.from, format!("transit[{i}].from"))?;
            let b = lookup(&e.to, format!("transit[{i}].to"))?;
            if transit.get(a, b).is_some() {
                return Err(InstanceError::Field {
                    field: format!("transit[{i}]"),
                    message: format!("duplicate entry {}->{}", e.from, e.to),
                });
            }
            transit.insert(a, b, e.minutes);
        }

        let mut trains = Vec::with_capacity(self.trains.len());
        for (ti, t) in self.trains.into_iter().enumerate() {
            let mut legs = Vec::with_capacity(t.legs.len());
            for (li, l) in t.legs.iter().enumerate() {
                legs.push(TrainLeg {
                    seq: l.seq,
                    origin: lookup(&l.from, format!("trains[{ti}].legs[{li}].from"))?,
                    destination: lookup(&l.to, format!("trains[{ti}].legs[{li}].to"))?,
                    departure: l.dep,
                    arrival: l.arr,
                    power: l.b,
                });
            }
            legs.sort_by_key(|l| l.seq);
            let n_stops = legs.len().saturating_sub(1);
            let mut stops = vec![None; n_stops];
            for (si, s) in t.stops.iter().enumerate() {
                let field = format!("trains[{ti}].stops[{si}].after_seq");
                if s.after_seq == 0 || s.after_seq as usize > n_stops {
                    return Err(InstanceError::Field {
                        field,
                        message: format!("no intermediate stop after leg {}", s.after_seq),
                    });
                }
                let slot = &mut stops[s.after_seq as usize - 1];
                if slot.is_some() {
                    return Err(InstanceError::Field {
                        field,
                        message: format!("duplicate stop record after leg {}", s.after_seq),
                    });
                }
                *slot = Some(RailcarFlags {
                    pu: s.flags.pu,
                    so: s.flags.so,
                    no: s.flags.no,
                    both: s.flags.both,
                });
            }
            if let Some(missing) = stops.iter().position(|s| s.is_none()) {
                return Err(InstanceError::Field {
                    field: format!("trains[{ti}].stops"),
                    message: format!("missing railcar flags for the stop after leg {}", missing + 1),
                });
            }
            trains.push(Train {
                id: t.id,
                legs,
                stops: stops.into_iter().flatten().collect(),
            });
        }

        let c = self.costs;
        let costs = CostParams {
            q: c.q,
            c1: c.c1,
            c2: c.c2,
            c3: c.c3,
            e_rate: c.e_rate,
            g_rate: c.g_rate,
            f: c.f,
            rho_u: c.rho_u,
            prep_minutes: c.prep,
            inspect_minutes: c.inspect,
            horizon: c.horizon,
        };

        let baseline = match self.baseline {
            None => None,
            Some(b) => {
                let mut plan = BaselinePlan::new(b.days);
                for (i, e) in b.events.iter().enumerate() {
                    let k = lookup(&e.terminal, format!("baseline.events[{i}].terminal"))?;
                    plan.set(k, e.day, plan.count(k, e.day) + e.count);
                }
                Some(plan)
            }
        };

        Ok(Instance {
            terminals,
            transit,
            trains,
            costs,
            baseline,
        })
    }

    fn from_instance(inst: &Instance) -> Self {
        let code = |k: TerminalId| inst.terminals[k.0].code.clone();
        FileInstance {
            schema_version: SCHEMA_VERSION,
            terminals: inst
                .terminals
                .iter()
                .map(|t| FileTerminal {
                    id: t.code.clone(),
                    name: t.name.clone(),
                })
                .collect(),
            transit: inst
                .transit
                .iter()
                .map(|(a, b, m)| FileTransit {
                    from: code(a),
                    to: code(b),
                    minutes: m,
                })
                .collect(),
            trains: inst
                .trains
                .iter()
                .map(|t| FileTrain {
                    id: t.id.clone(),
                    legs: t
                        .legs
                        .iter()
                        .map(|l| FileLeg {
                            seq: l.seq,
                            from: code(l.origin),
                            to: code(l.destination),
                            dep: l.departure,
                            arr: l.arrival,
                            b: l.power,
                        })
                        .collect(),
                    stops: t
                        .stops
                        .iter()
                        .enumerate()
                        .map(|(i, f)| FileStop {
                            after_seq: i as u32 + 1,
                            flags: FileFlags {
                                pu: f.pu,
                                so: f.so,
                                no: f.no,
                                both: f.both,
                            },
                        })
                        .collect(),
                })
                .collect(),
            costs: FileCosts {
                q: inst.costs.q,
                c1: inst.costs.c1,
                c2: inst.costs.c2,
                c3: inst.costs.c3,
                e_rate: inst.costs.e_rate,
                g_rate: inst.costs.g_rate,
                f: inst.costs.f,
                rho_u: inst.costs.rho_u,
                prep: inst.costs.prep_minutes,
                inspect: inst.costs.inspect_minutes,
                horizon: inst.costs.horizon,
            },
            baseline: inst.baseline.as_ref().map(|b| FileBaseline {
                days: b.days,
                events: b
                    .entries()
                    .map(|(k, d, c)| FileEvent {
                        terminal: code(k),
                        day: d,
                        count: c,
                    })
                    .collect(),
            }),
        }
    }
}

/// Parses an instance document without validating it.
pub fn parse_instance(text: &str) -> Result<Instance, InstanceError> {
    let raw: FileInstance = serde_json::from_str(text).map_err(|e| InstanceError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    raw.into_instance()
}

/// Reads, parses and validates an instance file. Warnings do not fail the load.
pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance, InstanceError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| InstanceError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let inst = parse_instance(&text)?;
    let errors: Vec<Violation> = validate_instance(&inst)
        .into_iter()
        .filter(|v| v.severity == Severity::Error)
        .collect();
    if errors.is_empty() {
        Ok(inst)
    } else {
        Err(InstanceError::Invalid(errors))
    }
}

pub fn instance_to_json(inst: &Instance) -> String {
    serde_json::to_string_pretty(&FileInstance::from_instance(inst)).expect("instance serializes")
}

pub fn save_instance(inst: &Instance, path: impl AsRef<Path>) -> Result<(), InstanceError> {
    let path = path.as_ref();
    fs::write(path, instance_to_json(inst)).map_err(|source| InstanceError::Io {
        path: path.display().to_string(),
        source,
    })
}

// ---------------------------------------------------------------------------
// Synthetic instances

/// Builds a random instance that passes [`validate_instance`].
///
/// Terminals are scattered on a plane; transit minutes grow with distance
/// plus a per-direction perturbation, so the table is asymmetric but keeps
/// the triangle inequality. Each train starts at a uniform time of the week
/// and chains its legs through random terminals with short dwells.
pub fn generate_synthetic(
    seed: u64,
    n_terminals: usize,
    n_trains: usize,
    max_legs: usize,
) -> Result<Instance, InstanceError> {
    if n_terminals < 2 {
        return Err(InstanceError::Argument(format!("n_terminals = {n_terminals}, need at least 2")));
    }
    if n_trains < 1 {
        return Err(InstanceError::Argument("n_trains must be at least 1".into()));
    }
    if max_legs < 1 {
        return Err(InstanceError::Argument("max_legs must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let costs = CostParams::default();
    let h = costs.horizon;

    let terminals: Vec<Terminal> = (0..n_terminals)
        .map(|i| Terminal {
            code: format!("T{i}"),
            name: format!("Terminal {i}"),
        })
        .collect();
    let coords: Vec<(f64, f64)> = (0..n_terminals)
        .map(|_| (rng.random_range(0.0..1000.0), rng.random_range(0.0..1000.0)))
        .collect();
    let mut transit = TransitTable::new();
    for a in 0..n_terminals {
        for b in 0..n_terminals {
            if a == b {
                continue;
            }
            let (dx, dy) = (coords[a].0 - coords[b].0, coords[a].1 - coords[b].1);
            let minutes = (dx.hypot(dy) * 0.6).round() as i64 + 60 + rng.random_range(0..=30);
            transit.insert(TerminalId(a), TerminalId(b), minutes);
        }
    }

    let events = [
        RailcarEvent::PickUp,
        RailcarEvent::SetOut,
        RailcarEvent::NoEvent,
        RailcarEvent::Both,
    ];
    let mut trains = Vec::with_capacity(n_trains);
    for t in 0..n_trains {
        let n_legs = rng.random_range(1..=max_legs);
        let mut at = TerminalId(rng.random_range(0..n_terminals));
        let mut dep = rng.random_range(0..h);
        let mut legs = Vec::with_capacity(n_legs);
        let mut stops = Vec::with_capacity(n_legs - 1);
        for i in 0..n_legs {
            let mut to = TerminalId(rng.random_range(0..n_terminals - 1));
            if to.0 >= at.0 {
                to.0 += 1;
            }
            let minutes = transit.get(at, to).expect("complete table");
            let arr = (dep + minutes).rem_euclid(h);
            legs.push(TrainLeg {
                seq: i as u32 + 1,
                origin: at,
                destination: to,
                departure: dep,
                arrival: arr,
                power: rng.random_range(1..=costs.f),
            });
            if i + 1 < n_legs {
                stops.push(RailcarFlags::from_event(*events.choose(&mut rng).expect("non-empty")));
                dep = (arr + rng.random_range(30..=180)).rem_euclid(h);
            }
            at = to;
        }
        trains.push(Train {
            id: format!("R{t}"),
            legs,
            stops,
        });
    }

    // Baseline: a random subset of the terminal-days that host a stop.
    let days = costs.days();
    let mut baseline = BaselinePlan::new(days);
    for train in &trains {
        for i in 0..train.stops.len() {
            let k = train.legs[i].destination;
            let d = (train.legs[i].arrival / DAY_MINUTES) as u32;
            if rng.random_bool(0.5) {
                baseline.set(k, d, (baseline.count(k, d) + 1).min(3));
            }
        }
    }

    Ok(Instance {
        terminals,
        transit,
        trains,
        costs,
        baseline: Some(baseline),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_terminal(power: u32) -> Instance {
        let mut transit = TransitTable::new();
        transit.insert(TerminalId(0), TerminalId(1), 600);
        transit.insert(TerminalId(1), TerminalId(0), 600);
        Instance {
            terminals: vec![
                Terminal {
                    code: "A".into(),
                    name: "A".into(),
                },
                Terminal {
                    code: "B".into(),
                    name: "B".into(),
                },
            ],
            transit,
            trains: vec![Train {
                id: "T1".into(),
                legs: vec![TrainLeg {
                    seq: 1,
                    origin: TerminalId(0),
                    destination: TerminalId(1),
                    departure: 100,
                    arrival: 700,
                    power,
                }],
                stops: vec![],
            }],
            costs: CostParams::default(),
            baseline: None,
        }
    }

    #[test]
    fn valid_instance_has_no_violations() {
        assert_eq!(validate_instance(&two_terminal(2)), vec![]);
    }

    #[test]
    fn power_above_cap_is_flagged() {
        let inst = two_terminal(CostParams::default().f + 1);
        let v = validate_instance(&inst);
        assert!(v.iter().any(|v| v.code == "POWER_EXCEEDS_CAP"));
    }

    #[test]
    fn zero_power_is_only_a_warning() {
        let inst = two_terminal(0);
        let v = validate_instance(&inst);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].code, "ZERO_POWER");
        assert_eq!(v[0].severity, Severity::Warning);
        assert!(is_valid(&inst));
    }

    #[test]
    fn exclusive_flags() {
        let mut inst = two_terminal(1);
        inst.trains[0].legs.push(TrainLeg {
            seq: 2,
            origin: TerminalId(1),
            destination: TerminalId(0),
            departure: 800,
            arrival: 1400,
            power: 1,
        });
        inst.trains[0].stops.push(RailcarFlags {
            pu: true,
            so: true,
            ..Default::default()
        });
        let v = validate_instance(&inst);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].code, "FLAGS_NOT_EXCLUSIVE");
        inst.trains[0].stops[0] = RailcarFlags::default();
        assert_eq!(validate_instance(&inst)[0].code, "FLAGS_EMPTY");
    }

    #[test]
    fn duration_and_continuity_checks() {
        let mut inst = two_terminal(1);
        inst.trains[0].legs[0].arrival = 701;
        assert_eq!(validate_instance(&inst)[0].code, "DURATION_MISMATCH");

        let mut inst = two_terminal(1);
        inst.trains[0].legs.push(TrainLeg {
            seq: 2,
            origin: TerminalId(0),
            destination: TerminalId(1),
            departure: 800,
            arrival: 1400,
            power: 1,
        });
        inst.trains[0].stops.push(RailcarFlags::from_event(RailcarEvent::NoEvent));
        let codes: Vec<_> = validate_instance(&inst).iter().map(|v| v.code).collect();
        assert_eq!(codes, vec!["LEG_DISCONTINUOUS"]);
    }

    #[test]
    fn wrapped_leg_duration_uses_modular_arithmetic() {
        let mut inst = two_terminal(1);
        inst.trains[0].legs[0].departure = 9_900;
        inst.trains[0].legs[0].arrival = (9_900 + 600) % WEEK_MINUTES;
        assert!(validate_instance(&inst).is_empty());
    }

    #[test]
    fn cost_order() {
        let mut inst = two_terminal(1);
        inst.costs.c2 = 1.0;
        assert!(validate_instance(&inst).iter().any(|v| v.code == "COST_ORDER"));
    }

    #[test]
    fn balance_single_leg() {
        assert_eq!(net_power_balance(&two_terminal(2)), vec![-2, 2]);
    }

    #[test]
    fn balance_symmetric_pair() {
        let mut inst = two_terminal(1);
        inst.trains.push(Train {
            id: "T2".into(),
            legs: vec![TrainLeg {
                seq: 1,
                origin: TerminalId(1),
                destination: TerminalId(0),
                departure: 3000,
                arrival: 3600,
                power: 1,
            }],
            stops: vec![],
        });
        assert_eq!(net_power_balance(&inst), vec![0, 0]);
    }

    #[test]
    fn generator_argument_checks() {
        assert!(matches!(generate_synthetic(1, 1, 1, 1), Err(InstanceError::Argument(_))));
        assert!(matches!(generate_synthetic(1, 2, 0, 1), Err(InstanceError::Argument(_))));
        assert!(matches!(generate_synthetic(1, 2, 1, 0), Err(InstanceError::Argument(_))));
    }

    #[test]
    fn generator_smallest_case() {
        let inst = generate_synthetic(1, 2, 1, 1).unwrap();
        assert_eq!(inst.leg_count(), 1);
        assert!(validate_instance(&inst).is_empty());
    }

    #[test]
    fn generator_is_deterministic() {
        let a = instance_to_json(&generate_synthetic(1, 3, 4, 2).unwrap());
        let b = instance_to_json(&generate_synthetic(1, 3, 4, 2).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn generated_instance_has_a_surplus_terminal() {
        let inst = generate_synthetic(7, 4, 10, 3).unwrap();
        // independent summation over the raw legs
        let mut bal = [0i64; 4];
        for t in &inst.trains {
            for l in &t.legs {
                bal[l.destination.0] += l.power as i64;
                bal[l.origin.0] -= l.power as i64;
            }
        }
        assert!(bal.iter().any(|&b| b != 0));
        assert_eq!(bal.iter().sum::<i64>(), 0);
        assert_eq!(net_power_balance(&inst), bal.to_vec());
    }

    #[test]
    fn generator_covers_every_flag_category() {
        let mut seen = BTreeSet::new();
        for seed in 0..20 {
            let inst = generate_synthetic(seed, 4, 10, 3).unwrap();
            assert!(validate_instance(&inst).is_empty(), "seed {seed}");
            for t in &inst.trains {
                for s in &t.stops {
                    seen.insert(s.event().unwrap());
                }
                for l in &t.legs {
                    assert!((1..=inst.costs.f).contains(&l.power));
                }
            }
        }
        assert_eq!(seen.len(), 4);
    }

    #[test]
    fn baseline_sets() {
        let mut plan = BaselinePlan::new(7);
        plan.set(TerminalId(1), 2, 3);
        assert_eq!(plan.inactive_terminals(3), vec![TerminalId(0), TerminalId(2)]);
        assert_eq!(plan.inactive_days(3).len(), 20);
        assert!(plan.is_active_day(TerminalId(1), 2));
        assert_eq!(plan.active_terminal_count(), 1);
    }
}
