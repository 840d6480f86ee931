//! Robust relief-logistics MILP over the time-expanded network.
//!
//! A shipment leaving `o` at period `s` on an arc with travel time `τ`
//! arrives at `p` in period `s + τ`; departures whose arrival would fall
//! after the horizon are not instantiated. Balances are cumulative: row `t`
//! counts every event in periods `1..=t`.
//!
//! Flow columns are pruned instead of guarded by big-M rows: commodity flow
//! exists only for compatible (commodity, vehicle) pairs on real arcs and
//! never leaves a demand node; injury flow exists only for compatible
//! (injury, vehicle) pairs and never leaves a hospital.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{Arc, Instance};
use crate::lp::{ColumnKind, Family, LinearProgram, RowSense, RowTag, INF};
use crate::solution::{
    Allocation, CommodityFlow, Entry, Idle, InjuryFlow, ObjectiveValues, Solution, ThetaEntry, VehicleMove,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ObjectiveId {
    /// Priority-weighted unserved injuries.
    UnservedInjuries,
    /// Priority-weighted unmet commodity demand.
    UnmetCommodity,
    /// Vehicle operating cost plus temporary-hospital construction.
    SystemCost,
    /// Idle permanent-hospital capacity.
    HospitalUnderuse,
}

impl ObjectiveId {
    pub const ALL: [ObjectiveId; 4] =
        [ObjectiveId::UnservedInjuries, ObjectiveId::UnmetCommodity, ObjectiveId::SystemCost, ObjectiveId::HospitalUnderuse];

    /// 1-based objective number.
    pub fn number(self) -> usize {
        self as usize + 1
    }

    pub fn from_number(n: usize) -> Result<Self, ModelError> {
        Self::ALL.get(n.wrapping_sub(1)).copied().ok_or(ModelError::UnknownObjective(n))
    }
}

impl fmt::Display for ObjectiveId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "obj{}", self.number())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("unknown objective {0} (expected 1..=4)")]
    UnknownObjective(usize),
    #[error("model too large: {nonzeros} nonzeros exceeds the cap of {cap}")]
    TooLarge { nonzeros: usize, cap: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssemblyOptions {
    pub objective: ObjectiveId,
    /// Emit the injury shortfall rows exactly as written in the original
    /// formulation (departures toward hospitals minus arrivals) instead of
    /// the cumulative service balance.
    pub literal_injury_balance: bool,
    /// Also emit the big-M compatibility and link rows that column pruning
    /// makes redundant.
    pub row_form_big_m: bool,
    pub nonzero_cap: usize,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self {
            objective: ObjectiveId::UnservedInjuries,
            literal_injury_balance: false,
            row_form_big_m: false,
            nonzero_cap: 5_000_000,
        }
    }
}

impl AssemblyOptions {
    pub fn with_objective(objective: ObjectiveId) -> Self {
        Self { objective, ..Self::default() }
    }
}

/// Semantic coordinates of every column. Periods are 1-based departure
/// periods; `arc` indexes [`VariableIndex::arcs`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    UnservedInjury { h: usize, r: usize, t: usize },
    UnmetCommodity { a: usize, p: usize, t: usize },
    Served { h: usize, r: usize, t: usize },
    Vehicles { arc: usize, t: usize },
    CommodityFlow { a: usize, r: usize, arc: usize, t: usize },
    InjuryFlow { h: usize, r: usize, arc: usize, t: usize },
    Idle { p: usize, v: usize, t: usize },
    Open { p: usize },
    Allocation { h: usize, arc: usize, t: usize },
    EtaCommodity { a: usize, p: usize, t: usize },
    ThetaCommodity { a: usize, p: usize, t: usize, s: usize },
    EtaInjury { h: usize, r: usize, t: usize },
    ThetaInjury { h: usize, r: usize, t: usize, s: usize },
}

/// Bijection between [`Var`] coordinates and column numbers.
#[derive(Debug, Clone, Default)]
pub struct VariableIndex {
    pub arcs: Vec<Arc>,
    coords: Vec<Var>,
    lookup: HashMap<Var, usize>,
}

impl VariableIndex {
    fn push(&mut self, var: Var) -> usize {
        let j = self.coords.len();
        let previous = self.lookup.insert(var, j);
        debug_assert!(previous.is_none(), "duplicate coordinate {var:?}");
        self.coords.push(var);
        j
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coord(&self, j: usize) -> Var {
        self.coords[j]
    }

    pub fn column(&self, var: &Var) -> Option<usize> {
        self.lookup.get(var).copied()
    }

    pub fn coords(&self) -> &[Var] {
        &self.coords
    }

    /// Human-readable column name for LP dumps.
    pub fn name(&self, inst: &Instance, j: usize) -> String {
        let n = |i: usize| inst.nodes[i].id.as_str();
        let a = |i: usize| inst.commodities[i].id.as_str();
        let h = |i: usize| inst.injuries[i].id.as_str();
        let arc = |i: usize| {
            let arc = self.arcs[i];
            format!("{}_{}_{}", n(arc.from), n(arc.to), inst.vehicles[arc.vehicle].id)
        };
        match self.coords[j] {
            Var::UnservedInjury { h: x, r, t } => format!("devh_{}_{}_{}", h(x), n(r), t),
            Var::UnmetCommodity { a: x, p, t } => format!("deva_{}_{}_{}", a(x), n(p), t),
            Var::Served { h: x, r, t } => format!("dew_{}_{}_{}", h(x), n(r), t),
            Var::Vehicles { arc: i, t } => format!("Z_{}_{}", arc(i), t),
            Var::CommodityFlow { a: x, r, arc: i, t } => format!("U_{}_{}_{}_{}", a(x), n(r), arc(i), t),
            Var::InjuryFlow { h: x, r, arc: i, t } => format!("W_{}_{}_{}_{}", h(x), n(r), arc(i), t),
            Var::Idle { p, v, t } => format!("sur_{}_{}_{}", n(p), inst.vehicles[v].id, t),
            Var::Open { p } => format!("u_{}", n(p)),
            Var::Allocation { h: x, arc: i, t } => format!("delta_{}_{}_{}", h(x), arc(i), t),
            Var::EtaCommodity { a: x, p, t } => format!("etaa_{}_{}_{}", a(x), n(p), t),
            Var::ThetaCommodity { a: x, p, t, s } => format!("thetaa_{}_{}_{}_{}", a(x), n(p), t, s),
            Var::EtaInjury { h: x, r, t } => format!("etah_{}_{}_{}", h(x), n(r), t),
            Var::ThetaInjury { h: x, r, t, s } => format!("thetah_{}_{}_{}_{}", h(x), n(r), t, s),
        }
    }
}

/// An assembled model with all four objective vectors precomputed.
#[derive(Debug, Clone)]
pub struct Model {
    pub lp: LinearProgram,
    pub vix: VariableIndex,
    pub objectives: Vec<(Vec<f64>, f64)>,
    pub options: AssemblyOptions,
}

impl Model {
    pub fn objective(&self, id: ObjectiveId) -> (&[f64], f64) {
        let (c, off) = &self.objectives[id as usize];
        (c, *off)
    }

    pub fn objective_value(&self, id: ObjectiveId, x: &[f64]) -> f64 {
        let (c, off) = self.objective(id);
        off + c.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Copy of the program with objective `id` installed.
    pub fn lp_for(&self, id: ObjectiveId) -> LinearProgram {
        let mut lp = self.lp.clone();
        let (c, off) = self.objective(id);
        lp.set_costs(c, off);
        lp
    }

    pub fn to_lp_text(&self, inst: &Instance) -> String {
        self.lp.to_lp_text(|j| self.vix.name(inst, j))
    }

    /// Maps column values back onto a [`Solution`] with ids.
    pub fn decode(&self, inst: &Instance, x: &[f64]) -> Solution {
        let mut sol = Solution::default();
        let n = |i: usize| inst.nodes[i].id.clone();
        let com = |i: usize| inst.commodities[i].id.clone();
        let inj = |i: usize| inst.injuries[i].id.clone();
        let veh = |i: usize| inst.vehicles[i].id.clone();
        for (j, &raw) in x.iter().enumerate() {
            let value = snap(raw);
            if value == 0.0 {
                continue;
            }
            match self.vix.coord(j) {
                Var::UnservedInjury { h, r, t } => {
                    sol.unserved_injuries.push(Entry { entity: inj(h), node: n(r), period: t, value })
                }
                Var::UnmetCommodity { a, p, t } => {
                    sol.unmet_commodity.push(Entry { entity: com(a), node: n(p), period: t, value })
                }
                Var::Served { h, r, t } => sol.served_injuries.push(Entry { entity: inj(h), node: n(r), period: t, value }),
                Var::Vehicles { arc, t } => {
                    let arc = self.vix.arcs[arc];
                    sol.vehicle_moves.push(VehicleMove {
                        from: n(arc.from),
                        to: n(arc.to),
                        vehicle: veh(arc.vehicle),
                        period: t,
                        count: value,
                    })
                }
                Var::CommodityFlow { a, r, arc, t } => {
                    let arc = self.vix.arcs[arc];
                    sol.commodity_flows.push(CommodityFlow {
                        commodity: com(a),
                        source: n(r),
                        from: n(arc.from),
                        to: n(arc.to),
                        vehicle: veh(arc.vehicle),
                        period: t,
                        amount: value,
                    })
                }
                Var::InjuryFlow { h, r, arc, t } => {
                    let arc = self.vix.arcs[arc];
                    sol.injury_flows.push(InjuryFlow {
                        injury: inj(h),
                        origin: n(r),
                        from: n(arc.from),
                        to: n(arc.to),
                        vehicle: veh(arc.vehicle),
                        period: t,
                        amount: value,
                    })
                }
                Var::Idle { p, v, t } => sol.idle_vehicles.push(Idle { node: n(p), vehicle: veh(v), period: t, count: value }),
                Var::Open { p } => {
                    if value > 0.5 {
                        sol.opened.push(n(p))
                    }
                }
                Var::Allocation { h, arc, t } => {
                    let arc = self.vix.arcs[arc];
                    sol.allocations.push(Allocation {
                        injury: inj(h),
                        from: n(arc.from),
                        to: n(arc.to),
                        vehicle: veh(arc.vehicle),
                        period: t,
                        fraction: value,
                    })
                }
                Var::EtaCommodity { a, p, t } => sol.eta_commodity.push(Entry { entity: com(a), node: n(p), period: t, value }),
                Var::ThetaCommodity { a, p, t, s } => sol.theta_commodity.push(ThetaEntry {
                    entity: com(a),
                    node: n(p),
                    period: t,
                    source_period: s,
                    value,
                }),
                Var::EtaInjury { h, r, t } => sol.eta_injury.push(Entry { entity: inj(h), node: n(r), period: t, value }),
                Var::ThetaInjury { h, r, t, s } => sol.theta_injury.push(ThetaEntry {
                    entity: inj(h),
                    node: n(r),
                    period: t,
                    source_period: s,
                    value,
                }),
            }
        }
        let mut objs = [0.0; 4];
        for id in ObjectiveId::ALL {
            objs[id as usize] = self.objective_value(id, x);
        }
        sol.objectives = ObjectiveValues::from_array(objs);
        sol
    }
}

/// Drops round-off noise and snaps values within 1e-9 of an integer.
fn snap(v: f64) -> f64 {
    if v.abs() <= 1e-12 {
        return 0.0;
    }
    let r = v.round();
    if (v - r).abs() <= 1e-9 {
        r
    } else {
        v
    }
}

/// Timed contribution of a column to a cumulative balance.
#[derive(Debug, Clone, Copy)]
struct Event {
    period: usize,
    col: usize,
    coef: f64,
}

#[derive(Default)]
struct Events(HashMap<(usize, usize, usize), Vec<Event>>);

impl Events {
    fn add(&mut self, key: (usize, usize, usize), period: usize, col: usize, coef: f64) {
        self.0.entry(key).or_default().push(Event { period, col, coef });
    }

    fn upto(&self, key: (usize, usize, usize), t: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.0.get(&key).into_iter().flatten().filter(move |e| e.period <= t).map(|e| (e.col, e.coef))
    }
}

struct Builder {
    lp: LinearProgram,
    vix: VariableIndex,
    nonzero_cap: usize,
    nonzeros: usize,
}

impl Builder {
    fn column(&mut self, var: Var, lower: f64, upper: f64, kind: ColumnKind) -> usize {
        let j = self.vix.push(var);
        self.lp.add_column(lower, upper, kind, 0.0);
        j
    }

    fn row(&mut self, coeffs: Vec<(usize, f64)>, sense: RowSense, rhs: f64, family: Family, index: Vec<usize>) -> Result<(), ModelError> {
        self.lp.add_row(coeffs, sense, rhs, RowTag::new(family, index));
        self.guard()
    }

    /// Adds a row unless it has no terms and is trivially satisfied.
    fn row_if_live(&mut self, coeffs: Vec<(usize, f64)>, sense: RowSense, rhs: f64, family: Family, index: Vec<usize>) -> Result<(), ModelError> {
        let trivial = match sense {
            RowSense::Le => rhs >= 0.0,
            RowSense::Ge => rhs <= 0.0,
            RowSense::Eq => rhs == 0.0,
        };
        if coeffs.iter().all(|&(_, a)| a == 0.0) && trivial {
            return Ok(());
        }
        self.row(coeffs, sense, rhs, family, index)
    }

    fn guard(&mut self) -> Result<(), ModelError> {
        self.nonzeros += self.lp.rows.last().map_or(0, |r| r.coeffs.len());
        if self.nonzeros > self.nonzero_cap {
            return Err(ModelError::TooLarge { nonzeros: self.nonzeros, cap: self.nonzero_cap });
        }
        Ok(())
    }
}

/// Builds the robust model for `inst`.
pub fn assemble(inst: &Instance, opts: &AssemblyOptions) -> Result<Model, ModelError> {
    let periods = inst.periods;
    let arcs = inst.arcs();
    let dn = inst.demand_nodes();
    let sn = inst.supply_nodes();
    let hn = inst.permanent_hospitals();
    let cn = inst.temp_candidates();
    let (na, nh, nv, nn) = (inst.commodities.len(), inst.injuries.len(), inst.vehicles.len(), inst.num_nodes());
    let is_hosp = |p: usize| inst.nodes[p].roles.is_hospital();
    let is_demand = |p: usize| inst.nodes[p].roles.demand;

    let flow_estimate = arcs.len() * periods * (na * sn.len() + nh * dn.len());
    if flow_estimate > opts.nonzero_cap {
        return Err(ModelError::TooLarge { nonzeros: flow_estimate, cap: opts.nonzero_cap });
    }

    let mut b = Builder { lp: LinearProgram::new(), vix: VariableIndex::default(), nonzero_cap: opts.nonzero_cap, nonzeros: 0 };
    b.vix.arcs = arcs.clone();
    let dep_periods = |arc: &Arc| 1..=periods.saturating_sub(arc.time);

    // ---- columns
    for h in 0..nh {
        for &r in &dn {
            for t in 1..=periods {
                b.column(Var::UnservedInjury { h, r, t }, 0.0, INF, ColumnKind::Continuous);
            }
        }
    }
    for a in 0..na {
        for &p in &dn {
            for t in 1..=periods {
                b.column(Var::UnmetCommodity { a, p, t }, 0.0, INF, ColumnKind::Continuous);
            }
        }
    }
    for h in 0..nh {
        for &r in &dn {
            for t in 1..=periods {
                b.column(Var::Served { h, r, t }, 0.0, INF, ColumnKind::Continuous);
            }
        }
    }
    let mut z_col: HashMap<(usize, usize), usize> = HashMap::new();
    for (i, arc) in arcs.iter().enumerate() {
        let fleet = inst.fleet_total(arc.vehicle);
        for t in dep_periods(arc) {
            let j = b.column(Var::Vehicles { arc: i, t }, 0.0, fleet, ColumnKind::Integer);
            z_col.insert((i, t), j);
        }
    }
    let mut u_cols: Vec<(usize, usize, usize, usize, usize)> = Vec::new(); // (col, a, r, arc, t)
    for a in 0..na {
        for &r in &sn {
            for (i, arc) in arcs.iter().enumerate() {
                let v = &inst.vehicles[arc.vehicle];
                if !v.carries_commodity[a] || is_demand(arc.from) || arc.to == r {
                    continue;
                }
                for t in dep_periods(arc) {
                    let j = b.column(Var::CommodityFlow { a, r, arc: i, t }, 0.0, INF, ColumnKind::Continuous);
                    u_cols.push((j, a, r, i, t));
                }
            }
        }
    }
    let mut w_cols: Vec<(usize, usize, usize, usize, usize)> = Vec::new(); // (col, h, r, arc, t)
    for h in 0..nh {
        for &r in &dn {
            for (i, arc) in arcs.iter().enumerate() {
                let v = &inst.vehicles[arc.vehicle];
                if !v.carries_injury[h] || is_hosp(arc.from) || arc.to == r {
                    continue;
                }
                for t in dep_periods(arc) {
                    let j = b.column(Var::InjuryFlow { h, r, arc: i, t }, 0.0, INF, ColumnKind::Continuous);
                    w_cols.push((j, h, r, i, t));
                }
            }
        }
    }
    for p in 0..nn {
        for v in 0..nv {
            for t in 1..=periods {
                b.column(Var::Idle { p, v, t }, 0.0, INF, ColumnKind::Continuous);
            }
        }
    }
    let mut open_col: HashMap<usize, usize> = HashMap::new();
    for &p in &cn {
        open_col.insert(p, b.column(Var::Open { p }, 0.0, 1.0, ColumnKind::Binary));
    }
    let mut d_cols: Vec<(usize, usize, usize, usize)> = Vec::new(); // (col, h, arc, t)
    for h in 0..nh {
        for (i, arc) in arcs.iter().enumerate() {
            let (o, p) = (arc.from, arc.to);
            if !inst.nodes[o].roles.permanent_hospital || !inst.nodes[p].roles.temp_candidate {
                continue;
            }
            for t in dep_periods(arc) {
                let j = b.column(Var::Allocation { h, arc: i, t }, 0.0, 1.0, ColumnKind::Continuous);
                d_cols.push((j, h, i, t));
            }
        }
    }
    let mut eta_a: HashMap<(usize, usize, usize), usize> = HashMap::new();
    let mut theta_a: HashMap<(usize, usize, usize, usize), usize> = HashMap::new();
    for a in 0..na {
        for &p in &dn {
            for t in 1..=periods {
                let js = inst.commodity_uncertain_periods(a, p, t);
                if js.is_empty() {
                    continue;
                }
                eta_a.insert((a, p, t), b.column(Var::EtaCommodity { a, p, t }, 0.0, INF, ColumnKind::Continuous));
                for s in js {
                    theta_a.insert((a, p, t, s), b.column(Var::ThetaCommodity { a, p, t, s }, 0.0, INF, ColumnKind::Continuous));
                }
            }
        }
    }
    let mut eta_h: HashMap<(usize, usize, usize), usize> = HashMap::new();
    let mut theta_h: HashMap<(usize, usize, usize, usize), usize> = HashMap::new();
    for h in 0..nh {
        for &r in &dn {
            for t in 1..=periods {
                let js = inst.injury_uncertain_periods(h, r, t);
                if js.is_empty() {
                    continue;
                }
                eta_h.insert((h, r, t), b.column(Var::EtaInjury { h, r, t }, 0.0, INF, ColumnKind::Continuous));
                for s in js {
                    theta_h.insert((h, r, t, s), b.column(Var::ThetaInjury { h, r, t, s }, 0.0, INF, ColumnKind::Continuous));
                }
            }
        }
    }
    let col = |b: &Builder, v: Var| b.vix.column(&v).expect("column registered");

    // ---- event tables
    // injuries keyed (h, r, node): arrivals +1 at s+τ, departures -1 at s
    let mut inj_at = Events::default();
    // all origins keyed (h, node, 0)
    let mut inj_arrive_any = Events::default();
    // arrivals at hospitals keyed (h, r, 0)
    let mut inj_to_hosp = Events::default();
    let mut inj_toward_hosp_literal = Events::default();
    for &(j, h, r, i, t) in &w_cols {
        let arc = arcs[i];
        inj_at.add((h, r, arc.to), t + arc.time, j, 1.0);
        inj_at.add((h, r, arc.from), t, j, -1.0);
        inj_arrive_any.add((h, arc.to, 0), t + arc.time, j, 1.0);
        if is_hosp(arc.to) {
            inj_to_hosp.add((h, r, 0), t + arc.time, j, 1.0);
            inj_toward_hosp_literal.add((h, r, 0), t + arc.time, j, -1.0);
            inj_toward_hosp_literal.add((h, r, 0), t, j, 1.0);
        }
    }
    let mut com_at = Events::default(); // (a, r, node)
    let mut com_net_any = Events::default(); // (a, node, 0): arrivals +1, departures -1
    for &(j, a, r, i, t) in &u_cols {
        let arc = arcs[i];
        com_at.add((a, r, arc.to), t + arc.time, j, 1.0);
        com_at.add((a, r, arc.from), t, j, -1.0);
        com_net_any.add((a, arc.to, 0), t + arc.time, j, 1.0);
        com_net_any.add((a, arc.from, 0), t, j, -1.0);
    }
    // allocations: donor loses at departure, receiver gains at arrival
    let mut alloc_donor = Events::default(); // (h, o, 0)
    let mut alloc_receiver = Events::default(); // (h, p, 0)
    let mut alloc_limit = Events::default(); // (h, o, v)
    for &(j, h, i, t) in &d_cols {
        let arc = arcs[i];
        let cap = inst.hospital_capacity(h, arc.from, t);
        alloc_donor.add((h, arc.from, 0), t, j, cap);
        alloc_receiver.add((h, arc.to, 0), t + arc.time, j, cap);
        alloc_limit.add((h, arc.from, arc.vehicle), t, j, 1.0);
    }

    // ---- injury rows
    for h in 0..nh {
        for &r in &dn {
            for t in 1..=periods {
                let demand: f64 = (1..=t).map(|s| inst.injury_demand(h, r, s).nominal).sum();
                let gamma = inst.injury_gamma(h, r, t);
                let mut protect: Vec<(usize, f64)> = Vec::new();
                if let Some(&e) = eta_h.get(&(h, r, t)) {
                    protect.push((e, gamma));
                    for s in inst.injury_uncertain_periods(h, r, t) {
                        protect.push((theta_h[&(h, r, t, s)], 1.0));
                    }
                }
                let devs = (1..=t).map(|s| col(&b, Var::UnservedInjury { h, r, t: s }));
                if opts.literal_injury_balance {
                    let mut coeffs: Vec<(usize, f64)> = inj_toward_hosp_literal.upto((h, r, 0), t).collect();
                    coeffs.extend(devs.map(|j| (j, -1.0)));
                    coeffs.extend(protect);
                    b.row(coeffs, RowSense::Le, -demand, Family::UnservedInjuries, vec![h, r, t])?;
                } else {
                    let mut coeffs: Vec<(usize, f64)> = devs.map(|j| (j, 1.0)).collect();
                    coeffs.extend((1..=t).map(|s| (col(&b, Var::Served { h, r, t: s }), 1.0)));
                    coeffs.extend(protect.into_iter().map(|(j, a)| (j, -a)));
                    b.row(coeffs, RowSense::Ge, demand, Family::UnservedInjuries, vec![h, r, t])?;
                }
            }
        }
    }
    for h in 0..nh {
        for &o in &hn {
            for t in 1..=periods {
                let mut coeffs: Vec<(usize, f64)> = inj_arrive_any.upto((h, o, 0), t).collect();
                coeffs.extend(alloc_donor.upto((h, o, 0), t));
                let cap: f64 = (1..=t).map(|s| inst.hospital_capacity(h, o, s)).sum();
                b.row_if_live(coeffs, RowSense::Le, cap, Family::PermanentHospitalCapacity, vec![h, o, t])?;
            }
        }
    }
    for h in 0..nh {
        for &p in &cn {
            for t in 1..=periods {
                let mut coeffs: Vec<(usize, f64)> = inj_arrive_any.upto((h, p, 0), t).collect();
                coeffs.extend(alloc_receiver.upto((h, p, 0), t).map(|(j, a)| (j, -a)));
                b.row_if_live(coeffs, RowSense::Le, 0.0, Family::TemporaryHospitalCapacity, vec![h, p, t])?;
            }
        }
    }
    for h in 0..nh {
        for &o in &hn {
            for t in 1..=periods {
                for v in 0..nv {
                    let coeffs: Vec<(usize, f64)> = alloc_limit.upto((h, o, v), t).collect();
                    b.row(coeffs, RowSense::Le, 1.0, Family::AllocationLimit, vec![h, o, t, v])?;
                }
            }
        }
    }
    for &(j, h, i, t) in &d_cols {
        let arc = arcs[i];
        let coeffs = vec![(j, 1.0), (open_col[&arc.to], -1.0)];
        b.row(coeffs, RowSense::Le, 0.0, Family::AllocationRequiresOpening, vec![h, arc.from, arc.to, t, arc.vehicle])?;
    }
    for h in 0..nh {
        for &r in &dn {
            for t in 1..=periods {
                let mut coeffs: Vec<(usize, f64)> = inj_to_hosp.upto((h, r, 0), t).collect();
                coeffs.extend((1..=t).map(|s| (col(&b, Var::Served { h, r, t: s }), -1.0)));
                b.row(coeffs, RowSense::Eq, 0.0, Family::ServedInjuries, vec![h, r, t])?;
            }
        }
    }
    for h in 0..nh {
        for &r in &dn {
            for p in (0..nn).filter(|&p| p != r && !is_hosp(p)) {
                for t in 1..=periods {
                    let coeffs: Vec<(usize, f64)> = inj_at.upto((h, r, p), t).collect();
                    b.row_if_live(coeffs, RowSense::Eq, 0.0, Family::InjuryConservation, vec![h, r, p, t])?;
                }
            }
        }
    }
    for h in 0..nh {
        for &r in &dn {
            for t in 1..=periods {
                let coeffs: Vec<(usize, f64)> = inj_at.upto((h, r, r), t).map(|(j, a)| (j, -a)).collect();
                let appeared = worst_injury_demand(inst, h, r, t);
                b.row_if_live(coeffs, RowSense::Le, appeared, Family::InjurySource, vec![h, r, t])?;
            }
        }
    }

    // ---- commodity rows
    for a in 0..na {
        for &p in &dn {
            for t in 1..=periods {
                let demand: f64 = (1..=t).map(|s| inst.commodity_demand(a, p, s).nominal).sum();
                let mut coeffs: Vec<(usize, f64)> = com_net_any.upto((a, p, 0), t).collect();
                coeffs.extend((1..=t).map(|s| (col(&b, Var::UnmetCommodity { a, p, t: s }), 1.0)));
                if let Some(&e) = eta_a.get(&(a, p, t)) {
                    coeffs.push((e, -inst.commodity_gamma(a, p, t)));
                    for s in inst.commodity_uncertain_periods(a, p, t) {
                        coeffs.push((theta_a[&(a, p, t, s)], -1.0));
                    }
                }
                b.row(coeffs, RowSense::Ge, demand, Family::UnmetCommodity, vec![a, p, t])?;
            }
        }
    }
    for a in 0..na {
        for &p in &sn {
            for t in 1..=periods {
                let coeffs: Vec<(usize, f64)> = com_net_any.upto((a, p, 0), t).map(|(j, c)| (j, -c)).collect();
                let cap: f64 = (1..=t).map(|s| inst.supply(a, p, s)).sum();
                b.row_if_live(coeffs, RowSense::Le, cap, Family::SupplyCapacity, vec![a, p, t])?;
            }
        }
    }
    for a in 0..na {
        for &r in &sn {
            for p in (0..nn).filter(|&p| p != r && !is_demand(p)) {
                for t in 1..=periods {
                    let coeffs: Vec<(usize, f64)> = com_at.upto((a, r, p), t).collect();
                    b.row_if_live(coeffs, RowSense::Eq, 0.0, Family::CommodityConservation, vec![a, r, p, t])?;
                }
            }
        }
    }

    // ---- vehicle rows
    let mut u_by_arc: HashMap<(usize, usize), Vec<(usize, usize)>> = HashMap::new(); // -> (col, a)
    for &(j, a, _, i, t) in &u_cols {
        u_by_arc.entry((i, t)).or_default().push((j, a));
    }
    let mut w_by_arc: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for &(j, _, _, i, t) in &w_cols {
        w_by_arc.entry((i, t)).or_default().push(j);
    }
    let mut d_by_arc: HashMap<(usize, usize), Vec<(usize, usize)>> = HashMap::new(); // -> (col, h)
    for &(j, h, i, t) in &d_cols {
        d_by_arc.entry((i, t)).or_default().push((j, h));
    }
    for (i, arc) in arcs.iter().enumerate() {
        let v = &inst.vehicles[arc.vehicle];
        for t in dep_periods(arc) {
            let idx = vec![arc.from, arc.to, arc.vehicle, t];
            let z = z_col[&(i, t)];
            if let Some(us) = u_by_arc.get(&(i, t)) {
                let mut coeffs: Vec<(usize, f64)> = us.iter().map(|&(j, a)| (j, inst.commodities[a].volume)).collect();
                coeffs.push((z, -v.volume_capacity));
                b.row(coeffs, RowSense::Le, 0.0, Family::VolumeCapacity, idx.clone())?;
                let mut coeffs: Vec<(usize, f64)> = us.iter().map(|&(j, a)| (j, inst.commodities[a].weight)).collect();
                coeffs.push((z, -v.load_capacity));
                b.row(coeffs, RowSense::Le, 0.0, Family::LoadCapacity, idx.clone())?;
            }
            if let Some(ws) = w_by_arc.get(&(i, t)) {
                let mut coeffs: Vec<(usize, f64)> = ws.iter().map(|&j| (j, 1.0)).collect();
                coeffs.push((z, -v.injury_capacity));
                b.row(coeffs, RowSense::Le, 0.0, Family::InjuryVehicleCapacity, idx.clone())?;
            }
            if let Some(ds) = d_by_arc.get(&(i, t)) {
                let mut coeffs: Vec<(usize, f64)> =
                    ds.iter().map(|&(j, h)| (j, inst.hospital_capacity(h, arc.from, t))).collect();
                coeffs.push((z, -v.transfer_capacity));
                b.row(coeffs, RowSense::Le, 0.0, Family::ResourceTransferCapacity, idx)?;
            }
        }
    }
    let mut z_at = Events::default(); // (node, v, 0)
    for (i, arc) in arcs.iter().enumerate() {
        for t in dep_periods(arc) {
            let z = z_col[&(i, t)];
            z_at.add((arc.to, arc.vehicle, 0), t + arc.time, z, 1.0);
            z_at.add((arc.from, arc.vehicle, 0), t, z, -1.0);
        }
    }
    for p in 0..nn {
        for v in 0..nv {
            for t in 1..=periods {
                let mut coeffs: Vec<(usize, f64)> = z_at.upto((p, v, 0), t).collect();
                coeffs.push((col(&b, Var::Idle { p, v, t }), -1.0));
                let avail: f64 = (1..=t).map(|s| inst.availability(p, v, s)).sum();
                b.row(coeffs, RowSense::Eq, -avail, Family::FleetBalance, vec![p, v, t])?;
            }
        }
    }

    // ---- protection rows
    for a in 0..na {
        for &p in &dn {
            for t in 1..=periods {
                for s in inst.commodity_uncertain_periods(a, p, t) {
                    let coeffs = vec![(eta_a[&(a, p, t)], 1.0), (theta_a[&(a, p, t, s)], 1.0)];
                    let dev = inst.commodity_demand(a, p, s).deviation;
                    b.row(coeffs, RowSense::Ge, dev, Family::CommodityProtection, vec![a, p, t, s])?;
                }
            }
        }
    }
    for h in 0..nh {
        for &r in &dn {
            for t in 1..=periods {
                for s in inst.injury_uncertain_periods(h, r, t) {
                    let coeffs = vec![(eta_h[&(h, r, t)], 1.0), (theta_h[&(h, r, t, s)], 1.0)];
                    let dev = inst.injury_demand(h, r, s).deviation;
                    b.row(coeffs, RowSense::Ge, dev, Family::InjuryProtection, vec![h, r, t, s])?;
                }
            }
        }
    }

    if opts.row_form_big_m {
        let big_m = inst.big_m();
        for a in 0..na {
            for v in 0..nv {
                for t in 1..=periods {
                    let coeffs: Vec<(usize, f64)> = u_cols
                        .iter()
                        .filter(|&&(_, ca, _, i, ct)| ca == a && arcs[i].vehicle == v && ct == t)
                        .map(|&(j, ..)| (j, 1.0))
                        .collect();
                    let rhs = if inst.vehicles[v].carries_commodity[a] { big_m } else { 0.0 };
                    b.row(coeffs, RowSense::Le, rhs, Family::CommodityCompatibility, vec![a, v, t])?;
                }
            }
        }
        for h in 0..nh {
            for v in 0..nv {
                for t in 1..=periods {
                    let coeffs: Vec<(usize, f64)> = w_cols
                        .iter()
                        .filter(|&&(_, ch, _, i, ct)| ch == h && arcs[i].vehicle == v && ct == t)
                        .map(|&(j, ..)| (j, 1.0))
                        .collect();
                    let rhs = if inst.vehicles[v].carries_injury[h] { big_m } else { 0.0 };
                    b.row(coeffs, RowSense::Le, rhs, Family::InjuryCompatibility, vec![h, v, t])?;
                }
            }
        }
        for (i, arc) in arcs.iter().enumerate() {
            for t in dep_periods(arc) {
                b.row(
                    vec![(z_col[&(i, t)], 1.0)],
                    RowSense::Le,
                    big_m * arc.time as f64,
                    Family::LinkExistence,
                    vec![arc.from, arc.to, arc.vehicle, t],
                )?;
            }
        }
    } else {
        b.lp.structural = vec![Family::CommodityCompatibility, Family::InjuryCompatibility, Family::LinkExistence];
    }

    let objectives: Vec<(Vec<f64>, f64)> = ObjectiveId::ALL.iter().map(|&id| objective_vector(inst, &b.vix, id)).collect();
    let mut lp = b.lp;
    let (c, off) = &objectives[opts.objective as usize];
    lp.set_costs(c, *off);
    Ok(Model { lp, vix: b.vix, objectives, options: *opts })
}

/// Most injured people that can have appeared at `r` by `t` within the
/// deviation budget: the largest `floor(budget)` deviations plus a fraction
/// of the next one.
fn worst_injury_demand(inst: &Instance, h: usize, r: usize, t: usize) -> f64 {
    let mut nominal = 0.0;
    let mut devs = Vec::new();
    for s in 1..=t {
        let q = inst.injury_demand(h, r, s);
        nominal += q.nominal;
        if q.deviation > 0.0 {
            devs.push(q.deviation);
        }
    }
    devs.sort_by(|a, b| b.total_cmp(a));
    let mut budget = inst.injury_gamma(h, r, t).clamp(0.0, devs.len() as f64);
    let mut extra = 0.0;
    for d in devs {
        if budget <= 0.0 {
            break;
        }
        extra += budget.min(1.0) * d;
        budget -= 1.0;
    }
    nominal + extra
}

/// Coefficients and constant offset of one objective over `vix`'s columns.
pub fn objective_vector(inst: &Instance, vix: &VariableIndex, id: ObjectiveId) -> (Vec<f64>, f64) {
    let mut c = vec![0.0; vix.len()];
    let mut offset = 0.0;
    for (j, var) in vix.coords().iter().enumerate() {
        c[j] = match (*var, id) {
            (Var::UnservedInjury { h, .. }, ObjectiveId::UnservedInjuries) => inst.injuries[h].priority,
            (Var::UnmetCommodity { a, .. }, ObjectiveId::UnmetCommodity) => inst.commodities[a].priority,
            (Var::Vehicles { arc, .. }, ObjectiveId::SystemCost) => {
                let arc = vix.arcs[arc];
                arc.time as f64 * inst.vehicles[arc.vehicle].operating_cost
            }
            (Var::Open { p }, ObjectiveId::SystemCost) => inst.nodes[p].construction_cost,
            (Var::Served { .. }, ObjectiveId::HospitalUnderuse) => -1.0,
            _ => 0.0,
        };
    }
    if id == ObjectiveId::HospitalUnderuse {
        for o in inst.permanent_hospitals() {
            for h in 0..inst.injuries.len() {
                offset += (1..=inst.periods).map(|t| inst.hospital_capacity(h, o, t)).sum::<f64>();
            }
        }
    }
    (c, offset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{CommoditySpec, InjurySpec, Roles, Uncertain, VehicleSpec};

    fn one_link(periods: usize) -> Instance {
        let demand = Roles { demand: true, ..Roles::default() };
        let supply = Roles { supply: true, ..Roles::default() };
        let mut inst = Instance::skeleton(
            periods,
            vec![("D".into(), demand), ("S".into(), supply)],
            vec![CommoditySpec { id: "A".into(), weight: 1.0, volume: 2.0, priority: 1.0 }],
            vec![InjurySpec { id: "H".into(), priority: 1.0 }],
            vec![VehicleSpec {
                id: "T".into(),
                load_capacity: 10.0,
                volume_capacity: 10.0,
                injury_capacity: 0.0,
                transfer_capacity: 0.0,
                operating_cost: 1.0,
                carries_commodity: vec![true],
                carries_injury: vec![false],
            }],
        );
        inst.set_travel_time(1, 0, 0, 1);
        inst.set_travel_time(0, 1, 0, 1);
        inst.nodes[0].commodity_demand[0][0] = Uncertain { nominal: 5.0, deviation: 1.0 };
        inst.nodes[1].commodity_supply[0] = vec![10.0; periods];
        inst.nodes[1].vehicle_availability[0][0] = 1.0;
        inst
    }

    #[test]
    fn objective_numbers() {
        assert_eq!(ObjectiveId::from_number(3).unwrap(), ObjectiveId::SystemCost);
        assert_eq!(ObjectiveId::from_number(0), Err(ModelError::UnknownObjective(0)));
        assert_eq!(ObjectiveId::from_number(5), Err(ModelError::UnknownObjective(5)));
    }

    #[test]
    fn pruning_is_structural() {
        let inst = one_link(2);
        let m = assemble(&inst, &AssemblyOptions::default()).unwrap();
        // no injury carrier: no W columns; no U leaving the demand node
        for var in m.vix.coords() {
            assert!(!matches!(var, Var::InjuryFlow { .. }));
            if let Var::CommodityFlow { arc, .. } = var {
                assert_eq!(m.vix.arcs[*arc].from, 1);
            }
        }
        assert!(m.lp.structural.contains(&Family::LinkExistence));
    }

    #[test]
    fn allocation_opening_rows_have_two_terms() {
        let mut inst = one_link(2);
        inst.nodes[1].roles.permanent_hospital = true;
        inst.nodes[0].roles = Roles { demand: true, ..Roles::default() };
        inst.nodes.push(crate::instance::Node::empty("C", Roles { temp_candidate: true, ..Roles::default() }, 1, 1, 1, 2));
        inst.travel_time = vec![0; 9];
        inst.set_travel_time(1, 2, 0, 1);
        let m = assemble(&inst, &AssemblyOptions::default()).unwrap();
        let rows: Vec<_> = m.lp.rows.iter().filter(|r| r.tag.family == Family::AllocationRequiresOpening).collect();
        assert!(!rows.is_empty());
        assert!(rows.iter().all(|r| r.coeffs.len() == 2 && r.rhs == 0.0 && r.sense == RowSense::Le));
    }

    #[test]
    fn no_term_references_outside_horizon() {
        let inst = one_link(3);
        let m = assemble(&inst, &AssemblyOptions::default()).unwrap();
        for var in m.vix.coords() {
            if let Var::Vehicles { arc, t } | Var::CommodityFlow { arc, t, .. } = *var {
                assert!(t >= 1 && t + m.vix.arcs[arc].time <= 3);
            }
        }
    }

    #[test]
    fn assembly_is_deterministic() {
        let inst = one_link(3);
        let a = assemble(&inst, &AssemblyOptions::default()).unwrap();
        let b = assemble(&inst, &AssemblyOptions::default()).unwrap();
        assert_eq!(a.lp, b.lp);
        assert_eq!(a.to_lp_text(&inst), b.to_lp_text(&inst));
    }

    #[test]
    fn nonzero_cap_enforced() {
        let inst = one_link(3);
        let opts = AssemblyOptions { nonzero_cap: 5, ..AssemblyOptions::default() };
        assert!(matches!(assemble(&inst, &opts), Err(ModelError::TooLarge { .. })));
    }

    #[test]
    fn big_m_rows_on_request() {
        let inst = one_link(2);
        let opts = AssemblyOptions { row_form_big_m: true, ..AssemblyOptions::default() };
        let m = assemble(&inst, &opts).unwrap();
        assert!(m.lp.structural.is_empty());
        assert!(m.lp.rows.iter().any(|r| r.tag.family == Family::LinkExistence));
    }
}
