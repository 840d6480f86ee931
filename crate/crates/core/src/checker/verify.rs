//! Constraint-by-constraint re-evaluation of a decoded plan.
//!
//! Works only from the instance data and the id-keyed [`Solution`] records;
//! it shares no code with the model assembly, so an assembly slip shows up
//! here as a violation instead of being reproduced.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::CheckError;
use crate::instance::Instance;
use crate::lp::Family;
use crate::solution::{ObjectiveValues, Solution};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckOptions {
    /// Violations are reported above `tol * (1 + |rhs|)`.
    pub tol: f64,
    /// Read the injury shortfall balance literally (vehicles still on the
    /// way to a hospital count as unserved).
    pub literal_injury_balance: bool,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self { tol: 1e-6, literal_injury_balance: false }
    }
}

/// What a violation breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Rule {
    /// A balance or capacity row of the formulation.
    Row(Family),
    /// Sign, upper bound or integrality of a single value.
    Domain,
    /// A flow on a path the formulation does not allow (out of a demand node
    /// for commodities, out of a hospital for injuries, back to its origin).
    Routing,
    /// A departure whose arrival falls after the last period.
    Horizon,
    /// A claimed objective value that disagrees with the recomputed one.
    Objective,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckViolation {
    pub rule: Rule,
    pub index: Vec<String>,
    /// Amount by which the rule is broken (always positive).
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub pass: bool,
    pub violations: Vec<CheckViolation>,
    pub claimed: ObjectiveValues,
    pub recomputed: ObjectiveValues,
}

impl CheckReport {
    pub fn count(&self, rule: Rule) -> usize {
        self.violations.iter().filter(|v| v.rule == rule).count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialise")
    }
}

/// Dense-by-key view of the solution, indices resolved against `inst`.
#[derive(Default)]
pub(super) struct Plan {
    /// (a, source, from, to, v, t)
    pub(super) u: BTreeMap<(usize, usize, usize, usize, usize, usize), f64>,
    /// (h, origin, from, to, v, t)
    pub(super) w: BTreeMap<(usize, usize, usize, usize, usize, usize), f64>,
    /// (from, to, v, t)
    pub(super) z: BTreeMap<(usize, usize, usize, usize), f64>,
    /// (p, v, t)
    pub(super) idle: HashMap<(usize, usize, usize), f64>,
    pub(super) opened: BTreeSet<usize>,
    /// (h, from, to, v, t)
    pub(super) delta: BTreeMap<(usize, usize, usize, usize, usize), f64>,
    pub(super) dev_inj: HashMap<(usize, usize, usize), f64>,
    pub(super) dev_com: HashMap<(usize, usize, usize), f64>,
    pub(super) dew: HashMap<(usize, usize, usize), f64>,
    pub(super) eta_inj: HashMap<(usize, usize, usize), f64>,
    pub(super) theta_inj: HashMap<(usize, usize, usize, usize), f64>,
    pub(super) eta_com: HashMap<(usize, usize, usize), f64>,
    pub(super) theta_com: HashMap<(usize, usize, usize, usize), f64>,
}

struct Ids<'a> {
    inst: &'a Instance,
    nodes: HashMap<&'a str, usize>,
    commodities: HashMap<&'a str, usize>,
    injuries: HashMap<&'a str, usize>,
    vehicles: HashMap<&'a str, usize>,
}

impl<'a> Ids<'a> {
    fn new(inst: &'a Instance) -> Self {
        Self {
            inst,
            nodes: inst.nodes.iter().enumerate().map(|(i, n)| (n.id.as_str(), i)).collect(),
            commodities: inst.commodities.iter().enumerate().map(|(i, c)| (c.id.as_str(), i)).collect(),
            injuries: inst.injuries.iter().enumerate().map(|(i, c)| (c.id.as_str(), i)).collect(),
            vehicles: inst.vehicles.iter().enumerate().map(|(i, c)| (c.id.as_str(), i)).collect(),
        }
    }

    fn look(map: &HashMap<&str, usize>, kind: &str, id: &str) -> Result<usize, CheckError> {
        map.get(id).copied().ok_or_else(|| CheckError::Dimension(format!("unknown {kind} `{id}`")))
    }
    fn node(&self, id: &str) -> Result<usize, CheckError> {
        Self::look(&self.nodes, "node", id)
    }
    fn commodity(&self, id: &str) -> Result<usize, CheckError> {
        Self::look(&self.commodities, "commodity", id)
    }
    fn injury(&self, id: &str) -> Result<usize, CheckError> {
        Self::look(&self.injuries, "injury class", id)
    }
    fn vehicle(&self, id: &str) -> Result<usize, CheckError> {
        Self::look(&self.vehicles, "vehicle", id)
    }
    fn period(&self, t: usize) -> Result<usize, CheckError> {
        if (1..=self.inst.periods).contains(&t) {
            Ok(t)
        } else {
            Err(CheckError::Dimension(format!("period {t} outside 1..={}", self.inst.periods)))
        }
    }
}

pub(super) fn resolve(inst: &Instance, sol: &Solution) -> Result<Plan, CheckError> {
    let ids = Ids::new(inst);
    let mut plan = Plan::default();
    for f in &sol.commodity_flows {
        let key = (
            ids.commodity(&f.commodity)?,
            ids.node(&f.source)?,
            ids.node(&f.from)?,
            ids.node(&f.to)?,
            ids.vehicle(&f.vehicle)?,
            ids.period(f.period)?,
        );
        *plan.u.entry(key).or_default() += f.amount;
    }
    for f in &sol.injury_flows {
        let key = (
            ids.injury(&f.injury)?,
            ids.node(&f.origin)?,
            ids.node(&f.from)?,
            ids.node(&f.to)?,
            ids.vehicle(&f.vehicle)?,
            ids.period(f.period)?,
        );
        *plan.w.entry(key).or_default() += f.amount;
    }
    for m in &sol.vehicle_moves {
        let key = (ids.node(&m.from)?, ids.node(&m.to)?, ids.vehicle(&m.vehicle)?, ids.period(m.period)?);
        *plan.z.entry(key).or_default() += m.count;
    }
    for i in &sol.idle_vehicles {
        let key = (ids.node(&i.node)?, ids.vehicle(&i.vehicle)?, ids.period(i.period)?);
        *plan.idle.entry(key).or_default() += i.count;
    }
    for p in &sol.opened {
        plan.opened.insert(ids.node(p)?);
    }
    for a in &sol.allocations {
        let key = (
            ids.injury(&a.injury)?,
            ids.node(&a.from)?,
            ids.node(&a.to)?,
            ids.vehicle(&a.vehicle)?,
            ids.period(a.period)?,
        );
        *plan.delta.entry(key).or_default() += a.fraction;
    }
    for e in &sol.unserved_injuries {
        *plan.dev_inj.entry((ids.injury(&e.entity)?, ids.node(&e.node)?, ids.period(e.period)?)).or_default() += e.value;
    }
    for e in &sol.unmet_commodity {
        *plan.dev_com.entry((ids.commodity(&e.entity)?, ids.node(&e.node)?, ids.period(e.period)?)).or_default() +=
            e.value;
    }
    for e in &sol.served_injuries {
        *plan.dew.entry((ids.injury(&e.entity)?, ids.node(&e.node)?, ids.period(e.period)?)).or_default() += e.value;
    }
    for e in &sol.eta_injury {
        *plan.eta_inj.entry((ids.injury(&e.entity)?, ids.node(&e.node)?, ids.period(e.period)?)).or_default() += e.value;
    }
    for e in &sol.eta_commodity {
        *plan.eta_com.entry((ids.commodity(&e.entity)?, ids.node(&e.node)?, ids.period(e.period)?)).or_default() +=
            e.value;
    }
    for e in &sol.theta_injury {
        let key = (ids.injury(&e.entity)?, ids.node(&e.node)?, ids.period(e.period)?, ids.period(e.source_period)?);
        *plan.theta_inj.entry(key).or_default() += e.value;
    }
    for e in &sol.theta_commodity {
        let key = (ids.commodity(&e.entity)?, ids.node(&e.node)?, ids.period(e.period)?, ids.period(e.source_period)?);
        *plan.theta_com.entry(key).or_default() += e.value;
    }
    Ok(plan)
}

struct Tally<'a> {
    inst: &'a Instance,
    tol: f64,
    violations: Vec<CheckViolation>,
}

impl Tally<'_> {
    fn flag(&mut self, rule: Rule, index: Vec<String>, excess: f64) {
        self.violations.push(CheckViolation { rule, index, excess });
    }

    fn le(&mut self, family: Family, index: Vec<String>, lhs: f64, rhs: f64) {
        let excess = lhs - rhs;
        if excess > self.tol * (1.0 + rhs.abs()) {
            self.flag(Rule::Row(family), index, excess);
        }
    }

    fn ge(&mut self, family: Family, index: Vec<String>, lhs: f64, rhs: f64) {
        let excess = rhs - lhs;
        if excess > self.tol * (1.0 + rhs.abs()) {
            self.flag(Rule::Row(family), index, excess);
        }
    }

    fn eq(&mut self, family: Family, index: Vec<String>, lhs: f64, rhs: f64) {
        let excess = (lhs - rhs).abs();
        if excess > self.tol * (1.0 + rhs.abs()) {
            self.flag(Rule::Row(family), index, excess);
        }
    }

    fn node(&self, p: usize) -> String {
        self.inst.nodes[p].id.clone()
    }
    fn com(&self, a: usize) -> String {
        self.inst.commodities[a].id.clone()
    }
    fn inj(&self, h: usize) -> String {
        self.inst.injuries[h].id.clone()
    }
    fn veh(&self, v: usize) -> String {
        self.inst.vehicles[v].id.clone()
    }
}

fn period_label(t: usize) -> String {
    format!("t{t}")
}

/// Re-evaluates every constraint of the formulation on `sol`.
pub fn check(inst: &Instance, sol: &Solution) -> Result<CheckReport, CheckError> {
    check_with(inst, sol, &CheckOptions::default())
}

pub fn check_with(inst: &Instance, sol: &Solution, opts: &CheckOptions) -> Result<CheckReport, CheckError> {
    let plan = resolve(inst, sol)?;
    let mut tally = Tally { inst, tol: opts.tol, violations: Vec::new() };
    let big_t = inst.periods;
    let (na, nh, nv, nn) = (inst.commodities.len(), inst.injuries.len(), inst.vehicles.len(), inst.nodes.len());
    let role = |p: usize| inst.nodes[p].roles;
    let tt = |o: usize, p: usize, v: usize| inst.travel_time(o, p, v);
    let arrival = |o: usize, p: usize, v: usize, t: usize| t + tt(o, p, v);

    domain(&plan, &mut tally);
    routing(inst, &plan, &mut tally);

    // cumulative helpers; an event in period s counts for every row t >= s
    let upto = |t: usize, s: usize| s <= t;

    // ---- injuries
    for h in 0..nh {
        for r in inst.demand_nodes() {
            for t in 1..=big_t {
                let idx = vec![tally.inj(h), tally.node(r), period_label(t)];
                let nominal: f64 = (1..=t).map(|s| inst.injury_demand(h, r, s).nominal).sum();
                let dev: f64 = (1..=t).map(|s| plan.dev_inj.get(&(h, r, s)).copied().unwrap_or(0.0)).sum();
                let dew: f64 = (1..=t).map(|s| plan.dew.get(&(h, r, s)).copied().unwrap_or(0.0)).sum();
                let protection = protection_of(
                    inst.injury_gamma(h, r, t),
                    plan.eta_inj.get(&(h, r, t)).copied().unwrap_or(0.0),
                    inst.injury_uncertain_periods(h, r, t)
                        .iter()
                        .map(|&s| plan.theta_inj.get(&(h, r, t, s)).copied().unwrap_or(0.0)),
                );
                let arrived_at_hospital: f64 = plan
                    .w
                    .iter()
                    .filter(|(&(hh, rr, o, p, v, s), _)| {
                        hh == h && rr == r && role(p).is_hospital() && upto(t, arrival(o, p, v, s))
                    })
                    .map(|(_, &x)| x)
                    .sum();
                if opts.literal_injury_balance {
                    let left_toward_hospital: f64 = plan
                        .w
                        .iter()
                        .filter(|(&(hh, rr, _, p, _, s), _)| hh == h && rr == r && role(p).is_hospital() && upto(t, s))
                        .map(|(_, &x)| x)
                        .sum();
                    // unserved covers everyone not yet delivered, including those on the way
                    tally.ge(
                        Family::UnservedInjuries,
                        idx.clone(),
                        dev,
                        nominal + protection + left_toward_hospital - arrived_at_hospital,
                    );
                } else {
                    tally.ge(Family::UnservedInjuries, idx.clone(), dev + dew, nominal + protection);
                }
                tally.eq(Family::ServedInjuries, idx.clone(), dew, arrived_at_hospital);

                // own injuries cannot leave before they appear
                let net_out_of_origin: f64 = plan
                    .w
                    .iter()
                    .filter(|(&(hh, rr, _, _, _, _), _)| hh == h && rr == r)
                    .map(|(&(_, _, o, p, v, s), &x)| {
                        let mut c = 0.0;
                        if o == r && upto(t, s) {
                            c += x;
                        }
                        if p == r && upto(t, arrival(o, p, v, s)) {
                            c -= x;
                        }
                        c
                    })
                    .sum();
                let (appeared, _) = super::worst_case::worst_demand(inst, super::Entity::Injury(h), r, t)?;
                tally.le(Family::InjurySource, idx, net_out_of_origin, appeared);
            }
        }
    }
    for h in 0..nh {
        for r in inst.demand_nodes() {
            for p in (0..nn).filter(|&p| p != r && !role(p).is_hospital()) {
                for t in 1..=big_t {
                    let net: f64 = plan
                        .w
                        .iter()
                        .filter(|(&(hh, rr, _, _, _, _), _)| hh == h && rr == r)
                        .map(|(&(_, _, o, q, v, s), &x)| {
                            let mut c = 0.0;
                            if q == p && upto(t, arrival(o, q, v, s)) {
                                c += x;
                            }
                            if o == p && upto(t, s) {
                                c -= x;
                            }
                            c
                        })
                        .sum();
                    let idx = vec![tally.inj(h), tally.node(r), tally.node(p), period_label(t)];
                    tally.eq(Family::InjuryConservation, idx, net, 0.0);
                }
            }
        }
    }
    for h in 0..nh {
        for o in inst.permanent_hospitals() {
            for t in 1..=big_t {
                let admitted: f64 = plan
                    .w
                    .iter()
                    .filter(|(&(hh, _, from, to, v, s), _)| hh == h && to == o && upto(t, arrival(from, to, v, s)))
                    .map(|(_, &x)| x)
                    .sum();
                let lent: f64 = plan
                    .delta
                    .iter()
                    .filter(|(&(hh, from, _, _, s), _)| hh == h && from == o && upto(t, s))
                    .map(|(&(_, _, _, _, s), &x)| x * inst.hospital_capacity(h, o, s))
                    .sum();
                let cap: f64 = (1..=t).map(|s| inst.hospital_capacity(h, o, s)).sum();
                let idx = vec![tally.inj(h), tally.node(o), period_label(t)];
                tally.le(Family::PermanentHospitalCapacity, idx, admitted + lent, cap);
            }
        }
    }
    for h in 0..nh {
        for p in inst.temp_candidates() {
            for t in 1..=big_t {
                let admitted: f64 = plan
                    .w
                    .iter()
                    .filter(|(&(hh, _, from, to, v, s), _)| hh == h && to == p && upto(t, arrival(from, to, v, s)))
                    .map(|(_, &x)| x)
                    .sum();
                let received: f64 = plan
                    .delta
                    .iter()
                    .filter(|(&(hh, from, to, v, s), _)| hh == h && to == p && upto(t, arrival(from, to, v, s)))
                    .map(|(&(_, from, _, _, s), &x)| x * inst.hospital_capacity(h, from, s))
                    .sum();
                let idx = vec![tally.inj(h), tally.node(p), period_label(t)];
                tally.le(Family::TemporaryHospitalCapacity, idx, admitted, received);
            }
        }
    }
    for h in 0..nh {
        for o in inst.permanent_hospitals() {
            for t in 1..=big_t {
                for v in 0..nv {
                    let share: f64 = plan
                        .delta
                        .iter()
                        .filter(|(&(hh, from, _, vv, s), _)| hh == h && from == o && vv == v && upto(t, s))
                        .map(|(_, &x)| x)
                        .sum();
                    let idx = vec![tally.inj(h), tally.node(o), period_label(t), tally.veh(v)];
                    tally.le(Family::AllocationLimit, idx, share, 1.0);
                }
            }
        }
    }
    for (&(h, o, p, v, t), &x) in &plan.delta {
        let open = if plan.opened.contains(&p) { 1.0 } else { 0.0 };
        let idx = vec![tally.inj(h), tally.node(o), tally.node(p), period_label(t), tally.veh(v)];
        tally.le(Family::AllocationRequiresOpening, idx, x, open);
    }

    // ---- commodities
    let net_into = |a: usize, p: usize, t: usize| -> f64 {
        plan.u
            .iter()
            .filter(|(&(aa, ..), _)| aa == a)
            .map(|(&(_, _, o, q, v, s), &x)| {
                let mut c = 0.0;
                if q == p && upto(t, arrival(o, q, v, s)) {
                    c += x;
                }
                if o == p && upto(t, s) {
                    c -= x;
                }
                c
            })
            .sum()
    };
    for a in 0..na {
        for p in inst.demand_nodes() {
            for t in 1..=big_t {
                let nominal: f64 = (1..=t).map(|s| inst.commodity_demand(a, p, s).nominal).sum();
                let dev: f64 = (1..=t).map(|s| plan.dev_com.get(&(a, p, s)).copied().unwrap_or(0.0)).sum();
                let protection = protection_of(
                    inst.commodity_gamma(a, p, t),
                    plan.eta_com.get(&(a, p, t)).copied().unwrap_or(0.0),
                    inst.commodity_uncertain_periods(a, p, t)
                        .iter()
                        .map(|&s| plan.theta_com.get(&(a, p, t, s)).copied().unwrap_or(0.0)),
                );
                let idx = vec![tally.com(a), tally.node(p), period_label(t)];
                tally.ge(Family::UnmetCommodity, idx, dev + net_into(a, p, t), nominal + protection);
            }
        }
        for p in inst.supply_nodes() {
            for t in 1..=big_t {
                let supplied: f64 = (1..=t).map(|s| inst.supply(a, p, s)).sum();
                let idx = vec![tally.com(a), tally.node(p), period_label(t)];
                tally.le(Family::SupplyCapacity, idx, -net_into(a, p, t), supplied);
            }
        }
        for r in inst.supply_nodes() {
            for p in (0..nn).filter(|&p| p != r && !role(p).demand) {
                for t in 1..=big_t {
                    let net: f64 = plan
                        .u
                        .iter()
                        .filter(|(&(aa, rr, ..), _)| aa == a && rr == r)
                        .map(|(&(_, _, o, q, v, s), &x)| {
                            let mut c = 0.0;
                            if q == p && upto(t, arrival(o, q, v, s)) {
                                c += x;
                            }
                            if o == p && upto(t, s) {
                                c -= x;
                            }
                            c
                        })
                        .sum();
                    let idx = vec![tally.com(a), tally.node(r), tally.node(p), period_label(t)];
                    tally.eq(Family::CommodityConservation, idx, net, 0.0);
                }
            }
        }
    }

    // ---- vehicles
    let mut arc_periods: BTreeSet<(usize, usize, usize, usize)> = plan.z.keys().copied().collect();
    arc_periods.extend(plan.u.keys().map(|&(_, _, o, p, v, t)| (o, p, v, t)));
    arc_periods.extend(plan.w.keys().map(|&(_, _, o, p, v, t)| (o, p, v, t)));
    arc_periods.extend(plan.delta.keys().map(|&(_, o, p, v, t)| (o, p, v, t)));
    for &(o, p, v, t) in &arc_periods {
        let spec = &inst.vehicles[v];
        let z = plan.z.get(&(o, p, v, t)).copied().unwrap_or(0.0);
        let idx = vec![tally.node(o), tally.node(p), tally.veh(v), period_label(t)];
        let on_arc = |a: &(usize, usize, usize, usize, usize, usize)| a.2 == o && a.3 == p && a.4 == v && a.5 == t;
        let (mut volume, mut load) = (0.0, 0.0);
        for (k, &x) in plan.u.iter().filter(|(k, _)| on_arc(k)) {
            volume += inst.commodities[k.0].volume * x;
            load += inst.commodities[k.0].weight * x;
            if !spec.carries_commodity[k.0] {
                let i = vec![tally.com(k.0), tally.veh(v), period_label(t)];
                tally.le(Family::CommodityCompatibility, i, x, 0.0);
            }
        }
        tally.le(Family::VolumeCapacity, idx.clone(), volume, z * spec.volume_capacity);
        tally.le(Family::LoadCapacity, idx.clone(), load, z * spec.load_capacity);
        let mut people = 0.0;
        for (k, &x) in plan.w.iter().filter(|(k, _)| on_arc(k)) {
            people += x;
            if !spec.carries_injury[k.0] {
                let i = vec![tally.inj(k.0), tally.veh(v), period_label(t)];
                tally.le(Family::InjuryCompatibility, i, x, 0.0);
            }
        }
        tally.le(Family::InjuryVehicleCapacity, idx.clone(), people, z * spec.injury_capacity);
        let transferred: f64 = plan
            .delta
            .iter()
            .filter(|(&(_, oo, pp, vv, tt), _)| oo == o && pp == p && vv == v && tt == t)
            .map(|(&(h, ..), &x)| x * inst.hospital_capacity(h, o, t))
            .sum();
        tally.le(Family::ResourceTransferCapacity, idx.clone(), transferred, z * spec.transfer_capacity);
        let any_flow = z > 0.0 || volume > 0.0 || people > 0.0 || transferred > 0.0;
        if tt(o, p, v) == 0 && any_flow {
            // no link: nothing may travel (the dummy zero travel time)
            tally.le(Family::LinkExistence, idx.clone(), z.max(volume).max(people).max(transferred), 0.0);
        } else if arrival(o, p, v, t) > big_t && any_flow {
            tally.flag(Rule::Horizon, idx, z.max(volume).max(people).max(transferred));
        }
    }
    for p in 0..nn {
        for v in 0..nv {
            for t in 1..=big_t {
                let mut net: f64 = (1..=t).map(|s| inst.availability(p, v, s)).sum();
                for (&(o, q, vv, s), &x) in &plan.z {
                    if vv != v || tt(o, q, v) == 0 {
                        continue;
                    }
                    if q == p && upto(t, arrival(o, q, v, s)) {
                        net += x;
                    }
                    if o == p && upto(t, s) {
                        net -= x;
                    }
                }
                let idle = plan.idle.get(&(p, v, t)).copied().unwrap_or(0.0);
                let idx = vec![tally.node(p), tally.veh(v), period_label(t)];
                tally.eq(Family::FleetBalance, idx, idle, net);
            }
        }
    }

    // ---- protection
    for a in 0..na {
        for p in inst.demand_nodes() {
            for t in 1..=big_t {
                let eta = plan.eta_com.get(&(a, p, t)).copied().unwrap_or(0.0);
                for s in inst.commodity_uncertain_periods(a, p, t) {
                    let theta = plan.theta_com.get(&(a, p, t, s)).copied().unwrap_or(0.0);
                    let idx = vec![tally.com(a), tally.node(p), period_label(t), period_label(s)];
                    tally.ge(Family::CommodityProtection, idx, eta + theta, inst.commodity_demand(a, p, s).deviation);
                }
            }
        }
    }
    for h in 0..nh {
        for r in inst.demand_nodes() {
            for t in 1..=big_t {
                let eta = plan.eta_inj.get(&(h, r, t)).copied().unwrap_or(0.0);
                for s in inst.injury_uncertain_periods(h, r, t) {
                    let theta = plan.theta_inj.get(&(h, r, t, s)).copied().unwrap_or(0.0);
                    let idx = vec![tally.inj(h), tally.node(r), period_label(t), period_label(s)];
                    tally.ge(Family::InjuryProtection, idx, eta + theta, inst.injury_demand(h, r, s).deviation);
                }
            }
        }
    }

    // ---- objectives
    let recomputed = objectives(inst, &plan);
    let claimed = sol.objectives;
    for (i, (c, r)) in claimed.to_array().iter().zip(recomputed.to_array()).enumerate() {
        let gap = (c - r).abs();
        if gap > opts.tol * (1.0 + r.abs()) {
            tally.flag(Rule::Objective, vec![format!("obj{}", i + 1)], gap);
        }
    }

    let violations = tally.violations;
    Ok(CheckReport { pass: violations.is_empty(), violations, claimed, recomputed })
}

fn protection_of(gamma: f64, eta: f64, thetas: impl Iterator<Item = f64>) -> f64 {
    let thetas: Vec<f64> = thetas.collect();
    if thetas.is_empty() {
        return 0.0;
    }
    gamma * eta + thetas.iter().sum::<f64>()
}

fn domain(plan: &Plan, tally: &mut Tally<'_>) {
    let tol = tally.tol;
    let mut negative: Vec<(Vec<String>, f64)> = Vec::new();
    let mut push = |label: String, x: f64| {
        if x < -tol {
            negative.push((vec![label], -x));
        }
    };
    for x in plan.u.values() {
        push("commodity flow".into(), *x);
    }
    for x in plan.w.values() {
        push("injury flow".into(), *x);
    }
    for x in plan.idle.values() {
        push("idle vehicles".into(), *x);
    }
    for map in [&plan.dev_inj, &plan.dev_com, &plan.dew, &plan.eta_inj, &plan.eta_com] {
        for x in map.values() {
            push("shortfall or protection".into(), *x);
        }
    }
    for map in [&plan.theta_inj, &plan.theta_com] {
        for x in map.values() {
            push("protection".into(), *x);
        }
    }
    for (index, excess) in negative {
        tally.flag(Rule::Domain, index, excess);
    }
    for (&(o, p, v, t), &x) in &plan.z {
        let idx = vec![tally.node(o), tally.node(p), tally.veh(v), period_label(t)];
        if x < -tol {
            tally.flag(Rule::Domain, idx.clone(), -x);
        }
        let frac = (x - x.round()).abs();
        if frac > tol {
            tally.flag(Rule::Domain, idx, frac);
        }
    }
    for (&(h, o, p, v, t), &x) in &plan.delta {
        let idx = vec![tally.inj(h), tally.node(o), tally.node(p), tally.veh(v), period_label(t)];
        if x < -tol {
            tally.flag(Rule::Domain, idx.clone(), -x);
        }
        if x > 1.0 + tol {
            tally.flag(Rule::Domain, idx, x - 1.0);
        }
    }
}

fn routing(inst: &Instance, plan: &Plan, tally: &mut Tally<'_>) {
    let role = |p: usize| inst.nodes[p].roles;
    let tol = tally.tol;
    for (&(a, r, o, p, v, t), &x) in &plan.u {
        let bad = !role(r).supply || role(o).demand || p == r;
        if bad && x > tol {
            let idx = vec![tally.com(a), tally.node(r), tally.node(o), tally.node(p), tally.veh(v), period_label(t)];
            tally.flag(Rule::Routing, idx, x);
        }
    }
    for (&(h, r, o, p, v, t), &x) in &plan.w {
        let bad = !role(r).demand || role(o).is_hospital() || p == r;
        if bad && x > tol {
            let idx = vec![tally.inj(h), tally.node(r), tally.node(o), tally.node(p), tally.veh(v), period_label(t)];
            tally.flag(Rule::Routing, idx, x);
        }
    }
    for (&(h, o, p, v, t), &x) in &plan.delta {
        let bad = !role(o).permanent_hospital || !role(p).temp_candidate;
        if bad && x > tol {
            let idx = vec![tally.inj(h), tally.node(o), tally.node(p), tally.veh(v), period_label(t)];
            tally.flag(Rule::Routing, idx, x);
        }
    }
}

fn objectives(inst: &Instance, plan: &Plan) -> ObjectiveValues {
    let obj1: f64 = plan.dev_inj.iter().map(|(&(h, _, _), &x)| inst.injuries[h].priority * x).sum();
    let obj2: f64 = plan.dev_com.iter().map(|(&(a, _, _), &x)| inst.commodities[a].priority * x).sum();
    let moves: f64 = plan
        .z
        .iter()
        .map(|(&(o, p, v, _), &x)| inst.travel_time(o, p, v) as f64 * inst.vehicles[v].operating_cost * x)
        .sum();
    let building: f64 = plan.opened.iter().map(|&p| inst.nodes[p].construction_cost).sum();
    let capacity: f64 = inst
        .permanent_hospitals()
        .iter()
        .map(|&o| (0..inst.injuries.len()).map(|h| inst.nodes[o].hospital_capacity[h].iter().sum::<f64>()).sum::<f64>())
        .sum();
    let served: f64 = plan.dew.values().sum();
    ObjectiveValues::from_array([obj1, obj2, moves + building, capacity - served])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{CommoditySpec, Roles, VehicleSpec};
    use crate::solution::{CommodityFlow, Idle, VehicleMove};

    fn two_nodes() -> Instance {
        let mut inst = Instance::skeleton(
            2,
            vec![
                ("S".into(), Roles { supply: true, ..Roles::default() }),
                ("D".into(), Roles { demand: true, ..Roles::default() }),
            ],
            vec![CommoditySpec { id: "A".into(), weight: 1.0, volume: 1.0, priority: 1.0 }],
            vec![],
            vec![VehicleSpec {
                id: "V".into(),
                load_capacity: 10.0,
                volume_capacity: 2.0,
                injury_capacity: 0.0,
                transfer_capacity: 0.0,
                operating_cost: 4.0,
                carries_commodity: vec![true],
                carries_injury: vec![],
            }],
        );
        inst.set_travel_time(0, 1, 0, 1);
        inst.nodes[0].commodity_supply[0][0] = 5.0;
        inst.nodes[0].vehicle_availability[0][0] = 1.0;
        inst
    }

    fn one_trip(amount: f64) -> Solution {
        let mut sol = Solution::default();
        sol.vehicle_moves.push(VehicleMove { from: "S".into(), to: "D".into(), vehicle: "V".into(), period: 1, count: 1.0 });
        sol.commodity_flows.push(CommodityFlow {
            commodity: "A".into(),
            source: "S".into(),
            from: "S".into(),
            to: "D".into(),
            vehicle: "V".into(),
            period: 1,
            amount,
        });
        sol.idle_vehicles.push(Idle { node: "D".into(), vehicle: "V".into(), period: 2, count: 1.0 });
        sol.objectives.system_cost = 4.0;
        sol
    }

    #[test]
    fn empty_plan_on_zero_demand_passes() {
        let mut inst = two_nodes();
        inst.nodes[0].vehicle_availability[0][0] = 0.0;
        let rep = check(&inst, &Solution::default()).unwrap();
        assert!(rep.pass, "{:?}", rep.violations);
    }

    #[test]
    fn feasible_trip_passes() {
        let rep = check(&two_nodes(), &one_trip(2.0)).unwrap();
        assert!(rep.pass, "{:?}", rep.violations);
        assert_eq!(rep.recomputed.system_cost, 4.0);
    }

    #[test]
    fn overloaded_arc_is_a_single_volume_violation() {
        let rep = check(&two_nodes(), &one_trip(3.0)).unwrap();
        assert_eq!(rep.violations.len(), 1, "{:?}", rep.violations);
        let v = &rep.violations[0];
        assert_eq!(v.rule, Rule::Row(Family::VolumeCapacity));
        assert_eq!(v.index, vec!["S", "D", "V", "t1"]);
        assert!((v.excess - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wrong_claimed_objective_is_reported() {
        let mut sol = one_trip(2.0);
        sol.objectives.system_cost = 3.0;
        let rep = check(&two_nodes(), &sol).unwrap();
        assert_eq!(rep.count(Rule::Objective), 1);
    }

    #[test]
    fn unknown_ids_are_dimension_errors() {
        let mut sol = one_trip(1.0);
        sol.vehicle_moves[0].vehicle = "W".into();
        assert!(matches!(check(&two_nodes(), &sol), Err(CheckError::Dimension(_))));
        let mut sol = one_trip(1.0);
        sol.vehicle_moves[0].period = 3;
        assert!(matches!(check(&two_nodes(), &sol), Err(CheckError::Dimension(_))));
    }

    #[test]
    fn fractional_vehicles_and_late_arrivals_are_flagged() {
        let mut sol = one_trip(1.0);
        sol.vehicle_moves[0].count = 0.5;
        sol.idle_vehicles[0].count = 0.5;
        sol.idle_vehicles.push(Idle { node: "S".into(), vehicle: "V".into(), period: 1, count: 0.5 });
        sol.idle_vehicles.push(Idle { node: "S".into(), vehicle: "V".into(), period: 2, count: 0.5 });
        sol.objectives.system_cost = 2.0;
        let rep = check(&two_nodes(), &sol).unwrap();
        assert_eq!(rep.count(Rule::Domain), 1, "{:?}", rep.violations);

        let mut sol = one_trip(1.0);
        sol.vehicle_moves[0].period = 2;
        sol.commodity_flows[0].period = 2;
        let rep = check(&two_nodes(), &sol).unwrap();
        assert!(rep.count(Rule::Horizon) == 1, "{:?}", rep.violations);
    }

    #[test]
    fn json_report_round_trips() {
        let rep = check(&two_nodes(), &one_trip(3.0)).unwrap();
        let back: CheckReport = serde_json::from_str(&rep.to_json()).unwrap();
        assert_eq!(back, rep);
    }
}
