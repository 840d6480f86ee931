//! Problem data: nodes and their roles, entities, fleet, travel times and
//! robust budgets, plus the JSON instance format and its validator.
//!
//! Periods are 1-based everywhere in the public API (`1..=periods`); the
//! per-period vectors stored on [`Node`] are 0-based internally.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roles {
    pub demand: bool,
    pub supply: bool,
    pub permanent_hospital: bool,
    pub temp_candidate: bool,
}

impl Roles {
    pub fn is_hospital(&self) -> bool {
        self.permanent_hospital || self.temp_candidate
    }
}

/// A nominal quantity together with its maximal deviation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Uncertain {
    pub nominal: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    pub roles: Roles,
    /// `[commodity][period - 1]`
    pub commodity_demand: Vec<Vec<Uncertain>>,
    /// `[injury][period - 1]`
    pub injury_demand: Vec<Vec<Uncertain>>,
    /// `[commodity][period - 1]`, units made available in that period.
    pub commodity_supply: Vec<Vec<f64>>,
    /// `[injury][period - 1]`, admissions per period.
    pub hospital_capacity: Vec<Vec<f64>>,
    pub construction_cost: f64,
    /// `[vehicle][period - 1]`, vehicles that appear at this node.
    pub vehicle_availability: Vec<Vec<f64>>,
}

impl Node {
    pub fn empty(id: impl Into<String>, roles: Roles, commodities: usize, injuries: usize, vehicles: usize, periods: usize) -> Self {
        Self {
            id: id.into(),
            roles,
            commodity_demand: vec![vec![Uncertain::default(); periods]; commodities],
            injury_demand: vec![vec![Uncertain::default(); periods]; injuries],
            commodity_supply: vec![vec![0.0; periods]; commodities],
            hospital_capacity: vec![vec![0.0; periods]; injuries],
            construction_cost: 0.0,
            vehicle_availability: vec![vec![0.0; periods]; vehicles],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommoditySpec {
    pub id: String,
    pub weight: f64,
    pub volume: f64,
    pub priority: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjurySpec {
    pub id: String,
    pub priority: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleSpec {
    pub id: String,
    pub load_capacity: f64,
    pub volume_capacity: f64,
    pub injury_capacity: f64,
    pub transfer_capacity: f64,
    pub operating_cost: f64,
    /// Indexed by commodity.
    pub carries_commodity: Vec<bool>,
    /// Indexed by injury class.
    pub carries_injury: Vec<bool>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub enum BigMPolicy {
    #[default]
    Auto,
    Explicit(f64),
}

/// One directed link usable by one vehicle type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Arc {
    pub from: usize,
    pub to: usize,
    pub vehicle: usize,
    pub time: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub periods: usize,
    pub nodes: Vec<Node>,
    pub commodities: Vec<CommoditySpec>,
    pub injuries: Vec<InjurySpec>,
    pub vehicles: Vec<VehicleSpec>,
    /// Flat `[from][to][vehicle]`; 0 means no link.
    pub travel_time: Vec<usize>,
    pub big_m: BigMPolicy,
    /// Explicit budgets keyed by `(injury, node, period)`; absent means full.
    pub injury_budget: BTreeMap<(usize, usize, usize), f64>,
    /// Explicit budgets keyed by `(commodity, node, period)`.
    pub commodity_budget: BTreeMap<(usize, usize, usize), f64>,
}

impl Instance {
    /// An instance with the given entities, no links and zero data.
    pub fn skeleton(
        periods: usize,
        nodes: Vec<(String, Roles)>,
        commodities: Vec<CommoditySpec>,
        injuries: Vec<InjurySpec>,
        vehicles: Vec<VehicleSpec>,
    ) -> Self {
        let (na, nh, nv) = (commodities.len(), injuries.len(), vehicles.len());
        let nodes: Vec<Node> =
            nodes.into_iter().map(|(id, roles)| Node::empty(id, roles, na, nh, nv, periods)).collect();
        let nn = nodes.len();
        Self {
            periods,
            nodes,
            commodities,
            injuries,
            vehicles,
            travel_time: vec![0; nn * nn * nv],
            big_m: BigMPolicy::Auto,
            injury_budget: BTreeMap::new(),
            commodity_budget: BTreeMap::new(),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn period_range(&self) -> std::ops::RangeInclusive<usize> {
        1..=self.periods
    }

    fn tt_index(&self, o: usize, p: usize, v: usize) -> usize {
        (o * self.nodes.len() + p) * self.vehicles.len() + v
    }

    pub fn travel_time(&self, o: usize, p: usize, v: usize) -> usize {
        self.travel_time[self.tt_index(o, p, v)]
    }

    pub fn set_travel_time(&mut self, o: usize, p: usize, v: usize, periods: usize) {
        let i = self.tt_index(o, p, v);
        self.travel_time[i] = periods;
    }

    pub fn nodes_where(&self, pred: impl Fn(&Roles) -> bool) -> Vec<usize> {
        self.nodes.iter().enumerate().filter(|(_, n)| pred(&n.roles)).map(|(i, _)| i).collect()
    }

    pub fn demand_nodes(&self) -> Vec<usize> {
        self.nodes_where(|r| r.demand)
    }

    pub fn supply_nodes(&self) -> Vec<usize> {
        self.nodes_where(|r| r.supply)
    }

    pub fn permanent_hospitals(&self) -> Vec<usize> {
        self.nodes_where(|r| r.permanent_hospital)
    }

    pub fn temp_candidates(&self) -> Vec<usize> {
        self.nodes_where(|r| r.temp_candidate)
    }

    /// Every `(from, to, vehicle)` with a positive travel time, in
    /// lexicographic declaration order.
    pub fn arcs(&self) -> Vec<Arc> {
        let (nn, nv) = (self.nodes.len(), self.vehicles.len());
        let mut out = Vec::new();
        for o in 0..nn {
            for p in 0..nn {
                if o == p {
                    continue;
                }
                for v in 0..nv {
                    let time = self.travel_time(o, p, v);
                    if time >= 1 {
                        out.push(Arc { from: o, to: p, vehicle: v, time });
                    }
                }
            }
        }
        out
    }

    pub fn commodity_demand(&self, a: usize, p: usize, t: usize) -> Uncertain {
        self.nodes[p].commodity_demand[a][t - 1]
    }

    pub fn injury_demand(&self, h: usize, r: usize, t: usize) -> Uncertain {
        self.nodes[r].injury_demand[h][t - 1]
    }

    pub fn supply(&self, a: usize, p: usize, t: usize) -> f64 {
        self.nodes[p].commodity_supply[a][t - 1]
    }

    pub fn hospital_capacity(&self, h: usize, o: usize, t: usize) -> f64 {
        self.nodes[o].hospital_capacity[h][t - 1]
    }

    pub fn availability(&self, p: usize, v: usize, t: usize) -> f64 {
        self.nodes[p].vehicle_availability[v][t - 1]
    }

    /// Total fleet of a vehicle type over all nodes and periods.
    pub fn fleet_total(&self, v: usize) -> f64 {
        self.nodes.iter().map(|n| n.vehicle_availability[v].iter().sum::<f64>()).sum()
    }

    /// Periods `s <= t` in which the commodity demand at `p` may deviate.
    pub fn commodity_uncertain_periods(&self, a: usize, p: usize, t: usize) -> Vec<usize> {
        (1..=t).filter(|&s| self.commodity_demand(a, p, s).deviation > 0.0).collect()
    }

    pub fn injury_uncertain_periods(&self, h: usize, r: usize, t: usize) -> Vec<usize> {
        (1..=t).filter(|&s| self.injury_demand(h, r, s).deviation > 0.0).collect()
    }

    pub fn commodity_gamma(&self, a: usize, p: usize, t: usize) -> f64 {
        self.commodity_budget
            .get(&(a, p, t))
            .copied()
            .unwrap_or_else(|| self.commodity_uncertain_periods(a, p, t).len() as f64)
    }

    pub fn injury_gamma(&self, h: usize, r: usize, t: usize) -> f64 {
        self.injury_budget
            .get(&(h, r, t))
            .copied()
            .unwrap_or_else(|| self.injury_uncertain_periods(h, r, t).len() as f64)
    }

    /// Copy with every effective budget multiplied by `scale`.
    pub fn with_gamma_scale(&self, scale: f64) -> Instance {
        let mut out = self.clone();
        out.injury_budget.clear();
        out.commodity_budget.clear();
        for r in self.demand_nodes() {
            for t in self.period_range() {
                for h in 0..self.injuries.len() {
                    out.injury_budget.insert((h, r, t), scale * self.injury_gamma(h, r, t));
                }
                for a in 0..self.commodities.len() {
                    out.commodity_budget.insert((a, r, t), scale * self.commodity_gamma(a, r, t));
                }
            }
        }
        out
    }

    /// Copy with every deviation set to zero (the nominal problem).
    pub fn without_deviations(&self) -> Instance {
        let mut out = self.clone();
        for node in &mut out.nodes {
            for series in node.commodity_demand.iter_mut().chain(node.injury_demand.iter_mut()) {
                for q in series {
                    q.deviation = 0.0;
                }
            }
        }
        out.injury_budget.clear();
        out.commodity_budget.clear();
        out
    }

    /// The big-M constant: explicit, or total demand + deviation + supply.
    pub fn big_m(&self) -> f64 {
        match self.big_m {
            BigMPolicy::Explicit(v) => v,
            BigMPolicy::Auto => {
                let mut total = 0.0;
                for n in &self.nodes {
                    for q in n.commodity_demand.iter().chain(&n.injury_demand).flatten() {
                        total += q.nominal + q.deviation;
                    }
                    total += n.commodity_supply.iter().flatten().sum::<f64>();
                }
                total.max(1.0)
            }
        }
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    pub fn commodity_index(&self, id: &str) -> Option<usize> {
        self.commodities.iter().position(|c| c.id == id)
    }

    pub fn injury_index(&self, id: &str) -> Option<usize> {
        self.injuries.iter().position(|c| c.id == id)
    }

    pub fn vehicle_index(&self, id: &str) -> Option<usize> {
        self.vehicles.iter().position(|c| c.id == id)
    }
}

/// The seven-node illustrative instance that ships with the crate.
pub const BUNDLED_JSON: &str = include_str!("../data/seven_node.json");

/// Parses [`BUNDLED_JSON`].
pub fn bundled() -> Instance {
    parse_instance(BUNDLED_JSON).expect("bundled instance parses")
}

// ---------------------------------------------------------------------------
// JSON document

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("empty node set")]
    EmptyNodeSet,
    #[error("planning horizon must be at least one period")]
    NoPeriods,
    #[error("unknown {kind} '{id}' referenced from {context}")]
    UnknownReference { kind: &'static str, id: String, context: String },
    #[error("duplicate {kind} '{id}'")]
    Duplicate { kind: &'static str, id: String },
    #[error("negative quantity {value} for {what}")]
    NegativeQuantity { what: String, value: f64 },
    #[error("non-finite quantity for {what}")]
    NonFinite { what: String },
    #[error("field/role mismatch: node '{node}' declares {field} without the {role} role")]
    RoleMismatch { node: String, field: &'static str, role: &'static str },
    #[error("period {period} outside 1..={periods} in {context}")]
    PeriodOutOfRange { period: usize, periods: usize, context: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceDoc {
    periods: usize,
    commodities: Vec<CommoditySpec>,
    injuries: Vec<InjurySpec>,
    vehicles: Vec<VehicleDoc>,
    nodes: Vec<NodeDoc>,
    #[serde(default)]
    travel_time: Vec<TravelDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    robust_budgets: Option<BudgetsDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    big_m: Option<BigMDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VehicleDoc {
    id: String,
    load_capacity: f64,
    volume_capacity: f64,
    #[serde(default)]
    injury_capacity: f64,
    #[serde(default)]
    transfer_capacity: f64,
    #[serde(default)]
    operating_cost: f64,
    #[serde(default)]
    commodities: Vec<String>,
    #[serde(default)]
    injuries: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RoleDoc {
    Demand,
    Supply,
    PermanentHospital,
    TempHospitalCandidate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDoc {
    id: String,
    #[serde(default)]
    roles: Vec<RoleDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    commodity_demand: Vec<CommodityDemandDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    injury_demand: Vec<InjuryDemandDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    commodity_supply: Vec<CommodityAmountDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    hospital_capacity: Vec<InjuryAmountDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    construction_cost: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    vehicles: Vec<FleetDoc>,
}

/// `period` absent means "every period".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CommodityDemandDoc {
    commodity: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    period: Option<usize>,
    amount: f64,
    #[serde(default)]
    deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InjuryDemandDoc {
    injury: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    period: Option<usize>,
    amount: f64,
    #[serde(default)]
    deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CommodityAmountDoc {
    commodity: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    period: Option<usize>,
    amount: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InjuryAmountDoc {
    injury: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    period: Option<usize>,
    amount: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FleetDoc {
    vehicle: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    period: Option<usize>,
    count: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TravelDoc {
    from: String,
    to: String,
    vehicle: String,
    periods: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct BudgetsDoc {
    #[serde(default)]
    injury: Vec<InjuryBudgetDoc>,
    #[serde(default)]
    commodity: Vec<CommodityBudgetDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InjuryBudgetDoc {
    injury: String,
    node: String,
    period: usize,
    gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CommodityBudgetDoc {
    commodity: String,
    node: String,
    period: usize,
    gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum BigMDoc {
    Explicit(f64),
    Keyword(BigMKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum BigMKeyword {
    Auto,
}

struct Resolver {
    nodes: HashMap<String, usize>,
    commodities: HashMap<String, usize>,
    injuries: HashMap<String, usize>,
    vehicles: HashMap<String, usize>,
    periods: usize,
}

impl Resolver {
    fn lookup(map: &HashMap<String, usize>, kind: &'static str, id: &str, context: &str) -> Result<usize, ParseError> {
        map.get(id).copied().ok_or_else(|| ParseError::UnknownReference {
            kind,
            id: id.to_string(),
            context: context.to_string(),
        })
    }
    fn node(&self, id: &str, ctx: &str) -> Result<usize, ParseError> {
        Self::lookup(&self.nodes, "node", id, ctx)
    }
    fn commodity(&self, id: &str, ctx: &str) -> Result<usize, ParseError> {
        Self::lookup(&self.commodities, "commodity", id, ctx)
    }
    fn injury(&self, id: &str, ctx: &str) -> Result<usize, ParseError> {
        Self::lookup(&self.injuries, "injury", id, ctx)
    }
    fn vehicle(&self, id: &str, ctx: &str) -> Result<usize, ParseError> {
        Self::lookup(&self.vehicles, "vehicle", id, ctx)
    }
    /// 0-based period indices targeted by an optional period field.
    fn periods(&self, period: Option<usize>, ctx: &str) -> Result<std::ops::Range<usize>, ParseError> {
        match period {
            None => Ok(0..self.periods),
            Some(p) if p >= 1 && p <= self.periods => Ok(p - 1..p),
            Some(p) => Err(ParseError::PeriodOutOfRange { period: p, periods: self.periods, context: ctx.to_string() }),
        }
    }
}

fn quantity(what: impl FnOnce() -> String, value: f64) -> Result<f64, ParseError> {
    if !value.is_finite() {
        return Err(ParseError::NonFinite { what: what() });
    }
    if value < 0.0 {
        return Err(ParseError::NegativeQuantity { what: what(), value });
    }
    Ok(value)
}

fn index_ids<'a>(kind: &'static str, ids: impl Iterator<Item = &'a str>) -> Result<HashMap<String, usize>, ParseError> {
    let mut map = HashMap::new();
    for (i, id) in ids.enumerate() {
        if map.insert(id.to_string(), i).is_some() {
            return Err(ParseError::Duplicate { kind, id: id.to_string() });
        }
    }
    Ok(map)
}

fn role_check(node: &NodeDoc, roles: &Roles) -> Result<(), ParseError> {
    let mismatch = |field, role| Err(ParseError::RoleMismatch { node: node.id.clone(), field, role });
    if !roles.demand && !node.commodity_demand.is_empty() {
        return mismatch("commodity_demand", "demand");
    }
    if !roles.demand && !node.injury_demand.is_empty() {
        return mismatch("injury_demand", "demand");
    }
    if !roles.supply && !node.commodity_supply.is_empty() {
        return mismatch("commodity_supply", "supply");
    }
    if !roles.permanent_hospital && !node.hospital_capacity.is_empty() {
        return mismatch("hospital_capacity", "permanent_hospital");
    }
    if !roles.temp_candidate && node.construction_cost.is_some() {
        return mismatch("construction_cost", "temp_hospital_candidate");
    }
    Ok(())
}

/// Parses an instance document.
///
/// Unlisted demands, deviations, supplies and capacities are zero; omitted
/// budgets are full (`|J_t|`); an omitted `big_m` is `auto`.
pub fn parse_instance(text: &str) -> Result<Instance, ParseError> {
    let doc: InstanceDoc = serde_json::from_str(text).map_err(|e| ParseError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    from_doc(doc)
}

fn from_doc(doc: InstanceDoc) -> Result<Instance, ParseError> {
    if doc.periods == 0 {
        return Err(ParseError::NoPeriods);
    }
    if doc.nodes.is_empty() {
        return Err(ParseError::EmptyNodeSet);
    }
    let res = Resolver {
        nodes: index_ids("node", doc.nodes.iter().map(|n| n.id.as_str()))?,
        commodities: index_ids("commodity", doc.commodities.iter().map(|c| c.id.as_str()))?,
        injuries: index_ids("injury", doc.injuries.iter().map(|c| c.id.as_str()))?,
        vehicles: index_ids("vehicle", doc.vehicles.iter().map(|c| c.id.as_str()))?,
        periods: doc.periods,
    };
    let (na, nh) = (doc.commodities.len(), doc.injuries.len());

    for c in &doc.commodities {
        for (name, v) in [("weight", c.weight), ("volume", c.volume), ("priority", c.priority)] {
            quantity(|| format!("commodity '{}' {}", c.id, name), v)?;
        }
    }
    for h in &doc.injuries {
        quantity(|| format!("injury '{}' priority", h.id), h.priority)?;
    }

    let mut vehicles = Vec::with_capacity(doc.vehicles.len());
    for v in &doc.vehicles {
        let ctx = format!("vehicle '{}'", v.id);
        for (name, x) in [
            ("load_capacity", v.load_capacity),
            ("volume_capacity", v.volume_capacity),
            ("injury_capacity", v.injury_capacity),
            ("transfer_capacity", v.transfer_capacity),
            ("operating_cost", v.operating_cost),
        ] {
            quantity(|| format!("{} {}", ctx, name), x)?;
        }
        let mut carries_commodity = vec![false; na];
        for id in &v.commodities {
            carries_commodity[res.commodity(id, &ctx)?] = true;
        }
        let mut carries_injury = vec![false; nh];
        for id in &v.injuries {
            carries_injury[res.injury(id, &ctx)?] = true;
        }
        vehicles.push(VehicleSpec {
            id: v.id.clone(),
            load_capacity: v.load_capacity,
            volume_capacity: v.volume_capacity,
            injury_capacity: v.injury_capacity,
            transfer_capacity: v.transfer_capacity,
            operating_cost: v.operating_cost,
            carries_commodity,
            carries_injury,
        });
    }

    let nodes_meta: Vec<(String, Roles)> = doc
        .nodes
        .iter()
        .map(|n| {
            let mut roles = Roles::default();
            for r in &n.roles {
                match r {
                    RoleDoc::Demand => roles.demand = true,
                    RoleDoc::Supply => roles.supply = true,
                    RoleDoc::PermanentHospital => roles.permanent_hospital = true,
                    RoleDoc::TempHospitalCandidate => roles.temp_candidate = true,
                }
            }
            (n.id.clone(), roles)
        })
        .collect();
    let mut inst = Instance::skeleton(doc.periods, nodes_meta, doc.commodities.clone(), doc.injuries.clone(), vehicles);
    inst.big_m = match doc.big_m {
        None | Some(BigMDoc::Keyword(BigMKeyword::Auto)) => BigMPolicy::Auto,
        Some(BigMDoc::Explicit(v)) => BigMPolicy::Explicit(quantity(|| "big_m".into(), v)?),
    };

    for (p, nd) in doc.nodes.iter().enumerate() {
        let roles = inst.nodes[p].roles;
        role_check(nd, &roles)?;
        let ctx = format!("node '{}'", nd.id);
        let node = &mut inst.nodes[p];
        for e in &nd.commodity_demand {
            let a = res.commodity(&e.commodity, &ctx)?;
            let nominal = quantity(|| format!("{} demand for {}", ctx, e.commodity), e.amount)?;
            let deviation = quantity(|| format!("{} deviation for {}", ctx, e.commodity), e.deviation)?;
            for t in res.periods(e.period, &ctx)? {
                node.commodity_demand[a][t] = Uncertain { nominal, deviation };
            }
        }
        for e in &nd.injury_demand {
            let h = res.injury(&e.injury, &ctx)?;
            let nominal = quantity(|| format!("{} injuries {}", ctx, e.injury), e.amount)?;
            let deviation = quantity(|| format!("{} deviation for {}", ctx, e.injury), e.deviation)?;
            for t in res.periods(e.period, &ctx)? {
                node.injury_demand[h][t] = Uncertain { nominal, deviation };
            }
        }
        for e in &nd.commodity_supply {
            let a = res.commodity(&e.commodity, &ctx)?;
            let amount = quantity(|| format!("{} supply of {}", ctx, e.commodity), e.amount)?;
            for t in res.periods(e.period, &ctx)? {
                node.commodity_supply[a][t] = amount;
            }
        }
        for e in &nd.hospital_capacity {
            let h = res.injury(&e.injury, &ctx)?;
            let amount = quantity(|| format!("{} capacity for {}", ctx, e.injury), e.amount)?;
            for t in res.periods(e.period, &ctx)? {
                node.hospital_capacity[h][t] = amount;
            }
        }
        if let Some(c) = nd.construction_cost {
            node.construction_cost = quantity(|| format!("{} construction cost", ctx), c)?;
        }
        for e in &nd.vehicles {
            let v = res.vehicle(&e.vehicle, &ctx)?;
            let count = quantity(|| format!("{} fleet of {}", ctx, e.vehicle), e.count)?;
            for t in res.periods(e.period, &ctx)? {
                node.vehicle_availability[v][t] = count;
            }
        }
    }

    for e in &doc.travel_time {
        let ctx = "travel_time";
        let (o, p, v) = (res.node(&e.from, ctx)?, res.node(&e.to, ctx)?, res.vehicle(&e.vehicle, ctx)?);
        inst.set_travel_time(o, p, v, e.periods);
    }

    if let Some(b) = &doc.robust_budgets {
        for e in &b.injury {
            let ctx = "robust_budgets.injury";
            let key = (res.injury(&e.injury, ctx)?, res.node(&e.node, ctx)?, res.periods(Some(e.period), ctx)?.end);
            let g = quantity(|| format!("budget for {} at {}", e.injury, e.node), e.gamma)?;
            inst.injury_budget.insert(key, g);
        }
        for e in &b.commodity {
            let ctx = "robust_budgets.commodity";
            let key = (res.commodity(&e.commodity, ctx)?, res.node(&e.node, ctx)?, res.periods(Some(e.period), ctx)?.end);
            let g = quantity(|| format!("budget for {} at {}", e.commodity, e.node), e.gamma)?;
            inst.commodity_budget.insert(key, g);
        }
    }
    Ok(inst)
}

/// Serialises an instance; `parse_instance(&to_json(i))` reproduces `i`.
pub fn to_json(inst: &Instance) -> String {
    let period = |t: usize| Some(t + 1);
    let nodes = inst
        .nodes
        .iter()
        .map(|n| {
            let mut roles = Vec::new();
            if n.roles.demand {
                roles.push(RoleDoc::Demand);
            }
            if n.roles.supply {
                roles.push(RoleDoc::Supply);
            }
            if n.roles.permanent_hospital {
                roles.push(RoleDoc::PermanentHospital);
            }
            if n.roles.temp_candidate {
                roles.push(RoleDoc::TempHospitalCandidate);
            }
            let mut doc = NodeDoc {
                id: n.id.clone(),
                roles,
                commodity_demand: vec![],
                injury_demand: vec![],
                commodity_supply: vec![],
                hospital_capacity: vec![],
                construction_cost: n.roles.temp_candidate.then_some(n.construction_cost),
                vehicles: vec![],
            };
            for (a, c) in inst.commodities.iter().enumerate() {
                for t in 0..inst.periods {
                    let q = n.commodity_demand[a][t];
                    if n.roles.demand && (q.nominal != 0.0 || q.deviation != 0.0) {
                        doc.commodity_demand.push(CommodityDemandDoc {
                            commodity: c.id.clone(),
                            period: period(t),
                            amount: q.nominal,
                            deviation: q.deviation,
                        });
                    }
                    let s = n.commodity_supply[a][t];
                    if n.roles.supply && s != 0.0 {
                        doc.commodity_supply.push(CommodityAmountDoc { commodity: c.id.clone(), period: period(t), amount: s });
                    }
                }
            }
            for (h, c) in inst.injuries.iter().enumerate() {
                for t in 0..inst.periods {
                    let q = n.injury_demand[h][t];
                    if n.roles.demand && (q.nominal != 0.0 || q.deviation != 0.0) {
                        doc.injury_demand.push(InjuryDemandDoc {
                            injury: c.id.clone(),
                            period: period(t),
                            amount: q.nominal,
                            deviation: q.deviation,
                        });
                    }
                    let cap = n.hospital_capacity[h][t];
                    if n.roles.permanent_hospital && cap != 0.0 {
                        doc.hospital_capacity.push(InjuryAmountDoc { injury: c.id.clone(), period: period(t), amount: cap });
                    }
                }
            }
            for (v, spec) in inst.vehicles.iter().enumerate() {
                for t in 0..inst.periods {
                    let c = n.vehicle_availability[v][t];
                    if c != 0.0 {
                        doc.vehicles.push(FleetDoc { vehicle: spec.id.clone(), period: period(t), count: c });
                    }
                }
            }
            doc
        })
        .collect();
    let mut travel_time = Vec::new();
    let nn = inst.nodes.len();
    for o in 0..nn {
        for p in 0..nn {
            for (v, spec) in inst.vehicles.iter().enumerate() {
                let tt = inst.travel_time(o, p, v);
                if tt != 0 {
                    travel_time.push(TravelDoc {
                        from: inst.nodes[o].id.clone(),
                        to: inst.nodes[p].id.clone(),
                        vehicle: spec.id.clone(),
                        periods: tt,
                    });
                }
            }
        }
    }
    let budgets = if inst.injury_budget.is_empty() && inst.commodity_budget.is_empty() {
        None
    } else {
        Some(BudgetsDoc {
            injury: inst
                .injury_budget
                .iter()
                .map(|(&(h, r, t), &g)| InjuryBudgetDoc {
                    injury: inst.injuries[h].id.clone(),
                    node: inst.nodes[r].id.clone(),
                    period: t,
                    gamma: g,
                })
                .collect(),
            commodity: inst
                .commodity_budget
                .iter()
                .map(|(&(a, p, t), &g)| CommodityBudgetDoc {
                    commodity: inst.commodities[a].id.clone(),
                    node: inst.nodes[p].id.clone(),
                    period: t,
                    gamma: g,
                })
                .collect(),
        })
    };
    let doc = InstanceDoc {
        periods: inst.periods,
        commodities: inst.commodities.clone(),
        injuries: inst.injuries.clone(),
        vehicles: inst
            .vehicles
            .iter()
            .map(|v| VehicleDoc {
                id: v.id.clone(),
                load_capacity: v.load_capacity,
                volume_capacity: v.volume_capacity,
                injury_capacity: v.injury_capacity,
                transfer_capacity: v.transfer_capacity,
                operating_cost: v.operating_cost,
                commodities: inst
                    .commodities
                    .iter()
                    .zip(&v.carries_commodity)
                    .filter(|(_, &b)| b)
                    .map(|(c, _)| c.id.clone())
                    .collect(),
                injuries: inst
                    .injuries
                    .iter()
                    .zip(&v.carries_injury)
                    .filter(|(_, &b)| b)
                    .map(|(c, _)| c.id.clone())
                    .collect(),
            })
            .collect(),
        nodes,
        travel_time,
        robust_budgets: budgets,
        big_m: match inst.big_m {
            BigMPolicy::Auto => None,
            BigMPolicy::Explicit(v) => Some(BigMDoc::Explicit(v)),
        },
    };
    serde_json::to_string_pretty(&doc).expect("instance documents always serialise")
}

// ---------------------------------------------------------------------------
// Validation

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationCode {
    SelfLoopTravelTime,
    BudgetExceedsUncertaintySet,
    NonPositiveAttribute,
    VehicleWithoutCargo,
    DemandRoleOverlap,
    NoDemandNodes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, code: ViolationCode) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }

    fn push(&mut self, code: ViolationCode, message: String) {
        self.violations.push(Violation { code, message });
    }
}

/// Lists every invariant the model relies on that `inst` breaks.
pub fn validate(inst: &Instance) -> ValidationReport {
    let mut rep = ValidationReport::default();
    for (o, node) in inst.nodes.iter().enumerate() {
        for (v, spec) in inst.vehicles.iter().enumerate() {
            if inst.travel_time(o, o, v) != 0 {
                rep.push(
                    ViolationCode::SelfLoopTravelTime,
                    format!("self-loop travel time {} at '{}' for '{}'", inst.travel_time(o, o, v), node.id, spec.id),
                );
            }
        }
        if node.roles.demand && (node.roles.supply || node.roles.is_hospital()) {
            rep.push(
                ViolationCode::DemandRoleOverlap,
                format!("demand node '{}' may not also be a supply or hospital node", node.id),
            );
        }
    }
    for c in &inst.commodities {
        for (name, v) in [("weight", c.weight), ("volume", c.volume), ("priority", c.priority)] {
            if v <= 0.0 {
                rep.push(ViolationCode::NonPositiveAttribute, format!("commodity '{}' {} must be positive", c.id, name));
            }
        }
    }
    for h in &inst.injuries {
        if h.priority <= 0.0 {
            rep.push(ViolationCode::NonPositiveAttribute, format!("injury '{}' priority must be positive", h.id));
        }
    }
    for v in &inst.vehicles {
        for (name, x) in [("load_capacity", v.load_capacity), ("volume_capacity", v.volume_capacity)] {
            if x <= 0.0 {
                rep.push(ViolationCode::NonPositiveAttribute, format!("vehicle '{}' {} must be positive", v.id, name));
            }
        }
        if !v.carries_commodity.iter().any(|&b| b) && !v.carries_injury.iter().any(|&b| b) {
            rep.push(ViolationCode::VehicleWithoutCargo, format!("vehicle '{}' carries neither commodities nor injuries", v.id));
        }
    }
    if inst.demand_nodes().is_empty() {
        rep.push(ViolationCode::NoDemandNodes, "no demand nodes".to_string());
    }
    for (&(h, r, t), &g) in &inst.injury_budget {
        let cap = inst.injury_uncertain_periods(h, r, t).len();
        if g > cap as f64 + 1e-12 || !inst.nodes[r].roles.demand {
            rep.push(
                ViolationCode::BudgetExceedsUncertaintySet,
                format!(
                    "budget exceeds uncertainty set: {} for '{}' at '{}' period {} with {} uncertain periods",
                    g, inst.injuries[h].id, inst.nodes[r].id, t, cap
                ),
            );
        }
    }
    for (&(a, p, t), &g) in &inst.commodity_budget {
        let cap = inst.commodity_uncertain_periods(a, p, t).len();
        if g > cap as f64 + 1e-12 || !inst.nodes[p].roles.demand {
            rep.push(
                ViolationCode::BudgetExceedsUncertaintySet,
                format!(
                    "budget exceeds uncertainty set: {} for '{}' at '{}' period {} with {} uncertain periods",
                    g, inst.commodities[a].id, inst.nodes[p].id, t, cap
                ),
            );
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_NODE: &str = r#"{
        "periods": 2,
        "commodities": [{"id": "A", "weight": 1, "volume": 1, "priority": 1}],
        "injuries": [{"id": "H", "priority": 1}],
        "vehicles": [{"id": "T", "load_capacity": 10, "volume_capacity": 10, "commodities": ["A"]}],
        "nodes": [
            {"id": "D", "roles": ["demand"], "commodity_demand": [{"commodity": "A", "period": 1, "amount": 5, "deviation": 1}]},
            {"id": "S", "roles": ["supply"], "commodity_supply": [{"commodity": "A", "amount": 10}],
             "vehicles": [{"vehicle": "T", "period": 1, "count": 1}]}
        ],
        "travel_time": [{"from": "S", "to": "D", "vehicle": "T", "periods": 1}]
    }"#;

    #[test]
    fn parses_small_document() {
        let inst = parse_instance(TWO_NODE).unwrap();
        assert_eq!(inst.num_nodes(), 2);
        assert_eq!(inst.supply(0, 1, 2), 10.0);
        assert_eq!(inst.commodity_demand(0, 0, 1), Uncertain { nominal: 5.0, deviation: 1.0 });
        assert_eq!(inst.commodity_demand(0, 0, 2), Uncertain::default());
        assert_eq!(inst.arcs(), vec![Arc { from: 1, to: 0, vehicle: 0, time: 1 }]);
        assert_eq!(inst.commodity_gamma(0, 0, 2), 1.0);
        assert_eq!(inst.big_m, BigMPolicy::Auto);
        assert!(validate(&inst).is_ok());
    }

    #[test]
    fn empty_nodes_rejected() {
        let text = r#"{"periods": 1, "commodities": [], "injuries": [], "vehicles": [], "nodes": []}"#;
        assert_eq!(parse_instance(text), Err(ParseError::EmptyNodeSet));
    }

    #[test]
    fn capacity_without_hospital_role_rejected() {
        let text = r#"{"periods": 1, "commodities": [], "injuries": [{"id": "H", "priority": 1}], "vehicles": [],
            "nodes": [{"id": "1", "roles": ["demand"], "hospital_capacity": [{"injury": "H", "amount": 3}]}]}"#;
        let err = parse_instance(text).unwrap_err();
        assert!(matches!(err, ParseError::RoleMismatch { field: "hospital_capacity", .. }));
        assert!(err.to_string().contains("field/role mismatch"));
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = parse_instance("{\n  \"periods\": 2,\n  oops }").unwrap_err();
        match err {
            ParseError::Syntax { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_reference_and_negative_quantity() {
        let bad_ref = TWO_NODE.replace(r#""vehicle": "T", "periods": 1"#, r#""vehicle": "X", "periods": 1"#);
        assert!(matches!(parse_instance(&bad_ref), Err(ParseError::UnknownReference { kind: "vehicle", .. })));
        let negative = TWO_NODE.replace(r#""amount": 10"#, r#""amount": -10"#);
        assert!(matches!(parse_instance(&negative), Err(ParseError::NegativeQuantity { .. })));
        let late = TWO_NODE.replace(r#""period": 1, "amount": 5"#, r#""period": 3, "amount": 5"#);
        assert!(matches!(parse_instance(&late), Err(ParseError::PeriodOutOfRange { period: 3, .. })));
    }

    #[test]
    fn budget_beyond_uncertain_periods_flagged() {
        let mut inst = parse_instance(TWO_NODE).unwrap();
        inst.commodity_budget.insert((0, 0, 2), 5.0);
        let rep = validate(&inst);
        assert!(rep.has(ViolationCode::BudgetExceedsUncertaintySet));
        assert!(rep.violations[0].message.contains("budget exceeds uncertainty set"));
    }

    #[test]
    fn self_loop_flagged_and_never_an_arc() {
        let mut inst = parse_instance(TWO_NODE).unwrap();
        inst.set_travel_time(0, 0, 0, 3);
        assert!(validate(&inst).has(ViolationCode::SelfLoopTravelTime));
        assert!(inst.arcs().iter().all(|a| a.from != a.to));
    }

    #[test]
    fn vehicle_without_cargo_flagged() {
        let text = TWO_NODE.replace(r#", "commodities": ["A"]}"#, "}");
        let inst = parse_instance(&text).unwrap();
        assert!(validate(&inst).has(ViolationCode::VehicleWithoutCargo));
    }

    #[test]
    fn gamma_scale_and_nominal_copies() {
        let inst = parse_instance(TWO_NODE).unwrap();
        let half = inst.with_gamma_scale(0.5);
        assert_eq!(half.commodity_gamma(0, 0, 1), 0.5);
        let nominal = inst.without_deviations();
        assert_eq!(nominal.commodity_demand(0, 0, 1).deviation, 0.0);
        assert_eq!(nominal.commodity_gamma(0, 0, 1), 0.0);
    }

    #[test]
    fn round_trip_small_document() {
        let inst = parse_instance(TWO_NODE).unwrap();
        assert_eq!(parse_instance(&to_json(&inst)).unwrap(), inst);
    }
}
