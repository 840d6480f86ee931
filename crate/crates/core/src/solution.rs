//! Decoded plan: every decision variable keyed by entity/node ids.
//!
//! Only nonzero entries are stored; an absent entry means zero. The checker
//! works from this record alone, never from LP column numbers.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CommodityFlow {
    pub commodity: String,
    pub source: String,
    pub from: String,
    pub to: String,
    pub vehicle: String,
    pub period: usize,
    pub amount: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InjuryFlow {
    pub injury: String,
    pub origin: String,
    pub from: String,
    pub to: String,
    pub vehicle: String,
    pub period: usize,
    pub amount: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VehicleMove {
    pub from: String,
    pub to: String,
    pub vehicle: String,
    pub period: usize,
    pub count: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Idle {
    pub node: String,
    pub vehicle: String,
    pub period: usize,
    pub count: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub injury: String,
    pub from: String,
    pub to: String,
    pub vehicle: String,
    pub period: usize,
    pub fraction: f64,
}

/// A per-(entity, node, period) quantity.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub entity: String,
    pub node: String,
    pub period: usize,
    pub value: f64,
}

/// A protection multiplier for row `period` and uncertain period `source_period`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ThetaEntry {
    pub entity: String,
    pub node: String,
    pub period: usize,
    pub source_period: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValues {
    pub unserved_injuries: f64,
    pub unmet_commodity: f64,
    pub system_cost: f64,
    pub hospital_underuse: f64,
}

impl ObjectiveValues {
    pub fn from_array(v: [f64; 4]) -> Self {
        Self { unserved_injuries: v[0], unmet_commodity: v[1], system_cost: v[2], hospital_underuse: v[3] }
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.unserved_injuries, self.unmet_commodity, self.system_cost, self.hospital_underuse]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub commodity_flows: Vec<CommodityFlow>,
    pub injury_flows: Vec<InjuryFlow>,
    pub vehicle_moves: Vec<VehicleMove>,
    pub idle_vehicles: Vec<Idle>,
    pub opened: Vec<String>,
    pub allocations: Vec<Allocation>,
    pub unserved_injuries: Vec<Entry>,
    pub unmet_commodity: Vec<Entry>,
    pub served_injuries: Vec<Entry>,
    pub eta_injury: Vec<Entry>,
    pub theta_injury: Vec<ThetaEntry>,
    pub eta_commodity: Vec<Entry>,
    pub theta_commodity: Vec<ThetaEntry>,
    pub objectives: ObjectiveValues,
}

impl Solution {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solutions always serialise")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Total unserved injuries per period (summed over class and node).
    pub fn total_by_period(entries: &[Entry], periods: usize) -> Vec<f64> {
        let mut out = vec![0.0; periods];
        for e in entries {
            if (1..=periods).contains(&e.period) {
                out[e.period - 1] += e.value;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let mut sol = Solution::default();
        sol.opened.push("N6".into());
        sol.unmet_commodity.push(Entry { entity: "A1".into(), node: "N1".into(), period: 1, value: 33.0 });
        sol.objectives.unmet_commodity = 66.0;
        let back = Solution::from_json(&sol.to_json()).unwrap();
        assert_eq!(back, sol);
    }

    #[test]
    fn per_period_totals() {
        let e = |p, v| Entry { entity: "H".into(), node: "N".into(), period: p, value: v };
        assert_eq!(Solution::total_by_period(&[e(1, 2.0), e(3, 1.0), e(1, 0.5)], 3), vec![2.5, 0.0, 1.0]);
    }
}
