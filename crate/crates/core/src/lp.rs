//! Sparse linear/mixed-integer program in the form consumed by the solvers.
//!
//! Every model is a minimisation. Rows carry a [`RowTag`] naming the
//! constraint family and the index tuple that produced them, so an assembled
//! matrix can always be traced back to the formulation.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub const INF: f64 = f64::INFINITY;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RowSense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ColumnKind {
    Continuous,
    Integer,
    Binary,
}

impl ColumnKind {
    pub fn is_integral(self) -> bool {
        !matches!(self, ColumnKind::Continuous)
    }
}

/// Constraint families of the relief model, plus a few generic ones.
///
/// The first twenty variants are the model's families in formulation order;
/// [`Family::MODEL`] lists them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    UnservedInjuries,
    PermanentHospitalCapacity,
    TemporaryHospitalCapacity,
    AllocationLimit,
    AllocationRequiresOpening,
    ServedInjuries,
    InjuryConservation,
    UnmetCommodity,
    SupplyCapacity,
    CommodityConservation,
    CommodityCompatibility,
    InjuryCompatibility,
    VolumeCapacity,
    LoadCapacity,
    InjuryVehicleCapacity,
    ResourceTransferCapacity,
    LinkExistence,
    FleetBalance,
    CommodityProtection,
    InjuryProtection,
    /// Cumulative departures of a demand node's own injuries never exceed
    /// the worst-case injuries that have appeared there.
    InjurySource,
    /// Goal-programming achievement row `lambda_i <= mu_i`.
    Membership,
    Generic,
}

impl Family {
    pub const MODEL: [Family; 20] = [
        Family::UnservedInjuries,
        Family::PermanentHospitalCapacity,
        Family::TemporaryHospitalCapacity,
        Family::AllocationLimit,
        Family::AllocationRequiresOpening,
        Family::ServedInjuries,
        Family::InjuryConservation,
        Family::UnmetCommodity,
        Family::SupplyCapacity,
        Family::CommodityConservation,
        Family::CommodityCompatibility,
        Family::InjuryCompatibility,
        Family::VolumeCapacity,
        Family::LoadCapacity,
        Family::InjuryVehicleCapacity,
        Family::ResourceTransferCapacity,
        Family::LinkExistence,
        Family::FleetBalance,
        Family::CommodityProtection,
        Family::InjuryProtection,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            Family::UnservedInjuries => "unserved_inj",
            Family::PermanentHospitalCapacity => "perm_cap",
            Family::TemporaryHospitalCapacity => "temp_cap",
            Family::AllocationLimit => "alloc_limit",
            Family::AllocationRequiresOpening => "alloc_open",
            Family::ServedInjuries => "served_inj",
            Family::InjuryConservation => "inj_flow",
            Family::UnmetCommodity => "unmet_com",
            Family::SupplyCapacity => "supply_cap",
            Family::CommodityConservation => "com_flow",
            Family::CommodityCompatibility => "com_compat",
            Family::InjuryCompatibility => "inj_compat",
            Family::VolumeCapacity => "vol_cap",
            Family::LoadCapacity => "load_cap",
            Family::InjuryVehicleCapacity => "inj_cap",
            Family::ResourceTransferCapacity => "transfer_cap",
            Family::LinkExistence => "link",
            Family::FleetBalance => "fleet",
            Family::CommodityProtection => "com_protect",
            Family::InjuryProtection => "inj_protect",
            Family::InjurySource => "inj_source",
            Family::Membership => "membership",
            Family::Generic => "row",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RowTag {
    pub family: Family,
    pub index: Vec<usize>,
}

impl RowTag {
    pub fn new(family: Family, index: impl Into<Vec<usize>>) -> Self {
        Self { family, index: index.into() }
    }

    pub fn generic(i: usize) -> Self {
        Self::new(Family::Generic, vec![i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub lower: f64,
    pub upper: f64,
    pub kind: ColumnKind,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: RowSense,
    pub rhs: f64,
    pub tag: RowTag,
}

impl Row {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates this row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let act = self.activity(x);
        match self.sense {
            RowSense::Le => (act - self.rhs).max(0.0),
            RowSense::Ge => (self.rhs - act).max(0.0),
            RowSense::Eq => (act - self.rhs).abs(),
        }
    }
}

/// A minimisation problem `min c.x + offset` over rows and bounded columns.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub columns: Vec<Column>,
    pub rows: Vec<Row>,
    pub objective_offset: f64,
    /// Families enforced by construction (pruned columns) rather than rows.
    pub structural: Vec<Family>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_column(&mut self, lower: f64, upper: f64, kind: ColumnKind, cost: f64) -> usize {
        let (lower, upper) = match kind {
            ColumnKind::Binary => (lower.max(0.0), upper.min(1.0)),
            _ => (lower, upper),
        };
        self.columns.push(Column { lower, upper, kind, cost });
        self.columns.len() - 1
    }

    /// Adds a row, merging duplicate column entries and dropping zeros.
    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, sense: RowSense, rhs: f64, tag: RowTag) -> usize {
        let coeffs = merge_coeffs(coeffs);
        self.rows.push(Row { coeffs, sense, rhs, tag });
        self.rows.len() - 1
    }

    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn nonzeros(&self) -> usize {
        self.rows.iter().map(|r| r.coeffs.len()).sum()
    }

    pub fn costs(&self) -> Vec<f64> {
        self.columns.iter().map(|c| c.cost).collect()
    }

    pub fn set_costs(&mut self, costs: &[f64], offset: f64) {
        assert_eq!(costs.len(), self.columns.len());
        for (c, &v) in self.columns.iter_mut().zip(costs) {
            c.cost = v;
        }
        self.objective_offset = offset;
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective_offset + self.columns.iter().zip(x).map(|(c, v)| c.cost * v).sum::<f64>()
    }

    /// Largest row or bound violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.rows.iter().map(|r| r.violation(x)).fold(0.0, f64::max);
        let bounds = self
            .columns
            .iter()
            .zip(x)
            .map(|(c, &v)| (c.lower - v).max(v - c.upper).max(0.0))
            .fold(0.0, f64::max);
        rows.max(bounds)
    }

    pub fn integrality_violation(&self, x: &[f64]) -> f64 {
        self.columns
            .iter()
            .zip(x)
            .filter(|(c, _)| c.kind.is_integral())
            .map(|(_, &v)| (v - v.round()).abs())
            .fold(0.0, f64::max)
    }

    pub fn integral_columns(&self) -> impl Iterator<Item = usize> + '_ {
        self.columns.iter().enumerate().filter(|(_, c)| c.kind.is_integral()).map(|(j, _)| j)
    }

    /// Renders the program in CPLEX-style LP text, one row per line with its
    /// traceability tag as a trailing comment.
    pub fn to_lp_text(&self, mut name: impl FnMut(usize) -> String) -> String {
        let mut out = String::new();
        let names: Vec<String> = (0..self.columns.len()).map(&mut name).collect();
        let _ = writeln!(out, "\\ offset {}", fmt_num(self.objective_offset));
        out.push_str("Minimize\n obj:");
        let mut any = false;
        for (j, c) in self.columns.iter().enumerate() {
            if c.cost != 0.0 {
                write_term(&mut out, c.cost, &names[j]);
                any = true;
            }
        }
        if !any {
            out.push_str(" 0");
        }
        out.push_str("\nSubject To\n");
        for (i, row) in self.rows.iter().enumerate() {
            let _ = write!(out, " r{}:", i);
            if row.coeffs.is_empty() {
                out.push_str(" 0");
            }
            for &(j, a) in &row.coeffs {
                write_term(&mut out, a, &names[j]);
            }
            let op = match row.sense {
                RowSense::Le => "<=",
                RowSense::Eq => "=",
                RowSense::Ge => ">=",
            };
            let idx: Vec<String> = row.tag.index.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(
                out,
                " {} {} \\ {}[{}]",
                op,
                fmt_num(row.rhs),
                row.tag.family.short_name(),
                idx.join(",")
            );
        }
        out.push_str("Bounds\n");
        for (j, c) in self.columns.iter().enumerate() {
            if c.upper.is_infinite() {
                let _ = writeln!(out, " {} >= {}", names[j], fmt_num(c.lower));
            } else {
                let _ = writeln!(out, " {} <= {} <= {}", fmt_num(c.lower), names[j], fmt_num(c.upper));
            }
        }
        let ints: Vec<&str> = self
            .columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.kind == ColumnKind::Integer)
            .map(|(j, _)| names[j].as_str())
            .collect();
        if !ints.is_empty() {
            let _ = writeln!(out, "General\n {}", ints.join(" "));
        }
        let bins: Vec<&str> = self
            .columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.kind == ColumnKind::Binary)
            .map(|(j, _)| names[j].as_str())
            .collect();
        if !bins.is_empty() {
            let _ = writeln!(out, "Binary\n {}", bins.join(" "));
        }
        out.push_str("End\n");
        out
    }
}

fn write_term(out: &mut String, a: f64, name: &str) {
    if a < 0.0 {
        let _ = write!(out, " - {} {}", fmt_num(-a), name);
    } else {
        let _ = write!(out, " + {} {}", fmt_num(a), name);
    }
}

fn fmt_num(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{}", v)
    }
}

pub(crate) fn merge_coeffs(mut coeffs: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    coeffs.sort_by_key(|&(j, _)| j);
    let mut merged: Vec<(usize, f64)> = Vec::with_capacity(coeffs.len());
    for (j, a) in coeffs {
        match merged.last_mut() {
            Some((k, b)) if *k == j => *b += a,
            _ => merged.push((j, a)),
        }
    }
    merged.retain(|&(_, a)| a != 0.0);
    merged
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_entries_are_merged() {
        let mut lp = LinearProgram::new();
        let x = lp.add_column(0.0, INF, ColumnKind::Continuous, 1.0);
        let y = lp.add_column(0.0, INF, ColumnKind::Continuous, 1.0);
        lp.add_row(vec![(y, 1.0), (x, 2.0), (x, -2.0), (y, 1.5)], RowSense::Le, 3.0, RowTag::generic(0));
        assert_eq!(lp.rows[0].coeffs, vec![(y, 2.5)]);
    }

    #[test]
    fn violation_by_sense() {
        let row = Row { coeffs: vec![(0, 1.0)], sense: RowSense::Eq, rhs: 2.0, tag: RowTag::generic(0) };
        assert_eq!(row.violation(&[3.5]), 1.5);
        let row = Row { sense: RowSense::Ge, ..row };
        assert_eq!(row.violation(&[3.5]), 0.0);
    }

    #[test]
    fn binary_bounds_are_clamped() {
        let mut lp = LinearProgram::new();
        let b = lp.add_column(-3.0, 7.0, ColumnKind::Binary, 0.0);
        assert_eq!((lp.columns[b].lower, lp.columns[b].upper), (0.0, 1.0));
    }

    #[test]
    fn lp_text_has_tag_comments() {
        let mut lp = LinearProgram::new();
        let x = lp.add_column(0.0, 4.0, ColumnKind::Integer, -1.0);
        lp.add_row(vec![(x, 2.0)], RowSense::Le, 5.0, RowTag::new(Family::FleetBalance, vec![1, 2, 3]));
        let text = lp.to_lp_text(|j| format!("x{}", j));
        assert!(text.contains("r0: + 2 x0 <= 5 \\ fleet[1,2,3]"));
        assert!(text.contains("General\n x0"));
    }
}
