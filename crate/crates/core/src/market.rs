//! Customer utilities, segment demands, channel profits and interiority checks.
//!
//! Primary customers draw a valuation `v ~ U[0,1]` and buy through the direct
//! channel (utility `αv − p_m`) or the retailer (`v − p_r`). Replacement
//! customers draw a return cost `u ~ U[0,1]` and trade in under the
//! manufacturer's subsidy (`b_m − u`) or the retailer's (`b_r − αu`).
//! Demands are the closed-form masses of those choice regions and are never
//! clamped unless [`DemandOptions::clamped`] asks for it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};
use crate::params::{DecisionSet, ModelId, Params};

/// Threshold on `α(1−α)` below which demands are treated as singular.
pub const SINGULAR_ALPHA_PRODUCT: f64 = 1e-12;

/// Which expression is used for the MR manufacturer trade-in segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemandForm {
    /// `q3 = (b_m − b_r)/(1 − α)`, the mass of `{u : b_m − u ≥ b_r − αu}`.
    #[default]
    Adopted,
    /// `q3 = 1 − (b_m − b_r)/(1 − α)`, the printed variant.
    AsPrinted,
}

impl DemandForm {
    pub const BOTH: [DemandForm; 2] = [DemandForm::Adopted, DemandForm::AsPrinted];

    pub fn as_str(self) -> &'static str {
        match self {
            DemandForm::Adopted => "adopted",
            DemandForm::AsPrinted => "as_printed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DemandOptions {
    pub form: DemandForm,
    /// Clamp every segment mass to `[0, 1]` before computing profits.
    pub clamped: bool,
}

impl DemandOptions {
    pub fn with_form(form: DemandForm) -> Self {
        DemandOptions {
            form,
            clamped: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemandProfile {
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    /// Present only under model MR.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q4: Option<f64>,
}

impl DemandProfile {
    pub fn as_vec(&self) -> Vec<f64> {
        let mut v = vec![self.q1, self.q2, self.q3];
        v.extend(self.q4);
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfitProfile {
    pub pi_m: f64,
    pub pi_r: f64,
    pub pi_s: f64,
}

impl ProfitProfile {
    fn new(pi_m: f64, pi_r: f64) -> Self {
        ProfitProfile {
            pi_m,
            pi_r,
            pi_s: pi_m + pi_r,
        }
    }
}

/// Utility of each segment for one customer pair `(v, u)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SegmentUtilities {
    pub u1: f64,
    pub u2: f64,
    pub u3: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u4: Option<f64>,
}

pub fn utilities(decisions: &DecisionSet, v: f64, u: f64, params: &Params) -> Result<SegmentUtilities> {
    let mut bad = Vec::new();
    for (name, x) in [("v", v), ("u", u)] {
        if !(0.0..=1.0).contains(&x) {
            bad.push(Violation {
                field: name.into(),
                value: x,
                constraint: format!("0 <= {name} <= 1"),
            });
        }
    }
    if !bad.is_empty() {
        return Err(Error::OutOfDomain(bad));
    }
    let a = params.alpha();
    Ok(match *decisions {
        DecisionSet::M { p_m, p_r, b_m, .. } => SegmentUtilities {
            u1: a * v - p_m,
            u2: v - p_r,
            u3: b_m - u,
            u4: None,
        },
        DecisionSet::R { p_m, p_r, b_r, .. } => SegmentUtilities {
            u1: a * v - p_m,
            u2: v - p_r,
            u3: b_r - a * u,
            u4: None,
        },
        DecisionSet::MR { p_m, p_r, b_m, b_r, .. } => SegmentUtilities {
            u1: a * v - p_m,
            u2: v - p_r,
            u3: b_m - u,
            u4: Some(b_r - a * u),
        },
    })
}

/// Segment chosen by a primary and a replacement customer: `Some(j)` with
/// `j` the 1-based segment index, `None` for non-participation.
///
/// Ties go to the direct channel and to the manufacturer's subsidy; zero
/// utility still participates.
pub fn choose(utilities: &SegmentUtilities) -> (Option<u8>, Option<u8>) {
    let primary = if utilities.u1 >= utilities.u2 {
        (utilities.u1 >= 0.0).then_some(1)
    } else {
        (utilities.u2 >= 0.0).then_some(2)
    };
    let replacement = match utilities.u4 {
        None => (utilities.u3 >= 0.0).then_some(3),
        Some(u4) if utilities.u3 >= u4 => (utilities.u3 >= 0.0).then_some(3),
        Some(u4) => (u4 >= 0.0).then_some(4),
    };
    (primary, replacement)
}

#[inline]
fn alpha_guard(params: &Params) -> Result<f64> {
    let a = params.alpha();
    if a * (1.0 - a) < SINGULAR_ALPHA_PRODUCT {
        return Err(singular_alpha(a));
    }
    Ok(a)
}

#[cold]
fn singular_alpha(a: f64) -> Error {
    Error::Singularity {
        what: "demand".into(),
        pole_label: if a < 0.5 { "0" } else { "1" }.into(),
        alpha: a,
        distance: a.min(1.0 - a),
        guard: SINGULAR_ALPHA_PRODUCT,
    }
}

pub fn demand(decisions: &DecisionSet, params: &Params) -> Result<DemandProfile> {
    demand_with(decisions, params, DemandOptions::default())
}

#[inline]
pub fn demand_with(decisions: &DecisionSet, params: &Params, opts: DemandOptions) -> Result<DemandProfile> {
    let a = alpha_guard(params)?;
    let primary = |p_m: f64, p_r: f64| {
        (
            (a * p_r - p_m) / (a * (1.0 - a)),
            1.0 - (p_r - p_m) / (1.0 - a),
        )
    };
    let mut d = match *decisions {
        DecisionSet::M { p_m, p_r, b_m, .. } => {
            let (q1, q2) = primary(p_m, p_r);
            DemandProfile { q1, q2, q3: b_m, q4: None }
        }
        DecisionSet::R { p_m, p_r, b_r, .. } => {
            let (q1, q2) = primary(p_m, p_r);
            DemandProfile { q1, q2, q3: b_r / a, q4: None }
        }
        DecisionSet::MR { p_m, p_r, b_m, b_r, .. } => {
            let (q1, q2) = primary(p_m, p_r);
            let switch = (b_m - b_r) / (1.0 - a);
            let q3 = match opts.form {
                DemandForm::Adopted => switch,
                DemandForm::AsPrinted => 1.0 - switch,
            };
            let q4 = (b_r - a * b_m) / (a * (1.0 - a));
            DemandProfile { q1, q2, q3, q4: Some(q4) }
        }
    };
    if opts.clamped {
        let c = |q: f64| q.clamp(0.0, 1.0);
        d = DemandProfile {
            q1: c(d.q1),
            q2: c(d.q2),
            q3: c(d.q3),
            q4: d.q4.map(c),
        };
    }
    Ok(d)
}

pub fn profits(decisions: &DecisionSet, params: &Params) -> Result<ProfitProfile> {
    profits_with(decisions, params, DemandOptions::default())
}

#[inline]
pub fn profits_with(decisions: &DecisionSet, params: &Params, opts: DemandOptions) -> Result<ProfitProfile> {
    let q = demand_with(decisions, params, opts)?;
    Ok(profits_from_demand(decisions, params, &q))
}

/// Profits for already-computed segment masses.
#[inline]
pub fn profits_from_demand(decisions: &DecisionSet, params: &Params, q: &DemandProfile) -> ProfitProfile {
    let c_m = params.c_m();
    let reman = params.delta() + params.s();
    match *decisions {
        DecisionSet::M { p_m, p_r, w, b_m } => ProfitProfile::new(
            (p_m - c_m) * q.q1 + (w - c_m) * q.q2 + (reman + p_m - c_m - b_m) * q.q3,
            (p_r - w) * q.q2,
        ),
        DecisionSet::R { p_m, p_r, w, b_r, t } => ProfitProfile::new(
            (p_m - c_m) * q.q1 + (w - c_m) * q.q2 + (reman + w - c_m - t) * q.q3,
            (p_r - w) * q.q2 + (p_r + t - w - b_r) * q.q3,
        ),
        DecisionSet::MR { p_m, p_r, w, b_m, b_r, t } => {
            let q4 = q.q4.unwrap_or(0.0);
            ProfitProfile::new(
                (p_m - c_m) * q.q1
                    + (w - c_m) * q.q2
                    + (reman + p_m - c_m - b_m) * q.q3
                    + (reman + w - c_m - t) * q4,
                (p_r - w) * q.q2 + (p_r + t - w - b_r) * q4,
            )
        }
    }
}

/// A named inequality with its signed slack (`≥ 0` means it holds).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidityFlag {
    pub name: String,
    pub slack: f64,
    pub holds: bool,
    pub strict: bool,
}

impl ValidityFlag {
    fn new(name: &str, slack: f64) -> Self {
        ValidityFlag {
            name: name.to_string(),
            slack,
            holds: slack >= 0.0,
            strict: slack > 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidityReport {
    pub model: ModelId,
    /// Constraints that define the interior segmentation regime.
    pub constraints: Vec<ValidityFlag>,
    /// Nonnegative-margin checks; informational, not part of `interior`.
    pub margins: Vec<ValidityFlag>,
    pub interior: bool,
}

impl ValidityReport {
    pub fn flag(&self, name: &str) -> Option<&ValidityFlag> {
        self.constraints
            .iter()
            .chain(&self.margins)
            .find(|f| f.name == name)
    }

    pub fn violations(&self) -> impl Iterator<Item = &ValidityFlag> {
        self.constraints.iter().filter(|f| !f.strict)
    }
}

/// Evaluates every segmentation constraint at the adopted demand form.
pub fn validity(decisions: &DecisionSet, params: &Params) -> ValidityReport {
    validity_with(decisions, params, DemandForm::Adopted)
}

pub fn validity_with(decisions: &DecisionSet, params: &Params, form: DemandForm) -> ValidityReport {
    let a = params.alpha();
    let c_m = params.c_m();
    let reman = params.delta() + params.s();
    let unit = |name: &str, q: f64| ValidityFlag::new(name, q.min(1.0 - q));

    let mut constraints = Vec::new();
    let mut margins = Vec::new();

    let opts = DemandOptions::with_form(form);
    match demand_with(decisions, params, opts) {
        Ok(q) => {
            constraints.push(unit("q1_in_unit", q.q1));
            constraints.push(unit("q2_in_unit", q.q2));
            constraints.push(unit("q3_in_unit", q.q3));
            if let Some(q4) = q.q4 {
                constraints.push(unit("q4_in_unit", q4));
            }
        }
        Err(_) => constraints.push(ValidityFlag::new("alpha_nonsingular", -1.0)),
    }

    let p_m = decisions.get(crate::params::Field::DirectPrice).unwrap_or(0.0);
    let p_r = decisions.get(crate::params::Field::RetailPrice).unwrap_or(0.0);
    let w = decisions.get(crate::params::Field::Wholesale).unwrap_or(0.0);
    let direct_threshold = p_m / a;
    let switch_threshold = (p_r - p_m) / (1.0 - a);
    constraints.push(ValidityFlag::new("v_direct_threshold_nonneg", direct_threshold));
    constraints.push(ValidityFlag::new(
        "v_thresholds_ordered",
        switch_threshold - direct_threshold,
    ));
    constraints.push(ValidityFlag::new("v_switch_threshold_le_1", 1.0 - switch_threshold));

    margins.push(ValidityFlag::new("margin_direct", p_m - c_m));
    margins.push(ValidityFlag::new("margin_wholesale", w - c_m));
    margins.push(ValidityFlag::new("margin_retail", p_r - w));

    match *decisions {
        DecisionSet::M { b_m, .. } => {
            constraints.push(unit("u_trade_in_threshold_in_unit", b_m));
            margins.push(ValidityFlag::new("margin_trade_in_manufacturer", reman + p_m - c_m - b_m));
        }
        DecisionSet::R { b_r, t, .. } => {
            constraints.push(unit("u_trade_in_threshold_in_unit", b_r / a));
            constraints.push(ValidityFlag::new("transfer_covers_subsidy", t - b_r));
            margins.push(ValidityFlag::new("margin_trade_in_manufacturer", reman + w - c_m - t));
            margins.push(ValidityFlag::new("margin_trade_in_retailer", p_r + t - w - b_r));
        }
        DecisionSet::MR { b_m, b_r, t, .. } => {
            let switch = (b_m - b_r) / (1.0 - a);
            let retailer_cut = b_r / a;
            constraints.push(ValidityFlag::new("u_switch_threshold_nonneg", switch));
            constraints.push(ValidityFlag::new("u_thresholds_ordered", retailer_cut - switch));
            constraints.push(ValidityFlag::new("u_retailer_threshold_le_1", 1.0 - retailer_cut));
            constraints.push(ValidityFlag::new("transfer_covers_subsidy", t - b_r));
            margins.push(ValidityFlag::new("margin_trade_in_manufacturer", reman + p_m - c_m - b_m));
            margins.push(ValidityFlag::new("margin_transfer_manufacturer", reman + w - c_m - t));
            margins.push(ValidityFlag::new("margin_trade_in_retailer", p_r + t - w - b_r));
        }
    }

    let interior = constraints.iter().all(|f| f.strict);
    ValidityReport {
        model: decisions.model(),
        constraints,
        margins,
        interior,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(alpha: f64, c_m: f64, c_r: f64, s: f64) -> Params {
        Params::new(alpha, c_m, c_r, s).unwrap()
    }

    fn m(p_m: f64, p_r: f64, w: f64, b_m: f64) -> DecisionSet {
        DecisionSet::M { p_m, p_r, w, b_m }
    }

    #[test]
    fn utilities_indifference_points() {
        let p = params(0.5, 1.0, 0.5, 0.1);
        let u = utilities(&m(0.3, 0.6, 0.4, 0.2), 0.6, 0.2, &p).unwrap();
        assert!(u.u1.abs() < 1e-15);
        assert!(u.u3.abs() < 1e-15);

        let p = params(0.6, 1.0, 0.5, 0.1);
        let d = DecisionSet::MR { p_m: 0.1, p_r: 0.2, w: 0.1, b_m: 0.4, b_r: 0.3, t: 0.3 };
        let u = utilities(&d, 0.5, 0.25, &p).unwrap();
        assert!((u.u3 - 0.15).abs() < 1e-15);
        assert!((u.u4.unwrap() - 0.15).abs() < 1e-15);
        // tie goes to the manufacturer's subsidy
        assert_eq!(choose(&u).1, Some(3));
    }

    #[test]
    fn utilities_reject_out_of_range_valuations() {
        let p = params(0.5, 1.0, 0.5, 0.1);
        let err = utilities(&m(0.3, 0.6, 0.4, 0.2), 1.5, -0.1, &p).unwrap_err();
        let Error::OutOfDomain(v) = err else { panic!() };
        assert_eq!(v.len(), 2);
    }

    #[test]
    fn retailer_utility_uses_undiscounted_valuation() {
        let p = params(0.5, 1.0, 0.5, 0.1);
        let d = DecisionSet::R { p_m: 0.1, p_r: 0.3, w: 0.2, b_r: 0.2, t: 0.3 };
        let u = utilities(&d, 0.8, 0.4, &p).unwrap();
        assert!((u.u2 - 0.5).abs() < 1e-15);
        assert!((u.u3 - 0.0).abs() < 1e-15);
    }

    #[test]
    fn demand_examples() {
        let p = params(0.5, 1.0, 0.5, 0.1);
        let q = demand(&m(0.3, 0.6, 0.5, 0.2), &p).unwrap();
        assert!(q.q1.abs() < 1e-12);
        assert!((q.q2 - 0.4).abs() < 1e-12);
        assert!((q.q3 - 0.2).abs() < 1e-12);
        assert!(q.q4.is_none());

        let p = params(0.9, 0.15, 0.12, 0.02);
        let q = demand(&m(0.648387096774194, 0.723387096774194, 0.698387096774194, 0.274193548387097), &p).unwrap();
        assert!((q.q1 - 0.0295698924731183).abs() < 1e-12, "{}", q.q1);
        assert!((q.q2 - 0.25).abs() < 1e-12);
        assert!((q.q3 - 0.274194).abs() < 1e-6);

        let p = params(0.6, 1.0, 0.5, 0.2);
        let d = DecisionSet::MR { p_m: 0.5, p_r: 0.7, w: 0.6, b_m: 0.3, b_r: 0.3, t: 0.3 };
        let q = demand(&d, &p).unwrap();
        assert!(q.q3.abs() < 1e-15);
        assert!((q.q4.unwrap() - 0.5).abs() < 1e-12);
        let printed = demand_with(&d, &p, DemandOptions::with_form(DemandForm::AsPrinted)).unwrap();
        assert!((printed.q3 - 1.0).abs() < 1e-15);

        let p = params(0.5, 1.0, 0.5, 0.1);
        let d = DecisionSet::R { p_m: 0.1, p_r: 0.3, w: 0.2, b_r: 0.2, t: 0.3 };
        assert!((demand(&d, &p).unwrap().q3 - 0.4).abs() < 1e-15);
    }

    #[test]
    fn clamped_demands_stay_in_unit_interval() {
        let p = params(0.7, 1.2, 1.0, 0.1);
        let d = m(0.960606, 1.185606, 1.110606, 0.030303);
        let raw = demand(&d, &p).unwrap();
        assert!(raw.q1 < 0.0);
        let opts = DemandOptions { clamped: true, ..Default::default() };
        let c = demand_with(&d, &p, opts).unwrap();
        assert_eq!(c.q1, 0.0);
        assert_eq!(c.q2, raw.q2);
    }

    #[test]
    fn profits_at_worked_equilibrium() {
        let p = params(0.9, 0.15, 0.12, 0.02);
        let d = m(0.648387096774194, 0.723387096774194, 0.698387096774194, 0.274193548387097);
        let pi = profits(&d, &p).unwrap();
        // exact rational backward induction: 0.227016129032258, 0.00625
        assert!((pi.pi_m - 0.227016129032258).abs() < 1e-12);
        assert!((pi.pi_r - 0.00625).abs() < 1e-12);
        assert_eq!(pi.pi_s, pi.pi_m + pi.pi_r);
    }

    #[test]
    fn zero_margin_and_zero_share_profits() {
        let p = params(0.5, 1.0, 0.5, 0.1);
        // retailer margin zero on both terms
        let d = DecisionSet::R { p_m: 1.0, p_r: 1.0, w: 1.0, b_r: 0.2, t: 0.2 };
        assert!(profits(&d, &p).unwrap().pi_r.abs() < 1e-15);
        // q2 = 0 when p_r − p_m = 1 − α
        let d = m(0.1, 0.6, 0.3, 0.1);
        assert!(profits(&d, &p).unwrap().pi_r.abs() < 1e-15);
    }

    #[test]
    fn validity_examples() {
        let p = params(0.9, 0.15, 0.12, 0.02);
        let d = m(0.648387096774194, 0.723387096774194, 0.698387096774194, 0.274193548387097);
        assert!(validity(&d, &p).interior);

        let p = params(0.7, 1.2, 1.0, 0.1);
        let d = m(0.960606060606061, 1.18560606060606, 1.11060606060606, 0.0303030303030303);
        let r = validity(&d, &p);
        let q1 = r.flag("q1_in_unit").unwrap();
        assert!(!q1.holds);
        assert!((q1.slack + 0.622294).abs() < 1e-5, "{}", q1.slack);
        assert!(!r.interior);

        // boundary p_m = α p_r is not strictly interior
        let p = params(0.5, 1.0, 0.5, 0.1);
        let r = validity(&m(0.3, 0.6, 0.5, 0.2), &p);
        assert!(r.flag("q1_in_unit").unwrap().holds);
        assert!(!r.flag("q1_in_unit").unwrap().strict);
        assert!(!r.interior);
    }

    #[test]
    fn transfer_flag_only_for_retailer_collection() {
        let p = params(0.5, 1.0, 0.5, 0.1);
        assert!(validity(&m(0.2, 0.5, 0.3, 0.2), &p).flag("transfer_covers_subsidy").is_none());
        let d = DecisionSet::R { p_m: 0.2, p_r: 0.5, w: 0.3, b_r: 0.2, t: 0.1 };
        assert!(!validity(&d, &p).flag("transfer_covers_subsidy").unwrap().holds);
    }
}
