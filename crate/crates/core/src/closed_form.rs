//! Closed-form Stackelberg equilibria of the three recycling models.
//!
//! Every expression is evaluated exactly as published. The only departure is
//! the Model M retailer reaction, which uses the first-order condition of the
//! retailer's profit, `p_r = (1 − α + p_m + w)/2`; the published reaction is
//! inconsistent with the published equilibrium and endpoint values.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::market::{self, DemandForm, DemandOptions, DemandProfile, ProfitProfile, ValidityReport};
use crate::oracle::{self, MrCertificate};
use crate::params::{DecisionSet, ModelId, Params};

/// Pole of the Model R expressions (`9α − 2 = 0`).
pub const R_POLE: f64 = 2.0 / 9.0;

/// Real root in (0, 1) of the Model MR denominator `2α³ + 3α² − 17α + 4`.
pub const MR_POLE: f64 = 0.247_935_151_642_113_7;

pub const DEFAULT_GUARD: f64 = 1e-6;

pub fn mr_denominator(alpha: f64) -> f64 {
    2.0 * alpha.powi(3) + 3.0 * alpha * alpha - 17.0 * alpha + 4.0
}

/// Distance from `alpha` to the nearest pole of the model's closed forms.
pub fn singularity_distance(model: ModelId, alpha: f64) -> f64 {
    match model {
        ModelId::M => (4.0 - alpha).abs(),
        ModelId::R => (alpha - R_POLE).abs(),
        ModelId::MR => (alpha - MR_POLE).abs(),
    }
}

/// Rejects `alpha` within `guard` of the model's pole.
pub fn check_guard(model: ModelId, alpha: f64, guard: f64) -> Result<f64> {
    let distance = singularity_distance(model, alpha);
    if distance < guard {
        let pole_label = match model {
            ModelId::M => "4".to_string(),
            ModelId::R => "2/9".to_string(),
            ModelId::MR => format!("{MR_POLE:.6}"),
        };
        return Err(Error::Singularity {
            what: format!("Model {model}"),
            pole_label,
            alpha,
            distance,
            guard,
        });
    }
    Ok(distance)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ClosedForm,
    NumericOracle,
}

/// An equilibrium decision set with its recomputed market outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equilibrium {
    pub model: ModelId,
    pub params: Params,
    pub provenance: Provenance,
    pub decisions: DecisionSet,
    /// Demand form used for `demand` and `profit` (matters only for MR).
    pub demand_form: DemandForm,
    pub demand: DemandProfile,
    pub profit: ProfitProfile,
    pub validity: ValidityReport,
    pub singularity_distance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mr_certificate: Option<MrCertificate>,
}

impl Equilibrium {
    pub fn from_decisions(
        params: &Params,
        decisions: DecisionSet,
        provenance: Provenance,
        demand_form: DemandForm,
    ) -> Result<Self> {
        let model = decisions.model();
        let opts = DemandOptions::with_form(demand_form);
        let demand = market::demand_with(&decisions, params, opts)?;
        let profit = market::profits_from_demand(&decisions, params, &demand);
        Ok(Equilibrium {
            model,
            params: *params,
            provenance,
            decisions,
            demand_form,
            demand,
            profit,
            validity: market::validity_with(&decisions, params, demand_form),
            singularity_distance: singularity_distance(model, params.alpha()),
            mr_certificate: None,
        })
    }
}

/// Retailer's best indirect-channel price in Model M for given `(w, p_m)`.
pub fn retailer_reaction_m(w: f64, p_m: f64, params: &Params) -> f64 {
    (1.0 - params.alpha() + p_m + w) / 2.0
}

/// Aggregation terms shared by the Model MR expressions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MrHelpers {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
}

pub fn mr_helpers(params: &Params) -> MrHelpers {
    mr_helpers_at(params.alpha(), params)
}

/// [`mr_helpers`] with `alpha` overriding `params.alpha()`.
pub fn mr_helpers_at(a: f64, params: &Params) -> MrHelpers {
    let c = params.c_m();
    let d = params.delta();
    let s = params.s();
    let (a2, a3) = (a * a, a * a * a);
    MrHelpers {
        x1: 3.0 * d * a - 2.0 * c + 7.0 * a * c + 3.0 * a * s - 5.0 * d * a2 + 2.0 * d * a3 + a2 * c
            - 2.0 * a3 * c
            - 5.0 * a2 * s
            + 2.0 * a3,
        x2: 2.0 * d - c + 2.0 * s - 10.0 * d * a + 5.0 * a * c,
        x3: -10.0 * a * s + 4.0 * d * a2 - 2.0 * a2 * c + 4.0 * a2 * s,
    }
}

/// Evaluates the model's closed form at `alpha`, ignoring `params.alpha()`
/// and every guard. `alpha = 0` and `alpha = 1` give the endpoint limits.
pub fn closed_form_at(model: ModelId, a: f64, params: &Params) -> DecisionSet {
    let c = params.c_m();
    let d = params.delta();
    let s = params.s();
    let a2 = a * a;
    match model {
        ModelId::M => {
            let den = a - 4.0;
            DecisionSet::M {
                p_m: -(2.0 * a + 2.0 * c + d * a - a * c + a * s) / den,
                w: -(4.0 * c - a + 2.0 * d * a - 2.0 * a * c + 2.0 * a * s + a2 + 4.0) / (2.0 * den),
                b_m: -(2.0 * d + a - c + 2.0 * s) / den,
                p_r: -(8.0 * c - 7.0 * a + 4.0 * d * a - 4.0 * a * c + 4.0 * a * s + 3.0 * a2 + 12.0)
                    / (4.0 * den),
            }
        }
        ModelId::R => {
            let den = 9.0 * a - 2.0;
            DecisionSet::R {
                p_m: (2.0 * d * a - 2.0 * c - a + 8.0 * a * c + 2.0 * a * s + 9.0 * a2) / (2.0 * den),
                w: (5.0 * a - c + d * a + 4.0 * a * c + a * s - 1.0) / den,
                b_r: a * (2.0 * d - c + 2.0 * s + 1.0) / den,
                p_r: (4.0 * d + 29.0 * a - 6.0 * c + 4.0 * s + 18.0 * a * c - 9.0 * a2 - 4.0) / (4.0 * den),
                t: -(4.0 * d + a - 2.0 * c + 4.0 * s - 20.0 * d * a + 10.0 * a * c - 20.0 * a * s - 9.0 * a2)
                    / (4.0 * den),
            }
        }
        ModelId::MR => {
            let den = mr_denominator(a);
            let a3 = a2 * a;
            let a4 = a3 * a;
            let MrHelpers { x1, x2, x3 } = mr_helpers_at(a, params);
            DecisionSet::MR {
                p_m: -(x1 - 2.0 * a + 12.0 * a2 - 6.0 * a3) / den,
                w: -(17.0 * a + 2.0 * x1 + 4.0 * a2 - 11.0 * a3 + 2.0 * a4 - 4.0) / (2.0 * den),
                b_m: (2.0 * x2 + x3 - 19.0 * a + 8.0 * d * a - 18.0 * a * c + 18.0 * a * s - 4.0 * a2
                    + 11.0 * a3
                    + 4.0)
                    / (2.0 * den),
                b_r: a * (5.0 * a + x2 - x3 + 3.0 * a2 - 4.0 * a3) / den,
                p_r: (4.0 * d + 23.0 * a + 4.0 * s + x1 + d * a - 5.0 * a2 - 9.0 * a3 + 3.0 * a4 - 4.0)
                    / (2.0 * den),
                t: (a + 1.0) * (a + x2 + x3 - 6.0 * a2 + 3.0 * a3) / den,
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Endpoint {
    Zero,
    One,
}

impl Endpoint {
    pub fn alpha(self) -> f64 {
        match self {
            Endpoint::Zero => 0.0,
            Endpoint::One => 1.0,
        }
    }
}

/// Limit of the closed form as `alpha` tends to an endpoint of (0, 1).
/// All denominators are nonzero at both endpoints, so the limit is the
/// continuous extension.
pub fn limit(model: ModelId, params: &Params, endpoint: Endpoint) -> DecisionSet {
    closed_form_at(model, endpoint.alpha(), params)
}

pub fn equilibrium_m(params: &Params) -> Equilibrium {
    let d = closed_form_at(ModelId::M, params.alpha(), params);
    Equilibrium::from_decisions(params, d, Provenance::ClosedForm, DemandForm::Adopted)
        .expect("validated params keep alpha away from 0 and 1")
}

pub fn equilibrium_r(params: &Params) -> Result<Equilibrium> {
    equilibrium_r_guarded(params, DEFAULT_GUARD)
}

pub fn equilibrium_r_guarded(params: &Params, guard: f64) -> Result<Equilibrium> {
    check_guard(ModelId::R, params.alpha(), guard)?;
    let d = closed_form_at(ModelId::R, params.alpha(), params);
    Equilibrium::from_decisions(params, d, Provenance::ClosedForm, DemandForm::Adopted)
}

pub fn equilibrium_mr(params: &Params) -> Result<Equilibrium> {
    equilibrium_mr_guarded(params, DEFAULT_GUARD)
}

/// Model MR closed form. The outcome is reported under the adopted demand
/// form; `mr_certificate` records under which demand form, if any, the
/// printed values are a stationary point of both players' problems.
pub fn equilibrium_mr_guarded(params: &Params, guard: f64) -> Result<Equilibrium> {
    check_guard(ModelId::MR, params.alpha(), guard)?;
    let d = closed_form_at(ModelId::MR, params.alpha(), params);
    let mut eq = Equilibrium::from_decisions(params, d, Provenance::ClosedForm, DemandForm::Adopted)?;
    eq.mr_certificate = Some(oracle::certify_mr(&d, params)?);
    Ok(eq)
}

pub fn equilibrium(model: ModelId, params: &Params) -> Result<Equilibrium> {
    equilibrium_guarded(model, params, DEFAULT_GUARD)
}

pub fn equilibrium_guarded(model: ModelId, params: &Params, guard: f64) -> Result<Equilibrium> {
    match model {
        ModelId::M => Ok(equilibrium_m(params)),
        ModelId::R => equilibrium_r_guarded(params, guard),
        ModelId::MR => equilibrium_mr_guarded(params, guard),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Field;

    fn params(alpha: f64, c_m: f64, c_r: f64, s: f64) -> Params {
        Params::new(alpha, c_m, c_r, s).unwrap()
    }

    fn assert_values(d: &DecisionSet, expected: &[f64], tol: f64) {
        for ((f, got), want) in d.iter().zip(expected) {
            assert!((got - want).abs() < tol, "{f}: got {got}, want {want}");
        }
    }

    #[test]
    fn mr_pole_is_the_cubic_root() {
        assert!(mr_denominator(MR_POLE).abs() < 1e-14);
        assert_eq!(mr_denominator(0.0), 4.0);
        assert!((mr_denominator(0.35) + 1.49675).abs() < 1e-12);
        assert!(mr_denominator(0.24) > 0.0 && mr_denominator(0.25) < 0.0);
    }

    #[test]
    fn reaction_examples() {
        let p = params(0.5, 1.0, 0.5, 0.1);
        assert_eq!(retailer_reaction_m(0.0, 0.0, &p), 0.25);
        let p = params(0.9, 0.15, 0.12, 0.02);
        let r = retailer_reaction_m(0.698387096774194, 0.648387096774194, &p);
        assert!((r - 0.723387096774194).abs() < 1e-12);
    }

    #[test]
    fn reaction_reproduces_zero_endpoint() {
        let p = params(0.5, 0.8, 0.3, 0.2);
        let small = p.with_alpha(1e-13).unwrap();
        let w0 = (p.c_m() + 1.0) / 2.0;
        let pm0 = p.c_m() / 2.0;
        let got = retailer_reaction_m(w0, pm0, &small);
        assert!((got - (2.0 * p.c_m() + 3.0) / 4.0).abs() < 1e-12);
    }

    // Expected values below come from exact rational backward induction
    // (tests/golden/derive.py), not from these formulas.
    #[test]
    fn model_m_examples() {
        let eq = equilibrium_m(&params(0.9, 0.15, 0.12, 0.02));
        assert_values(
            &eq.decisions,
            &[0.648387096774194, 0.723387096774194, 0.698387096774194, 0.274193548387097],
            1e-12,
        );
        assert!(eq.validity.interior);
        assert!((eq.demand.q1 - 0.0295698924731183).abs() < 1e-9);

        let eq = equilibrium_m(&params(0.7, 1.2, 1.0, 0.1));
        assert_values(
            &eq.decisions,
            &[0.960606060606061, 1.18560606060606, 1.11060606060606, 0.0303030303030303],
            1e-12,
        );
        assert!(!eq.validity.flag("q1_in_unit").unwrap().holds);
        assert_eq!(eq.provenance, Provenance::ClosedForm);
    }

    #[test]
    fn model_m_zero_limits() {
        let p = params(0.3, 0.9, 0.4, 0.15);
        let l = limit(ModelId::M, &p, Endpoint::Zero);
        let (c, d, s) = (p.c_m(), p.delta(), p.s());
        assert_values(
            &l,
            &[c / 2.0, (2.0 * c + 3.0) / 4.0, (c + 1.0) / 2.0, (2.0 * d - c + 2.0 * s) / 4.0],
            1e-12,
        );
    }

    #[test]
    fn model_r_examples() {
        let eq = equilibrium_r(&params(0.65, 1.5, 0.7, 0.2)).unwrap();
        assert_values(
            &eq.decisions,
            &[1.20162337662338, 1.53230519480519, 1.37662337662338, 0.253246753246753, 0.350811688311688],
            1e-12,
        );
        assert!(eq.validity.flag("transfer_covers_subsidy").unwrap().holds);
        assert!(!eq.validity.flag("q1_in_unit").unwrap().holds);
    }

    #[test]
    fn model_r_pole_is_rejected() {
        let err = equilibrium_r(&params(2.0 / 9.0, 1.5, 0.7, 0.2)).unwrap_err();
        match err {
            Error::Singularity { pole_label, distance, .. } => {
                assert_eq!(pole_label, "2/9");
                assert!(distance < 1e-15);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(equilibrium_r(&params(0.2222222, 1.5, 0.7, 0.2)).is_err());
        assert!(equilibrium_r_guarded(&params(0.2222222, 1.5, 0.7, 0.2), 1e-9).is_ok());
    }

    #[test]
    fn model_r_zero_limits_of_retailer_subsidy_and_direct_price() {
        let p = params(0.5, 1.1, 0.4, 0.2);
        let l = limit(ModelId::R, &p, Endpoint::Zero);
        assert_eq!(l.get(Field::RetailerSubsidy), Some(0.0));
        assert!((l.get(Field::DirectPrice).unwrap() - p.c_m() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn mr_helpers_limits_and_golden() {
        let p = params(0.6, 1.0, 0.5, 0.2);
        let zero = mr_helpers_at(0.0, &p);
        assert_eq!(zero.x1, -2.0 * p.c_m());
        assert!((zero.x2 - (2.0 * p.delta() - p.c_m() + 2.0 * p.s())).abs() < 1e-15);
        assert_eq!(zero.x3, 0.0);

        let h = mr_helpers(&p);
        assert!((h.x1 - 2.776).abs() < 1e-12, "{}", h.x1);
        assert!((h.x2 - 0.4).abs() < 1e-12, "{}", h.x2);
        assert!((h.x3 + 0.912).abs() < 1e-12, "{}", h.x3);
    }

    #[test]
    fn mr_printed_values() {
        let eq = equilibrium_mr(&params(0.6, 1.0, 0.5, 0.2)).unwrap();
        assert_values(
            &eq.decisions,
            &[0.981228668941980, -1.31407849829352, 1.18122866894198, 1.36689419795222, -0.579522184300341, 0.486006825938567],
            1e-9,
        );
        let cert = eq.mr_certificate.as_ref().unwrap();
        assert_eq!(cert.variants.len(), 2);
        assert!(cert.certified.is_none());
    }

    #[test]
    fn mr_pole_is_rejected() {
        let p = params(MR_POLE, 1.0, 0.5, 0.2);
        assert!(matches!(equilibrium_mr(&p), Err(Error::Singularity { .. })));
        assert!(equilibrium_mr(&params(MR_POLE + 2e-6, 1.0, 0.5, 0.2)).is_ok());
    }
}
