//! Numerical backward induction, second-order checks and choice simulation.
//!
//! Nothing here reads the closed forms. The follower's problem is solved by
//! Newton steps on finite-difference derivatives of the retailer's profit,
//! and the leader's reduced profit is maximized by [`GridSearch`].

mod fd;
mod montecarlo;
mod search;
mod soc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub use montecarlo::{monte_carlo_demand, monte_carlo_demand_stream, MonteCarloDemand};
pub use search::{GridSearch, SearchOutcome};
pub use soc::{check_soc, check_soc_with, SocReport, NEGATIVE_DEFINITE_THRESHOLD};

use crate::closed_form::{self, Equilibrium, Provenance};
use crate::error::{Error, Result};
use crate::market::{self, DemandForm, DemandOptions};
use crate::params::{DecisionSet, Field, ModelId, Params};

/// Scaled gradient size below which a point counts as stationary.
pub const STATIONARITY_TOL: f64 = 1e-6;

/// Denominator floor for relative deviations, so variables whose
/// equilibrium value is near zero are compared on an absolute scale.
pub const RELATIVE_FLOOR: f64 = 1e-3;

pub fn leader_fields(model: ModelId) -> &'static [Field] {
    use Field::*;
    match model {
        ModelId::M => &[DirectPrice, Wholesale, ManufacturerSubsidy],
        ModelId::R => &[DirectPrice, Wholesale, Transfer],
        ModelId::MR => &[DirectPrice, Wholesale, ManufacturerSubsidy, Transfer],
    }
}

pub fn follower_fields(model: ModelId) -> &'static [Field] {
    use Field::*;
    match model {
        ModelId::M => &[RetailPrice],
        ModelId::R | ModelId::MR => &[RetailPrice, RetailerSubsidy],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleConfig {
    pub follower_tol: f64,
    pub leader_tol: f64,
    /// Search interval for `p_m`, `p_r`, `w`.
    pub price_box: (f64, f64),
    /// Search interval for `b_m`, `b_r`, `t`.
    pub subsidy_box: (f64, f64),
    /// Minimum number of local refinement rounds.
    pub refinement_rounds: usize,
    /// Points per axis of the opening global grid.
    pub grid_points_per_round: usize,
    /// Points per axis of each local refinement grid.
    pub local_grid_points: usize,
    pub max_rounds: usize,
    pub seed: u64,
    pub mc_samples: usize,
    pub demand: DemandOptions,
    /// Random starts used by [`multi_start`].
    pub starts: usize,
    /// Largest spread between multi-start optima still counted as one point.
    pub uniqueness_tol: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            follower_tol: 1e-10,
            leader_tol: 1e-8,
            price_box: (-1.0, 3.0),
            subsidy_box: (-1.0, 3.0),
            refinement_rounds: 6,
            grid_points_per_round: 33,
            local_grid_points: 5,
            max_rounds: 500,
            seed: 0,
            mc_samples: 1_000_000,
            demand: DemandOptions::default(),
            starts: 8,
            uniqueness_tol: 1e-6,
        }
    }
}

impl OracleConfig {
    pub fn with_form(mut self, form: DemandForm) -> Self {
        self.demand.form = form;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.follower_tol > 0.0) || !(self.leader_tol > 0.0) || !(self.uniqueness_tol > 0.0) {
            bad.push("tolerances must be positive");
        }
        if self.grid_points_per_round < 5 || self.grid_points_per_round % 2 == 0 {
            bad.push("grid_points_per_round must be odd and >= 5");
        }
        if self.local_grid_points < 3 || self.local_grid_points % 2 == 0 {
            bad.push("local_grid_points must be odd and >= 3");
        }
        if self.refinement_rounds < 1 {
            bad.push("refinement_rounds must be >= 1");
        }
        if !(self.price_box.0 < self.price_box.1) || !(self.subsidy_box.0 < self.subsidy_box.1) {
            bad.push("search boxes must have lo < hi");
        }
        if self.mc_samples < 1 {
            bad.push("mc_samples must be >= 1");
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad.join("; ")))
        }
    }

    pub fn search_box(&self, field: Field) -> (f64, f64) {
        if field.is_subsidy_like() {
            self.subsidy_box
        } else {
            self.price_box
        }
    }
}

#[inline]
fn with_values(base: &DecisionSet, fields: &[Field], values: &[f64]) -> DecisionSet {
    let mut d = *base;
    for (f, v) in fields.iter().zip(values) {
        d.set(*f, *v).expect("field belongs to the model");
    }
    d
}

fn values_of(d: &DecisionSet, fields: &[Field]) -> Vec<f64> {
    fields.iter().map(|f| d.get(*f).expect("field belongs to the model")).collect()
}

#[inline]
fn retailer_profit(d: &DecisionSet, params: &Params, opts: DemandOptions) -> Result<f64> {
    Ok(market::profits_with(d, params, opts)?.pi_r)
}

#[inline]
fn manufacturer_profit(d: &DecisionSet, params: &Params, opts: DemandOptions) -> Result<f64> {
    Ok(market::profits_with(d, params, opts)?.pi_m)
}

/// Step for follower derivatives; central differences are exact for the
/// quadratic retailer profit up to rounding.
const FOLLOWER_STEP: f64 = 1e-3;
const NEWTON_ITERATIONS: usize = 20;

/// Retailer's optimal response to the leader variables in `leader`.
///
/// Returns `leader` with the follower fields replaced. In unclamped mode the
/// profit Hessian must be negative definite, otherwise `NonConcave` names the
/// offending coordinate. Clamped demands make the profit piecewise, so that
/// mode uses golden-section coordinate ascent over the search box instead.
pub fn best_response_retailer(leader: &DecisionSet, params: &Params, cfg: &OracleConfig) -> Result<DecisionSet> {
    Follower::new(params, cfg).solve(leader)
}

/// Follower solver that keeps its last Hessian between calls, so repeated
/// solves take chord-Newton steps. A Hessian is recomputed, and concavity
/// rechecked, whenever the cached one stops converging quickly.
struct Follower<'a> {
    params: &'a Params,
    cfg: &'a OracleConfig,
    hess: Option<[[f64; 2]; 2]>,
}

impl<'a> Follower<'a> {
    fn new(params: &'a Params, cfg: &'a OracleConfig) -> Self {
        Follower { params, cfg, hess: None }
    }

    fn solve(&mut self, leader: &DecisionSet) -> Result<DecisionSet> {
        let fields = follower_fields(leader.model());
        let k = fields.len();
        let (params, opts) = (self.params, self.cfg.demand);
        let mut y = [0.0; 2];
        for (yi, f) in y.iter_mut().zip(fields) {
            let v = leader.get(*f).expect("field belongs to the model");
            *yi = if v.is_finite() { v } else { 0.0 };
        }
        let mut g = |y: &[f64]| retailer_profit(&with_values(leader, fields, y), params, opts);

        if opts.clamped {
            golden_coordinate_ascent(&mut g, &mut y[..k], fields, self.cfg)?;
            return Ok(with_values(leader, fields, &y[..k]));
        }

        let mut fresh = self.hess.is_none();
        let mut grad = if fresh {
            let (grad, hess) = fd::gradient_hessian_small(&mut g, &y[..k], FOLLOWER_STEP)?;
            self.hess = Some(check_concave(hess, fields)?);
            grad
        } else {
            fd::gradient_small(&mut g, &y[..k], FOLLOWER_STEP)?
        };
        for it in 0..NEWTON_ITERATIONS {
            let step = fd::solve_2(self.hess.as_ref().expect("set above"), &grad, k);
            let mut size = 0.0f64;
            for i in 0..k {
                y[i] -= step[i];
                size = size.max(step[i].abs());
            }
            if size <= self.cfg.follower_tol {
                break;
            }
            if it >= 2 && !fresh {
                let (g2, hess) = fd::gradient_hessian_small(&mut g, &y[..k], FOLLOWER_STEP)?;
                self.hess = Some(check_concave(hess, fields)?);
                grad = g2;
                fresh = true;
            } else {
                grad = fd::gradient_small(&mut g, &y[..k], FOLLOWER_STEP)?;
            }
        }
        Ok(with_values(leader, fields, &y[..k]))
    }
}

fn check_concave(hess: [[f64; 2]; 2], fields: &[Field]) -> Result<[[f64; 2]; 2]> {
    for (i, f) in fields.iter().enumerate() {
        if hess[i][i] >= 0.0 {
            return Err(Error::NonConcave { coordinate: f.name().into(), curvature: hess[i][i] });
        }
    }
    if fields.len() == 2 {
        let det = hess[0][0] * hess[1][1] - hess[0][1] * hess[1][0];
        if det <= 0.0 {
            let tr = hess[0][0] + hess[1][1];
            let top = 0.5 * (tr + (tr * tr - 4.0 * det).max(0.0).sqrt());
            return Err(Error::NonConcave { coordinate: "p_r,b_r".into(), curvature: top });
        }
    }
    Ok(hess)
}

fn golden_coordinate_ascent<G>(g: &mut G, y: &mut [f64], fields: &[Field], cfg: &OracleConfig) -> Result<()>
where
    G: FnMut(&[f64]) -> Result<f64>,
{
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    for _ in 0..200 {
        let mut moved = 0.0f64;
        for (i, f) in fields.iter().enumerate() {
            let (mut lo, mut hi) = cfg.search_box(*f);
            let mut at = |v: f64, y: &mut [f64]| -> Result<f64> {
                let old = y[i];
                y[i] = v;
                let r = g(y);
                y[i] = old;
                r
            };
            let mut x1 = hi - INV_PHI * (hi - lo);
            let mut x2 = lo + INV_PHI * (hi - lo);
            let mut f1 = at(x1, y)?;
            let mut f2 = at(x2, y)?;
            while hi - lo > cfg.follower_tol {
                if f1 >= f2 {
                    hi = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = hi - INV_PHI * (hi - lo);
                    f1 = at(x1, y)?;
                } else {
                    lo = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = lo + INV_PHI * (hi - lo);
                    f2 = at(x2, y)?;
                }
            }
            let best = 0.5 * (lo + hi);
            if at(best, y)? >= at(y[i], y)? {
                moved = moved.max((best - y[i]).abs());
                y[i] = best;
            }
        }
        if moved <= cfg.follower_tol {
            return Ok(());
        }
    }
    Ok(())
}

fn leader_search(model: ModelId, cfg: &OracleConfig) -> GridSearch {
    let boxes: Vec<(f64, f64)> = leader_fields(model).iter().map(|f| cfg.search_box(*f)).collect();
    GridSearch {
        lo: boxes.iter().map(|b| b.0).collect(),
        hi: boxes.iter().map(|b| b.1).collect(),
        global_points: cfg.grid_points_per_round,
        local_points: cfg.local_grid_points,
        min_rounds: cfg.refinement_rounds,
        max_rounds: cfg.max_rounds,
        tol: cfg.leader_tol,
    }
}

/// Leader profit with the follower at its best response.
pub fn reduced_leader_profit(model: ModelId, x: &[f64], params: &Params, cfg: &OracleConfig) -> Result<f64> {
    reduced_with(&mut Follower::new(params, cfg), model, x)
}

fn reduced_with(follower: &mut Follower<'_>, model: ModelId, x: &[f64]) -> Result<f64> {
    let d = with_values(&DecisionSet::zeros(model), leader_fields(model), x);
    let d = follower.solve(&d)?;
    manufacturer_profit(&d, follower.params, follower.cfg.demand)
}

/// Stackelberg equilibrium by backward induction, starting from the global grid.
pub fn solve_stackelberg_numeric(model: ModelId, params: &Params, cfg: &OracleConfig) -> Result<Equilibrium> {
    solve_stackelberg_from(model, params, cfg, None)
}

/// As [`solve_stackelberg_numeric`], refining from `start` (leader variables
/// in [`leader_fields`] order) instead of a global grid when given.
pub fn solve_stackelberg_from(
    model: ModelId,
    params: &Params,
    cfg: &OracleConfig,
    start: Option<&[f64]>,
) -> Result<Equilibrium> {
    cfg.validate()?;
    if model != ModelId::M {
        closed_form::check_guard(model, params.alpha(), closed_form::DEFAULT_GUARD)?;
    }
    let search = leader_search(model, cfg);
    let mut follower = Follower::new(params, cfg);
    let out = search.maximize(|x| reduced_with(&mut follower, model, x), start)?;
    let fields = leader_fields(model);
    for (i, f) in fields.iter().enumerate() {
        let x = out.x[i];
        if x - search.lo[i] <= cfg.leader_tol || search.hi[i] - x <= cfg.leader_tol {
            return Err(Error::BoxBoundary { variable: *f, value: x });
        }
    }
    let d = with_values(&DecisionSet::zeros(model), fields, &out.x);
    let d = best_response_retailer(&d, params, cfg)?;
    Equilibrium::from_decisions(params, d, Provenance::NumericOracle, cfg.demand.form)
}

/// `|x − y| / max(|y|, floor)`.
pub fn relative_deviation(x: f64, y: f64, floor: f64) -> f64 {
    (x - y).abs() / y.abs().max(floor)
}

/// Largest [`relative_deviation`] of `got` from `reference` over the shared
/// fields, with the field where it occurs.
pub fn max_relative_deviation(got: &DecisionSet, reference: &DecisionSet) -> Result<(Field, f64)> {
    if got.model() != reference.model() {
        return Err(Error::ModelMismatch { expected: reference.model(), found: got.model() });
    }
    let mut worst = (Field::DirectPrice, 0.0);
    for ((f, x), (_, y)) in got.iter().zip(reference.iter()) {
        let r = relative_deviation(x, y, RELATIVE_FLOOR);
        if !(r <= worst.1) {
            worst = (f, r);
        }
    }
    Ok(worst)
}

/// First-order conditions at a decision set, under one demand form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationarityReport {
    pub form: DemandForm,
    /// `∂Π_r` along the follower fields.
    pub follower_gradient: Vec<f64>,
    /// Total derivative of the leader's reduced profit; empty when the
    /// follower problem is not concave.
    pub leader_gradient: Vec<f64>,
    pub follower_concave: bool,
    /// Largest gradient entry divided by `max(1, |Π|)` of its owner.
    pub scaled_residual: f64,
    pub stationary: bool,
}

const STATIONARITY_STEP: f64 = 1e-4;

pub fn stationarity(decisions: &DecisionSet, params: &Params, form: DemandForm) -> Result<StationarityReport> {
    let cfg = OracleConfig::default().with_form(form);
    let model = decisions.model();
    let opts = cfg.demand;
    let profit = market::profits_with(decisions, params, opts)?;

    let ff = follower_fields(model);
    let y = values_of(decisions, ff);
    let follower_gradient = fd::gradient(
        &mut |y: &[f64]| retailer_profit(&with_values(decisions, ff, y), params, opts),
        &y,
        STATIONARITY_STEP,
    )?;
    let fr = follower_gradient.iter().fold(0.0f64, |m, g| m.max(g.abs())) / profit.pi_r.abs().max(1.0);

    let lf = leader_fields(model);
    let x = values_of(decisions, lf);
    let (leader_gradient, follower_concave) = match fd::gradient(
        &mut |x: &[f64]| reduced_leader_profit(model, x, params, &cfg),
        &x,
        STATIONARITY_STEP,
    ) {
        Ok(g) => (g, true),
        Err(Error::NonConcave { .. }) => (Vec::new(), false),
        Err(e) => return Err(e),
    };
    let lr = leader_gradient.iter().fold(0.0f64, |m, g| m.max(g.abs())) / profit.pi_m.abs().max(1.0);
    let scaled_residual = if follower_concave { fr.max(lr) } else { f64::INFINITY };
    Ok(StationarityReport {
        form,
        follower_gradient,
        leader_gradient,
        follower_concave,
        scaled_residual,
        stationary: follower_concave && scaled_residual <= STATIONARITY_TOL,
    })
}

/// Which MR demand form, if exactly one, makes a decision set stationary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MrCertificate {
    pub variants: Vec<StationarityReport>,
    pub certified: Option<DemandForm>,
}

pub fn certify_mr(decisions: &DecisionSet, params: &Params) -> Result<MrCertificate> {
    if decisions.model() != ModelId::MR {
        return Err(Error::ModelMismatch { expected: ModelId::MR, found: decisions.model() });
    }
    let variants = DemandForm::BOTH
        .iter()
        .map(|f| stationarity(decisions, params, *f))
        .collect::<Result<Vec<_>>>()?;
    let mut stationary = variants.iter().filter(|v| v.stationary);
    let certified = match (stationary.next(), stationary.next()) {
        (Some(v), None) => Some(v.form),
        _ => None,
    };
    Ok(MrCertificate { variants, certified })
}

/// Oracle run for one MR demand form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantRun {
    pub form: DemandForm,
    pub oracle: Option<DecisionSet>,
    pub error: Option<String>,
    /// Deviation of the printed closed form from this run's optimum.
    pub max_relative_deviation: Option<f64>,
    pub worst_field: Option<Field>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum MrVerdict {
    Certified { form: DemandForm },
    Disagreement { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MrAdjudication {
    pub params: Params,
    pub closed_form: DecisionSet,
    pub certificate: MrCertificate,
    pub runs: Vec<VariantRun>,
    pub verdict: MrVerdict,
}

/// Compares the printed MR equilibrium with the oracle under both demand
/// forms. A form is certified only when the printed values are stationary
/// under it and its oracle optimum agrees with them within `tol`.
pub fn adjudicate_mr(params: &Params, cfg: &OracleConfig, tol: f64) -> Result<MrAdjudication> {
    let eq = closed_form::equilibrium_mr(params)?;
    let certificate = eq.mr_certificate.clone().expect("MR equilibria carry a certificate");
    let mut runs = Vec::new();
    for form in DemandForm::BOTH {
        let run = match solve_stackelberg_numeric(ModelId::MR, params, &cfg.clone().with_form(form)) {
            Ok(o) => {
                let (f, dev) = max_relative_deviation(&eq.decisions, &o.decisions)?;
                VariantRun {
                    form,
                    oracle: Some(o.decisions),
                    error: None,
                    max_relative_deviation: Some(dev),
                    worst_field: Some(f),
                }
            }
            Err(e @ (Error::NonConcave { .. } | Error::BoxBoundary { .. } | Error::NotConverged { .. })) => VariantRun {
                form,
                oracle: None,
                error: Some(e.to_string()),
                max_relative_deviation: None,
                worst_field: None,
            },
            Err(e) => return Err(e),
        };
        runs.push(run);
    }
    let verdict = match certificate.certified {
        Some(form) => {
            let run = runs.iter().find(|r| r.form == form).expect("both forms were run");
            match run.max_relative_deviation {
                Some(d) if d <= tol => MrVerdict::Certified { form },
                Some(d) => MrVerdict::Disagreement {
                    reason: format!("stationary under {} but the oracle optimum deviates by {d:e}", form.as_str()),
                },
                None => MrVerdict::Disagreement {
                    reason: format!(
                        "stationary under {} but the oracle failed: {}",
                        form.as_str(),
                        run.error.as_deref().unwrap_or("unknown")
                    ),
                },
            }
        }
        None => {
            let parts: Vec<String> = certificate
                .variants
                .iter()
                .zip(&runs)
                .map(|(s, r)| {
                    let oracle = match (r.max_relative_deviation, &r.error) {
                        (Some(d), _) => format!("oracle deviation {d:.3e}"),
                        (None, Some(e)) => format!("oracle: {e}"),
                        _ => "oracle: no result".into(),
                    };
                    format!("{}: scaled residual {:.3e}, {oracle}", s.form.as_str(), s.scaled_residual)
                })
                .collect();
            MrVerdict::Disagreement {
                reason: format!("printed values are stationary under neither demand form ({})", parts.join("; ")),
            }
        }
    };
    Ok(MrAdjudication { params: *params, closed_form: eq.decisions, certificate, runs, verdict })
}

/// Oracle optima from `cfg.starts` random starting points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiStart {
    pub optima: Vec<DecisionSet>,
    /// Largest absolute difference between any optimum and the first.
    pub spread: f64,
    pub agree: bool,
}

pub fn multi_start(model: ModelId, params: &Params, cfg: &OracleConfig) -> Result<MultiStart> {
    let fields = leader_fields(model);
    let mut optima = Vec::with_capacity(cfg.starts);
    for k in 0..cfg.starts {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(k as u64);
        let start: Vec<f64> = fields
            .iter()
            .map(|f| {
                let (lo, hi) = cfg.search_box(*f);
                rng.gen_range(lo..hi)
            })
            .collect();
        optima.push(solve_stackelberg_from(model, params, cfg, Some(&start))?.decisions);
    }
    let spread = optima
        .iter()
        .flat_map(|o| o.values().into_iter().zip(optima[0].values()).map(|(a, b)| (a - b).abs()))
        .fold(0.0f64, f64::max);
    Ok(MultiStart { optima, spread, agree: spread <= cfg.uniqueness_tol })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::{equilibrium_m, equilibrium_r, retailer_reaction_m};

    fn params(alpha: f64, c_m: f64, c_r: f64, s: f64) -> Params {
        Params::new(alpha, c_m, c_r, s).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(OracleConfig::default().validate().is_ok());
        let cfg = OracleConfig { grid_points_per_round: 4, ..Default::default() };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let cfg = OracleConfig { leader_tol: 0.0, ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn follower_matches_reaction_m() {
        let p = params(0.9, 0.15, 0.12, 0.02);
        let leader = DecisionSet::M { p_m: 0.648387, p_r: 0.0, w: 0.698387, b_m: 0.274194 };
        let d = best_response_retailer(&leader, &p, &OracleConfig::default()).unwrap();
        let want = retailer_reaction_m(0.698387, 0.648387, &p);
        assert!((d.get(Field::RetailPrice).unwrap() - want).abs() < 1e-8);
        assert!((want - 0.723387).abs() < 1e-12);
    }

    #[test]
    fn follower_at_equal_prices() {
        let p = params(0.5, 1.0, 0.4, 0.1);
        for pm in [0.0, 0.3, 0.8] {
            let leader = DecisionSet::M { p_m: pm, p_r: 5.0, w: pm, b_m: 0.1 };
            let d = best_response_retailer(&leader, &p, &OracleConfig::default()).unwrap();
            assert!((d.get(Field::RetailPrice).unwrap() - (0.5 + 2.0 * pm) / 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn follower_matches_model_r_closed_form() {
        let p = params(0.65, 1.5, 0.7, 0.2);
        let eq = equilibrium_r(&p).unwrap();
        let d = best_response_retailer(&eq.decisions, &p, &OracleConfig::default()).unwrap();
        assert!((d.get(Field::RetailPrice).unwrap() - 1.532305194805195).abs() < 1e-6);
        assert!((d.get(Field::RetailerSubsidy).unwrap() - 0.253246753246753).abs() < 1e-6);
    }

    #[test]
    fn follower_rejects_convex_trade_in_region() {
        // The retailer Hessian in (p_r, b_r) is indefinite below α = 1/4.
        let p = params(0.2, 1.0, 0.5, 0.2);
        let leader = DecisionSet::zeros(ModelId::MR);
        let err = best_response_retailer(&leader, &p, &OracleConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NonConcave { .. }), "{err:?}");
    }

    #[test]
    fn clamped_follower_stays_in_box() {
        let p = params(0.9, 0.15, 0.12, 0.02);
        let mut cfg = OracleConfig::default();
        cfg.demand.clamped = true;
        let leader = DecisionSet::M { p_m: 0.648387, p_r: 0.0, w: 0.698387, b_m: 0.274194 };
        let d = best_response_retailer(&leader, &p, &cfg).unwrap();
        assert!((d.get(Field::RetailPrice).unwrap() - 0.723387).abs() < 1e-6);
    }

    #[test]
    fn oracle_reproduces_model_m_example() {
        let p = params(0.9, 0.15, 0.12, 0.02);
        let num = solve_stackelberg_numeric(ModelId::M, &p, &OracleConfig::default()).unwrap();
        let cf = equilibrium_m(&p);
        let (_, dev) = max_relative_deviation(&num.decisions, &cf.decisions).unwrap();
        assert!(dev < 1e-6, "{dev}");
        assert_eq!(num.provenance, Provenance::NumericOracle);
    }

    #[test]
    fn oracle_reports_box_boundary() {
        let p = params(0.9, 0.15, 0.12, 0.02);
        let cfg = OracleConfig { price_box: (-1.0, 0.5), ..Default::default() };
        let err = solve_stackelberg_numeric(ModelId::M, &p, &cfg).unwrap_err();
        assert!(matches!(err, Error::BoxBoundary { .. }), "{err:?}");
    }

    #[test]
    fn oracle_respects_guard() {
        let p = params(2.0 / 9.0, 1.0, 0.5, 0.2);
        let err = solve_stackelberg_numeric(ModelId::R, &p, &OracleConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Singularity { .. }));
    }

    #[test]
    fn closed_forms_are_stationary() {
        let p = params(0.9, 0.15, 0.12, 0.02);
        let s = stationarity(&equilibrium_m(&p).decisions, &p, DemandForm::Adopted).unwrap();
        assert!(s.stationary, "{s:?}");
        let p = params(0.65, 1.5, 0.7, 0.2);
        let s = stationarity(&equilibrium_r(&p).unwrap().decisions, &p, DemandForm::Adopted).unwrap();
        assert!(s.stationary, "{s:?}");
        let mut off = equilibrium_r(&p).unwrap().decisions;
        off.set(Field::Transfer, 0.5).unwrap();
        assert!(!stationarity(&off, &p, DemandForm::Adopted).unwrap().stationary);
    }

    #[test]
    fn relative_deviation_uses_floor() {
        assert_eq!(relative_deviation(1.1, 1.0, 1e-3), 0.10000000000000009);
        assert!((relative_deviation(1e-6, 0.0, 1e-3) - 1e-3).abs() < 1e-15);
        let a = DecisionSet::M { p_m: 1.0, p_r: 2.0, w: 1.0, b_m: 0.0 };
        let b = DecisionSet::R { p_m: 1.0, p_r: 2.0, w: 1.0, b_r: 0.0, t: 0.0 };
        assert!(matches!(max_relative_deviation(&a, &b), Err(Error::ModelMismatch { .. })));
    }

    #[test]
    fn multi_start_agrees_for_model_m() {
        let p = params(0.9, 0.15, 0.12, 0.02);
        let ms = multi_start(ModelId::M, &p, &OracleConfig { starts: 3, ..Default::default() }).unwrap();
        assert_eq!(ms.optima.len(), 3);
        assert!(ms.agree, "spread {}", ms.spread);
    }
}
