use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use super::{fd, follower_fields, leader_fields, values_of, with_values, OracleConfig};
use crate::closed_form::Equilibrium;
use crate::market;

/// Eigenvalues must all lie below this for a Hessian to count as negative definite.
pub const NEGATIVE_DEFINITE_THRESHOLD: f64 = -1e-9;

const SOC_STEP: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SocReport {
    pub follower_hessian_eigs: Vec<f64>,
    /// Empty when the follower problem is not concave, since the reduced
    /// profit is then undefined.
    pub leader_reduced_hessian_eigs: Vec<f64>,
    pub follower_negative_definite: bool,
    pub leader_negative_definite: bool,
}

impl SocReport {
    pub fn negative_definite(&self) -> bool {
        self.follower_negative_definite && self.leader_negative_definite
    }
}

fn eigenvalues(h: &DMatrix<f64>) -> Vec<f64> {
    let m = (h + h.transpose()) * 0.5;
    let mut eigs: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    eigs.sort_by(f64::total_cmp);
    eigs
}

fn negative_definite(eigs: &[f64]) -> bool {
    !eigs.is_empty() && eigs.iter().all(|e| *e < NEGATIVE_DEFINITE_THRESHOLD)
}

/// Second-order conditions at `eq` under its own demand form.
pub fn check_soc(eq: &Equilibrium) -> SocReport {
    let cfg = OracleConfig::default().with_form(eq.demand_form);
    check_soc_with(eq, &cfg)
}

/// Follower Hessian `G_yy` of the retailer profit, and the leader's reduced
/// Hessian `F_xx + F_xy J + Jᵀ F_yx + Jᵀ F_yy J` with `J = −G_yy⁻¹ G_yx` the
/// slope of the best response. The reduced form is exact when the best
/// response is affine, as it is for unclamped demands, and avoids
/// differencing through a nested solve.
pub fn check_soc_with(eq: &Equilibrium, cfg: &OracleConfig) -> SocReport {
    let d = &eq.decisions;
    let params = &eq.params;
    let model = d.model();
    let opts = cfg.demand;
    let lf = leader_fields(model);
    let ff = follower_fields(model);
    let fields: Vec<_> = lf.iter().chain(ff).copied().collect();
    let z = values_of(d, &fields);
    let (n, k) = (lf.len(), ff.len());

    let joint = |pick_leader: bool| {
        fd::hessian_richardson(
            &mut |z: &[f64]| {
                let p = market::profits_with(&with_values(d, &fields, z), params, opts)?;
                Ok(if pick_leader { p.pi_m } else { p.pi_r })
            },
            &z,
            SOC_STEP,
        )
        .map(|h| DMatrix::from_fn(n + k, n + k, |i, j| h[i][j]))
    };
    let (f, g) = match (joint(true), joint(false)) {
        (Ok(f), Ok(g)) => (f, g),
        _ => {
            return SocReport {
                follower_hessian_eigs: Vec::new(),
                leader_reduced_hessian_eigs: Vec::new(),
                follower_negative_definite: false,
                leader_negative_definite: false,
            }
        }
    };

    let g_yy = g.view((n, n), (k, k)).into_owned();
    let follower_hessian_eigs = eigenvalues(&g_yy);
    let follower_negative_definite = negative_definite(&follower_hessian_eigs);

    let leader_reduced_hessian_eigs = match g_yy.clone().try_inverse() {
        Some(inv) if follower_negative_definite => {
            let j = -(inv * g.view((n, 0), (k, n)));
            let f_xy = f.view((0, n), (n, k));
            let f_yy = f.view((n, n), (k, k));
            let h = f.view((0, 0), (n, n)) + f_xy * &j + j.transpose() * f_xy.transpose() + j.transpose() * f_yy * &j;
            eigenvalues(&h)
        }
        _ => Vec::new(),
    };

    SocReport {
        follower_negative_definite,
        leader_negative_definite: negative_definite(&leader_reduced_hessian_eigs),
        follower_hessian_eigs,
        leader_reduced_hessian_eigs,
    }
}
