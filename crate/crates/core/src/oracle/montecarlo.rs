use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::market::{self, DemandProfile};
use crate::params::{DecisionSet, ModelId, Params};

/// Empirical segment shares with binomial standard errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloDemand {
    pub n: usize,
    pub seed: u64,
    pub stream: u64,
    pub shares: DemandProfile,
    pub std_errors: DemandProfile,
}

impl MonteCarloDemand {
    /// Largest `|share − reference| / SE` over the segments. A zero SE with
    /// a nonzero gap gives infinity.
    pub fn max_z(&self, reference: &DemandProfile) -> f64 {
        self.shares
            .as_vec()
            .iter()
            .zip(self.std_errors.as_vec())
            .zip(reference.as_vec())
            .map(|((s, se), r)| {
                let gap = (s - r).abs();
                if gap == 0.0 {
                    0.0
                } else {
                    gap / se
                }
            })
            .fold(0.0, f64::max)
    }
}

pub fn monte_carlo_demand(decisions: &DecisionSet, params: &Params, n: usize, seed: u64) -> Result<MonteCarloDemand> {
    monte_carlo_demand_stream(decisions, params, n, seed, 0)
}

/// Simulates `n` customers `(v, u) ~ U[0,1]²` on the ChaCha8 stream
/// `stream` of `seed`, so parallel callers can take one stream per draw.
pub fn monte_carlo_demand_stream(
    decisions: &DecisionSet,
    params: &Params,
    n: usize,
    seed: u64,
    stream: u64,
) -> Result<MonteCarloDemand> {
    if n == 0 {
        return Err(Error::Config("monte carlo needs n >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut counts = [0u64; 4];
    for _ in 0..n {
        let v: f64 = rng.gen();
        let u: f64 = rng.gen();
        let (primary, replacement) = market::choose(&market::utilities(decisions, v, u, params)?);
        for seg in [primary, replacement].into_iter().flatten() {
            counts[seg as usize - 1] += 1;
        }
    }
    let nf = n as f64;
    let share = |k: usize| counts[k] as f64 / nf;
    let se = |p: f64| (p * (1.0 - p) / nf).sqrt();
    let mr = decisions.model() == ModelId::MR;
    let shares = DemandProfile {
        q1: share(0),
        q2: share(1),
        q3: share(2),
        q4: mr.then(|| share(3)),
    };
    let std_errors = DemandProfile {
        q1: se(shares.q1),
        q2: se(shares.q2),
        q3: se(shares.q3),
        q4: shares.q4.map(se),
    };
    Ok(MonteCarloDemand { n, seed, stream, shares, std_errors })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_m_shares() {
        let p = Params::new(0.5, 1.0, 0.5, 0.1).unwrap();
        let d = DecisionSet::M { p_m: 0.3, p_r: 0.6, w: 0.5, b_m: 0.2 };
        let mc = monte_carlo_demand(&d, &p, 200_000, 3).unwrap();
        let q = market::demand(&d, &p).unwrap();
        assert_eq!(q.q1, 0.0);
        assert!(mc.max_z(&q) < 4.0, "{mc:?}");
        assert!(mc.shares.q4.is_none());
    }

    #[test]
    fn equal_subsidies_send_nobody_to_the_manufacturer() {
        let p = Params::new(0.6, 1.0, 0.5, 0.1).unwrap();
        let d = DecisionSet::MR { p_m: 0.3, p_r: 0.7, w: 0.5, b_m: 0.3, b_r: 0.3, t: 0.3 };
        let mc = monte_carlo_demand(&d, &p, 100_000, 9).unwrap();
        assert!(mc.shares.q3 < 1e-4);
        assert!((mc.shares.q4.unwrap() - 0.5).abs() < 0.01);
    }

    #[test]
    fn deterministic_and_stream_dependent() {
        let p = Params::new(0.5, 1.0, 0.5, 0.1).unwrap();
        let d = DecisionSet::R { p_m: 0.2, p_r: 0.6, w: 0.4, b_r: 0.2, t: 0.3 };
        let a = monte_carlo_demand_stream(&d, &p, 10_000, 5, 2).unwrap();
        let b = monte_carlo_demand_stream(&d, &p, 10_000, 5, 2).unwrap();
        let c = monte_carlo_demand_stream(&d, &p, 10_000, 5, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.shares, c.shares);
    }

    #[test]
    fn zero_samples_rejected() {
        let p = Params::new(0.5, 1.0, 0.5, 0.1).unwrap();
        assert!(monte_carlo_demand(&DecisionSet::zeros(ModelId::M), &p, 0, 1).is_err());
    }
}
