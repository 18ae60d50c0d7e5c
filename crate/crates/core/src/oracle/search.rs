//! Derivative-free maximization over a box by iterated grid refinement.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearch {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Points per axis of the opening tensor grid.
    pub global_points: usize,
    /// Points per axis of each local grid (odd).
    pub local_points: usize,
    /// Local rounds run before the stopping test is consulted.
    pub min_rounds: usize,
    pub max_rounds: usize,
    /// Stop once every local half-width is below this.
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub rounds: usize,
    pub half_width: f64,
    pub evaluations: usize,
}

/// Visits every point of the tensor grid `axes[0] × axes[1] × …` in
/// lexicographic order.
fn for_each_point(axes: &[Vec<f64>], mut visit: impl FnMut(&[f64], &[usize]) -> Result<()>) -> Result<()> {
    let n = axes.len();
    if axes.iter().any(Vec::is_empty) {
        return Ok(());
    }
    let mut idx = vec![0usize; n];
    let mut point: Vec<f64> = axes.iter().map(|a| a[0]).collect();
    loop {
        visit(&point, &idx)?;
        let mut k = n;
        loop {
            if k == 0 {
                return Ok(());
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < axes[k].len() {
                point[k] = axes[k][idx[k]];
                break;
            }
            idx[k] = 0;
            point[k] = axes[k][0];
        }
    }
}

fn score(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

impl GridSearch {
    fn check(&self) -> Result<()> {
        let n = self.lo.len();
        if n == 0 || self.hi.len() != n {
            return Err(Error::Config("search box dimensions disagree".into()));
        }
        if self.lo.iter().zip(&self.hi).any(|(l, h)| !(l < h)) {
            return Err(Error::Config("search box must satisfy lo < hi on every axis".into()));
        }
        if self.global_points < 2 || self.local_points < 3 || self.local_points % 2 == 0 {
            return Err(Error::Config("grid sizes must be >= 2 (global) and odd >= 3 (local)".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config("search tolerance must be positive".into()));
        }
        Ok(())
    }

    /// Maximizes `f`. Without `start` the first round is a global tensor
    /// grid; with one, refinement begins there with an eighth-of-box radius.
    ///
    /// Each local round evaluates a grid spanning `±h` around the incumbent.
    /// The incumbent moves only on strict improvement. When the new best sits
    /// on the edge of the local grid the radius is kept, otherwise halved.
    pub fn maximize<F>(&self, mut f: F, start: Option<&[f64]>) -> Result<SearchOutcome>
    where
        F: FnMut(&[f64]) -> Result<f64>,
    {
        self.check()?;
        let n = self.lo.len();
        let clamp = |i: usize, v: f64| v.clamp(self.lo[i], self.hi[i]);
        let mut evaluations = 0usize;

        let (mut x, mut fx, mut h) = match start {
            None => {
                let g = self.global_points;
                let axes: Vec<Vec<f64>> = (0..n)
                    .map(|i| {
                        (0..g)
                            .map(|k| self.lo[i] + (self.hi[i] - self.lo[i]) * k as f64 / (g - 1) as f64)
                            .collect()
                    })
                    .collect();
                let mut best = (Vec::new(), f64::NEG_INFINITY);
                for_each_point(&axes, |p, _| {
                    let v = score(f(p)?);
                    evaluations += 1;
                    if best.0.is_empty() || v > best.1 {
                        best = (p.to_vec(), v);
                    }
                    Ok(())
                })?;
                let h: Vec<f64> = (0..n).map(|i| (self.hi[i] - self.lo[i]) / (g - 1) as f64).collect();
                (best.0, best.1, h)
            }
            Some(s) => {
                if s.len() != n {
                    return Err(Error::Config("start point has the wrong dimension".into()));
                }
                let x: Vec<f64> = s.iter().enumerate().map(|(i, v)| clamp(i, *v)).collect();
                let fx = score(f(&x)?);
                evaluations += 1;
                let h = (0..n).map(|i| (self.hi[i] - self.lo[i]) / 8.0).collect();
                (x, fx, h)
            }
        };

        let m = (self.local_points - 1) / 2;
        let mut rounds = 0usize;
        loop {
            let width = h.iter().cloned().fold(0.0, f64::max);
            if width < self.tol && rounds >= self.min_rounds {
                return Ok(SearchOutcome { x, value: fx, rounds, half_width: width, evaluations });
            }
            if rounds >= self.max_rounds {
                return Err(Error::NotConverged { rounds, half_width: width });
            }
            rounds += 1;

            let axes: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    (0..self.local_points)
                        .map(|k| clamp(i, x[i] + (k as f64 - m as f64) * h[i] / m as f64))
                        .collect()
                })
                .collect();
            let mut best: Option<(Vec<f64>, f64, bool)> = None;
            for_each_point(&axes, |p, idx| {
                if idx.iter().all(|&k| k == m) {
                    return Ok(());
                }
                let v = score(f(p)?);
                evaluations += 1;
                let incumbent = best.as_ref().map_or(fx, |b| b.1);
                if v > incumbent {
                    let on_edge = idx.iter().enumerate().any(|(i, &k)| {
                        (k == 0 && p[i] > self.lo[i]) || (k == 2 * m && p[i] < self.hi[i])
                    });
                    best = Some((p.to_vec(), v, on_edge));
                }
                Ok(())
            })?;
            match best {
                Some((p, v, true)) => {
                    x = p;
                    fx = v;
                }
                Some((p, v, false)) => {
                    x = p;
                    fx = v;
                    h.iter_mut().for_each(|hi| *hi *= 0.5);
                }
                None => h.iter_mut().for_each(|hi| *hi *= 0.5),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn search(n: usize) -> GridSearch {
        GridSearch {
            lo: vec![-1.0; n],
            hi: vec![3.0; n],
            global_points: 9,
            local_points: 5,
            min_rounds: 6,
            max_rounds: 500,
            tol: 1e-9,
        }
    }

    #[test]
    fn finds_interior_maximum_of_a_concave_quadratic() {
        let f = |x: &[f64]| Ok(-(x[0] - 0.3).powi(2) - 2.0 * (x[1] + 0.45).powi(2) - 0.5 * (x[0] - 0.3) * (x[1] + 0.45));
        let out = search(2).maximize(f, None).unwrap();
        assert!((out.x[0] - 0.3).abs() < 1e-7, "{:?}", out.x);
        assert!((out.x[1] + 0.45).abs() < 1e-7, "{:?}", out.x);
        assert!(out.half_width < 1e-9);
        assert!(out.rounds >= 6);
    }

    #[test]
    fn starts_anywhere() {
        let f = |x: &[f64]| Ok(-(x[0] - 2.2).powi(2) - (x[1] - 2.9).powi(2) - (x[2] + 0.7).powi(2));
        let out = search(3).maximize(f, Some(&[-1.0, -1.0, 3.0])).unwrap();
        for (got, want) in out.x.iter().zip([2.2, 2.9, -0.7]) {
            assert!((got - want).abs() < 1e-7);
        }
    }

    #[test]
    fn optimum_outside_box_ends_on_the_face() {
        let f = |x: &[f64]| Ok(x[0] - x[0] * x[0] / 100.0);
        let out = search(1).maximize(f, None).unwrap();
        assert_eq!(out.x[0], 3.0);
    }

    #[test]
    fn deterministic() {
        let f = |x: &[f64]| Ok((3.0 * x[0]).sin() * (2.0 * x[1]).cos());
        let a = search(2).maximize(f, None).unwrap();
        let b = search(2).maximize(f, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_grids() {
        let mut s = search(1);
        s.local_points = 4;
        assert!(matches!(s.maximize(|_| Ok(0.0), None), Err(Error::Config(_))));
    }

    #[test]
    fn round_cap_is_reported() {
        let mut s = search(1);
        s.max_rounds = 3;
        let err = s.maximize(|x| Ok(-x[0] * x[0]), None).unwrap_err();
        assert!(matches!(err, Error::NotConverged { rounds: 3, .. }));
    }
}
