//! Central finite differences for small dense problems.

use crate::error::Result;

pub fn gradient<F>(f: &mut F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut p = x.to_vec();
    let mut g = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        p[i] = x[i] + h;
        let up = f(&p)?;
        p[i] = x[i] - h;
        let down = f(&p)?;
        p[i] = x[i];
        g.push((up - down) / (2.0 * h));
    }
    Ok(g)
}

fn mixed<F>(f: &mut F, p: &mut [f64], x: &[f64], i: usize, j: usize, h: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut corner = |si: f64, sj: f64| {
        p[i] = x[i] + si * h;
        p[j] = x[j] + sj * h;
        let v = f(&p[..x.len()]);
        p[i] = x[i];
        p[j] = x[j];
        v
    };
    let v = corner(1.0, 1.0)? - corner(1.0, -1.0)? - corner(-1.0, 1.0)? + corner(-1.0, -1.0)?;
    Ok(v / (4.0 * h * h))
}

pub fn hessian<F>(f: &mut F, x: &[f64], h: f64) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let n = x.len();
    let mut p = x.to_vec();
    let f0 = f(&p)?;
    let mut hess = vec![vec![0.0; n]; n];
    for i in 0..n {
        p[i] = x[i] + h;
        let up = f(&p)?;
        p[i] = x[i] - h;
        let down = f(&p)?;
        p[i] = x[i];
        hess[i][i] = (up - 2.0 * f0 + down) / (h * h);
        for j in 0..i {
            hess[i][j] = mixed(f, &mut p, x, i, j, h)?;
            hess[j][i] = hess[i][j];
        }
    }
    Ok(hess)
}

/// Allocation-free gradient and Hessian for at most two variables.
pub fn gradient_hessian_small<F>(f: &mut F, x: &[f64], h: f64) -> Result<([f64; 2], [[f64; 2]; 2])>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let n = x.len();
    debug_assert!(n <= 2);
    let mut p = [0.0; 2];
    p[..n].copy_from_slice(x);
    let f0 = f(&p[..n])?;
    let mut g = [0.0; 2];
    let mut hess = [[0.0; 2]; 2];
    for i in 0..n {
        p[i] = x[i] + h;
        let up = f(&p[..n])?;
        p[i] = x[i] - h;
        let down = f(&p[..n])?;
        p[i] = x[i];
        g[i] = (up - down) / (2.0 * h);
        hess[i][i] = (up - 2.0 * f0 + down) / (h * h);
    }
    if n == 2 {
        hess[0][1] = mixed(f, &mut p, x, 0, 1, h)?;
        hess[1][0] = hess[0][1];
    }
    Ok((g, hess))
}

pub fn gradient_small<F>(f: &mut F, x: &[f64], h: f64) -> Result<[f64; 2]>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let n = x.len();
    let mut p = [0.0; 2];
    p[..n].copy_from_slice(x);
    let mut g = [0.0; 2];
    for i in 0..n {
        p[i] = x[i] + h;
        let up = f(&p[..n])?;
        p[i] = x[i] - h;
        let down = f(&p[..n])?;
        p[i] = x[i];
        g[i] = (up - down) / (2.0 * h);
    }
    Ok(g)
}

/// Newton step `A⁻¹ b` for one or two variables.
pub fn solve_2(a: &[[f64; 2]; 2], b: &[f64; 2], n: usize) -> [f64; 2] {
    if n == 1 {
        return [b[0] / a[0][0], 0.0];
    }
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    [(b[0] * a[1][1] - a[0][1] * b[1]) / det, (a[0][0] * b[1] - a[1][0] * b[0]) / det]
}

/// Hessian with one Richardson step: `(4 H(h/2) − H(h)) / 3`.
pub fn hessian_richardson<F>(f: &mut F, x: &[f64], h: f64) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let coarse = hessian(f, x, h)?;
    let fine = hessian(f, x, h / 2.0)?;
    Ok(fine
        .iter()
        .zip(&coarse)
        .map(|(rf, rc)| rf.iter().zip(rc).map(|(a, b)| (4.0 * a - b) / 3.0).collect())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_on_quadratics() {
        let mut f = |x: &[f64]| Ok(-2.0 * x[0] * x[0] + 0.5 * x[0] * x[1] - x[1] * x[1] + 3.0 * x[1]);
        let g = gradient(&mut f, &[1.0, 2.0], 1e-3).unwrap();
        assert!((g[0] - (-4.0 + 1.0)).abs() < 1e-9);
        assert!((g[1] - (0.5 - 4.0 + 3.0)).abs() < 1e-9);
        let h = hessian_richardson(&mut f, &[1.0, 2.0], 1e-4).unwrap();
        assert!((h[0][0] + 4.0).abs() < 1e-5);
        assert!((h[0][1] - 0.5).abs() < 1e-5);
        assert!((h[1][1] + 2.0).abs() < 1e-5);
    }

    #[test]
    fn small_solves() {
        let a = [[2.0, 1.0], [1.0, 3.0]];
        let s = solve_2(&a, &[3.0, 5.0], 2);
        assert!((s[0] - 0.8).abs() < 1e-12 && (s[1] - 1.4).abs() < 1e-12);
        assert_eq!(solve_2(&[[4.0, 0.0], [0.0, 0.0]], &[2.0, 0.0], 1), [0.5, 0.0]);
    }

    #[test]
    fn small_stencil_matches_general() {
        let mut f = |x: &[f64]| Ok(-2.0 * x[0] * x[0] + 0.5 * x[0] * x[1] - x[1] * x[1] + 3.0 * x[1]);
        let (g, h) = gradient_hessian_small(&mut f, &[1.0, 2.0], 1e-3).unwrap();
        let hg = hessian(&mut f, &[1.0, 2.0], 1e-3).unwrap();
        assert_eq!(g, [gradient(&mut f, &[1.0, 2.0], 1e-3).unwrap()[0], gradient_small(&mut f, &[1.0, 2.0], 1e-3).unwrap()[1]]);
        assert_eq!(h[0][1], hg[0][1]);
        assert_eq!(h[1][1], hg[1][1]);
    }
}
