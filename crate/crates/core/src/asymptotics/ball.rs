use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Volume of the unit ball in ℝ^N.
pub fn omega(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / n as f64 * omega(n - 2),
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn check(b: &[f64], n: usize, x: &[f64]) -> Result<f64> {
    if n < 2 || b.len() != n || x.len() != n {
        return Err(Error::InvalidInput(format!("expected vectors of length {n} ≥ 2")));
    }
    let r = norm(x);
    // tolerate rounding for points placed on the unit sphere
    if r < 1.0 - 1e-12 {
        return Err(Error::OutsideDomain { point: x.to_vec() });
    }
    Ok(r)
}

/// Exterior torsion function of the unit ball with flux `b·ν`:
/// `−|x|^{−N} (b·x) / (N−1)`.
pub fn ball_torsion_field(b: &[f64], n: usize, x: &[f64]) -> Result<f64> {
    let r = check(b, n, x)?;
    let bx: f64 = b.iter().zip(x).map(|(p, q)| p * q).sum();
    Ok(-r.powi(-(n as i32)) * bx / (n as f64 - 1.0))
}

pub fn ball_torsion_gradient(b: &[f64], n: usize, x: &[f64]) -> Result<Vec<f64>> {
    let r = check(b, n, x)?;
    let bx: f64 = b.iter().zip(x).map(|(p, q)| p * q).sum();
    let c = -1.0 / (n as f64 - 1.0);
    let rn = r.powi(-(n as i32));
    Ok((0..n).map(|k| c * rn * (b[k] - n as f64 * bx * x[k] / (r * r))).collect())
}

/// `ω_N |b|² / (N−1)`.
pub fn ball_torsion_energy(b: &[f64], n: usize) -> f64 {
    omega(n) * b.iter().map(|v| v * v).sum::<f64>() / (n as f64 - 1.0)
}

/// Newtonian capacity `(N−2) N ω_N` of the closed unit ball.
pub fn newtonian_capacity_ball(n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::InvalidInput(format!(
            "Newtonian capacity is defined for N ≥ 3, got {n}; the plane is logarithmic"
        )));
    }
    Ok((n as f64 - 2.0) * n as f64 * omega(n))
}

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(count: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; count];
    let mut weights = vec![0.0; count];
    let nf = count as f64;
    for i in 0..count.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=count {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[count - 1 - i] = x;
        weights[i] = w;
        weights[count - 1 - i] = w;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_ball_volumes() {
        assert!((omega(2) - PI).abs() < 1e-15);
        assert!((omega(3) - 4.0 * PI / 3.0).abs() < 1e-15);
        assert!((omega(4) - PI * PI / 2.0).abs() < 1e-14);
    }

    #[test]
    fn field_examples() {
        assert_eq!(ball_torsion_field(&[1.0, 0.0], 2, &[1.0, 0.0]).unwrap(), -1.0);
        assert!(ball_torsion_field(&[1.0, 0.0], 2, &[0.5, 0.0]).is_err());
        for n in [2usize, 3] {
            let b: Vec<f64> = (0..n).map(|k| 0.3 + k as f64).collect();
            let bn = norm(&b);
            let mut x = vec![0.0; n];
            x[0] = 1e3;
            let u = ball_torsion_field(&b, n, &x).unwrap();
            assert!(u.abs() <= bn * 10f64.powi(-3 * n as i32 + 3) / (n as f64 - 1.0));
        }
        assert!((ball_torsion_energy(&[1.0, 0.0], 2) - PI).abs() < 1e-15);
        assert!((ball_torsion_energy(&[0.0, 1.0, 0.0], 3) - 2.0 * PI / 3.0).abs() < 1e-15);
    }

    #[test]
    fn normal_derivative_is_flux() {
        // on the unit sphere the derivative along the outer normal ν = x is b·ν
        for n in [2usize, 3] {
            let b: Vec<f64> = (0..n).map(|k| 1.0 - 0.7 * k as f64).collect();
            let mut x: Vec<f64> = (0..n).map(|k| 0.4 + 0.1 * k as f64).collect();
            let r = norm(&x);
            x.iter_mut().for_each(|v| *v /= r);
            let g = ball_torsion_gradient(&b, n, &x).unwrap();
            let nu = x.clone();
            let lhs: f64 = g.iter().zip(&nu).map(|(p, q)| p * q).sum();
            let rhs: f64 = b.iter().zip(&nu).map(|(p, q)| p * q).sum();
            assert!((lhs - rhs).abs() < 1e-14);
        }
    }

    #[test]
    fn harmonic_and_gradient_by_differences() {
        let b = [0.8, -1.1];
        let h = 1e-3;
        for x in [[1.5, 0.2], [-2.0, 3.0], [0.1, -1.2]] {
            let u = |p: [f64; 2]| ball_torsion_field(&b, 2, &p).unwrap();
            let lap = (u([x[0] + h, x[1]]) + u([x[0] - h, x[1]]) + u([x[0], x[1] + h]) + u([x[0], x[1] - h])
                - 4.0 * u(x))
                / (h * h);
            assert!(lap.abs() <= 1e-5 * norm(&b));
            let g = ball_torsion_gradient(&b, 2, &x).unwrap();
            let e = 1e-6;
            let fd = [
                (u([x[0] + e, x[1]]) - u([x[0] - e, x[1]])) / (2.0 * e),
                (u([x[0], x[1] + e]) - u([x[0], x[1] - e])) / (2.0 * e),
            ];
            assert!((g[0] - fd[0]).abs() < 1e-7 && (g[1] - fd[1]).abs() < 1e-7);
        }
    }

    #[test]
    fn capacity_by_radial_integration() {
        // ∫_{|x|>1} |∇|x|^{2−N}|² = |S^{N−1}| (N−2)² ∫_1^∞ r^{1−N} dr
        for n in [3usize, 4, 5] {
            let sphere = n as f64 * omega(n);
            let (t, w) = gauss_legendre(40);
            // substitute r = 1/s on (0, 1]
            let integral: f64 = t
                .iter()
                .zip(&w)
                .map(|(ti, wi)| {
                    let s = 0.5 * (ti + 1.0);
                    let r = 1.0 / s;
                    0.5 * wi * r.powi(1 - n as i32) * r * r
                })
                .sum();
            let want = sphere * (n as f64 - 2.0).powi(2) * integral;
            assert!((newtonian_capacity_ball(n).unwrap() - want).abs() < 1e-10 * want);
        }
        assert!((newtonian_capacity_ball(3).unwrap() - 4.0 * PI).abs() < 1e-14);
        assert!((newtonian_capacity_ball(4).unwrap() - 4.0 * PI * PI).abs() < 1e-13);
        assert!(newtonian_capacity_ball(2).is_err());
    }

    #[test]
    fn legendre_rules_integrate_polynomials() {
        for count in [1usize, 2, 5, 12] {
            let (x, w) = gauss_legendre(count);
            for deg in 0..2 * count {
                let q: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg as i32)).sum();
                let want = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((q - want).abs() < 1e-13, "n={count} deg={deg}");
            }
        }
    }
}
