use serde::{Deserialize, Serialize};

use super::spectrum::{Bc, EigenspaceBasis};
use super::ball::{newtonian_capacity_ball, omega};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormKind {
    NeumannBall,
    DirichletBall,
    /// Neumann limit form for a hole of arbitrary shape, built from a
    /// supplied exterior torsion tensor.
    NeumannGeneral,
}

/// Symmetric bilinear form on an eigenspace, written in the basis order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormMatrix {
    pub entries: Vec<Vec<f64>>,
    pub kind: FormKind,
    pub x0: Vec<f64>,
    pub dim: usize,
}

impl FormMatrix {
    pub fn size(&self) -> usize {
        self.entries.len()
    }

    pub fn trace(&self) -> f64 {
        (0..self.size()).map(|i| self.entries[i][i]).sum()
    }
}

fn check_samples(values: &[f64], grads: &[Vec<f64>], n: usize) -> Result<()> {
    if values.is_empty() || values.len() != grads.len() {
        return Err(Error::InvalidInput("need one gradient per basis value".into()));
    }
    if grads.iter().any(|g| g.len() != n) {
        return Err(Error::InvalidInput(format!("gradients must have {n} components")));
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `B_ij = ω_N (N/(N−1) ∇φ_i·∇φ_j − (λ−1) φ_i φ_j)` from point samples.
pub fn neumann_form_from_samples(lambda: f64, values: &[f64], grads: &[Vec<f64>], x0: &[f64], n: usize) -> Result<FormMatrix> {
    if !(lambda > 1.0) {
        return Err(Error::InvalidInput(format!(
            "the Neumann form needs λ > 1, got {lambda}; the constant mode is excluded"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidInput(format!("dimension must be at least 2, got {n}")));
    }
    check_samples(values, grads, n)?;
    let w = omega(n);
    let r = n as f64 / (n as f64 - 1.0);
    let m = values.len();
    let entries = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| w * (r * dot(&grads[i], &grads[j]) - (lambda - 1.0) * values[i] * values[j]))
                .collect()
        })
        .collect();
    Ok(FormMatrix {
        entries,
        kind: FormKind::NeumannBall,
        x0: x0.to_vec(),
        dim: n,
    })
}

pub fn neumann_form_matrix(basis: &EigenspaceBasis, x0: &[f64], n: usize) -> Result<FormMatrix> {
    if basis.bc != Bc::Neumann {
        return Err(Error::InvalidInput("neumann_form_matrix needs a Neumann basis".into()));
    }
    if n != basis.domain.dim() {
        return Err(Error::InvalidInput(format!("dimension {n} does not match the domain")));
    }
    let (values, grads) = basis.sample(x0)?;
    neumann_form_from_samples(basis.lambda, &values, &grads, x0, n)
}

/// Capacity constant of the unit ball: `2π` in the plane, Newtonian capacity otherwise.
pub fn dirichlet_constant(n: usize) -> Result<f64> {
    match n {
        2 => Ok(2.0 * std::f64::consts::PI),
        _ => newtonian_capacity_ball(n),
    }
}

pub fn dirichlet_form_from_samples(values: &[f64], x0: &[f64], n: usize) -> Result<FormMatrix> {
    if values.is_empty() {
        return Err(Error::InvalidInput("empty eigenspace".into()));
    }
    let c = dirichlet_constant(n)?;
    let entries = values.iter().map(|ui| values.iter().map(|uj| c * ui * uj).collect()).collect();
    Ok(FormMatrix {
        entries,
        kind: FormKind::DirichletBall,
        x0: x0.to_vec(),
        dim: n,
    })
}

/// `Q_ij = c u_i(x0) u_j(x0)`; rank at most one.
pub fn dirichlet_form_matrix(basis: &EigenspaceBasis, x0: &[f64], n: usize) -> Result<FormMatrix> {
    if basis.bc != Bc::Dirichlet {
        return Err(Error::InvalidInput("dirichlet_form_matrix needs a Dirichlet basis".into()));
    }
    if n != basis.domain.dim() {
        return Err(Error::InvalidInput(format!("dimension {n} does not match the domain")));
    }
    let values = (0..basis.dim()).map(|i| basis.eval(i, x0)).collect::<Result<Vec<_>>>()?;
    dirichlet_form_from_samples(&values, x0, n)
}

/// Symmetric N×N tensor `T` with `E(b) = bᵀTb`, recovered from an exterior
/// torsion energy by polarization.
pub fn torsion_tensor_from_energy(n: usize, energy: impl Fn(&[f64]) -> f64) -> Vec<Vec<f64>> {
    let unit = |k: usize| -> Vec<f64> { (0..n).map(|d| if d == k { 1.0 } else { 0.0 }).collect() };
    let mut t = vec![vec![0.0; n]; n];
    for k in 0..n {
        t[k][k] = energy(&unit(k));
        for l in 0..k {
            let plus: Vec<f64> = (0..n).map(|d| unit(k)[d] + unit(l)[d]).collect();
            let minus: Vec<f64> = (0..n).map(|d| unit(k)[d] - unit(l)[d]).collect();
            let v = 0.25 * (energy(&plus) - energy(&minus));
            t[k][l] = v;
            t[l][k] = v;
        }
    }
    t
}

/// `L_ij = ∇φ_iᵀ T ∇φ_j + |Σ| (∇φ_i·∇φ_j − (λ−1) φ_i φ_j)` for a hole
/// profile `Σ` with measure `sigma_measure` and exterior torsion tensor `T`.
pub fn limit_form_from_samples(
    lambda: f64,
    values: &[f64],
    grads: &[Vec<f64>],
    x0: &[f64],
    sigma_measure: f64,
    torsion_tensor: &[Vec<f64>],
) -> Result<FormMatrix> {
    let n = torsion_tensor.len();
    if torsion_tensor.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidInput("torsion tensor must be square".into()));
    }
    if !(sigma_measure > 0.0) {
        return Err(Error::InvalidInput("hole profile must have positive measure".into()));
    }
    check_samples(values, grads, n)?;
    let m = values.len();
    let tg: Vec<Vec<f64>> = grads
        .iter()
        .map(|g| (0..n).map(|k| dot(&torsion_tensor[k], g)).collect())
        .collect();
    let mut entries = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..=i {
            let v = dot(&grads[i], &tg[j])
                + sigma_measure * (dot(&grads[i], &grads[j]) - (lambda - 1.0) * values[i] * values[j]);
            entries[i][j] = v;
            entries[j][i] = v;
        }
    }
    Ok(FormMatrix {
        entries,
        kind: FormKind::NeumannGeneral,
        x0: x0.to_vec(),
        dim: n,
    })
}

/// Eigenvalues of the form, descending.
pub fn gamma_eigenvalues(form: &FormMatrix) -> Vec<f64> {
    symmetric_eigenvalues(&form.entries)
}

/// Descending eigenvalues of a small symmetric matrix: closed form up to
/// 2×2, cyclic Jacobi beyond.
pub fn symmetric_eigenvalues(a: &[Vec<f64>]) -> Vec<f64> {
    let mut out = match a.len() {
        0 => Vec::new(),
        1 => vec![a[0][0]],
        2 => {
            let (p, q, b) = (a[0][0], a[1][1], 0.5 * (a[0][1] + a[1][0]));
            let mean = 0.5 * (p + q);
            let r = (0.5 * (p - q)).hypot(b);
            let det = p * q - b * b;
            // take the larger-magnitude root directly and the other from the
            // determinant to avoid cancellation
            if mean >= 0.0 {
                let hi = mean + r;
                vec![hi, if hi != 0.0 { det / hi } else { 0.0 }]
            } else {
                let lo = mean - r;
                vec![det / lo, lo]
            }
        }
        _ => jacobi_eigenvalues(a, 1e-13),
    };
    out.sort_by(|x, y| y.total_cmp(x));
    out
}

fn jacobi_eigenvalues(a: &[Vec<f64>], tol: f64) -> Vec<f64> {
    let m = a.len();
    let mut s: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..m).map(|j| 0.5 * (a[i][j] + a[j][i])).collect())
        .collect();
    let scale = s.iter().flatten().fold(0.0f64, |acc, v| acc.max(v.abs())).max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off = (0..m)
            .flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j)))
            .fold(0.0f64, |acc, (i, j)| acc.max(s[i][j].abs()));
        if off <= tol * scale {
            break;
        }
        for p in 0..m {
            for q in p + 1..m {
                if s[p][q] == 0.0 {
                    continue;
                }
                let theta = (s[q][q] - s[p][p]) / (2.0 * s[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..m {
                    let (skp, skq) = (s[k][p], s[k][q]);
                    s[k][p] = c * skp - sn * skq;
                    s[k][q] = sn * skp + c * skq;
                }
                for k in 0..m {
                    let (spk, sqk) = (s[p][k], s[q][k]);
                    s[p][k] = c * spk - sn * sqk;
                    s[q][k] = sn * spk + c * sqk;
                }
            }
        }
    }
    (0..m).map(|i| s[i][i]).collect()
}

/// `λ − γ_i ε^N`; descending γ gives ascending predictions.
pub fn predict_branches(lambda: f64, gamma: &[f64], eps: f64, n: usize) -> Vec<f64> {
    let s = eps.powi(n as i32);
    gamma.iter().map(|g| lambda - g * s).collect()
}

/// Dirichlet branches `λ + ζ_i/|log ε|` (N = 2) or `λ + ε^{N−2} ζ_i`, with
/// `ζ` ascending.
pub fn predict_dirichlet_branches(lambda: f64, zeta: &[f64], eps: f64, n: usize) -> Vec<f64> {
    let s = if n == 2 { 1.0 / eps.ln().abs() } else { eps.powi(n as i32 - 2) };
    zeta.iter().map(|z| lambda + z * s).collect()
}

/// `g_i(x) = N/(N−1)|∇φ_i(x)|² − (λ−1)φ_i(x)²`.
pub fn g_functions(basis: &EigenspaceBasis, x: &[f64], n: usize) -> Result<Vec<f64>> {
    let (values, grads) = basis.sample(x)?;
    let r = n as f64 / (n as f64 - 1.0);
    Ok(values
        .iter()
        .zip(&grads)
        .map(|(v, g)| r * dot(g, g) - (basis.lambda - 1.0) * v * v)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DomainSpec;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn pair() -> EigenspaceBasis {
        EigenspaceBasis::cluster_at(&DomainSpec::reference_rectangle(), Bc::Neumann, 3).unwrap()
    }

    #[test]
    fn single_gradient_term() {
        let f = neumann_form_from_samples(1.5, &[0.0], &[vec![1.0, 0.0]], &[0.0, 0.0], 2).unwrap();
        assert!((f.entries[0][0] - 2.0 * PI).abs() < 1e-15);
    }

    #[test]
    fn critical_point_gives_rank_one() {
        let f = neumann_form_from_samples(2.0, &[0.3, -0.4], &[vec![0.0; 2], vec![0.0; 2]], &[0.0; 2], 2).unwrap();
        let g = gamma_eigenvalues(&f);
        assert!(g[0].abs() < 1e-15);
        assert!((g[1] + PI * 0.25).abs() < 1e-14);
    }

    #[test]
    fn constant_mode_rejected() {
        assert!(neumann_form_from_samples(1.0, &[1.0], &[vec![0.0; 2]], &[0.0; 2], 2).is_err());
        let b = EigenspaceBasis::cluster_at(&DomainSpec::reference_rectangle(), Bc::Neumann, 1).unwrap();
        assert!(neumann_form_matrix(&b, &[0.0, 0.0], 2).is_err());
    }

    #[test]
    fn validation_pair_by_shifted_cosines() {
        // φ_(2,0) = −cos(πx/4)/4 and φ_(0,1) = −sin(πy/4)/4 on (−4,4)×(−2,2)
        let (x, y) = (2.1f64, 0.1f64);
        let k = PI / 4.0;
        let v = [-(k * x).cos() / 4.0, -(k * y).sin() / 4.0];
        let g = [[k * (k * x).sin() / 4.0, 0.0], [0.0, -k * (k * y).cos() / 4.0]];
        let q = PI * PI / 16.0;
        let f = neumann_form_matrix(&pair(), &[x, y], 2).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let want = PI * (2.0 * (g[i][0] * g[j][0] + g[i][1] * g[j][1]) - q * v[i] * v[j]);
                assert!((f.entries[i][j] - want).abs() < 1e-14, "{i}{j}");
            }
        }
        let gam = gamma_eigenvalues(&f);
        assert!(gam[0] >= gam[1]);
        assert!((gam[0] + gam[1] - f.trace()).abs() < 1e-12);
        assert!(gam[0] > 0.238 && gam[1] < 0.242 && gam[1] > 0.238);
    }

    #[test]
    fn two_by_two_closed_forms() {
        let f = |e: Vec<Vec<f64>>| symmetric_eigenvalues(&e);
        assert_eq!(f(vec![vec![3.0, 0.0], vec![0.0, 1.0]]), vec![3.0, 1.0]);
        assert_eq!(f(vec![vec![1.0, 0.0], vec![0.0, 3.0]]), vec![3.0, 1.0]);
        let (a, b) = (0.7, -0.2);
        let g = f(vec![vec![a, b], vec![b, a]]);
        assert!((g[0] - (a + b.abs())).abs() < 1e-15 && (g[1] - (a - b.abs())).abs() < 1e-15);
        let g = f(vec![vec![-2.0, 0.5], vec![0.5, -1.0]]);
        assert!((g[0] * g[1] - 1.75).abs() < 1e-14 && (g[0] + g[1] + 3.0).abs() < 1e-14);
    }

    // real roots of a depressed cubic by the trigonometric formula
    fn cubic_roots(a: &[Vec<f64>]) -> Vec<f64> {
        let tr = a[0][0] + a[1][1] + a[2][2];
        let c2 = a[0][0] * a[1][1] + a[0][0] * a[2][2] + a[1][1] * a[2][2]
            - a[0][1] * a[0][1]
            - a[0][2] * a[0][2]
            - a[1][2] * a[1][2];
        let det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[1][2]) - a[0][1] * (a[0][1] * a[2][2] - a[1][2] * a[0][2])
            + a[0][2] * (a[0][1] * a[1][2] - a[1][1] * a[0][2]);
        // λ³ − tr λ² + c2 λ − det, shift λ = t + tr/3
        let s = tr / 3.0;
        let p = c2 - tr * tr / 3.0;
        let q = -2.0 * s * s * s + c2 * s - det;
        let r = 2.0 * (-p / 3.0).max(0.0).sqrt();
        let arg = if r == 0.0 { 0.0 } else { (3.0 * q / (p * r)).clamp(-1.0, 1.0) };
        let phi = arg.acos() / 3.0;
        let mut roots: Vec<f64> = (0..3).map(|k| s + r * (phi - 2.0 * PI * k as f64 / 3.0).cos()).collect();
        roots.sort_by(|x, y| y.total_cmp(x));
        roots
    }

    proptest! {
        #[test]
        fn jacobi_matches_cubic(v in proptest::collection::vec(-2.0f64..2.0, 6)) {
            let a = vec![
                vec![v[0], v[3], v[4]],
                vec![v[3], v[1], v[5]],
                vec![v[4], v[5], v[2]],
            ];
            let got = symmetric_eigenvalues(&a);
            let want = cubic_roots(&a);
            for (g, w) in got.iter().zip(&want) {
                prop_assert!((g - w).abs() < 1e-10, "{got:?} vs {want:?}");
            }
        }

        #[test]
        fn rotation_leaves_gammas(theta in 0.0f64..(2.0 * PI), x in -3.9f64..3.9, y in -1.9f64..1.9) {
            let b = pair();
            let (v, g) = b.sample(&[x, y]).unwrap();
            let (c, s) = (theta.cos(), theta.sin());
            let rv = vec![c * v[0] - s * v[1], s * v[0] + c * v[1]];
            let rg = vec![
                vec![c * g[0][0] - s * g[1][0], c * g[0][1] - s * g[1][1]],
                vec![s * g[0][0] + c * g[1][0], s * g[0][1] + c * g[1][1]],
            ];
            let f0 = neumann_form_matrix(&b, &[x, y], 2).unwrap();
            let f1 = neumann_form_from_samples(b.lambda, &rv, &rg, &[x, y], 2).unwrap();
            let (g0, g1) = (gamma_eigenvalues(&f0), gamma_eigenvalues(&f1));
            for i in 0..2 {
                prop_assert!((g0[i] - g1[i]).abs() < 1e-10);
            }
            prop_assert!((g0[0] + g0[1] - f0.trace()).abs() < 1e-12);
        }

        #[test]
        fn dirichlet_rank_one(u in proptest::collection::vec(-1.0f64..1.0, 2..5), n in 2usize..4) {
            let f = dirichlet_form_from_samples(&u, &vec![0.0; n], n).unwrap();
            let z = gamma_eigenvalues(&f);
            let c = dirichlet_constant(n).unwrap();
            let s: f64 = u.iter().map(|x| x * x).sum();
            prop_assert!((z[0] - c * s).abs() < 1e-12 * c.max(1.0));
            for zi in &z[1..] {
                prop_assert!(zi.abs() < 1e-14 * c.max(1.0));
            }
        }
    }

    #[test]
    fn dirichlet_examples() {
        let f = dirichlet_form_from_samples(&[1.0, 1.0], &[0.0, 0.0], 2).unwrap();
        let z = gamma_eigenvalues(&f);
        assert!((z[0] - 4.0 * PI).abs() < 1e-14 && z[1] == 0.0);
        // the centre of the rectangle is a nodal point of sin-modes with even indices
        let b = EigenspaceBasis::new(
            DomainSpec::reference_rectangle(),
            vec![super::super::ModeIndex { k: vec![2, 2], bc: Bc::Dirichlet }],
        )
        .unwrap();
        let f = dirichlet_form_matrix(&b, &[0.0, 0.0], 2).unwrap();
        assert!(f.entries[0][0].abs() < 1e-30);
    }

    #[test]
    fn predictions() {
        assert_eq!(predict_branches(1.6169, &[2.0, 1.0], 0.0, 2), vec![1.6169, 1.6169]);
        let p = predict_branches(1.6169, &[2.0, 1.0], 0.5, 2);
        assert!((p[0] - 1.1169).abs() < 1e-12 && (p[1] - 1.3669).abs() < 1e-12);
        let d = predict_dirichlet_branches(2.0, &[0.0, 1.0], (-2.0f64).exp(), 2);
        assert!((d[1] - 2.5).abs() < 1e-14 && d[0] == 2.0);
    }

    #[test]
    fn ball_tensor_reproduces_ball_form() {
        let b = pair();
        let (v, g) = b.sample(&[1.3, -0.7]).unwrap();
        let t = torsion_tensor_from_energy(2, |bv| super::super::ball_torsion_energy(bv, 2));
        let l = limit_form_from_samples(b.lambda, &v, &g, &[1.3, -0.7], PI, &t).unwrap();
        let f = neumann_form_matrix(&b, &[1.3, -0.7], 2).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((l.entries[i][j] - f.entries[i][j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn g_functions_match_diagonal() {
        let b = pair();
        for x in [[2.1, 0.1], [-1.0, 1.5], [0.3, 0.0]] {
            let g = g_functions(&b, &x, 2).unwrap();
            let f = neumann_form_matrix(&b, &x, 2).unwrap();
            for i in 0..2 {
                assert!((PI * g[i] - f.entries[i][i]).abs() < 1e-13);
            }
        }
        assert!(g_functions(&b, &[9.0, 0.0], 2).is_err());
    }
}
