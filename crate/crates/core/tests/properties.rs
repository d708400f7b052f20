//! Property checks across module boundaries.

use std::f64::consts::PI;

use proptest::prelude::*;
use speclab::asymptotics::{
    dirichlet_form_matrix, gamma_eigenvalues, neumann_form_matrix, predict_branches, Bc, EigenspaceBasis,
};
use speclab::fem::CsrMatrix;
use speclab::geometry::{build_matched_meshes, polygon_area, DomainSpec, HoleShape, HoleSpec};

fn pair_basis() -> EigenspaceBasis {
    EigenspaceBasis::cluster_at(&DomainSpec::reference_rectangle(), Bc::Neumann, 3).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn matched_meshes_differ_only_inside_the_hole(
        cx in -2.5f64..2.5,
        cy in -0.8f64..0.8,
        eps in 0.2f64..0.6,
        star in any::<bool>(),
    ) {
        let shape = if star { HoleShape::Star { points: 5, inner_ratio: 0.5 } } else { HoleShape::Disk };
        let hole = HoleSpec::new(shape, [cx, cy], eps);
        let pair = build_matched_meshes(&DomainSpec::reference_rectangle(), &hole, 0.5).unwrap();
        let (p, f) = (&pair.perforated, &pair.filled);
        prop_assert!((f.area() - 32.0).abs() < 1e-10);
        prop_assert!((p.area() + polygon_area(&pair.hole_polygon) - 32.0).abs() < 1e-9);
        prop_assert_eq!(p.triangles.len() + pair.hole_triangles.len(), f.triangles.len());
        for (i, &j) in pair.shared_vertex_map.iter().enumerate() {
            prop_assert_eq!(p.vertices[i], f.vertices[j]);
        }
        prop_assert!(p.is_perforated() && !f.is_perforated());
    }
}

proptest! {
    #[test]
    fn neumann_pair_form_matches_closed_form(x in -3.9f64..3.9, y in -1.9f64..1.9) {
        let g = gamma_eigenvalues(&neumann_form_matrix(&pair_basis(), &[x, y], 2).unwrap());
        // cos(π(x+4)/4)/4 and cos(π(y+2)/4)/4, with λ − 1 = π²/16
        let a = PI / 4.0;
        let mu = a * a;
        let (v1, v2) = ((a * (x + 4.0)).cos() / 4.0, (a * (y + 2.0)).cos() / 4.0);
        let (g1, g2) = (-a * (a * (x + 4.0)).sin() / 4.0, -a * (a * (y + 2.0)).sin() / 4.0);
        let b11 = PI * (2.0 * g1 * g1 - mu * v1 * v1);
        let b22 = PI * (2.0 * g2 * g2 - mu * v2 * v2);
        let b12 = -PI * mu * v1 * v2;
        let r = (0.25 * (b11 - b22).powi(2) + b12 * b12).sqrt();
        let want = [0.5 * (b11 + b22) + r, 0.5 * (b11 + b22) - r];
        for (got, want) in g.iter().zip(&want) {
            prop_assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn dirichlet_form_has_rank_one(x in -3.9f64..3.9, y in -1.9f64..1.9, n in prop::sample::select(vec![5usize, 11])) {
        let basis = EigenspaceBasis::cluster_at(&DomainSpec::reference_rectangle(), Bc::Dirichlet, n).unwrap();
        let form = dirichlet_form_matrix(&basis, &[x, y], 2).unwrap();
        let z = gamma_eigenvalues(&form);
        let top = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(z.iter().filter(|v| v.abs() > 1e-14 * top.max(1e-300)).count() <= 1);
        prop_assert!((z.iter().sum::<f64>() - form.trace()).abs() <= 1e-13 * top.max(1e-300));
    }

    #[test]
    fn predicted_branches_are_ordered(
        gamma in prop::collection::vec(-2.0f64..2.0, 1..5),
        eps in 0.0f64..0.5,
        n in 2usize..4,
    ) {
        let mut g = gamma;
        g.sort_by(|a, b| b.total_cmp(a));
        let p = predict_branches(3.0, &g, eps, n);
        prop_assert!(p.windows(2).all(|w| w[0] <= w[1]));
        let mean = p.iter().sum::<f64>() / p.len() as f64;
        let want = 3.0 - g.iter().sum::<f64>() / g.len() as f64 * eps.powi(n as i32);
        prop_assert!((mean - want).abs() < 1e-12);
    }

    #[test]
    fn csr_product_matches_dense(
        entries in prop::collection::vec((0usize..8, 0usize..8, -4i32..5), 0..40),
        x in prop::collection::vec(-3i32..4, 8),
    ) {
        let t: Vec<(usize, usize, f64)> = entries.iter().map(|&(i, j, v)| (i, j, v as f64)).collect();
        let a = CsrMatrix::from_triplets(8, &t, false).unwrap();
        let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        let mut want = vec![0.0; 8];
        for &(i, j, v) in &t {
            want[i] += v * xf[j];
        }
        prop_assert_eq!(a.mul_vec(&xf), want);
        let mut rev = t.clone();
        rev.reverse();
        prop_assert_eq!(CsrMatrix::from_triplets(8, &rev, false).unwrap().to_dense(), a.to_dense());
    }
}
