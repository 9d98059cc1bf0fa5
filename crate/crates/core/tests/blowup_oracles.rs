use proptest::prelude::*;
use tvlab_core::blowup::{dehomogenize, eval_h, harmonic_defect, homogeneity_defect, ConeField, HBasis};
use tvlab_core::fixtures::{complex_pair, four_half_planes_cone};

/// Independent normal-equation solve `(AᵀWA) c = AᵀW v` by Cholesky.
fn normal_equations(field: &ConeField, basis: &HBasis, rho: f64) -> Vec<f64> {
    let nb = basis.dim();
    let mut ata = nalgebra::DMatrix::<f64>::zeros(nb, nb);
    let mut atb = nalgebra::DVector::<f64>::zeros(nb);
    for i in 0..field.len() {
        let x = field.point(i);
        if x.iter().map(|t| t * t).sum::<f64>() >= rho * rho {
            continue;
        }
        let piece = field.chart_of(i);
        let w = field.weight(i);
        let cols: Vec<Vec<f64>> = (0..nb).map(|a| basis.eval_basis(a, piece, &x)).collect();
        for a in 0..nb {
            atb[a] += w * cols[a].iter().zip(field.value(i)).map(|(p, q)| p * q).sum::<f64>();
            for b in 0..nb {
                ata[(a, b)] += w * cols[a].iter().zip(&cols[b]).map(|(p, q)| p * q).sum::<f64>();
            }
        }
    }
    ata.cholesky().expect("positive definite").solve(&atb).iter().copied().collect()
}

#[test]
fn projection_matches_normal_equations() {
    for c in [four_half_planes_cone(1).unwrap(), complex_pair([1.0, 0.0]).unwrap()] {
        let basis = HBasis::new(&c).unwrap();
        // a field outside ℋ: quadratic plus constant
        let field = ConeField::from_fn(c.clone(), 1.0 / 24.0, 1.0, |x, _| {
            vec![x[0] * x[1], 0.3 - x[1] * x[1], x[0] + 0.2 * x[2] * x[3], 0.1]
        })
        .unwrap();
        let d = dehomogenize(&field, &[0.0; 4], 1.0).unwrap();
        let oracle = normal_equations(&field, &basis, 1.0);
        for (a, b) in d.coefficients.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-8 * (1.0 + b.abs()), "{a} vs {b}");
        }
        assert!(d.norms.orthogonality < 1e-8);
        assert!(d.norms.residual <= d.norms.field);
    }
}

#[test]
fn h_elements_are_harmonic_on_each_piece() {
    let c = four_half_planes_cone(1).unwrap();
    let basis = HBasis::new(&c).unwrap();
    let coef: Vec<f64> = (0..basis.dim()).map(|i| ((i * 7 % 5) as f64 - 2.0) * 0.3).collect();
    let psi = basis.element(&coef);
    let field = ConeField::from_fn(c, 1.0 / 32.0, 1.0, |x, p| basis.eval(&psi, p, x)).unwrap();
    assert!(harmonic_defect(&field) < 1e-9);
    assert!(homogeneity_defect(&field, 1.0) < 1e-18);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn four_half_plane_elements_are_homogeneous(
        coef in prop::collection::vec(-1.0f64..1.0, 11),
        t in 0.1f64..3.0,
        s in 0.05f64..1.0,
        y in -1.0f64..1.0,
        side in 0usize..4,
    ) {
        let c = four_half_planes_cone(1).unwrap();
        let basis = HBasis::new(&c).unwrap();
        prop_assume!(coef.len() == basis.dim());
        let psi = basis.element(&coef);
        let hp = &c.half_planes().unwrap()[side];
        let mut x = vec![0.0, y, 0.0, 0.0];
        for (xi, w) in x.iter_mut().zip(hp.side()) {
            *xi += s * w;
        }
        let tx: Vec<f64> = x.iter().map(|v| t * v).collect();
        let a = eval_h(&psi, &c, &x).unwrap();
        let b = eval_h(&psi, &c, &tx).unwrap();
        for (p, q) in a.iter().zip(&b) {
            prop_assert!((t * p - q).abs() < 1e-10);
        }
    }
}
