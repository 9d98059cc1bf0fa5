use tvlab_core::cones::{graph_plane, Cone};
use tvlab_core::fixtures::four_half_planes_cone;
use tvlab_core::stationarity::{bump_family, first_variation_defect, mss_residual, ScalarBump, TestField};
use tvlab_core::twovalued::SheetGrid;
use tvlab_core::varifold::{omega, sample_cone, Sample, SampledVarifold};
use tvlab_core::Error;

#[test]
fn first_variation_is_linear_in_the_field() {
    let c = four_half_planes_cone(1).unwrap();
    let v = sample_cone(&c, 1.0 / 64.0, 0.75).unwrap();
    // an off-axis bump so the raw value is not zero
    let f = TestField::coordinate(2, vec![0.3, 0.1, 0.0, 0.3], 0.2);
    let a = first_variation_defect(&v, std::slice::from_ref(&f)).unwrap();
    let b = first_variation_defect(&v, &[f.scaled(2.0)]).unwrap();
    assert!((b.fields[0].raw - 2.0 * a.fields[0].raw).abs() <= 1e-14 * a.fields[0].raw.abs().max(1e-300));
    assert!((b.defect - a.defect).abs() <= 1e-12 * a.defect.max(1e-300));
}

#[test]
fn flat_plane_defect_vanishes_under_refinement() {
    let p = Cone::plane(graph_plane(2, 1, &[0.3, -0.4]).unwrap(), 1).unwrap();
    let fields = bump_family(&[vec![0.1, 0.05, 0.01]], 0.5);
    let coarse = first_variation_defect(&sample_cone(&p, 1.0 / 32.0, 1.0).unwrap(), &fields).unwrap().defect;
    let fine = first_variation_defect(&sample_cone(&p, 1.0 / 64.0, 1.0).unwrap(), &fields).unwrap().defect;
    assert!(coarse < 1e-3 && fine < coarse, "{coarse} {fine}");
}

#[test]
fn unreliable_tangents_are_rejected() {
    let samples = (0..100)
        .map(|i| Sample {
            point: vec![i as f64 / 100.0 - 0.5, 0.0],
            weight: 0.01,
            tangent: vec![vec![1.0, 0.0]],
            tangent_ok: i % 10 != 0,
            cell_radius: 0.005,
            sheet: None,
        })
        .collect();
    let v = SampledVarifold::from_samples(1, 2, samples, 0.01, "test").unwrap();
    let err = first_variation_defect(&v, &[TestField::radial(vec![0.0, 0.0], 0.3)]).unwrap_err();
    assert!(matches!(err, Error::UnreliableTangents { .. }));
}

#[test]
fn mss_residual_is_invariant_under_constants() {
    let f = SheetGrid::centered(&[0.0, 0.0], 40, 1.0 / 64.0, 1, |x| Some(vec![x[0] * x[0] + 0.3 * x[0] * x[1]])).unwrap();
    let tests = [ScalarBump { center: vec![0.05, 0.0], radius: 0.4, component: 0 }];
    let a = mss_residual(&f, &tests).unwrap().residual;
    let b = mss_residual(&f.shifted(&[5.0]), &tests).unwrap().residual;
    assert!((a - b).abs() <= 1e-12 * a, "{a} vs {b}");
}

/// `|∫ 2x·∇φ / √(1 + 4|x|²)| / (sup|Dφ| ω₂ r²)` for `f = (|x|², 0)` by a fine midpoint rule.
fn quadratic_oracle(center: [f64; 2], r: f64) -> f64 {
    let m = 2000;
    let step = 2.0 * r / m as f64;
    let mut total = 0.0;
    for i in 0..m {
        for j in 0..m {
            let x = [center[0] - r + (i as f64 + 0.5) * step, center[1] - r + (j as f64 + 0.5) * step];
            let d = [x[0] - center[0], x[1] - center[1]];
            let s2 = (d[0] * d[0] + d[1] * d[1]) / (r * r);
            if s2 >= 1.0 {
                continue;
            }
            let g = -8.0 * (1.0 - s2).powi(3) / (r * r);
            let grad = [g * d[0], g * d[1]];
            let a = 2.0 / (1.0 + 4.0 * (x[0] * x[0] + x[1] * x[1])).sqrt();
            total += a * (x[0] * grad[0] + x[1] * grad[1]) * step * step;
        }
    }
    let slope = 8.0 / 7f64.sqrt() * (6.0f64 / 7.0).powi(3);
    total.abs() / (slope / r * omega(2) * r * r)
}

#[test]
fn non_minimal_quadratic_residual_matches_oracle_and_stays_positive() {
    let center = [0.2, -0.1];
    let r = 0.4;
    let oracle = quadratic_oracle(center, r);
    let tests = [ScalarBump { center: center.to_vec(), radius: r, component: 0 }];
    let mut last = 0.0;
    for h in [1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0] {
        let m = (0.8 / h) as usize;
        let f = SheetGrid::centered(&[0.0, 0.0], m, h, 2, |x| Some(vec![x[0] * x[0] + x[1] * x[1], 0.0])).unwrap();
        last = mss_residual(&f, &tests).unwrap().residual;
        assert!(last > 0.5 * oracle, "{last} vs {oracle}");
    }
    assert!((last - oracle).abs() < 0.01 * oracle, "{last} vs {oracle}");
}
