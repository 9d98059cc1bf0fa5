use tvlab_core::conefit::{decay_pipeline, fit_cone, DecayOptions, FitClass, FitOptions};
use tvlab_core::cones::{graph_plane, nu, Cone};
use tvlab_core::excess::{coarser_excess, excess_e};
use tvlab_core::fixtures::{complex_pair, four_half_planes_cone};
use tvlab_core::geometry::{Region, Subspace};
use tvlab_core::linalg;
use tvlab_core::varifold::sample_cone;
use tvlab_core::Error;

#[test]
fn pair_fit_recovers_nearby_complex_pair() {
    let truth = complex_pair([1.1, 0.15]).unwrap();
    let v = sample_cone(&truth, 1.0 / 48.0, 1.2).unwrap();
    let start = complex_pair([1.0, 0.0]).unwrap();
    let region = Region::unit_ball(4);
    let fit = fit_cone(&v, FitClass::Pair, &start, &region, &FitOptions::default()).unwrap();
    let mass = v.mass_in(&region).unwrap();
    assert!(fit.excess < 1e-12 * mass, "{}", fit.excess);
    assert!(nu(&fit.cone, &truth, 400).unwrap() < 1e-5);
    assert!(fit.excess <= excess_e(&v, &start, &region).unwrap());
}

#[test]
fn four_half_plane_fit_recovers_rotated_sides() {
    // same axis span{e₂}; sides of the standard cone rotated in the fiber plane
    let axis = Subspace::linear(4, &[linalg::unit(4, 1)]).unwrap();
    let t: f64 = 0.12;
    let std = four_half_planes_cone(1).unwrap();
    let sides: Vec<Vec<f64>> = std
        .half_planes()
        .unwrap()
        .iter()
        .map(|hp| {
            let w = hp.side();
            vec![w[0], w[1], t.cos() * w[2] - t.sin() * w[3], t.sin() * w[2] + t.cos() * w[3]]
        })
        .collect();
    let truth = Cone::from_axis_and_sides(axis, &[sides[0].clone(), sides[1].clone(), sides[2].clone(), sides[3].clone()]).unwrap();
    let v = sample_cone(&truth, 1.0 / 48.0, 1.2).unwrap();
    let start = four_half_planes_cone(1).unwrap();
    let region = Region::unit_ball(4);
    let fit = fit_cone(&v, FitClass::FourHp, &start, &region, &FitOptions::default()).unwrap();
    assert!(fit.excess < 1e-10 * v.mass_in(&region).unwrap(), "{}", fit.excess);
    assert!(fit.axis_constraint_ok);
}

#[test]
fn coarser_excess_vanishes_when_v_is_the_coarser_cone() {
    // C⁽⁰⁾: two planes sharing the line span{e₁}; C: a pair with trivial axis
    let p1 = Subspace::linear(4, &[linalg::unit(4, 0), linalg::unit(4, 1)]).unwrap();
    let p2 = Subspace::linear(4, &[linalg::unit(4, 0), vec![0.0, 0.6, 0.8, 0.0]]).unwrap();
    let c0 = Cone::pair(p1, p2).unwrap();
    let c = complex_pair([1.0, 0.0]).unwrap();
    let v = sample_cone(&c0, 1.0 / 48.0, 1.2).unwrap();
    let r = coarser_excess(&v, &c, &c0, &FitOptions::default()).unwrap();
    assert_eq!(r.axis_dim, 1);
    assert!(r.value < 1e-10 * v.mass(), "{}", r.value);
    // the competitor family excludes cones whose axis is not strictly larger
    assert!(coarser_excess(&v, &c0, &c0, &FitOptions::default()).is_err());
}

#[test]
fn decay_on_exact_cone_is_flat_zero() {
    let c = complex_pair([1.0, 0.0]).unwrap();
    let v = sample_cone(&c, 1.0 / 64.0, 1.2).unwrap();
    let r = decay_pipeline(&v, &c, 0.5, 3, &[0.0; 4], &DecayOptions::default()).unwrap();
    assert!(r.exact_cone);
    assert_eq!(r.records.len(), 3);
    assert!(r.records.iter().all(|x| x.nu_step < 1e-6));
}

#[test]
fn decay_rejects_regular_points() {
    let p = Cone::plane(graph_plane(2, 2, &[0.0; 4]).unwrap(), 1).unwrap();
    let v = sample_cone(&p, 1.0 / 64.0, 1.2).unwrap();
    let c0 = complex_pair([1.0, 0.0]).unwrap();
    let err = decay_pipeline(&v, &c0, 0.5, 3, &[0.0; 4], &DecayOptions::default()).unwrap_err();
    assert!(matches!(err, Error::NotSingularPoint(_)), "{err}");
}
