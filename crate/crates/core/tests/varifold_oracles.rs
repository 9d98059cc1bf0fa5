use tvlab_core::cones::{graph_plane, Cone};
use tvlab_core::fixtures::{complex_pair, four_half_planes_cone, lo_map, Fixture, FixtureId};
use tvlab_core::geometry::Region;
use tvlab_core::twovalued::{Pair2, TwoValuedGrid};
use tvlab_core::varifold::{omega, sample_cone, sample_graph};

#[test]
fn density_is_monotone_at_vertices_of_exact_cones() {
    let cones = [
        Cone::plane(graph_plane(2, 2, &[0.0; 4]).unwrap(), 2).unwrap(),
        complex_pair([1.0, 0.0]).unwrap(),
        four_half_planes_cone(1).unwrap(),
    ];
    for c in &cones {
        let v = sample_cone(c, 1.0 / 128.0, 1.0).unwrap();
        let mut last = 0.0;
        for rho in [0.125, 0.25, 0.5, 0.9] {
            let r = v.density_ratio(&[0.0; 4], rho).unwrap();
            assert!(r >= last * 0.98, "density dropped: {last} → {r}");
            assert!((r - 2.0).abs() < 0.04, "{r}");
            last = r;
        }
    }
}

#[test]
fn lo_graph_density_is_constant_in_radius() {
    // the LO graph is a cone: its density at 0 equals mass(B₁ ∩ graph)/ω₄, constant in ρ
    let f = TwoValuedGrid::from_fn(4, 3, 1.0, 1.0 / 16.0, |x| Ok(Pair2::double(lo_map(x).to_vec()))).unwrap();
    let v = sample_graph(&f).unwrap();
    let a = v.density_ratio(&[0.0; 7], 0.9).unwrap();
    let b = v.density_ratio(&[0.0; 7], 0.5).unwrap();
    assert!((a - b).abs() / b < 0.05, "{a} vs {b}");
}

#[test]
fn tilted_double_plane_axis_tilt_closed_form() {
    // graph of s·x₁ over ℝ²; the x₁ axis leaves the tangent plane by angle φ with tan φ = s
    let s: f64 = 0.4;
    let f = Fixture::new(FixtureId::TiltedPlane { slope: s }).unwrap().grid(1.0 / 64.0, 1.5).unwrap();
    let v = sample_graph(&f).unwrap();
    let c = Cone::pair(graph_plane(2, 1, &[0.0, 0.0]).unwrap(), graph_plane(2, 1, &[0.0, 1.0]).unwrap()).unwrap();
    let region = Region::unit_ball(3);
    let sin2 = s * s / (1.0 + s * s);
    let mass = v.mass_in(&region).unwrap();
    let tilt = v.axis_tilt(&c, &region).unwrap();
    assert!((tilt - mass * sin2).abs() < 1e-9 * mass, "{tilt} vs {}", mass * sin2);
}

#[test]
fn plane_mass_matches_area_formula() {
    let m = [0.3, -0.2, 0.5, 0.1];
    let p = Cone::plane(graph_plane(2, 2, &m).unwrap(), 1).unwrap();
    let v = sample_cone(&p, 1.0 / 128.0, 0.5).unwrap();
    // √det(I + MᵀM) over a disc of radius 0.5
    let g = nalgebra::Matrix2::new(1.0 + m[0] * m[0] + m[2] * m[2], m[0] * m[1] + m[2] * m[3], m[0] * m[1] + m[2] * m[3], 1.0 + m[1] * m[1] + m[3] * m[3]);
    let exact = g.determinant().sqrt() * omega(2) * 0.25;
    assert!((v.mass() - exact).abs() < 0.01 * exact);
}

#[test]
fn window_rescales_mass_and_points() {
    let c = complex_pair([1.0, 0.0]).unwrap();
    let v = sample_cone(&c, 1.0 / 64.0, 1.0).unwrap();
    let w = v.window(&[0.0; 4], 0.5, 1.0).unwrap();
    // a cone is invariant under dilation: mass in B₁ after rescaling equals mass in B₁ before, up to lattice error
    let m1 = v.mass_in(&Region::unit_ball(4)).unwrap();
    let m2 = w.mass_in(&Region::unit_ball(4)).unwrap();
    assert!((m1 - m2).abs() < 0.03 * m1, "{m1} vs {m2}");
    assert!((w.resolution() - 2.0 / 64.0).abs() < 1e-15);
}
