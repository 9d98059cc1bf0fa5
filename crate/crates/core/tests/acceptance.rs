//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use tvlab_core::blowup::{dehomogenize, ConeField, HBasis};
use tvlab_core::conefit::{decay_pipeline, DecayOptions};
use tvlab_core::cones::{graph_plane, Cone};
use tvlab_core::decompose::{monodromy_test, outside_annulus, propagate_labels, square_loop, Monodromy};
use tvlab_core::excess::{excess_e, excess_q, radial_homogeneity_deficit, single_plane_ratio, QOptions, Ratio};
use tvlab_core::fixtures::{complex_pair, four_half_planes_cone, Fixture, FixtureId};
use tvlab_core::geometry::{Region, Subspace};
use tvlab_core::linalg;
use tvlab_core::linkclass::{broken_three_arc_link, classify_link, sample_link, LinkVerdict};
use tvlab_core::par;
use tvlab_core::stationarity::{bump_family, first_variation_defect, mss_residual_two_valued, ScalarBump};
use tvlab_core::twovalued::{lipschitz_estimate, metric_g, Pair2, TwoValuedGrid};
use tvlab_core::varifold::{sample_cone, sample_graph, sample_half_planes};
use tvlab_core::Result;

struct Outcome {
    pass: bool,
    summary: String,
    body: Value,
}

type Criterion = fn() -> Result<Outcome>;

fn random_pair(rng: &mut ChaCha8Rng, k: usize) -> Pair2 {
    let mut v = || (0..k).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
    Pair2::new(v(), v())
}

fn ac1_metric() -> Result<Outcome> {
    let mut worst_sym: f64 = 0.0;
    let mut worst_tri: f64 = f64::NEG_INFINITY;
    let mut identity_ok = true;
    for k in 1..=3 {
        let mut rng = ChaCha8Rng::seed_from_u64(k as u64);
        for _ in 0..10_000 {
            let a = random_pair(&mut rng, k);
            let b = random_pair(&mut rng, k);
            let c = random_pair(&mut rng, k);
            identity_ok &= metric_g(&a, &a) == 0.0 && (a == b || metric_g(&a, &b) > 0.0);
            worst_sym = worst_sym.max((metric_g(&a, &b) - metric_g(&b, &a)).abs());
            worst_tri = worst_tri.max(metric_g(&a, &c) - metric_g(&a, &b) - metric_g(&b, &c));
        }
    }
    let pass = identity_ok && worst_sym <= 1e-12 && worst_tri <= 1e-12;
    Ok(Outcome {
        pass,
        summary: format!("identity {identity_ok}, symmetry {worst_sym:.1e}, triangle slack {worst_tri:.1e}"),
        body: json!({"identity": identity_ok, "symmetry": worst_sym, "triangle_excess": worst_tri}),
    })
}

fn ac2_density() -> Result<Outcome> {
    let h = 1.0 / 256.0;
    let c = four_half_planes_cone(1)?;
    let v = sample_cone(&c, h, 0.5)?;
    let vertex = v.density_ratio(&[0.0; 4], 0.25)?;
    let plane = Cone::plane(graph_plane(2, 2, &[0.3, -0.2, 0.5, 0.1])?, 1)?;
    let vp = sample_cone(&plane, h, 0.5)?;
    let single = vp.density_ratio(&[0.0; 4], 0.25)?;
    let pass = (1.96..=2.04).contains(&vertex) && (0.98..=1.02).contains(&single);
    Ok(Outcome {
        pass,
        summary: format!("four half-planes {vertex:.5}, plane {single:.5}"),
        body: json!({"four_half_planes": vertex, "plane": single}),
    })
}

fn ac3_stationarity() -> Result<Outcome> {
    let c = four_half_planes_cone(1)?;
    let center = vec![0.05, 0.1, 0.0, 0.0];
    let fields = bump_family(&[center], 0.4);
    let mut defects = Vec::new();
    for h in [1.0 / 128.0, 1.0 / 256.0, 1.0 / 512.0] {
        let v = sample_cone(&c, h, 0.75)?;
        defects.push(first_variation_defect(&v, &fields)?.defect);
    }
    let fv_ratios: Vec<f64> = defects.windows(2).map(|w| w[0] / w[1]).collect();

    let lo = Fixture::new(FixtureId::LoTwoValued)?;
    let s = 0.55 / 2.0;
    let centers = [vec![0.55, 0.0, 0.0, 0.0], vec![s, s, s, s], vec![0.0, -0.3, 0.0, 0.45]];
    let tests: Vec<ScalarBump> = centers
        .iter()
        .flat_map(|c| (0..3).map(move |k| ScalarBump { center: c.clone(), radius: 0.2, component: k }))
        .collect();
    let mut mss = Vec::new();
    for h in [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0] {
        mss.push(mss_residual_two_valued(&lo, h, &tests, 1e-3)?.residual);
    }
    let mss_ratios: Vec<f64> = mss.windows(2).map(|w| w[0] / w[1]).collect();

    let axis = Subspace::linear(4, &[linalg::unit(4, 1)])?;
    let sides = vec![linalg::unit(4, 0), linalg::unit(4, 2), linalg::scale(&linalg::unit(4, 0), -1.0)];
    let broken = sample_half_planes(&axis, &sides, 1.0 / 256.0, 0.75)?;
    let broken_defect = first_variation_defect(&broken, &fields)?.defect;
    let separation = broken_defect / defects[1];

    let pass = fv_ratios.iter().all(|r| *r >= 1.8) && mss_ratios.iter().all(|r| *r >= 1.8) && separation > 10.0;
    Ok(Outcome {
        pass,
        summary: format!(
            "first variation {:?} (ratios {:?}); mss {:?} (ratios {:?}); broken/balanced {separation:.3e}",
            sci(&defects),
            fixed(&fv_ratios),
            sci(&mss),
            fixed(&mss_ratios)
        ),
        body: json!({
            "first_variation": defects, "first_variation_ratios": fv_ratios,
            "mss": mss, "mss_ratios": mss_ratios,
            "broken_defect": broken_defect, "broken_over_balanced": separation,
        }),
    })
}

fn ac4_decay() -> Result<Outcome> {
    let f = Fixture::new(FixtureId::HoloPairCurved { a: [1.0, 0.0], b: [1.0, 0.0] })?;
    let v = sample_graph(&f.grid(1.0 / 512.0, 0.75)?)?;
    let c0 = complex_pair([1.0, 0.0])?;
    let r = decay_pipeline(&v, &c0, 0.5, 5, &[0.0; 4], &DecayOptions::default())?;
    let slope = r.slope.unwrap_or(f64::NAN);
    let nu: Vec<f64> = r.records.iter().map(|rec| rec.nu_step).collect();
    let ratios: Vec<f64> = nu.windows(2).map(|w| w[1] / w[0]).collect();
    let geometric = if nu.len() >= 2 && nu[0] > 0.0 {
        (nu[nu.len() - 1] / nu[0]).powf(1.0 / (nu.len() - 1) as f64)
    } else {
        f64::NAN
    };
    let decreasing_on_average = geometric < 1.0;
    let strictly = ratios.iter().all(|r| *r < 1.0);
    let pass = (1.5..=2.5).contains(&slope) && r.records.len() == 5 && decreasing_on_average && geometric <= 0.7;
    Ok(Outcome {
        pass,
        summary: format!(
            "slope {slope:.3}; nu steps {:?}; geometric mean ratio {geometric:.3} (step ratios {:?}, strictly decreasing: {strictly})",
            sci(&nu),
            fixed(&ratios)
        ),
        body: json!({"slope": slope, "nu_steps": nu, "ratios": ratios, "geometric_mean_ratio": geometric, "strictly_decreasing": strictly,
                     "one_sided": r.records.iter().map(|x| x.one_sided).collect::<Vec<_>>(),
                     "q_gate_ok": r.gates.q_ok}),
    })
}

fn ac5_exact_cones() -> Result<Outcome> {
    let cones = [
        ("complex_pair_1", complex_pair([1.0, 0.0])?),
        ("complex_pair_2", complex_pair([0.5, 2.0])?),
        ("four_half_planes", four_half_planes_cone(1)?),
    ];
    let mut worst: f64 = 0.0;
    let mut rows = Vec::new();
    for (name, c) in &cones {
        let v = sample_cone(c, 1.0 / 64.0, 2.5)?;
        let mass = v.mass();
        let d = c.ambient_dim();
        let e = excess_e(&v, c, &Region::unit_ball(d))?;
        let q = excess_q(&v, c, &QOptions::default())?.q;
        let tilt = v.axis_tilt(c, &Region::unit_ball(d))?;
        let axis = c.axis().expect("axis").clone();
        let torus = Region::torus(axis, 0.5, 0.25, vec![0.0; d])?;
        let field = ConeField::new(c.clone(), 1.0 / 64.0, 1.0)?;
        let radial = radial_homogeneity_deficit(&field, c, &torus, 0.25)?;
        let decay = decay_pipeline(&v, c, 0.5, 3, &vec![0.0; d], &DecayOptions::default())?;
        let scaled = decay.records.iter().map(|r| r.one_sided + r.reverse).fold(0.0, f64::max);
        let values = [e, q, tilt, radial, scaled];
        let rel = values.iter().fold(0.0f64, |m, x| m.max(x.abs())) / mass;
        worst = worst.max(rel);
        rows.push(json!({"cone": name, "mass": mass, "excess_e": e, "q": q, "axis_tilt": tilt,
                         "radial_deficit": radial, "decay_max": scaled, "records": decay.records.len()}));
    }
    Ok(Outcome {
        pass: worst < 1e-8,
        summary: format!("largest value / mass {worst:.2e} over {} cones", cones.len()),
        body: json!({"cones": rows, "worst_relative": worst}),
    })
}

fn ac6_decomposition() -> Result<Outcome> {
    let h = 1.0 / 128.0;
    let w = Fixture::new(FixtureId::BranchedW32)?.grid(h, 1.0)?;
    let mut swaps = 0;
    let mut loops = Vec::new();
    for i in 0..8 {
        let t = i as f64 * 0.8;
        let center = [0.03 * t.cos(), 0.03 * t.sin()];
        let cells = 20 + 8 * i as i64;
        let lp = square_loop(&w, &center, cells)?;
        let m = monodromy_test(&w, &lp)?;
        if m == Monodromy::Swap {
            swaps += 1;
        }
        loops.push(json!({"center": center, "half_cells": cells, "monodromy": m}));
    }
    let holo = Fixture::new(FixtureId::HoloPairCurved { a: [1.0, 0.0], b: [1.0, 0.0] })?.grid(h, 1.0)?;
    let excl = outside_annulus(&holo, 0.25, 0.9);
    let l0 = propagate_labels(&holo, &excl, None)?;
    let l1 = propagate_labels(&holo, &excl, Some(holo.active().len() / 3))?;
    let seeds_agree = l0.agrees_up_to_swap(&l1);
    let wl = propagate_labels(&w, &outside_annulus(&w, 0.25, 0.9), None)?;
    let pass = swaps == 8 && l0.decomposed && l0.conflicts.is_empty() && seeds_agree;
    Ok(Outcome {
        pass,
        summary: format!(
            "swap on {swaps}/8 loops; holo decomposed {} with {} conflicts, seeds agree {seeds_agree}; branched annulus conflicts {}",
            l0.decomposed,
            l0.conflicts.len(),
            wl.conflicts.len()
        ),
        body: json!({"loops": loops, "holo_decomposed": l0.decomposed, "holo_conflicts": l0.conflicts.len(),
                     "holo_components": l0.components, "seeds_agree": seeds_agree,
                     "branched_conflicts": wl.conflicts.len()}),
    })
}

fn ac7_links() -> Result<Outcome> {
    let m = 256;
    let pair = classify_link(&sample_link(&complex_pair([1.0, 0.0])?, m)?)?;
    let four = classify_link(&sample_link(&four_half_planes_cone(1)?, m)?)?;
    let broken = classify_link(&broken_three_arc_link(m)?)?;
    let gap = four.antipodal_error.unwrap_or(f64::INFINITY);
    let balance = four.balance_defects.iter().cloned().fold(0.0, f64::max);
    let pass = pair.verdict == LinkVerdict::TwoDisjointGreatCircles
        && pair.junctions.is_empty()
        && four.verdict == LinkVerdict::FourHalfCircles
        && gap < 2.0 / m as f64
        && balance < 0.02
        && broken.verdict == LinkVerdict::Inconsistent;
    Ok(Outcome {
        pass,
        summary: format!(
            "pair {:?}; four half-planes {:?} (antipodal error {gap:.1e}, balance {balance:.2e}); broken {:?}",
            pair.verdict, four.verdict, broken.verdict
        ),
        body: json!({"pair": pair.verdict, "four": four.verdict, "antipodal_error": gap,
                     "balance": four.balance_defects, "broken": broken.verdict,
                     "broken_balance": broken.balance_defects}),
    })
}

fn ac8_dehomogenization() -> Result<Outcome> {
    let mut rows = Vec::new();
    let mut pass = true;
    for (name, c) in [("four_half_planes", four_half_planes_cone(1)?), ("complex_pair", complex_pair([1.0, 0.0])?)] {
        let basis = HBasis::new(&c)?;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let coef: Vec<f64> = (0..basis.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let psi = basis.element(&coef);
        let field = ConeField::from_fn(c.clone(), 1.0 / 32.0, 1.0, |x, piece| basis.eval(&psi, piece, x))?;
        let z = vec![0.0; c.ambient_dim()];
        let d = dehomogenize(&field, &z, 1.0)?;
        let err = d.coefficients.iter().zip(&coef).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        // idempotence: the projection of the projected element is itself
        let projected = ConeField::from_fn(c.clone(), 1.0 / 32.0, 1.0, |x, piece| basis.eval(&d.element, piece, x))?;
        let again = dehomogenize(&projected, &z, 1.0)?;
        let idem = again.coefficients.iter().zip(&d.coefficients).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let ok = err < 1e-10 && d.norms.orthogonality < 1e-8 && idem < 1e-10;
        pass &= ok;
        rows.push(json!({"cone": name, "dim_h": basis.dim(), "coefficient_error": err,
                         "orthogonality": d.norms.orthogonality, "idempotence": idem}));
    }
    Ok(Outcome {
        pass,
        summary: rows
            .iter()
            .map(|r| {
                format!(
                    "{}: coef err {:.1e}, ortho {:.1e}, idem {:.1e}",
                    r["cone"].as_str().unwrap_or(""),
                    r["coefficient_error"].as_f64().unwrap_or(f64::NAN),
                    r["orthogonality"].as_f64().unwrap_or(f64::NAN),
                    r["idempotence"].as_f64().unwrap_or(f64::NAN)
                )
            })
            .collect::<Vec<_>>()
            .join("; "),
        body: json!({"cones": rows}),
    })
}

type Sheet = fn(&[f64]) -> f64;

fn ac9_single_plane() -> Result<Outcome> {
    // C = {y = 0} ∪ {y = x₁} over ℝ² in ℝ³
    let c = Cone::pair(graph_plane(2, 1, &[0.0, 0.0])?, graph_plane(2, 1, &[1.0, 0.0])?)?;
    // both sheets stay near P₁ = {y = 0}, where the comparison applies
    let configs: [(&str, Sheet, Sheet); 5] = [
        ("waves", |x| 0.05 * (std::f64::consts::PI * x[0]).sin(), |x| -0.05 * (std::f64::consts::PI * x[1]).cos()),
        ("crossing_saddles", |x| 0.1 * x[0] * x[1], |x| -0.1 * x[0] * x[1]),
        ("offset_sheets", |_| 0.1, |_| -0.05),
        ("tilted_sheets", |x| 0.1 * x[1], |x| 0.02 - 0.1 * x[1]),
        ("quadratic_and_linear", |x| 0.05 * (x[0] * x[0] - x[1] * x[1]), |x| 0.08 * x[0]),
    ];
    let mut rows = Vec::new();
    let mut pass = true;
    for (name, u1, u2) in configs {
        let mut ratios = Vec::new();
        let mut lips = Vec::new();
        for h in [1.0 / 64.0, 1.0 / 128.0] {
            let g = TwoValuedGrid::from_fn(2, 1, 1.2, h, |x| Ok(Pair2::new(vec![u1(x)], vec![u2(x)])))?;
            lips.push(lipschitz_estimate(&g)?);
            let v = sample_graph(&g)?;
            ratios.push(match single_plane_ratio(&v, &c)? {
                Ratio::Finite(r) => r,
                Ratio::Infinite => f64::INFINITY,
            });
        }
        let variation = ratios[0].max(ratios[1]) / ratios[0].min(ratios[1]);
        let ok = ratios.iter().all(|r| r.is_finite()) && variation < 2.0;
        pass &= ok;
        rows.push(json!({"config": name, "ratios": ratios, "variation": variation, "lipschitz": lips}));
    }
    let summary = rows
        .iter()
        .map(|r| format!("{} {:.3}", r["config"].as_str().unwrap_or(""), r["variation"].as_f64().unwrap_or(f64::NAN)))
        .collect::<Vec<_>>()
        .join(", ");
    Ok(Outcome { pass, summary: format!("refinement variation: {summary}"), body: json!({"configs": rows}) })
}

fn sci(v: &[f64]) -> Vec<String> {
    v.iter().map(|x| format!("{x:.3e}")).collect()
}

fn fixed(v: &[f64]) -> Vec<String> {
    v.iter().map(|x| format!("{x:.3}")).collect()
}

const CRITERIA: [(&str, Criterion, f64); 9] = [
    ("metric suite", ac1_metric, 1.0),
    ("density at cone vertices", ac2_density, 10.0),
    ("stationarity refinement", ac3_stationarity, 60.0),
    ("excess decay", ac4_decay, 300.0),
    ("exact-cone null tests", ac5_exact_cones, 30.0),
    ("decomposition and monodromy", ac6_decomposition, 10.0),
    ("link classification", ac7_links, 5.0),
    ("dehomogenization", ac8_dehomogenization, 5.0),
    ("single-plane comparison", ac9_single_plane, 60.0),
];

fn run_all() -> Vec<(bool, String, String, f64)> {
    CRITERIA
        .iter()
        .map(|(_, f, _)| {
            let t = Instant::now();
            let out = f();
            let secs = t.elapsed().as_secs_f64();
            match out {
                Ok(o) => (o.pass, o.summary, serde_json::to_string(&o.body).expect("serializable"), secs),
                Err(e) => (false, format!("error: {e}"), format!("{{\"error\":\"{}\"}}", e.kind()), secs),
            }
        })
        .collect()
}

fn main() {
    let first = run_all();
    let mut failures = 0;
    for (i, ((name, _, limit), (pass, summary, _, secs))) in CRITERIA.iter().zip(&first).enumerate() {
        let in_time = *secs < *limit;
        let ok = *pass && in_time;
        if !ok {
            failures += 1;
        }
        let time_note = if in_time { String::new() } else { format!(" over the {limit} s budget") };
        println!(
            "AC{} {} {name}: {summary} [{secs:.2} s{time_note}]",
            i + 1,
            if ok { "PASS" } else { "FAIL" }
        );
    }
    // second run on the sequential path must reproduce every body byte for byte
    par::set_sequential(true);
    let second = run_all();
    par::set_sequential(false);
    let differing: Vec<usize> = first
        .iter()
        .zip(&second)
        .enumerate()
        .filter(|(_, (a, b))| a.2 != b.2)
        .map(|(i, _)| i + 1)
        .collect();
    let ok = differing.is_empty();
    if !ok {
        failures += 1;
    }
    println!(
        "AC10 {} reproducibility: {}",
        if ok { "PASS" } else { "FAIL" },
        if ok {
            "criteria 1-9 report bodies identical across a parallel and a sequential run".to_string()
        } else {
            format!("bodies differ for criteria {differing:?}")
        }
    );
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
