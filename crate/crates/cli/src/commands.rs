use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use tvlab_core::blowup::{dehomogenize, ConeField};
use tvlab_core::conefit::{decay_pipeline, fit_cone, DecayOptions, DecayReport, FitClass, FitOptions};
use tvlab_core::cones::Cone;
use tvlab_core::decompose::{detect_doubles, inflate, propagate_labels};
use tvlab_core::excess::{coarser_excess, excess_e, excess_q, radial_homogeneity_deficit, single_plane_ratio, QOptions};
use tvlab_core::fixtures::{Fixture, FixtureId};
use tvlab_core::geometry::Region;
use tvlab_core::linkclass::{classify_link, sample_link};
use tvlab_core::stationarity::{bump_family, first_variation_defect};
use tvlab_core::twovalued::{lipschitz_estimate, TwoValuedGrid};
use tvlab_core::varifold::{sample_graph, SampledVarifold};

use crate::config::RunConfig;
use crate::{Command, FixtureArgs, GridArgs};

#[derive(Serialize)]
struct Envelope<'a, R: Serialize> {
    tool: &'static str,
    version: &'static str,
    config: &'a RunConfig,
    report: R,
}

fn envelope<R: Serialize>(cfg: &RunConfig, report: R) -> Result<String> {
    Ok(serde_json::to_string_pretty(&Envelope { tool: "tvlab", version: tvlab_core::VERSION, config: cfg, report })?)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Build the report text and also write it to `out` when given.
fn emit<R: Serialize>(cfg: &RunConfig, report: R, out: &Option<PathBuf>) -> Result<String> {
    let text = envelope(cfg, report)?;
    if let Some(path) = out {
        write_file(path, &format!("{text}\n"))?;
    }
    Ok(text)
}

fn load_fixture(args: &FixtureArgs, seed: u64) -> Result<Fixture> {
    let mut params = BTreeMap::new();
    for p in &args.params {
        let (k, v) = p.split_once('=').ok_or_else(|| anyhow!("parameter '{p}' is not key=value"))?;
        params.insert(k.trim().to_string(), v.trim().to_string());
    }
    if args.fixture.starts_with("perturbed:") {
        params.entry("seed".into()).or_insert_with(|| seed.to_string());
    }
    Ok(Fixture::new(FixtureId::from_name(&args.fixture, &params)?)?)
}

fn sample(f: &Fixture, g: &GridArgs, h: f64, radius: f64) -> Result<TwoValuedGrid> {
    Ok(f.grid(g.h.unwrap_or(h), g.radius.unwrap_or(radius))?)
}

fn parse_point(s: &str, dim: usize) -> Result<Vec<f64>> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| anyhow!("bad number '{t}' in '{s}'")))
        .collect::<Result<_>>()?;
    match v.len() {
        1 => Ok(vec![v[0]; dim]),
        l if l == dim => Ok(v),
        l => bail!("point '{s}' has {l} coordinates, expected {dim}"),
    }
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn reference_cone(f: &Fixture, file: &Option<PathBuf>) -> Result<Cone> {
    match file {
        Some(path) => load_json(path),
        None => f
            .id()
            .natural_cone()?
            .ok_or_else(|| anyhow!("fixture '{}' has no natural cone; pass --cone", f.id().name())),
    }
}

fn fit_options(cfg: &RunConfig) -> FitOptions {
    FitOptions { seed: cfg.seed, tol: cfg.tol("fit.tol"), perturbation: cfg.tol("fit.perturbation"), ..FitOptions::default() }
}

/// Optional report entries: the value, or why it is absent.
fn optional<T: Serialize>(r: std::result::Result<T, String>) -> Value {
    match r {
        Ok(v) => json!({"value": v}),
        Err(reason) => json!({"unavailable": reason}),
    }
}

pub fn run(cmd: &Command, cfg: &RunConfig) -> Result<String> {
    match cmd {
        Command::Gen { fixture, grid, out, varifold_csv } => {
            let f = load_fixture(fixture, cfg.seed)?;
            let g = sample(&f, grid, 1.0 / 64.0, 1.0)?;
            let text = g.to_json()?;
            if let Some(path) = out {
                write_file(path, &text)?;
            }
            if let Some(path) = varifold_csv {
                write_varifold_csv(&sample_graph(&g)?, path)?;
            }
            let report = json!({
                "fixture": f.id(),
                "n": g.n(), "k": g.k(), "h": g.h(), "radius": g.radius(),
                "nodes": g.active().len(),
                "lipschitz": lipschitz_estimate(&g)?,
                "out": out, "varifold_csv": varifold_csv,
            });
            envelope(cfg, report)
        }
        Command::Excess { fixture, grid, cone, reference, field, tau, out } => {
            let f = load_fixture(fixture, cfg.seed)?;
            let c = reference_cone(&f, cone)?;
            let v = sample_graph(&sample(&f, grid, 1.0 / 64.0, 2.25)?)?;
            let unit = Region::unit_ball(v.ambient_dim());
            let e = excess_e(&v, &c, &unit)?;
            let q = excess_q(&v, &c, &QOptions { collar: cfg.tol("q.collar"), ..QOptions::default() })?;
            let ratio = if c.is_pair() {
                single_plane_ratio(&v, &c).map_err(|e| e.to_string())
            } else {
                Err("the cone is not a pair of planes".into())
            };
            let coarser = match reference {
                Some(path) => {
                    let c0: Cone = load_json(path)?;
                    coarser_excess(&v, &c, &c0, &fit_options(cfg)).map_err(|e| e.to_string())
                }
                None => Err("needs --reference".to_string()),
            };
            let deficit = match field {
                Some(path) => {
                    let u: ConeField = load_json(path)?;
                    let axis = u.cone().axis().ok_or_else(|| anyhow!("field cone has empty axis"))?.clone();
                    let region = Region::torus(axis, 0.5, 0.5 - tau / 2.0 - 1e-9, vec![0.0; c.ambient_dim()])?;
                    radial_homogeneity_deficit(&u, &c, &region, *tau).map_err(|e| e.to_string())
                }
                None => Err("needs --field".to_string()),
            };
            let report = json!({
                "fixture": f.id(),
                "cone": c,
                "mass_unit_ball": v.mass_in(&unit)?,
                "excess_e": e,
                "q": q,
                "single_plane_ratio": optional(ratio),
                "coarser_excess": optional(coarser),
                "radial_homogeneity_deficit": optional(deficit),
            });
            emit(cfg, report, out)
        }
        Command::Fit { fixture, grid, class, cone, out } => {
            let f = load_fixture(fixture, cfg.seed)?;
            let c0 = reference_cone(&f, cone)?;
            let class = match class {
                Some(s) => FitClass::parse(s)?,
                None => FitClass::of(&c0),
            };
            let v = sample_graph(&sample(&f, grid, 1.0 / 64.0, 1.25)?)?;
            let r = fit_cone(&v, class, &c0, &Region::unit_ball(v.ambient_dim()), &fit_options(cfg))?;
            emit(cfg, json!({"fixture": f.id(), "class": class, "initial": c0, "fit": r}), out)
        }
        Command::Decay { fixture, grid, cone, center, theta, steps, singular_graph, out, csv } => {
            let f = load_fixture(fixture, cfg.seed)?;
            let c0 = reference_cone(&f, cone)?;
            let v = sample_graph(&sample(&f, grid, 1.0 / 512.0, 0.75)?)?;
            let z = parse_point(center, v.ambient_dim())?;
            let opts = DecayOptions {
                fit: fit_options(cfg),
                q_gate: cfg.tol("decay.q_gate"),
                singular_graph: *singular_graph,
                ..DecayOptions::default()
            };
            let r = decay_pipeline(&v, &c0, *theta, *steps, &z, &opts)?;
            let csv_path = csv.clone().or_else(|| out.as_ref().map(|p| p.with_extension("csv")));
            if let Some(path) = &csv_path {
                write_decay_csv(&r, path)?;
            }
            emit(cfg, json!({"fixture": f.id(), "csv": csv_path, "decay": r}), out)
        }
        Command::Decompose { fixture, grid, start, out } => {
            let f = load_fixture(fixture, cfg.seed)?;
            let g = sample(&f, grid, 1.0 / 64.0, 1.0)?;
            let l = lipschitz_estimate(&g)?;
            let tol = cfg.tol("decompose.double_factor") * l * g.h();
            let doubles = detect_doubles(&g, tol)?;
            let labelling = propagate_labels(&g, &inflate(&g, &doubles), *start)?;
            let positions: Vec<Vec<f64>> = g.active().iter().map(|&a| g.position(a)).collect();
            let report = json!({
                "fixture": f.id(),
                "n": g.n(), "k": g.k(), "h": g.h(), "radius": g.radius(),
                "lipschitz": l,
                "double_tolerance": tol,
                "double_nodes": doubles.len(),
                "branch_points": labelling.branch_points,
                "positions": positions,
                "labelling": labelling,
            });
            emit(cfg, report, out)
        }
        Command::ClassifyLink { fixture, m, out } => {
            let f = load_fixture(fixture, cfg.seed)?;
            let s = sample_link(&f, *m)?;
            let c = classify_link(&s)?;
            emit(cfg, json!({"fixture": f.id(), "m": m, "classification": c}), out)
        }
        Command::VerifyStationary { fixture, grid, centers, bump_radius, out } => {
            let f = load_fixture(fixture, cfg.seed)?;
            let v = sample_graph(&sample(&f, grid, 1.0 / 64.0, 1.0)?)?;
            let pts = centers
                .split(';')
                .map(|c| parse_point(c, v.ambient_dim()))
                .collect::<Result<Vec<_>>>()?;
            let r = first_variation_defect(&v, &bump_family(&pts, *bump_radius))?;
            emit(cfg, json!({"fixture": f.id(), "minimal_fixture": f.id().is_minimal(), "first_variation": r}), out)
        }
        Command::Dehomogenize { field, center, rho, out } => {
            let u: ConeField = load_json(field)?;
            let z = parse_point(center, u.cone().ambient_dim())?;
            let d = dehomogenize(&u, &z, *rho)?;
            let report = json!({
                "field": field,
                "center": z,
                "rho": rho,
                "coefficients": d.coefficients,
                "element": d.element,
                "norms": d.norms,
            });
            emit(cfg, report, out)
        }
        Command::Density { fixture, grid, center, rho, out } => {
            let f = load_fixture(fixture, cfg.seed)?;
            let v = sample_graph(&sample(&f, grid, 1.0 / 256.0, 1.0)?)?;
            let z = parse_point(center, v.ambient_dim())?;
            let report = json!({
                "fixture": f.id(),
                "center": z,
                "rho": rho,
                "ratio": v.density_ratio(&z, *rho)?,
                "profile": v.density_profile(&z, *rho)?,
            });
            emit(cfg, report, out)
        }
    }
}

fn write_decay_csv(r: &DecayReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["j", "scale", "excess", "nu_step", "rot_step"])?;
    for rec in &r.records {
        w.serialize((rec.j, rec.scale, rec.one_sided, rec.nu_step, rec.rotation_step))?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `x1..x{n+k}, weight, t1..t{n(n+k)}, sheet`; the tangent cells hold the
/// orthonormal tangent rows and are empty when absent, as is an unlabelled sheet.
fn write_varifold_csv(v: &SampledVarifold, path: &Path) -> Result<()> {
    let d = v.ambient_dim();
    let tw = v.n() * d;
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    let mut header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    header.push("weight".into());
    header.extend((1..=tw).map(|i| format!("t{i}")));
    header.push("sheet".into());
    w.write_record(&header)?;
    for i in 0..v.len() {
        let mut row: Vec<String> = v.point(i).iter().map(|x| x.to_string()).collect();
        row.push(v.weight(i).to_string());
        match v.tangent(i) {
            Some(t) => row.extend(t.iter().map(|x| x.to_string())),
            None => row.extend(std::iter::repeat_n(String::new(), tw)),
        }
        row.push(v.sheet(i).map(|s| s.to_string()).unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
