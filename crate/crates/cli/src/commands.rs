//! The five subcommands. Each returns its summary after writing its files.

use std::collections::BTreeMap;
use std::path::PathBuf;

use kahler_core::complexad::CPoint;
use kahler_core::domains::{
    boundary_sequence, defining_function_by_name, fefferman_f, horospherical_potential,
    length_identity_check, potential_by_name, w_inverse, w_metric, MoebiusMap,
};
use kahler_core::kaehler::{
    curvature_identity_residual, einstein_residual, key_equation_residual, pde_residual,
    s_operator,
};
use kahler_core::linalg::{max_abs, CMat};
use kahler_core::ma_solver::{boundary_limit_scan, decay_fit, solve_radial, DEFAULT_TOL};
use kahler_core::sampling::sample_ball;
use kahler_core::scaling::{gronwall_suite, pluriharmonic_residual, run_scaling, scaling_grid, ScalingRun};
use kahler_core::vectorfield::{build_field, flow, flow_automorphy_check, rho_scaled_completeness_check};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::Settings;
use crate::summary::{write_csv, write_json, Comparison, Item, Summary, REPORT_SCHEMA, SUMMARY_SCHEMA};
use crate::CliError;

/// Radius of the sampling ball for pointwise checks.
const SAMPLE_RADIUS: f64 = 0.8;
const FLOW_TOL: f64 = 1e-12;

fn max_of(xs: &[f64]) -> Option<f64> {
    // NaN propagates, so a bad sample cannot hide behind a good one
    xs.iter().copied().reduce(|a, b| if a.is_nan() || b.is_nan() { f64::NAN } else { a.max(b) })
}

fn min_of(xs: &[f64]) -> Option<f64> {
    xs.iter().copied().reduce(|a, b| if a.is_nan() || b.is_nan() { f64::NAN } else { a.min(b) })
}

fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    Some(v[v.len() / 2])
}

/// File-name form of a catalog name: `radial_eps=0.1` → `radial_eps_0p1`.
fn slug(name: &str) -> String {
    name.replace('=', "_").replace('.', "p")
}

fn e1(n: usize, sign: f64) -> CPoint {
    let mut c = vec![Complex64::new(0.0, 0.0); n];
    c[0] = Complex64::new(sign, 0.0);
    CPoint::new(c).expect("finite")
}

fn fmt(x: f64) -> String {
    format!("{x:.17e}")
}

pub fn verify(s: &Settings) -> Result<Summary, CliError> {
    let mut items = Vec::new();
    let mut warnings = Vec::new();
    if s.sample_count == 0 {
        warnings.push("sample_count = 0: pointwise checks pass vacuously".to_string());
    }
    let mut csv = String::from("potential,n,index,einstein,pde,curvature_identity,key_equation,s_trace\n");
    for &n in &s.dims {
        let k2 = ((n + 1) * (n + 1)) as f64;
        let pts = sample_ball(n, SAMPLE_RADIUS, s.sample_count, s.seed);
        for name in &s.potentials {
            let phi = potential_by_name(name, n)?;
            let subject = format!("{name} n={n}");
            let (mut ein, mut pde, mut curv, mut key, mut s_eig, mut s_tr) =
                (vec![], vec![], vec![], vec![], vec![], vec![]);
            for (i, p) in pts.iter().enumerate() {
                if !phi.contains(p) {
                    warnings.push(format!("{subject}: sample {i} outside the domain, skipped"));
                    continue;
                }
                ein.push(einstein_residual(&phi, p)?);
                pde.push(pde_residual(&phi, p)?);
                curv.push(curvature_identity_residual(&phi, p)?);
                key.push(key_equation_residual(&phi, p)?);
                let op = s_operator(&phi, p)?;
                match (op.grad_eigenvalue, op.grad_eigen_residual) {
                    (Some(l), Some(r)) => s_eig.push((l - k2).abs().max(r)),
                    _ => s_eig.push(f64::NAN),
                }
                s_tr.push((op.trace - k2).abs());
                csv.push_str(&format!(
                    "{name},{n},{i},{},{},{},{},{}\n",
                    fmt(ein[ein.len() - 1]),
                    fmt(pde[pde.len() - 1]),
                    fmt(curv[curv.len() - 1]),
                    fmt(key[key.len() - 1]),
                    fmt(op.trace)
                ));
            }
            let lt = |claim: &str, desc: &str, v: &[f64]| {
                Item::new(claim, subject.clone(), desc, max_of(v), s.tolerance(claim), Comparison::Lt)
            };
            items.push(lt("einstein", "max |Ric + (n+1) g|", &ein));
            items.push(lt("pde", "max residual of the length PDE for ‖∂φ‖²", &pde));
            items.push(lt("curvature_identity", "max residual of the third-derivative commutation identities", &curv));
            if phi.constant_length().is_some() {
                items.push(lt("key_equation", "max |φ_{α;γ}φ^α + (n+1)φ_γ|", &key));
                items.push(lt("s_eigenvector", "max deviation of grad φ from an eigenvector of S with eigenvalue (n+1)²", &s_eig));
                items.push(lt("s_trace", "max |tr S − (n+1)²|", &s_tr));
            } else if name == "ball" {
                items.push(Item::new(
                    "key_equation_control",
                    subject.clone(),
                    "median key-equation residual; must be large for a non-constant-length potential",
                    median(&key),
                    s.tolerance("key_equation_control"),
                    Comparison::Gt,
                ));
            }
        }
        for name in &s.domains {
            let def = defining_function_by_name(name, n)?;
            let subject = format!("{name} n={n}");
            let (mut inv, mut len, mut bound, mut fef) = (vec![], vec![], vec![], vec![]);
            for p in pts.iter().filter(|p| def.contains(p)) {
                let prod = w_inverse(&def, p)? * w_metric(&def, p)?;
                inv.push(max_abs(&(prod - CMat::identity(n, n))));
                let (lhs, rhs) = length_identity_check(&def, p)?;
                len.push((lhs - rhs).abs());
                bound.push(lhs - 1.0);
                fef.push(fefferman_f(&def, p)?.abs());
            }
            let lt = |claim: &str, desc: &str, v: &[f64], cmp| {
                Item::new(claim, subject.clone(), desc, max_of(v), s.tolerance(claim), cmp)
            };
            items.push(lt("metric_inverse", "max |w⁻¹ w − I| for w = −log(−r)", &inv, Comparison::Lt));
            items.push(lt("length_identity", "max |w^{β̄α}w_α w_β̄ − |∂r|²/(|∂r|² − r)|", &len, Comparison::Lt));
            items.push(lt("length_bound", "max (w^{β̄α}w_α w_β̄ − 1)", &bound, Comparison::Le));
            if name == "ball" {
                items.push(lt("fefferman_ball", "max |F| for the ball", &fef, Comparison::Lt));
            }
        }
    }
    write_csv(&s.out, "verify_points.csv", "kahler-verify-points", &csv)?;
    let summary = Summary::new(s, items, warnings);
    write_json(&s.out, "verify.json", &summary)?;
    Ok(summary)
}

pub fn scale(s: &Settings) -> Result<Summary, CliError> {
    let mut items = Vec::new();
    let mut warnings = Vec::new();
    for name in &s.potentials {
        if !matches!(name.as_str(), "ball" | "ball_horospherical" | "ball_quartic") {
            return Err(CliError::Config(format!(
                "key `potentials`: '{name}' is not a potential on the unit ball, which scaling needs"
            )));
        }
    }
    for &n in &s.dims {
        let k = (n + 1) as f64;
        let origin = CPoint::origin(n)?;
        for name in &s.potentials {
            let phi = potential_by_name(name, n)?;
            let subject = format!("{name} n={n}");
            let run = ScalingRun {
                phi: phi.clone(),
                maps: boundary_sequence(&e1(n, -1.0), s.j_max)?,
                basepoint: origin.clone(),
                grid: scaling_grid(n, SAMPLE_RADIUS, 200)?,
                target: if name == "ball" { Some(horospherical_potential(n)?) } else { None },
            };
            let rep = run_scaling(&run)?;
            write_csv(
                &s.out,
                &format!("scale_{}_n{n}.csv", slug(name)),
                "kahler-scale",
                &rep.to_csv(),
            )?;
            match &rep.target_gap {
                Some(gap) => items.push(Item::new(
                    "scaling_gap",
                    subject.clone(),
                    "sup gap to the horospherical limit on the radius-0.8 grid at j = j_max",
                    gap.last().copied(),
                    s.tolerance("scaling_gap"),
                    Comparison::Lt,
                )),
                None => warnings.push(format!("{subject}: no closed-form limit, gap not checked")),
            }
            if name != "ball_quartic" {
                let (lo, hi) = *rep.length_range.last().expect("at least two maps");
                items.push(Item::new(
                    "scaling_length",
                    subject.clone(),
                    "max |‖∂φ_j‖_ω − (n+1)| on the grid at j = j_max",
                    Some((lo - k).abs().max((hi - k).abs())),
                    s.tolerance("scaling_length"),
                    Comparison::Lt,
                ));
            }
            let contraction = (rep.sup_diffs.len() >= 3).then(|| rep.worst_contraction(3));
            items.push(Item::new(
                "scaling_contraction",
                subject.clone(),
                "worst ratio of successive sup differences for j ≥ 3",
                contraction,
                s.tolerance("scaling_contraction"),
                Comparison::Le,
            ));
            let suite = gronwall_suite(&phi, s.pairs, s.seed)?;
            items.push(Item::new(
                "gronwall",
                subject.clone(),
                "violations of e^{−CR} ≤ σ_f ≤ e^{CR} over seeded pairs",
                (suite.pairs > 0).then_some(suite.violations as f64),
                s.tolerance("gronwall"),
                Comparison::Le,
            ));
            let params = sample_ball(n, 0.95, s.sample_count, s.seed.wrapping_add(2));
            let points = sample_ball(n, SAMPLE_RADIUS, s.sample_count, s.seed.wrapping_add(3));
            let mut ph = Vec::with_capacity(points.len());
            for (a, p) in params.into_iter().zip(&points) {
                ph.push(pluriharmonic_residual(&phi, &MoebiusMap::new(a)?, p)?);
            }
            items.push(Item::new(
                "pluriharmonic",
                subject.clone(),
                "max |∂∂̄(φ∘f − φ)| over seeded automorphisms and points",
                max_of(&ph),
                s.tolerance("pluriharmonic"),
                Comparison::Lt,
            ));
        }
    }
    let summary = Summary::new(s, items, warnings);
    write_json(&s.out, "scale.json", &summary)?;
    Ok(summary)
}

pub fn flow_cmd(s: &Settings) -> Result<Summary, CliError> {
    let mut items = Vec::new();
    let mut warnings = Vec::new();
    let tol = s.tol.unwrap_or(FLOW_TOL);
    for &n in &s.dims {
        for name in &s.potentials {
            let phi = potential_by_name(name, n)?;
            let subject = format!("{name} n={n}");
            if phi.constant_length().is_none() {
                warnings.push(format!("{subject}: potential has no constant length; the field is not expected to be holomorphic"));
            }
            let mut dbar = Vec::new();
            for p in sample_ball(n, SAMPLE_RADIUS, s.sample_count, s.seed.wrapping_add(1)) {
                if phi.contains(&p) {
                    dbar.push(build_field(&phi, &p)?.dbar_v_normsq);
                }
            }
            items.push(Item::new(
                "field_holomorphic",
                subject.clone(),
                "max ‖∇''V‖²_ω over seeded points",
                max_of(&dbar),
                s.tolerance("field_holomorphic"),
                Comparison::Lt,
            ));

            let starts: Vec<CPoint> = sample_ball(n, SAMPLE_RADIUS, s.starts, s.seed)
                .into_iter()
                .filter(|p| phi.contains(p))
                .collect();
            let (mut margin, mut rho, mut level) = (vec![], vec![], vec![]);
            for (i, start) in starts.iter().enumerate() {
                match flow(&phi, start, s.t_end, tol) {
                    Ok(tr) => {
                        write_csv(
                            &s.out,
                            &format!("flow_{}_n{n}_{i}.csv", slug(name)),
                            "kahler-flow",
                            &tr.to_csv(),
                        )?;
                        margin.push(tr.min_margin);
                        rho.push(tr.rho_drift);
                        level.push(tr.phi_drift);
                    }
                    Err(e) => {
                        warnings.push(format!("{subject}: start {i}: {e}"));
                        margin.push(f64::NAN);
                        rho.push(f64::NAN);
                        level.push(f64::NAN);
                    }
                }
            }
            let window = format!("over t ∈ [−{0}, {0}]", s.t_end);
            items.push(Item::new(
                "flow_margin",
                subject.clone(),
                &format!("min boundary margin along the trajectories {window}"),
                min_of(&margin),
                s.tolerance("flow_margin"),
                Comparison::Gt,
            ));
            items.push(Item::new(
                "flow_rho_drift",
                subject.clone(),
                &format!("max drift of e^{{φ/(n+1)}} along the trajectories {window}"),
                max_of(&rho),
                s.tolerance("flow_rho_drift"),
                Comparison::Lt,
            ));
            items.push(Item::new(
                "flow_phi_drift",
                subject.clone(),
                &format!("max drift of φ along the trajectories {window}"),
                max_of(&level),
                s.tolerance("flow_phi_drift"),
                Comparison::Lt,
            ));

            let probe = &starts[..starts.len().min(4)];
            let (cr, iso) = if probe.is_empty() {
                (None, None)
            } else {
                let (c, i) = flow_automorphy_check(&phi, 1.0, probe, tol)?;
                (Some(c), Some(i))
            };
            items.push(Item::new(
                "flow_cr",
                subject.clone(),
                "max |∂̄Φ_1| of the time-1 map by finite differences",
                cr,
                s.tolerance("flow_cr"),
                Comparison::Lt,
            ));
            items.push(Item::new(
                "flow_isometry",
                subject.clone(),
                "max |Φ_1^* g − g| of the time-1 map by finite differences",
                iso,
                s.tolerance("flow_isometry"),
                Comparison::Lt,
            ));
            let mut dev = Vec::new();
            for start in &starts[..starts.len().min(3)] {
                dev.push(rho_scaled_completeness_check(&phi, start, 5.0, 11, tol)?.max_deviation);
            }
            items.push(Item::new(
                "rho_scaling",
                subject.clone(),
                "max |Φ^V_t − Φ^W_{ct}| with c = e^{φ(start)/(n+1)} over t ∈ [−5, 5]",
                max_of(&dev),
                s.tolerance("rho_scaling"),
                Comparison::Lt,
            ));
        }
    }
    let summary = Summary::new(s, items, warnings);
    write_json(&s.out, "flow.json", &summary)?;
    Ok(summary)
}

pub fn solve(s: &Settings) -> Result<Summary, CliError> {
    let mut items = Vec::new();
    let mut warnings = Vec::new();
    let tol = s.tol.unwrap_or(DEFAULT_TOL);
    for &n in &s.dims {
        let k2 = ((n + 1) * (n + 1)) as f64;
        for name in &s.domains {
            let def = defining_function_by_name(name, n)?;
            let subject = format!("{name} n={n}");
            let sol = solve_radial(&def, s.gridsize, tol)?;
            let scan = boundary_limit_scan(&sol)?;
            write_csv(&s.out, &format!("solve_{}_n{n}.csv", slug(name)), "kahler-solve", &sol.to_csv())?;
            write_csv(&s.out, &format!("scan_{}_n{n}.csv", slug(name)), "kahler-scan", &scan.to_csv())?;
            if name == "ball" {
                items.push(Item::new(
                    "ma_ball",
                    subject.clone(),
                    "sup |u| of the correction for the ball",
                    Some(sol.sup_norm()),
                    s.tolerance("ma_ball"),
                    Comparison::Lt,
                ));
            }
            items.push(Item::new(
                "ma_residual",
                subject.clone(),
                "max node residual of the discrete Monge–Ampère equation",
                Some(sol.residual),
                s.tolerance("ma_residual"),
                Comparison::Lt,
            ));
            items.push(Item::new(
                "ma_c_bound",
                subject.clone(),
                "c with (1/c) w ≤ w + ∂∂̄u ≤ c w on the grid (infinite if not positive)",
                Some(if sol.positive { sol.c_bound } else { f64::INFINITY }),
                s.tolerance("ma_c_bound"),
                Comparison::Lt,
            ));
            items.push(Item::new(
                "ma_boundary_limit",
                subject.clone(),
                "|extrapolated boundary limit of ‖∂φ‖²_ω − (n+1)²|",
                Some((scan.limit - k2).abs()),
                s.tolerance("ma_boundary_limit"),
                Comparison::Lt,
            ));
            let fit = decay_fit(&sol)?;
            if fit.slope.is_none() {
                warnings.push(format!("{subject}: correction at the noise floor, decay fit is vacuous"));
            }
            items.push(Item::new(
                "ma_decay_slope",
                subject.clone(),
                "fitted slope of log|u| against log|r|, against the floor min(q, n + 1/2) − 0.1 (slope consistency, not the sharp rate)",
                fit.slope,
                fit.floor,
                Comparison::Ge,
            ));
        }
    }
    let summary = Summary::new(s, items, warnings);
    write_json(&s.out, "solve.json", &summary)?;
    Ok(summary)
}

/// One claim of the merged report.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ClaimRow {
    pub claim: String,
    pub pass: bool,
    /// Worst measured value over the claim's items.
    pub measured: Option<f64>,
    pub tolerance: f64,
    pub comparison: Comparison,
    pub items: usize,
    pub failed: Vec<String>,
    pub sources: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: String,
    pub inputs: Vec<String>,
    pub claims: Vec<ClaimRow>,
    pub warnings: Vec<String>,
    pub pass: bool,
}

pub fn report(s: &Settings) -> Result<Report, CliError> {
    let paths: Vec<(String, PathBuf)> = s
        .inputs
        .iter()
        .map(|i| {
            let p = PathBuf::from(i);
            (i.clone(), if p.is_absolute() { p } else { s.out.join(p) })
        })
        .collect();
    let missing: Vec<String> = paths
        .iter()
        .filter(|(_, p)| !p.is_file())
        .map(|(_, p)| p.display().to_string())
        .collect();
    if !missing.is_empty() {
        return Err(CliError::Config(format!("missing inputs: {}", missing.join(", "))));
    }
    let mut rows: Vec<ClaimRow> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    let mut warnings = s.warnings.clone();
    for (label, path) in &paths {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let summary: Summary = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("corrupted summary {}: {e}", path.display())))?;
        if summary.schema_version != SUMMARY_SCHEMA {
            return Err(CliError::Config(format!(
                "corrupted summary {}: schema '{}', expected '{SUMMARY_SCHEMA}'",
                path.display(),
                summary.schema_version
            )));
        }
        warnings.extend(summary.warnings.iter().map(|w| format!("{}: {w}", summary.command)));
        for item in &summary.items {
            let slot = *index.entry(item.claim.clone()).or_insert_with(|| {
                rows.push(ClaimRow {
                    claim: item.claim.clone(),
                    pass: true,
                    measured: None,
                    tolerance: item.tolerance,
                    comparison: item.comparison,
                    items: 0,
                    failed: vec![],
                    sources: vec![],
                });
                rows.len() - 1
            });
            let row = &mut rows[slot];
            row.items += 1;
            row.pass &= item.pass;
            if !item.pass {
                row.failed.push(item.subject.clone());
            }
            if !row.sources.contains(label) {
                row.sources.push(label.clone());
            }
            if let Some(m) = item.measured {
                let worse = match row.measured {
                    None => true,
                    Some(cur) if row.comparison.upper_bound() => m > cur,
                    Some(cur) => m < cur,
                };
                if worse {
                    row.measured = Some(m);
                    // keeps the threshold the worst value was judged against
                    row.tolerance = item.tolerance;
                }
            }
        }
    }
    let mut csv = String::from("claim,pass,measured,comparison,tolerance,items\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.claim,
            r.pass,
            r.measured.map(fmt).unwrap_or_default(),
            r.comparison.symbol(),
            fmt(r.tolerance),
            r.items
        ));
    }
    let rep = Report {
        schema_version: REPORT_SCHEMA.to_string(),
        inputs: s.inputs.clone(),
        pass: rows.iter().all(|r| r.pass),
        claims: rows,
        warnings,
    };
    write_csv(&s.out, "report.csv", "kahler-report", &csv)?;
    write_json(&s.out, "report.json", &rep)?;
    Ok(rep)
}
