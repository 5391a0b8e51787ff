//! Potential scaling along a sequence of automorphisms tending to the boundary.
//!
//! For an isometry `f`, `φ∘f − (φ∘f)(p₀)` is again a potential of the same
//! metric. Along `f_j → ∂X` these normalized pullbacks converge to a potential
//! of constant gradient length; on the ball the limit is the horospherical one.

use std::sync::Arc;

use num_complex::Complex64;

use crate::complexad::{jet_of, CPoint, Coords};
use crate::domains::{MoebiusMap, PotentialSpec};
use crate::error::{Error, Result};
use crate::kaehler::{self, metric_jets, values};
use crate::linalg;
use crate::sampling::sample_ball;

/// `z ↦ φ(f(z)) − φ(f(p₀))`.
pub fn rescale(phi: &PotentialSpec, f: &MoebiusMap, p0: &CPoint) -> Result<PotentialSpec> {
    if !phi.contains(p0) {
        return Err(Error::OutsideDomain(phi.name().to_string()));
    }
    let shift = phi.value(&f.apply(p0)?)?;
    let inner = phi.clone();
    let map = f.clone();
    let dom_phi = phi.clone();
    let dom_map = f.clone();
    let spec = PotentialSpec::new(
        format!("{}∘m", phi.name()),
        phi.dim(),
        Arc::new(move |x: &Coords| {
            let z = map.apply_jets(x)?;
            Ok(inner.eval_coords(&Coords::from_holomorphic(z))?.add_scalar(Complex64::new(-shift, 0.0)))
        }),
        Arc::new(move |p: &CPoint| {
            p.norm_sq() < 1.0 && dom_map.apply(p).map(|q| dom_phi.contains(&q)).unwrap_or(false)
        }),
        Arc::new(|p: &CPoint| 1.0 - p.norm()),
    )?;
    Ok(match phi.constant_length() {
        Some(c) => spec.with_constant_length(c),
        None => spec,
    })
}

/// `log σ_f(p) = (φ∘f)(p) − (φ∘f)(p₀)`, i.e. `log(ψ∘f/(ψ∘f)(p₀))` with `ψ = e^φ`.
pub fn log_sigma(phi: &PotentialSpec, f: &MoebiusMap, p0: &CPoint, p: &CPoint) -> Result<f64> {
    for q in [p0, p] {
        if !(q.norm_sq() < 1.0) {
            return Err(Error::OutsideDomain("unit ball".into()));
        }
    }
    Ok(phi.value(&f.apply(p)?)? - phi.value(&f.apply(p0)?)?)
}

/// `σ_f(p)`; exponentiated from log space, so overflow shows up as `inf`
/// rather than a wrong finite value.
pub fn sigma_ratio(phi: &PotentialSpec, f: &MoebiusMap, p0: &CPoint, p: &CPoint) -> Result<f64> {
    Ok(log_sigma(phi, f, p0, p)?.exp())
}

/// One evaluation of the envelope `e^{−CR} ≤ σ_f ≤ e^{CR}`.
#[derive(Clone, Debug)]
pub struct GronwallSample {
    pub log_sigma: f64,
    /// Max of `‖∂(φ∘f)‖_ω` over the quadrature nodes of the segment.
    pub c: f64,
    /// Metric length of the straight segment `p₀ → p` (upper bound for the distance).
    pub r: f64,
    pub holds: bool,
}

/// Evaluates the envelope along the straight segment `p₀ → p`.
pub fn gronwall_check(
    phi: &PotentialSpec,
    f: &MoebiusMap,
    p0: &CPoint,
    p: &CPoint,
) -> Result<GronwallSample> {
    let pulled = rescale(phi, f, p0)?;
    let n = p.dim();
    let v: Vec<Complex64> = (0..n).map(|k| p[k] - p0[k]).collect();
    let rule = linalg::gauss_legendre_01();
    let pieces = 16;
    let (mut c, mut r) = (0.0f64, 0.0);
    for piece in 0..pieces {
        let lo = piece as f64 / pieces as f64;
        let width = 1.0 / pieces as f64;
        for &(x, w) in &rule {
            let t = lo + width * x;
            let q = CPoint::new((0..n).map(|k| p0[k] + v[k] * t).collect())?;
            let g = kaehler::metric_at(phi, &q)?;
            r += width * w * 2.0 * linalg::metric_norm(&g, &v);
            c = c.max(kaehler::gradient_norm_sq(&pulled, &q)?.sqrt());
        }
    }
    for q in [p0, p] {
        c = c.max(kaehler::gradient_norm_sq(&pulled, q)?.sqrt());
    }
    let ls = log_sigma(phi, f, p0, p)?;
    let bound = c * r * (1.0 + 1e-12) + 1e-12;
    Ok(GronwallSample {
        log_sigma: ls,
        c,
        r,
        holds: ls.abs() <= bound,
    })
}

/// Summary of the envelope over seeded `(f, p)` pairs.
#[derive(Clone, Debug)]
pub struct GronwallSuite {
    pub pairs: usize,
    pub violations: usize,
    /// Largest `|log σ| / (C R)`.
    pub worst_ratio: f64,
}

/// `pairs` random pairs: `f = m_a` with `‖a‖ < 0.95`, `p` in the ball of radius
/// 0.8, basepoint at the origin.
pub fn gronwall_suite(phi: &PotentialSpec, pairs: usize, seed: u64) -> Result<GronwallSuite> {
    let n = phi.dim();
    let params = sample_ball(n, 0.95, pairs, seed);
    let points = sample_ball(n, 0.8, pairs, seed.wrapping_add(1));
    let p0 = CPoint::origin(n)?;
    let mut violations = 0;
    let mut worst_ratio = 0.0f64;
    for (a, p) in params.into_iter().zip(points) {
        let s = gronwall_check(phi, &MoebiusMap::new(a)?, &p0, &p)?;
        if !s.holds {
            violations += 1;
        }
        if s.c * s.r > 0.0 {
            worst_ratio = worst_ratio.max(s.log_sigma.abs() / (s.c * s.r));
        }
    }
    Ok(GronwallSuite {
        pairs,
        violations,
        worst_ratio,
    })
}

/// `max |∂∂̄[φ(f(z)) − φ(z)]|` at `p`.
pub fn pluriharmonic_residual(phi: &PotentialSpec, f: &MoebiusMap, p: &CPoint) -> Result<f64> {
    if !(p.norm_sq() < 1.0) {
        return Err(Error::OutsideDomain("unit ball".into()));
    }
    let x = Coords::variables(p, 2)?;
    let pulled = phi.eval_coords(&Coords::from_holomorphic(f.apply_jets(&x)?))?;
    let direct = jet_of(phi, p, 2)?;
    let diff = &pulled - &direct;
    let n = p.dim();
    let mut worst = 0.0f64;
    for a in 0..n {
        for b in 0..n {
            worst = worst.max(diff.partial(&[a], &[b]).norm());
        }
    }
    Ok(worst)
}

/// Lattice points of spacing `radius/m` in the closed ball of `radius`,
/// with the largest `m` giving at most `max_points` points.
pub fn scaling_grid(n: usize, radius: f64, max_points: usize) -> Result<Vec<CPoint>> {
    let lattice = |m: i64| -> Result<Vec<CPoint>> {
        let d = 2 * n;
        let h = radius / m as f64;
        let mut out = Vec::new();
        let mut idx = vec![-m; d];
        loop {
            let xs: Vec<f64> = idx.iter().map(|&i| i as f64 * h).collect();
            let r2: f64 = idx.iter().map(|&i| (i * i) as f64).sum::<f64>();
            if r2 <= (m * m) as f64 {
                out.push(CPoint::from_real(&xs)?);
            }
            let mut k = 0;
            loop {
                if k == d {
                    return Ok(out);
                }
                idx[k] += 1;
                if idx[k] <= m {
                    break;
                }
                idx[k] = -m;
                k += 1;
            }
        }
    };
    let mut best = lattice(1)?;
    if best.len() > max_points {
        return Err(Error::InvalidParameter(format!(
            "no lattice with at most {max_points} points in dimension {n}"
        )));
    }
    for m in 2.. {
        let next = lattice(m)?;
        if next.len() > max_points {
            break;
        }
        best = next;
    }
    Ok(best)
}

/// Inputs of a scaling experiment.
#[derive(Clone, Debug)]
pub struct ScalingRun {
    pub phi: PotentialSpec,
    pub maps: Vec<MoebiusMap>,
    pub basepoint: CPoint,
    pub grid: Vec<CPoint>,
    /// Closed-form limit, when known.
    pub target: Option<PotentialSpec>,
}

#[derive(Clone, Debug)]
pub struct ConvergenceReport {
    /// Values of the rescaled potentials on the grid, one row per map.
    pub history: Vec<Vec<f64>>,
    /// `sup |rescaled_j − rescaled_{j+1}|`.
    pub sup_diffs: Vec<f64>,
    pub limit_values: Vec<f64>,
    /// `sup |rescaled_j − target|` per map.
    pub target_gap: Option<Vec<f64>>,
    /// `(min, max)` of `‖∂ rescaled_j‖_ω` over the grid.
    pub length_range: Vec<(f64, f64)>,
    /// `‖∂·‖_ω` of the final iterate at each grid point.
    pub length_profile: Vec<f64>,
    /// Value at the basepoint per map (zero by construction).
    pub basepoint_values: Vec<f64>,
}

impl ConvergenceReport {
    /// CSV rows `j, sup_diff, target_gap, min_length, max_length`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("j,sup_diff,target_gap,min_length,max_length\n");
        for (j, &(lo, hi)) in self.length_range.iter().enumerate() {
            let sd = self
                .sup_diffs
                .get(j)
                .map(|v| format!("{v:.17e}"))
                .unwrap_or_default();
            let tg = self
                .target_gap
                .as_ref()
                .map(|g| format!("{:.17e}", g[j]))
                .unwrap_or_default();
            out.push_str(&format!("{},{sd},{tg},{lo:.17e},{hi:.17e}\n", j + 1));
        }
        out
    }

    /// Largest ratio `sup_diffs[j+1]/sup_diffs[j]` over `j ≥ from` (1-based).
    pub fn worst_contraction(&self, from: usize) -> f64 {
        self.sup_diffs
            .windows(2)
            .enumerate()
            .filter(|(j, _)| j + 1 >= from)
            .map(|(_, w)| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 })
            .fold(0.0, f64::max)
    }
}

pub fn run_scaling(run: &ScalingRun) -> Result<ConvergenceReport> {
    if run.maps.is_empty() {
        return Err(Error::InvalidParameter("scaling run without maps".into()));
    }
    for p in run.grid.iter().chain(std::iter::once(&run.basepoint)) {
        if !run.phi.contains(p) {
            return Err(Error::OutsideDomain(run.phi.name().to_string()));
        }
    }
    let target: Option<Vec<f64>> = match &run.target {
        None => None,
        Some(t) => Some(run.grid.iter().map(|p| t.value(p)).collect::<Result<_>>()?),
    };
    let mut history = Vec::with_capacity(run.maps.len());
    let mut length_range = Vec::with_capacity(run.maps.len());
    let mut basepoint_values = Vec::with_capacity(run.maps.len());
    let mut gaps = Vec::new();
    let mut length_profile = Vec::new();
    for (j, f) in run.maps.iter().enumerate() {
        let pulled = rescale(&run.phi, f, &run.basepoint)?;
        let mut vals = Vec::with_capacity(run.grid.len());
        let mut lens = Vec::with_capacity(run.grid.len());
        for p in &run.grid {
            let jet = jet_of(&pulled, p, 2)?;
            let v = jet.value().re;
            let g = values(&metric_jets(&jet)?);
            let ginv = linalg::inverse(&g)?;
            let db: Vec<Complex64> = (0..p.dim()).map(|b| jet.dbar(b)).collect();
            let grad = kaehler::raise(&ginv, &db);
            let u: f64 = (0..p.dim()).map(|a| jet.d(a) * grad[a]).sum::<Complex64>().re;
            if !(v.is_finite() && u.is_finite()) {
                return Err(Error::NonFinite(format!("rescaled potential at j = {}", j + 1)));
            }
            vals.push(v);
            lens.push(u.max(0.0).sqrt());
        }
        if let Some(t) = &target {
            gaps.push(vals.iter().zip(t).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        }
        length_range.push((
            lens.iter().cloned().fold(f64::INFINITY, f64::min),
            lens.iter().cloned().fold(0.0, f64::max),
        ));
        basepoint_values.push(pulled.value(&run.basepoint)?);
        history.push(vals);
        length_profile = lens;
    }
    let sup_diffs = history
        .windows(2)
        .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        .collect();
    Ok(ConvergenceReport {
        limit_values: history.last().cloned().unwrap_or_default(),
        history,
        sup_diffs,
        target_gap: target.map(|_| gaps),
        length_range,
        length_profile,
        basepoint_values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::{ball_potential, boundary_sequence, horospherical_potential};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn closed_form(n: usize, a: &CPoint, z: &CPoint) -> f64 {
        let za: Complex64 = (0..n).map(|k| z[k] * a[k].conj()).sum();
        (n + 1) as f64 * ((1.0 - za).norm_sqr() / (1.0 - z.norm_sq())).ln()
    }

    #[test]
    fn rescale_matches_closed_form() {
        let n = 2;
        let phi = ball_potential(n).unwrap();
        let a = CPoint::new(vec![c(0.5, -0.3), c(0.1, 0.2)]).unwrap();
        let f = MoebiusMap::new(a.clone()).unwrap();
        let o = CPoint::origin(n).unwrap();
        let r = rescale(&phi, &f, &o).unwrap();
        assert_eq!(r.value(&o).unwrap(), 0.0);
        for p in sample_ball(n, 0.8, 20, 3) {
            let v = r.value(&p).unwrap();
            assert!((v - closed_form(n, &a, &p)).abs() < 1e-10);
            assert!((sigma_ratio(&phi, &f, &o, &p).unwrap() - v.exp()).abs() < 1e-10 * v.exp());
            assert!(kaehler::einstein_residual(&r, &p).unwrap() < 1e-8);
        }
    }

    #[test]
    fn identity_rescale_is_shift() {
        let phi = ball_potential(2).unwrap();
        let p0 = CPoint::new(vec![c(0.1, 0.0), c(0.0, 0.2)]).unwrap();
        let r = rescale(&phi, &MoebiusMap::identity(2).unwrap(), &p0).unwrap();
        let base = phi.value(&p0).unwrap();
        for p in sample_ball(2, 0.8, 10, 1) {
            assert!((r.value(&p).unwrap() - (phi.value(&p).unwrap() - base)).abs() < 1e-13);
        }
        assert_eq!(r.value(&p0).unwrap(), 0.0);
        assert_eq!(sigma_ratio(&phi, &MoebiusMap::identity(2).unwrap(), &p0, &p0).unwrap(), 1.0);
    }

    #[test]
    fn pluriharmonic_residuals() {
        let phi = ball_potential(2).unwrap();
        let h = horospherical_potential(2).unwrap();
        let f = MoebiusMap::new(CPoint::new(vec![c(-0.4, 0.3), c(0.2, 0.1)]).unwrap()).unwrap();
        for p in sample_ball(2, 0.8, 20, 13) {
            assert!(pluriharmonic_residual(&phi, &f, &p).unwrap() < 1e-8);
            assert!(pluriharmonic_residual(&h, &f, &p).unwrap() < 1e-8);
            assert_eq!(pluriharmonic_residual(&phi, &MoebiusMap::identity(2).unwrap(), &p).unwrap(), 0.0);
        }
    }

    #[test]
    fn gronwall_envelope_holds() {
        let phi = ball_potential(2).unwrap();
        let s = gronwall_suite(&phi, 20, 99).unwrap();
        assert_eq!(s.violations, 0);
        assert!(s.worst_ratio <= 1.0 && s.worst_ratio > 0.1);
    }

    #[test]
    fn grid_sizes() {
        let g = scaling_grid(2, 0.8, 200).unwrap();
        assert_eq!(g.len(), 89);
        assert!(g.iter().all(|p| p.norm() <= 0.8 + 1e-15));
        assert_eq!(scaling_grid(1, 0.8, 200).unwrap().len(), 197);
    }

    #[test]
    fn constant_sequence_has_zero_diffs() {
        let phi = ball_potential(1).unwrap();
        let f = MoebiusMap::new(CPoint::new(vec![c(0.3, 0.0)]).unwrap()).unwrap();
        let run = ScalingRun {
            phi,
            maps: vec![f.clone(), f.clone(), f],
            basepoint: CPoint::origin(1).unwrap(),
            grid: scaling_grid(1, 0.8, 30).unwrap(),
            target: None,
        };
        let rep = run_scaling(&run).unwrap();
        assert!(rep.sup_diffs.iter().all(|&d| d == 0.0));
        assert!(rep.target_gap.is_none());
    }

    #[test]
    fn ball_run_approaches_horospherical_limit() {
        let n = 2;
        let mut e = vec![c(0.0, 0.0); n];
        e[0] = c(-1.0, 0.0);
        let run = ScalingRun {
            phi: ball_potential(n).unwrap(),
            maps: boundary_sequence(&CPoint::new(e).unwrap(), 20).unwrap(),
            basepoint: CPoint::origin(n).unwrap(),
            grid: scaling_grid(n, 0.8, 200).unwrap(),
            target: Some(horospherical_potential(n).unwrap()),
        };
        let rep = run_scaling(&run).unwrap();
        let gap = rep.target_gap.as_ref().unwrap();
        assert!(gap.windows(2).all(|w| w[1] < w[0]));
        // the gap is asymptotically (n+1)·2δ_j·max|Re(z¹/(1+z¹))| with δ_j = 2^{−j},
        // the max being 4 at z¹ = −0.8
        let asym = 3.0 * 2.0 * 2f64.powi(-20) * 4.0;
        assert!((gap[19] / asym - 1.0).abs() < 1e-3, "{} vs {asym}", gap[19]);
        assert!(rep.worst_contraction(3) <= 0.75);
        let (lo, hi) = rep.length_range[19];
        assert!(lo >= 3.0 - 1e-4 && hi <= 3.0 + 1e-4, "{lo} {hi}");
        assert!(rep.basepoint_values.iter().all(|v| v.abs() < 1e-12));
        assert_eq!(rep.to_csv().lines().count(), 21);
    }
}
