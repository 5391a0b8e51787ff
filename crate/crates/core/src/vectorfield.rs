//! The field `V = i e^{φ/(n+1)} grad φ` of a constant-length potential and
//! the flow of its real part.

use num_complex::Complex64;

use crate::complexad::{jet_of, CPoint, WJet};
use crate::domains::PotentialSpec;
use crate::error::{Error, Result};
use crate::kaehler::{self, Local};
use crate::linalg::{self, CMat};
use crate::ode::{integrate, OdeOptions};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Field data at one point.
#[derive(Clone, Debug)]
pub struct FieldEval {
    pub point: CPoint,
    pub v: Vec<Complex64>,
    /// `V^α_{;β̄}` at `(α, β)`, from jets.
    pub dbar_v: CMat,
    pub w: Vec<Complex64>,
    pub w_norm: f64,
    pub v_norm: f64,
    /// `e^{φ/(n+1)}`
    pub rho: f64,
    /// `‖∇''V‖²` from the quadratic expansion in `u`, `‖∇'²φ‖²` and the cross term.
    pub dbar_v_normsq: f64,
    /// `‖∇''V‖²` by direct contraction of `dbar_v`.
    pub dbar_v_normsq_direct: f64,
}

/// `Σ T^α_β̄ conj(T^γ_δ̄) g_{αγ̄} g^{β̄δ}`.
fn norm_sq_10_01(t: &CMat, g: &CMat, ginv: &CMat) -> f64 {
    let n = g.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    acc += t[(a, b)] * t[(c, d)].conj() * g[(a, c)] * ginv[(b, d)];
                }
            }
        }
    }
    acc.re
}

pub fn build_field(phi: &PotentialSpec, p: &CPoint) -> Result<FieldEval> {
    let l = Local::new(phi, p)?;
    let n = l.n;
    let k = (n + 1) as f64;
    let f = &l.frame;
    let rho = (l.jet.value().re / k).exp();
    let w: Vec<Complex64> = l.grad.iter().map(|g| I * g).collect();
    let v: Vec<Complex64> = w.iter().map(|x| x * rho).collect();

    // direct route: ∂̄ of the jet of e^{φ/(n+1)} φ^α (the (0,1) covariant
    // derivative of a (1,0) field carries no Christoffel term)
    let psi = (l.jet.truncate(1) * (1.0 / k)).exp();
    let db = l.dbarphi_jets(1)?;
    let gi = l.ginv_jets(1)?;
    let mut dbar_v = CMat::zeros(n, n);
    for a in 0..n {
        let mut up = db[0].scale(Complex64::new(0.0, 0.0));
        for b in 0..n {
            up = &up + &(&db[b] * &gi[b][a]);
        }
        let va = (&psi * &up).scale(I);
        for b in 0..n {
            dbar_v[(a, b)] = va.dbar(b);
        }
    }
    let dbar_v_normsq_direct = norm_sq_10_01(&dbar_v, &f.g, &f.ginv);

    // expansion: ψ^{2/(n+1)}[u²/(n+1)² + (2/(n+1)) Re X + ‖∇'²φ‖²],
    // X = φ^α_{;β̄} φ^β̄ φ_α with φ^α_{;β̄} = g^{αγ̄} conj(φ_{γ;β})
    let u = l.u();
    let h2 = l.norm_sq_20(&l.hess20);
    let mut x = Complex64::new(0.0, 0.0);
    for a in 0..n {
        for b in 0..n {
            let raised: Complex64 = (0..n).map(|c| f.ginv[(c, a)] * l.hess20[(c, b)].conj()).sum();
            x += raised * l.grad[b].conj() * l.dphi[a];
        }
    }
    let dbar_v_normsq = rho * rho * (u * u / (k * k) + 2.0 / k * x.re + h2);

    Ok(FieldEval {
        point: p.clone(),
        w_norm: linalg::metric_norm(&f.g, &w),
        v_norm: linalg::metric_norm(&f.g, &v),
        v,
        dbar_v,
        w,
        rho,
        dbar_v_normsq: dbar_v_normsq.max(0.0),
        dbar_v_normsq_direct,
    })
}

/// Gradient `φ^α` and `e^{φ/(n+1)}` from an order-2 jet (cheap path for the ODE).
fn grad_and_rho(phi: &PotentialSpec, p: &CPoint) -> Result<(Vec<Complex64>, f64, WJet)> {
    let jet = jet_of(phi, p, 2)?;
    let n = p.dim();
    let gj = kaehler::metric_jets(&jet)?;
    let g = kaehler::values(&gj);
    let ginv = linalg::inverse(&g)?;
    let db: Vec<Complex64> = (0..n).map(|b| jet.dbar(b)).collect();
    let rho = (jet.value().re / (n + 1) as f64).exp();
    Ok((kaehler::raise(&ginv, &db), rho, jet))
}

/// `|iφ^αφ_α − iφ^ᾱφ_ᾱ| = 2|Im(φ^αφ_α)|`.
pub fn tangency_residual(phi: &PotentialSpec, p: &CPoint) -> Result<f64> {
    let (grad, _, jet) = grad_and_rho(phi, p)?;
    let s: Complex64 = grad.iter().enumerate().map(|(a, g)| g * jet.d(a)).sum();
    Ok(2.0 * s.im.abs())
}

/// Which field to integrate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Field {
    /// `V = i e^{φ/(n+1)} grad φ`
    V,
    /// `W = i grad φ`
    W,
}

fn rhs(phi: &PotentialSpec, field: Field, y: &[f64]) -> Result<Vec<f64>> {
    let p = CPoint::from_real(y)?;
    if !phi.contains(&p) {
        return Err(Error::OutsideDomain(phi.name().to_string()));
    }
    let (grad, rho, _) = grad_and_rho(phi, &p)?;
    let scale = match field {
        Field::V => I * rho,
        Field::W => I,
    };
    Ok(grad.iter().flat_map(|g| {
        let z = g * scale;
        [z.re, z.im]
    })
    .collect())
}

/// Endpoint of the integral curve of `field` through `start` at time `t`.
pub fn flow_map(
    phi: &PotentialSpec,
    field: Field,
    start: &CPoint,
    t: f64,
    opts: &OdeOptions,
) -> Result<CPoint> {
    let tr = integrate(|_, y| rhs(phi, field, y), 0.0, &start.to_real(), t, opts)?;
    CPoint::from_real(tr.last())
}

/// An integral curve of `V` over `[−t_end, t_end]`.
#[derive(Clone, Debug)]
pub struct FlowTrace {
    pub start: CPoint,
    pub times: Vec<f64>,
    pub states: Vec<CPoint>,
    pub margins: Vec<f64>,
    pub rhos: Vec<f64>,
    pub min_margin: f64,
    /// `max |e^{φ/(n+1)} − e^{φ(start)/(n+1)}|`
    pub rho_drift: f64,
    /// `max |φ − φ(start)|`
    pub phi_drift: f64,
}

impl FlowTrace {
    /// CSV rows `t, Re z^α, Im z^α, margin, rho` (header included).
    pub fn to_csv(&self) -> String {
        let n = self.start.dim();
        let mut cols = vec!["t".to_string()];
        for a in 1..=n {
            cols.push(format!("re_z{a}"));
            cols.push(format!("im_z{a}"));
        }
        cols.push("margin".into());
        cols.push("rho".into());
        let mut out = cols.join(",");
        out.push('\n');
        for (i, t) in self.times.iter().enumerate() {
            let mut row = vec![format!("{t:.17e}")];
            for c in self.states[i].coords() {
                row.push(format!("{:.17e}", c.re));
                row.push(format!("{:.17e}", c.im));
            }
            row.push(format!("{:.17e}", self.margins[i]));
            row.push(format!("{:.17e}", self.rhos[i]));
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Integrates `dz/dt = V(z)` forward and backward from `start`.
pub fn flow(phi: &PotentialSpec, start: &CPoint, t_end: f64, tol: f64) -> Result<FlowTrace> {
    if !phi.contains(start) {
        return Err(Error::OutsideDomain(phi.name().to_string()));
    }
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(Error::InvalidParameter(format!("flow window {t_end}")));
    }
    let opts = OdeOptions::with_tol(tol);
    let y0 = start.to_real();
    let fwd = integrate(|_, y| rhs(phi, Field::V, y), 0.0, &y0, t_end, &opts)?;
    let bwd = integrate(|_, y| rhs(phi, Field::V, y), 0.0, &y0, -t_end, &opts)?;
    let mut times = Vec::with_capacity(fwd.times.len() + bwd.times.len());
    let mut raw = Vec::with_capacity(times.capacity());
    for i in (1..bwd.times.len()).rev() {
        times.push(bwd.times[i]);
        raw.push(bwd.states[i].clone());
    }
    times.extend_from_slice(&fwd.times);
    raw.extend(fwd.states);

    let k = (start.dim() + 1) as f64;
    let phi0 = phi.value(start)?;
    let rho0 = (phi0 / k).exp();
    let mut states = Vec::with_capacity(raw.len());
    let mut margins = Vec::with_capacity(raw.len());
    let mut rhos = Vec::with_capacity(raw.len());
    let (mut rho_drift, mut phi_drift) = (0.0f64, 0.0f64);
    for y in raw {
        let p = CPoint::from_real(&y)?;
        if !phi.contains(&p) {
            return Err(Error::OutsideDomain(phi.name().to_string()));
        }
        let v = phi.value(&p)?;
        let r = (v / k).exp();
        rho_drift = rho_drift.max((r - rho0).abs());
        phi_drift = phi_drift.max((v - phi0).abs());
        margins.push(phi.boundary_margin(&p));
        rhos.push(r);
        states.push(p);
    }
    Ok(FlowTrace {
        start: start.clone(),
        min_margin: margins.iter().cloned().fold(f64::INFINITY, f64::min),
        times,
        states,
        margins,
        rhos,
        rho_drift,
        phi_drift,
    })
}

/// Finite-difference step for flow-map derivatives.
pub const FLOW_FD_STEP: f64 = 1e-4;

/// Max Cauchy–Riemann residual `|∂̄Φ_t|` and max isometry residual
/// `|Jᵀ g(Φ_t p) J̄ − g(p)|` of the time-`t` map of `V` over `sample`.
pub fn flow_automorphy_check(
    phi: &PotentialSpec,
    t: f64,
    sample: &[CPoint],
    tol: f64,
) -> Result<(f64, f64)> {
    let n = phi.dim();
    let opts = OdeOptions::with_tol(tol);
    let h = FLOW_FD_STEP;
    let (mut cr, mut iso) = (0.0f64, 0.0f64);
    for p in sample {
        // columns ∂Φ/∂x_k and ∂Φ/∂y_k by central differences
        let mut jac = CMat::zeros(n, n);
        for kk in 0..n {
            let mut dx = vec![Complex64::new(0.0, 0.0); n];
            let mut dy = vec![Complex64::new(0.0, 0.0); n];
            for (dir, out) in [(Complex64::new(h, 0.0), &mut dx), (Complex64::new(0.0, h), &mut dy)] {
                let plus = flow_map(phi, Field::V, &p.shifted(kk, dir)?, t, &opts)?;
                let minus = flow_map(phi, Field::V, &p.shifted(kk, -dir)?, t, &opts)?;
                for a in 0..n {
                    out[a] = (plus[a] - minus[a]) / (2.0 * h);
                }
            }
            for a in 0..n {
                jac[(a, kk)] = (dx[a] - I * dy[a]) * 0.5;
                cr = cr.max(((dx[a] + I * dy[a]) * 0.5).norm());
            }
        }
        let image = flow_map(phi, Field::V, p, t, &opts)?;
        let g_img = kaehler::metric_at(phi, &image)?;
        let g_p = kaehler::metric_at(phi, p)?;
        let pulled = jac.transpose() * g_img * jac.map(|x| x.conj());
        iso = iso.max(linalg::max_abs(&(pulled - g_p)));
    }
    Ok((cr, iso))
}

/// Comparison of the `V`-flow with the reparameterized `W`-flow.
#[derive(Clone, Debug)]
pub struct RhoScalingReport {
    /// `ρ(start)` used as the time scale.
    pub c: f64,
    /// `e^{φ(start)/(n+1)}` evaluated independently from the potential value.
    pub c_expected: f64,
    pub times: Vec<f64>,
    /// `max_t |Φ^V_t(start) − Φ^W_{ct}(start)|`
    pub max_deviation: f64,
}

/// Checks `Φ^V_t = Φ^W_{ct}` with `c = ρ(start)` at `samples` times in `[−t_end, t_end]`.
pub fn rho_scaled_completeness_check(
    phi: &PotentialSpec,
    start: &CPoint,
    t_end: f64,
    samples: usize,
    tol: f64,
) -> Result<RhoScalingReport> {
    let (_, c, _) = grad_and_rho(phi, start)?;
    let c_expected = (phi.value(start)? / (phi.dim() + 1) as f64).exp();
    let opts = OdeOptions::with_tol(tol);
    let m = samples.max(2);
    let times: Vec<f64> = (0..m).map(|i| -t_end + 2.0 * t_end * i as f64 / (m - 1) as f64).collect();
    let mut max_deviation = 0.0f64;
    for &t in &times {
        let a = flow_map(phi, Field::V, start, t, &opts)?;
        let b = flow_map(phi, Field::W, start, c * t, &opts)?;
        let d = (0..a.dim()).map(|k| (a[k] - b[k]).norm_sqr()).sum::<f64>().sqrt();
        max_deviation = max_deviation.max(d);
    }
    Ok(RhoScalingReport {
        c,
        c_expected,
        times,
        max_deviation,
    })
}
