//! Pointwise Kähler tensor calculus from a potential.
//!
//! Conventions: `g_{αβ̄} = φ_{αβ̄}/(n+1)`; `ginv` is the matrix inverse of `g`,
//! so `ginv[(β, α)] = g^{β̄α}`; indices are raised with `g^{β̄α}`.

use num_complex::Complex64;

use crate::complexad::{jet_of, CPoint, JetEval, Var, WJet};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Square matrix of jets, row-major.
pub(crate) type JetMat = Vec<Vec<WJet>>;

/// Metric and curvature at a single point.
#[derive(Clone, Debug)]
pub struct MetricFrame {
    pub point: CPoint,
    pub g: CMat,
    pub ginv: CMat,
    pub detg: f64,
    /// `Γ^α_{βγ}` at `[(α·n + β)·n + γ]`
    pub christoffel: Vec<Complex64>,
    /// `R_{αβ̄μν̄}` at `[((α·n + β)·n + μ)·n + ν]`
    pub curv: Vec<Complex64>,
    /// `−∂_α∂_β̄ log det g`
    pub ricci: CMat,
}

impl MetricFrame {
    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    pub fn gamma(&self, a: usize, b: usize, c: usize) -> Complex64 {
        let n = self.dim();
        self.christoffel[(a * n + b) * n + c]
    }

    pub fn curvature(&self, a: usize, b: usize, m: usize, nu: usize) -> Complex64 {
        let n = self.dim();
        self.curv[((a * n + b) * n + m) * n + nu]
    }

    /// `R_α{}^β{}_{λμ̄} = g^{βγ̄} R_{αγ̄λμ̄}`.
    pub fn raised_curvature(&self, a: usize, b: usize, l: usize, m: usize) -> Complex64 {
        (0..self.dim())
            .map(|c| self.ginv[(c, b)] * self.curvature(a, c, l, m))
            .sum()
    }

    /// Ricci by contraction, `g^{ν̄μ} R_{αβ̄μν̄}`.
    pub fn ricci_contracted(&self) -> CMat {
        let n = self.dim();
        CMat::from_fn(n, n, |a, b| {
            let mut acc = ZERO;
            for m in 0..n {
                for nu in 0..n {
                    acc += self.ginv[(nu, m)] * self.curvature(a, b, m, nu);
                }
            }
            acc
        })
    }
}

fn kappa(n: usize) -> f64 {
    (n + 1) as f64
}

/// Jets of `g_{αβ̄}` (order `jet.order() − 2`).
pub(crate) fn metric_jets(jet: &WJet) -> Result<JetMat> {
    let n = jet.dim();
    let k = 1.0 / kappa(n);
    (0..n)
        .map(|a| {
            let da = jet.diff(Var::Z(a))?;
            (0..n)
                .map(|b| Ok(da.diff(Var::Zbar(b))? * k))
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}

pub(crate) fn values(m: &JetMat) -> CMat {
    let n = m.len();
    CMat::from_fn(n, n, |a, b| m[a][b].value())
}

fn const_times(c: &CMat, m: &JetMat) -> JetMat {
    let n = m.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let mut acc = m[0][j].scale(c[(i, 0)]);
                    for k in 1..n {
                        acc = &acc + &m[k][j].scale(c[(i, k)]);
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

fn times_const(m: &JetMat, c: &CMat) -> JetMat {
    let n = m.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let mut acc = m[i][0].scale(c[(0, j)]);
                    for k in 1..n {
                        acc = &acc + &m[i][k].scale(c[(k, j)]);
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

/// Jet of the inverse of a matrix of jets of order ≤ 2,
/// `G⁻¹ = G₀⁻¹ − G₀⁻¹EG₀⁻¹ + G₀⁻¹EG₀⁻¹EG₀⁻¹` with `E = G − G₀` (exact since
/// `E³` vanishes at that order).
pub(crate) fn inverse_jets(m: &JetMat) -> Result<JetMat> {
    let n = m.len();
    let order = m[0][0].order();
    if order > 2 {
        return Err(Error::UnsupportedOrder(order));
    }
    let g0 = values(m);
    let gi = linalg::inverse(&g0)?;
    let e: JetMat = (0..n)
        .map(|i| (0..n).map(|j| m[i][j].add_scalar(-g0[(i, j)])).collect())
        .collect();
    // G₀⁻¹ E G₀⁻¹, reused for the quadratic term (G₀⁻¹EG₀⁻¹)·E·G₀⁻¹
    let ege = times_const(&const_times(&gi, &e), &gi);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = Vec::with_capacity(n);
        for j in 0..n {
            let mut acc = ege[i][j].scale(Complex64::new(-1.0, 0.0)).add_scalar(gi[(i, j)]);
            for k in 0..n {
                // (ege · E) [i][k] · gi[k][j]
                let mut t = &ege[i][0] * &e[0][k];
                for l in 1..n {
                    t = &t + &(&ege[i][l] * &e[l][k]);
                }
                acc = &acc + &t.scale(gi[(k, j)]);
            }
            row.push(acc);
        }
        out.push(row);
    }
    Ok(out)
}

/// Determinant of a matrix of jets (Leibniz expansion, n ≤ 4).
pub(crate) fn det_jets(m: &JetMat) -> WJet {
    let n = m.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut acc = m[0][0].scale(ZERO);
    permute(&mut perm, 0, &mut |p, sign| {
        let mut term = m[0][p[0]].clone();
        for (i, &j) in p.iter().enumerate().skip(1) {
            term = &term * &m[i][j];
        }
        acc = &acc + &(term * sign);
    });
    acc
}

fn permute(p: &mut Vec<usize>, k: usize, f: &mut dyn FnMut(&[usize], f64)) {
    fn rec(p: &mut Vec<usize>, k: usize, sign: f64, f: &mut dyn FnMut(&[usize], f64)) {
        if k == p.len() {
            f(p, sign);
            return;
        }
        for i in k..p.len() {
            p.swap(k, i);
            rec(p, k + 1, if i == k { sign } else { -sign }, f);
            p.swap(k, i);
        }
    }
    rec(p, k, 1.0, f)
}

fn build_frame(p: &CPoint, jet: &WJet) -> Result<(MetricFrame, JetMat)> {
    let n = p.dim();
    let gj = metric_jets(jet)?;
    let g = values(&gj);
    linalg::check_metric(&g)?;
    let ginv = linalg::inverse(&g)?;
    let detg_jet = det_jets(&gj);
    let detg = detg_jet.value().re;
    let logdet = detg_jet.ln()?;

    let mut christoffel = vec![ZERO; n * n * n];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                christoffel[(a * n + b) * n + c] =
                    (0..n).map(|d| ginv[(d, a)] * gj[c][d].d(b)).sum();
            }
        }
    }
    let mut curv = vec![ZERO; n * n * n * n];
    for a in 0..n {
        for b in 0..n {
            for m in 0..n {
                for nu in 0..n {
                    let mut acc = -gj[a][b].partial(&[m], &[nu]);
                    for c in 0..n {
                        for d in 0..n {
                            acc += ginv[(d, c)] * gj[a][d].d(m) * gj[c][b].dbar(nu);
                        }
                    }
                    curv[((a * n + b) * n + m) * n + nu] = acc;
                }
            }
        }
    }
    let ricci = CMat::from_fn(n, n, |a, b| -logdet.partial(&[a], &[b]));
    Ok((
        MetricFrame {
            point: p.clone(),
            g,
            ginv,
            detg,
            christoffel,
            curv,
            ricci,
        },
        gj,
    ))
}

/// Metric, Christoffel symbols and curvature of `i∂∂̄φ/(n+1)` at `p`.
pub fn frame_from_potential<F: JetEval + ?Sized>(phi: &F, p: &CPoint) -> Result<MetricFrame> {
    let jet = jet_of(phi, p, 4)?;
    Ok(build_frame(p, &jet)?.0)
}

/// `max |Ric + (n+1) g|`.
pub fn einstein_residual<F: JetEval + ?Sized>(phi: &F, p: &CPoint) -> Result<f64> {
    let f = frame_from_potential(phi, p)?;
    Ok(einstein_of(&f))
}

fn einstein_of(f: &MetricFrame) -> f64 {
    linalg::max_abs(&(&f.ricci + &f.g * Complex64::new(kappa(f.dim()), 0.0)))
}

/// First- and second-order quantities of a potential at a point.
#[derive(Clone, Debug)]
pub struct PotentialReport {
    /// `‖∂φ‖²_ω`
    pub u: f64,
    pub gradphi: Vec<Complex64>,
    /// `φ_{α;β}`
    pub hess20: CMat,
    pub hess20_normsq: f64,
    pub laplacian_u: f64,
    pub pde_residual: f64,
    pub einstein_residual: f64,
}

/// Everything derived from one order-4 jet, shared by the public entry points.
pub(crate) struct Local {
    pub n: usize,
    pub jet: WJet,
    pub frame: MetricFrame,
    pub gj: JetMat,
    pub dphi: Vec<Complex64>,
    pub grad: Vec<Complex64>,
    pub hess20: CMat,
}

impl Local {
    pub fn new<F: JetEval + ?Sized>(phi: &F, p: &CPoint) -> Result<Self> {
        let jet = jet_of(phi, p, 4)?;
        let n = p.dim();
        let (frame, gj) = build_frame(p, &jet)?;
        let dphi: Vec<Complex64> = (0..n).map(|a| jet.d(a)).collect();
        let dbarphi: Vec<Complex64> = (0..n).map(|b| jet.dbar(b)).collect();
        let grad = raise(&frame.ginv, &dbarphi);
        let hess20 = CMat::from_fn(n, n, |a, b| {
            jet.partial(&[a, b], &[])
                - (0..n).map(|c| frame.gamma(c, a, b) * dphi[c]).sum::<Complex64>()
        });
        Ok(Self {
            n,
            jet,
            frame,
            gj,
            dphi,
            grad,
            hess20,
        })
    }

    pub fn u(&self) -> f64 {
        self.dphi
            .iter()
            .zip(&self.grad)
            .map(|(a, b)| a * b)
            .sum::<Complex64>()
            .re
    }

    /// `‖T‖² = T_{αβ} conj(T_{γδ}) g^{αγ̄} g^{βδ̄}` for a (2,0) tensor.
    pub fn norm_sq_20(&self, t: &CMat) -> f64 {
        let gi = &self.frame.ginv;
        let n = self.n;
        let mut acc = ZERO;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        acc += t[(a, b)] * t[(c, d)].conj() * gi[(c, a)] * gi[(d, b)];
                    }
                }
            }
        }
        acc.re
    }

    /// Order-2 jets of `φ_α`.
    pub fn dphi_jets(&self, order: usize) -> Result<Vec<WJet>> {
        (0..self.n)
            .map(|a| Ok(self.jet.diff(Var::Z(a))?.truncate(order)))
            .collect()
    }

    pub fn dbarphi_jets(&self, order: usize) -> Result<Vec<WJet>> {
        (0..self.n)
            .map(|b| Ok(self.jet.diff(Var::Zbar(b))?.truncate(order)))
            .collect()
    }

    /// Jet of `g^{β̄α}` at `[β][α]` truncated to `order ≤ 2`.
    pub fn ginv_jets(&self, order: usize) -> Result<JetMat> {
        let inv = inverse_jets(&self.gj)?;
        Ok(inv
            .into_iter()
            .map(|r| r.into_iter().map(|j| j.truncate(order)).collect())
            .collect())
    }

    /// Order-2 jet of `u = φ_α φ_β̄ g^{β̄α}`.
    pub fn u_jet(&self) -> Result<WJet> {
        let d = self.dphi_jets(2)?;
        let db = self.dbarphi_jets(2)?;
        let gi = self.ginv_jets(2)?;
        let mut acc = d[0].scale(ZERO);
        for a in 0..self.n {
            for b in 0..self.n {
                acc = &acc + &(&(&d[a] * &db[b]) * &gi[b][a]);
            }
        }
        Ok(acc)
    }

    pub fn laplacian(&self, f: &WJet) -> f64 {
        let gi = &self.frame.ginv;
        let mut acc = ZERO;
        for a in 0..self.n {
            for b in 0..self.n {
                acc += gi[(b, a)] * f.partial(&[a], &[b]);
            }
        }
        acc.re
    }

    pub fn report(&self) -> Result<PotentialReport> {
        let n = self.n as f64;
        let k = kappa(self.n);
        let u = self.u();
        let hess20_normsq = self.norm_sq_20(&self.hess20);
        let laplacian_u = self.laplacian(&self.u_jet()?);
        let pde_residual = (laplacian_u - hess20_normsq - n * k * k + k * u).abs();
        Ok(PotentialReport {
            u,
            gradphi: self.grad.clone(),
            hess20: self.hess20.clone(),
            hess20_normsq,
            laplacian_u,
            pde_residual,
            einstein_residual: einstein_of(&self.frame),
        })
    }
}

/// `v^α = g^{β̄α} v_β̄`.
pub(crate) fn raise(ginv: &CMat, lower_bar: &[Complex64]) -> Vec<Complex64> {
    let n = lower_bar.len();
    (0..n)
        .map(|a| (0..n).map(|b| ginv[(b, a)] * lower_bar[b]).sum())
        .collect()
}

pub fn potential_report<F: JetEval + ?Sized>(phi: &F, p: &CPoint) -> Result<PotentialReport> {
    Local::new(phi, p)?.report()
}

/// `|Δ_ω u − ‖∇'²φ‖² − n(n+1)² + (n+1)u|`.
pub fn pde_residual<F: JetEval + ?Sized>(phi: &F, p: &CPoint) -> Result<f64> {
    Ok(potential_report(phi, p)?.pde_residual)
}

/// `max_γ |φ_{α;γ}φ^α + (n+1)φ_γ|`.
pub fn key_equation_residual<F: JetEval + ?Sized>(phi: &F, p: &CPoint) -> Result<f64> {
    let l = Local::new(phi, p)?;
    let k = kappa(l.n);
    Ok((0..l.n)
        .map(|c| {
            let s: Complex64 = (0..l.n).map(|a| l.hess20[(a, c)] * l.grad[a]).sum();
            (s + l.dphi[c] * k).norm()
        })
        .fold(0.0, f64::max))
}

/// Residual of the commutation identities `φ_{α;λμ̄} = φ_β R_α{}^β{}_{λμ̄}` and
/// `φ_{β̄;λμ̄} = 0` (sum of the two max-norms).
pub fn curvature_identity_residual<F: JetEval + ?Sized>(phi: &F, p: &CPoint) -> Result<f64> {
    let l = Local::new(phi, p)?;
    let n = l.n;
    let f = &l.frame;
    let gi1 = l.ginv_jets(1)?;
    let d1 = l.dphi_jets(1)?;
    // Γ^γ_{αλ} as order-1 jets
    let gamma_jet = |c: usize, a: usize, lam: usize| -> Result<WJet> {
        let mut acc = d1[0].scale(ZERO);
        for d in 0..n {
            acc = &acc + &(&gi1[d][c] * &l.gj[lam][d].diff(Var::Z(a))?);
        }
        Ok(acc)
    };
    let mut first = 0.0f64;
    for a in 0..n {
        for lam in 0..n {
            let mut t = l.jet.diff(Var::Z(a))?.diff(Var::Z(lam))?.truncate(1);
            for c in 0..n {
                t = &t - &(&gamma_jet(c, a, lam)? * &d1[c]);
            }
            for m in 0..n {
                let rhs: Complex64 = (0..n)
                    .map(|b| l.dphi[b] * f.raised_curvature(a, b, lam, m))
                    .sum();
                first = first.max((t.dbar(m) - rhs).norm());
            }
        }
    }
    let mut second = 0.0f64;
    for lam in 0..n {
        for b in 0..n {
            for m in 0..n {
                let direct = l.jet.partial(&[lam], &[b, m]);
                let corr: Complex64 = (0..n)
                    .map(|e| f.gamma(e, m, b).conj() * l.jet.partial(&[lam], &[e]))
                    .sum();
                second = second.max((direct - corr).norm());
            }
        }
    }
    Ok(first + second)
}

/// The endomorphism `S^α_γ = φ^α{}_{;β̄} φ^β̄{}_{;γ}` and its spectrum.
#[derive(Clone, Debug)]
pub struct SOperator {
    pub matrix: CMat,
    /// Descending.
    pub eigenvalues: Vec<f64>,
    pub trace: f64,
    /// `⟨S∇φ, ∇φ⟩/⟨∇φ, ∇φ⟩`, `None` where `∇φ` vanishes.
    pub grad_eigenvalue: Option<f64>,
    /// `‖S∇φ − λ∇φ‖/‖∇φ‖` for the value above.
    pub grad_eigen_residual: Option<f64>,
    /// Length `C` forced by the PDE if `u` were constant with this trace,
    /// `C² = (tr S + n(n+1)²)/(n+1)`.
    pub implied_length: f64,
}

pub fn s_operator<F: JetEval + ?Sized>(phi: &F, p: &CPoint) -> Result<SOperator> {
    let l = Local::new(phi, p)?;
    Ok(s_of(&l))
}

pub(crate) fn s_of(l: &Local) -> SOperator {
    let n = l.n;
    let gi = &l.frame.ginv;
    let q = gi * &l.hess20;
    let matrix = q.map(|x| x.conj()) * &q;
    // S is similar to K*K with K = L* H conj(L), ginv = L L*
    let chol = gi
        .clone()
        .cholesky()
        .map(|c| c.l())
        .unwrap_or_else(|| CMat::identity(n, n));
    let kmat = chol.adjoint() * &l.hess20 * chol.map(|x| x.conj());
    let mut eigenvalues: Vec<f64> = kmat.singular_values().iter().map(|s| s * s).collect();
    eigenvalues.sort_by(|a, b| b.total_cmp(a));
    let trace = l.norm_sq_20(&l.hess20);
    let gnorm = linalg::metric_inner(&l.frame.g, &l.grad, &l.grad).re;
    let (grad_eigenvalue, grad_eigen_residual) = if gnorm > 1e-24 {
        let sg: Vec<Complex64> = (0..n)
            .map(|a| (0..n).map(|c| matrix[(a, c)] * l.grad[c]).sum())
            .collect();
        let lam = linalg::metric_inner(&l.frame.g, &sg, &l.grad).re / gnorm;
        let diff: Vec<Complex64> = sg.iter().zip(&l.grad).map(|(s, g)| s - g * lam).collect();
        (
            Some(lam),
            Some(linalg::metric_norm(&l.frame.g, &diff) / gnorm.sqrt()),
        )
    } else {
        (None, None)
    };
    let k = kappa(n);
    SOperator {
        matrix,
        eigenvalues,
        trace,
        grad_eigenvalue,
        grad_eigen_residual,
        implied_length: ((trace + n as f64 * k * k) / k).sqrt(),
    }
}

/// `u = ‖∂φ‖²_ω` from an order-2 jet.
pub fn gradient_norm_sq<F: JetEval + ?Sized>(phi: &F, p: &CPoint) -> Result<f64> {
    let jet = jet_of(phi, p, 2)?;
    let gj = metric_jets(&jet)?;
    let g = values(&gj);
    linalg::check_metric(&g)?;
    let ginv = linalg::inverse(&g)?;
    let n = p.dim();
    let db: Vec<Complex64> = (0..n).map(|b| jet.dbar(b)).collect();
    let grad = raise(&ginv, &db);
    Ok((0..n).map(|a| jet.d(a) * grad[a]).sum::<Complex64>().re.max(0.0))
}

/// Metric at `p` from an order-2 jet.
pub fn metric_at<F: JetEval + ?Sized>(phi: &F, p: &CPoint) -> Result<CMat> {
    let jet = jet_of(phi, p, 2)?;
    let g = values(&metric_jets(&jet)?);
    linalg::check_metric(&g)?;
    Ok(g)
}

/// Riemannian length `∫ 2‖γ̇‖_g dt` of the straight segment `a → b`
/// (composite 8-point Gauss–Legendre, pieces graded geometrically toward `b`
/// when `grade` is set).
pub fn metric_segment_length<F: JetEval + ?Sized>(
    phi: &F,
    a: &CPoint,
    b: &CPoint,
    pieces: usize,
    grade: bool,
) -> Result<f64> {
    let n = a.dim();
    let v: Vec<Complex64> = (0..n).map(|k| b[k] - a[k]).collect();
    let mut breaks: Vec<f64> = if grade {
        let mut br: Vec<f64> = (0..pieces).map(|k| 1.0 - 0.5f64.powi(k as i32)).collect();
        br.push(1.0);
        br
    } else {
        (0..=pieces).map(|k| k as f64 / pieces as f64).collect()
    };
    breaks.dedup();
    let rule = linalg::gauss_legendre_01();
    let mut total = 0.0;
    for w in breaks.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        for &(x, wt) in &rule {
            let t = lo + (hi - lo) * x;
            let q = CPoint::new((0..n).map(|k| a[k] + v[k] * t).collect())?;
            let g = metric_at(phi, &q)?;
            total += (hi - lo) * wt * 2.0 * linalg::metric_norm(&g, &v);
        }
    }
    Ok(total)
}
