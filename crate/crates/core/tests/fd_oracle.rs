//! Jets against central finite differences.

use kahler_core::complexad::{fd_check, jet_of, CPoint, Coords, JetEval, WJet};
use kahler_core::domains::{defining_function_by_name, potential_by_name, PotentialSpec};
use kahler_core::kaehler::{gradient_norm_sq, potential_report};
use kahler_core::sampling::sample_ball;
use kahler_core::Result;
use num_complex::Complex64;

const CATALOG: [&str; 5] = [
    "ball",
    "ball_horospherical",
    "ball_quartic",
    "radial_eps=0.1",
    "radial_eps_normalized=0.1",
];

/// All (unbarred, barred) index lists with total degree 1..=max, up to order.
fn index_lists(n: usize, max: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    fn multisets(n: usize, k: usize, from: usize) -> Vec<Vec<usize>> {
        if k == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for i in from..n {
            for mut rest in multisets(n, k - 1, i) {
                rest.insert(0, i);
                out.push(rest);
            }
        }
        out
    }
    let mut out = Vec::new();
    for deg in 1..=max {
        for ka in 0..=deg {
            for a in multisets(n, ka, 0) {
                for b in multisets(n, deg - ka, 0) {
                    out.push((a.clone(), b));
                }
            }
        }
    }
    out
}

/// Richardson-extrapolated central difference.
fn fd(f: &PotentialSpec, p: &CPoint, a: &[usize], b: &[usize], h: f64) -> Complex64 {
    let coarse = fd_check(f, p, a, b, 2.0 * h).unwrap();
    let fine = fd_check(f, p, a, b, h).unwrap();
    (fine * 4.0 - coarse) / 3.0
}

/// Interior points of a potential's domain, at most radius 0.8.
fn interior(phi: &PotentialSpec, count: usize, seed: u64) -> Vec<CPoint> {
    sample_ball(phi.dim(), 0.8, count * 2, seed)
        .into_iter()
        .filter(|p| phi.contains(p) && phi.boundary_margin(p) > 0.1)
        .take(count)
        .collect()
}

#[test]
fn jets_to_third_order_match_finite_differences() {
    let n = 2;
    let lists = index_lists(n, 3);
    assert_eq!(lists.len(), 34);
    for name in CATALOG {
        let phi = potential_by_name(name, n).unwrap();
        let pts = interior(&phi, 100, 2024);
        assert_eq!(pts.len(), 100, "{name}");
        let mut worst = 0.0f64;
        for p in &pts {
            let jet = phi.jet(p, 3).unwrap();
            // step scaled to the boundary margin
            let h = (0.005 * phi.boundary_margin(p)).clamp(1e-3, 2e-3);
            for (a, b) in &lists {
                let want = jet.partial(a, b);
                let got = fd(&phi, p, a, b, h);
                let err = (want - got).norm();
                // relative 1e-5, absolute 1e-7 near zero; score ≤ 1 means pass
                let score = err / (1e-5 * want.norm()).max(1e-7);
                assert!(score <= 1.0, "{name} at {:?}, ∂{a:?}∂̄{b:?}: jet {want} fd {got}", p.coords());
                worst = worst.max(score);
            }
        }
        assert!(worst <= 1.0);
    }
}

#[test]
fn first_order_coefficients_of_ball_potential() {
    let phi = potential_by_name("ball", 2).unwrap();
    let p = CPoint::new(vec![Complex64::new(0.2, 0.0), Complex64::new(0.0, 0.1)]).unwrap();
    let jet = phi.jet(&p, 1).unwrap();
    for k in 0..2 {
        assert!((fd_check(&phi, &p, &[k], &[], 1e-4).unwrap() - jet.d(k)).norm() < 1e-6);
        assert!((fd_check(&phi, &p, &[], &[k], 1e-4).unwrap() - jet.dbar(k)).norm() < 1e-6);
    }
}

#[test]
fn dimension_one_and_three_spot_checks() {
    for n in [1, 3] {
        let lists = index_lists(n, 3);
        for name in CATALOG {
            let phi = potential_by_name(name, n).unwrap();
            for p in interior(&phi, 5, 77) {
                let jet = phi.jet(&p, 3).unwrap();
                for (a, b) in &lists {
                    let want = jet.partial(a, b);
                    let got = fd(&phi, &p, a, b, (0.005 * phi.boundary_margin(&p)).clamp(1e-3, 2e-3));
                    let err = (want - got).norm();
                    assert!(err <= 1e-5 * want.norm() || err <= 1e-7, "{name} n={n}");
                }
            }
        }
    }
}

/// `p ↦ u(p)` as a scalar map, so that finite differences see only values.
struct UMap<'a>(&'a PotentialSpec);

impl JetEval for UMap<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn contains(&self, p: &CPoint) -> bool {
        self.0.contains(p)
    }
    fn eval(&self, x: &Coords) -> Result<WJet> {
        let u = gradient_norm_sq(self.0, &x.point()?)?;
        Ok(x.constant(u))
    }
    fn label(&self) -> &str {
        "u"
    }
}

#[test]
fn laplacian_of_u_matches_finite_differences() {
    for name in ["ball", "ball_quartic", "radial_eps=0.1"] {
        for n in 1..=3 {
            let phi = potential_by_name(name, n).unwrap();
            let umap = UMap(&phi);
            for p in interior(&phi, 8, 5) {
                let rep = potential_report(&phi, &p).unwrap();
                let ginv = kahler_core::kaehler::frame_from_potential(&phi, &p).unwrap().ginv;
                let mut lap = Complex64::new(0.0, 0.0);
                for a in 0..n {
                    for b in 0..n {
                        let c = fd_check(&umap, &p, &[a], &[b], 2e-3).unwrap() * 4.0
                            - fd_check(&umap, &p, &[a], &[b], 4e-3).unwrap();
                        lap += ginv[(b, a)] * c / 3.0;
                    }
                }
                assert!(
                    (lap.re - rep.laplacian_u).abs() < 1e-5 * rep.laplacian_u.abs().max(1.0),
                    "{name} n={n}: fd {} jet {}",
                    lap.re,
                    rep.laplacian_u
                );
            }
        }
    }
}

#[test]
fn defining_function_jets_match_finite_differences() {
    let r = defining_function_by_name("radial_eps=0.2", 2).unwrap();
    let phi = r.potential().unwrap();
    let p = CPoint::new(vec![Complex64::new(0.3, 0.2), Complex64::new(-0.1, 0.4)]).unwrap();
    let jet = jet_of(&phi, &p, 2).unwrap();
    let got = fd(&phi, &p, &[0], &[1], 1e-3);
    assert!((jet.partial(&[0], &[1]) - got).norm() < 1e-8);
}
