//! Energy densities, boundary (surface) terms and totals for both models.
//!
//! Continuum densities use the same discrete operators as [`crate::donet`].
//! The boundary terms are integrated exactly against the piecewise-linear
//! interpolant of the nodal field, once in Caputo form (the surface energy
//! itself) and once in relative-displacement form (the closed boundary
//! expression it cancels), so their sum measures a real discretization error.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::donet::{mul, DonetOperators, RodProblem};
use crate::error::Result;
use crate::fractional_ops::{gradient, pw, rgamma, Mesh1D};
use crate::mslm::LatticeModel;

#[derive(Debug, Clone, Serialize)]
pub struct EnergyReport {
    pub density_c1: Vec<f64>,
    pub density_c2: Vec<f64>,
    /// Per-node spring energy (not divided by the spacing).
    pub density_m: Vec<f64>,
    pub density_m1: Vec<f64>,
    pub ub0: f64,
    pub ubl: f64,
    pub pi_c1: f64,
    pub pi_c2: f64,
    pub pi_m: f64,
    pub pi_m1: f64,
    pub pi1: f64,
    pub pi2: f64,
    pub pi3: f64,
    /// `|pi1 + pi3|`.
    pub residual: f64,
    /// Same cancellation measured with nodal stencils only.
    pub nodal_residual: f64,
}

impl EnergyReport {
    /// Largest pairwise relative difference among the three totals.
    pub fn spread(&self) -> f64 {
        let p = [self.pi_c1, self.pi_c2, self.pi_m];
        let mut s = 0.0f64;
        for a in p {
            for b in p {
                let m = a.abs().max(b.abs());
                if m > 0.0 {
                    s = s.max((a - b).abs() / m);
                }
            }
        }
        s
    }
}

pub fn trapz(y: &[f64], d: f64) -> f64 {
    let n = y.len();
    if n < 2 {
        return 0.0;
    }
    d * (y.iter().sum::<f64>() - 0.5 * (y[0] + y[n - 1]))
}

/// `1/2 EA Du S u` per node.
pub fn density_c1(problem: &RodProblem, ops: &DonetOperators, u: &[f64]) -> Vec<f64> {
    let du = gradient(u, problem.mesh.dx());
    let su = ops.apply_stress(u);
    du.iter().zip(&su).map(|(g, s)| 0.5 * problem.ea() * g * s).collect()
}

/// `1/4 sum_j k_ij (u_j - u_i)^2` per node.
pub fn density_m(model: &LatticeModel, u: &[f64]) -> Vec<f64> {
    let m = u.len();
    (0..m)
        .map(|i| {
            0.25 * (0..m)
                .map(|j| model.springs[(i, j)] * (u[j] - u[i]).powi(2))
                .sum::<f64>()
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct C2Density {
    pub density: Vec<f64>,
    pub ub0: f64,
    pub ubl: f64,
}

/// `EA (1/4 G u^2 - 1/2 u G u)` per node with the surface terms at both ends.
pub fn density_c2(problem: &RodProblem, ops: &DonetOperators, u: &[f64]) -> Result<C2Density> {
    let g = ops.divergence_full(problem.mesh.dx());
    let u2: Vec<f64> = u.iter().map(|v| v * v).collect();
    let gu2 = mul(&g, &u2);
    let gu = mul(&g, u);
    let ea = problem.ea();
    let density = (0..u.len()).map(|i| ea * (0.25 * gu2[i] - 0.5 * u[i] * gu[i])).collect();
    let n = problem.mesh.n();
    Ok(C2Density {
        density,
        ub0: surface_energy(problem, u, 0)?,
        ubl: surface_energy(problem, u, n)?,
    })
}

/// Span-distributed spring energy: each spring's `1/2 k du^2` is spread over
/// the nodes it covers with end weights one half, so the totals agree.
pub fn density_m1(model: &LatticeModel, u: &[f64]) -> Vec<f64> {
    let m = u.len();
    let mut out = vec![0.0; m];
    for p in 0..m {
        for q in p + 1..m {
            let e = 0.5 * model.springs[(p, q)] * (u[q] - u[p]).powi(2);
            if e == 0.0 {
                continue;
            }
            let w = e / (q - p) as f64;
            out[p] += 0.5 * w;
            out[q] += 0.5 * w;
            for o in &mut out[p + 1..q] {
                *o += w;
            }
        }
    }
    out
}

/// Caputo-form surface energy per unit `EA` at node `i`, one order.
pub fn surface_energy_co(mesh: &Mesh1D, alpha: f64, u: &[f64], i: usize) -> f64 {
    let n = mesh.n();
    let d = mesh.dx();
    let g2 = rgamma(2.0 - alpha);
    let g3 = (1.0 - alpha) * rgamma(3.0 - alpha);
    let xi = mesh.x(i);
    let mut tot = 0.0;
    for j in 0..n {
        let dj = (u[j + 1] - u[j]) / d;
        if j < i {
            let (a, b) = (xi - mesh.x(j), xi - mesh.x(j + 1));
            let i0 = (pw(a, 1.0 - alpha) - pw(b, 1.0 - alpha)) * g2;
            let i1 = a * i0 - (pw(a, 2.0 - alpha) - pw(b, 2.0 - alpha)) * g3;
            tot += dj * ((u[j] - u[i]) * i0 + dj * i1);
        } else {
            let (a, b) = (mesh.x(j + 1) - xi, mesh.x(j) - xi);
            let i0 = (pw(a, 1.0 - alpha) - pw(b, 1.0 - alpha)) * g2;
            let j1 = (pw(a, 2.0 - alpha) - pw(b, 2.0 - alpha)) * g3;
            tot += dj * ((u[j + 1] - u[i] - dj * a) * i0 + dj * j1);
        }
    }
    0.25 * tot
}

/// Relative-displacement form of the same boundary expression, per unit `EA`.
pub fn boundary_closed_co(mesh: &Mesh1D, alpha: f64, u: &[f64], i: usize) -> f64 {
    let n = mesh.n();
    let d = mesh.dx();
    let g1 = rgamma(1.0 - alpha);
    let g2 = alpha * rgamma(2.0 - alpha);
    let g3 = alpha * (1.0 - alpha) * rgamma(3.0 - alpha);
    let xi = mesh.x(i);
    let mut tot = 0.0;
    for left in [true, false] {
        if (left && i == 0) || (!left && i == n) {
            continue;
        }
        let end = if left { 0 } else { n };
        let r = (xi - mesh.x(end)).abs();
        let mut s = g1 * (u[i] - u[end]).powi(2) * r.powf(-alpha);
        let cells = if left { 0..i } else { i..n };
        for j in cells {
            let dj = (u[j + 1] - u[j]) / d;
            let (a, b, c0, cd) = if left {
                (xi - mesh.x(j), xi - mesh.x(j + 1), u[i] - u[j + 1], dj)
            } else {
                (mesh.x(j + 1) - xi, mesh.x(j) - xi, u[i] - u[j], -dj)
            };
            let p = c0 - cd * b;
            let q = cd;
            let k0 = if b == 0.0 || p == 0.0 { 0.0 } else { (b.powf(-alpha) - a.powf(-alpha)) * g1 };
            let k1 = (pw(a, 1.0 - alpha) - pw(b, 1.0 - alpha)) * g2;
            let k2 = (pw(a, 2.0 - alpha) - pw(b, 2.0 - alpha)) * g3;
            s += p * p * k0 + 2.0 * p * q * k1 + q * q * k2;
        }
        tot += if left { -s / 8.0 } else { s / 8.0 };
    }
    tot
}

fn order_sum<F: Fn(f64) -> f64>(problem: &RodProblem, f: F) -> Result<f64> {
    Ok(problem.dist.terms()?.into_iter().map(|(a, w)| w * f(a)).sum::<f64>() * problem.ea())
}

/// Surface energy `U^b` at node `i` (0 or n).
pub fn surface_energy(problem: &RodProblem, u: &[f64], i: usize) -> Result<f64> {
    order_sum(problem, |a| surface_energy_co(&problem.mesh, a, u, i))
}

pub fn boundary_closed(problem: &RodProblem, u: &[f64], i: usize) -> Result<f64> {
    order_sum(problem, |a| boundary_closed_co(&problem.mesh, a, u, i))
}

pub fn totals(
    problem: &RodProblem,
    ops: &DonetOperators,
    model: &LatticeModel,
    u_donet: &[f64],
    u_mslm: &[f64],
) -> Result<EnergyReport> {
    let d = problem.mesh.dx();
    let n = problem.mesh.n();
    let ea = problem.ea();
    let density_c1 = density_c1(problem, ops, u_donet);
    let c2 = density_c2(problem, ops, u_donet)?;
    let density_m = density_m(model, u_mslm);
    let density_m1 = density_m1(model, u_mslm);
    let pi_c1 = trapz(&density_c1, d);
    let bulk = trapz(&c2.density, d);
    let pi3 = c2.ub0 - c2.ubl;
    let pi1 = boundary_closed(problem, u_donet, n)? - boundary_closed(problem, u_donet, 0)?;

    let nodal = |s: &DMatrix<f64>, i: usize| {
        let r = s.row(i);
        let su2: f64 = r.iter().zip(u_donet).map(|(c, v)| c * v * v).sum();
        let su: f64 = r.iter().zip(u_donet).map(|(c, v)| c * v).sum();
        0.25 * su2 - 0.5 * u_donet[i] * su
    };
    let (sm, sl) = (&ops.stress, &ops.stress_l1);
    let nodal_residual =
        ea * (nodal(sm, n) - nodal(sm, 0) + nodal(sl, 0) - nodal(sl, n)).abs();

    Ok(EnergyReport {
        pi_c2: bulk + pi3,
        pi_m: density_m.iter().sum(),
        pi_m1: density_m1.iter().sum(),
        density_c1,
        density_c2: c2.density,
        density_m,
        density_m1,
        ub0: c2.ub0,
        ubl: c2.ubl,
        pi_c1,
        pi1,
        pi2: bulk - pi1,
        pi3,
        residual: (pi1 + pi3).abs(),
        nodal_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mslm::{self, BodyLoad, BoundaryCondition};
    use crate::order_distributions::{Kind, OrderDistribution};
    use approx::assert_relative_eq;

    fn problem(kind: Kind, n: usize) -> RodProblem {
        RodProblem::new(
            Mesh1D::new(1.0, n).unwrap(),
            1.0,
            1.0,
            OrderDistribution::new(kind, 20).unwrap(),
            BoundaryCondition::dbc(1.0),
            BodyLoad::zero(),
        )
        .unwrap()
    }

    #[test]
    fn single_spring_split() {
        let p = problem(Kind::Uniform, 2);
        let mut model = mslm::assemble(&p.mesh, 1.0, &p.dist).unwrap();
        model.springs.fill(0.0);
        model.springs[(0, 1)] = 2.0;
        model.springs[(1, 0)] = 2.0;
        let u = [0.0, 1.0, 1.0];
        let dm = density_m(&model, &u);
        assert_relative_eq!(dm[0], 0.5);
        assert_relative_eq!(dm[1], 0.5);
        let d1 = density_m1(&model, &u);
        assert_relative_eq!(d1[0] + d1[1], 1.0);
        assert_eq!(d1[2], 0.0);
    }

    #[test]
    fn constant_field_is_energy_free() {
        let p = problem(Kind::Linear, 10);
        let ops = p.operators().unwrap();
        let u = [0.7; 11];
        let c2 = density_c2(&p, &ops, &u).unwrap();
        assert!(c2.density.iter().all(|v| v.abs() < 1e-12));
        assert!(c2.ub0.abs() < 1e-14 && c2.ubl.abs() < 1e-14);
        assert!(density_c1(&p, &ops, &u).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn closed_form_cancels_surface_term() {
        let p = problem(Kind::Dirac { alpha: 0.4 }, 12);
        let u: Vec<f64> = p.mesh.xs().iter().map(|x| x * x - 0.3 * x).collect();
        for a in [0.0, 0.25, 0.6, 1.0] {
            let s0 = surface_energy_co(&p.mesh, a, &u, 0);
            let sl = surface_energy_co(&p.mesh, a, &u, 12);
            let b0 = boundary_closed_co(&p.mesh, a, &u, 0);
            let bl = boundary_closed_co(&p.mesh, a, &u, 12);
            assert!((bl - b0 + s0 - sl).abs() < 1e-12, "alpha {a}");
        }
    }

    #[test]
    fn surface_energy_vanishes_in_local_limit() {
        let p = problem(Kind::Uniform, 8);
        let u: Vec<f64> = p.mesh.xs().iter().map(|x| x.sin()).collect();
        assert!(surface_energy_co(&p.mesh, 1.0, &u, 0).abs() < 1e-14);
    }

    #[test]
    fn m1_conserves_total() {
        let p = problem(Kind::Uniform, 15);
        let model = mslm::assemble(&p.mesh, 1.0, &p.dist).unwrap();
        let u: Vec<f64> = p.mesh.xs().iter().map(|x| (3.0 * x).sin()).collect();
        let a: f64 = density_m(&model, &u).iter().sum();
        let b: f64 = density_m1(&model, &u).iter().sum();
        assert_relative_eq!(a, b, max_relative = 1e-13);
    }
}
