//! Continuum distributed-order rod solved on its own discretization.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fractional_ops::{
    marchaud_divergence_rows, marchaud_stress_rows, riesz_l1_rows, traction_row, Mesh1D,
};
use crate::mslm::{self, dense_solve, BodyLoad, BoundaryCondition, RightEnd};
use crate::order_distributions::OrderDistribution;

#[derive(Debug, Clone)]
pub struct RodProblem {
    pub mesh: Mesh1D,
    pub e: f64,
    pub a: f64,
    pub dist: OrderDistribution,
    pub bc: BoundaryCondition,
    pub load: BodyLoad,
}

impl RodProblem {
    pub fn new(
        mesh: Mesh1D,
        e: f64,
        a: f64,
        dist: OrderDistribution,
        bc: BoundaryCondition,
        load: BodyLoad,
    ) -> Result<Self> {
        for (name, v) in [("E", e), ("A", a)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Invalid(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self { mesh, e, a, dist, bc, load })
    }

    pub fn ea(&self) -> f64 {
        self.e * self.a
    }

    pub fn with_bc(&self, bc: BoundaryCondition) -> Self {
        Self { bc, ..self.clone() }
    }

    pub fn with_load(&self, load: BodyLoad) -> Self {
        Self { load, ..self.clone() }
    }

    pub fn with_dist(&self, dist: OrderDistribution) -> Self {
        Self { dist, ..self.clone() }
    }

    pub fn operators(&self) -> Result<DonetOperators> {
        DonetOperators::assemble(&self.mesh, &self.dist)
    }
}

/// Order-weighted discrete operators, all per unit `E`.
#[derive(Debug, Clone)]
pub struct DonetOperators {
    /// Relative-displacement Riesz stress.
    pub stress: DMatrix<f64>,
    /// Divergence of the stress on interior rows.
    pub divergence: DMatrix<f64>,
    /// Traction row at `x = L` (per unit `EA`).
    pub traction: DVector<f64>,
    /// L1 Riesz stress, kept for diagnostics.
    pub stress_l1: DMatrix<f64>,
}

impl DonetOperators {
    pub fn assemble(mesh: &Mesh1D, dist: &OrderDistribution) -> Result<Self> {
        let m = mesh.nodes();
        let mut ops = Self {
            stress: DMatrix::zeros(m, m),
            divergence: DMatrix::zeros(m, m),
            traction: DVector::zeros(m),
            stress_l1: DMatrix::zeros(m, m),
        };
        for (a, w) in dist.terms()? {
            crate::fractional_ops::check_closed(a)?;
            ops.stress += marchaud_stress_rows(mesh, a) * w;
            ops.divergence += marchaud_divergence_rows(mesh, a) * w;
            ops.traction += traction_row(mesh, a) * w;
            ops.stress_l1 += riesz_l1_rows(mesh, a) * w;
        }
        if ops.stress.iter().chain(ops.divergence.iter()).any(|v| !v.is_finite()) {
            return Err(Error::SingularIntegrand { alpha: f64::NAN });
        }
        Ok(ops)
    }

    pub fn apply_stress(&self, u: &[f64]) -> Vec<f64> {
        mul(&self.stress, u)
    }

    pub fn apply_divergence(&self, u: &[f64]) -> Vec<f64> {
        mul(&self.divergence, u)
    }

    /// Divergence with one-sided second-order differences of the stress on
    /// the two boundary rows.
    pub fn divergence_full(&self, d: f64) -> DMatrix<f64> {
        let n = self.stress.nrows() - 1;
        let mut g = self.divergence.clone();
        let s = &self.stress;
        let r0 = (s.row(0) * -3.0 + s.row(1) * 4.0 - s.row(2)) / (2.0 * d);
        let rn = (s.row(n) * 3.0 - s.row(n - 1) * 4.0 + s.row(n - 2)) / (2.0 * d);
        g.set_row(0, &r0);
        g.set_row(n, &rn);
        g
    }
}

pub(crate) fn mul(m: &DMatrix<f64>, u: &[f64]) -> Vec<f64> {
    (m * DVector::from_column_slice(u)).as_slice().to_vec()
}

/// Nodal stress `E * (stress operator) u`.
pub fn stress(problem: &RodProblem, u: &[f64]) -> Result<Vec<f64>> {
    let ops = problem.operators()?;
    Ok(ops.apply_stress(u).into_iter().map(|s| problem.e * s).collect())
}

pub fn solve_static(problem: &RodProblem) -> Result<Vec<f64>> {
    let ops = problem.operators()?;
    solve_with(problem, &ops)
}

pub fn solve_with(problem: &RodProblem, ops: &DonetOperators) -> Result<Vec<f64>> {
    let mesh = &problem.mesh;
    let n = mesh.n();
    let d = mesh.dx();
    let ea = problem.ea();
    let mut a = &ops.divergence * ea;
    let mut rhs = DVector::from_iterator(n + 1, (0..=n).map(|i| -problem.load.at(mesh.x(i))));
    a.row_mut(0).fill(0.0);
    a[(0, 0)] = 1.0;
    rhs[0] = 0.0;
    match problem.bc.right {
        RightEnd::Dbc(u0) => {
            a.row_mut(n).fill(0.0);
            a[(n, n)] = 1.0;
            rhs[n] = u0;
        }
        RightEnd::Tbc(t0) => {
            let row = ops.traction.transpose() * ea;
            a.set_row(n, &row);
            rhs[n] = t0 + 0.5 * d * problem.load.at(mesh.length());
        }
    }
    Ok(dense_solve(a, rhs)?.as_slice().to_vec())
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub u_donet: Vec<f64>,
    pub u_mslm: Vec<f64>,
    /// `max_i |u_donet - u_mslm| / max_i |u_mslm|`.
    pub discrepancy: f64,
}

pub fn discrepancy(u_donet: &[f64], u_mslm: &[f64]) -> f64 {
    let scale = u_mslm.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = u_donet
        .iter()
        .zip(u_mslm)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

pub fn compare_with_mslm(problem: &RodProblem) -> Result<Comparison> {
    let u_donet = solve_static(problem)?;
    let model = mslm::assemble(&problem.mesh, problem.ea(), &problem.dist)?;
    let u_mslm = mslm::solve_static(&model, &problem.bc, &problem.load)?;
    let discrepancy = discrepancy(&u_donet, &u_mslm);
    Ok(Comparison { u_donet, u_mslm, discrepancy })
}
