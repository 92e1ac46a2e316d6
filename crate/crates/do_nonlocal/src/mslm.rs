//! Nonlocal mass-spring lattice: closed-form spring stiffnesses, order
//! weighting, static solves and boundary forces.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fractional_ops::{check_closed, check_open, rgamma, Mesh1D};
use crate::order_distributions::OrderDistribution;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "type", content = "value", rename_all = "lowercase")]
pub enum RightEnd {
    /// Prescribed displacement `u(L)`.
    Dbc(f64),
    /// Point force `T0` at `x = L`.
    Tbc(f64),
}

/// Left end is always fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryCondition {
    pub right: RightEnd,
}

impl BoundaryCondition {
    pub fn dbc(u0: f64) -> Self {
        Self { right: RightEnd::Dbc(u0) }
    }

    pub fn tbc(t0: f64) -> Self {
        Self { right: RightEnd::Tbc(t0) }
    }

    pub fn is_traction(&self) -> bool {
        matches!(self.right, RightEnd::Tbc(_))
    }

    pub fn value(&self) -> f64 {
        match self.right {
            RightEnd::Dbc(v) | RightEnd::Tbc(v) => v,
        }
    }
}

/// Axial force density `f(x)` [N/m].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum BodyLoad {
    Constant { f: f64 },
    /// Piecewise-linear through `(x, f)` samples, constant beyond the ends.
    Tabulated { points: Vec<(f64, f64)> },
}

impl BodyLoad {
    pub fn zero() -> Self {
        BodyLoad::Constant { f: 0.0 }
    }

    pub fn at(&self, x: f64) -> f64 {
        match self {
            BodyLoad::Constant { f } => *f,
            BodyLoad::Tabulated { points } => {
                let (first, last) = match (points.first(), points.last()) {
                    (Some(a), Some(b)) => (a, b),
                    _ => return 0.0,
                };
                if x <= first.0 {
                    return first.1;
                }
                if x >= last.0 {
                    return last.1;
                }
                let k = points.partition_point(|p| p.0 <= x);
                let (x0, f0) = points[k - 1];
                let (x1, f1) = points[k];
                f0 + (f1 - f0) * (x - x0) / (x1 - x0)
            }
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        match self {
            BodyLoad::Constant { f } => BodyLoad::Constant { f: f * s },
            BodyLoad::Tabulated { points } => BodyLoad::Tabulated {
                points: points.iter().map(|&(x, f)| (x, f * s)).collect(),
            },
        }
    }
}

/// Nodal external forces: trapezoidal lumping of the body load plus `T0` at
/// node `n` under a traction condition.
pub fn nodal_forces(mesh: &Mesh1D, load: &BodyLoad, bc: &BoundaryCondition) -> Vec<f64> {
    let n = mesh.n();
    let d = mesh.dx();
    let mut f: Vec<f64> = (0..=n)
        .map(|i| {
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            w * d * load.at(mesh.x(i))
        })
        .collect();
    if let RightEnd::Tbc(t0) = bc.right {
        f[n] += t0;
    }
    f
}

/// Closed-form constant-order stiffness for `alpha` in `[0, 1]`, using the
/// analytic limits at the ends.
pub(crate) fn k_co(mesh: &Mesh1D, ea: f64, alpha: f64, i: usize, j: usize) -> f64 {
    let (p, q) = if i < j { (i, j) } else { (j, i) };
    let n = mesh.n();
    let d = mesh.dx();
    let l = mesh.length();
    let a = alpha;
    let boundary = p == 0 || q == n;
    if p == 0 && q == n {
        return 0.5 * ea * rgamma(1.0 - a)
            * (l.powf(-a) + a * d * l.powf(-(1.0 + a)) + a * (1.0 + a) * d * d * l.powf(-(2.0 + a)));
    }
    if q - p == 1 {
        let g = rgamma(2.0 - a) * d.powf(-a);
        return if boundary {
            ea * a * g
        } else {
            0.5 * ea * a * (1.0 + a) * g
        };
    }
    let r = (q - p) as f64 * d;
    let pre = 0.5 * ea * d * rgamma(1.0 - a);
    let body = a * (1.0 + a) * d * r.powf(-(2.0 + a));
    if boundary {
        pre * (a * r.powf(-(1.0 + a)) + body)
    } else {
        pre * body
    }
}

pub fn spring_stiffness_co(mesh: &Mesh1D, ea: f64, alpha: f64, i: usize, j: usize) -> Result<f64> {
    if i == j {
        return Err(Error::SelfSpring { i, j });
    }
    let n = mesh.n();
    if i > n || j > n {
        return Err(Error::NodeRange { node: i.max(j), n });
    }
    check_open(alpha)?;
    Ok(k_co(mesh, ea, alpha, i, j))
}

/// Dense constant-order spring matrix (zero diagonal).
pub fn springs_co(mesh: &Mesh1D, ea: f64, alpha: f64) -> Result<DMatrix<f64>> {
    check_closed(alpha)?;
    let m = mesh.nodes();
    let mut k = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i + 1..m {
            let v = k_co(mesh, ea, alpha, i, j);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

#[derive(Debug, Clone)]
pub struct LatticeModel {
    pub mesh: Mesh1D,
    pub ea: f64,
    pub dist: OrderDistribution,
    /// Total spring stiffnesses `k_ij`, zero on the diagonal.
    pub springs: DMatrix<f64>,
    /// Equilibrium operator: `(K u)_i = sum_j k_ij (u_j - u_i)`.
    pub k: DMatrix<f64>,
}

pub fn assemble(mesh: &Mesh1D, ea: f64, dist: &OrderDistribution) -> Result<LatticeModel> {
    if !(ea > 0.0 && ea.is_finite()) {
        return Err(Error::Invalid(format!("EA must be positive, got {ea}")));
    }
    let m = mesh.nodes();
    let mut springs = DMatrix::zeros(m, m);
    for (a, w) in dist.terms()? {
        let ka = springs_co(mesh, ea, a)?;
        if ka.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularIntegrand { alpha: a });
        }
        springs += ka * w;
    }
    let mut k = springs.clone();
    for i in 0..m {
        k[(i, i)] = -springs.row(i).sum();
    }
    Ok(LatticeModel { mesh: *mesh, ea, dist: dist.clone(), springs, k })
}

impl LatticeModel {
    pub fn stiffness(&self, i: usize, j: usize) -> f64 {
        self.springs[(i, j)]
    }

    /// Spring forces on every node, `sum_j k_ij (u_j - u_i)`.
    pub fn internal_forces(&self, u: &[f64]) -> Vec<f64> {
        (&self.k * DVector::from_column_slice(u)).as_slice().to_vec()
    }
}

pub fn solve_static(model: &LatticeModel, bc: &BoundaryCondition, load: &BodyLoad) -> Result<Vec<f64>> {
    let mesh = &model.mesh;
    let n = mesh.n();
    let f = nodal_forces(mesh, load, bc);
    let mut u = vec![0.0; n + 1];
    let free: Vec<usize> = match bc.right {
        RightEnd::Dbc(u0) => {
            u[n] = u0;
            (1..n).collect()
        }
        RightEnd::Tbc(_) => (1..=n).collect(),
    };
    let nf = free.len();
    let mut a = DMatrix::zeros(nf, nf);
    let mut rhs = DVector::zeros(nf);
    for (r, &i) in free.iter().enumerate() {
        for (c, &j) in free.iter().enumerate() {
            a[(r, c)] = model.k[(i, j)];
        }
        rhs[r] = -f[i] - model.k[(i, n)] * if bc.is_traction() { 0.0 } else { u[n] };
    }
    let sol = dense_solve(a, rhs)?;
    for (r, &i) in free.iter().enumerate() {
        u[i] = sol[r];
    }
    Ok(u)
}

pub(crate) fn dense_solve(a: DMatrix<f64>, rhs: DVector<f64>) -> Result<DVector<f64>> {
    let norm = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let lu = a.lu();
    let sol = lu.solve(&rhs).ok_or(Error::InsufficientConstraints)?;
    let diag = lu.u().diagonal();
    let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v.abs()), hi.max(v.abs())));
    let rcond = if hi > 0.0 { lo / hi } else { 0.0 };
    if norm == 0.0 || rcond < 1e-15 {
        return Err(Error::InsufficientConstraints);
    }
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::IllConditioned { rcond });
    }
    Ok(sol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum End {
    Left,
    Right,
}

/// Net spring force on an end node, `sum_j k_0j (u_j - u_0)` (mirrored at `x_n`).
pub fn boundary_force(model: &LatticeModel, u: &[f64], end: End) -> f64 {
    let i = match end {
        End::Left => 0,
        End::Right => model.mesh.n(),
    };
    (0..u.len())
        .filter(|&j| j != i)
        .map(|j| model.springs[(i, j)] * (u[j] - u[i]))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::order_distributions::Kind;
    use approx::assert_relative_eq;

    fn mesh(n: usize) -> Mesh1D {
        Mesh1D::new(1.0, n).unwrap()
    }

    #[test]
    fn nearest_neighbour_spot_value() {
        let k = spring_stiffness_co(&mesh(100), 1.0, 0.5, 40, 41).unwrap();
        // 1.5 * 0.01^-0.5 / (2 sqrt(pi))
        assert_relative_eq!(k, 1.5 * 10.0 / (2.0 * std::f64::consts::PI.sqrt()), max_relative = 1e-12);
        assert!((k - 4.2314).abs() < 5e-5);
    }

    #[test]
    fn boundary_nearest_neighbour_closed_form() {
        let m = mesh(50);
        for a in [0.2, 0.5, 0.8] {
            let k = spring_stiffness_co(&m, 2.0, a, 0, 1).unwrap();
            let expect = 2.0 / statrs::function::gamma::gamma(1.0 - a) * a / (1.0 - a) * m.dx().powf(-a);
            assert_relative_eq!(k, expect, max_relative = 1e-12);
            assert_eq!(k, spring_stiffness_co(&m, 2.0, a, 50, 49).unwrap());
        }
    }

    #[test]
    fn errors() {
        let m = mesh(10);
        assert_eq!(spring_stiffness_co(&m, 1.0, 0.5, 3, 3), Err(Error::SelfSpring { i: 3, j: 3 }));
        assert_eq!(spring_stiffness_co(&m, 1.0, 1.0, 3, 4), Err(Error::OrderDomain(1.0)));
        assert!(spring_stiffness_co(&m, 1.0, 0.5, 3, 11).is_err());
    }

    #[test]
    fn endpoint_order_limits() {
        let m = mesh(6);
        let k0 = springs_co(&m, 1.0, 0.0).unwrap();
        let k1 = springs_co(&m, 1.0, 1.0).unwrap();
        for i in 0..7 {
            for j in 0..7 {
                let e0 = if (i, j) == (0, 6) || (i, j) == (6, 0) { 0.5 } else { 0.0 };
                assert_relative_eq!(k0[(i, j)], e0, epsilon = 1e-14);
                let e1 = if i.abs_diff(j) == 1 { 6.0 } else { 0.0 };
                assert_relative_eq!(k1[(i, j)], e1, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn local_limit_far_field_negligible() {
        let m = mesh(100);
        let d = OrderDistribution::new(Kind::Dirac { alpha: 0.999 }, 100).unwrap();
        let lm = assemble(&m, 1.0, &d).unwrap();
        let nn = lm.stiffness(50, 51);
        for j in [0, 10, 48, 52, 90, 100] {
            assert!(lm.stiffness(50, j) < 1e-3 * nn);
        }
    }

    #[test]
    fn zero_load_zero_displacement() {
        let m = mesh(10);
        let d = OrderDistribution::new(Kind::Uniform, 10).unwrap();
        let lm = assemble(&m, 1.0, &d).unwrap();
        let u = solve_static(&lm, &BoundaryCondition::dbc(0.0), &BodyLoad::zero()).unwrap();
        assert!(u.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn traction_equilibrium_at_loaded_end() {
        let m = mesh(30);
        let d = OrderDistribution::new(Kind::Linear, 20).unwrap();
        let lm = assemble(&m, 1.0, &d).unwrap();
        let u = solve_static(&lm, &BoundaryCondition::tbc(10.0), &BodyLoad::zero()).unwrap();
        assert_relative_eq!(boundary_force(&lm, &u, End::Right), -10.0, max_relative = 1e-9);
    }

    #[test]
    fn tabulated_load_interpolates() {
        let l = BodyLoad::Tabulated { points: vec![(0.0, 1.0), (0.5, 3.0), (1.0, 0.0)] };
        assert_eq!(l.at(-1.0), 1.0);
        assert_eq!(l.at(0.25), 2.0);
        assert_eq!(l.at(0.75), 1.5);
        assert_eq!(l.at(2.0), 0.0);
    }
}
