//! Constant-order fractional operators on a uniform 1D mesh.
//!
//! Two discrete families live here. The L1 (Caputo) stencils integrate the
//! power-law kernel exactly against the piecewise-linear interpolant. The
//! relative-displacement (Marchaud) stencils use the rectangle rule with
//! exact near-field cells; their divergence rows carry the lattice spring
//! coefficients.
//!
//! Builders with a `_rows` suffix accept the closed interval `[0, 1]` and
//! use the analytic limits at the ends; the public `_stencil` wrappers
//! enforce `0 < alpha < 1`.

use nalgebra::{DMatrix, DVector};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mesh1D {
    l: f64,
    n: usize,
}

impl Mesh1D {
    pub fn new(l: f64, n: usize) -> Result<Self> {
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::Invalid(format!("length must be positive, got {l}")));
        }
        if n < 2 {
            return Err(Error::Invalid(format!("mesh needs at least 2 intervals, got {n}")));
        }
        Ok(Self { l, n })
    }

    pub fn length(&self) -> f64 {
        self.l
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nodes(&self) -> usize {
        self.n + 1
    }

    pub fn dx(&self) -> f64 {
        self.l / self.n as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i == self.n {
            self.l
        } else {
            i as f64 * self.dx()
        }
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..=self.n).map(|i| self.x(i)).collect()
    }

    fn check_node(&self, i: usize) -> Result<()> {
        if i > self.n {
            Err(Error::NodeRange { node: i, n: self.n })
        } else {
            Ok(())
        }
    }
}

/// `1 / Gamma(x)`, zero at the poles `x = 0, -1, ...`.
pub fn rgamma(x: f64) -> f64 {
    if x <= 0.0 && x == x.round() {
        0.0
    } else {
        1.0 / gamma(x)
    }
}

/// `t^p` for `t >= 0`, with `0^p = 0` for every `p >= 0` (the limit from
/// above used by the closed-form cell integrals).
pub fn pw(t: f64, p: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        t.powf(p)
    }
}

pub(crate) fn check_open(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::OrderDomain(alpha))
    }
}

pub(crate) fn check_closed(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::OrderDomain(alpha))
    }
}

/// Row-stencil `c_ij` of a linear operator on nodal values.
#[derive(Debug, Clone, PartialEq)]
pub struct FracStencil {
    pub alpha: f64,
    pub c: DMatrix<f64>,
}

impl FracStencil {
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        (&self.c * DVector::from_column_slice(u)).as_slice().to_vec()
    }

    pub fn apply_at(&self, u: &[f64], i: usize) -> f64 {
        self.c.row(i).iter().zip(u).map(|(c, v)| c * v).sum()
    }
}

fn l1_weight(k: usize, alpha: f64) -> f64 {
    pw((k + 1) as f64, 1.0 - alpha) - pw(k as f64, 1.0 - alpha)
}

/// L1 left Caputo derivative on all rows (`alpha` in `[0, 1]`).
pub fn caputo_left_rows(mesh: &Mesh1D, alpha: f64) -> DMatrix<f64> {
    let n = mesh.n();
    let scale = mesh.dx().powf(-alpha) * rgamma(2.0 - alpha);
    let b: Vec<f64> = (0..n).map(|k| scale * l1_weight(k, alpha)).collect();
    let mut c = DMatrix::zeros(n + 1, n + 1);
    for i in 1..=n {
        for j in 0..i {
            let w = b[i - j - 1];
            c[(i, j + 1)] += w;
            c[(i, j)] -= w;
        }
    }
    c
}

/// L1 right Caputo derivative with the standard sign
/// `-(1/Gamma(1-a)) int_x^L u'(s) (s-x)^(-a) ds`.
pub fn caputo_right_rows(mesh: &Mesh1D, alpha: f64) -> DMatrix<f64> {
    let n = mesh.n();
    let scale = mesh.dx().powf(-alpha) * rgamma(2.0 - alpha);
    let b: Vec<f64> = (0..n).map(|k| scale * l1_weight(k, alpha)).collect();
    let mut c = DMatrix::zeros(n + 1, n + 1);
    for i in 0..n {
        for j in i..n {
            let w = b[j - i];
            c[(i, j + 1)] -= w;
            c[(i, j)] += w;
        }
    }
    c
}

pub fn caputo_left_stencil(mesh: &Mesh1D, alpha: f64) -> Result<FracStencil> {
    check_open(alpha)?;
    Ok(FracStencil { alpha, c: caputo_left_rows(mesh, alpha) })
}

pub fn caputo_right_stencil(mesh: &Mesh1D, alpha: f64) -> Result<FracStencil> {
    check_open(alpha)?;
    Ok(FracStencil { alpha, c: caputo_right_rows(mesh, alpha) })
}

pub fn caputo_left(mesh: &Mesh1D, alpha: f64, u: &[f64], i: usize) -> Result<f64> {
    check_open(alpha)?;
    mesh.check_node(i)?;
    check_len(mesh, u)?;
    let scale = mesh.dx().powf(-alpha) * rgamma(2.0 - alpha);
    Ok((0..i)
        .map(|j| (u[j + 1] - u[j]) * scale * l1_weight(i - j - 1, alpha))
        .sum())
}

pub fn caputo_right(mesh: &Mesh1D, alpha: f64, u: &[f64], i: usize) -> Result<f64> {
    check_open(alpha)?;
    mesh.check_node(i)?;
    check_len(mesh, u)?;
    let scale = mesh.dx().powf(-alpha) * rgamma(2.0 - alpha);
    Ok(-(i..mesh.n())
        .map(|j| (u[j + 1] - u[j]) * scale * l1_weight(j - i, alpha))
        .sum::<f64>())
}

fn check_len(mesh: &Mesh1D, u: &[f64]) -> Result<()> {
    if u.len() != mesh.nodes() {
        return Err(Error::Invalid(format!(
            "field has {} values, mesh has {} nodes",
            u.len(),
            mesh.nodes()
        )));
    }
    Ok(())
}

/// `1/2 (left - right)` with the L1 Caputo stencils.
pub fn riesz_l1_rows(mesh: &Mesh1D, alpha: f64) -> DMatrix<f64> {
    (caputo_left_rows(mesh, alpha) - caputo_right_rows(mesh, alpha)) * 0.5
}

pub fn riesz_stress_stencil(mesh: &Mesh1D, alpha: f64) -> Result<FracStencil> {
    check_open(alpha)?;
    Ok(FracStencil { alpha, c: riesz_l1_rows(mesh, alpha) })
}

/// Riesz stress/E in relative-displacement form:
/// `1/(2 Gamma(1-a)) [ -x^-a (u_0-u_i) + (L-x)^-a (u_n-u_i)
///   - a sum_{j<=i-2} D (x_i-x_j)^-(1+a) (u_j-u_i)
///   + a sum_{j>=i+2} D (x_j-x_i)^-(1+a) (u_j-u_i) ]`
/// plus exact near-field cells `a D^-a / (1-a) (u_{i+-1} - u_i)`.
pub fn marchaud_stress_rows(mesh: &Mesh1D, alpha: f64) -> DMatrix<f64> {
    let n = mesh.n();
    let d = mesh.dx();
    let l = mesh.length();
    let pre = 0.5 * rgamma(1.0 - alpha);
    let near = 0.5 * alpha * d.powf(-alpha) * rgamma(2.0 - alpha);
    let mut c = DMatrix::zeros(n + 1, n + 1);
    let add = |c: &mut DMatrix<f64>, i: usize, j: usize, v: f64| {
        c[(i, j)] += v;
        c[(i, i)] -= v;
    };
    for i in 0..=n {
        let xi = mesh.x(i);
        if i > 0 {
            add(&mut c, i, 0, -pre * xi.powf(-alpha));
            for j in 0..i.saturating_sub(1) {
                add(&mut c, i, j, -pre * alpha * d * (xi - mesh.x(j)).powf(-(1.0 + alpha)));
            }
            add(&mut c, i, i - 1, -near);
        }
        if i < n {
            add(&mut c, i, n, pre * (l - xi).powf(-alpha));
            for j in i + 2..=n {
                add(&mut c, i, j, pre * alpha * d * (mesh.x(j) - xi).powf(-(1.0 + alpha)));
            }
            add(&mut c, i, i + 1, near);
        }
    }
    c
}

pub fn marchaud_stress_stencil(mesh: &Mesh1D, alpha: f64) -> Result<FracStencil> {
    check_open(alpha)?;
    Ok(FracStencil { alpha, c: marchaud_stress_rows(mesh, alpha) })
}

/// Divergence of the relative-displacement stress on interior rows
/// (rows 0 and n are zero). Row `i` equals lattice row `i` divided by `EA D`.
pub fn marchaud_divergence_rows(mesh: &Mesh1D, alpha: f64) -> DMatrix<f64> {
    let n = mesh.n();
    let d = mesh.dx();
    let l = mesh.length();
    let pre = 0.5 * rgamma(1.0 - alpha);
    let near = 0.5 * alpha * (1.0 + alpha) * d.powf(-(1.0 + alpha)) * rgamma(2.0 - alpha);
    let mut c = DMatrix::zeros(n + 1, n + 1);
    for i in 1..n {
        let xi = mesh.x(i);
        let mut coef = vec![0.0; n + 1];
        coef[0] += pre * alpha * xi.powf(-(1.0 + alpha));
        coef[n] += pre * alpha * (l - xi).powf(-(1.0 + alpha));
        for (j, cj) in coef.iter_mut().enumerate() {
            if j + 1 < i || j > i + 1 {
                let r = (xi - mesh.x(j)).abs();
                *cj += pre * alpha * (1.0 + alpha) * d * r.powf(-(2.0 + alpha));
            }
        }
        coef[i - 1] += near;
        coef[i + 1] += near;
        for (j, &cj) in coef.iter().enumerate() {
            if j != i {
                c[(i, j)] += cj;
                c[(i, i)] -= cj;
            }
        }
    }
    c
}

/// Traction row at `x = L`, scaled by `1/EA`:
/// `1/2 C_L u(L) + 1/2 ghost - D/2 d/dx C_L u(L)`,
/// where the ghost is one virtual cell beyond `L` carrying the last cell's
/// strain and the derivative is one-sided second order.
pub fn traction_row(mesh: &Mesh1D, alpha: f64) -> DVector<f64> {
    let n = mesh.n();
    let d = mesh.dx();
    let scale = d.powf(-alpha) * rgamma(2.0 - alpha);
    let left_row = |i: usize| -> DVector<f64> {
        let mut r = DVector::zeros(n + 1);
        for j in 0..i {
            let w = scale * l1_weight(i - j - 1, alpha);
            r[j + 1] += w;
            r[j] -= w;
        }
        r
    };
    let (cn, cn1, cn2) = (left_row(n), left_row(n - 1), left_row(n - 2));
    let mut r = &cn * 0.5;
    r[n] += 0.5 * scale;
    r[n - 1] -= 0.5 * scale;
    r -= (&cn * 3.0 - &cn1 * 4.0 + &cn2) * 0.25;
    r
}

/// Second-order finite-difference gradient (central inside, one-sided
/// second order at the ends).
pub fn gradient(u: &[f64], d: f64) -> Vec<f64> {
    let n = u.len() - 1;
    (0..=n)
        .map(|i| {
            if i == 0 {
                (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * d)
            } else if i == n {
                (3.0 * u[n] - 4.0 * u[n - 1] + u[n - 2]) / (2.0 * d)
            } else {
                (u[i + 1] - u[i - 1]) / (2.0 * d)
            }
        })
        .collect()
}
