//! Layered 2D lattice with power-law axial interactions, one order per layer.
//!
//! Every column carries a single axial displacement (rigid transverse
//! links), so the lattice acts on a 1D field sampled at `x_p = p dx`. Summing
//! the layer forces approximates the distributed-order operator
//! `k0 int kappa(a) int (u(x) - u(x')) |x - x'|^-(2+a) dx' da`.

use gauss_quad::GaussLegendre;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::order_distributions::Kind;

#[derive(Debug, Clone)]
pub struct LayeredLattice {
    /// `(alpha_r, F0_r)` per layer.
    pub layers: Vec<(f64, f64)>,
    pub dx: f64,
    pub k0: f64,
    /// Half-width of the interaction window in length units.
    pub window: f64,
    pub kappa: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatticeSpec {
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub k0: f64,
    pub window: f64,
}

impl Default for LatticeSpec {
    fn default() -> Self {
        Self { alpha_min: 0.2, alpha_max: 0.8, k0: 1.0, window: 8.0 }
    }
}

impl LatticeSpec {
    fn validate(&self) -> Result<()> {
        if !(0.0 < self.alpha_min && self.alpha_min < self.alpha_max && self.alpha_max < 1.0) {
            return Err(Error::Invalid(format!(
                "order bounds must satisfy 0 < min < max < 1, got [{}, {}]",
                self.alpha_min, self.alpha_max
            )));
        }
        if !(self.k0 > 0.0 && self.window > 0.0) {
            return Err(Error::Invalid("k0 and window must be positive".into()));
        }
        Ok(())
    }
}

impl LayeredLattice {
    /// `n_r + 1` layers at the midpoints of equal order bins.
    pub fn new(kind: Kind, spec: LatticeSpec, n_r: usize, dx: f64) -> Result<Self> {
        spec.validate()?;
        kind.validate()?;
        if !(dx > 0.0 && dx < spec.window) {
            return Err(Error::Invalid(format!("spacing {dx} must lie in (0, window)")));
        }
        let da = (spec.alpha_max - spec.alpha_min) / (n_r + 1) as f64;
        let mut layers = Vec::with_capacity(n_r + 1);
        let mut kappa = Vec::with_capacity(n_r + 1);
        for r in 0..=n_r {
            let a = spec.alpha_min + (r as f64 + 0.5) * da;
            let k = kind.pdf(a)?;
            layers.push((a, spec.k0 * dx * k * da));
            kappa.push(k);
        }
        Ok(Self { layers, dx, k0: spec.k0, window: spec.window, kappa })
    }

    pub fn position(&self, p: i64) -> f64 {
        p as f64 * self.dx
    }

    /// Neighbours on each side inside the window.
    pub fn reach(&self) -> i64 {
        (self.window / self.dx * (1.0 + 1e-12)).floor() as i64
    }

    /// Force on `p` from `q` in layer `r`: `F0 (u_p - u_q) / |x_p - x_q|^(2 + a)`.
    pub fn pair_force<U: Fn(f64) -> f64>(&self, r: usize, p: i64, q: i64, u: &U) -> Result<f64> {
        let (a, f0) = *self
            .layers
            .get(r)
            .ok_or_else(|| Error::Invalid(format!("layer {r} out of range")))?;
        let (xp, xq) = (self.position(p), self.position(q));
        if p == q {
            return Err(Error::Coincident(xp));
        }
        Ok(f0 * (u(xp) - u(xq)) / (xp - xq).abs().powf(2.0 + a))
    }

    pub fn homogenized_force<U: Fn(f64) -> f64>(&self, p: i64, u: &U) -> f64 {
        let m = self.reach();
        let up = u(self.position(p));
        let mut tot = 0.0;
        for k in 1..=m {
            let t = k as f64 * self.dx;
            let g = 2.0 * up - u(self.position(p + k)) - u(self.position(p - k));
            tot += self.layers.iter().map(|&(a, f0)| f0 * t.powf(-2.0 - a)).sum::<f64>() * g;
        }
        tot
    }

    /// Upper bound on the force dropped by truncating the window, for a
    /// field bounded by `u_max` in magnitude.
    pub fn truncation_bound(&self, u_max: f64) -> f64 {
        let w = self.window;
        self.layers
            .iter()
            .map(|&(a, f0)| f0 / self.dx * 4.0 * u_max * w.powf(-(1.0 + a)) / (1.0 + a))
            .sum()
    }
}

/// Continuum operator at `x` over the same window, by Gauss-Legendre in
/// order and in `s = t^(1 - a)`, where `t^-(2+a) dt = t^-2 ds / (1 - a)`.
pub fn continuum_force<U: Fn(f64) -> f64>(kind: Kind, spec: LatticeSpec, x: f64, u: &U) -> Result<f64> {
    spec.validate()?;
    kind.validate()?;
    let gl = GaussLegendre::new(20).map_err(|e| Error::Invalid(e.to_string()))?;
    let ux = u(x);
    let g = |t: f64| 2.0 * ux - u(x + t) - u(x - t);
    let inner = |a: f64| -> f64 {
        let e = 1.0 - a;
        let smax = spec.window.powf(e);
        let panels = 400;
        let h = smax / panels as f64;
        (0..panels)
            .map(|k| {
                gl.integrate(k as f64 * h, (k + 1) as f64 * h, |s| {
                    let t = s.powf(1.0 / e).max(1e-4);
                    g(t) / (t * t)
                })
            })
            .sum::<f64>()
            / e
    };
    let na = 8;
    let h = (spec.alpha_max - spec.alpha_min) / na as f64;
    let mut tot = 0.0;
    for k in 0..na {
        let lo = spec.alpha_min + k as f64 * h;
        let mut err = None;
        tot += gl.integrate(lo, lo + h, |a| match kind.pdf(a) {
            Ok(kap) => kap * inner(a),
            Err(e) => {
                err = Some(e);
                0.0
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
    }
    Ok(spec.k0 * tot)
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub dx: f64,
    pub n_layers: usize,
    pub lattice: f64,
    pub continuum: f64,
    pub rel_error: f64,
}

/// Joint halving of `dx` and the order bin width, starting from
/// `dx0` with `n_r0 + 1` layers, probing the force at `x`.
pub fn convergence_study<U: Fn(f64) -> f64>(
    kind: Kind,
    spec: LatticeSpec,
    dx0: f64,
    n_r0: usize,
    levels: usize,
    x: f64,
    u: &U,
) -> Result<Vec<ConvergenceRow>> {
    let continuum = continuum_force(kind, spec, x, u)?;
    let mut rows = Vec::with_capacity(levels);
    let (mut dx, mut n_r) = (dx0, n_r0);
    for _ in 0..levels {
        let lat = LayeredLattice::new(kind, spec, n_r, dx)?;
        let p = (x / dx).round() as i64;
        if (lat.position(p) - x).abs() > 1e-9 * dx.max(1.0) {
            return Err(Error::Invalid(format!("x = {x} is not a lattice site for dx = {dx}")));
        }
        let lattice = lat.homogenized_force(p, u);
        let rel_error = if continuum == 0.0 { (lattice - continuum).abs() } else { ((lattice - continuum) / continuum).abs() };
        rows.push(ConvergenceRow { dx, n_layers: n_r + 1, lattice, continuum, rel_error });
        dx *= 0.5;
        n_r = 2 * n_r + 1;
    }
    Ok(rows)
}
