//! Strength functions over the order interval [0, 1] and the trapezoidal
//! order quadrature.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use statrs::function::{beta::beta, erf::erf};

use crate::error::{Error, Result};

const MOMENT_GRID: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Kind {
    Uniform,
    Linear,
    Beta { a: f64, b: f64 },
    TruncNormal { loc: f64, scale: f64 },
    Dirac { alpha: f64 },
}

impl Kind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Kind::Beta { a, b } if !(a > 0.0 && b > 0.0) => {
                Err(Error::Invalid(format!("beta shape parameters must be positive, got a={a} b={b}")))
            }
            Kind::TruncNormal { scale, loc } if !(scale > 0.0) || !loc.is_finite() => {
                Err(Error::Invalid(format!("truncnormal needs finite loc and scale > 0, got loc={loc} scale={scale}")))
            }
            Kind::Dirac { alpha } if !(0.0..=1.0).contains(&alpha) => Err(Error::OrderDomain(alpha)),
            _ => Ok(()),
        }
    }

    /// Checked pointwise strength `kappa(alpha)`.
    pub fn pdf(&self, alpha: f64) -> Result<f64> {
        self.validate()?;
        if let Kind::Dirac { .. } = self {
            return Err(Error::NoPointwiseDensity);
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::OrderDomain(alpha));
        }
        Ok(self.density(alpha))
    }

    fn density(&self, alpha: f64) -> f64 {
        match *self {
            Kind::Uniform => 1.0,
            Kind::Linear => 2.0 * alpha,
            Kind::Beta { a, b } => {
                let num = pow0(alpha, a - 1.0) * pow0(1.0 - alpha, b - 1.0);
                num / beta(a, b)
            }
            Kind::TruncNormal { loc, scale } => {
                let z = (alpha - loc) / scale;
                let mass = phi_cdf((1.0 - loc) / scale) - phi_cdf(-loc / scale);
                (-0.5 * z * z).exp() / ((2.0 * std::f64::consts::PI).sqrt() * scale * mass)
            }
            Kind::Dirac { .. } => f64::NAN,
        }
    }
}

fn pow0(x: f64, p: f64) -> f64 {
    if p == 0.0 {
        1.0
    } else {
        x.powf(p)
    }
}

fn phi_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kind::Uniform => write!(f, "uniform"),
            Kind::Linear => write!(f, "linear"),
            Kind::Beta { a, b } => write!(f, "beta a={a} b={b}"),
            Kind::TruncNormal { loc, scale } => write!(f, "truncnormal loc={loc} scale={scale}"),
            Kind::Dirac { alpha } => write!(f, "dirac alpha={alpha}"),
        }
    }
}

impl FromStr for Kind {
    type Err = Error;

    /// Parses `uniform`, `linear`, `beta a=2 b=5`, `truncnormal loc=0.9 scale=0.15`
    /// or `dirac alpha=0.7`.
    fn from_str(s: &str) -> Result<Self> {
        let mut words = s.split_whitespace();
        let name = words
            .next()
            .ok_or_else(|| Error::Invalid("empty distribution spec".into()))?
            .to_ascii_lowercase();
        let mut params = Vec::new();
        for w in words {
            let (k, v) = w
                .split_once('=')
                .ok_or_else(|| Error::Invalid(format!("expected key=value, got `{w}`")))?;
            let v: f64 = v
                .parse()
                .map_err(|_| Error::Invalid(format!("`{v}` is not a number")))?;
            params.push((k.to_ascii_lowercase(), v));
        }
        let get = |key: &str| -> Result<f64> {
            params
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| *v)
                .ok_or_else(|| Error::Invalid(format!("`{name}` needs parameter `{key}`")))
        };
        let allowed: &[&str] = match name.as_str() {
            "uniform" | "linear" => &[],
            "beta" => &["a", "b"],
            "truncnormal" | "truncnorm" => &["loc", "scale"],
            "dirac" => &["alpha"],
            _ => return Err(Error::Invalid(format!("unknown distribution `{name}`"))),
        };
        if let Some((k, _)) = params.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
            return Err(Error::Invalid(format!("`{name}` does not take parameter `{k}`")));
        }
        let kind = match name.as_str() {
            "uniform" => Kind::Uniform,
            "linear" => Kind::Linear,
            "beta" => Kind::Beta { a: get("a")?, b: get("b")? },
            "dirac" => Kind::Dirac { alpha: get("alpha")? },
            _ => Kind::TruncNormal { loc: get("loc")?, scale: get("scale")? },
        };
        kind.validate()?;
        Ok(kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    pub mean: f64,
    pub median: f64,
    /// `None` when the density has no unique maximum (uniform).
    pub mode: Option<f64>,
    pub std: f64,
}

/// A normalized strength function with its trapezoidal order grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderDistribution {
    kind: Kind,
    n_alpha: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl OrderDistribution {
    pub fn new(kind: Kind, n_alpha: usize) -> Result<Self> {
        kind.validate()?;
        if n_alpha == 0 {
            return Err(Error::Invalid("n_alpha must be at least 1".into()));
        }
        let nodes = (0..=n_alpha).map(|r| r as f64 / n_alpha as f64).collect();
        let weights = (0..=n_alpha)
            .map(|r| if r == 0 || r == n_alpha { 0.5 } else { 1.0 })
            .collect();
        Ok(Self { kind, n_alpha, nodes, weights })
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn n_alpha(&self) -> usize {
        self.n_alpha
    }

    pub fn d_alpha(&self) -> f64 {
        1.0 / self.n_alpha as f64
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_dirac(&self) -> bool {
        matches!(self.kind, Kind::Dirac { .. })
    }

    pub fn evaluate(&self, alpha: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::OrderDomain(alpha));
        }
        if self.is_dirac() {
            return Err(Error::NoPointwiseDensity);
        }
        Ok(self.kind.density(alpha))
    }

    /// Pairs `(alpha_r, w_r kappa(alpha_r) d_alpha)`; a single `(alpha0, 1)`
    /// for the delta. Nodes with zero weight are dropped.
    pub fn terms(&self) -> Result<Vec<(f64, f64)>> {
        if let Kind::Dirac { alpha } = self.kind {
            return Ok(vec![(alpha, 1.0)]);
        }
        let da = self.d_alpha();
        let mut out = Vec::with_capacity(self.nodes.len());
        for (&a, &w) in self.nodes.iter().zip(&self.weights) {
            let c = w * self.kind.density(a) * da;
            if !c.is_finite() {
                return Err(Error::SingularIntegrand { alpha: a });
            }
            if c != 0.0 {
                out.push((a, c));
            }
        }
        Ok(out)
    }

    pub fn distributed_quadrature<F>(&self, f: F) -> Result<f64>
    where
        F: Fn(f64) -> f64,
    {
        let mut acc = 0.0;
        for (a, w) in self.terms()? {
            let v = f(a);
            if !v.is_finite() {
                return Err(Error::SingularIntegrand { alpha: a });
            }
            acc += w * v;
        }
        Ok(acc)
    }

    pub fn moments(&self) -> Moments {
        if let Kind::Dirac { alpha } = self.kind {
            return Moments { mean: alpha, median: alpha, mode: Some(alpha), std: 0.0 };
        }
        let m = MOMENT_GRID;
        let h = 1.0 / m as f64;
        let xs: Vec<f64> = (0..=m).map(|k| k as f64 * h).collect();
        let pdf: Vec<f64> = xs.iter().map(|&x| self.kind.density(x)).collect();
        let trap = |g: &dyn Fn(usize) -> f64| -> f64 {
            (0..m).map(|k| 0.5 * h * (g(k) + g(k + 1))).sum()
        };
        let mass = trap(&|k| pdf[k]);
        let mean = trap(&|k| xs[k] * pdf[k]) / mass;
        let var = trap(&|k| (xs[k] - mean).powi(2) * pdf[k]) / mass;

        let mut cum = 0.0;
        let mut median = 0.5;
        for k in 0..m {
            let step = 0.5 * h * (pdf[k] + pdf[k + 1]) / mass;
            if cum + step >= 0.5 {
                // the density is locally linear, so solve the quadratic for the crossing
                let (p0, p1) = (pdf[k] / mass, pdf[k + 1] / mass);
                let slope = (p1 - p0) / h;
                let need = 0.5 - cum;
                let t = if slope.abs() < 1e-12 {
                    need / p0
                } else {
                    (-p0 + (p0 * p0 + 2.0 * slope * need).sqrt()) / slope
                };
                median = xs[k] + t;
                break;
            }
            cum += step;
        }

        let (mut kmax, mut pmax) = (0, f64::NEG_INFINITY);
        for (k, &p) in pdf.iter().enumerate() {
            if p > pmax {
                kmax = k;
                pmax = p;
            }
        }
        let flat = pdf.iter().all(|&p| (p - pmax).abs() <= 1e-12 * pmax.abs());
        let mode = if flat { None } else { Some(xs[kmax]) };
        Moments { mean, median, mode, std: var.sqrt() }
    }
}

impl fmt::Display for OrderDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.kind.fmt(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn dist(s: &str) -> OrderDistribution {
        OrderDistribution::new(s.parse().unwrap(), 100).unwrap()
    }

    #[test]
    fn uniform_density_is_one() {
        assert_eq!(dist("uniform").evaluate(0.3).unwrap(), 1.0);
    }

    #[test]
    fn dirac_has_no_density() {
        assert_eq!(dist("dirac alpha=0.7").evaluate(0.3), Err(Error::NoPointwiseDensity));
    }

    #[test]
    fn dirac_sifts() {
        let d = dist("dirac alpha=0.7");
        let v = d.distributed_quadrature(|a| a * a + 1.0).unwrap();
        assert_eq!(v, 0.7 * 0.7 + 1.0);
        let m = d.moments();
        assert_eq!((m.mean, m.median, m.mode, m.std), (0.7, 0.7, Some(0.7), 0.0));
    }

    #[test]
    fn weights_sum_to_interval() {
        let d = dist("linear");
        let s: f64 = d.weights().iter().sum::<f64>() * d.d_alpha();
        assert_abs_diff_eq!(s, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn normalization_improves_with_n_alpha() {
        for spec in ["uniform", "linear", "beta a=2 b=5", "truncnormal loc=0.9 scale=0.15", "truncnormal loc=0.7 scale=0.25"] {
            let mut prev = f64::INFINITY;
            for na in [50, 100, 200] {
                let d = OrderDistribution::new(spec.parse().unwrap(), na).unwrap();
                let err = (d.distributed_quadrature(|_| 1.0).unwrap() - 1.0).abs();
                assert!(err < 1e-3, "{spec} n_alpha={na} err={err}");
                assert!(err <= prev + 1e-14, "{spec} not decreasing");
                prev = err;
            }
        }
    }

    #[test]
    fn singular_integrand_names_node() {
        let d = dist("uniform");
        let e = d.distributed_quadrature(|a| if a == 0.0 { f64::INFINITY } else { 1.0 });
        assert_eq!(e, Err(Error::SingularIntegrand { alpha: 0.0 }));
    }

    #[test]
    fn spec_round_trips() {
        for s in ["uniform", "linear", "beta a=2 b=5", "truncnormal loc=0.9 scale=0.15", "dirac alpha=0.7"] {
            let k: Kind = s.parse().unwrap();
            assert_eq!(k.to_string(), s);
        }
    }

    #[test]
    fn bad_specs_rejected() {
        assert!("gamma k=2".parse::<Kind>().is_err());
        assert!("beta a=2".parse::<Kind>().is_err());
        assert!("beta a=2 b=-1".parse::<Kind>().is_err());
        assert!("dirac alpha=1.5".parse::<Kind>().is_err());
        assert!("uniform x=1".parse::<Kind>().is_err());
    }
}
