#![allow(dead_code)]

use std::f64::consts::PI;

use do_nonlocal::cli::{self, RunConfig, RunResult};
use do_nonlocal::mslm::{BodyLoad, BoundaryCondition, RightEnd};
use do_nonlocal::order_distributions::Kind;
use statrs::function::erf::erf;
use statrs::function::gamma::gamma;

/// Full run through the production path at desk scale.
pub fn run_case(preset: cli::Preset, kind: Kind, bc: BoundaryCondition) -> RunResult {
    let mut cfg = RunConfig::for_preset(preset);
    cfg.dist = Some(kind);
    cfg.bc = Some(bc);
    let label = format!("{preset} {kind} {bc:?}");
    cli::solve_case(&cfg, &label, kind, bc).expect("run succeeds")
}

pub fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

// Brute-force reference: everything below is written out longhand without
// the library's helpers.

/// Strength function written out directly.
pub fn bf_kappa(kind: Kind, a: f64) -> f64 {
    match kind {
        Kind::Uniform => 1.0,
        Kind::Linear => 2.0 * a,
        Kind::Beta { a: p, b: q } => {
            let b = gamma(p) * gamma(q) / gamma(p + q);
            a.powf(p - 1.0) * (1.0 - a).powf(q - 1.0) / b
        }
        Kind::TruncNormal { loc, scale } => {
            let cdf = |z: f64| 0.5 * (1.0 + erf(z / 2f64.sqrt()));
            let z = (a - loc) / scale;
            let mass = cdf((1.0 - loc) / scale) - cdf(-loc / scale);
            (-0.5 * z * z).exp() / ((2.0 * PI).sqrt() * scale * mass)
        }
        Kind::Dirac { .. } => unreachable!(),
    }
}

/// Constant-order spring between nodes `p < q`, endpoint orders by their
/// limits.
pub fn bf_spring(n: usize, l: f64, ea: f64, a: f64, p: usize, q: usize) -> f64 {
    let d = l / n as f64;
    let touches = p == 0 || q == n;
    if a == 0.0 {
        return if p == 0 && q == n { 0.5 * ea } else { 0.0 };
    }
    if a == 1.0 {
        return if q == p + 1 { ea / d } else { 0.0 };
    }
    let g1 = 1.0 / gamma(1.0 - a);
    let g2 = 1.0 / gamma(2.0 - a);
    if p == 0 && q == n {
        let tail = l.powf(-a) + a * d * l.powf(-1.0 - a) + a * (1.0 + a) * d * d * l.powf(-2.0 - a);
        return 0.5 * ea * g1 * tail;
    }
    if q == p + 1 {
        let c = if touches { 1.0 } else { 0.5 * (1.0 + a) };
        return c * ea * a * g2 * d.powf(-a);
    }
    let r = (q - p) as f64 * d;
    let mut k = a * (1.0 + a) * d * r.powf(-2.0 - a);
    if touches {
        k += a * r.powf(-1.0 - a);
    }
    0.5 * ea * d * g1 * k
}

/// Double loop over order nodes and node pairs.
pub fn bf_springs(n: usize, l: f64, ea: f64, kind: Kind, n_alpha: usize) -> Vec<Vec<f64>> {
    let mut k = vec![vec![0.0; n + 1]; n + 1];
    let orders: Vec<(f64, f64)> = match kind {
        Kind::Dirac { alpha } => vec![(alpha, 1.0)],
        _ => (0..=n_alpha)
            .map(|r| {
                let a = r as f64 / n_alpha as f64;
                let end = r == 0 || r == n_alpha;
                let w = if end { 0.5 } else { 1.0 } / n_alpha as f64;
                (a, w * bf_kappa(kind, a))
            })
            .collect(),
    };
    for &(a, w) in &orders {
        if w == 0.0 {
            continue;
        }
        for p in 0..=n {
            for q in p + 1..=n {
                let v = w * bf_spring(n, l, ea, a, p, q);
                k[p][q] += v;
                k[q][p] += v;
            }
        }
    }
    k
}

/// Gauss-Seidel relaxation of `sum_j k_ij (u_j - u_i) + f_i = 0`.
pub fn bf_relax(k: &[Vec<f64>], l: f64, load: f64, bc: BoundaryCondition) -> Vec<f64> {
    let n = k.len() - 1;
    let d = l / n as f64;
    let mut f: Vec<f64> = (0..=n).map(|i| if i == n { 0.5 } else { 1.0 } * load * d).collect();
    let mut u = vec![0.0; n + 1];
    let last = match bc.right {
        RightEnd::Dbc(v) => {
            u[n] = v;
            n - 1
        }
        RightEnd::Tbc(t) => {
            f[n] += t;
            n
        }
    };
    for _ in 0..200_000 {
        let mut change = 0.0f64;
        for i in 1..=last {
            let (mut num, mut den) = (f[i], 0.0);
            for j in 0..=n {
                if j != i {
                    num += k[i][j] * u[j];
                    den += k[i][j];
                }
            }
            let v = num / den;
            change = change.max((v - u[i]).abs());
            u[i] = v;
        }
        if change < 1e-16 {
            break;
        }
    }
    u
}

pub fn constant_load(f: f64) -> BodyLoad {
    BodyLoad::Constant { f }
}
