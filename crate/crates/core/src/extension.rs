//! Extension to the upper half-space: Poisson kernel, extension of grid or
//! analytic functions, the Dirichlet eigenpair of a ball, the decaying
//! profile `f` of `f'' + (1-2s)/y f' = lambda1 f` and the parabolic barrier.

use std::sync::Arc;

use rayon::prelude::*;
use statrs::function::beta::{beta, beta_reg};

use crate::geometry::{Aabb, Grid, Point};
use crate::linalg::{bicgstab, Csr};
use crate::quadrature::{self, Tolerance};
use crate::special::{gamma, scaled_macdonald, unit_ball_volume, unit_sphere_area};
use crate::{Error, Result};

fn check_order(s: f64) -> Result<()> {
    if s > 0.0 && s < 1.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange { name: "s", value: s, expected: "0 < s < 1" })
    }
}

/// `d_s = 2^{1-2s} Gamma(1-s) / Gamma(s)`.
pub fn d_s(s: f64) -> f64 {
    2f64.powf(1.0 - 2.0 * s) * gamma(1.0 - s) / gamma(s)
}

/// `p_{N,s}` from `int G(x, 1) dx = 1`, by quadrature.
pub fn poisson_normalisation(n: usize, s: f64) -> Result<f64> {
    check_order(s)?;
    let nn = match n {
        1 | 2 => n as f64,
        _ => return Err(Error::OutOfRange { name: "N", value: n as f64, expected: "1 or 2" }),
    };
    let e = (nn + 2.0 * s) / 2.0;
    let tol = Tolerance::new(1e-15, 1e-13);
    // radial mass on [0, 1]; the tail r > 1 becomes smooth under r = w^{-1/(2s)}
    let head = quadrature::integrate(|r| r.powf(nn - 1.0) * (1.0 + r * r).powf(-e), 0.0, 1.0, tol)?;
    let tail = quadrature::integrate(|w| (1.0 + w.powf(1.0 / s)).powf(-e), 0.0, 1.0, tol)? / (2.0 * s);
    let mass = unit_sphere_area(n) * (head + tail);
    Ok(1.0 / mass)
}

/// `G(x, y) = p y^{2s} (|x|^2 + y^2)^{-(N+2s)/2}` with cached `p`.
#[derive(Clone, Copy, Debug)]
pub struct PoissonKernel {
    pub n: usize,
    pub s: f64,
    pub p: f64,
}

impl PoissonKernel {
    pub fn new(n: usize, s: f64) -> Result<Self> {
        Ok(PoissonKernel { n, s, p: poisson_normalisation(n, s)? })
    }

    pub fn eval(&self, x: &Point, y: f64) -> Result<f64> {
        if !(y > 0.0) {
            return Err(Error::NonpositiveHeight(y));
        }
        Ok(self.raw(x[0] * x[0] + x[1] * x[1], y))
    }

    fn raw(&self, r2: f64, y: f64) -> f64 {
        self.p * y.powf(2.0 * self.s) * (r2 + y * y).powf(-(self.n as f64 + 2.0 * self.s) / 2.0)
    }

    fn dy_raw(&self, r2: f64, y: f64) -> f64 {
        let e = (self.n as f64 + 2.0 * self.s) / 2.0;
        let q = r2 + y * y;
        self.p * (2.0 * self.s * y.powf(2.0 * self.s - 1.0) * q.powf(-e) - 2.0 * e * y.powf(2.0 * self.s + 1.0) * q.powf(-e - 1.0))
    }

    /// `sign(t) (1 - I_{y^2/(t^2+y^2)}(s, 1/2))`: normalised antiderivative in t.
    fn antider_1d(&self, t: f64, y: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        if t.is_infinite() {
            return t.signum();
        }
        let c = y * y / (t * t + y * y);
        t.signum() * (1.0 - beta_reg(self.s, 0.5, c))
    }

    /// `int_a^b G(t, y) dt` (1D), exact up to the incomplete Beta function.
    pub fn mass_1d(&self, a: f64, b: f64, y: f64) -> f64 {
        0.5 * self.p * beta(0.5, self.s) * (self.antider_1d(b, y) - self.antider_1d(a, y))
    }

    /// `d/dy int_a^b G(t, y) dt` (1D).
    pub fn dmass_dy_1d(&self, a: f64, b: f64, y: f64) -> f64 {
        let g = |u: f64| (1.0 + u * u).powf(-(1.0 + 2.0 * self.s) / 2.0);
        let term = |t: f64| if t.is_infinite() { 0.0 } else { t * g(t / y) };
        self.p / (y * y) * (term(a) - term(b))
    }

    /// `int_box G(x - z, y) dz`.
    pub fn box_mass(&self, x: &Point, bx: &Aabb, y: f64) -> f64 {
        if self.n == 1 {
            return self.mass_1d(x[0] - bx.hi[0], x[0] - bx.lo[0], y);
        }
        let c = [(bx.lo[0] + bx.hi[0]) / 2.0, (bx.lo[1] + bx.hi[1]) / 2.0];
        let half = ((bx.hi[0] - bx.lo[0]) / 2.0).max((bx.hi[1] - bx.lo[1]) / 2.0);
        let r = ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2) + y * y).sqrt();
        if r >= 6.0 * half {
            let (gx, gw) = quadrature::gauss_legendre(6);
            let (hx, hy) = ((bx.hi[0] - bx.lo[0]) / 2.0, (bx.hi[1] - bx.lo[1]) / 2.0);
            let mut acc = 0.0;
            for (a, wa) in gx.iter().zip(&gw) {
                let dx = x[0] - (c[0] + hx * a);
                for (b, wb) in gx.iter().zip(&gw) {
                    let dy = x[1] - (c[1] + hy * b);
                    acc += wa * wb * self.raw(dx * dx + dy * dy, y);
                }
            }
            return acc * hx * hy;
        }
        let tol = Tolerance::new(1e-14, 1e-10);
        quadrature::adaptive(
            |z0| {
                let dx = x[0] - z0;
                quadrature::adaptive(|z1| self.raw(dx * dx + (x[1] - z1).powi(2), y), bx.lo[1], bx.hi[1], tol).value
            },
            bx.lo[0],
            bx.hi[0],
            tol,
        )
        .value
    }
}

/// Convenience wrapper computing `p` on every call.
pub fn poisson_kernel(x: &Point, y: f64, n: usize, s: f64) -> Result<f64> {
    PoissonKernel::new(n, s)?.eval(x, y)
}

pub type SourceFn = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Source {
    /// Piecewise constant on the Omega-cells, zero elsewhere.
    Cells { grid: Grid, values: Vec<f64> },
    /// Continuous function supported in a box.
    Function { f: SourceFn, support: Aabb },
}

/// Extension `w(x, y) = int v(z) G(x - z, y) dz` of a source.
#[derive(Clone)]
pub struct ExtensionField {
    pub kernel: PoissonKernel,
    pub source: Source,
}

impl ExtensionField {
    pub fn from_cells(grid: &Grid, values: Vec<f64>, s: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid("grid function length does not match the grid"));
        }
        Ok(ExtensionField {
            kernel: PoissonKernel::new(grid.dim(), s)?,
            source: Source::Cells { grid: grid.clone(), values },
        })
    }

    pub fn from_fn(n: usize, s: f64, support: Aabb, f: SourceFn) -> Result<Self> {
        Ok(ExtensionField { kernel: PoissonKernel::new(n, s)?, source: Source::Function { f, support } })
    }

    fn cell_box(grid: &Grid, c: &Point) -> Aabb {
        let hh = grid.h() / 2.0;
        if grid.dim() == 1 {
            Aabb { lo: [c[0] - hh, 0.0], hi: [c[0] + hh, 0.0] }
        } else {
            Aabb { lo: [c[0] - hh, c[1] - hh], hi: [c[0] + hh, c[1] + hh] }
        }
    }

    pub fn extend(&self, x: &Point, y: f64) -> Result<f64> {
        if !(y > 0.0) {
            return Err(Error::NonpositiveHeight(y));
        }
        let k = &self.kernel;
        match &self.source {
            Source::Cells { grid, values } => Ok(grid
                .centers()
                .iter()
                .zip(values)
                .filter(|(_, v)| **v != 0.0)
                .map(|(c, v)| v * k.box_mass(x, &Self::cell_box(grid, c), y))
                .sum()),
            Source::Function { f, support } => {
                self.integrate_source(support, x, |z| f(z) * k.raw((x[0] - z[0]).powi(2) + (x[1] - z[1]).powi(2), y))
            }
        }
    }

    /// Folded form for sources antisymmetric about `x1 = lambda`:
    /// `int_H v(z) [G(x - z, y) - G(x - Q z, y)] dz`.
    pub fn extend_folded(&self, x: &Point, y: f64, lambda: f64) -> Result<f64> {
        if !(y > 0.0) {
            return Err(Error::NonpositiveHeight(y));
        }
        let k = &self.kernel;
        match &self.source {
            Source::Cells { grid, values } => Ok(grid
                .centers()
                .iter()
                .zip(values)
                .filter(|(c, v)| c[0] > lambda && **v != 0.0)
                .map(|(c, v)| {
                    let b = Self::cell_box(grid, c);
                    let qb = Aabb { lo: [2.0 * lambda - b.hi[0], b.lo[1]], hi: [2.0 * lambda - b.lo[0], b.hi[1]] };
                    v * (k.box_mass(x, &b, y) - k.box_mass(x, &qb, y))
                })
                .sum()),
            Source::Function { f, support } => {
                let mut sup = *support;
                sup.lo[0] = sup.lo[0].max(lambda);
                if sup.hi[0] <= sup.lo[0] {
                    return Ok(0.0);
                }
                self.integrate_source(&sup, x, |z| {
                    let d2 = (x[0] - z[0]).powi(2) + (x[1] - z[1]).powi(2);
                    let q2 = (x[0] - 2.0 * lambda + z[0]).powi(2) + (x[1] - z[1]).powi(2);
                    f(z) * (k.raw(d2, y) - k.raw(q2, y))
                })
            }
        }
    }

    fn integrate_source(&self, sup: &Aabb, x: &Point, g: impl Fn(&Point) -> f64) -> Result<f64> {
        let tol = Tolerance::new(1e-13, 1e-11);
        let split = |lo: f64, hi: f64, at: f64| -> Vec<(f64, f64)> {
            if lo < at && at < hi {
                vec![(lo, at), (at, hi)]
            } else {
                vec![(lo, hi)]
            }
        };
        let mut total = 0.0;
        if self.kernel.n == 1 {
            for (a, b) in split(sup.lo[0], sup.hi[0], x[0]) {
                total += quadrature::integrate(|z| g(&[z, 0.0]), a, b, tol)?;
            }
        } else {
            for (a, b) in split(sup.lo[0], sup.hi[0], x[0]) {
                total += quadrature::integrate(
                    |z0| {
                        split(sup.lo[1], sup.hi[1], x[1])
                            .into_iter()
                            .map(|(c, d)| quadrature::adaptive(|z1| g(&[z0, z1]), c, d, tol).value)
                            .sum()
                    },
                    a,
                    b,
                    tol,
                )?;
            }
        }
        Ok(total)
    }

    /// `y^{1-2s} d/dy w(x, y)` for a 1D function source.
    pub fn neumann_trace(&self, x: f64, y: f64) -> Result<f64> {
        let (f, sup) = match &self.source {
            Source::Function { f, support } if self.kernel.n == 1 => (f, support),
            _ => return Err(Error::invalid("Neumann trace is implemented for 1D function sources")),
        };
        if !(y > 0.0) {
            return Err(Error::NonpositiveHeight(y));
        }
        let k = &self.kernel;
        let vx = f(&[x, 0.0]);
        let tol = Tolerance::new(1e-13, 1e-11);
        let mut total = 0.0;
        let pieces = if sup.lo[0] < x && x < sup.hi[0] { vec![(sup.lo[0], x), (x, sup.hi[0])] } else { vec![(sup.lo[0], sup.hi[0])] };
        for (a, b) in pieces {
            total += quadrature::integrate(|z| (f(&[z, 0.0]) - vx) * k.dy_raw((x - z).powi(2), y), a, b, tol)?;
        }
        total += vx * k.dmass_dy_1d(x - sup.hi[0], x - sup.lo[0], y);
        Ok(y.powf(1.0 - 2.0 * k.s) * total)
    }

    /// `lim_{y->0} y^{1-2s} d/dy w(x, y)` by Richardson extrapolation.
    pub fn neumann_limit(&self, x: f64) -> Result<f64> {
        let s = self.kernel.s;
        let vals = (4..=10).map(|k| self.neumann_trace(x, 2f64.powi(-k))).collect::<Result<Vec<_>>>()?;
        Ok(richardson(&vals, &[2.0 - 2.0 * s, 2.0]))
    }
}

/// Richardson extrapolation of samples at `y_k = y_0 2^{-k}` whose error has
/// the given leading exponents.
pub fn richardson(vals: &[f64], exponents: &[f64]) -> f64 {
    let mut v = vals.to_vec();
    for &p in exponents {
        if v.len() < 2 {
            break;
        }
        let r = 2f64.powf(p);
        v = v.windows(2).map(|w| (r * w[1] - w[0]) / (r - 1.0)).collect();
    }
    *v.last().expect("at least one sample")
}

/// First Dirichlet eigenpair of `-Laplace` on `B_rho(0)`, on the node lattice
/// `h Z^N` with Shortley-Weller boundary closure.
#[derive(Clone, Debug)]
pub struct Eigenpair {
    pub rho: f64,
    pub dim: usize,
    pub h: f64,
    pub lambda1: f64,
    m: i64,
    lookup: Vec<usize>,
    pub nodes: Vec<Point>,
    /// Positive, `max = 1`.
    pub psi: Vec<f64>,
}

const NONE: usize = usize::MAX;

impl Eigenpair {
    fn slot(&self, i: i64, j: i64) -> Option<usize> {
        let m = self.m;
        if i.abs() > m || j.abs() > m || (self.dim == 1 && j != 0) {
            return None;
        }
        let w = (2 * m + 1) as usize;
        let row = if self.dim == 2 { (j + m) as usize } else { 0 };
        let k = self.lookup[row * w + (i + m) as usize];
        (k != NONE).then_some(k)
    }

    fn node_value(&self, i: i64, j: i64) -> f64 {
        self.slot(i, j).map_or(0.0, |k| self.psi[k])
    }

    /// `Psi` at an arbitrary point (multilinear interpolation; zero outside
    /// the ball, and linear decay to zero across the last boundary gap).
    pub fn eval(&self, x: &Point) -> f64 {
        let r = x[0].hypot(x[1]);
        if r >= self.rho {
            return 0.0;
        }
        let h = self.h;
        if self.dim == 1 {
            let i = (x[0] / h).floor() as i64;
            let t = x[0] / h - i as f64;
            let (a, b) = (i as f64 * h, (i + 1) as f64 * h);
            let va = if a.abs() < self.rho { self.node_value(i, 0) } else { 0.0 };
            let vb = if b.abs() < self.rho { self.node_value(i + 1, 0) } else { 0.0 };
            let (la, lb) = (a.max(-self.rho), b.min(self.rho));
            let _ = t;
            return va + (vb - va) * (x[0] - la) / (lb - la);
        }
        let i = (x[0] / h).floor() as i64;
        let j = (x[1] / h).floor() as i64;
        let tx = x[0] / h - i as f64;
        let ty = x[1] / h - j as f64;
        let v = (1.0 - tx) * (1.0 - ty) * self.node_value(i, j)
            + tx * (1.0 - ty) * self.node_value(i + 1, j)
            + (1.0 - tx) * ty * self.node_value(i, j + 1)
            + tx * ty * self.node_value(i + 1, j + 1);
        v.max(0.0)
    }

    /// `max |-Laplace_h Psi - lambda1 Psi|` over nodes whose stencil is interior
    /// (standard 3/5-point Laplacian).
    pub fn residual(&self) -> f64 {
        let h2 = self.h * self.h;
        let mut worst = 0.0f64;
        for (k, p) in self.nodes.iter().enumerate() {
            let i = (p[0] / self.h).round() as i64;
            let j = (p[1] / self.h).round() as i64;
            let mut nb = vec![(i - 1, j), (i + 1, j)];
            if self.dim == 2 {
                nb.push((i, j - 1));
                nb.push((i, j + 1));
            }
            if nb.iter().any(|&(a, b)| self.slot(a, b).is_none()) {
                continue;
            }
            let lap: f64 = nb.iter().map(|&(a, b)| self.node_value(a, b)).sum::<f64>() - 2.0 * self.dim as f64 * self.psi[k];
            worst = worst.max((-lap / h2 - self.lambda1 * self.psi[k]).abs());
        }
        worst
    }

    /// `int_{B_rho} Psi^{1/2}` (node quadrature).
    pub fn sqrt_integral(&self) -> f64 {
        self.h.powi(self.dim as i32) * self.psi.iter().map(|v| v.sqrt()).sum::<f64>()
    }

    /// Discrete Laplacian of `Psi` at node `k` (the operator used in the solve).
    fn laplacian_at(&self, k: usize) -> f64 {
        let p = self.nodes[k];
        let mut lap = 0.0;
        for axis in 0..self.dim {
            let (hp, vp) = self.arm(&p, axis, 1.0);
            let (hm, vm) = self.arm(&p, axis, -1.0);
            let u = self.psi[k];
            lap += 2.0 / (hp + hm) * ((vp - u) / hp - (u - vm) / hm);
        }
        lap
    }

    /// Distance to the next node (or the boundary) and the value there.
    fn arm(&self, p: &Point, axis: usize, sign: f64) -> (f64, f64) {
        let i = (p[0] / self.h).round() as i64;
        let j = (p[1] / self.h).round() as i64;
        let (a, b) = if axis == 0 { (i + sign as i64, j) } else { (i, j + sign as i64) };
        match self.slot(a, b) {
            Some(q) => (self.h, self.psi[q]),
            None => (boundary_gap(p, axis, sign, self.rho).min(self.h), 0.0),
        }
    }
}

fn boundary_gap(p: &Point, axis: usize, sign: f64, rho: f64) -> f64 {
    let xe = sign * p[axis];
    let r2 = p[0] * p[0] + p[1] * p[1];
    -xe + (xe * xe - r2 + rho * rho).max(0.0).sqrt()
}

pub fn principal_eigenpair(rho: f64, dim: usize, h: f64) -> Result<Eigenpair> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::OutOfRange { name: "rho", value: rho, expected: "> 0" });
    }
    if !(1..=2).contains(&dim) {
        return Err(Error::OutOfRange { name: "N", value: dim as f64, expected: "1 or 2" });
    }
    if !(h > 0.0 && h < rho) {
        return Err(Error::OutOfRange { name: "h", value: h, expected: "0 < h < rho" });
    }
    let m = (rho / h).ceil() as i64;
    let w = (2 * m + 1) as usize;
    let jr = if dim == 2 { -m..=m } else { 0..=0 };
    let mut lookup = vec![NONE; w * if dim == 2 { w } else { 1 }];
    let mut nodes = Vec::new();
    for j in jr {
        for i in -m..=m {
            let p = [i as f64 * h, j as f64 * h];
            if p[0].hypot(p[1]) < rho * (1.0 - 1e-12) {
                let row = if dim == 2 { (j + m) as usize } else { 0 };
                lookup[row * w + (i + m) as usize] = nodes.len();
                nodes.push(p);
            }
        }
    }
    if nodes.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let mut eig = Eigenpair { rho, dim, h, lambda1: 0.0, m, lookup, psi: vec![0.0; nodes.len()], nodes };
    // Shortley-Weller rows.
    let rows: Vec<Vec<(usize, f64)>> = eig
        .nodes
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let i = (p[0] / h).round() as i64;
            let j = (p[1] / h).round() as i64;
            let mut row = vec![(k, 0.0)];
            for axis in 0..dim {
                let mut arms = [(0.0, None), (0.0, None)];
                for (slot, sign) in [(0usize, 1.0), (1, -1.0)] {
                    let (a, b) = if axis == 0 { (i + sign as i64, j) } else { (i, j + sign as i64) };
                    arms[slot] = match eig.slot(a, b) {
                        Some(q) => (h, Some(q)),
                        None => (boundary_gap(p, axis, sign, rho).min(h), None),
                    };
                }
                let (hp, hm) = (arms[0].0, arms[1].0);
                row[0].1 += 2.0 / (hp * hm);
                if let Some(q) = arms[0].1 {
                    row.push((q, -2.0 / (hp * (hp + hm))));
                }
                if let Some(q) = arms[1].1 {
                    row.push((q, -2.0 / (hm * (hp + hm))));
                }
            }
            row
        })
        .collect();
    let a = Csr::from_rows(rows);
    let n = eig.nodes.len();
    let mut u = vec![1.0; n];
    let mut z = vec![0.0; n];
    let mut lambda = 0.0;
    for it in 0..500 {
        bicgstab(&a, &u, &mut z, 1e-13, 20_000)?;
        let uu: f64 = u.iter().map(|x| x * x).sum();
        let uz: f64 = u.iter().zip(&z).map(|(a, b)| a * b).sum();
        let new_lambda = uu / uz;
        let zmax = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut change = 0.0f64;
        for k in 0..n {
            let nv = z[k] / zmax;
            change = change.max((nv - u[k]).abs());
            u[k] = nv;
        }
        let settled = (new_lambda - lambda).abs() <= 1e-13 * new_lambda && change <= 1e-11;
        lambda = new_lambda;
        // warm start for the next solve
        for k in 0..n {
            z[k] = u[k] / lambda;
        }
        if settled && it > 2 {
            eig.lambda1 = lambda;
            eig.psi = u.iter().map(|v| v.abs()).collect();
            return Ok(eig);
        }
    }
    Err(Error::ConvergenceFailure { iterations: 500, residual: f64::NAN })
}

/// Tabulated decaying profile `f` with `f(0) = 1` and the derived constants.
#[derive(Clone, Debug)]
pub struct BarrierProfile {
    pub s: f64,
    pub lambda1: f64,
    pub ys: Vec<f64>,
    pub f: Vec<f64>,
    pub fprime: Vec<f64>,
    pub d_s: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub f_at_1: f64,
}

/// `f(y) = (2^{1-s}/Gamma(s)) a^s K_s(a)`, `a = sqrt(lambda1) y`.
pub fn profile_value(s: f64, lambda1: f64, y: f64) -> Result<f64> {
    if y == 0.0 {
        return Ok(1.0);
    }
    let a = lambda1.sqrt() * y;
    Ok(2f64.powf(1.0 - s) / gamma(s) * scaled_macdonald(s, a)?)
}

/// `f'(y) = -sqrt(lambda1) (2^{1-s}/Gamma(s)) a^{2s-1} a^{1-s} K_{1-s}(a)`.
pub fn profile_derivative(s: f64, lambda1: f64, y: f64) -> Result<f64> {
    if y == 0.0 {
        let lim = -lambda1.powf(s) * d_s(s);
        return Ok(if s < 0.5 {
            f64::NEG_INFINITY
        } else if s > 0.5 {
            0.0
        } else {
            lim
        });
    }
    let a = lambda1.sqrt() * y;
    Ok(-lambda1.sqrt() * 2f64.powf(1.0 - s) / gamma(s) * a.powf(2.0 * s - 1.0) * scaled_macdonald(1.0 - s, a)?)
}

/// Log-spaced heights in `[ymin, ymax]`.
pub fn log_ygrid(ymin: f64, ymax: f64, n: usize) -> Vec<f64> {
    let (a, b) = (ymin.ln(), ymax.ln());
    (0..n).map(|k| (a + (b - a) * k as f64 / (n - 1).max(1) as f64).exp()).collect()
}

/// Tabulates `f` and `f'` on `ygrid` merged with the dyadic heights used for
/// the Neumann limit.
pub fn bessel_profile(s: f64, lambda1: f64, ygrid: &[f64]) -> Result<BarrierProfile> {
    check_order(s)?;
    if !(lambda1 > 0.0) {
        return Err(Error::OutOfRange { name: "lambda1", value: lambda1, expected: "> 0" });
    }
    let dyadic: Vec<f64> = (2..=12).map(|k| 2f64.powi(-k)).collect();
    let mut ys: Vec<f64> = ygrid.iter().copied().chain(dyadic.iter().copied()).chain([1.0]).collect();
    if ys.iter().any(|y| !(*y >= 0.0 && y.is_finite())) {
        return Err(Error::invalid("heights must be finite and nonnegative"));
    }
    ys.sort_by(f64::total_cmp);
    ys.dedup();
    let f = ys.par_iter().map(|&y| profile_value(s, lambda1, y)).collect::<Result<Vec<_>>>()?;
    let fprime = ys.par_iter().map(|&y| profile_derivative(s, lambda1, y)).collect::<Result<Vec<_>>>()?;
    let at = |y: f64| ys.iter().position(|&v| v == y).expect("merged into the table");
    let f_at_1 = f[at(1.0)];
    let neumann: Vec<f64> = dyadic.iter().map(|&y| y.powf(1.0 - 2.0 * s) * fprime[at(y)]).collect();
    let lim = richardson(&neumann, &[2.0 - 2.0 * s, 2.0, 4.0 - 2.0 * s]);
    let ds = d_s(s);
    Ok(BarrierProfile {
        s,
        lambda1,
        ys,
        f,
        fprime,
        d_s: ds,
        kappa1: lambda1.powf(s) * ds,
        kappa2: lim / (1.0 - f_at_1),
        f_at_1,
    })
}

impl BarrierProfile {
    pub fn value(&self, y: f64) -> Result<f64> {
        profile_value(self.s, self.lambda1, y)
    }

    /// Max relative mismatch, over consecutive table heights `a < b`, of the
    /// flux balance `[y^{1-2s} f']_a^b = lambda1 int_a^b y^{1-2s} f dy`.
    pub fn ode_residual(&self) -> Result<f64> {
        let (gx, gw) = quadrature::gauss_legendre(10);
        let e = 1.0 - 2.0 * self.s;
        let mut worst = 0.0f64;
        for k in 0..self.ys.len().saturating_sub(1) {
            let (a, b) = (self.ys[k], self.ys[k + 1]);
            if a <= 0.0 {
                continue;
            }
            let flux = b.powf(e) * self.fprime[k + 1] - a.powf(e) * self.fprime[k];
            let (c, r) = ((a + b) / 2.0, (b - a) / 2.0);
            let mut src = 0.0;
            for (x, w) in gx.iter().zip(&gw) {
                let y = c + r * x;
                src += w * y.powf(e) * self.value(y)?;
            }
            src *= r * self.lambda1;
            worst = worst.max((flux - src).abs() / (flux.abs() + src.abs()));
        }
        Ok(worst)
    }

    /// `y,f,fprime` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("y,f,fprime\n");
        for k in 0..self.ys.len() {
            out.push_str(&format!("{:?},{:?},{:?}\n", self.ys[k], self.f[k], self.fprime[k]));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtensionConstants {
    pub d_s: f64,
    pub kappa1: f64,
    pub kappa2: f64,
}

/// `d_s`, `kappa1 = lambda1^s d_s` and the tabulated `kappa2`.
pub fn extension_constants(s: f64, lambda1: f64, profile: Option<&BarrierProfile>) -> Result<ExtensionConstants> {
    check_order(s)?;
    let p = profile.ok_or(Error::ProfileUnavailable)?;
    if p.s != s || p.lambda1 != lambda1 {
        return Err(Error::ProfileUnavailable);
    }
    Ok(ExtensionConstants { d_s: d_s(s), kappa1: lambda1.powf(s) * d_s(s), kappa2: p.kappa2 })
}

/// `e^{-gamma t} Psi(x) (f(y) - f(1)) / (1 - f(1))` (x relative to the ball center).
pub fn barrier(t: f64, x: &Point, y: f64, profile: &BarrierProfile, eig: &Eigenpair, gamma_rate: f64) -> Result<f64> {
    let psi = eig.eval(x);
    if psi == 0.0 {
        return Ok(0.0);
    }
    let f = profile.value(y)?;
    Ok((-gamma_rate * t).exp() * psi * (f - profile.f_at_1) / (1.0 - profile.f_at_1))
}

/// Minimum over interior eigen-nodes and the given heights of the
/// finite-difference value of `y^{1-2s} Lap_x w + (1-2s) y^{-2s} w_y + y^{1-2s} w_yy`
/// for the barrier at time `t` (step `dy` in y).
pub fn barrier_residual(profile: &BarrierProfile, eig: &Eigenpair, gamma_rate: f64, t: f64, ys: &[f64], dy: f64) -> Result<f64> {
    let s = profile.s;
    let scale = (-gamma_rate * t).exp() / (1.0 - profile.f_at_1);
    let mut worst = f64::INFINITY;
    for &y in ys {
        if !(y - dy > 0.0 && y + dy <= 1.0 + 1e-12) {
            return Err(Error::invalid("heights must keep the difference stencil inside (0, 1]"));
        }
        let fm = profile.value(y - dy)? - profile.f_at_1;
        let f0 = profile.value(y)? - profile.f_at_1;
        let fp = profile.value(y + dy)? - profile.f_at_1;
        let fy = (fp - fm) / (2.0 * dy);
        let fyy = (fp - 2.0 * f0 + fm) / (dy * dy);
        for k in 0..eig.nodes.len() {
            let psi = eig.psi[k];
            let lap = eig.laplacian_at(k);
            let l = y.powf(1.0 - 2.0 * s) * lap * f0 + psi * ((1.0 - 2.0 * s) * y.powf(-2.0 * s) * fy + y.powf(1.0 - 2.0 * s) * fyy);
            worst = worst.min(scale * l);
        }
    }
    Ok(worst)
}

/// Constants of the extension lower bound: `(c1~, c2~)`.
pub fn kleiner_constants(n: usize, s: f64, rho: f64) -> Result<(f64, f64)> {
    let p = poisson_normalisation(n, s)?;
    let nn = n as f64;
    let c1 = 1.0 - ((1.0 + 4.0 * rho * rho) / (1.0 + 8.0 * rho * rho)).powf((nn + 2.0 * s) / 2.0);
    let omega = unit_ball_volume(n);
    let ct1 = c1 * p / omega * (rho * rho + 1.0).powf(-(3.0 * nn + 2.0 * s) / 2.0);
    let c2 = unit_sphere_area(n) / (2.0 * s) * rho.powf(-2.0 * s);
    Ok((ct1, c2 * p))
}

/// Rate and ratio of the subsolution lower bound: `gamma = c_inf - kappa2 + 1`
/// and `q = 2 c2~ / c1~ [int Psi^{1/2}]^{-2}`.
#[derive(Clone, Copy, Debug)]
pub struct SubsolutionConstants {
    pub gamma: f64,
    pub q: f64,
    pub c1_tilde: f64,
    pub c2_tilde: f64,
}

pub fn subsolution_constants(s: f64, c_inf: f64, eig: &Eigenpair, profile: &BarrierProfile) -> Result<SubsolutionConstants> {
    let (c1, c2) = kleiner_constants(eig.dim, s, eig.rho)?;
    let m = eig.sqrt_integral();
    Ok(SubsolutionConstants { gamma: c_inf - profile.kappa2 + 1.0, q: 2.0 * c2 / c1 / (m * m), c1_tilde: c1, c2_tilde: c2 })
}
