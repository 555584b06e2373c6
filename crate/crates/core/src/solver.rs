//! Time integration of `u_t + A u = f(t, x, u)`: first-order IMEX stepping,
//! a matrix-exponential mild-solution oracle, and sampled checks of the
//! nonlinearity hypotheses.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::fracops::NonlocalOperator;
use crate::geometry::{Domain, Point};
use crate::{Error, Result};

/// Soft and hard tolerances of the admissible-range check.
pub const RANGE_SOFT_TOL: f64 = 1e-9;
pub const RANGE_HARD_TOL: f64 = 1e-3;

/// Time coefficient: constant or `mean + amp sin(2 pi t / period)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Coef {
    Constant(f64),
    Sinusoid { mean: f64, amp: f64, period: f64 },
}

impl Coef {
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            Coef::Constant(c) => c,
            Coef::Sinusoid { mean, amp, period } => mean + amp * (2.0 * PI * t / period).sin(),
        }
    }

    pub fn range(&self) -> (f64, f64) {
        match *self {
            Coef::Constant(c) => (c, c),
            Coef::Sinusoid { mean, amp, .. } => (mean - amp.abs(), mean + amp.abs()),
        }
    }
}

pub type Evaluator = Arc<dyn Fn(f64, &Point, f64) -> f64 + Send + Sync>;
pub type LipschitzBound = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// `f(t, x, u)` with its admissible open interval and a declared Lipschitz
/// bound on compact `[lo, hi]` inside it.
#[derive(Clone)]
pub struct Nonlinearity {
    pub name: String,
    f: Evaluator,
    pub range: (f64, f64),
    lipschitz: LipschitzBound,
}

impl std::fmt::Debug for Nonlinearity {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fm.debug_struct("Nonlinearity").field("name", &self.name).field("range", &self.range).finish()
    }
}

impl Nonlinearity {
    pub fn new(name: impl Into<String>, range: (f64, f64), f: Evaluator, lipschitz: LipschitzBound) -> Self {
        Nonlinearity { name: name.into(), f, range, lipschitz }
    }

    pub fn zero() -> Self {
        Self::new("zero", (f64::NEG_INFINITY, f64::INFINITY), Arc::new(|_, _, _| 0.0), Arc::new(|_, _| 0.0))
    }

    /// `a(t) u - b(t) u^3`.
    pub fn allen_cahn(a: Coef, b: Coef) -> Self {
        let (alo, ahi) = a.range();
        let (blo, bhi) = b.range();
        Self::new(
            "allen-cahn",
            (f64::NEG_INFINITY, f64::INFINITY),
            Arc::new(move |t, _, u| a.at(t) * u - b.at(t) * u * u * u),
            // |a - 3 b u^2| is affine in (a, b, u^2): extremes at the corners
            Arc::new(move |lo, hi| {
                let big = lo.abs().max(hi.abs());
                let small = if lo <= 0.0 && hi >= 0.0 { 0.0 } else { lo.abs().min(hi.abs()) };
                let mut m = 0.0f64;
                for av in [alo, ahi] {
                    for bv in [blo, bhi] {
                        for w in [small, big] {
                            m = m.max((av - 3.0 * bv * w * w).abs());
                        }
                    }
                }
                m
            }),
        )
    }

    /// `c(t, x) u + g`.
    pub fn linear(c: LinearCoefficient, g: f64) -> Self {
        let bound = c.c_inf;
        let cf = c.c.clone();
        Self::new(
            "linear",
            (f64::NEG_INFINITY, f64::INFINITY),
            Arc::new(move |t, x, u| cf(t, x) * u + g),
            Arc::new(move |_, _| bound),
        )
    }

    pub fn eval(&self, t: f64, x: &Point, u: f64) -> f64 {
        (self.f)(t, x, u)
    }

    pub fn lipschitz_bound(&self, lo: f64, hi: f64) -> f64 {
        (self.lipschitz)(lo, hi)
    }

    /// Distance of `u` outside the closed admissible interval.
    pub fn range_excess(&self, u: f64) -> f64 {
        (self.range.0 - u).max(u - self.range.1).max(0.0)
    }
}

/// `c(t, x)` with its declared sup bound.
#[derive(Clone)]
pub struct LinearCoefficient {
    pub c: Arc<dyn Fn(f64, &Point) -> f64 + Send + Sync>,
    pub c_inf: f64,
}

impl LinearCoefficient {
    pub fn new(c: Arc<dyn Fn(f64, &Point) -> f64 + Send + Sync>, c_inf: f64) -> Self {
        LinearCoefficient { c, c_inf }
    }

    pub fn constant(c0: f64) -> Self {
        Self::new(Arc::new(move |_, _| c0), c0.abs())
    }

    pub fn at(&self, t: f64, x: &Point) -> f64 {
        (self.c)(t, x)
    }

    /// Worst `|c| - c_inf` over the given samples (`<= 0` when consistent).
    pub fn bound_violation(&self, samples: &[(f64, Point)]) -> f64 {
        samples.iter().map(|(t, x)| self.at(*t, x).abs() - self.c_inf).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Time-stamped states on the Omega-cells (exterior values are implicitly 0).
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Internal step size.
    pub dt: f64,
    pub scheme: String,
    /// Steps whose state left the admissible range by more than the soft tolerance.
    pub range_warnings: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
    pub fn last(&self) -> &[f64] {
        self.states.last().expect("nonempty trajectory")
    }

    /// Indices of snapshots with `t` in `[a, b]`.
    pub fn window(&self, a: f64, b: f64) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.times[k] >= a - 1e-12 && self.times[k] <= b + 1e-12).collect()
    }

    pub fn sup_norm(v: &[f64]) -> f64 {
        v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

/// Symmetric dense matvec with fixed summation order per row.
fn sym_matvec(m: &DMatrix<f64>, u: &[f64]) -> Vec<f64> {
    (0..m.ncols()).into_par_iter().map(|i| m.column(i).iter().zip(u).map(|(a, b)| a * b).sum()).collect()
}

/// `u+ = (I + dt A)^{-1} (u + dt f(t, x, u))` with the inverse formed once.
#[derive(Clone, Debug)]
pub struct ImexStepper {
    pub dt: f64,
    inverse: DMatrix<f64>,
    centers: Vec<Point>,
}

impl ImexStepper {
    pub fn new(op: &NonlocalOperator, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::OutOfRange { name: "dt", value: dt, expected: "> 0" });
        }
        let n = op.len();
        let m = DMatrix::identity(n, n) + &op.matrix * dt;
        let chol = m.cholesky().ok_or_else(|| Error::invalid("I + dt A is not positive definite"))?;
        let mut inverse = chol.inverse();
        // symmetrise round-off so that column access is a row access
        for j in 0..n {
            for i in (j + 1)..n {
                let a = 0.5 * (inverse[(i, j)] + inverse[(j, i)]);
                inverse[(i, j)] = a;
                inverse[(j, i)] = a;
            }
        }
        Ok(ImexStepper { dt, inverse, centers: op.grid.centers().to_vec() })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }
    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// One step; the bool reports a soft range excursion.
    pub fn step(&self, u: &[f64], t: f64, f: &Nonlinearity) -> Result<(Vec<f64>, bool)> {
        if u.len() != self.len() {
            return Err(Error::invalid("state length does not match the operator"));
        }
        let rhs: Vec<f64> = u.iter().zip(&self.centers).map(|(v, x)| v + self.dt * f.eval(t, x, *v)).collect();
        let next = sym_matvec(&self.inverse, &rhs);
        let mut soft = false;
        for v in &next {
            let e = f.range_excess(*v);
            if e > RANGE_HARD_TOL || !v.is_finite() {
                let (lo, hi) = f.range;
                return Err(Error::RangeExit { t: t + self.dt, value: *v, lo, hi });
            }
            soft |= e > RANGE_SOFT_TOL;
        }
        Ok((next, soft))
    }

    /// Advances `steps` steps, recording every `stride`-th state (and the first).
    pub fn run(&self, u0: &[f64], t0: f64, steps: usize, stride: usize, f: &Nonlinearity) -> Result<Trajectory> {
        let stride = stride.max(1);
        let mut traj = Trajectory {
            times: vec![t0],
            states: vec![u0.to_vec()],
            dt: self.dt,
            scheme: "imex-euler".into(),
            range_warnings: 0,
        };
        let mut u = u0.to_vec();
        for k in 0..steps {
            let t = t0 + k as f64 * self.dt;
            let (next, soft) = self.step(&u, t, f)?;
            traj.range_warnings += soft as usize;
            u = next;
            if (k + 1) % stride == 0 || k + 1 == steps {
                traj.times.push(t0 + (k + 1) as f64 * self.dt);
                traj.states.push(u.clone());
            }
        }
        Ok(traj)
    }
}

/// Single IMEX step (factorises `I + dt A` on every call).
pub fn step(u: &[f64], t: f64, dt: f64, op: &NonlocalOperator, f: &Nonlinearity) -> Result<Vec<f64>> {
    Ok(ImexStepper::new(op, dt)?.step(u, t, f)?.0)
}

/// Default step `h^{min(2s, 1)}` capped at `1e-2`.
pub fn default_dt(h: f64, s: f64) -> f64 {
    h.powf((2.0 * s).min(1.0)).min(1e-2)
}

/// Largest cell count accepted by the matrix-exponential oracle.
pub const MILD_CAP: usize = 2000;

/// Mild solution on `t_k = k T / K` by Picard iteration of the discretised
/// Duhamel formula
/// `u_{k+1} = E u_k + dt E_{1/2} (F_k + F_{k+1}) / 2`, `E = exp(-dt A)`,
/// i.e. the composite midpoint rule for the semigroup factor with the forcing
/// averaged over each substep.
pub fn mild_solve(u0: &[f64], horizon: f64, op: &NonlocalOperator, f: &Nonlinearity, substeps: usize) -> Result<Trajectory> {
    let n = op.len();
    if n > MILD_CAP {
        return Err(Error::CapExceeded { n, cap: MILD_CAP });
    }
    if u0.len() != n || substeps == 0 || !(horizon > 0.0) {
        return Err(Error::invalid("mild_solve needs matching u0, K >= 1 and T > 0"));
    }
    let dt = horizon / substeps as f64;
    let e_full = (&op.matrix * -dt).exp();
    let e_half = (&op.matrix * (-dt / 2.0)).exp();
    let centers = op.grid.centers();
    let times: Vec<f64> = (0..=substeps).map(|k| k as f64 * dt).collect();
    let forcing = |states: &[Vec<f64>]| -> Vec<Vec<f64>> {
        states
            .par_iter()
            .zip(&times)
            .map(|(u, t)| u.iter().zip(centers).map(|(v, x)| f.eval(*t, x, *v)).collect())
            .collect()
    };
    // free evolution as the first iterate
    let mut states = vec![u0.to_vec()];
    for k in 0..substeps {
        let next = sym_matvec(&e_full, &states[k]);
        states.push(next);
    }
    let mut prev_inc = f64::INFINITY;
    let mut growth = 0;
    for sweep in 1..=200 {
        let fk = forcing(&states);
        let mut next = vec![u0.to_vec()];
        for k in 0..substeps {
            let avg: Vec<f64> = fk[k].iter().zip(&fk[k + 1]).map(|(a, b)| 0.5 * dt * (a + b)).collect();
            let a = sym_matvec(&e_full, &next[k]);
            let b = sym_matvec(&e_half, &avg);
            next.push(a.iter().zip(&b).map(|(x, y)| x + y).collect());
        }
        let inc = next
            .iter()
            .zip(&states)
            .map(|(a, b)| a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())))
            .fold(0.0f64, f64::max);
        let scale = next.iter().map(|v| Trajectory::sup_norm(v)).fold(1e-300, f64::max);
        states = next;
        if !inc.is_finite() {
            return Err(Error::PicardDivergence { sweep, increment: inc });
        }
        if inc <= 1e-13 * scale {
            return Ok(Trajectory { times, states, dt, scheme: "mild-picard".into(), range_warnings: 0 });
        }
        // Picard on a Volterra equation may grow for a few sweeps before the
        // factorial contraction sets in; give up only on sustained growth
        growth = if inc > prev_inc { growth + 1 } else { 0 };
        if growth >= 8 {
            return Err(Error::PicardDivergence { sweep, increment: inc });
        }
        prev_inc = inc;
    }
    Err(Error::PicardDivergence { sweep: 200, increment: prev_inc })
}

/// Outcome of the sampled (F1)/(F2) checks.
#[derive(Clone, Debug)]
pub struct HypothesisReport {
    pub lipschitz_measured: f64,
    pub lipschitz_declared: f64,
    pub f1_holds: bool,
    /// Most negative `f(t, sigma x1, x', u) - f(t, x, u)`.
    pub f2_worst: f64,
    pub f2_holds: bool,
    /// `(t, x, sigma, u)` of the worst (F2) sample.
    pub f2_witness: Option<(f64, Point, f64, f64)>,
}

/// Samples (F1) on `[lo, hi]` and (F2) on the domain, `t` in `[0, t_max]`.
pub fn check_f_hypotheses(
    f: &Nonlinearity,
    domain: &Domain,
    compact: (f64, f64),
    t_max: f64,
    samples: usize,
    seed: u64,
) -> HypothesisReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bb = domain.bounding_box();
    let point = |rng: &mut ChaCha8Rng| loop {
        let x = [rng.random_range(bb.lo[0]..=bb.hi[0]), if domain.dim == 2 { rng.random_range(bb.lo[1]..=bb.hi[1]) } else { 0.0 }];
        if domain.contains(&x) {
            return x;
        }
    };
    let (lo, hi) = compact;
    let mut lip = 0.0f64;
    let mut worst = f64::INFINITY;
    let mut witness = None;
    for _ in 0..samples {
        let t = rng.random_range(0.0..=t_max.max(0.0));
        let x = point(&mut rng);
        let u = rng.random_range(lo..=hi);
        let v = rng.random_range(lo..=hi);
        if u != v {
            lip = lip.max((f.eval(t, &x, u) - f.eval(t, &x, v)).abs() / (u - v).abs());
        }
        let sigma: f64 = rng.random_range(-1.0..=1.0);
        let xs = [sigma * x[0], x[1]];
        let d = f.eval(t, &xs, u) - f.eval(t, &x, u);
        if d < worst {
            worst = d;
            witness = Some((t, x, sigma, u));
        }
    }
    let declared = f.lipschitz_bound(lo, hi);
    let tol = 1e-12 * (1.0 + worst.abs());
    HypothesisReport {
        lipschitz_measured: lip,
        lipschitz_declared: declared,
        f1_holds: lip <= declared * 1.01,
        f2_worst: worst,
        f2_holds: worst >= -tol,
        f2_witness: if worst < -tol { witness } else { None },
    }
}

/// Central-difference time derivative (one-sided at the ends); requires
/// uniform stamps.
pub fn time_derivative(traj: &Trajectory) -> Result<Vec<Vec<f64>>> {
    let m = traj.len();
    if m < 2 {
        return Err(Error::TooShort("need at least two snapshots".into()));
    }
    let dt = traj.times[1] - traj.times[0];
    if traj.times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.abs().max(1.0)) {
        return Err(Error::invalid("time stamps must be uniform"));
    }
    Ok((0..m)
        .map(|k| {
            let (a, b, d) = if k == 0 {
                (0, 1, dt)
            } else if k == m - 1 {
                (m - 2, m - 1, dt)
            } else {
                (k - 1, k + 1, 2.0 * dt)
            };
            traj.states[b].iter().zip(&traj.states[a]).map(|(x, y)| (x - y) / d).collect()
        })
        .collect())
}

/// `r(t, x) = v_t + A v - c v` on the region cells, per snapshot.
pub fn linear_supersolution_residual(
    v: &Trajectory,
    c: &LinearCoefficient,
    op: &NonlocalOperator,
    region: &[usize],
) -> Result<Vec<Vec<f64>>> {
    let dv = time_derivative(v)?;
    let centers = op.grid.centers();
    Ok((0..v.len())
        .map(|k| {
            let av = op.apply(&v.states[k]);
            region
                .iter()
                .map(|&i| dv[k][i] + av[i] - c.at(v.times[k], &centers[i]) * v.states[k][i])
                .collect()
        })
        .collect())
}
