//! Moving-plane diagnostics and theorem-level checks on trajectories:
//! reflection differences, decay monitoring, omega-limits, symmetry verdicts,
//! cylinder chains, maximum-principle / Harnack / barrier checks and
//! regularity quotients.

use std::collections::VecDeque;

use rayon::prelude::*;

use crate::extension::Eigenpair;
use crate::fracops::{small_volume_delta, FracParams, NonlocalOperator};
use crate::geometry::{cap_region, reflect, Domain, Grid, Point};
use crate::solver::{linear_supersolution_residual, time_derivative, LinearCoefficient, Nonlinearity, Trajectory};
use crate::{Error, Result};

/// Value of a grid function at an arbitrary point: (bi)linear interpolation
/// between cell centers, exterior cells counting as 0.
pub fn sample(grid: &Grid, u: &[f64], p: &Point) -> f64 {
    let h = grid.h();
    let at = |i: i64, j: i64| grid.find([i, j]).map_or(0.0, |k| u[k]);
    let qx = p[0] / h - 0.5;
    let i0 = qx.floor();
    let tx = qx - i0;
    let i0 = i0 as i64;
    if grid.dim() == 1 {
        return (1.0 - tx) * at(i0, 0) + tx * at(i0 + 1, 0);
    }
    let qy = p[1] / h - 0.5;
    let j0 = qy.floor();
    let ty = qy - j0;
    let j0 = j0 as i64;
    (1.0 - tx) * (1.0 - ty) * at(i0, j0) + tx * (1.0 - ty) * at(i0 + 1, j0) + (1.0 - tx) * ty * at(i0, j0 + 1) + tx * ty * at(i0 + 1, j0 + 1)
}

fn lattice_aligned(grid: &Grid, lambda: f64) -> bool {
    let k = 2.0 * lambda / grid.h();
    (k - k.round()).abs() <= 1e-9
}

/// `V_lambda u = u o Q_lambda - u` on the cap cells `x1 > lambda`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReflectionDiff {
    pub lambda: f64,
    pub cells: Vec<usize>,
    pub values: Vec<f64>,
}

impl ReflectionDiff {
    pub fn neg_sup(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(-v))
    }
    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
    pub fn abs_max(&self) -> f64 {
        Trajectory::sup_norm(&self.values)
    }
}

pub fn reflect_diff(u: &[f64], lambda: f64, grid: &Grid) -> Result<ReflectionDiff> {
    if u.len() != grid.len() {
        return Err(Error::invalid("grid function length does not match the grid"));
    }
    let cap = cap_region(grid, lambda)?;
    let aligned = lattice_aligned(grid, lambda);
    let values = cap
        .cells
        .iter()
        .map(|&i| {
            let mirrored = if aligned {
                grid.mirror(i, lambda).map_or(0.0, |m| u[m])
            } else {
                sample(grid, u, &reflect(&grid.center(i), lambda))
            };
            mirrored - u[i]
        })
        .collect();
    Ok(ReflectionDiff { lambda, cells: cap.cells, values })
}

/// Full antisymmetric `V_lambda u` on every Omega-cell (aligned planes only):
/// `u(Q x) - u(x)`, with `u = 0` off Omega.
pub fn reflect_diff_full(u: &[f64], lambda: f64, grid: &Grid) -> Result<Vec<f64>> {
    if !lattice_aligned(grid, lambda) {
        return Err(Error::invalid("plane is not aligned with the lattice"));
    }
    Ok((0..grid.len()).map(|i| grid.mirror(i, lambda).map_or(0.0, |m| u[m]) - u[i]).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    Fails,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::Fails => "fails",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// Thresholds of the decay classification.
#[derive(Clone, Copy, Debug)]
pub struct DecayConfig {
    /// Samples with `t < burn_in` are ignored by the fit.
    pub burn_in: f64,
    /// Values at or below this count as zero.
    pub zero_tol: f64,
    /// Smallest fitted rate accepted as decay.
    pub min_rate: f64,
    /// The late peak must fall below this fraction of the early peak.
    pub drop: f64,
}

impl Default for DecayConfig {
    fn default() -> Self {
        DecayConfig { burn_in: 0.0, zero_tol: 1e-14, min_rate: 1e-3, drop: 0.5 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayReport {
    pub lambda: f64,
    pub times: Vec<f64>,
    /// `||(V_lambda u)^-(t)||_inf`.
    pub series: Vec<f64>,
    /// Fitted exponential rate of the nonincreasing majorant (`inf` once it vanishes).
    pub rate: f64,
    /// Max deviation of `log(majorant)` from the fit.
    pub fit_residual: f64,
    pub verdict: Verdict,
}

/// Classifies a nonnegative series: `Holds` when the tail majorant
/// `M(t) = max_{t' >= t} s(t')` vanishes, or decays log-linearly at rate
/// `>= min_rate` and the peak of the last quarter of the tail is below `drop`
/// times the peak of the first quarter.
pub fn classify_decay(times: &[f64], series: &[f64], cfg: &DecayConfig) -> Result<(f64, f64, Verdict)> {
    let tail: Vec<usize> = (0..times.len()).filter(|&k| times[k] >= cfg.burn_in).collect();
    if tail.len() < 4 {
        return Err(Error::TooShort(format!("{} samples after burn-in {}", tail.len(), cfg.burn_in)));
    }
    let mut majorant = vec![0.0; tail.len()];
    let mut run = 0.0f64;
    for (j, &k) in tail.iter().enumerate().rev() {
        run = run.max(series[k]);
        majorant[j] = run;
    }
    if majorant[majorant.len() - 1] <= cfg.zero_tol {
        return Ok((f64::INFINITY, 0.0, Verdict::Holds));
    }
    let pts: Vec<(f64, f64)> = tail.iter().zip(&majorant).map(|(&k, &m)| (times[k], m.ln())).collect();
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let resid = pts.iter().map(|p| (p.1 - (my + slope * (p.0 - mx))).abs()).fold(0.0, f64::max);
    let rate = -slope;
    // compare the peaks of the first and last quarter of the tail
    let q = (tail.len() / 4).max(1);
    let head = tail[..q].iter().map(|&k| series[k]).fold(0.0, f64::max);
    let last = tail[tail.len() - q..].iter().map(|&k| series[k]).fold(0.0, f64::max);
    let verdict = if rate >= cfg.min_rate && last <= cfg.drop * head {
        Verdict::Holds
    } else if rate < 0.1 * cfg.min_rate || last >= 0.9 * head {
        Verdict::Fails
    } else {
        Verdict::Inconclusive
    };
    Ok((rate, resid, verdict))
}

pub fn monitor_s(traj: &Trajectory, grid: &Grid, lambda: f64, cfg: &DecayConfig) -> Result<DecayReport> {
    let series = traj
        .states
        .iter()
        .map(|u| reflect_diff(u, lambda, grid).map(|d| d.neg_sup()))
        .collect::<Result<Vec<_>>>()?;
    let (rate, fit_residual, verdict) = classify_decay(&traj.times, &series, cfg)?;
    Ok(DecayReport { lambda, times: traj.times.clone(), series, rate, fit_residual, verdict })
}

/// Clustered limit profiles from a time window.
#[derive(Clone, Debug)]
pub struct OmegaSet {
    pub window: (f64, f64),
    pub profiles: Vec<Vec<f64>>,
    /// Time of the snapshot chosen as each representative.
    pub times: Vec<f64>,
    /// Number of window snapshots per cluster.
    pub counts: Vec<usize>,
    pub distances: Vec<Vec<f64>>,
    /// Sup-distance between the last two window snapshots is within `tol`.
    pub settled: bool,
    pub tol: f64,
}

fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Leader clustering with radius `tol / 2`, so each cluster has sup-diameter
/// at most `tol`.
pub fn omega_limit(traj: &Trajectory, window: (f64, f64), tol: f64) -> Result<OmegaSet> {
    let idx = traj.window(window.0, window.1);
    if idx.len() < 2 {
        return Err(Error::TooShort(format!("{} snapshots in [{}, {}]", idx.len(), window.0, window.1)));
    }
    let mut reps: Vec<usize> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for &k in &idx {
        match reps.iter().position(|&r| sup_dist(&traj.states[r], &traj.states[k]) <= tol / 2.0) {
            Some(c) => counts[c] += 1,
            None => {
                reps.push(k);
                counts.push(1);
            }
        }
    }
    let profiles: Vec<Vec<f64>> = reps.iter().map(|&r| traj.states[r].clone()).collect();
    let distances = profiles.iter().map(|a| profiles.iter().map(|b| sup_dist(a, b)).collect()).collect();
    let n = idx.len();
    let settled = sup_dist(&traj.states[idx[n - 1]], &traj.states[idx[n - 2]]) <= tol;
    Ok(OmegaSet { window, times: reps.iter().map(|&r| traj.times[r]).collect(), profiles, counts, distances, settled, tol })
}

#[derive(Clone, Copy, Debug)]
pub struct SymmetryTolerances {
    pub sym: f64,
    /// Allowed rise between consecutive cells outward.
    pub mono: f64,
    /// Required total drop along each line.
    pub strict: f64,
    pub zero: f64,
}

impl SymmetryTolerances {
    /// `sym = max(5h, 1e-4)`, `zero = 1e-6 ||u0||`.
    pub fn for_run(h: f64, u0_sup: f64) -> Self {
        SymmetryTolerances { sym: (5.0 * h).max(1e-4), mono: 1e-8, strict: 1e-6, zero: 1e-6 * u0_sup }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProfileVerdict {
    pub evenness_error: f64,
    pub asymmetry_witness: Option<Point>,
    pub monotone: bool,
    pub strict: bool,
    /// Lines whose total drop is at most `strict` (or too short to measure).
    pub ties: usize,
    /// Largest outward rise and where it happens.
    pub worst_rise: f64,
    pub rise_witness: Option<Point>,
    pub zero: bool,
    pub sup: f64,
    pub pass: bool,
}

/// Evenness, strict monotonicity in `|x1|` and the zero alternative.
pub fn symmetry_verdict_profile(z: &[f64], grid: &Grid, tol: &SymmetryTolerances) -> ProfileVerdict {
    let mut even = 0.0f64;
    let mut witness = None;
    for i in 0..grid.len() {
        let m = grid.mirror(i, 0.0).map_or(0.0, |k| z[k]);
        let e = (z[i] - m).abs();
        if e > even {
            even = e;
            witness = Some(grid.center(i));
        }
    }
    // lines of constant x2, walked outward from x1 = 0 on both sides
    let mut rows: std::collections::BTreeMap<i64, Vec<(i64, usize)>> = Default::default();
    for i in 0..grid.len() {
        let c = grid.cell_index(i);
        rows.entry(c[1]).or_default().push((c[0], i));
    }
    let (mut monotone, mut strict, mut ties) = (true, true, 0usize);
    let (mut worst_rise, mut rise_witness) = (f64::NEG_INFINITY, None);
    for cells in rows.values_mut() {
        cells.sort();
        let right: Vec<usize> = cells.iter().filter(|c| c.0 >= 0).map(|c| c.1).collect();
        let left: Vec<usize> = cells.iter().rev().filter(|c| c.0 < 0).map(|c| c.1).collect();
        for side in [right, left] {
            if side.len() < 2 {
                ties += 1;
                continue;
            }
            for w in side.windows(2) {
                let rise = z[w[1]] - z[w[0]];
                if rise > worst_rise {
                    worst_rise = rise;
                    rise_witness = Some(grid.center(w[1]));
                }
                if rise > tol.mono {
                    monotone = false;
                }
            }
            let total = z[side[0]] - z[side[side.len() - 1]];
            if total <= tol.strict {
                ties += 1;
                // only full-width lines decide strictness
                if side.len() > 2 {
                    strict = false;
                }
            }
        }
    }
    let sup = Trajectory::sup_norm(z);
    let zero = sup <= tol.zero;
    let pass = even <= tol.sym && ((monotone && strict) || zero);
    ProfileVerdict {
        evenness_error: even,
        asymmetry_witness: witness,
        monotone,
        strict,
        ties,
        worst_rise,
        rise_witness,
        zero,
        sup,
        pass,
    }
}

pub fn symmetry_verdict(omega: &OmegaSet, grid: &Grid, tol: &SymmetryTolerances) -> Vec<ProfileVerdict> {
    omega.profiles.par_iter().map(|z| symmetry_verdict_profile(z, grid, tol)).collect()
}

/// Per-plane decay reports and the empirical `lambda_0`.
#[derive(Clone, Debug)]
pub struct SweepReport {
    pub reports: Vec<DecayReport>,
    /// Smallest grid plane above which every verdict holds (0 if all hold),
    /// uncertain by one grid spacing.
    pub lambda0: f64,
    pub spacing: f64,
}

pub fn lambda_sweep(traj: &Trajectory, grid: &Grid, lambdas: &[f64], cfg: &DecayConfig) -> Result<SweepReport> {
    if lambdas.is_empty() || lambdas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("plane grid must be nonempty and increasing"));
    }
    let reports = lambdas.par_iter().map(|&l| monitor_s(traj, grid, l, cfg)).collect::<Result<Vec<_>>>()?;
    let first_hold = (0..=reports.len())
        .rev()
        .take_while(|&j| j == reports.len() || reports[j].verdict == Verdict::Holds)
        .last()
        .unwrap_or(reports.len());
    let lambda0 = if first_hold == 0 { 0.0 } else { lambdas[first_hold - 1] };
    let spacing = if lambdas.len() > 1 { (lambdas[lambdas.len() - 1] - lambdas[0]) / (lambdas.len() - 1) as f64 } else { 0.0 };
    Ok(SweepReport { reports, lambda0, spacing })
}

/// Standard-form residual `V_t + A V - c V` of `V = V_lambda u` on the cap,
/// with `A V` from the mirror identity `(A V)(x) = (A u)(Q x) - (A u)(x)` and
/// `c` the difference quotient of `f` between `u` and `u o Q`.  Returns the
/// residual per snapshot and the largest `|c|` met.
pub fn reflected_residual(traj: &Trajectory, grid: &Grid, op: &NonlocalOperator, f: &Nonlinearity, lambda: f64) -> Result<(Vec<Vec<f64>>, f64)> {
    if !lattice_aligned(grid, lambda) {
        return Err(Error::invalid("plane is not aligned with the lattice"));
    }
    let cap = cap_region(grid, lambda)?;
    let mirrors: Vec<Option<usize>> = cap.cells.iter().map(|&i| grid.mirror(i, lambda)).collect();
    let vtraj = Trajectory {
        times: traj.times.clone(),
        states: traj.states.iter().map(|u| reflect_diff_full(u, lambda, grid)).collect::<Result<Vec<_>>>()?,
        dt: traj.dt,
        scheme: traj.scheme.clone(),
        range_warnings: 0,
    };
    let dv = time_derivative(&vtraj)?;
    let mut c_inf = 0.0f64;
    let res = (0..traj.len())
        .map(|k| {
            let u = &traj.states[k];
            let au = op.apply(u);
            let t = traj.times[k];
            cap.cells
                .iter()
                .zip(&mirrors)
                .map(|(&i, m)| {
                    let x = grid.center(i);
                    let (ul, aul) = m.map_or((0.0, 0.0), |m| (u[m], au[m]));
                    let v = ul - u[i];
                    let c = if v.abs() > 1e-12 {
                        (f.eval(t, &x, ul) - f.eval(t, &x, u[i])) / v
                    } else {
                        let d = 1e-6;
                        (f.eval(t, &x, u[i] + d) - f.eval(t, &x, u[i] - d)) / (2.0 * d)
                    };
                    c_inf = c_inf.max(c.abs());
                    dv[k][i] + (aul - au[i]) - c * v
                })
                .collect()
        })
        .collect();
    Ok((res, c_inf))
}

/// Chain of parabolic cylinders linking two points of a cell set.
#[derive(Clone, Debug)]
pub struct CylinderChain {
    pub theta: f64,
    /// Net `S_D` (n + 1 points).
    pub net: Vec<Point>,
    pub n: usize,
    /// `x_0 .. x_m` (points of the net, repeated where needed).
    pub points: Vec<Point>,
    /// `s_0 .. s_m`.
    pub times: Vec<f64>,
    pub m: usize,
    /// `|B_r0(x_j) cap B_r0(x_{j+1})|`.
    pub overlaps: Vec<f64>,
    pub mu: f64,
    pub r0: f64,
}

/// Measure of `B_r(0) cap B_r(d e)`.
pub fn lens_measure(dim: usize, r: f64, d: f64) -> f64 {
    if d >= 2.0 * r {
        return 0.0;
    }
    if dim == 1 {
        return 2.0 * r - d;
    }
    2.0 * r * r * (d / (2.0 * r)).acos() - 0.5 * d * (4.0 * r * r - d * d).sqrt()
}

fn pdist(a: &Point, b: &Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

impl CylinderChain {
    /// Checks the step bounds, the length bounds, the overlaps and the cover;
    /// returns the first violation.
    pub fn check(&self, cover: &[Point], t_end: f64) -> std::result::Result<(), String> {
        let th = self.theta;
        let eps = 1e-9 * (1.0 + self.times.last().copied().unwrap_or(0.0).abs());
        for w in self.times.windows(2) {
            let d = w[1] - w[0];
            if d < 7.0 * th - eps || d > 7.5 * th + eps {
                return Err(format!("step {d} outside [7, 7.5] theta"));
            }
        }
        if (self.times[self.m] - (t_end - 8.0 * th)).abs() > eps {
            return Err("chain does not end at t_end - 8 theta".into());
        }
        let lo = 14.max(self.n);
        let hi = 51.max(3 * (self.n + 3));
        if self.m < lo || self.m > hi {
            return Err(format!("m = {} outside [{lo}, {hi}]", self.m));
        }
        if self.points.len() != self.m + 1 {
            return Err("point sequence length differs from m + 1".into());
        }
        if !(self.mu > 0.0) || self.overlaps.iter().any(|o| *o < self.mu * (1.0 - 1e-12)) {
            return Err("overlap below mu".into());
        }
        if let Some(p) = cover.iter().find(|p| self.net.iter().all(|q| pdist(p, q) >= self.r0)) {
            return Err(format!("point {p:?} not covered by the net"));
        }
        Ok(())
    }
}

/// Greedy overlapping net of `d_points` plus the time sequence
/// `s_j = t_start + j (7 theta + sigma / m)` ending at `t_end - 8 theta`.
#[allow(clippy::too_many_arguments)]
pub fn build_chain(
    dim: usize,
    d_points: &[Point],
    r0: f64,
    tau: f64,
    diam_bound: f64,
    x_start: Point,
    x_end: Point,
    t_start: f64,
    t_end: f64,
) -> Result<CylinderChain> {
    if d_points.is_empty() {
        return Err(Error::EmptyRegion);
    }
    if !(r0 > 0.0 && tau > 0.0) {
        return Err(Error::invalid("r0 and tau must be positive"));
    }
    let span = t_end - t_start;
    if !(span >= tau * (1.0 - 1e-12) && span <= 3.0 * tau * (1.0 + 1e-12)) {
        return Err(Error::PreconditionUnmet(format!("t_end - t_start = {span} outside [tau, 3 tau]")));
    }
    let diam = d_points.iter().flat_map(|a| d_points.iter().map(move |b| pdist(a, b))).fold(0.0, f64::max);
    if diam > diam_bound {
        return Err(Error::PreconditionUnmet(format!("diam(D) = {diam} exceeds R = {diam_bound}")));
    }
    // net: grow from x_start, each new centre within r0 of the net (so its
    // ball meets an existing one in at least lens(r0)); x_end is appended last
    let mut net = vec![x_start];
    let mut covered: Vec<bool> = d_points.iter().map(|p| pdist(p, &x_start) < r0).collect();
    let mut dnet: Vec<f64> = d_points.iter().map(|p| pdist(p, &x_start)).collect();
    while covered.iter().any(|c| !c) {
        let mut cand: Vec<usize> = (0..d_points.len()).filter(|&k| dnet[k] > 0.0 && dnet[k] <= r0).collect();
        // farthest first keeps the net small
        cand.sort_by(|&a, &b| dnet[b].total_cmp(&dnet[a]));
        let pick = cand.into_iter().find(|&k| d_points.iter().enumerate().any(|(j, q)| !covered[j] && pdist(&d_points[k], q) < r0));
        let Some(k) = pick else {
            return Err(Error::NetFailure(format!("D is not connected at scale r0 = {r0}")));
        };
        let p = d_points[k];
        net.push(p);
        for (j, q) in d_points.iter().enumerate() {
            let d = pdist(&p, q);
            covered[j] |= d < r0;
            dnet[j] = dnet[j].min(d);
        }
    }
    if pdist(&x_start, &x_end) > 0.0 {
        if net.iter().all(|q| pdist(q, &x_end) > r0) {
            return Err(Error::NetFailure("x_end is not covered by the net".into()));
        }
        if let Some(k) = net.iter().position(|q| pdist(q, &x_end) == 0.0) {
            net.remove(k);
        }
        net.push(x_end);
    }
    let mu = lens_measure(dim, r0, r0);
    let nn = net.len();
    let adj: Vec<Vec<usize>> = (0..nn).map(|a| (0..nn).filter(|&b| b != a && lens_measure(dim, r0, pdist(&net[a], &net[b])) >= mu).collect()).collect();
    let last = if pdist(&x_start, &x_end) > 0.0 { nn - 1 } else { 0 };
    // BFS path from x_start (index 0) to x_end (last index)
    let mut prev = vec![usize::MAX; nn];
    let mut queue = VecDeque::from([0usize]);
    prev[0] = 0;
    while let Some(a) = queue.pop_front() {
        for &b in &adj[a] {
            if prev[b] == usize::MAX {
                prev[b] = a;
                queue.push_back(b);
            }
        }
    }
    if prev[last] == usize::MAX {
        return Err(Error::NetFailure("endpoints are not linked by overlapping balls".into()));
    }
    let mut path = vec![last];
    while *path.last().expect("nonempty") != 0 {
        let p = prev[*path.last().expect("nonempty")];
        path.push(p);
    }
    path.reverse();
    let n = nn - 1;
    let theta = tau / 7.0 * (1.0 / 17.0f64).min(1.0 / (n as f64 + 3.0));
    let total = t_end - 8.0 * theta - t_start;
    let m = (total / (7.0 * theta)).floor() as usize;
    let sigma = total - 7.0 * theta * m as f64;
    let times: Vec<f64> = (0..=m).map(|j| t_start + j as f64 * (7.0 * theta + sigma / m as f64)).collect();
    if path.len() > m + 1 {
        return Err(Error::NetFailure(format!("path of {} points longer than the chain", path.len())));
    }
    let mut points: Vec<Point> = path.iter().map(|&k| net[k]).collect();
    while points.len() < m + 1 {
        points.push(net[last]);
    }
    let overlaps = points.windows(2).map(|w| lens_measure(dim, r0, pdist(&w[0], &w[1]))).collect();
    Ok(CylinderChain { theta, net, n, points, times, m, overlaps, mu, r0 })
}

#[derive(Clone, Debug)]
pub struct MaxPrincipleVerdict {
    pub holds: bool,
    /// `max_t ||v^-(t)|| / (e^{-gamma (t - t0)} ||v^-(t0)||)`.
    pub worst_ratio: f64,
    pub measured_rate: f64,
    pub delta: f64,
    pub measure: f64,
}

/// Small-volume maximum principle on `region` inside the halfspace cells
/// `half`: checks `||v^-(t)||_{L^inf(H)} <= 1.05 e^{-gamma (t-t0)} ||v^-(t0)||`.
#[allow(clippy::too_many_arguments)]
pub fn verify_small_volume_mp(
    vtraj: &Trajectory,
    op: &NonlocalOperator,
    half: &[usize],
    region: &[usize],
    c: &LinearCoefficient,
    gamma_rate: f64,
    params: &FracParams,
    residual_tol: f64,
) -> Result<MaxPrincipleVerdict> {
    let grid = &op.grid;
    let delta = small_volume_delta(gamma_rate, c.c_inf, params)?;
    let measure = region.len() as f64 * grid.weight();
    if measure > delta {
        return Err(Error::PreconditionUnmet(format!("region measure {measure} exceeds delta = {delta}")));
    }
    let res = linear_supersolution_residual(vtraj, c, op, region)?;
    // one-sided differences at the two ends are skipped
    let inner = if res.len() > 2 { &res[1..res.len() - 1] } else { &res[..] };
    let worst_res = inner.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    if worst_res < -residual_tol {
        return Err(Error::PreconditionUnmet(format!("supersolution residual {worst_res} below -{residual_tol}")));
    }
    let mut in_region = vec![false; grid.len()];
    for &i in region {
        in_region[i] = true;
    }
    for (k, v) in vtraj.states.iter().enumerate() {
        if let Some(&i) = half.iter().find(|&&i| !in_region[i] && v[i] < 0.0) {
            return Err(Error::PreconditionUnmet(format!("v < 0 outside the region at t = {}, x = {:?}", vtraj.times[k], grid.center(i))));
        }
    }
    let neg: Vec<f64> = vtraj.states.iter().map(|v| half.iter().fold(0.0f64, |m, &i| m.max(-v[i]))).collect();
    let t0 = vtraj.times[0];
    if neg[0] == 0.0 {
        let holds = neg.iter().all(|x| *x == 0.0);
        return Ok(MaxPrincipleVerdict { holds, worst_ratio: 0.0, measured_rate: f64::INFINITY, delta, measure });
    }
    let mut worst = 0.0f64;
    let mut rate = f64::INFINITY;
    for (k, &nv) in neg.iter().enumerate().skip(1) {
        let dt = vtraj.times[k] - t0;
        worst = worst.max(nv / ((-gamma_rate * dt).exp() * neg[0]));
        if nv > 0.0 {
            rate = rate.min(-(nv / neg[0]).ln() / dt);
        }
    }
    Ok(MaxPrincipleVerdict { holds: worst <= 1.05, worst_ratio: worst, measured_rate: rate, delta, measure })
}

#[derive(Clone, Copy, Debug)]
pub struct HarnackReport {
    pub inf_plus: f64,
    pub mean_minus: f64,
    pub sup_negative: f64,
    pub quotient: f64,
}

/// Measured terms of the Harnack inequality on `T+ = [t0+3tau, t0+4tau]`,
/// `T- = [t0+tau, t0+2tau]`; requires `dist(D, complement of U) >= 4 r0`.
#[allow(clippy::too_many_arguments)]
pub fn harnack_quotient(traj: &Trajectory, grid: &Grid, d_cells: &[usize], u_cells: &[usize], t0: f64, tau: f64, r0: f64) -> Result<HarnackReport> {
    if d_cells.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let mut in_u = vec![false; grid.len()];
    for &i in u_cells {
        in_u[i] = true;
    }
    if let Some(&i) = d_cells.iter().find(|&&i| !in_u[i]) {
        return Err(Error::GeometryViolation(format!("D cell at {:?} is not in U", grid.center(i))));
    }
    // lattice cells just outside U
    let mut rim = Vec::new();
    for &i in u_cells {
        for nb in grid.face_neighbours(grid.cell_index(i)) {
            if grid.find(nb).is_none_or(|k| !in_u[k]) {
                rim.push(grid.lattice_center(nb));
            }
        }
    }
    let h = grid.h();
    let gap = d_cells
        .iter()
        .flat_map(|&i| rim.iter().map(move |q| pdist(&grid.center(i), q)))
        .fold(f64::INFINITY, f64::min)
        - h / 2.0;
    if gap < 4.0 * r0 - 1e-12 {
        return Err(Error::GeometryViolation(format!("dist(D, boundary of U) = {gap} < 4 r0 = {}", 4.0 * r0)));
    }
    let t_last = *traj.times.last().ok_or_else(|| Error::TooShort("empty trajectory".into()))?;
    if traj.times[0] > t0 + 1e-12 || t_last < t0 + 4.0 * tau - 1e-9 {
        return Err(Error::TooShort(format!("trajectory does not cover [{t0}, {}]", t0 + 4.0 * tau)));
    }
    let plus = traj.window(t0 + 3.0 * tau, t0 + 4.0 * tau);
    let minus = traj.window(t0 + tau, t0 + 2.0 * tau);
    if plus.is_empty() || minus.is_empty() {
        return Err(Error::TooShort("no snapshots in T+ or T-".into()));
    }
    let inf_plus = plus.iter().flat_map(|&k| d_cells.iter().map(move |&i| traj.states[k][i])).fold(f64::INFINITY, f64::min);
    let total: f64 = minus.iter().map(|&k| d_cells.iter().map(|&i| traj.states[k][i]).sum::<f64>()).sum();
    let mean_minus = total / (minus.len() * d_cells.len()) as f64;
    let all = traj.window(t0, t0 + 4.0 * tau);
    let sup_negative = all.iter().flat_map(|&k| u_cells.iter().map(move |&i| -traj.states[k][i])).fold(0.0, f64::max);
    Ok(HarnackReport { inf_plus, mean_minus, sup_negative, quotient: inf_plus / mean_minus })
}

#[derive(Clone, Copy, Debug)]
pub struct SubsolutionVerdict {
    pub holds: bool,
    /// `min v / (sigma1 e^{-gamma (t-t0)} Psi(x - x0))` over `B_rho(x0)`.
    pub min_ratio: f64,
}

/// Checks the hypotheses (ii)-(iv) and `sigma1 >= q sigma0`, then the lower
/// bound `v >= sigma1 e^{-gamma (t-t0)} Psi(x - x0)` on `B_rho(x0)` with
/// slack 1.05.  `half` lists the cells of the halfspace.
#[allow(clippy::too_many_arguments)]
pub fn verify_subsolution_bound(
    vtraj: &Trajectory,
    grid: &Grid,
    half: &[usize],
    x0: Point,
    sigma0: f64,
    sigma1: f64,
    gamma_rate: f64,
    q: f64,
    eig: &Eigenpair,
) -> Result<SubsolutionVerdict> {
    let rho = eig.rho;
    let t0 = vtraj.times[0];
    let near: Vec<usize> = half.iter().copied().filter(|&i| pdist(&grid.center(i), &x0) < 2.0 * rho).collect();
    let far: Vec<usize> = half.iter().copied().filter(|&i| pdist(&grid.center(i), &x0) >= 2.0 * rho).collect();
    let ball: Vec<usize> = near.iter().copied().filter(|&i| pdist(&grid.center(i), &x0) < rho).collect();
    if ball.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let psi: Vec<f64> = ball.iter().map(|&i| {
        let c = grid.center(i);
        eig.eval(&[c[0] - x0[0], c[1] - x0[1]])
    }).collect();
    if sigma1 < q * sigma0 {
        return Err(Error::PreconditionUnmet(format!("sigma1 = {sigma1} < q sigma0 = {}", q * sigma0)));
    }
    for (k, v) in vtraj.states.iter().enumerate() {
        if let Some(&i) = near.iter().find(|&&i| v[i] < 0.0) {
            return Err(Error::PreconditionUnmet(format!("(ii): v < 0 in B_2rho at t = {}, x = {:?}", vtraj.times[k], grid.center(i))));
        }
        let neg = far.iter().fold(0.0f64, |m, &i| m.max(-v[i]));
        let env = sigma0 * (-(gamma_rate + 1.0) * (vtraj.times[k] - t0)).exp();
        if neg > env {
            return Err(Error::PreconditionUnmet(format!("(iii): ||v^-|| = {neg} exceeds {env} at t = {}", vtraj.times[k])));
        }
    }
    if let Some((j, _)) = ball.iter().enumerate().find(|(j, &i)| vtraj.states[0][i] < sigma1 * psi[*j]) {
        return Err(Error::PreconditionUnmet(format!("(iv): v(t0) < sigma1 Psi at x = {:?}", grid.center(ball[j]))));
    }
    let mut min_ratio = f64::INFINITY;
    for (k, v) in vtraj.states.iter().enumerate() {
        let e = sigma1 * (-gamma_rate * (vtraj.times[k] - t0)).exp();
        for (j, &i) in ball.iter().enumerate() {
            if psi[j] > 0.0 {
                min_ratio = min_ratio.min(v[i] / (e * psi[j]));
            }
        }
    }
    Ok(SubsolutionVerdict { holds: min_ratio * 1.05 >= 1.0, min_ratio })
}

#[derive(Clone, Copy, Debug)]
pub struct BoundaryGrowth {
    pub sup: f64,
    pub t: f64,
    pub x: Point,
}

/// `sup |u(t, x)| / dist(x, boundary)^s` over snapshots with `t >= t_min`.
pub fn boundary_growth(traj: &Trajectory, grid: &Grid, domain: &Domain, s: f64, t_min: f64) -> BoundaryGrowth {
    let dist: Vec<f64> = grid.centers().iter().map(|c| domain.boundary_distance(c).powf(s)).collect();
    let mut best = BoundaryGrowth { sup: 0.0, t: t_min, x: [0.0, 0.0] };
    for (k, u) in traj.states.iter().enumerate() {
        if traj.times[k] < t_min {
            continue;
        }
        for (i, v) in u.iter().enumerate() {
            let q = v.abs() / dist[i];
            if q > best.sup {
                best = BoundaryGrowth { sup: q, t: traj.times[k], x: grid.center(i) };
            }
        }
    }
    best
}

/// Flags growth of a supremum under `h -> h/2` beyond the relative tolerance.
pub fn divergent_under_refinement(coarse: f64, fine: f64, rel: f64) -> bool {
    fine > coarse * (1.0 + rel)
}

/// Max of `|u(t,x) - u(t',x')| / (|x - x'| + |t - t'|^{1/2s})^alpha` over
/// snapshots in `window` and cells of `region`.
pub fn holder_seminorm(traj: &Trajectory, grid: &Grid, region: &[usize], alpha: f64, s: f64, window: (f64, f64)) -> Result<f64> {
    if region.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let snaps = traj.window(window.0, window.1);
    if snaps.is_empty() {
        return Err(Error::TooShort("no snapshots in the window".into()));
    }
    let centers: Vec<Point> = region.iter().map(|&i| grid.center(i)).collect();
    let best = snaps
        .par_iter()
        .enumerate()
        .map(|(a, &ka)| {
            let mut m = 0.0f64;
            for &kb in &snaps[a..] {
                let dt = (traj.times[kb] - traj.times[ka]).abs().powf(1.0 / (2.0 * s));
                for (p, &i) in region.iter().enumerate() {
                    let ua = traj.states[ka][i];
                    let start = if ka == kb { p + 1 } else { 0 };
                    for (q, &j) in region.iter().enumerate().skip(start) {
                        let d = pdist(&centers[p], &centers[q]) + dt;
                        if d > 0.0 {
                            m = m.max((ua - traj.states[kb][j]).abs() / d.powf(alpha));
                        }
                    }
                }
            }
            m
        })
        .collect::<Vec<f64>>();
    Ok(best.into_iter().fold(0.0, f64::max))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Alternative {
    Positive,
    Zero,
    /// Neither branch: a counterexample candidate.
    Mixed,
}

/// Strong-positivity alternative for a profile: `min V > tol` or `max |V| < tol`.
pub fn positivity_alternative(z: &[f64], grid: &Grid, lambda: f64, tol: f64) -> Result<Alternative> {
    let d = reflect_diff(z, lambda, grid)?;
    Ok(if d.min() > tol {
        Alternative::Positive
    } else if d.abs_max() < tol {
        Alternative::Zero
    } else {
        Alternative::Mixed
    })
}

/// `I(mu) = inf_{Omega_mu} V_mu z` at `lambda - eps / 2^k`, `k = 0..levels`,
/// and the jumps `|I(lambda) - I(lambda - eps / 2^k)|`.
pub fn left_continuity_probe(z: &[f64], grid: &Grid, lambda: f64, eps: f64, levels: usize) -> Result<Vec<f64>> {
    let at = reflect_diff(z, lambda, grid)?.min();
    (0..=levels)
        .map(|k| reflect_diff(z, lambda - eps / 2f64.powi(k as i32), grid).map(|d| (d.min() - at).abs()))
        .collect()
}
