//! Kernel-level numerics of the fractional Laplacian with exterior
//! Dirichlet data: normalisation constants, killing potentials, the dense
//! operator, the quadratic form and the antisymmetric (half-space) kernels.
//!
//! Off-diagonal entries are exact cell integrals of the kernel,
//! `W_ij = c int_{cell_j} |x_i - y|^{-N-2s} dy`, rather than point samples.
//! They only depend on the lattice offset and are tabulated once.  The
//! diagonal is `kappa_Omega(x_i) + sum_{j != i} W_ij`, so `A 1 = kappa`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::geometry::{reflect, Domain, Grid, Point, Segments};
use crate::quadrature::{self, Tolerance};
use crate::special::{gamma, unit_ball_volume};
use crate::{Error, Result};

/// Relative tolerance used for every exterior/cell integral.
pub const QUAD_RTOL: f64 = 1e-11;

/// Default upper bound on the number of Omega-cells for dense assembly.
pub const DEFAULT_CAP: usize = 40_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FracParams {
    pub n: usize,
    pub s: f64,
    pub c: f64,
}

impl FracParams {
    pub fn new(n: usize, s: f64) -> Result<Self> {
        Ok(FracParams { n, s, c: frac_constant(n, s)? })
    }

    fn exponent(&self) -> f64 {
        self.n as f64 + 2.0 * self.s
    }

    /// `c |z|^{-N-2s}`
    pub fn kernel(&self, r: f64) -> f64 {
        self.c * r.powf(-self.exponent())
    }
}

/// `c_{N,s} = s(1-s) pi^{-N/2} 4^s Gamma(N/2 + s) / Gamma(2 - s)`.
pub fn frac_constant(n: usize, s: f64) -> Result<f64> {
    if !(1..=2).contains(&n) {
        return Err(Error::OutOfRange { name: "N", value: n as f64, expected: "1 or 2" });
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::OutOfRange { name: "s", value: s, expected: "0 < s < 1" });
    }
    let nh = n as f64 / 2.0;
    Ok(s * (1.0 - s) * PI.powf(-nh) * 4f64.powf(s) * gamma(nh + s) / gamma(2.0 - s))
}

/// Half-space `{x1 > lambda}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Halfspace {
    pub lambda: f64,
}

impl Halfspace {
    pub fn new(lambda: f64) -> Self {
        Halfspace { lambda }
    }
    pub fn dist(&self, x: &Point) -> f64 {
        x[0] - self.lambda
    }
    pub fn contains(&self, x: &Point) -> bool {
        x[0] > self.lambda
    }
    pub fn reflect(&self, x: &Point) -> Point {
        reflect(x, self.lambda)
    }
    /// Ray parameters `t >= 0` for which `x + t d` stays in the half-space.
    pub fn segments(&self, x: &Point, d: &Point) -> Segments {
        if d[0] < 0.0 {
            Segments::until(self.dist(x) / -d[0])
        } else {
            Segments::from(0.0)
        }
    }
}

/// `int over directions of g(direction)`: the two unit directions in 1D, the
/// unit circle in 2D (adaptive, split at the supplied angles).
pub fn angular_integral(
    dim: usize,
    breaks: &[f64],
    rtol: f64,
    g: impl Fn(&Point) -> f64,
) -> Result<f64> {
    if dim == 1 {
        return Ok(g(&[1.0, 0.0]) + g(&[-1.0, 0.0]));
    }
    let mut cuts: Vec<f64> = breaks
        .iter()
        .map(|a| a.rem_euclid(2.0 * PI))
        .chain([0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2, 2.0 * PI])
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        total += quadrature::integrate(
            |th| g(&[th.cos(), th.sin()]),
            w[0],
            w[1],
            Tolerance { abs: 0.0, rel: rtol, max_intervals: 4000 },
        )?;
    }
    Ok(total)
}

/// `kappa_Omega(x) = c int_{R^N \ Omega} |x - y|^{-N-2s} dy` at one point.
pub fn killing_at(domain: &Domain, params: &FracParams, x: &Point) -> Result<f64> {
    let breaks = domain.corner_angles(x);
    let v = angular_integral(domain.dim, &breaks, QUAD_RTOL, |d| {
        domain.inside_segments(x, d).complement().radial_mass(params.s)
    })?;
    Ok(params.c * v)
}

/// Killing potential at every Omega-cell center.
pub fn killing_potential(grid: &Grid, domain: &Domain, params: &FracParams) -> Result<Vec<f64>> {
    grid.centers().par_iter().map(|x| killing_at(domain, params, x)).collect()
}

/// `kappa_H` by the closed form `4^s Gamma(1/2 + s) / (2 sqrt(pi) Gamma(1 - s)) dist^{-2s}`.
pub fn halfspace_potential(x: &Point, h: &Halfspace, params: &FracParams) -> Result<f64> {
    let d = h.dist(x);
    if d == 0.0 {
        return Err(Error::OnBoundary);
    }
    if d < 0.0 {
        return Err(Error::invalid("point lies outside the half-space"));
    }
    let s = params.s;
    Ok(4f64.powf(s) * gamma(0.5 + s) / (2.0 * PI.sqrt() * gamma(1.0 - s)) * d.powf(-2.0 * s))
}

/// `kappa_H` by angular quadrature of the exterior integral.
pub fn halfspace_potential_quadrature(x: &Point, h: &Halfspace, params: &FracParams) -> Result<f64> {
    if h.dist(x) <= 0.0 {
        return Err(Error::OnBoundary);
    }
    let v = angular_integral(params.n, &[], QUAD_RTOL, |d| h.segments(x, d).complement().radial_mass(params.s))?;
    Ok(params.c * v)
}

/// `J(x, y) = c|x-y|^{-N-2s} - c|x-Q(y)|^{-N-2s}` for `x, y` in `H`.
pub fn antisym_kernel(x: &Point, y: &Point, h: &Halfspace, params: &FracParams) -> Result<f64> {
    if x == y {
        return Err(Error::CoincidentPoints);
    }
    if h.dist(x) < 0.0 || h.dist(y) < 0.0 {
        return Err(Error::invalid("antisymmetric kernel needs both points in the half-space"));
    }
    let qy = h.reflect(y);
    Ok(params.kernel(dist(x, y)) - params.kernel(dist(x, &qy)))
}

/// Reduced kernel: `J` evaluated after shifting both points along `e1` so that
/// the farther of the two sits at height `beta` (no shift if either point is
/// already beyond `beta`); zero off `H x H`.
pub fn reduced_kernel(x: &Point, y: &Point, beta: f64, h: &Halfspace, params: &FracParams) -> Result<f64> {
    if x == y {
        return Err(Error::CoincidentPoints);
    }
    let shift = (beta - h.dist(x)).min(beta - h.dist(y)).max(0.0);
    let xs = [x[0] + shift, x[1]];
    let ys = [y[0] + shift, y[1]];
    if h.dist(&xs) <= 0.0 || h.dist(&ys) <= 0.0 {
        return Ok(0.0);
    }
    antisym_kernel(&xs, &ys, h, params)
}

/// Lower bound `K |A|^{-2s/N}` of `int_{R^N \ A} |x-y|^{-N-2s} dy`, with
/// `K = (N/2s) omega_N^{1+2s/N}`.
pub fn volume_bound(measure: f64, params: &FracParams) -> Result<f64> {
    if !(measure > 0.0) {
        return Err(Error::NonpositiveMeasure(measure));
    }
    let (n, s) = (params.n as f64, params.s);
    let k = n / (2.0 * s) * unit_ball_volume(params.n).powf(1.0 + 2.0 * s / n);
    Ok(k * measure.powf(-2.0 * s / n))
}

/// `delta = (c K / (gamma + c_inf))^{N/2s}`: regions of at most this measure
/// have `kappa >= gamma + c_inf`.
pub fn small_volume_delta(gamma_rate: f64, c_inf: f64, params: &FracParams) -> Result<f64> {
    if !(gamma_rate > 0.0 && c_inf > 0.0) {
        return Err(Error::NonpositiveRate { gamma: gamma_rate, c_inf });
    }
    let k = volume_bound(1.0, params)?;
    let n = params.n as f64;
    Ok((params.c * k / (gamma_rate + c_inf)).powf(n / (2.0 * params.s)))
}

fn dist(a: &Point, b: &Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Cell-integrated kernel `W(p, q) = c int_{cell at offset (p,q)} |z|^{-N-2s} dz`
/// for lattice offsets, plus the self-cell potential.
#[derive(Clone, Debug)]
pub struct OffsetKernel {
    params: FracParams,
    h: f64,
    /// `table[p * (m+1) + q]` for `0 <= q <= p <= m` (2D only).
    table: Vec<f64>,
    m: usize,
    gl: (Vec<f64>, Vec<f64>),
}

impl OffsetKernel {
    pub fn new(params: FracParams, h: f64, max_offset: usize) -> Result<Self> {
        let gl = quadrature::gauss_legendre(8);
        let mut k = OffsetKernel { params, h, table: Vec::new(), m: 0, gl };
        if params.n == 2 {
            let m = max_offset;
            let pairs: Vec<(usize, usize)> = (0..=m).flat_map(|p| (0..=p).map(move |q| (p, q))).collect();
            let vals: Vec<f64> = pairs
                .par_iter()
                .map(|&(p, q)| if p == 0 { Ok(f64::NAN) } else { k.cell_integral_2d(p as f64, q as f64) })
                .collect::<Result<_>>()?;
            let mut table = vec![f64::NAN; (m + 1) * (m + 1)];
            for (&(p, q), v) in pairs.iter().zip(vals) {
                table[p * (m + 1) + q] = v;
            }
            k.table = table;
            k.m = m;
        }
        Ok(k)
    }

    /// Rebuilds a kernel from a stored table (see [`OffsetKernel::table`]).
    pub fn from_table(params: FracParams, h: f64, m: usize, table: Vec<f64>) -> Result<Self> {
        let expected = if params.n == 2 { (m + 1) * (m + 1) } else { 0 };
        if table.len() != expected {
            return Err(Error::Format(format!("kernel table has {} entries, expected {expected}", table.len())));
        }
        Ok(OffsetKernel { params, h, table, m, gl: quadrature::gauss_legendre(8) })
    }

    pub fn params(&self) -> &FracParams {
        &self.params
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    /// Largest tabulated offset and the table (empty in 1D).
    pub fn table(&self) -> (usize, &[f64]) {
        (self.m, &self.table)
    }

    /// `c int_{[p-1/2,p+1/2]x[q-1/2,q+1/2]} |z|^{-2-2s} dz`, scaled by `h^{-2s}`.
    fn cell_integral_2d(&self, p: f64, q: f64) -> Result<f64> {
        let e = 1.0 + self.params.s;
        let raw = if p.max(q) <= 3.0 {
            let tol = Tolerance::new(0.0, 1e-13);
            let mut err = None;
            let v = quadrature::adaptive(
                |u| {
                    match quadrature::integrate(|w| (u * u + w * w).powf(-e), q - 0.5, q + 0.5, tol) {
                        Ok(v) => v,
                        Err(e) => {
                            err = Some(e);
                            0.0
                        }
                    }
                },
                p - 0.5,
                p + 0.5,
                tol,
            );
            if let Some(e) = err {
                return Err(e);
            }
            if !v.converged {
                return Err(Error::QuadratureFailure(format!("cell integral at offset ({p}, {q})")));
            }
            v.value
        } else {
            let (x, w) = &self.gl;
            let mut acc = 0.0;
            for (xa, wa) in x.iter().zip(w) {
                let u = p + 0.5 * xa;
                for (xb, wb) in x.iter().zip(w) {
                    let v = q + 0.5 * xb;
                    acc += wa * wb * (u * u + v * v).powf(-e);
                }
            }
            0.25 * acc
        };
        Ok(self.params.c * self.h.powf(-2.0 * self.params.s) * raw)
    }

    /// Weight for the lattice offset `(p, q)`; `(0, 0)` is not allowed.
    pub fn weight(&self, p: i64, q: i64) -> f64 {
        let s = self.params.s;
        let c = self.params.c;
        if self.params.n == 1 {
            let d = p.unsigned_abs() as f64 * self.h;
            let hh = 0.5 * self.h;
            return c / (2.0 * s) * ((d - hh).powf(-2.0 * s) - (d + hh).powf(-2.0 * s));
        }
        let (a, b) = (p.unsigned_abs() as usize, q.unsigned_abs() as usize);
        let (a, b) = if a >= b { (a, b) } else { (b, a) };
        if a <= self.m {
            self.table[a * (self.m + 1) + b]
        } else {
            self.cell_integral_2d(a as f64, b as f64).expect("far-field rule is closed")
        }
    }

    /// `c int_{R^N \ cell} |x - y|^{-N-2s} dy` at the cell center.
    pub fn self_potential(&self) -> f64 {
        let s = self.params.s;
        let base = self.params.c / (2.0 * s) * (0.5 * self.h).powf(-2.0 * s);
        if self.params.n == 1 {
            2.0 * base
        } else {
            let q = quadrature::integrate(
                |t: f64| t.cos().powf(2.0 * s),
                0.0,
                FRAC_PI_4,
                Tolerance::new(0.0, 1e-14),
            )
            .expect("smooth integrand");
            8.0 * base * q
        }
    }
}

/// Dense exterior-Dirichlet fractional Laplacian on the Omega-cells.
#[derive(Clone, Debug)]
pub struct NonlocalOperator {
    pub grid: Grid,
    pub matrix: DMatrix<f64>,
    pub kappa: Vec<f64>,
    pub kernel: OffsetKernel,
    /// Relative tolerance of every quadrature entering the entries.
    pub quad_rtol: f64,
}

/// Assembles the operator; fails with `CapExceeded` above `cap` cells.
pub fn assemble_operator(grid: &Grid, domain: &Domain, params: &FracParams, cap: usize) -> Result<NonlocalOperator> {
    let n = grid.len();
    if n > cap {
        return Err(Error::CapExceeded { n, cap });
    }
    if params.n != grid.dim() || params.n != domain.dim {
        return Err(Error::invalid("dimension mismatch between grid, domain and parameters"));
    }
    let kappa = killing_potential(grid, domain, params)?;
    let max_offset = extent(grid);
    let kernel = OffsetKernel::new(*params, grid.h(), max_offset)?;
    let mut data = vec![0.0; n * n];
    data.par_chunks_mut(n).enumerate().for_each(|(j, col)| {
        let cj = grid.cell_index(j);
        let mut diag = 0.0;
        for (i, entry) in col.iter_mut().enumerate() {
            if i == j {
                continue;
            }
            let ci = grid.cell_index(i);
            let w = kernel.weight(ci[0] - cj[0], ci[1] - cj[1]);
            *entry = -w;
            diag += w;
        }
        col[j] = kappa[j] + diag;
    });
    Ok(NonlocalOperator {
        grid: grid.clone(),
        matrix: DMatrix::from_vec(n, n, data),
        kappa,
        kernel,
        quad_rtol: QUAD_RTOL,
    })
}

fn extent(grid: &Grid) -> usize {
    let mut lo = [i64::MAX; 2];
    let mut hi = [i64::MIN; 2];
    for i in 0..grid.len() {
        let c = grid.cell_index(i);
        for k in 0..2 {
            lo[k] = lo[k].min(c[k]);
            hi[k] = hi[k].max(c[k]);
        }
    }
    (hi[0] - lo[0]).max(hi[1] - lo[1]) as usize
}

impl NonlocalOperator {
    pub fn len(&self) -> usize {
        self.kappa.len()
    }
    pub fn is_empty(&self) -> bool {
        self.kappa.is_empty()
    }

    /// `A u` with fixed-order row sums (deterministic under any thread count).
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let n = self.len();
        assert_eq!(u.len(), n);
        // A is symmetric: row i == column i, which is contiguous.
        (0..n)
            .into_par_iter()
            .map(|i| self.matrix.column(i).iter().zip(u).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Quadratic form `w [1/2 sum_ij W_ij (u_i-u_j)(v_i-v_j) + sum_i kappa_i u_i v_i]`,
    /// summed directly from the kernel table (not from the matrix).
    pub fn quadratic_form(&self, u: &[f64], v: &[f64]) -> f64 {
        let n = self.len();
        let g = &self.grid;
        let pair: f64 = (0..n)
            .into_par_iter()
            .map(|i| {
                let ci = g.cell_index(i);
                let mut acc = 0.0;
                for j in (i + 1)..n {
                    let cj = g.cell_index(j);
                    let w = self.kernel.weight(ci[0] - cj[0], ci[1] - cj[1]);
                    acc += w * (u[i] - u[j]) * (v[i] - v[j]);
                }
                acc
            })
            .collect::<Vec<f64>>()
            .iter()
            .sum();
        let local: f64 = (0..n).map(|i| self.kappa[i] * u[i] * v[i]).sum();
        g.weight() * (pair + local)
    }

    /// `w sum_i u_i (A v)_i`
    pub fn pairing(&self, u: &[f64], v: &[f64]) -> f64 {
        let av = self.apply(v);
        self.grid.weight() * u.iter().zip(&av).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn to_dvector(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }
}

/// `c int_{H \ Omega} J(x, y) dy` for `x` in `H`, by angular quadrature.
pub fn halfspace_exterior_term(x: &Point, domain: &Domain, h: &Halfspace, params: &FracParams) -> Result<f64> {
    let qx = h.reflect(x);
    let mut breaks = domain.corner_angles(x);
    breaks.extend(domain.corner_angles(&qx).into_iter().map(|a| PI - a));
    breaks.extend(domain.plane_crossings(h.lambda).iter().map(|p| (p[1] - x[1]).atan2(p[0] - x[0])));
    let v = angular_integral(params.n, &breaks, QUAD_RTOL, |d| {
        let in_h = h.segments(x, d);
        let direct = in_h.intersect(&domain.inside_segments(x, d).complement());
        let qd = [-d[0], d[1]];
        let mirrored = in_h.complement().intersect(&domain.inside_segments(&qx, &qd).complement());
        direct.radial_mass(params.s) - mirrored.radial_mass(params.s)
    })?;
    Ok(params.c * v)
}

/// Both sides of the antisymmetric splitting of the energy, on a grid whose
/// Omega is a union of cells and a plane through cell faces.
#[derive(Clone, Debug)]
pub struct AntisymmetricSplit {
    pub halfspace: Halfspace,
    /// Omega-cells strictly inside `H`.
    pub cells: Vec<usize>,
    /// Mirror cell of each entry of `cells` (`None` if it is exterior).
    pub mirrors: Vec<Option<usize>>,
    /// `2 kappa_H` at each cell.
    pub kappa_h: Vec<f64>,
    /// `c int_{H \ Omega} J(x_i, y) dy` at each cell.
    pub exterior: Vec<f64>,
}

impl AntisymmetricSplit {
    pub fn new(op: &NonlocalOperator, domain: &Domain, lambda: f64) -> Result<Self> {
        let g = &op.grid;
        let r = lambda / g.h();
        if (r - r.round()).abs() > 1e-9 {
            return Err(Error::invalid("the plane must run along cell faces (lambda a multiple of h)"));
        }
        let h = Halfspace::new(lambda);
        let params = op.kernel.params();
        let cells = g.select(|c| h.contains(c));
        if cells.is_empty() {
            return Err(Error::EmptyCap { lambda });
        }
        let mirrors = cells.iter().map(|&i| g.mirror(i, lambda)).collect();
        let kappa_h = cells
            .iter()
            .map(|&i| halfspace_potential(&g.center(i), &h, params).map(|k| 2.0 * k))
            .collect::<Result<_>>()?;
        let exterior = cells
            .par_iter()
            .map(|&i| halfspace_exterior_term(&g.center(i), domain, &h, params))
            .collect::<Result<_>>()?;
        Ok(AntisymmetricSplit { halfspace: h, cells, mirrors, kappa_h, exterior })
    }

    /// Cell-averaged `J` between H-cells `a` and `b` (positions in `cells`).
    fn jbar(&self, op: &NonlocalOperator, a: usize, b: usize) -> f64 {
        let g = &op.grid;
        let ca = g.cell_index(self.cells[a]);
        let cb = g.cell_index(self.cells[b]);
        let k = (2.0 * self.halfspace.lambda / g.h()).round() as i64;
        let qb = [k - 1 - cb[0], cb[1]];
        op.kernel.weight(ca[0] - cb[0], ca[1] - cb[1]) - op.kernel.weight(ca[0] - qb[0], ca[1] - qb[1])
    }

    /// Builds an antisymmetric grid function from values on the H-cells whose
    /// mirror is inside; other entries are zero.
    pub fn antisymmetric(&self, n: usize, values: impl Fn(usize) -> f64) -> Vec<f64> {
        let mut v = vec![0.0; n];
        for (a, (&i, m)) in self.cells.iter().zip(&self.mirrors).enumerate() {
            if let Some(j) = m {
                let x = values(a);
                v[i] = x;
                v[*j] = -x;
            }
        }
        v
    }

    /// `E(v, phi)` via the operator matrix.
    pub fn direct(&self, op: &NonlocalOperator, v: &[f64], phi: &[f64]) -> f64 {
        op.pairing(phi, v)
    }

    /// `1/2 sum (v_a-v_b)(phi_a-phi_b) k_ab w^2 + sum (2 kappa_H + ext) v phi w`
    /// over H-cells, with `k = J` cell-averaged; `kernel_override` replaces the
    /// kernel for a pair (used for the reduced kernel).
    pub fn decomposed_with(
        &self,
        op: &NonlocalOperator,
        v: &[f64],
        phi: &[f64],
        kernel_override: impl Fn(usize, usize) -> Option<f64> + Sync,
    ) -> f64 {
        let w = op.grid.weight();
        let m = self.cells.len();
        let pair: f64 = (0..m)
            .into_par_iter()
            .map(|a| {
                let ia = self.cells[a];
                let mut acc = 0.0;
                for b in (a + 1)..m {
                    let ib = self.cells[b];
                    let dphi = phi[ia] - phi[ib];
                    if dphi == 0.0 {
                        continue;
                    }
                    let k = kernel_override(a, b).unwrap_or_else(|| self.jbar(op, a, b));
                    acc += (v[ia] - v[ib]) * dphi * k;
                }
                acc
            })
            .collect::<Vec<f64>>()
            .iter()
            .sum();
        let local: f64 =
            (0..m).map(|a| (self.kappa_h[a] + self.exterior[a]) * v[self.cells[a]] * phi[self.cells[a]]).sum();
        w * (pair + local)
    }

    pub fn decomposed(&self, op: &NonlocalOperator, v: &[f64], phi: &[f64]) -> f64 {
        self.decomposed_with(op, v, phi, |_, _| None)
    }

    /// Same split with the reduced kernel for height `beta` (a multiple of h);
    /// `phi` must vanish on cells within `beta` of the plane.  Pairs beyond
    /// `beta` use the cell-averaged kernel, pairs below use point values of
    /// the reduced kernel (they only multiply zeros of `phi`).
    pub fn decomposed_reduced(&self, op: &NonlocalOperator, v: &[f64], phi: &[f64], beta: f64) -> Result<f64> {
        let g = &op.grid;
        let params = *op.kernel.params();
        for (a, &i) in self.cells.iter().enumerate() {
            if phi[i] != 0.0 && self.halfspace.dist(&g.center(i)) <= beta {
                return Err(Error::invalid(format!("test function is nonzero on cell {a} below height {beta}")));
            }
        }
        let w = g.weight();
        let h = self.halfspace;
        Ok(self.decomposed_with(op, v, phi, |a, b| {
            let x = g.center(self.cells[a]);
            let y = g.center(self.cells[b]);
            if h.dist(&x) > beta || h.dist(&y) > beta {
                None
            } else {
                Some(w * reduced_kernel(&x, &y, beta, &h, &params).unwrap_or(0.0))
            }
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constants() {
        let c = frac_constant(1, 0.5).unwrap();
        assert_relative_eq!(c, 1.0 / PI, max_relative = 1e-13);
        assert_relative_eq!(frac_constant(2, 0.5).unwrap(), 0.5 / PI, max_relative = 1e-13);
        assert_relative_eq!(
            frac_constant(1, 0.25).unwrap(),
            2f64.sqrt() / (4.0 * PI.sqrt()),
            max_relative = 1e-12
        );
        assert!(matches!(frac_constant(1, 1.0), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn killing_on_interval() {
        let d = Domain::interval(1.0).unwrap();
        let p = FracParams::new(1, 0.5).unwrap();
        assert_relative_eq!(killing_at(&d, &p, &[0.0, 0.0]).unwrap(), 2.0 / PI, max_relative = 1e-13);
        let k = killing_at(&d, &p, &[0.9, 0.0]).unwrap();
        assert_relative_eq!(k, (1.0 / 0.1 + 1.0 / 1.9) / PI, max_relative = 1e-12);
    }

    #[test]
    fn killing_on_disk_center() {
        // c * 2 pi r^{-2s} / 2s at the center of a disk of radius r
        let d = Domain::disk(0.7).unwrap();
        let p = FracParams::new(2, 0.3).unwrap();
        let exact = p.c * 2.0 * PI * 0.7f64.powf(-0.6) / 0.6;
        assert_relative_eq!(killing_at(&d, &p, &[0.0, 0.0]).unwrap(), exact, max_relative = 1e-11);
    }

    #[test]
    fn halfspace_closed_form_matches_quadrature() {
        for &(n, s) in &[(1, 0.5), (2, 0.5), (1, 0.2), (2, 0.8)] {
            let p = FracParams::new(n, s).unwrap();
            let h = Halfspace::new(0.3);
            let x = [1.1, 0.4];
            let a = halfspace_potential(&x, &h, &p).unwrap();
            let b = halfspace_potential_quadrature(&x, &h, &p).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-9);
        }
        let p = FracParams::new(1, 0.5).unwrap();
        assert_relative_eq!(
            halfspace_potential(&[1.0, 0.0], &Halfspace::new(0.0), &p).unwrap(),
            1.0 / PI,
            max_relative = 1e-13
        );
    }

    #[test]
    fn antisym_kernel_example() {
        let p = FracParams::new(1, 0.5).unwrap();
        let j = antisym_kernel(&[1.0, 0.0], &[2.0, 0.0], &Halfspace::new(0.0), &p).unwrap();
        assert_relative_eq!(j, 8.0 / (9.0 * PI), max_relative = 1e-13);
    }

    #[test]
    fn volume_constants() {
        let p = FracParams::new(1, 0.5).unwrap();
        assert_relative_eq!(volume_bound(1.0, &p).unwrap(), 4.0, max_relative = 1e-13);
        assert_relative_eq!(volume_bound(0.5, &p).unwrap(), 8.0, max_relative = 1e-13);
        assert_relative_eq!(small_volume_delta(1.0, 1.0, &p).unwrap(), 2.0 / PI, max_relative = 1e-13);
    }

    #[test]
    fn cell_weights_sum_to_self_potential_on_aligned_square() {
        // kappa_i + sum_j W_ij is the exterior potential of cell i alone.
        let d = Domain::rectangle(0.25, 0.25).unwrap();
        let p = FracParams::new(2, 0.4).unwrap();
        let g = Grid::new(&d, 1.0 / 16.0).unwrap();
        let op = assemble_operator(&g, &d, &p, DEFAULT_CAP).unwrap();
        let d0 = op.kernel.self_potential();
        for i in 0..g.len() {
            assert_relative_eq!(op.matrix[(i, i)], d0, max_relative = 1e-9);
        }
    }
}
