//! Domains, uniform cell grids, reflections and caps.
//!
//! Points are stored as `[f64; 2]`; one-dimensional problems leave the second
//! coordinate at zero, so Euclidean distances need no special casing.

use std::collections::VecDeque;

use crate::{Error, Result};

pub type Point = [f64; 2];

/// Axis-aligned open box.  In 1D only the first coordinate is used.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub lo: Point,
    pub hi: Point,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    /// `(-half, half)`
    Interval { half: f64 },
    /// `(-a, a) x (-b, b)`
    Rectangle { half: [f64; 2] },
    /// Centered at the origin.
    Disk { radius: f64 },
    /// Finite union of open boxes.
    Union(Vec<Aabb>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    pub dim: usize,
    pub shape: Shape,
}

fn positive(name: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::OutOfRange { name, value: v, expected: "finite and > 0" })
    }
}

impl Domain {
    pub fn interval(half: f64) -> Result<Self> {
        Ok(Domain { dim: 1, shape: Shape::Interval { half: positive("half_width", half)? } })
    }

    pub fn rectangle(a: f64, b: f64) -> Result<Self> {
        Ok(Domain {
            dim: 2,
            shape: Shape::Rectangle { half: [positive("half_width", a)?, positive("half_height", b)?] },
        })
    }

    pub fn disk(radius: f64) -> Result<Self> {
        Ok(Domain { dim: 2, shape: Shape::Disk { radius: positive("radius", radius)? } })
    }

    pub fn union(dim: usize, boxes: Vec<Aabb>) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::OutOfRange { name: "dim", value: dim as f64, expected: "1 or 2" });
        }
        if boxes.is_empty() {
            return Err(Error::EmptyRegion);
        }
        for b in &boxes {
            for k in 0..dim {
                if !(b.lo[k].is_finite() && b.hi[k].is_finite() && b.hi[k] > b.lo[k]) {
                    return Err(Error::invalid(format!("degenerate box {b:?}")));
                }
            }
        }
        Ok(Domain { dim, shape: Shape::Union(boxes) })
    }

    /// Open-set membership.
    pub fn contains(&self, x: &Point) -> bool {
        match &self.shape {
            Shape::Interval { half } => x[0].abs() < *half,
            Shape::Rectangle { half } => x[0].abs() < half[0] && x[1].abs() < half[1],
            Shape::Disk { radius } => x[0].hypot(x[1]) < *radius,
            Shape::Union(boxes) => boxes.iter().any(|b| (0..self.dim).all(|k| b.lo[k] < x[k] && x[k] < b.hi[k])),
        }
    }

    pub fn bounding_box(&self) -> Aabb {
        match &self.shape {
            Shape::Interval { half } => Aabb { lo: [-half, 0.0], hi: [*half, 0.0] },
            Shape::Rectangle { half } => Aabb { lo: [-half[0], -half[1]], hi: *half },
            Shape::Disk { radius } => Aabb { lo: [-radius, -radius], hi: [*radius, *radius] },
            Shape::Union(boxes) => {
                let mut lo = [f64::INFINITY; 2];
                let mut hi = [f64::NEG_INFINITY; 2];
                for b in boxes {
                    for k in 0..2 {
                        lo[k] = lo[k].min(b.lo[k]);
                        hi[k] = hi[k].max(b.hi[k]);
                    }
                }
                if self.dim == 1 {
                    lo[1] = 0.0;
                    hi[1] = 0.0;
                }
                Aabb { lo, hi }
            }
        }
    }

    /// Largest first coordinate of the closure.
    pub fn max_x1(&self) -> f64 {
        self.bounding_box().hi[0]
    }

    /// `dist(x, boundary)` for `x` inside.  For unions this is the distance
    /// to the boundary of the deepest containing box (exact for disjoint,
    /// non-touching boxes).
    pub fn boundary_distance(&self, x: &Point) -> f64 {
        let box_dist = |lo: &Point, hi: &Point| -> f64 {
            (0..self.dim).map(|k| (x[k] - lo[k]).min(hi[k] - x[k])).fold(f64::INFINITY, f64::min)
        };
        match &self.shape {
            Shape::Interval { half } => half - x[0].abs(),
            Shape::Rectangle { half } => (half[0] - x[0].abs()).min(half[1] - x[1].abs()),
            Shape::Disk { radius } => radius - x[0].hypot(x[1]),
            Shape::Union(boxes) => boxes.iter().map(|b| box_dist(&b.lo, &b.hi)).fold(0.0, f64::max),
        }
    }

    /// Parameter intervals `t >= 0` where `origin + t dir` lies inside.
    /// `dir` must be a unit vector (in 1D: `[+-1, 0]`).
    pub fn inside_segments(&self, origin: &Point, dir: &Point) -> Segments {
        match &self.shape {
            Shape::Interval { half } => {
                let b = Aabb { lo: [-half, 0.0], hi: [*half, 0.0] };
                Segments::from_raw(box_segment(&b, 1, origin, dir).into_iter().collect())
            }
            Shape::Rectangle { half } => {
                let b = Aabb { lo: [-half[0], -half[1]], hi: *half };
                Segments::from_raw(box_segment(&b, 2, origin, dir).into_iter().collect())
            }
            Shape::Disk { radius } => {
                let od = origin[0] * dir[0] + origin[1] * dir[1];
                let c = origin[0] * origin[0] + origin[1] * origin[1] - radius * radius;
                let disc = od * od - c;
                if disc <= 0.0 {
                    return Segments::default();
                }
                let r = disc.sqrt();
                let (t0, t1) = (-od - r, -od + r);
                Segments::from_raw(if t1 > 0.0 { vec![(t0.max(0.0), t1)] } else { vec![] })
            }
            Shape::Union(boxes) => {
                Segments::from_raw(boxes.iter().filter_map(|b| box_segment(b, self.dim, origin, dir)).collect())
            }
        }
    }

    /// Polar angles (seen from `x`) at which the boundary has corners; useful
    /// as breakpoints for angular quadrature.  Empty for smooth domains.
    pub fn corner_angles(&self, x: &Point) -> Vec<f64> {
        let corners = |b: &Aabb| [[b.lo[0], b.lo[1]], [b.hi[0], b.lo[1]], [b.hi[0], b.hi[1]], [b.lo[0], b.hi[1]]];
        let boxes: Vec<Aabb> = match &self.shape {
            Shape::Rectangle { half } => vec![Aabb { lo: [-half[0], -half[1]], hi: *half }],
            Shape::Union(b) if self.dim == 2 => b.clone(),
            _ => vec![],
        };
        boxes
            .iter()
            .flat_map(corners)
            .map(|c| (c[1] - x[1]).atan2(c[0] - x[0]))
            .collect()
    }

    /// Points where the plane `x1 = lambda` meets the boundary (2D only).
    pub fn plane_crossings(&self, lambda: f64) -> Vec<Point> {
        match &self.shape {
            Shape::Rectangle { half } if lambda.abs() < half[0] => vec![[lambda, -half[1]], [lambda, half[1]]],
            Shape::Disk { radius } if lambda.abs() < *radius => {
                let y = (radius * radius - lambda * lambda).sqrt();
                vec![[lambda, -y], [lambda, y]]
            }
            Shape::Union(boxes) if self.dim == 2 => boxes
                .iter()
                .filter(|b| b.lo[0] < lambda && lambda < b.hi[0])
                .flat_map(|b| [[lambda, b.lo[1]], [lambda, b.hi[1]]])
                .collect(),
            _ => vec![],
        }
    }

    /// Checks (D1) on the Omega-cells of `grid`: `(sigma x1, x')` must lie in
    /// the domain for sigma in {-1, -1/2, 0, 1/2, 1}.
    pub fn check_d1(&self, grid: &Grid) -> Result<()> {
        for c in grid.centers() {
            for sigma in [-1.0, -0.5, 0.0, 0.5, 1.0] {
                let p = [sigma * c[0], c[1]];
                if !self.contains(&p) {
                    return Err(Error::GeometryViolation(format!(
                        "(D1) fails: ({}, {}) is in the domain but ({}, {}) is not",
                        c[0], c[1], p[0], p[1]
                    )));
                }
            }
        }
        Ok(())
    }
}

fn box_segment(b: &Aabb, dim: usize, o: &Point, d: &Point) -> Option<(f64, f64)> {
    let mut t0 = 0.0f64;
    let mut t1 = f64::INFINITY;
    for k in 0..dim {
        if d[k].abs() < 1e-300 {
            if !(b.lo[k] < o[k] && o[k] < b.hi[k]) {
                return None;
            }
        } else {
            let a = (b.lo[k] - o[k]) / d[k];
            let c = (b.hi[k] - o[k]) / d[k];
            t0 = t0.max(a.min(c));
            t1 = t1.min(a.max(c));
        }
    }
    (t1 > t0).then_some((t0, t1))
}

/// Sorted, disjoint union of intervals in `[0, inf]`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Segments(pub Vec<(f64, f64)>);

impl Segments {
    pub fn from_raw(mut v: Vec<(f64, f64)>) -> Self {
        v.retain(|&(a, b)| b > a);
        v.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(v.len());
        for (a, b) in v {
            match out.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => out.push((a, b)),
            }
        }
        Segments(out)
    }

    /// `[t, inf)`
    pub fn from(t: f64) -> Self {
        Segments(vec![(t.max(0.0), f64::INFINITY)])
    }

    /// `[0, t)`
    pub fn until(t: f64) -> Self {
        Segments::from_raw(vec![(0.0, t)])
    }

    pub fn complement(&self) -> Self {
        let mut out = Vec::new();
        let mut cur = 0.0;
        for &(a, b) in &self.0 {
            if a > cur {
                out.push((cur, a));
            }
            cur = b;
        }
        if cur < f64::INFINITY {
            out.push((cur, f64::INFINITY));
        }
        Segments(out)
    }

    pub fn intersect(&self, other: &Segments) -> Self {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            let (a0, a1) = self.0[i];
            let (b0, b1) = other.0[j];
            let lo = a0.max(b0);
            let hi = a1.min(b1);
            if hi > lo {
                out.push((lo, hi));
            }
            if a1 < b1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        Segments(out)
    }

    /// `sum over [a,b] of int_a^b t^{-1-2s} dt`.  Infinite if a segment touches 0.
    pub fn radial_mass(&self, s: f64) -> f64 {
        let p = |t: f64| if t.is_infinite() { 0.0 } else { t.powf(-2.0 * s) };
        self.0.iter().map(|&(a, b)| (p(a) - p(b)) / (2.0 * s)).sum()
    }
}

/// Uniform cell grid over the bounding box of a domain.  Cell `(i, j)` has
/// center `((i + 1/2) h, (j + 1/2) h)` (1D: `((i + 1/2) h, 0)`), so every
/// symmetric domain yields a cell set that is symmetric about `x1 = 0`.
#[derive(Clone, Debug)]
pub struct Grid {
    h: f64,
    dim: usize,
    lo: [i64; 2],
    shape: [usize; 2],
    cells: Vec<[i64; 2]>,
    centers: Vec<Point>,
    lookup: Vec<usize>,
}

const NONE: usize = usize::MAX;

impl Grid {
    pub fn new(domain: &Domain, h: f64) -> Result<Self> {
        let h = positive("h", h)?;
        let bb = domain.bounding_box();
        let dim = domain.dim;
        let mut lo = [0i64; 2];
        let mut shape = [1usize; 2];
        for k in 0..dim {
            let a = (bb.lo[k] / h).floor() as i64 - 1;
            let b = (bb.hi[k] / h).ceil() as i64 + 1;
            lo[k] = a;
            shape[k] = (b - a) as usize;
        }
        if shape[0].saturating_mul(shape[1]) > 50_000_000 {
            return Err(Error::invalid(format!("grid with h = {h} is too fine for the domain")));
        }
        let mut lookup = vec![NONE; shape[0] * shape[1]];
        let mut cells = Vec::new();
        let mut centers = Vec::new();
        for jj in 0..shape[1] {
            for ii in 0..shape[0] {
                let idx = [lo[0] + ii as i64, lo[1] + jj as i64];
                let c = center_of(idx, h, dim);
                if domain.contains(&c) {
                    lookup[jj * shape[0] + ii] = cells.len();
                    cells.push(idx);
                    centers.push(c);
                }
            }
        }
        if cells.is_empty() {
            return Err(Error::EmptyRegion);
        }
        Ok(Grid { h, dim, lo, shape, cells, centers, lookup })
    }

    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    /// Number of Omega-cells.
    pub fn len(&self) -> usize {
        self.cells.len()
    }
    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
    /// Quadrature weight `h^dim` of every cell.
    pub fn weight(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }
    pub fn centers(&self) -> &[Point] {
        &self.centers
    }
    pub fn center(&self, i: usize) -> Point {
        self.centers[i]
    }
    pub fn cell_index(&self, i: usize) -> [i64; 2] {
        self.cells[i]
    }
    /// Center of an arbitrary (possibly exterior) lattice cell.
    pub fn lattice_center(&self, idx: [i64; 2]) -> Point {
        center_of(idx, self.h, self.dim)
    }

    /// Omega-cell with lattice index `idx`, if any.
    pub fn find(&self, idx: [i64; 2]) -> Option<usize> {
        let ii = idx[0] - self.lo[0];
        let jj = idx[1] - self.lo[1];
        if ii < 0 || jj < 0 || ii as usize >= self.shape[0] || jj as usize >= self.shape[1] {
            return None;
        }
        match self.lookup[jj as usize * self.shape[0] + ii as usize] {
            NONE => None,
            k => Some(k),
        }
    }

    /// Lattice index of the cell containing `p`.
    pub fn lattice_of(&self, p: &Point) -> [i64; 2] {
        let i = (p[0] / self.h).floor() as i64;
        let j = if self.dim == 2 { (p[1] / self.h).floor() as i64 } else { 0 };
        [i, j]
    }

    /// Inside-mask over the bounding lattice, row-major with x fastest.
    pub fn inside_mask(&self) -> Vec<bool> {
        self.lookup.iter().map(|&k| k != NONE).collect()
    }

    /// Face neighbours (lattice indices) of a lattice cell.
    pub fn face_neighbours(&self, idx: [i64; 2]) -> Vec<[i64; 2]> {
        let mut v = vec![[idx[0] - 1, idx[1]], [idx[0] + 1, idx[1]]];
        if self.dim == 2 {
            v.push([idx[0], idx[1] - 1]);
            v.push([idx[0], idx[1] + 1]);
        }
        v
    }

    /// Omega-cells satisfying a predicate on their center.
    pub fn select(&self, pred: impl Fn(&Point) -> bool) -> Vec<usize> {
        (0..self.len()).filter(|&i| pred(&self.centers[i])).collect()
    }

    /// Omega-cell whose center is exactly the mirror image of cell `i` under
    /// `Q_lambda`, if the mirror center lies on the lattice and inside.
    pub fn mirror(&self, i: usize, lambda: f64) -> Option<usize> {
        let k = 2.0 * lambda / self.h;
        if (k - k.round()).abs() > 1e-9 {
            return None;
        }
        let c = self.cells[i];
        self.find([k.round() as i64 - 1 - c[0], c[1]])
    }
}

fn center_of(idx: [i64; 2], h: f64, dim: usize) -> Point {
    let y = if dim == 2 { (idx[1] as f64 + 0.5) * h } else { 0.0 };
    [(idx[0] as f64 + 0.5) * h, y]
}

/// `Q_lambda(x) = (2 lambda - x1, x')`.
pub fn reflect(x: &Point, lambda: f64) -> Point {
    [2.0 * lambda - x[0], x[1]]
}

/// Omega-cells with `x1 > lambda`, split into face-connected components.
#[derive(Clone, Debug)]
pub struct CapRegion {
    pub lambda: f64,
    pub cells: Vec<usize>,
    pub components: Vec<Vec<usize>>,
}

/// Cap `Omega_lambda`.  Fails with `EmptyCap` when no cell center lies strictly
/// beyond the plane (this includes planes between the last center and the
/// boundary).
pub fn cap_region(grid: &Grid, lambda: f64) -> Result<CapRegion> {
    let cells = grid.select(|c| c[0] > lambda);
    if cells.is_empty() {
        return Err(Error::EmptyCap { lambda });
    }
    let components = components(grid, &cells);
    Ok(CapRegion { lambda, cells, components })
}

/// Face-connected components of a set of Omega-cells.
pub fn components(grid: &Grid, cells: &[usize]) -> Vec<Vec<usize>> {
    let mut member = vec![false; grid.len()];
    for &c in cells {
        member[c] = true;
    }
    let mut seen = vec![false; grid.len()];
    let mut out = Vec::new();
    for &start in cells {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(c) = queue.pop_front() {
            for nb in grid.face_neighbours(grid.cell_index(c)) {
                if let Some(k) = grid.find(nb) {
                    if member[k] && !seen[k] {
                        seen[k] = true;
                        comp.push(k);
                        queue.push_back(k);
                    }
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

#[derive(Clone, Debug)]
pub struct RegionMetrics {
    pub measure: f64,
    pub diameter: f64,
    /// Minimum over components of the largest inscribed ball centered at a cell.
    pub inradius: f64,
    /// Distance from each cell center (in input order) to the complement of
    /// the union of the closed cells.
    pub dist_field: Vec<f64>,
}

/// Measure, diameter, inradius and distance field of a cell set.
pub fn region_metrics(region: &[usize], grid: &Grid) -> Result<RegionMetrics> {
    if region.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let h = grid.h();
    let mut member = vec![false; grid.len()];
    for &c in region {
        member[c] = true;
    }
    // Boundary faces: (face center, normal axis); and cells touching them.
    let mut faces: Vec<(Point, usize)> = Vec::new();
    let mut rim: Vec<usize> = Vec::new();
    for &c in region {
        let idx = grid.cell_index(c);
        let ctr = grid.center(c);
        let mut on_rim = false;
        for (k, nb) in grid.face_neighbours(idx).into_iter().enumerate() {
            let inside = grid.find(nb).is_some_and(|q| member[q]);
            if !inside {
                on_rim = true;
                let axis = k / 2;
                let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
                let mut f = ctr;
                f[axis] += sign * 0.5 * h;
                faces.push((f, axis));
            }
        }
        if on_rim {
            rim.push(c);
        }
    }
    let dim = grid.dim();
    let dist_to_face = |p: &Point, f: &(Point, usize)| -> f64 {
        let (fc, axis) = f;
        if dim == 1 {
            return (p[0] - fc[0]).abs();
        }
        let other = 1 - axis;
        let along = ((p[other] - fc[other]).abs() - 0.5 * h).max(0.0);
        let across = p[*axis] - fc[*axis];
        along.hypot(across)
    };
    let dist_field: Vec<f64> = region
        .iter()
        .map(|&c| {
            let p = grid.center(c);
            faces.iter().map(|f| dist_to_face(&p, f)).fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mut pos = vec![0usize; grid.len()];
    for (k, &c) in region.iter().enumerate() {
        pos[c] = k;
    }
    let inradius = components(grid, region)
        .iter()
        .map(|comp| comp.iter().map(|&c| dist_field[pos[c]]).fold(0.0, f64::max))
        .fold(f64::INFINITY, f64::min);
    let mut diameter = 0.0f64;
    for (a, &i) in rim.iter().enumerate() {
        let p = grid.center(i);
        for &j in &rim[a + 1..] {
            let q = grid.center(j);
            diameter = diameter.max((p[0] - q[0]).hypot(p[1] - q[1]));
        }
    }
    Ok(RegionMetrics {
        measure: region.len() as f64 * grid.weight(),
        diameter,
        inradius,
        dist_field,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn reflect_examples() {
        assert_eq!(reflect(&[1.2, 0.3], 0.5), [2.0 * 0.5 - 1.2, 0.3]);
        assert_abs_diff_eq!(reflect(&[1.2, 0.3], 0.5)[0], -0.2, epsilon = 1e-15);
        assert_eq!(reflect(&[0.5, 0.0], 0.5), [0.5, 0.0]);
    }

    #[test]
    fn interval_cap_at_zero() {
        let d = Domain::interval(1.0).unwrap();
        let g = Grid::new(&d, 0.01).unwrap();
        assert_eq!(g.len(), 200);
        let cap = cap_region(&g, 0.0).unwrap();
        assert_eq!(cap.components.len(), 1);
        assert_eq!(cap.cells.len(), 100);
    }

    #[test]
    fn cap_beyond_last_center_is_empty() {
        let d = Domain::interval(1.0).unwrap();
        let g = Grid::new(&d, 0.01).unwrap();
        assert!(matches!(cap_region(&g, 0.999), Err(Error::EmptyCap { .. })));
    }

    #[test]
    fn segments_algebra() {
        let a = Segments::from_raw(vec![(0.0, 1.0), (2.0, 3.0), (2.5, 4.0)]);
        assert_eq!(a.0, vec![(0.0, 1.0), (2.0, 4.0)]);
        assert_eq!(a.complement().0, vec![(1.0, 2.0), (4.0, f64::INFINITY)]);
        let b = Segments::from(0.5);
        assert_eq!(a.intersect(&b).0, vec![(0.5, 1.0), (2.0, 4.0)]);
        assert_abs_diff_eq!(Segments::from(2.0).radial_mass(0.5), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn disk_ray() {
        let d = Domain::disk(1.0).unwrap();
        let s = d.inside_segments(&[0.5, 0.0], &[1.0, 0.0]);
        assert_eq!(s.0.len(), 1);
        assert_abs_diff_eq!(s.0[0].1, 0.5, epsilon = 1e-15);
        let s = d.inside_segments(&[0.5, 0.0], &[-1.0, 0.0]);
        assert_abs_diff_eq!(s.0[0].1, 1.5, epsilon = 1e-15);
    }
}
