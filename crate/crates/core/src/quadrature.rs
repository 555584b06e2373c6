//! One-dimensional quadrature: globally adaptive Gauss-Kronrod (7/15),
//! Gauss-Legendre rules and an accelerated Fourier-cosine integral.

use std::collections::BinaryHeap;
use std::f64::consts::PI;

use crate::{Error, Result};

// Kronrod 15-point abscissae (positive half) and weights; Gauss 7-point weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Absolute / relative error targets; the stricter-of-two-loose rule
/// `err <= max(abs, rel * |I|)` is used.
#[derive(Clone, Copy, Debug)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Tolerance { abs, rel, max_intervals: 2000 }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Quad {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

/// Single GK15 panel: (Kronrod value, |Kronrod - Gauss|).
pub fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, o: &Self) -> bool {
        self.error == o.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Panel {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&o.error)
    }
}

/// Globally adaptive GK15 on `[a, b]`: repeatedly bisects the panel with the
/// largest error estimate.  Endpoint singularities are fine as long as they
/// are integrable (the rule never samples the endpoints).
pub fn adaptive<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: Tolerance) -> Quad {
    if a == b {
        return Quad { value: 0.0, error: 0.0, converged: true };
    }
    let (v, e) = gk15(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value: v, error: e });
    let mut total = v;
    let mut err = e;
    while err > tol.abs.max(tol.rel * total.abs()) {
        if heap.len() >= tol.max_intervals {
            return Quad { value: total, error: err, converged: false };
        }
        let p = heap.pop().expect("heap never empties");
        let m = 0.5 * (p.a + p.b);
        if m <= p.a || m >= p.b {
            // interval below machine resolution
            heap.push(p);
            return Quad { value: total, error: err, converged: false };
        }
        let (v1, e1) = gk15(&mut f, p.a, m);
        let (v2, e2) = gk15(&mut f, m, p.b);
        total += v1 + v2 - p.value;
        err += e1 + e2 - p.error;
        heap.push(Panel { a: p.a, b: m, value: v1, error: e1 });
        heap.push(Panel { a: m, b: p.b, value: v2, error: e2 });
    }
    // re-sum to shed accumulated rounding from the running updates
    let value = heap.iter().map(|p| p.value).sum();
    let error = heap.iter().map(|p| p.error).sum();
    Quad { value, error, converged: true }
}

/// Like [`adaptive`] but maps a non-converged result to an error.
pub fn integrate<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<f64> {
    let q = adaptive(f, a, b, tol);
    if q.converged {
        Ok(q.value)
    } else {
        Err(Error::QuadratureFailure(format!(
            "adaptive GK15 on [{a}, {b}] stalled at error {:e}",
            q.error
        )))
    }
}

/// `int_a^inf f`, via the substitution `x = a + t/(1-t)`.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(mut f: F, a: f64, tol: Tolerance) -> Result<f64> {
    integrate(
        |t| {
            let u = 1.0 - t;
            let x = a + t / u;
            let y = f(x);
            if y == 0.0 { 0.0 } else { y / (u * u) }
        },
        0.0,
        1.0,
        tol,
    )
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` (Newton on `P_n`).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pnm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// `int_0^inf cos(t) g(t) dt` for positive, eventually monotone `g -> 0`.
/// Integrates between consecutive zeros of the cosine and sums the resulting
/// alternating series with Euler's transformation (iterated averaging of the
/// partial sums).
pub fn cosine_fourier_integral<G: Fn(f64) -> f64>(g: G) -> Result<f64> {
    const DIRECT: usize = 40;
    const EULER: usize = 30;
    let mut partial = Vec::with_capacity(DIRECT + EULER + 1);
    let mut sum = 0.0;
    let mut scale = 0.0f64;
    for k in 0..=(DIRECT + EULER) {
        let (lo, hi) = if k == 0 {
            (0.0, PI / 2.0)
        } else {
            (PI / 2.0 + (k - 1) as f64 * PI, PI / 2.0 + k as f64 * PI)
        };
        let tol = Tolerance::new(1e-17 * scale, 1e-14);
        let term = integrate(|t| t.cos() * g(t), lo, hi, tol)?;
        scale = scale.max(term.abs());
        sum += term;
        partial.push(sum);
    }
    let mut s: Vec<f64> = partial[DIRECT..].to_vec();
    while s.len() > 1 {
        s = s.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    }
    Ok(s[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gk_is_exact_on_polynomials() {
        let (v, _) = gk15(&mut |x: f64| x.powi(20) - 3.0 * x.powi(7), -1.0, 2.0);
        let exact = (2f64.powi(21) + 1.0) / 21.0 - 3.0 * (2f64.powi(8) - 1.0) / 8.0;
        assert_relative_eq!(v, exact, max_relative = 1e-13);
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        // int_0^1 x^{-1/2} = 2, int_0^1 x^{-0.9} = 10
        let q = integrate(|x| x.powf(-0.5), 0.0, 1.0, Tolerance::new(1e-13, 1e-12)).unwrap();
        assert_relative_eq!(q, 2.0, max_relative = 1e-11);
        let q = integrate(|x| x.powf(-0.9), 0.0, 1.0, Tolerance::new(1e-12, 1e-11)).unwrap();
        assert_relative_eq!(q, 10.0, max_relative = 1e-9);
    }

    #[test]
    fn tail_integral() {
        let q = integrate_to_infinity(|x| x.powf(-2.5), 1.0, Tolerance::new(1e-14, 1e-12)).unwrap();
        assert_relative_eq!(q, 1.0 / 1.5, max_relative = 1e-10);
    }

    #[test]
    fn gauss_legendre_rules() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            assert_relative_eq!(w.iter().sum::<f64>(), 2.0, max_relative = 1e-14);
            // exact up to degree 2n-1
            let d = 2 * n - 2;
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(d as i32)).sum();
            assert_relative_eq!(q, 2.0 / (d as f64 + 1.0), max_relative = 1e-12);
        }
    }

    #[test]
    fn fourier_cosine_known_transform() {
        // int_0^inf cos t / (1 + t^2) dt = pi / (2e)
        let v = cosine_fourier_integral(|t| 1.0 / (1.0 + t * t)).unwrap();
        assert_relative_eq!(v, PI / (2.0 * std::f64::consts::E), max_relative = 1e-11);
    }
}
