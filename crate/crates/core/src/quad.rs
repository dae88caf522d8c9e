//! Quadrature rules shared by the kernel and geometry modules.
//!
//! Two tools live here: fixed Gauss–Legendre panels and a globally adaptive
//! Gauss–Kronrod (7/15) integrator for vector-valued integrands. The vector
//! form lets one pass over the nodes produce many Fourier coefficients at
//! once, with the error estimate taken as the sup-norm over components.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Chebyshev-like starting guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// A composite Gauss–Legendre rule: `order` nodes on every panel between
/// consecutive breakpoints.
#[derive(Debug, Clone)]
pub struct PanelRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl PanelRule {
    pub fn new(breakpoints: &[f64], order: usize) -> Self {
        let (x, w) = gauss_legendre(order);
        let mut nodes = Vec::with_capacity(breakpoints.len() * order);
        let mut weights = Vec::with_capacity(breakpoints.len() * order);
        for pair in breakpoints.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if b <= a {
                continue;
            }
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(mid + half * xi);
                weights.push(half * wi);
            }
        }
        PanelRule { nodes, weights }
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        AdaptiveOptions {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            max_intervals: 20_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct VecIntegral {
    pub value: Vec<f64>,
    /// Sum over intervals of the sup-norm Kronrod/Gauss discrepancy.
    pub error: f64,
    pub converged: bool,
    pub intervals: usize,
}

struct Piece {
    a: f64,
    b: f64,
    value: Vec<f64>,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F>(f: &F, a: f64, b: f64, dim: usize, scratch: &mut [f64]) -> Piece
where
    F: Fn(f64, &mut [f64]),
{
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut kron = vec![0.0; dim];
    let mut gauss = vec![0.0; dim];
    let mut eval = |x: f64, wk: f64, wg: f64, kron: &mut [f64], gauss: &mut [f64]| {
        scratch.iter_mut().for_each(|v| *v = 0.0);
        f(x, scratch);
        for j in 0..dim {
            kron[j] += wk * scratch[j];
            gauss[j] += wg * scratch[j];
        }
    };
    eval(mid, WGK[7], WG[3], &mut kron, &mut gauss);
    for i in 0..7 {
        let wg = if i % 2 == 1 { WG[i / 2] } else { 0.0 };
        let dx = half * XGK[i];
        eval(mid - dx, WGK[i], wg, &mut kron, &mut gauss);
        eval(mid + dx, WGK[i], wg, &mut kron, &mut gauss);
    }
    let mut error: f64 = 0.0;
    for j in 0..dim {
        kron[j] *= half;
        gauss[j] *= half;
        error = error.max((kron[j] - gauss[j]).abs());
    }
    Piece {
        a,
        b,
        value: kron,
        error,
    }
}

/// Integrates a vector-valued function over `[breakpoints[0], breakpoints[last]]`.
///
/// `f(x, out)` must write the `dim` components of the integrand at `x` into
/// `out` (which is zeroed before each call). Breakpoints should include every
/// known kink or jump so that the initial panels are smooth.
pub fn integrate_vec<F>(f: F, breakpoints: &[f64], dim: usize, opts: AdaptiveOptions) -> VecIntegral
where
    F: Fn(f64, &mut [f64]),
{
    let mut scratch = vec![0.0; dim];
    let mut heap = BinaryHeap::new();
    for pair in breakpoints.windows(2) {
        if pair[1] > pair[0] {
            heap.push(gk15(&f, pair[0], pair[1], dim, &mut scratch));
        }
    }
    let summarize = |heap: &BinaryHeap<Piece>| {
        let mut total = vec![0.0; dim];
        let mut err = 0.0;
        for p in heap.iter() {
            err += p.error;
            for (t, v) in total.iter_mut().zip(&p.value) {
                *t += v;
            }
        }
        (total, err)
    };
    loop {
        let (total, err) = summarize(&heap);
        let scale = total.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let target = opts.abs_tol.max(opts.rel_tol * scale);
        if err <= target || heap.len() >= opts.max_intervals {
            return VecIntegral {
                value: total,
                error: err,
                converged: err <= target,
                intervals: heap.len(),
            };
        }
        // Refine several of the worst pieces per pass to limit re-summation.
        let batch = (heap.len() / 8).max(1);
        for _ in 0..batch {
            let worst = match heap.pop() {
                Some(p) => p,
                None => break,
            };
            let m = 0.5 * (worst.a + worst.b);
            if !(m > worst.a && m < worst.b) {
                // Interval cannot be split further; keep it as is.
                heap.push(Piece {
                    error: 0.0,
                    ..worst
                });
                continue;
            }
            heap.push(gk15(&f, worst.a, m, dim, &mut scratch));
            heap.push(gk15(&f, m, worst.b, dim, &mut scratch));
        }
    }
}

/// Scalar convenience wrapper around [`integrate_vec`].
pub fn integrate(
    f: impl Fn(f64) -> f64,
    breakpoints: &[f64],
    opts: AdaptiveOptions,
) -> (f64, f64, bool) {
    let r = integrate_vec(|x, out: &mut [f64]| out[0] = f(x), breakpoints, 1, opts);
    (r.value[0], r.error, r.converged)
}

/// Uniform breakpoints `a, a+h, ..., b` with `n` panels.
pub fn uniform_breaks(a: f64, b: f64, n: usize) -> Vec<f64> {
    let n = n.max(1);
    (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            let sum_w: f64 = w.iter().sum();
            assert!((sum_w - 2.0).abs() < 1e-13, "n={n}");
            // degree 2n-1 monomial with even power
            let p = 2 * ((2 * n - 1) / 2);
            let val: f64 = x
                .iter()
                .zip(&w)
                .map(|(xi, wi)| wi * xi.powi(p as i32))
                .sum();
            assert!((val - 2.0 / (p as f64 + 1.0)).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn adaptive_handles_kinks() {
        let (v, _, ok) = integrate(
            |x: f64| (x - 0.3).abs(),
            &[-1.0, 1.0],
            AdaptiveOptions::default(),
        );
        assert!(ok);
        assert!((v - (1.3f64.powi(2) + 0.7f64.powi(2)) / 2.0).abs() < 1e-11);
    }

    #[test]
    fn adaptive_vector_oscillatory() {
        let r = integrate_vec(
            |x, out: &mut [f64]| {
                for (n, o) in out.iter_mut().enumerate() {
                    *o = (n as f64 * x).cos();
                }
            },
            &uniform_breaks(0.0, 1.0, 4),
            20,
            AdaptiveOptions::default(),
        );
        assert!(r.converged);
        for n in 1..20 {
            let exact = (n as f64).sin() / n as f64;
            assert!((r.value[n] - exact).abs() < 1e-12);
        }
    }
}
