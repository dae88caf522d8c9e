//! Hopping models, dispersion relations and Fermi seas on the Brillouin zone
//! `[-π, π)^d`.
//!
//! Every sea can report its occupied set along a line parallel to the last
//! k-axis ([`FermiSea::line_occupancy`]). Kernel entries, Ξ(q) and filling
//! fractions are all built from that primitive: the last axis is integrated
//! exactly over the occupied intervals and the remaining axes adaptively.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quad::{self, AdaptiveOptions};

pub const TWO_PI: f64 = 2.0 * PI;

/// Wraps `x` into `[-π, π)`.
pub fn wrap(x: f64) -> f64 {
    let y = x - TWO_PI * ((x + PI) / TWO_PI).floor();
    // floor can land exactly on π through rounding
    if y >= PI {
        y - TWO_PI
    } else {
        y
    }
}

/// Volume of the unit ball in `d` dimensions.
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => TWO_PI / d as f64 * unit_ball_volume(d - 2),
    }
}

/// Translation-invariant quadratic hopping Hamiltonian on ℤ^d.
#[derive(Debug, Clone, PartialEq)]
pub struct HoppingModel {
    dim: usize,
    hoppings: BTreeMap<Vec<i64>, Complex64>,
    mu: f64,
}

impl HoppingModel {
    pub fn new(
        dim: usize,
        hoppings: impl IntoIterator<Item = (Vec<i64>, Complex64)>,
        mu: f64,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidModel("dimension must be positive".into()));
        }
        if !mu.is_finite() {
            return Err(Error::InvalidModel(
                "chemical potential must be finite".into(),
            ));
        }
        let mut map = BTreeMap::new();
        for (offset, t) in hoppings {
            if offset.len() != dim {
                return Err(Error::InvalidModel(format!(
                    "offset {offset:?} has {} components, expected {dim}",
                    offset.len()
                )));
            }
            if !(t.re.is_finite() && t.im.is_finite()) {
                return Err(Error::InvalidModel(format!(
                    "non-finite amplitude at {offset:?}"
                )));
            }
            if map.insert(offset.clone(), t).is_some() {
                return Err(Error::InvalidModel(format!("duplicate offset {offset:?}")));
            }
        }
        map.entry(vec![0; dim]).or_insert(Complex64::new(0.0, 0.0));
        for (offset, t) in &map {
            let neg: Vec<i64> = offset.iter().map(|v| -v).collect();
            let partner = map.get(&neg).copied().unwrap_or_default();
            if (partner - t.conj()).norm() > 1e-12 {
                return Err(Error::InvalidModel(format!(
                    "non-Hermitian hopping: T{offset:?} = {t}, T{neg:?} = {partner}"
                )));
            }
        }
        Ok(HoppingModel {
            dim,
            hoppings: map,
            mu,
        })
    }

    /// Hypercubic nearest-neighbour model with real hopping `t`:
    /// ε(k) = 2t Σ_i cos k_i + μ.
    pub fn nearest_neighbor(dim: usize, t: f64, mu: f64) -> Result<Self> {
        let mut terms = Vec::with_capacity(2 * dim);
        for axis in 0..dim {
            for s in [1, -1] {
                let mut off = vec![0; dim];
                off[axis] = s;
                terms.push((off, Complex64::new(t, 0.0)));
            }
        }
        HoppingModel::new(dim, terms, mu)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn hoppings(&self) -> &BTreeMap<Vec<i64>, Complex64> {
        &self.hoppings
    }

    pub fn hopping(&self, offset: &[i64]) -> Complex64 {
        self.hoppings.get(offset).copied().unwrap_or_default()
    }

    /// Largest |α_i| over the support along `axis`.
    pub fn range_along(&self, axis: usize) -> i64 {
        self.hoppings
            .keys()
            .map(|o| o[axis].abs())
            .max()
            .unwrap_or(0)
    }

    /// Model with every amplitude and μ negated (ε → −ε).
    pub fn negated(&self) -> Self {
        HoppingModel {
            dim: self.dim,
            hoppings: self.hoppings.iter().map(|(k, v)| (k.clone(), -v)).collect(),
            mu: -self.mu,
        }
    }

    pub fn dispersion_at(&self, k: &[f64]) -> Result<f64> {
        if k.len() != self.dim {
            return Err(Error::Domain(format!(
                "k has {} components, model dimension is {}",
                k.len(),
                self.dim
            )));
        }
        let mut eps = Complex64::new(self.mu, 0.0);
        for (offset, t) in &self.hoppings {
            let phase: f64 = offset.iter().zip(k).map(|(&a, &ki)| a as f64 * ki).sum();
            eps += t * Complex64::from_polar(1.0, -phase);
        }
        if eps.im.abs() > 1e-12 {
            return Err(Error::InvalidModel(format!(
                "dispersion has imaginary part {:.3e} at k={k:?}",
                eps.im
            )));
        }
        Ok(eps.re)
    }

    /// ε restricted to the line where the first `d-1` components equal `prefix`.
    pub fn line(&self, prefix: &[f64]) -> LineDispersion {
        let last = self.dim - 1;
        let range = self.range_along(last) as usize;
        let mut coeffs = vec![Complex64::new(0.0, 0.0); range + 1];
        for (offset, t) in &self.hoppings {
            let n = offset[last];
            if n < 0 {
                continue;
            }
            let phase: f64 = offset[..last]
                .iter()
                .zip(prefix)
                .map(|(&a, &ki)| a as f64 * ki)
                .sum();
            coeffs[n as usize] += t * Complex64::from_polar(1.0, -phase);
        }
        LineDispersion {
            constant: coeffs[0].re + self.mu,
            coeffs: coeffs[1..].to_vec(),
        }
    }
}

/// ε(t) = constant + Σ_{n≥1} 2 Re(c_n e^{-i n t}) along one k-line.
#[derive(Debug, Clone)]
pub struct LineDispersion {
    constant: f64,
    coeffs: Vec<Complex64>,
}

impl LineDispersion {
    pub fn eval(&self, t: f64) -> f64 {
        let mut v = self.constant;
        for (i, c) in self.coeffs.iter().enumerate() {
            let nt = (i + 1) as f64 * t;
            v += 2.0 * (c.re * nt.cos() + c.im * nt.sin());
        }
        v
    }

    /// Intervals of `[-π, π]` where ε < 0. Single-harmonic lines are solved
    /// in closed form; otherwise the sign is scanned on `samples` points,
    /// crossings are bisected and positive local minima are probed so that
    /// nearly tangent crossing pairs are not lost between samples.
    pub fn negative_intervals(&self, samples: usize) -> Vec<(f64, f64)> {
        match self.coeffs.len() {
            0 => {
                if self.constant < 0.0 {
                    vec![(-PI, PI)]
                } else {
                    Vec::new()
                }
            }
            1 => self.single_harmonic_intervals(),
            _ => self.scanned_intervals(samples),
        }
    }

    // ε = c0 + 2|c1| cos(t − φ) < 0  ⇔  cos(t − φ) < −c0 / (2|c1|)
    fn single_harmonic_intervals(&self) -> Vec<(f64, f64)> {
        let c1 = self.coeffs[0];
        let amp = 2.0 * c1.norm();
        if amp == 0.0 {
            return if self.constant < 0.0 {
                vec![(-PI, PI)]
            } else {
                Vec::new()
            };
        }
        let rho = -self.constant / amp;
        if rho <= -1.0 {
            return Vec::new();
        }
        if rho > 1.0 {
            return vec![(-PI, PI)];
        }
        periodic_interval(c1.arg() + PI, PI - rho.acos())
    }

    fn scanned_intervals(&self, samples: usize) -> Vec<(f64, f64)> {
        let n = samples.max(16 * (self.coeffs.len() + 1));
        let h = TWO_PI / n as f64;
        let ts: Vec<f64> = (0..=n)
            .map(|j| if j == n { PI } else { -PI + j as f64 * h })
            .collect();
        let vals: Vec<f64> = ts.iter().map(|&t| self.eval(t)).collect();
        let mut crossings: Vec<f64> = Vec::new();
        for j in 0..n {
            let (na, nb) = (vals[j] < 0.0, vals[j + 1] < 0.0);
            if na != nb {
                crossings.push(self.bisect(ts[j], ts[j + 1], na));
            }
        }
        // hidden pairs: a positive local minimum of the samples that dips below zero
        for j in 1..n {
            if vals[j] >= 0.0 && vals[j] <= vals[j - 1] && vals[j] <= vals[j + 1] {
                let (tmin, vmin) = self.golden_min(ts[j - 1], ts[j + 1]);
                if vmin < 0.0 {
                    crossings.push(self.bisect(ts[j - 1], tmin, false));
                    crossings.push(self.bisect(tmin, ts[j + 1], true));
                }
            }
        }
        crossings.sort_by(f64::total_cmp);
        let mut out = Vec::new();
        let mut start = if vals[0] < 0.0 { Some(-PI) } else { None };
        for c in crossings {
            match start.take() {
                Some(s) => out.push((s, c)),
                None => start = Some(c),
            }
        }
        if let Some(s) = start {
            out.push((s, PI));
        }
        out.retain(|(a, b)| b > a);
        out
    }

    fn golden_min(&self, mut a: f64, mut b: f64) -> (f64, f64) {
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let (mut fc, mut fd) = (self.eval(c), self.eval(d));
        for _ in 0..80 {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = self.eval(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = self.eval(d);
            }
        }
        let t = 0.5 * (a + b);
        (t, self.eval(t))
    }

    fn bisect(&self, mut a: f64, mut b: f64, a_neg: bool) -> f64 {
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            if (self.eval(m) < 0.0) == a_neg {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }
}

/// Axis-aligned box of per-axis intervals `[c_i - w_i, c_i + w_i]` on the torus.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalBox {
    centers: Vec<f64>,
    half_widths: Vec<f64>,
}

impl IntervalBox {
    pub fn centers(&self) -> &[f64] {
        &self.centers
    }
    pub fn half_widths(&self) -> &[f64] {
        &self.half_widths
    }
    fn is_empty(&self) -> bool {
        self.half_widths.iter().any(|&w| w <= 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

/// Union of balls, pairwise disjoint on the torus.
#[derive(Debug, Clone, PartialEq)]
pub struct BallUnion {
    dim: usize,
    balls: Vec<Ball>,
}

impl BallUnion {
    pub fn balls(&self) -> &[Ball] {
        &self.balls
    }
}

/// Torus distance between two points.
pub fn torus_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| wrap(x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// 2-D checkerboard with square cells of edge `π/m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Checkerboard {
    m: usize,
}

impl Checkerboard {
    pub fn cells_per_half_axis(&self) -> usize {
        self.m
    }
    /// Cell edge l = π/m.
    pub fn edge(&self) -> f64 {
        PI / self.m as f64
    }
    fn cell(&self, k: f64) -> i64 {
        (wrap(k) / self.edge()).floor() as i64
    }
    fn occupied_cell(&self, i: i64, j: i64) -> bool {
        (i + j).rem_euclid(2) == 0
    }
}

/// Union of grid cells: `M` cells per axis, cell `c` covering
/// `[-π + c h, -π + (c+1) h)` with `h = 2π/M`. Last axis varies fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSea {
    dim: usize,
    resolution: usize,
    cells: Vec<bool>,
}

impl GridSea {
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn resolution(&self) -> usize {
        self.resolution
    }
    pub fn cells(&self) -> &[bool] {
        &self.cells
    }
    pub fn cell_width(&self) -> f64 {
        TWO_PI / self.resolution as f64
    }
    fn axis_index(&self, k: f64) -> usize {
        let i = ((wrap(k) + PI) / self.cell_width()).floor() as isize;
        i.clamp(0, self.resolution as isize - 1) as usize
    }
    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.resolution + i)
    }
    pub fn cell_center(&self, i: usize) -> f64 {
        -PI + (i as f64 + 0.5) * self.cell_width()
    }
}

/// Occupied region θ(k) = 1 in the Brillouin zone.
#[derive(Debug, Clone, PartialEq)]
pub enum FermiSea {
    /// θ(k) = 1 iff ε(k) < 0.
    Dispersion(HoppingModel),
    Interval(IntervalBox),
    Balls(BallUnion),
    Checkerboard(Checkerboard),
    Grid(GridSea),
    /// θ → 1 − θ.
    Complement(Box<FermiSea>),
}

impl FermiSea {
    pub fn from_dispersion(model: HoppingModel) -> Self {
        FermiSea::Dispersion(model)
    }

    pub fn interval_product(centers: Vec<f64>, half_widths: Vec<f64>) -> Result<Self> {
        if centers.is_empty() || centers.len() != half_widths.len() {
            return Err(Error::InvalidSea(
                "interval product needs one center and one half-width per axis".into(),
            ));
        }
        if half_widths.iter().any(|w| !(0.0..=PI).contains(w)) {
            return Err(Error::InvalidSea("half-widths must lie in [0, π]".into()));
        }
        if centers.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidSea("non-finite interval center".into()));
        }
        Ok(FermiSea::Interval(IntervalBox {
            centers,
            half_widths,
        }))
    }

    /// Symmetric box `|k_i| ≤ k_F` in `dim` dimensions.
    pub fn centered_box(dim: usize, kf: f64) -> Result<Self> {
        FermiSea::interval_product(vec![0.0; dim], vec![kf; dim])
    }

    /// Half-filled 1-D chain, θ(k) = 1 on |k| < π/2.
    pub fn half_filled_chain() -> Self {
        FermiSea::centered_box(1, PI / 2.0).expect("valid interval")
    }

    pub fn empty(dim: usize) -> Self {
        FermiSea::centered_box(dim, 0.0).expect("valid interval")
    }

    pub fn full(dim: usize) -> Self {
        FermiSea::centered_box(dim, PI).expect("valid interval")
    }

    pub fn ball_union(dim: usize, balls: Vec<Ball>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidSea("dimension must be positive".into()));
        }
        for b in &balls {
            if b.center.len() != dim {
                return Err(Error::InvalidSea("ball center has wrong dimension".into()));
            }
            if !(b.radius > 0.0 && b.radius <= PI) {
                return Err(Error::InvalidSea(format!(
                    "ball radius {} outside (0, π]",
                    b.radius
                )));
            }
        }
        for (i, a) in balls.iter().enumerate() {
            for b in &balls[i + 1..] {
                let dist = torus_distance(&a.center, &b.center);
                if dist < a.radius + b.radius {
                    return Err(Error::InvalidSea(format!(
                        "balls at {:?} and {:?} overlap on the torus",
                        a.center, b.center
                    )));
                }
            }
        }
        Ok(FermiSea::Balls(BallUnion { dim, balls }))
    }

    pub fn checkerboard(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidSea("checkerboard needs m ≥ 1".into()));
        }
        Ok(FermiSea::Checkerboard(Checkerboard { m }))
    }

    pub fn grid(dim: usize, resolution: usize, cells: Vec<bool>) -> Result<Self> {
        if dim == 0 || resolution == 0 {
            return Err(Error::InvalidSea(
                "grid needs positive dimension and resolution".into(),
            ));
        }
        let expected = resolution
            .checked_pow(dim as u32)
            .ok_or_else(|| Error::InvalidSea("grid too large".into()))?;
        if cells.len() != expected {
            return Err(Error::InvalidSea(format!(
                "grid has {} cells, expected {expected}",
                cells.len()
            )));
        }
        Ok(FermiSea::Grid(GridSea {
            dim,
            resolution,
            cells,
        }))
    }

    /// Samples θ at the cell centres of an `M^d` grid.
    pub fn pixelate(&self, resolution: usize) -> Result<Self> {
        let d = self.dim();
        let total = resolution
            .checked_pow(d as u32)
            .ok_or_else(|| Error::InvalidSea("grid too large".into()))?;
        let h = TWO_PI / resolution as f64;
        let mut k = vec![0.0; d];
        let cells = (0..total)
            .map(|flat| {
                let mut rem = flat;
                for axis in (0..d).rev() {
                    k[axis] = -PI + ((rem % resolution) as f64 + 0.5) * h;
                    rem /= resolution;
                }
                self.indicator(&k)
            })
            .collect();
        FermiSea::grid(d, resolution, cells)
    }

    /// The particle-hole partner θ → 1 − θ.
    pub fn complement(&self) -> Self {
        match self {
            FermiSea::Complement(inner) => (**inner).clone(),
            FermiSea::Grid(g) => FermiSea::Grid(GridSea {
                cells: g.cells.iter().map(|c| !c).collect(),
                ..g.clone()
            }),
            other => FermiSea::Complement(Box::new(other.clone())),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            FermiSea::Dispersion(m) => m.dim(),
            FermiSea::Interval(b) => b.centers.len(),
            FermiSea::Balls(b) => b.dim,
            FermiSea::Checkerboard(_) => 2,
            FermiSea::Grid(g) => g.dim,
            FermiSea::Complement(inner) => inner.dim(),
        }
    }

    /// Short variant label used in reports.
    pub fn label(&self) -> String {
        match self {
            FermiSea::Dispersion(_) => "dispersion".into(),
            FermiSea::Interval(_) => "interval".into(),
            FermiSea::Balls(_) => "balls".into(),
            FermiSea::Checkerboard(c) => format!("checkerboard(m={})", c.m),
            FermiSea::Grid(g) => format!("grid(M={})", g.resolution),
            FermiSea::Complement(inner) => format!("complement({})", inner.label()),
        }
    }

    /// θ(k), with `k` wrapped onto the torus first.
    pub fn indicator(&self, k: &[f64]) -> bool {
        match self {
            FermiSea::Dispersion(m) => {
                let wrapped: Vec<f64> = k.iter().map(|&x| wrap(x)).collect();
                m.dispersion_at(&wrapped).map(|e| e < 0.0).unwrap_or(false)
            }
            FermiSea::Interval(b) => b
                .centers
                .iter()
                .zip(&b.half_widths)
                .zip(k)
                .all(|((c, w), x)| *w >= PI || wrap(x - c).abs() < *w),
            FermiSea::Balls(u) => u
                .balls
                .iter()
                .any(|b| torus_distance(&b.center, k) < b.radius),
            FermiSea::Checkerboard(c) => c.occupied_cell(c.cell(k[0]), c.cell(k[1])),
            FermiSea::Grid(g) => {
                let idx: Vec<usize> = k.iter().map(|&x| g.axis_index(x)).collect();
                g.cells[g.flat_index(&idx)]
            }
            FermiSea::Complement(inner) => !inner.indicator(k),
        }
    }

    /// Occupied intervals of the line `(prefix, t)`, `t ∈ [-π, π]`, sorted
    /// and disjoint. `samples` controls root bracketing for dispersion seas.
    pub fn line_occupancy(&self, prefix: &[f64], samples: usize) -> Vec<(f64, f64)> {
        match self {
            FermiSea::Dispersion(m) => m.line(prefix).negative_intervals(samples),
            FermiSea::Interval(b) => {
                if b.is_empty() {
                    return Vec::new();
                }
                let d = b.centers.len();
                let inside = (0..d - 1).all(|i| {
                    b.half_widths[i] >= PI
                        || wrap(prefix[i] - b.centers[i]).abs() < b.half_widths[i]
                });
                if !inside {
                    return Vec::new();
                }
                periodic_interval(b.centers[d - 1], b.half_widths[d - 1])
            }
            FermiSea::Balls(u) => {
                let d = u.dim;
                let mut out = Vec::new();
                for ball in &u.balls {
                    let rho2: f64 = (0..d - 1)
                        .map(|i| wrap(prefix[i] - ball.center[i]).powi(2))
                        .sum();
                    let r2 = ball.radius * ball.radius;
                    if rho2 < r2 {
                        out.extend(periodic_interval(ball.center[d - 1], (r2 - rho2).sqrt()));
                    }
                }
                out.sort_by(|a, b| a.0.total_cmp(&b.0));
                merge_intervals(out)
            }
            FermiSea::Checkerboard(c) => {
                let i = c.cell(prefix[0]);
                let l = c.edge();
                let m = c.m as i64;
                (-m..m)
                    .filter(|&j| c.occupied_cell(i, j))
                    .map(|j| (j as f64 * l, (j + 1) as f64 * l))
                    .collect()
            }
            FermiSea::Grid(g) => {
                let mut idx: Vec<usize> = prefix.iter().map(|&x| g.axis_index(x)).collect();
                idx.push(0);
                let base = g.flat_index(&idx);
                let h = g.cell_width();
                let mut out: Vec<(f64, f64)> = Vec::new();
                for j in 0..g.resolution {
                    if g.cells[base + j] {
                        let (a, b) = (-PI + j as f64 * h, -PI + (j + 1) as f64 * h);
                        match out.last_mut() {
                            Some(last) if (last.1 - a).abs() < 1e-15 => last.1 = b,
                            _ => out.push((a, b)),
                        }
                    }
                }
                out
            }
            FermiSea::Complement(inner) => {
                complement_intervals(&inner.line_occupancy(prefix, samples))
            }
        }
    }

    /// Known kink locations along outer axis `axis` (always including ±π).
    pub fn outer_breaks(&self, axis: usize, initial_panels: usize) -> Vec<f64> {
        let mut pts = quad::uniform_breaks(-PI, PI, initial_panels);
        match self {
            FermiSea::Interval(b) if b.half_widths[axis] < PI => {
                let (c, w) = (b.centers[axis], b.half_widths[axis]);
                pts.push(wrap(c - w));
                pts.push(wrap(c + w));
            }
            FermiSea::Balls(u) => {
                for ball in &u.balls {
                    pts.push(wrap(ball.center[axis] - ball.radius));
                    pts.push(wrap(ball.center[axis]));
                    pts.push(wrap(ball.center[axis] + ball.radius));
                }
            }
            FermiSea::Checkerboard(c) => {
                let m = c.m as i64;
                pts.extend((-m..=m).map(|j| j as f64 * c.edge()));
            }
            FermiSea::Grid(g) => {
                pts.extend((0..=g.resolution).map(|j| -PI + j as f64 * g.cell_width()))
            }
            FermiSea::Complement(inner) => return inner.outer_breaks(axis, initial_panels),
            _ => {}
        }
        normalize_breaks(pts)
    }

    /// Integrates a vector function of the outer coordinates `(k_1..k_{d-1})`
    /// over `[-π, π)^{d-1}`; for `d = 1` the function is evaluated once.
    pub fn integrate_outer<F>(&self, dim: usize, settings: &LineSettings, f: F) -> Result<Vec<f64>>
    where
        F: Fn(&[f64], &mut [f64]) + Sync,
    {
        let d = self.dim();
        if d == 1 {
            let mut out = vec![0.0; dim];
            f(&[], &mut out);
            return Ok(out);
        }
        let breaks: Vec<Vec<f64>> = (0..d - 1)
            .map(|axis| self.outer_breaks(axis, settings.initial_panels))
            .collect();
        let failure = std::sync::Mutex::new(None::<f64>);
        let value = integrate_nested(&f, &breaks, &[], dim, settings.adaptive, &failure);
        if let Some(err) = *failure.lock().expect("poisoned") {
            return Err(Error::Accuracy {
                what: "outer-axis adaptive quadrature did not converge".into(),
                achieved: err,
                wanted: settings.adaptive.abs_tol,
            });
        }
        Ok(value)
    }

    /// Volume fraction of the occupied set.
    pub fn filling(&self) -> f64 {
        match self {
            FermiSea::Interval(b) => b.half_widths.iter().map(|w| w / PI).product(),
            FermiSea::Balls(u) => {
                let vd = unit_ball_volume(u.dim);
                let vol: f64 = u
                    .balls
                    .iter()
                    .map(|b| vd * b.radius.powi(u.dim as i32))
                    .sum();
                vol / TWO_PI.powi(u.dim as i32)
            }
            FermiSea::Checkerboard(_) => 0.5,
            FermiSea::Grid(g) => {
                g.cells.iter().filter(|&&c| c).count() as f64 / g.cells.len() as f64
            }
            FermiSea::Complement(inner) => 1.0 - inner.filling(),
            FermiSea::Dispersion(_) => {
                let settings = LineSettings::for_dim(self.dim());
                let samples = settings.line_samples;
                let vol = self
                    .integrate_outer(1, &settings, |prefix, out| {
                        out[0] = self
                            .line_occupancy(prefix, samples)
                            .iter()
                            .map(|(a, b)| b - a)
                            .sum();
                    })
                    .map(|v| v[0])
                    .unwrap_or(f64::NAN);
                (vol / TWO_PI.powi(self.dim() as i32)).clamp(0.0, 1.0)
            }
        }
    }
}

/// Resolution knobs for line-based integration over a sea.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSettings {
    /// Sign-scan points per line when bracketing Fermi-surface crossings.
    pub line_samples: usize,
    /// Initial uniform panels per outer axis before adaptive refinement.
    pub initial_panels: usize,
    pub adaptive: AdaptiveOptions,
}

impl LineSettings {
    pub fn for_dim(d: usize) -> Self {
        let (line_samples, initial_panels) = match d {
            1 => (4096, 1),
            2 => (1024, 16),
            _ => (256, 8),
        };
        LineSettings {
            line_samples,
            initial_panels,
            adaptive: AdaptiveOptions {
                abs_tol: 1e-11,
                rel_tol: 1e-12,
                max_intervals: if d <= 2 { 20_000 } else { 2_000 },
            },
        }
    }

    pub fn doubled(&self) -> Self {
        LineSettings {
            line_samples: 2 * self.line_samples,
            initial_panels: 2 * self.initial_panels,
            ..*self
        }
    }
}

fn integrate_nested<F>(
    f: &F,
    breaks: &[Vec<f64>],
    prefix: &[f64],
    dim: usize,
    opts: AdaptiveOptions,
    failure: &std::sync::Mutex<Option<f64>>,
) -> Vec<f64>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    let level = prefix.len();
    let last = level + 1 == breaks.len();
    let r = quad::integrate_vec(
        |x, out: &mut [f64]| {
            let mut p = prefix.to_vec();
            p.push(x);
            if last {
                f(&p, out);
            } else {
                out.copy_from_slice(&integrate_nested(f, breaks, &p, dim, opts, failure));
            }
        },
        &breaks[level],
        dim,
        opts,
    );
    if !r.converged {
        let mut guard = failure.lock().expect("poisoned");
        *guard = Some(guard.map_or(r.error, |e: f64| e.max(r.error)));
    }
    r.value
}

fn normalize_breaks(mut pts: Vec<f64>) -> Vec<f64> {
    pts.retain(|p| (-PI..=PI).contains(p));
    pts.push(-PI);
    pts.push(PI);
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    pts
}

/// `[c - w, c + w]` wrapped into at most two pieces inside `[-π, π]`.
pub fn periodic_interval(center: f64, half_width: f64) -> Vec<(f64, f64)> {
    if half_width <= 0.0 {
        return Vec::new();
    }
    if half_width >= PI {
        return vec![(-PI, PI)];
    }
    let a = wrap(center - half_width);
    let b = a + 2.0 * half_width;
    if b <= PI {
        vec![(a, b)]
    } else {
        vec![(-PI, b - TWO_PI), (a, PI)]
    }
}

pub(crate) fn merge_intervals(sorted: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(sorted.len());
    for (a, b) in sorted {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

/// Complement of sorted disjoint intervals within `[-π, π]`.
pub fn complement_intervals(occupied: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(occupied.len() + 1);
    let mut cursor = -PI;
    for &(a, b) in occupied {
        if a > cursor {
            out.push((cursor, a));
        }
        cursor = cursor.max(b);
    }
    if cursor < PI {
        out.push((cursor, PI));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn chain() -> HoppingModel {
        HoppingModel::nearest_neighbor(1, 1.0, 0.0).unwrap()
    }

    #[test]
    fn dispersion_examples() {
        let m = chain();
        assert!((m.dispersion_at(&[0.0]).unwrap() - 2.0).abs() < 1e-15);
        assert!(m.dispersion_at(&[PI / 2.0]).unwrap().abs() < 1e-15);
        let sq = HoppingModel::nearest_neighbor(2, 1.0, 0.0).unwrap();
        assert!(sq.dispersion_at(&[PI / 2.0, PI / 2.0]).unwrap().abs() < 1e-15);
    }

    #[test]
    fn non_hermitian_model_is_rejected() {
        let err = HoppingModel::new(
            1,
            vec![
                (vec![1], Complex64::new(1.0, 0.0)),
                (vec![-1], Complex64::new(0.5, 0.0)),
            ],
            0.0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidModel(_)));
        let err = HoppingModel::new(1, vec![(vec![0], Complex64::new(0.0, 1.0))], 0.0).unwrap_err();
        assert!(matches!(err, Error::InvalidModel(_)));
    }

    #[test]
    fn zero_offset_is_always_present() {
        let m = HoppingModel::new(
            1,
            vec![
                (vec![1], Complex64::new(1.0, 0.0)),
                (vec![-1], Complex64::new(1.0, 0.0)),
            ],
            0.0,
        )
        .unwrap();
        assert!(m.hoppings().contains_key(&vec![0]));
    }

    #[test]
    fn dispersion_is_real_on_random_points() {
        let m = HoppingModel::new(
            2,
            vec![
                (vec![1, 0], Complex64::new(1.0, 0.3)),
                (vec![-1, 0], Complex64::new(1.0, -0.3)),
                (vec![1, 2], Complex64::new(-0.2, 0.7)),
                (vec![-1, -2], Complex64::new(-0.2, -0.7)),
                (vec![0, 0], Complex64::new(0.1, 0.0)),
            ],
            0.05,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let k = [rng.gen_range(-PI..PI), rng.gen_range(-PI..PI)];
            m.dispersion_at(&k).unwrap();
            // the line form must agree with the direct sum
            let line = m.line(&k[..1]);
            assert!((line.eval(k[1]) - m.dispersion_at(&k).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn indicator_examples() {
        let sea = FermiSea::from_dispersion(chain());
        assert!(!sea.indicator(&[0.0]));
        assert!(sea.indicator(&[PI]));
        assert!(FermiSea::half_filled_chain().indicator(&[0.0]));
        let cb = FermiSea::checkerboard(2).unwrap();
        let l = PI / 2.0;
        assert!(cb.indicator(&[l / 2.0, l / 2.0]));
        assert!(!cb.indicator(&[1.5 * l, l / 2.0]));
    }

    #[test]
    fn ties_are_unoccupied() {
        let sea = FermiSea::from_dispersion(chain());
        // ε(π/2) is exactly zero only up to rounding; a model with a genuine
        // zero: constant ε = 0.
        let flat = FermiSea::from_dispersion(HoppingModel::new(1, vec![], 0.0).unwrap());
        assert!(!flat.indicator(&[0.3]));
        assert!(!sea.indicator(&[0.0]));
    }

    #[test]
    fn filling_examples() {
        assert!((FermiSea::half_filled_chain().filling() - 0.5).abs() < 1e-15);
        for m in [1, 2, 5] {
            assert_eq!(FermiSea::checkerboard(m).unwrap().filling(), 0.5);
        }
        let ball = FermiSea::ball_union(
            2,
            vec![Ball {
                center: vec![0.0, 0.0],
                radius: 1.0,
            }],
        )
        .unwrap();
        assert!((ball.filling() - PI / (4.0 * PI * PI)).abs() < 1e-15);
        assert!((ball.filling() - 0.07958).abs() < 1e-5);
    }

    #[test]
    fn particle_hole_symmetric_dispersion_is_half_filled() {
        for d in 1..=2 {
            let sea =
                FermiSea::from_dispersion(HoppingModel::nearest_neighbor(d, 1.0, 0.0).unwrap());
            assert!(
                (sea.filling() - 0.5).abs() < 1e-3,
                "d={d}: {}",
                sea.filling()
            );
        }
    }

    #[test]
    fn ball_union_rejects_overlap_across_boundary() {
        let err = FermiSea::ball_union(
            1,
            vec![
                Ball {
                    center: vec![-3.0],
                    radius: 0.5,
                },
                Ball {
                    center: vec![3.0],
                    radius: 0.5,
                },
            ],
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidSea(_)));
    }

    fn sample_seas() -> Vec<FermiSea> {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cells: Vec<bool> = (0..64).map(|_| rng.gen_bool(0.4)).collect();
        vec![
            FermiSea::half_filled_chain(),
            FermiSea::interval_product(vec![0.4, -2.9], vec![1.0, 0.7]).unwrap(),
            FermiSea::ball_union(
                3,
                vec![
                    Ball {
                        center: vec![-1.5, 0.0, 0.0],
                        radius: 1.0,
                    },
                    Ball {
                        center: vec![1.5, 0.0, 3.0],
                        radius: 1.0,
                    },
                ],
            )
            .unwrap(),
            FermiSea::checkerboard(3).unwrap(),
            FermiSea::grid(2, 8, cells).unwrap(),
            FermiSea::from_dispersion(HoppingModel::nearest_neighbor(2, 1.0, 0.3).unwrap()),
            FermiSea::half_filled_chain().complement(),
        ]
    }

    #[test]
    fn indicator_is_periodic() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for sea in sample_seas() {
            let d = sea.dim();
            for _ in 0..500 {
                let k: Vec<f64> = (0..d).map(|_| rng.gen_range(-PI..PI)).collect();
                for axis in 0..d {
                    let mut shifted = k.clone();
                    shifted[axis] += TWO_PI;
                    assert_eq!(
                        sea.indicator(&k),
                        sea.indicator(&shifted),
                        "{}",
                        sea.label()
                    );
                }
            }
        }
    }

    #[test]
    fn line_occupancy_matches_indicator() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for sea in sample_seas() {
            let d = sea.dim();
            for _ in 0..200 {
                let k: Vec<f64> = (0..d).map(|_| rng.gen_range(-PI..PI)).collect();
                let ivs = sea.line_occupancy(&k[..d - 1], 1024);
                let t = k[d - 1];
                let inside = ivs.iter().any(|&(a, b)| a < t && t < b);
                let near_edge = ivs
                    .iter()
                    .any(|&(a, b)| (a - t).abs() < 1e-9 || (b - t).abs() < 1e-9);
                if !near_edge {
                    assert_eq!(inside, sea.indicator(&k), "{} at {k:?}", sea.label());
                }
            }
        }
    }

    #[test]
    fn complement_intervals_partition_the_line() {
        let occ = vec![(-PI, -2.0), (0.5, 1.0)];
        let comp = complement_intervals(&occ);
        assert_eq!(comp, vec![(-2.0, 0.5), (1.0, PI)]);
        let total: f64 = occ.iter().chain(&comp).map(|(a, b)| b - a).sum();
        assert!((total - TWO_PI).abs() < 1e-15);
    }

    #[test]
    fn closed_form_and_scanned_roots_agree() {
        let m = HoppingModel::nearest_neighbor(2, 1.0, 0.4).unwrap();
        for &kx in &[0.0, 0.3, 1.7, -2.9, PI] {
            let line = m.line(&[kx]);
            let exact = line.negative_intervals(64);
            let scanned = line.scanned_intervals(4096);
            let len = |v: &[(f64, f64)]| v.iter().map(|(a, b)| b - a).sum::<f64>();
            assert!((len(&exact) - len(&scanned)).abs() < 1e-12, "kx={kx}");
        }
    }

    #[test]
    fn nearly_tangent_crossings_are_found() {
        // ε(t) = (1 − 1e-6) + cos 2t + 2e-9 cos t dips to about −1e-6 near
        // t = ±π/2, giving crossing pairs about 1.4e-3 apart
        let m = HoppingModel::new(
            1,
            vec![
                (vec![2], Complex64::new(0.5, 0.0)),
                (vec![-2], Complex64::new(0.5, 0.0)),
                (vec![1], Complex64::new(1e-9, 0.0)),
                (vec![-1], Complex64::new(1e-9, 0.0)),
            ],
            1.0 - 1e-6,
        )
        .unwrap();
        let ivs = m.line(&[]).negative_intervals(32);
        assert_eq!(ivs.len(), 2, "{ivs:?}");
        for (a, b) in ivs {
            assert!(b - a > 1e-4 && b - a < 1e-2);
            assert!(m.dispersion_at(&[0.5 * (a + b)]).unwrap() < 0.0);
        }
    }

    #[test]
    fn wrap_is_half_open() {
        assert_eq!(wrap(PI), -PI);
        assert!((wrap(3.0 * PI + 0.1) - (-PI + 0.1)).abs() < 1e-12);
        assert_eq!(wrap(0.0), 0.0);
    }
}
