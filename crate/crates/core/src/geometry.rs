//! Momentum-space geometry of a Fermi sea: the uncovered volume Ξ(q), the
//! projected Fermi-surface area s(q̂), the Fejér kernel, and the Fourier-side
//! evaluation of tr(𝟙−γ̃²) for cubic regions.

use std::f64::consts::{LN_2, PI};
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::csv_err;
use crate::model::{unit_ball_volume, wrap, FermiSea, GridSea, LineSettings, TWO_PI};
use crate::quad::{self, AdaptiveOptions, PanelRule};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Largest change of Ξ tolerated when the line resolution is doubled.
pub const XI_CHECK_TOL: f64 = 1e-3;

/// Largest L accepted by [`purity_via_fourier`] per dimension.
pub const FOURIER_L_CAP: [usize; 3] = [4096, 64, 12];

const FOURIER_ORDER: [usize; 3] = [8, 6, 4];
const GRADED_LEVELS: i32 = 8;

/// Fejér kernel F_L(x) = sin²(Lx/2)/sin²(x/2), equal to L² at x ≡ 0.
pub fn fejer(x: f64, l: usize) -> f64 {
    let lf = l as f64;
    let x = wrap(x);
    if x.abs() < 1e-6 && lf * x.abs() < 1e-4 {
        return lf * lf * (1.0 - (lf * lf - 1.0) * x * x / 12.0);
    }
    let r = (0.5 * lf * x).sin() / (0.5 * x).sin();
    r * r
}

/// Digamma function for positive arguments.
pub fn digamma(mut x: f64) -> f64 {
    assert!(x > 0.0, "digamma is only provided for x > 0");
    let mut acc = 0.0;
    while x < 16.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let x2 = 1.0 / (x * x);
    let series = x2
        * (1.0 / 12.0
            - x2 * (1.0 / 120.0 - x2 * (1.0 / 252.0 - x2 * (1.0 / 240.0 - x2 * (1.0 / 132.0)))));
    acc + x.ln() - 0.5 / x - series
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FejerLinearSum {
    pub l: usize,
    /// ∫₀^π F_L(x)·x dx.
    pub quadrature: f64,
    pub quadrature_error: f64,
    /// 2(1 + γ + ln 2 + ψ(L)).
    pub digamma_formula: f64,
}

impl FejerLinearSum {
    pub fn deviation(&self) -> f64 {
        (self.quadrature - self.digamma_formula).abs()
    }
}

pub fn fejer_linear_sum(l: usize) -> Result<FejerLinearSum> {
    if l == 0 {
        return Err(Error::Domain("Fejér kernel needs L >= 1".into()));
    }
    // panels between consecutive zeros 2πj/L
    let step = TWO_PI / l as f64;
    let mut breaks: Vec<f64> = (0..)
        .map(|j| j as f64 * step)
        .take_while(|&x| x < PI)
        .collect();
    breaks.push(PI);
    let opts = AdaptiveOptions {
        abs_tol: 1e-13,
        rel_tol: 1e-14,
        max_intervals: 200_000,
    };
    let (quadrature, quadrature_error, _) = quad::integrate(|x| fejer(x, l) * x, &breaks, opts);
    Ok(FejerLinearSum {
        l,
        quadrature,
        quadrature_error,
        digamma_formula: 2.0 * (1.0 + EULER_GAMMA + LN_2 + digamma(l as f64)),
    })
}

/// Ξ(q) = ∫ dk θ(k)(1 − θ(k+q)) over the Brillouin zone, with k+q taken on
/// the torus.
///
/// Boxes, balls (d ≤ 3), checkerboards and grid seas are evaluated in
/// closed form. Other seas are integrated line by line and the result is
/// checked against a run at doubled resolution.
pub fn xi(sea: &FermiSea, q: &[f64]) -> Result<f64> {
    check_dim(sea, q)?;
    if let Some(v) = xi_closed(sea, q) {
        return Ok(v);
    }
    let d = sea.dim();
    let settings = xi_settings(d);
    let base = xi_lines(sea, &q[..d - 1], &[q[d - 1]], &settings)?[0];
    let fine = xi_lines(sea, &q[..d - 1], &[q[d - 1]], &settings.doubled())?[0];
    if (base - fine).abs() > XI_CHECK_TOL {
        return Err(Error::Accuracy {
            what: "Ξ changed under doubled line resolution".into(),
            achieved: (base - fine).abs(),
            wanted: XI_CHECK_TOL,
        });
    }
    Ok(fine.max(0.0))
}

/// Ξ at the points `(q_outer, t)` for every `t` in `q_last`.
pub fn xi_batch(sea: &FermiSea, q_outer: &[f64], q_last: &[f64]) -> Result<Vec<f64>> {
    XiRows::new(sea).row(q_outer, q_last)
}

/// Outer-axis nodes with the occupied intervals of their lines cached, used
/// to evaluate whole rows of Ξ for two-dimensional line seas.
struct LineTable {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    own: Vec<Vec<(f64, f64)>>,
    own_len: Vec<f64>,
    samples: usize,
}

const TABLE_PANELS: usize = 512;
const TABLE_ORDER: usize = 4;

impl LineTable {
    fn new(sea: &FermiSea) -> Self {
        let samples = LineSettings::for_dim(2).line_samples;
        let rule = PanelRule::new(&sea.outer_breaks(0, TABLE_PANELS), TABLE_ORDER);
        let own: Vec<Vec<(f64, f64)>> = rule
            .nodes
            .iter()
            .map(|&k| sea.line_occupancy(&[k], samples))
            .collect();
        let own_len = own
            .iter()
            .map(|v| v.iter().map(|(a, b)| b - a).sum())
            .collect();
        LineTable {
            nodes: rule.nodes,
            weights: rule.weights,
            own,
            own_len,
            samples,
        }
    }

    fn row(&self, sea: &FermiSea, qx: f64, q_last: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; q_last.len()];
        for j in 0..self.nodes.len() {
            if self.own[j].is_empty() {
                continue;
            }
            let other = sea.line_occupancy(&[wrap(self.nodes[j] + qx)], self.samples);
            for (o, &t) in out.iter_mut().zip(q_last) {
                *o += self.weights[j]
                    * (self.own_len[j]
                        - overlap_length(&self.own[j], &shift_intervals(&other, -t)));
            }
        }
        out.into_iter().map(|v| v.max(0.0)).collect()
    }
}

enum RowMode {
    Closed,
    SingleLine,
    Table(LineTable),
    PerPoint,
}

struct XiRows<'a> {
    sea: &'a FermiSea,
    mode: RowMode,
}

impl<'a> XiRows<'a> {
    fn new(sea: &'a FermiSea) -> Self {
        let d = sea.dim();
        let mode = if xi_closed(sea, &vec![0.0; d]).is_some() {
            RowMode::Closed
        } else {
            match d {
                1 => RowMode::SingleLine,
                2 => RowMode::Table(LineTable::new(sea)),
                _ => RowMode::PerPoint,
            }
        };
        XiRows { sea, mode }
    }

    fn row(&self, q_outer: &[f64], q_last: &[f64]) -> Result<Vec<f64>> {
        let d = self.sea.dim();
        if q_outer.len() + 1 != d {
            return Err(Error::Domain(format!(
                "outer momentum has {} components, sea has dimension {d}",
                q_outer.len()
            )));
        }
        match &self.mode {
            RowMode::Closed => {
                let mut q = q_outer.to_vec();
                q.push(0.0);
                Ok(q_last
                    .iter()
                    .map(|&t| {
                        q[d - 1] = t;
                        xi_closed(self.sea, &q).expect("closed form available")
                    })
                    .collect())
            }
            RowMode::SingleLine => {
                let v = xi_lines(self.sea, q_outer, q_last, &xi_settings(1))?;
                Ok(v.into_iter().map(|x| x.max(0.0)).collect())
            }
            RowMode::Table(t) => Ok(t.row(self.sea, q_outer[0], q_last)),
            RowMode::PerPoint => {
                let settings = xi_settings(d);
                q_last
                    .iter()
                    .map(|&t| Ok(xi_lines(self.sea, q_outer, &[t], &settings)?[0].max(0.0)))
                    .collect()
            }
        }
    }
}

fn check_dim(sea: &FermiSea, q: &[f64]) -> Result<()> {
    if q.len() != sea.dim() {
        return Err(Error::Domain(format!(
            "momentum has {} components, sea has dimension {}",
            q.len(),
            sea.dim()
        )));
    }
    if q.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("momentum must be finite".into()));
    }
    Ok(())
}

fn xi_settings(d: usize) -> LineSettings {
    let mut s = LineSettings::for_dim(d);
    s.adaptive.abs_tol = 1e-10;
    s.adaptive.rel_tol = 1e-10;
    s
}

fn xi_closed(sea: &FermiSea, q: &[f64]) -> Option<f64> {
    match sea {
        FermiSea::Interval(b) => {
            let vol: f64 = b.half_widths().iter().map(|&w| axis_length(w)).product();
            let overlap: f64 = b
                .half_widths()
                .iter()
                .zip(q)
                .map(|(&w, &qi)| periodic_overlap(axis_length(w), qi))
                .product();
            Some((vol - overlap).max(0.0))
        }
        FermiSea::Balls(u) => {
            let d = sea.dim();
            if d > 3 {
                return None;
            }
            let balls = u.balls();
            let vol: f64 = balls
                .iter()
                .map(|b| unit_ball_volume(d) * b.radius.powi(d as i32))
                .sum();
            let mut covered = 0.0;
            for bi in balls {
                for bj in balls {
                    // B_i ∩ (B_j − q): centre offset c_j − q − c_i, all torus images
                    let delta: Vec<f64> = (0..d)
                        .map(|a| wrap(bj.center[a] - q[a] - bi.center[a]))
                        .collect();
                    for image in 0..3usize.pow(d as u32) {
                        let mut n = image;
                        let mut dist2 = 0.0;
                        for da in &delta {
                            let shift = (n % 3) as f64 - 1.0;
                            n /= 3;
                            dist2 += (da + TWO_PI * shift).powi(2);
                        }
                        covered += lens_volume(d, bi.radius, bj.radius, dist2.sqrt());
                    }
                }
            }
            Some((vol - covered).max(0.0))
        }
        FermiSea::Checkerboard(c) => {
            let l = c.edge();
            let a = square_wave_autocorrelation(q[0], l) * square_wave_autocorrelation(q[1], l);
            Some(0.25 * (TWO_PI * TWO_PI - a))
        }
        FermiSea::Grid(g) => Some(xi_grid(g, q)),
        FermiSea::Complement(inner) => {
            let neg: Vec<f64> = q.iter().map(|v| -v).collect();
            xi_closed(inner, &neg)
        }
        FermiSea::Dispersion(_) => None,
    }
}

fn axis_length(w: f64) -> f64 {
    (2.0 * w).clamp(0.0, TWO_PI)
}

// |I ∩ (I − q)| for a periodic interval of length `len`
fn periodic_overlap(len: f64, q: f64) -> f64 {
    if len >= TWO_PI {
        return TWO_PI;
    }
    let delta = wrap(q).abs();
    (len - delta).max(0.0) + (len - (TWO_PI - delta)).max(0.0)
}

// ∫ s(k) s(k+q) dk for the ±1 square wave of half-period l
fn square_wave_autocorrelation(q: f64, l: f64) -> f64 {
    let u = q.rem_euclid(2.0 * l);
    let dist = u.min(2.0 * l - u);
    TWO_PI * (1.0 - 2.0 * dist / l)
}

fn cap_volume(d: usize, r: f64, h: f64) -> f64 {
    let h = h.clamp(0.0, 2.0 * r);
    match d {
        1 => h,
        2 => {
            let t = ((r - h) / r).clamp(-1.0, 1.0);
            r * r * t.acos() - (r - h) * (2.0 * r * h - h * h).max(0.0).sqrt()
        }
        3 => PI * h * h * (3.0 * r - h) / 3.0,
        _ => unreachable!("caps are only needed for d <= 3"),
    }
}

/// Volume of the intersection of two d-balls (d ≤ 3) at centre distance `dist`.
pub fn lens_volume(d: usize, r1: f64, r2: f64, dist: f64) -> f64 {
    if dist >= r1 + r2 {
        return 0.0;
    }
    if dist <= (r1 - r2).abs() {
        return unit_ball_volume(d) * r1.min(r2).powi(d as i32);
    }
    let a = (dist * dist + r1 * r1 - r2 * r2) / (2.0 * dist);
    cap_volume(d, r1, r1 - a) + cap_volume(d, r2, r2 - (dist - a))
}

fn xi_grid(g: &GridSea, q: &[f64]) -> f64 {
    let d = g.dim();
    let m = g.resolution();
    let h = g.cell_width();
    let mut shift = Vec::with_capacity(d);
    let mut frac = Vec::with_capacity(d);
    for &qi in q {
        let t = qi / h;
        let n = t.floor();
        shift.push((n as i64).rem_euclid(m as i64) as usize);
        frac.push(t - n);
    }
    let corners: Vec<(Vec<usize>, f64)> = (0..1usize << d)
        .filter_map(|bits| {
            let mut w = 1.0;
            let mut off = Vec::with_capacity(d);
            for a in 0..d {
                if bits >> a & 1 == 1 {
                    w *= frac[a];
                    off.push((shift[a] + 1) % m);
                } else {
                    w *= 1.0 - frac[a];
                    off.push(shift[a]);
                }
            }
            (w > 0.0).then_some((off, w))
        })
        .collect();
    let cells = g.cells();
    let mut idx = vec![0usize; d];
    let mut target = vec![0usize; d];
    let mut uncovered = 0.0;
    for (flat, &occ) in cells.iter().enumerate() {
        if !occ {
            continue;
        }
        let mut rest = flat;
        for a in (0..d).rev() {
            idx[a] = rest % m;
            rest /= m;
        }
        for (off, w) in &corners {
            for a in 0..d {
                target[a] = (idx[a] + off[a]) % m;
            }
            if !cells[g.flat_index(&target)] {
                uncovered += w;
            }
        }
    }
    uncovered * h.powi(d as i32)
}

// Line route: Ξ = ∫ dk' |I(k')| − |I(k') ∩ (I(k'+q') − q_d)|.
fn xi_lines(
    sea: &FermiSea,
    q_outer: &[f64],
    q_last: &[f64],
    settings: &LineSettings,
) -> Result<Vec<f64>> {
    let samples = settings.line_samples;
    sea.integrate_outer(q_last.len(), settings, |prefix, out| {
        let own = sea.line_occupancy(prefix, samples);
        if own.is_empty() {
            return;
        }
        let len: f64 = own.iter().map(|(a, b)| b - a).sum();
        let shifted_prefix: Vec<f64> = prefix
            .iter()
            .zip(q_outer)
            .map(|(k, q)| wrap(k + q))
            .collect();
        let other = sea.line_occupancy(&shifted_prefix, samples);
        for (o, &t) in out.iter_mut().zip(q_last) {
            *o = len - overlap_length(&own, &shift_intervals(&other, -t));
        }
    })
}

fn shift_intervals(ivs: &[(f64, f64)], s: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(ivs.len() + 1);
    for &(a, b) in ivs {
        let len = b - a;
        if len >= TWO_PI {
            return vec![(-PI, PI)];
        }
        let start = wrap(a + s);
        let end = start + len;
        if end <= PI {
            out.push((start, end));
        } else {
            out.push((start, PI));
            out.push((-PI, end - TWO_PI));
        }
    }
    out.sort_by(|x, y| x.0.total_cmp(&y.0));
    out
}

fn overlap_length(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let (mut i, mut j) = (0, 0);
    let mut total = 0.0;
    while i < a.len() && j < b.len() {
        let lo = a[i].0.max(b[j].0);
        let hi = a[i].1.min(b[j].1);
        if hi > lo {
            total += hi - lo;
        }
        if a[i].1 < b[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    total
}

fn xi_axis_breaks(sea: &FermiSea, axis: usize) -> Vec<f64> {
    match sea {
        FermiSea::Interval(b) => {
            let len = axis_length(b.half_widths()[axis]);
            vec![len, -len, TWO_PI - len, len - TWO_PI]
        }
        FermiSea::Checkerboard(c) => {
            let m = c.cells_per_half_axis() as i64;
            (-m..=m).map(|j| j as f64 * c.edge()).collect()
        }
        FermiSea::Grid(g) => (0..=g.resolution())
            .map(|j| -PI + j as f64 * g.cell_width())
            .collect(),
        FermiSea::Complement(inner) => xi_axis_breaks(inner, axis),
        _ => Vec::new(),
    }
}

// Breakpoints on [0, π]: Fejér zeros, a geometric mesh towards q = 0 and
// known kinks of Ξ along the axis.
fn fourier_half_breaks(sea: &FermiSea, axis: usize, l: usize) -> Vec<f64> {
    let step = TWO_PI / l as f64;
    let mut pts = vec![0.0, PI];
    pts.extend((1..=l / 2).map(|j| j as f64 * step));
    pts.extend((1..=GRADED_LEVELS).map(|k| step * 0.5f64.powi(k)));
    pts.extend(xi_axis_breaks(sea, axis).into_iter().map(f64::abs));
    pts.retain(|x| (0.0..=PI).contains(x));
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    pts
}

// (nodes, weights·F_L) on [0, π] or mirrored onto [-π, π]
fn fourier_axis(sea: &FermiSea, axis: usize, l: usize, mirrored: bool) -> (Vec<f64>, Vec<f64>) {
    let order = FOURIER_ORDER[sea.dim() - 1];
    let half = PanelRule::new(&fourier_half_breaks(sea, axis, l), order);
    let weighted: Vec<f64> = half
        .nodes
        .iter()
        .zip(&half.weights)
        .map(|(&x, &w)| w * fejer(x, l))
        .collect();
    if !mirrored {
        return (half.nodes, weighted);
    }
    let mut nodes: Vec<f64> = half.nodes.iter().rev().map(|x| -x).collect();
    let mut weights: Vec<f64> = weighted.iter().rev().copied().collect();
    nodes.extend(&half.nodes);
    weights.extend(&weighted);
    (nodes, weights)
}

/// tr(𝟙−γ̃²) for the cube of edge `l`, computed as
/// (4/(2π)^{2d}) ∫ dq Ξ(q) ∏ F_L(q_i) by tensor-product quadrature.
///
/// Ξ(q) = Ξ(−q), so the first axis is integrated over [0, π] only.
pub fn purity_via_fourier(sea: &FermiSea, l: usize) -> Result<f64> {
    let d = sea.dim();
    if d == 0 || d > 3 {
        return Err(Error::Capability(format!(
            "Fourier route is provided for d <= 3, got d = {d}"
        )));
    }
    if l == 0 || l > FOURIER_L_CAP[d - 1] {
        return Err(Error::Size {
            what: "Fourier-route edge length".into(),
            size: l,
            cap: FOURIER_L_CAP[d - 1],
        });
    }
    let axes: Vec<(Vec<f64>, Vec<f64>)> = (0..d).map(|a| fourier_axis(sea, a, l, a > 0)).collect();
    let (last_nodes, last_weights) = &axes[d - 1];
    let mut outer: Vec<(Vec<f64>, f64)> = vec![(Vec::new(), 1.0)];
    for (nodes, weights) in &axes[..d - 1] {
        outer = outer
            .into_iter()
            .flat_map(|(q, w)| {
                nodes.iter().zip(weights).map(move |(&x, &wx)| {
                    let mut q = q.clone();
                    q.push(x);
                    (q, w * wx)
                })
            })
            .collect();
    }
    let rows = XiRows::new(sea);
    let parts: Vec<f64> = outer
        .par_iter()
        .map(|(q, w)| -> Result<f64> {
            let vals = rows.row(q, last_nodes)?;
            Ok(w * vals
                .iter()
                .zip(last_weights)
                .map(|(v, lw)| v * lw)
                .sum::<f64>())
        })
        .collect::<Result<_>>()?;
    let total: f64 = 2.0 * parts.iter().sum::<f64>();
    Ok(4.0 * total / TWO_PI.powi(2 * d as i32))
}

/// Projected Fermi-surface area s(q̂) for convex components, one front per
/// component.
pub fn projected_area(sea: &FermiSea, direction: &[f64]) -> Result<f64> {
    check_dim(sea, direction)?;
    let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::Domain("direction must be nonzero".into()));
    }
    let d = sea.dim();
    match sea {
        FermiSea::Balls(u) => {
            let vd1 = if d == 1 { 1.0 } else { unit_ball_volume(d - 1) };
            Ok(u.balls()
                .iter()
                .map(|b| vd1 * b.radius.powi(d as i32 - 1))
                .sum())
        }
        FermiSea::Interval(b) => {
            let lens: Vec<f64> = b.half_widths().iter().map(|&w| axis_length(w)).collect();
            if lens.iter().any(|&x| x <= 0.0) {
                return Ok(0.0);
            }
            let mut s = 0.0;
            for i in 0..d {
                if lens[i] >= TWO_PI {
                    continue;
                }
                let face: f64 = (0..d).filter(|&j| j != i).map(|j| lens[j]).product();
                s += (direction[i] / norm).abs() * face;
            }
            Ok(s)
        }
        _ => Err(Error::Capability(format!(
            "projected area is provided for ball unions and boxes, not {}",
            sea.label()
        ))),
    }
}

/// Projected areas over a set of sampled directions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfaceProjection {
    pub sea: String,
    pub directions: Vec<Vec<f64>>,
    pub areas: Vec<f64>,
    pub s_minus: f64,
    pub s_plus: f64,
}

impl SurfaceProjection {
    pub fn new(sea: &FermiSea, directions: Vec<Vec<f64>>) -> Result<Self> {
        let areas = directions
            .iter()
            .map(|q| projected_area(sea, q))
            .collect::<Result<Vec<_>>>()?;
        let s_minus = areas.iter().copied().fold(f64::INFINITY, f64::min);
        let s_plus = areas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(SurfaceProjection {
            sea: sea.label(),
            directions,
            areas,
            s_minus,
            s_plus,
        })
    }
}

/// Uniformly distributed unit vectors from a seeded generator.
pub fn random_directions(d: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n2: f64 = v.iter().map(|x| x * x).sum();
        if n2 > 1e-6 && n2 <= 1.0 {
            let n = n2.sqrt();
            out.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct XiSample {
    pub q: Vec<f64>,
    pub norm: f64,
    pub xi: f64,
    pub lower: f64,
    pub upper: f64,
    pub ok: bool,
}

/// Sampled Ξ values together with the cone s⁻‖q‖ ≤ Ξ ≤ s⁺‖q‖.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct XiProfile {
    pub sea: String,
    pub dim: usize,
    pub samples: Vec<XiSample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SlopeSource {
    ProjectedArea,
    Empirical,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeReport {
    pub profile: XiProfile,
    pub epsilon: f64,
    pub s_minus: f64,
    pub s_plus: f64,
    pub slopes: SlopeSource,
    pub tol: f64,
    pub violations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeOptions {
    pub directions: usize,
    pub radii: usize,
    pub seed: u64,
}

impl Default for ConeOptions {
    fn default() -> Self {
        ConeOptions {
            directions: 16,
            radii: 8,
            seed: 7,
        }
    }
}

/// Samples Ξ on ‖q‖ ≤ ε and tests it against the cone bounds with
/// tolerance 1e-3·(2π)^d. Slopes come from [`projected_area`] when it is
/// available and from per-direction least-squares fits otherwise.
pub fn cone_check(sea: &FermiSea, epsilon: f64, opts: &ConeOptions) -> Result<ConeReport> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Domain("cone radius must be positive".into()));
    }
    let d = sea.dim();
    let dirs = random_directions(d, opts.directions.max(1), opts.seed);
    let radii: Vec<f64> = (1..=opts.radii.max(1))
        .map(|k| epsilon * k as f64 / opts.radii.max(1) as f64)
        .collect();
    let values: Vec<Vec<f64>> = dirs
        .par_iter()
        .map(|u| {
            radii
                .iter()
                .map(|&r| {
                    let q: Vec<f64> = u.iter().map(|x| x * r).collect();
                    xi(sea, &q)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let (s_minus, s_plus, slopes) = match SurfaceProjection::new(sea, dirs.clone()) {
        Ok(p) => (p.s_minus, p.s_plus, SlopeSource::ProjectedArea),
        Err(Error::Capability(_)) => {
            let r2: f64 = radii.iter().map(|r| r * r).sum();
            let fitted: Vec<f64> = values
                .iter()
                .map(|row| row.iter().zip(&radii).map(|(v, r)| v * r).sum::<f64>() / r2)
                .collect();
            let lo = fitted.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = fitted.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (lo, hi, SlopeSource::Empirical)
        }
        Err(e) => return Err(e),
    };
    let tol = 1e-3 * TWO_PI.powi(d as i32);
    let mut samples = vec![XiSample {
        q: vec![0.0; d],
        norm: 0.0,
        xi: xi(sea, &vec![0.0; d])?,
        lower: 0.0,
        upper: 0.0,
        ok: true,
    }];
    for (u, row) in dirs.iter().zip(&values) {
        for (&r, &v) in radii.iter().zip(row) {
            let (lower, upper) = (s_minus * r, s_plus * r);
            samples.push(XiSample {
                q: u.iter().map(|x| x * r).collect(),
                norm: r,
                xi: v,
                lower,
                upper,
                ok: v >= lower - tol && v <= upper + tol,
            });
        }
    }
    samples[0].ok = samples[0].xi.abs() <= tol;
    let violations = samples.iter().filter(|s| !s.ok).count();
    Ok(ConeReport {
        profile: XiProfile {
            sea: sea.label(),
            dim: d,
            samples,
        },
        epsilon,
        s_minus,
        s_plus,
        slopes,
        tol,
        violations,
    })
}

pub const XI_CSV_VERSION: &str = "# fermisea xi-profile v1";

/// Writes a profile as CSV: q components, Ξ, cone lower, cone upper.
pub fn write_profile_csv<W: Write>(mut out: W, profile: &XiProfile) -> Result<()> {
    writeln!(out, "{XI_CSV_VERSION}")?;
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..profile.dim).map(|i| format!("q{i}")).collect();
    header.extend(["xi", "cone_lower", "cone_upper"].map(String::from));
    w.write_record(&header).map_err(csv_err)?;
    for s in &profile.samples {
        let mut rec: Vec<String> = s.q.iter().map(|v| format!("{v:.17e}")).collect();
        rec.push(format!("{:.17e}", s.xi));
        rec.push(format!("{:.17e}", s.lower));
        rec.push(format!("{:.17e}", s.upper));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
