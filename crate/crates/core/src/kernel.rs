//! Correlation kernel γ_x = (2π)^{-d} ∫ dk [1 − 2θ(k)] e^{i k·x} and the
//! finite-region submatrices built from it.

use std::collections::{BTreeSet, HashMap};
use std::f64::consts::PI;
use std::io::Write;
use std::sync::{OnceLock, RwLock};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::model::{Checkerboard, FermiSea, GridSea, IntervalBox, LineSettings, TWO_PI};

pub type Offset = Vec<i64>;

pub const DEFAULT_MAX_OFFSET: i64 = 1 << 16;
pub const DEFAULT_SITE_CAP: usize = 20_000;
/// Allowed disagreement between the quadrature and its doubled-resolution rerun.
pub const QUADRATURE_CHECK_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvalMode {
    /// Closed forms (intervals, checkerboard, grid cells, complements thereof).
    Analytic,
    /// Exact integration along the last k-axis between Fermi-surface
    /// crossings, adaptive Gauss–Kronrod over the other axes.
    Quadrature(LineSettings),
    /// The sea is replaced by its pixelation on an `M^d` grid.
    FftGrid { resolution: usize },
}

impl EvalMode {
    pub fn quadrature_default(d: usize) -> Self {
        EvalMode::Quadrature(LineSettings::for_dim(d))
    }
}

fn analytic_supported(sea: &FermiSea) -> bool {
    match sea {
        FermiSea::Interval(_) | FermiSea::Checkerboard(_) | FermiSea::Grid(_) => true,
        FermiSea::Complement(inner) => analytic_supported(inner),
        FermiSea::Dispersion(_) | FermiSea::Balls(_) => false,
    }
}

/// Toeplitz generator of the infinite correlation matrix, with an offset cache.
#[derive(Debug)]
pub struct CorrelationKernel {
    sea: FermiSea,
    mode: EvalMode,
    max_offset: i64,
    site_cap: usize,
    cache: RwLock<HashMap<Offset, Complex64>>,
    // FFT table for grid evaluation: Σ_c θ_c e^{2πi c·x/M}, indexed by x mod M.
    grid_table: OnceLock<(GridSea, Vec<Complex64>)>,
}

impl Clone for CorrelationKernel {
    fn clone(&self) -> Self {
        CorrelationKernel {
            sea: self.sea.clone(),
            mode: self.mode,
            max_offset: self.max_offset,
            site_cap: self.site_cap,
            cache: RwLock::new(self.cache.read().expect("poisoned").clone()),
            grid_table: self.grid_table.clone(),
        }
    }
}

impl CorrelationKernel {
    /// Analytic evaluation where a closed form exists, line quadrature otherwise.
    pub fn new(sea: FermiSea) -> Self {
        let mode = if analytic_supported(&sea) {
            EvalMode::Analytic
        } else {
            EvalMode::quadrature_default(sea.dim())
        };
        Self::build(sea, mode)
    }

    pub fn with_mode(sea: FermiSea, mode: EvalMode) -> Result<Self> {
        match mode {
            EvalMode::Analytic if !analytic_supported(&sea) => {
                return Err(Error::Capability(format!(
                    "no closed-form kernel for {} seas",
                    sea.label()
                )))
            }
            EvalMode::FftGrid { resolution } if resolution < 2 => {
                return Err(Error::Domain("fft grid needs resolution ≥ 2".into()))
            }
            _ => {}
        }
        Ok(Self::build(sea, mode))
    }

    fn build(sea: FermiSea, mode: EvalMode) -> Self {
        CorrelationKernel {
            sea,
            mode,
            max_offset: DEFAULT_MAX_OFFSET,
            site_cap: DEFAULT_SITE_CAP,
            cache: RwLock::new(HashMap::new()),
            grid_table: OnceLock::new(),
        }
    }

    pub fn with_limits(mut self, max_offset: i64, site_cap: usize) -> Self {
        self.max_offset = max_offset;
        self.site_cap = site_cap;
        self
    }

    pub fn sea(&self) -> &FermiSea {
        &self.sea
    }

    pub fn mode(&self) -> EvalMode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.sea.dim()
    }

    pub fn site_cap(&self) -> usize {
        self.site_cap
    }

    pub fn gamma_entry(&self, x: &[i64]) -> Result<Complex64> {
        Ok(self.gamma_entries(&[x.to_vec()])?[0])
    }

    /// γ_x for every requested offset; uncached offsets are evaluated in one pass.
    pub fn gamma_entries(&self, offsets: &[Offset]) -> Result<Vec<Complex64>> {
        let d = self.dim();
        for x in offsets {
            if x.len() != d {
                return Err(Error::Domain(format!(
                    "offset {x:?} is not {d}-dimensional"
                )));
            }
            if x.iter().any(|v| v.abs() > self.max_offset) {
                return Err(Error::Domain(format!(
                    "offset {x:?} exceeds the configured maximum {}",
                    self.max_offset
                )));
            }
        }
        let missing: Vec<Offset> = {
            let cache = self.cache.read().expect("poisoned");
            let set: BTreeSet<Offset> = offsets
                .iter()
                .filter(|x| !cache.contains_key(*x))
                .cloned()
                .collect();
            set.into_iter().collect()
        };
        if !missing.is_empty() {
            let values = self.evaluate(&missing)?;
            let mut cache = self.cache.write().expect("poisoned");
            for (x, v) in missing.into_iter().zip(values) {
                cache.insert(x, v);
            }
        }
        let cache = self.cache.read().expect("poisoned");
        Ok(offsets.iter().map(|x| cache[x]).collect())
    }

    fn evaluate(&self, offsets: &[Offset]) -> Result<Vec<Complex64>> {
        match self.mode {
            EvalMode::Analytic => Ok(offsets
                .iter()
                .map(|x| self.analytic(&self.sea, x))
                .collect()),
            EvalMode::Quadrature(settings) => quadrature_gamma(&self.sea, offsets, &settings),
            EvalMode::FftGrid { resolution } => {
                let half = (resolution / 2) as i64;
                if let Some(x) = offsets.iter().find(|x| x.iter().any(|v| v.abs() > half)) {
                    return Err(Error::Domain(format!(
                        "offset {x:?} exceeds fft grid half-size {half}"
                    )));
                }
                let (grid, table) = self.grid_table.get_or_init(|| {
                    let pix = match self.sea.pixelate(resolution) {
                        Ok(FermiSea::Grid(g)) => g,
                        _ => unreachable!("pixelate always yields a grid"),
                    };
                    let table = grid_fft_table(&pix);
                    (pix, table)
                });
                Ok(offsets.iter().map(|x| grid_gamma(grid, table, x)).collect())
            }
        }
    }

    fn analytic(&self, sea: &FermiSea, x: &[i64]) -> Complex64 {
        match sea {
            FermiSea::Interval(b) => interval_gamma(b, x),
            FermiSea::Checkerboard(c) => checkerboard_gamma(c, x),
            FermiSea::Grid(g) => {
                let (_, table) = self
                    .grid_table
                    .get_or_init(|| (g.clone(), grid_fft_table(g)));
                grid_gamma(g, table, x)
            }
            FermiSea::Complement(inner) => -self.analytic(inner, x),
            _ => unreachable!("mode checked at construction"),
        }
    }

    /// Dumps `offset..., re, im` rows for the given offsets.
    pub fn write_csv<W: Write>(&self, out: W, offsets: &[Offset]) -> Result<()> {
        let values = self.gamma_entries(offsets)?;
        let mut w = csv::Writer::from_writer(out);
        let d = self.dim();
        let mut header: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
        header.push("re".into());
        header.push("im".into());
        w.write_record(&header).map_err(csv_err)?;
        for (x, v) in offsets.iter().zip(values) {
            let mut row: Vec<String> = x.iter().map(|c| c.to_string()).collect();
            row.push(format!("{:.17e}", v.re));
            row.push(format!("{:.17e}", v.im));
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

fn delta(x: &[i64]) -> f64 {
    if x.iter().all(|&v| v == 0) {
        1.0
    } else {
        0.0
    }
}

/// (1/2π) ∫_{c-w}^{c+w} e^{ikx} dk.
fn interval_factor(center: f64, half_width: f64, x: i64) -> Complex64 {
    if half_width >= PI {
        return Complex64::new(if x == 0 { 1.0 } else { 0.0 }, 0.0);
    }
    if x == 0 {
        return Complex64::new(half_width / PI, 0.0);
    }
    let xf = x as f64;
    let amp = (half_width * xf).sin() / (PI * xf);
    if center == 0.0 {
        Complex64::new(amp, 0.0)
    } else {
        Complex64::from_polar(amp, center * xf)
    }
}

fn interval_gamma(b: &IntervalBox, x: &[i64]) -> Complex64 {
    let mut prod = Complex64::new(1.0, 0.0);
    for ((c, w), &xi) in b.centers().iter().zip(b.half_widths()).zip(x) {
        prod *= interval_factor(*c, *w, xi);
    }
    Complex64::new(delta(x), 0.0) - 2.0 * prod
}

/// (1/2π) ∫ s(k) e^{ikx} dk for the ±1 square wave s(k) = (−1)^{⌊k/l⌋}.
fn square_wave_coefficient(c: &Checkerboard, x: i64) -> Complex64 {
    let l = c.edge();
    let m = c.cells_per_half_axis() as i64;
    let mut acc = Complex64::new(0.0, 0.0);
    for j in -m..m {
        let sign = if j.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        let (a, b) = (j as f64 * l, (j + 1) as f64 * l);
        acc += sign * line_integral(a, b, x);
    }
    acc / TWO_PI
}

fn checkerboard_gamma(c: &Checkerboard, x: &[i64]) -> Complex64 {
    // 1 − 2θ = −s(k_x) s(k_y)
    let g = -square_wave_coefficient(c, x[0]) * square_wave_coefficient(c, x[1]);
    Complex64::new(g.re, g.im)
}

/// ∫_a^b e^{ikx} dk.
pub(crate) fn line_integral(a: f64, b: f64, x: i64) -> Complex64 {
    if x == 0 {
        return Complex64::new(b - a, 0.0);
    }
    let xf = x as f64;
    // (e^{ibx} − e^{iax}) / (ix) = e^{i(a+b)x/2} · 2 sin((b−a)x/2) / x
    Complex64::from_polar(2.0 * ((b - a) * xf / 2.0).sin() / xf, 0.5 * (a + b) * xf)
}

fn grid_fft_table(g: &GridSea) -> Vec<Complex64> {
    let m = g.resolution();
    let d = g.dim();
    let mut data: Vec<Complex64> = g
        .cells()
        .iter()
        .map(|&c| Complex64::new(if c { 1.0 } else { 0.0 }, 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_inverse(m);
    let mut line = vec![Complex64::new(0.0, 0.0); m];
    for axis in 0..d {
        let stride = m.pow((d - 1 - axis) as u32);
        let outer = data.len() / (m * stride);
        for o in 0..outer {
            for s in 0..stride {
                let base = o * m * stride + s;
                for (j, v) in line.iter_mut().enumerate() {
                    *v = data[base + j * stride];
                }
                fft.process(&mut line);
                for (j, v) in line.iter().enumerate() {
                    data[base + j * stride] = *v;
                }
            }
        }
    }
    data
}

fn grid_gamma(g: &GridSea, table: &[Complex64], x: &[i64]) -> Complex64 {
    let m = g.resolution();
    let h = g.cell_width();
    let idx: Vec<usize> = x.iter().map(|&v| v.rem_euclid(m as i64) as usize).collect();
    let mut value = table[g.flat_index(&idx)];
    for &xi in x {
        let xf = xi as f64;
        // ∫ over one cell of e^{ikx}, relative to the cell-0 phase
        let sinc = if xi == 0 {
            1.0
        } else {
            (0.5 * h * xf).sin() / (0.5 * h * xf)
        };
        value *= Complex64::from_polar(h * sinc, (-PI + 0.5 * h) * xf);
    }
    let d = x.len() as i32;
    Complex64::new(delta(x), 0.0) - 2.0 * value / TWO_PI.powi(d)
}

/// ∫ θ(k) e^{ik·x} dk for all offsets, via exact last-axis integration.
fn theta_transform(
    sea: &FermiSea,
    offsets: &[Offset],
    settings: &LineSettings,
) -> Result<Vec<Complex64>> {
    let d = sea.dim();
    let lasts: Vec<i64> = offsets
        .iter()
        .map(|x| x[d - 1])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let last_index: HashMap<i64, usize> = lasts.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let slots: Vec<usize> = offsets.iter().map(|x| last_index[&x[d - 1]]).collect();
    let samples = settings.line_samples;
    let flat = sea.integrate_outer(2 * offsets.len(), settings, |prefix, out| {
        let intervals = sea.line_occupancy(prefix, samples);
        if intervals.is_empty() {
            return;
        }
        let inner: Vec<Complex64> = lasts
            .iter()
            .map(|&xl| {
                intervals
                    .iter()
                    .map(|&(a, b)| line_integral(a, b, xl))
                    .sum()
            })
            .collect();
        for (j, x) in offsets.iter().enumerate() {
            let phase: f64 = x[..d - 1]
                .iter()
                .zip(prefix)
                .map(|(&xi, &ki)| xi as f64 * ki)
                .sum();
            let v = inner[slots[j]] * Complex64::from_polar(1.0, phase);
            out[2 * j] = v.re;
            out[2 * j + 1] = v.im;
        }
    })?;
    Ok(flat.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect())
}

fn quadrature_gamma(
    sea: &FermiSea,
    offsets: &[Offset],
    settings: &LineSettings,
) -> Result<Vec<Complex64>> {
    if let FermiSea::Complement(inner) = sea {
        return Ok(quadrature_gamma(inner, offsets, settings)?
            .into_iter()
            .map(|v| -v)
            .collect());
    }
    let d = sea.dim() as i32;
    let norm = TWO_PI.powi(d);
    let transform = theta_transform(sea, offsets, settings)?;
    let values: Vec<Complex64> = offsets
        .iter()
        .zip(&transform)
        .map(|(x, t)| Complex64::new(delta(x), 0.0) - 2.0 * t / norm)
        .collect();
    // consistency check at the most oscillatory offset with doubled resolution
    let (worst, _) = offsets
        .iter()
        .enumerate()
        .max_by_key(|(_, x)| x.iter().map(|v| v.abs()).max().unwrap_or(0))
        .expect("non-empty offsets");
    let check = theta_transform(sea, &offsets[worst..=worst], &settings.doubled())?[0];
    let rerun = Complex64::new(delta(&offsets[worst]), 0.0) - 2.0 * check / norm;
    let diff = (rerun - values[worst]).norm();
    if diff > QUADRATURE_CHECK_TOL {
        return Err(Error::Accuracy {
            what: format!(
                "kernel entry {:?} changed under resolution doubling",
                offsets[worst]
            ),
            achieved: diff,
            wanted: QUADRATURE_CHECK_TOL,
        });
    }
    Ok(values)
}

/// A finite set of lattice sites.
#[derive(Debug, Clone, PartialEq)]
pub enum RegionShape {
    /// `[0, L)^d`.
    Cube {
        edge: usize,
    },
    VoxelList,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    dim: usize,
    shape: RegionShape,
    sites: Vec<Vec<i64>>,
}

impl Region {
    pub fn cube(dim: usize, edge: usize) -> Result<Self> {
        if dim == 0 || edge == 0 {
            return Err(Error::Domain(
                "cube needs positive dimension and edge".into(),
            ));
        }
        let n = edge
            .checked_pow(dim as u32)
            .ok_or_else(|| Error::Domain("cube too large".into()))?;
        let sites = (0..n)
            .map(|flat| {
                let mut rem = flat;
                let mut site = vec![0i64; dim];
                for axis in (0..dim).rev() {
                    site[axis] = (rem % edge) as i64;
                    rem /= edge;
                }
                site
            })
            .collect();
        Ok(Region {
            dim,
            shape: RegionShape::Cube { edge },
            sites,
        })
    }

    pub fn voxels(dim: usize, sites: Vec<Vec<i64>>) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::Domain("region needs at least one site".into()));
        }
        if sites.iter().any(|s| s.len() != dim) {
            return Err(Error::Domain("voxel has wrong dimension".into()));
        }
        let distinct: BTreeSet<&Vec<i64>> = sites.iter().collect();
        if distinct.len() != sites.len() {
            return Err(Error::Domain("voxels must be distinct".into()));
        }
        Ok(Region {
            dim,
            shape: RegionShape::VoxelList,
            sites,
        })
    }

    /// Lattice sites inside the Euclidean ball of radius `r` around the
    /// centre of the cube `[0, L)^d` with `L = ⌈2r⌉`.
    pub fn ball(dim: usize, radius: f64) -> Result<Self> {
        let edge = (2.0 * radius).ceil().max(1.0) as usize;
        let c = (edge as f64 - 1.0) / 2.0;
        let cube = Region::cube(dim, edge)?;
        let sites: Vec<Vec<i64>> = cube
            .sites
            .into_iter()
            .filter(|s| s.iter().map(|&v| (v as f64 - c).powi(2)).sum::<f64>() <= radius * radius)
            .collect();
        Region::voxels(dim, sites)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn shape(&self) -> &RegionShape {
        &self.shape
    }
    pub fn sites(&self) -> &[Vec<i64>] {
        &self.sites
    }
    pub fn len(&self) -> usize {
        self.sites.len()
    }
    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// Edge of the smallest axis-aligned cube containing the region.
    pub fn linear_size(&self) -> usize {
        match self.shape {
            RegionShape::Cube { edge } => edge,
            RegionShape::VoxelList => (0..self.dim)
                .map(|axis| {
                    let lo = self.sites.iter().map(|s| s[axis]).min().unwrap_or(0);
                    let hi = self.sites.iter().map(|s| s[axis]).max().unwrap_or(0);
                    (hi - lo + 1) as usize
                })
                .max()
                .unwrap_or(1),
        }
    }
}

/// Hermitian submatrix γ̃ of the correlation operator restricted to a region.
#[derive(Debug, Clone)]
pub struct RegionMatrix {
    region: Region,
    entries: DMatrix<Complex64>,
    real: bool,
}

/// Imaginary parts below this are treated as quadrature noise.
const REAL_THRESHOLD: f64 = 1e-12;

impl RegionMatrix {
    /// Wraps an explicit Hermitian matrix (used for finite chains and tests).
    pub fn from_entries(region: Region, entries: DMatrix<Complex64>) -> Result<Self> {
        let n = region.len();
        if entries.nrows() != n || entries.ncols() != n {
            return Err(Error::Domain("matrix size does not match region".into()));
        }
        let residue = hermiticity_residue(&entries);
        if residue > 1e-12 {
            return Err(Error::Numeric(format!(
                "matrix is not Hermitian (residue {residue:.3e})"
            )));
        }
        let real = entries.iter().all(|z| z.im.abs() <= REAL_THRESHOLD);
        Ok(RegionMatrix {
            region,
            entries,
            real,
        })
    }

    pub fn region(&self) -> &Region {
        &self.region
    }
    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }
    pub fn n(&self) -> usize {
        self.entries.nrows()
    }
    /// True when every entry is real up to quadrature noise.
    pub fn is_real(&self) -> bool {
        self.real
    }
    pub fn real_part(&self) -> DMatrix<f64> {
        self.entries.map(|z| z.re)
    }
    pub fn negated(&self) -> Self {
        RegionMatrix {
            region: self.region.clone(),
            entries: -self.entries.clone(),
            real: self.real,
        }
    }
    pub fn hermiticity_residue(&self) -> f64 {
        hermiticity_residue(&self.entries)
    }
}

fn hermiticity_residue(m: &DMatrix<Complex64>) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// γ_{-x} = conj(γ_x): only offsets whose first non-zero component is
/// positive (plus the origin) are evaluated.
fn canonical(x: &[i64]) -> (Offset, bool) {
    match x.iter().find(|&&v| v != 0) {
        Some(&v) if v < 0 => (x.iter().map(|v| -v).collect(), true),
        _ => (x.to_vec(), false),
    }
}

pub fn build_region_matrix(kernel: &CorrelationKernel, region: &Region) -> Result<RegionMatrix> {
    if region.dim() != kernel.dim() {
        return Err(Error::Domain("region and sea dimensions differ".into()));
    }
    let n = region.len();
    if n > kernel.site_cap() {
        return Err(Error::Size {
            what: "region".into(),
            size: n,
            cap: kernel.site_cap(),
        });
    }
    let sites = region.sites();
    let wanted: BTreeSet<Offset> = match region.shape() {
        RegionShape::Cube { edge } => {
            let span = 2 * edge - 1;
            let d = region.dim();
            (0..span.pow(d as u32))
                .map(|flat| {
                    let mut rem = flat;
                    let mut x = vec![0i64; d];
                    for axis in (0..d).rev() {
                        x[axis] = (rem % span) as i64 - (*edge as i64 - 1);
                        rem /= span;
                    }
                    canonical(&x).0
                })
                .collect()
        }
        RegionShape::VoxelList => sites
            .iter()
            .flat_map(|a| {
                sites.iter().map(move |b| {
                    let x: Vec<i64> = a.iter().zip(b).map(|(p, q)| p - q).collect();
                    canonical(&x).0
                })
            })
            .collect(),
    };
    let offsets: Vec<Offset> = wanted.into_iter().collect();
    let values = kernel.gamma_entries(&offsets)?;
    let lookup: HashMap<&Offset, Complex64> = offsets.iter().zip(values).collect();
    let mut m = DMatrix::<Complex64>::zeros(n, n);
    let mut x = vec![0i64; region.dim()];
    for (i, a) in sites.iter().enumerate() {
        for (j, b) in sites.iter().enumerate().skip(i) {
            for (k, (p, q)) in a.iter().zip(b).enumerate() {
                x[k] = p - q;
            }
            let (key, flipped) = canonical(&x);
            let v = lookup[&key];
            let v = if flipped { v.conj() } else { v };
            if i == j {
                m[(i, i)] = Complex64::new(v.re, 0.0);
            } else {
                m[(i, j)] = v;
                m[(j, i)] = v.conj();
            }
        }
    }
    RegionMatrix::from_entries(region.clone(), m)
}
