//! L-sweeps over cubic (or ball-shaped) blocks, least-squares fits of
//! S ≈ c·L^{d−1}·ln L + c₁·L^{d−1} + c₀, and the sandwich
//! c⁻·L^{d−1}·ln L ≤ S ≤ c⁺·L^{d−1}·(ln L)².

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entropy::{block_entropy, read_reports_csv, write_reports_csv, EntropyReport, LogBase};
use crate::error::{Error, Result};
use crate::geometry::purity_via_fourier;
use crate::kernel::{build_region_matrix, CorrelationKernel, Region};

/// Rows with smaller L are left out of fits by default.
pub const DEFAULT_MIN_FIT_L: usize = 8;
pub const MIN_FIT_ROWS: usize = 4;
/// Largest condition number of the column-scaled design matrix.
pub const MAX_CONDITION: f64 = 1e10;
pub const SANDWICH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionKind {
    Cube,
    /// Lattice ball inscribed in the cube of edge L.
    Ball,
}

impl RegionKind {
    pub fn region(self, d: usize, edge: usize) -> Result<Region> {
        match self {
            RegionKind::Cube => Region::cube(d, edge),
            RegionKind::Ball => Region::ball(d, edge as f64 / 2.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub base: LogBase,
    pub region: RegionKind,
    /// Also evaluate tr(𝟙−γ̃²) through the Fourier route.
    pub fourier_check: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            base: LogBase::BITS,
            region: RegionKind::Cube,
            fourier_check: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub sea: String,
    pub d: usize,
    pub region: RegionKind,
    pub reports: Vec<EntropyReport>,
    /// Fourier-route tr(𝟙−γ̃²) per row, when requested.
    pub fourier: Option<Vec<f64>>,
}

impl SweepTable {
    pub fn from_reports(sea: impl Into<String>, d: usize, reports: Vec<EntropyReport>) -> Self {
        SweepTable {
            sea: sea.into(),
            d,
            region: RegionKind::Cube,
            reports,
            fourier: None,
        }
    }

    pub fn edges(&self) -> Vec<usize> {
        self.reports.iter().map(|r| r.edge).collect()
    }

    pub fn entropies(&self) -> Vec<f64> {
        self.reports.iter().map(|r| r.entropy).collect()
    }

    /// Largest relative gap between the matrix and Fourier purities.
    pub fn fourier_deviation(&self) -> Option<f64> {
        let f = self.fourier.as_ref()?;
        Some(
            self.reports
                .iter()
                .zip(f)
                .map(|(r, &v)| (r.purity_lower - v).abs() / r.purity_lower.abs().max(1e-300))
                .fold(0.0, f64::max),
        )
    }
}

/// One entropy report per edge length, sharing the kernel's entry cache.
pub fn sweep(
    kernel: &CorrelationKernel,
    edges: &[usize],
    opts: &SweepOptions,
) -> Result<SweepTable> {
    let d = kernel.dim();
    if edges.is_empty() {
        return Err(Error::Config("sweep needs at least one edge length".into()));
    }
    if edges.contains(&0) {
        return Err(Error::Domain("edge lengths must be positive".into()));
    }
    let regions: Vec<Region> = edges
        .iter()
        .map(|&l| opts.region.region(d, l))
        .collect::<Result<_>>()?;
    // fill the entry cache once from the largest block
    if let Some(largest) = regions.iter().max_by_key(|r| r.len()) {
        build_region_matrix(kernel, largest)?;
    }
    let reports: Vec<EntropyReport> = regions
        .par_iter()
        .map(|r| block_entropy(&build_region_matrix(kernel, r)?, opts.base))
        .collect::<Result<_>>()?;
    let fourier = if opts.fourier_check {
        if opts.region != RegionKind::Cube {
            return Err(Error::Capability(
                "the Fourier route is defined for cubes only".into(),
            ));
        }
        Some(
            edges
                .par_iter()
                .map(|&l| purity_via_fourier(kernel.sea(), l))
                .collect::<Result<_>>()?,
        )
    } else {
        None
    };
    Ok(SweepTable {
        sea: kernel.sea().label(),
        d,
        region: opts.region,
        reports,
        fourier,
    })
}

pub const SWEEP_CSV_VERSION: &str = "# fermisea entropy-sweep v1";

pub fn write_sweep_csv<W: Write>(mut out: W, table: &SweepTable) -> Result<()> {
    writeln!(
        out,
        "{SWEEP_CSV_VERSION} sea={} region={:?}",
        table.sea, table.region
    )?;
    write_reports_csv(out, &table.reports)
}

/// Reads a sweep written by [`write_sweep_csv`] (or a bare report CSV).
pub fn read_sweep_csv<R: Read>(input: R, sea: &str) -> Result<SweepTable> {
    let reports = read_reports_csv(input)?;
    let d = reports
        .first()
        .map(|r| r.d)
        .ok_or_else(|| Error::Config("sweep table has no rows".into()))?;
    if reports.iter().any(|r| r.d != d) {
        return Err(Error::Config("sweep table mixes dimensions".into()));
    }
    Ok(SweepTable::from_reports(sea, d, reports))
}

/// Least-squares fit in the basis {L^{d−1} ln L, L^{d−1}, 1}. For d = 1 the
/// last two columns coincide and `c0` is reported as 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LawFit {
    pub c: f64,
    pub c1: f64,
    pub c0: f64,
    /// Euclidean norm of the residual vector.
    pub residual: f64,
    /// `residual / ‖S‖`.
    pub relative_residual: f64,
    pub rows: usize,
}

fn surface(d: usize, l: f64) -> f64 {
    l.powi(d as i32 - 1)
}

/// Fits `values` against the scaling basis using rows with `L ≥ min_l`.
pub fn fit_law(edges: &[usize], values: &[f64], d: usize, min_l: usize) -> Result<LawFit> {
    if d == 0 {
        return Err(Error::Domain("dimension must be positive".into()));
    }
    let rows: Vec<(f64, f64)> = edges
        .iter()
        .zip(values)
        .filter(|(&l, _)| l >= min_l.max(2))
        .map(|(&l, &s)| (l as f64, s))
        .collect();
    if rows.len() < MIN_FIT_ROWS {
        return Err(Error::Fit(format!(
            "need at least {MIN_FIT_ROWS} rows with L >= {min_l}, got {}",
            rows.len()
        )));
    }
    let cols = if d == 1 { 2 } else { 3 };
    let mut a = DMatrix::<f64>::zeros(rows.len(), cols);
    let y = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
    for (i, &(l, _)) in rows.iter().enumerate() {
        let s = surface(d, l);
        a[(i, 0)] = s * l.ln();
        a[(i, 1)] = s;
        if cols == 3 {
            a[(i, 2)] = 1.0;
        }
    }
    let scales: Vec<f64> = (0..cols).map(|j| a.column(j).norm()).collect();
    for (j, &sc) in scales.iter().enumerate() {
        a.column_mut(j).scale_mut(1.0 / sc);
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin.is_nan() || smin <= 0.0 || smax / smin > MAX_CONDITION {
        return Err(Error::Fit(format!(
            "ill-conditioned scaling basis (condition {:.3e}); widen or spread the L list",
            smax / smin
        )));
    }
    let x = svd
        .solve(&y, 1e-14)
        .map_err(|e| Error::Fit(format!("least-squares solve failed: {e}")))?;
    let coef: Vec<f64> = x.iter().zip(&scales).map(|(v, s)| v / s).collect();
    let residual = (&a * &x - &y).norm();
    let ynorm = y.norm();
    Ok(LawFit {
        c: coef[0],
        c1: coef[1],
        c0: if cols == 3 { coef[2] } else { 0.0 },
        residual,
        relative_residual: if ynorm > 0.0 { residual / ynorm } else { 0.0 },
        rows: rows.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingFit {
    pub sea: String,
    pub d: usize,
    /// Log base of the entropies; the basis itself always uses ln.
    pub base: f64,
    pub edges: Vec<usize>,
    pub entropies: Vec<f64>,
    pub purity_lower: Vec<f64>,
    pub tangent_upper: Vec<Option<f64>>,
    pub min_l: usize,
    pub fit: LawFit,
    /// min over fitted rows of S/(L^{d−1} ln L).
    pub c_minus: f64,
    /// max over fitted rows of S/(L^{d−1} (ln L)²).
    pub c_plus: f64,
}

impl ScalingFit {
    /// Leading coefficient converted to natural-log units.
    pub fn c_nats(&self) -> f64 {
        self.fit.c * self.base.ln()
    }
}

pub fn fit_scaling(table: &SweepTable, d: usize) -> Result<ScalingFit> {
    fit_scaling_from(table, d, DEFAULT_MIN_FIT_L)
}

pub fn fit_scaling_from(table: &SweepTable, d: usize, min_l: usize) -> Result<ScalingFit> {
    if table.reports.iter().any(|r| r.d != d) {
        return Err(Error::Fit(format!(
            "sweep rows are not all of dimension {d}"
        )));
    }
    let base = table.reports.first().map_or(2.0, |r| r.base);
    if table.reports.iter().any(|r| r.base != base) {
        return Err(Error::Fit("sweep rows mix log bases".into()));
    }
    let edges = table.edges();
    let entropies = table.entropies();
    let fit = fit_law(&edges, &entropies, d, min_l)?;
    let mut c_minus = f64::INFINITY;
    let mut c_plus = f64::NEG_INFINITY;
    for (&l, &s) in edges.iter().zip(&entropies) {
        if l < min_l.max(2) {
            continue;
        }
        let lf = l as f64;
        let ln = lf.ln();
        c_minus = c_minus.min(s / (surface(d, lf) * ln));
        c_plus = c_plus.max(s / (surface(d, lf) * ln * ln));
    }
    Ok(ScalingFit {
        sea: table.sea.clone(),
        d,
        base,
        edges,
        entropies,
        purity_lower: table.reports.iter().map(|r| r.purity_lower).collect(),
        tangent_upper: table.reports.iter().map(|r| r.tangent_upper).collect(),
        min_l,
        fit,
        c_minus,
        c_plus,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichRow {
    #[serde(rename = "L")]
    pub edge: usize,
    #[serde(rename = "S")]
    pub entropy: f64,
    pub law_lower: Option<f64>,
    pub law_upper: Option<f64>,
    pub bound_lower: f64,
    pub bound_upper: Option<f64>,
    pub law_ok: bool,
    pub bounds_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichReport {
    pub fit: ScalingFit,
    pub rows: Vec<SandwichRow>,
    /// Rows violating either sandwich.
    pub violations: Vec<usize>,
    /// Smallest slack of the quadratic-bound sandwich over all rows.
    pub min_bound_slack: f64,
    /// S/L^{d−1} does not grow across the fitted rows.
    pub area_law_like: bool,
    /// c⁻ ≤ c⁺ on this sweep.
    pub constants_ordered: bool,
}

pub fn sandwich_report(table: &SweepTable, d: usize) -> Result<SandwichReport> {
    let fit = fit_scaling(table, d)?;
    let mut rows = Vec::with_capacity(table.reports.len());
    let mut violations = Vec::new();
    let mut min_slack = f64::INFINITY;
    for (i, r) in table.reports.iter().enumerate() {
        let lf = r.edge as f64;
        let in_fit = r.edge >= fit.min_l.max(2);
        let (law_lower, law_upper) = if in_fit {
            let s = surface(d, lf);
            let ln = lf.ln();
            (Some(fit.c_minus * s * ln), Some(fit.c_plus * s * ln * ln))
        } else {
            (None, None)
        };
        let scale = SANDWICH_TOL * r.entropy.abs().max(1.0);
        let law_ok = law_lower.is_none_or(|lo| r.entropy >= lo - scale)
            && law_upper.is_none_or(|hi| r.entropy <= hi + scale);
        let (lo_slack, hi_slack) = r.sandwich_slack();
        min_slack = min_slack
            .min(lo_slack)
            .min(hi_slack.unwrap_or(f64::INFINITY));
        let bounds_ok = r.sandwich_holds(SANDWICH_TOL);
        if !(law_ok && bounds_ok) {
            violations.push(i);
        }
        rows.push(SandwichRow {
            edge: r.edge,
            entropy: r.entropy,
            law_lower,
            law_upper,
            bound_lower: r.lower_bound(),
            bound_upper: r.tangent_upper,
            law_ok,
            bounds_ok,
        });
    }
    let ratios: Vec<f64> = table
        .reports
        .iter()
        .filter(|r| r.edge >= fit.min_l.max(2))
        .map(|r| r.entropy / surface(d, r.edge as f64))
        .collect();
    let area_law_like = match (ratios.first(), ratios.last()) {
        (Some(&first), Some(&last)) => last - first <= SANDWICH_TOL * first.abs().max(1.0),
        _ => true,
    };
    let constants_ordered = fit.c_minus <= fit.c_plus;
    Ok(SandwichReport {
        fit,
        rows,
        violations,
        min_bound_slack: min_slack,
        area_law_like,
        constants_ordered,
    })
}

/// JSON summary of a sandwich report: coefficients, residual, c± and violations.
pub fn write_summary_json<W: Write>(out: W, report: &SandwichReport) -> Result<()> {
    #[derive(Serialize)]
    struct Summary<'a> {
        format: &'static str,
        sea: &'a str,
        d: usize,
        base: f64,
        rows: usize,
        c: f64,
        c1: f64,
        c0: f64,
        c_nats: f64,
        residual: f64,
        relative_residual: f64,
        c_minus: f64,
        c_plus: f64,
        constants_ordered: bool,
        area_law_like: bool,
        min_bound_slack: f64,
        violations: Vec<usize>,
    }
    let f = &report.fit;
    let summary = Summary {
        format: "fermisea scaling-fit v1",
        sea: &f.sea,
        d: f.d,
        base: f.base,
        rows: f.fit.rows,
        c: f.fit.c,
        c1: f.fit.c1,
        c0: f.fit.c0,
        c_nats: f.c_nats(),
        residual: f.fit.residual,
        relative_residual: f.fit.relative_residual,
        c_minus: f.c_minus,
        c_plus: f.c_plus,
        constants_ordered: report.constants_ordered,
        area_law_like: report.area_law_like,
        min_bound_slack: report.min_bound_slack,
        violations: report.violations.iter().map(|&i| f.edges[i]).collect(),
    };
    serde_json::to_writer_pretty(out, &summary).map_err(|e| Error::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FermiSea, HoppingModel};
    use proptest::prelude::*;

    fn planted(d: usize, edges: &[usize], f: impl Fn(f64) -> f64) -> SweepTable {
        let reports = edges
            .iter()
            .map(|&l| EntropyReport {
                d,
                edge: l,
                n: l.pow(d as u32),
                entropy: f(l as f64),
                purity_lower: 0.0,
                tangent_upper: None,
                a: None,
                b: None,
                x0: None,
                base: std::f64::consts::E,
            })
            .collect();
        SweepTable::from_reports("planted", d, reports)
    }

    #[test]
    fn sweep_half_filled_chain() {
        let k = CorrelationKernel::new(FermiSea::half_filled_chain());
        let t = sweep(&k, &[1, 2], &SweepOptions::default()).unwrap();
        assert!((t.reports[0].entropy - 1.0).abs() < 1e-14);
        assert!((t.reports[1].entropy - 1.367_520_916_267_477).abs() < 1e-12);
    }

    #[test]
    fn sweep_empty_sea_is_zero() {
        let k = CorrelationKernel::new(FermiSea::empty(2));
        let t = sweep(&k, &[1, 3, 6], &SweepOptions::default()).unwrap();
        assert!(t.entropies().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn sweep_square_lattice_is_monotone() {
        let sea = FermiSea::from_dispersion(HoppingModel::nearest_neighbor(2, 1.0, 0.0).unwrap());
        let k = CorrelationKernel::new(sea);
        let opts = SweepOptions {
            fourier_check: true,
            ..SweepOptions::default()
        };
        let t = sweep(&k, &[4, 8], &opts).unwrap();
        assert!(t.reports[1].entropy > t.reports[0].entropy);
        assert!(t.fourier_deviation().unwrap() < 1e-3);
    }

    #[test]
    fn sweep_ball_regions() {
        let k = CorrelationKernel::new(FermiSea::centered_box(2, 1.2).unwrap());
        let opts = SweepOptions {
            region: RegionKind::Ball,
            ..SweepOptions::default()
        };
        let t = sweep(&k, &[4, 6], &opts).unwrap();
        assert!(t.reports[0].n < 16 && t.reports[1].n < 36);
        assert!(t.reports.iter().all(|r| r.sandwich_holds(1e-9)));
        let bad = SweepOptions {
            fourier_check: true,
            ..opts
        };
        assert!(matches!(sweep(&k, &[3], &bad), Err(Error::Capability(_))));
    }

    #[test]
    fn fit_recovers_planted_law() {
        let edges = [8, 12, 16, 24, 32, 48];
        let t = planted(2, &edges, |l| 5.0 * l * l.ln());
        let f = fit_scaling(&t, 2).unwrap();
        assert!((f.fit.c - 5.0).abs() < 1e-9);
        assert!(f.fit.c1.abs() < 1e-9 && f.fit.c0.abs() < 1e-8);
        assert!(f.fit.residual < 1e-9);
    }

    #[test]
    fn fit_of_empty_rows_is_zero() {
        let t = planted(1, &[8, 16, 32, 64], |_| 0.0);
        let f = fit_scaling(&t, 1).unwrap();
        assert_eq!((f.fit.c, f.fit.c1, f.fit.c0), (0.0, 0.0, 0.0));
        assert_eq!((f.c_minus, f.c_plus), (0.0, 0.0));
    }

    #[test]
    fn fit_rejects_short_or_clustered_lists() {
        let t = planted(1, &[8, 16, 32], |l| l.ln());
        assert!(matches!(fit_scaling(&t, 1), Err(Error::Fit(_))));
        let t = planted(2, &[2, 4, 6, 7], |l| l.ln());
        assert!(matches!(fit_scaling(&t, 2), Err(Error::Fit(_))));
        // identical rows make the basis rank deficient
        let t = planted(2, &[16, 16, 16, 16], |l| l);
        assert!(matches!(fit_scaling(&t, 2), Err(Error::Fit(_))));
    }

    #[test]
    fn constant_rows_are_area_law_like() {
        let t = planted(1, &[8, 16, 32, 64, 128], |_| 1.0);
        let r = sandwich_report(&t, 1).unwrap();
        assert!(r.area_law_like);
        assert!(r.violations.is_empty());
        assert!((r.fit.c_minus - 1.0 / 128f64.ln()).abs() < 1e-15);
        assert!(r.fit.fit.c.abs() < 1e-12);
    }

    #[test]
    fn half_filled_chain_sandwich() {
        let k = CorrelationKernel::new(FermiSea::half_filled_chain());
        let edges: Vec<usize> = (1..=6).map(|p| 1usize << p).collect();
        let t = sweep(&k, &edges, &SweepOptions::default()).unwrap();
        let r = sandwich_report(&t, 1).unwrap();
        assert!(r.violations.is_empty(), "{:?}", r.violations);
        assert!(!r.area_law_like);
        assert!(r.min_bound_slack > 0.0);
        let mut buf = Vec::new();
        write_summary_json(&mut buf, &r).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v["d"], 1);
        assert!(v["violations"].as_array().unwrap().is_empty());
    }

    #[test]
    fn residual_drops_with_small_rows_removed() {
        let k = CorrelationKernel::new(FermiSea::half_filled_chain());
        let edges: Vec<usize> = (2..=96).step_by(2).collect();
        let t = sweep(
            &k,
            &edges,
            &SweepOptions {
                base: LogBase::NATS,
                ..SweepOptions::default()
            },
        )
        .unwrap();
        let all = fit_scaling_from(&t, 1, 2).unwrap();
        let tail = fit_scaling_from(&t, 1, 16).unwrap();
        assert!(tail.fit.residual < all.fit.residual);
    }

    #[test]
    fn sweep_csv_roundtrip() {
        let k = CorrelationKernel::new(FermiSea::half_filled_chain());
        let t = sweep(&k, &[1, 2, 5], &SweepOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &t).unwrap();
        let back = read_sweep_csv(buf.as_slice(), &t.sea).unwrap();
        assert_eq!(back.reports, t.reports);
    }

    proptest! {
        #[test]
        fn fit_is_exact_on_the_basis(
            c in -3.0f64..3.0, c1 in -3.0f64..3.0, c0 in -3.0f64..3.0, d in 1usize..4
        ) {
            let edges = [8, 11, 16, 23, 32, 45, 64];
            let t = planted(d, &edges, |l| {
                let s = l.powi(d as i32 - 1);
                c * s * l.ln() + c1 * s + if d == 1 { 0.0 } else { c0 }
            });
            let f = fit_scaling(&t, d).unwrap();
            prop_assert!((f.fit.c - c).abs() < 1e-8);
            prop_assert!((f.fit.c1 - c1).abs() < 1e-7);
        }
    }
}
