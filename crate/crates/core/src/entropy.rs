//! Block entanglement entropy from the spectrum of γ̃, with the quadratic
//! lower and tangent upper bounds.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{csv_err, RegionMatrix};

/// Eigenvalues may leave [-1, 1] by at most this much before clamping.
pub const CLAMP_TOL: f64 = 1e-9;

/// Logarithm base for reported entropies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogBase(f64);

impl LogBase {
    pub const BITS: LogBase = LogBase(2.0);
    pub const NATS: LogBase = LogBase(std::f64::consts::E);

    pub fn new(base: f64) -> Result<Self> {
        if !(base.is_finite() && base > 1.0) {
            return Err(Error::Domain(format!("log base must exceed 1, got {base}")));
        }
        Ok(LogBase(base))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Converts a natural-log quantity into this base.
    pub fn from_nats(self, v: f64) -> f64 {
        v / self.0.ln()
    }
}

impl Default for LogBase {
    fn default() -> Self {
        LogBase::BITS
    }
}

/// h(x) = −(1+x)/2 log (1+x)/2 − (1−x)/2 log (1−x)/2.
pub fn binary_entropy(x: f64, base: LogBase) -> Result<f64> {
    if x.is_nan() || x.abs() > 1.0 {
        return Err(Error::Domain(format!(
            "binary entropy needs |x| ≤ 1, got {x}"
        )));
    }
    Ok(base.from_nats(binary_entropy_nats(x)))
}

fn binary_entropy_nats(x: f64) -> f64 {
    let xlogx = |p: f64| if p <= 0.0 { 0.0 } else { -p * p.ln() };
    xlogx(0.5 * (1.0 + x)) + xlogx(0.5 * (1.0 - x))
}

/// Ascending eigenvalues of γ̃, clamped into [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
}

impl Spectrum {
    pub fn from_values(mut values: Vec<f64>) -> Result<Self> {
        for v in values.iter_mut() {
            if !v.is_finite() {
                return Err(Error::Numeric("non-finite eigenvalue".into()));
            }
            if v.abs() > 1.0 + CLAMP_TOL {
                return Err(Error::Numeric(format!(
                    "eigenvalue {v} outside [-1, 1] beyond clamp tolerance"
                )));
            }
            *v = v.clamp(-1.0, 1.0);
        }
        values.sort_by(f64::total_cmp);
        Ok(Spectrum {
            eigenvalues: values,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn entropy(&self, base: LogBase) -> f64 {
        base.from_nats(
            self.eigenvalues
                .iter()
                .map(|&l| binary_entropy_nats(l))
                .sum(),
        )
    }

    /// Σ (1 − λ²).
    pub fn purity_deficit(&self) -> f64 {
        self.eigenvalues.iter().map(|l| 1.0 - l * l).sum()
    }
}

pub fn spectrum(matrix: &RegionMatrix) -> Result<Spectrum> {
    let values: Vec<f64> = if matrix.is_real() {
        matrix
            .real_part()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect()
    } else {
        matrix
            .entries()
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect()
    };
    Spectrum::from_values(values)
}

/// Eigenvalues of a real symmetric matrix, ascending.
pub fn symmetric_spectrum(m: DMatrix<f64>) -> Result<Spectrum> {
    Spectrum::from_values(m.symmetric_eigenvalues().iter().copied().collect())
}

/// tr(𝟙 − γ̃²) = n − Σ_ab |γ̃_ab|², from the entries alone.
pub fn purity_lower_bound(matrix: &RegionMatrix) -> f64 {
    let e = matrix.entries();
    let frob: f64 = e.iter().map(|z| z.norm_sqr()).sum();
    (e.nrows() as f64 - frob).max(0.0)
}

/// Quadratic f(x) = a(1 − x²) + b tangent to h at ±x0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TangentBound {
    pub x0: f64,
    pub a: f64,
    pub b: f64,
}

const DOMINATION_GRID: usize = 10_000;

impl TangentBound {
    pub fn eval(&self, x: f64) -> f64 {
        self.a * (1.0 - x * x) + self.b
    }
}

pub fn tangent_upper_bound(x0: f64, base: LogBase) -> Result<TangentBound> {
    if !(x0 > 0.0 && x0 < 1.0) {
        return Err(Error::Domain(format!(
            "tangent point must lie in (0, 1), got {x0}"
        )));
    }
    // h'(x) = ½ log((1−x)/(1+x))
    let slope = 0.5 * ((1.0 - x0) / (1.0 + x0)).ln();
    let a = -slope / (2.0 * x0);
    let b = binary_entropy_nats(x0) - a * (1.0 - x0 * x0);
    let bound = TangentBound {
        x0,
        a: base.from_nats(a),
        b: base.from_nats(b),
    };
    for i in 0..=DOMINATION_GRID {
        let x = -1.0 + 2.0 * i as f64 / DOMINATION_GRID as f64;
        let h = base.from_nats(binary_entropy_nats(x));
        if bound.eval(x) < h - 1e-12 {
            return Err(Error::Numeric(format!(
                "tangent quadratic at x0={x0} fails to dominate h at x={x}"
            )));
        }
    }
    Ok(bound)
}

/// x0(L) = 1 − 1/g(L) with g(L) = L / ln L.
pub fn x0_schedule(edge: usize) -> Result<f64> {
    if edge < 2 {
        return Err(Error::Domain(format!(
            "x0 schedule needs L ≥ 2, got {edge}"
        )));
    }
    let l = edge as f64;
    Ok((1.0 - l.ln() / l).clamp(0.0, 1.0 - 1e-12))
}

/// Entropy of one block together with its bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub d: usize,
    /// Edge of the (nesting) cube.
    #[serde(rename = "L")]
    pub edge: usize,
    pub n: usize,
    #[serde(rename = "S")]
    pub entropy: f64,
    /// tr(𝟙 − γ̃²), base independent.
    pub purity_lower: f64,
    pub tangent_upper: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub x0: Option<f64>,
    pub base: f64,
}

impl EntropyReport {
    /// Lower bound in the report's base: h_b(x) ≥ log_b(2)·(1 − x²).
    pub fn lower_bound(&self) -> f64 {
        self.purity_lower * 2f64.ln() / self.base.ln()
    }

    /// `S − lower` and `upper − S`; both must be ≥ −1e−9.
    pub fn sandwich_slack(&self) -> (f64, Option<f64>) {
        (
            self.entropy - self.lower_bound(),
            self.tangent_upper.map(|u| u - self.entropy),
        )
    }

    pub fn sandwich_holds(&self, tol: f64) -> bool {
        let (lo, hi) = self.sandwich_slack();
        lo >= -tol && hi.is_none_or(|h| h >= -tol)
    }
}

pub fn block_entropy(matrix: &RegionMatrix, base: LogBase) -> Result<EntropyReport> {
    let spec = spectrum(matrix)?;
    report_from_spectrum(
        &spec,
        matrix.region().dim(),
        matrix.region().linear_size(),
        purity_lower_bound(matrix),
        base,
    )
}

pub fn report_from_spectrum(
    spec: &Spectrum,
    d: usize,
    edge: usize,
    purity: f64,
    base: LogBase,
) -> Result<EntropyReport> {
    let n = spec.values().len();
    let tangent = if edge >= 2 {
        Some(tangent_upper_bound(x0_schedule(edge)?, base)?)
    } else {
        None
    };
    Ok(EntropyReport {
        d,
        edge,
        n,
        entropy: spec.entropy(base),
        purity_lower: purity,
        tangent_upper: tangent.map(|t| t.a * purity + t.b * n as f64),
        a: tangent.map(|t| t.a),
        b: tangent.map(|t| t.b),
        x0: tangent.map(|t| t.x0),
        base: base.value(),
    })
}

pub const REPORT_CSV_VERSION: &str = "# fermisea entropy-report v1";

pub fn write_reports_csv<W: Write>(mut out: W, rows: &[EntropyReport]) -> Result<()> {
    writeln!(out, "{REPORT_CSV_VERSION}")?;
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(CsvRow::from(r)).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_reports_csv<R: Read>(input: R) -> Result<Vec<EntropyReport>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(input);
    rdr.deserialize::<CsvRow>()
        .map(|row| {
            row.map(EntropyReport::from)
                .map_err(|e| Error::Config(e.to_string()))
        })
        .collect()
}

// Fixed column order with full-precision floats.
#[derive(Serialize, Deserialize)]
struct CsvRow {
    d: usize,
    #[serde(rename = "L")]
    edge: usize,
    n: usize,
    #[serde(rename = "S")]
    entropy: String,
    purity_lower: String,
    tangent_upper: String,
    a: String,
    b: String,
    x0: String,
    base: String,
}

fn fmt(v: f64) -> String {
    format!("{v:e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

fn parse_opt(s: &str) -> Option<f64> {
    if s.trim().is_empty() {
        None
    } else {
        s.trim().parse().ok()
    }
}

impl From<&EntropyReport> for CsvRow {
    fn from(r: &EntropyReport) -> Self {
        CsvRow {
            d: r.d,
            edge: r.edge,
            n: r.n,
            entropy: fmt(r.entropy),
            purity_lower: fmt(r.purity_lower),
            tangent_upper: fmt_opt(r.tangent_upper),
            a: fmt_opt(r.a),
            b: fmt_opt(r.b),
            x0: fmt_opt(r.x0),
            base: fmt(r.base),
        }
    }
}

impl From<CsvRow> for EntropyReport {
    fn from(r: CsvRow) -> Self {
        EntropyReport {
            d: r.d,
            edge: r.edge,
            n: r.n,
            entropy: parse_opt(&r.entropy).unwrap_or(f64::NAN),
            purity_lower: parse_opt(&r.purity_lower).unwrap_or(f64::NAN),
            tangent_upper: parse_opt(&r.tangent_upper),
            a: parse_opt(&r.a),
            b: parse_opt(&r.b),
            x0: parse_opt(&r.x0),
            base: parse_opt(&r.base).unwrap_or(2.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{build_region_matrix, CorrelationKernel, Region};
    use crate::model::FermiSea;
    use nalgebra::DMatrix;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn chain_block(edge: usize) -> RegionMatrix {
        let k = CorrelationKernel::new(FermiSea::half_filled_chain());
        build_region_matrix(&k, &Region::cube(1, edge).unwrap()).unwrap()
    }

    #[test]
    fn binary_entropy_examples() {
        let b = LogBase::BITS;
        assert!((binary_entropy(0.0, b).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(binary_entropy(1.0, b).unwrap(), 0.0);
        assert_eq!(binary_entropy(-1.0, b).unwrap(), 0.0);
        // direct evaluation: p = (1 + 2/π)/2
        assert!((binary_entropy(2.0 / PI, b).unwrap() - 0.683_760_458_133_738_6).abs() < 1e-12);
        assert!(matches!(
            binary_entropy(1.0 + 1e-9, b),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn spectrum_examples() {
        let s = spectrum(&chain_block(2)).unwrap();
        assert!((s.values()[0] + 2.0 / PI).abs() < 1e-15);
        assert!((s.values()[1] - 2.0 / PI).abs() < 1e-15);

        let full = CorrelationKernel::new(FermiSea::full(1));
        let m = build_region_matrix(&full, &Region::cube(1, 3).unwrap()).unwrap();
        assert_eq!(spectrum(&m).unwrap().values(), &[-1.0, -1.0, -1.0]);

        let r = Region::cube(1, 1).unwrap();
        let m =
            RegionMatrix::from_entries(r, DMatrix::from_element(1, 1, Complex64::new(0.3, 0.0)))
                .unwrap();
        assert_eq!(spectrum(&m).unwrap().values(), &[0.3]);
    }

    #[test]
    fn eigenvalues_slightly_outside_are_clamped() {
        let s = Spectrum::from_values(vec![1.0 + 5e-10, -1.0 - 5e-10]).unwrap();
        assert_eq!(s.values(), &[-1.0, 1.0]);
        assert!(matches!(
            Spectrum::from_values(vec![1.0 + 1e-6]),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn block_entropy_examples() {
        let r1 = block_entropy(&chain_block(1), LogBase::BITS).unwrap();
        assert!((r1.entropy - 1.0).abs() < 1e-15);
        assert!((r1.purity_lower - 1.0).abs() < 1e-15);
        assert!(r1.tangent_upper.is_none());

        let r2 = block_entropy(&chain_block(2), LogBase::BITS).unwrap();
        assert!((r2.entropy - 2.0 * 0.683_760_458_133_738_6).abs() < 1e-12);
        assert!((r2.purity_lower - 2.0 * (1.0 - 4.0 / (PI * PI))).abs() < 1e-14);
        assert!((r2.purity_lower - 1.18943).abs() < 1e-5);
        assert!(r2.sandwich_holds(1e-9));

        let empty = CorrelationKernel::new(FermiSea::empty(1));
        for edge in [1, 5, 17] {
            let m = build_region_matrix(&empty, &Region::cube(1, edge).unwrap()).unwrap();
            let r = block_entropy(&m, LogBase::BITS).unwrap();
            assert_eq!(r.entropy, 0.0);
            assert_eq!(purity_lower_bound(&m), 0.0);
        }
    }

    #[test]
    fn tangent_examples() {
        let t = tangent_upper_bound(0.9, LogBase::BITS).unwrap();
        // closed forms: a = −h'(x0)/(2 x0), b = h(x0) − a(1 − x0²)
        assert!((t.a - 1.179_979_864_845_440_5).abs() < 1e-12);
        assert!((t.b - 0.062_200_782_795_322_51).abs() < 1e-12);
        let h = binary_entropy(0.9, LogBase::BITS).unwrap();
        assert!((t.eval(0.9) - h).abs() < 1e-12);
        assert!(matches!(
            tangent_upper_bound(0.0, LogBase::BITS),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            tangent_upper_bound(1.0, LogBase::BITS),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn tangent_slope_grows_logarithmically() {
        let mut prev = 0.0;
        for k in 1..=6 {
            let eps = 10f64.powi(-k);
            let t = tangent_upper_bound(1.0 - eps, LogBase::NATS).unwrap();
            assert!(t.a > prev);
            prev = t.a;
            let ratio = t.a / (1.0 / eps).ln();
            assert!(ratio > 0.25 && ratio < 1.0, "k={k}: {ratio}");
        }
    }

    #[test]
    fn schedule_examples() {
        assert!((x0_schedule(2).unwrap() - (1.0 - 2f64.ln() / 2.0)).abs() < 1e-15);
        assert!((x0_schedule(2).unwrap() - 0.65343).abs() < 1e-5);
        assert!((x0_schedule(3).unwrap() - 0.63380).abs() < 1e-5);
        let mut prev = x0_schedule(4).unwrap();
        for l in 5..5000 {
            let x = x0_schedule(l).unwrap();
            assert!(x > prev && x < 1.0);
            prev = x;
        }
        assert!(matches!(x0_schedule(1), Err(Error::Domain(_))));
    }

    #[test]
    fn purity_from_entries_matches_spectrum() {
        for edge in [3, 10, 40] {
            let m = chain_block(edge);
            let s = spectrum(&m).unwrap();
            assert!((s.purity_deficit() - purity_lower_bound(&m)).abs() < 1e-10);
        }
    }

    #[test]
    fn particle_hole_negation_keeps_entropy() {
        let m = chain_block(12);
        let a = block_entropy(&m, LogBase::BITS).unwrap();
        let b = block_entropy(&m.negated(), LogBase::BITS).unwrap();
        assert!((a.entropy - b.entropy).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![
            block_entropy(&chain_block(1), LogBase::BITS).unwrap(),
            block_entropy(&chain_block(8), LogBase::BITS).unwrap(),
        ];
        let mut buf = Vec::new();
        write_reports_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(REPORT_CSV_VERSION));
        assert!(text
            .lines()
            .nth(1)
            .unwrap()
            .starts_with("d,L,n,S,purity_lower,tangent_upper,a,b,x0,base"));
        let back = read_reports_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 2);
        assert!(back[0].tangent_upper.is_none());
        assert!((back[1].entropy - rows[1].entropy).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn base_two_entropy_dominates_purity(x in -1.0f64..=1.0) {
            let h = binary_entropy(x, LogBase::BITS).unwrap();
            prop_assert!(h >= 1.0 - x * x - 1e-15);
        }

        #[test]
        fn tangent_dominates_everywhere(x0 in 0.01f64..0.999_999, x in -1.0f64..=1.0) {
            let t = tangent_upper_bound(x0, LogBase::BITS).unwrap();
            prop_assert!(t.eval(x) >= binary_entropy(x, LogBase::BITS).unwrap() - 1e-12);
        }
    }
}
