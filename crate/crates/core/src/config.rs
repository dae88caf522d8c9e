//! Flat `section.key = value` configuration files, the inline sea syntax and
//! the small value grammars shared by the command line.
//!
//! Sea specifications:
//!
//! ```text
//! interval:kf=1.5707963[;center=0][;d=2]     box |k_i − c_i| < kf_i
//! nn:t=1;mu=0;d=2                            ε = 2t Σ cos k_i + μ
//! hop:d=1;mu=0.2;1=1;-1=1                    general hopping, offsets as 1x0, values a+bi
//! balls:d=3;r=0.5;c=-1.5,0,0|1.5,0,0         disjoint balls (one radius or one per ball)
//! checkerboard:m=4
//! empty[:d=2]   full[:d=2]
//! not:<spec>                                 particle-hole partner
//! ```

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::entropy::LogBase;
use crate::error::{Error, Result};
use crate::model::{Ball, FermiSea, HoppingModel, LineSettings};

/// Keys accepted in configuration files.
pub const KNOWN_KEYS: &[&str] = &[
    "sea.spec",
    "sea.d",
    "sea.pixelate",
    "run.L",
    "run.threads",
    "run.seed",
    "entropy.base",
    "output.path",
    "quadrature.line_samples",
    "quadrature.initial_panels",
    "quadrature.abs_tol",
    "quadrature.rel_tol",
    "quadrature.max_intervals",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            let key = key.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(Error::Config(format!(
                    "line {}: unknown key '{key}'",
                    lineno + 1
                )));
            }
            if entries
                .insert(key.to_string(), value.trim().to_string())
                .is_some()
            {
                return Err(Error::Config(format!(
                    "line {}: duplicate key '{key}'",
                    lineno + 1
                )));
            }
        }
        Ok(ConfigFile { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        ConfigFile::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| Error::Config(format!("{key}: cannot parse '{v}'")))
            })
            .transpose()
    }
}

/// Overrides for line-based quadrature.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct QuadratureOverrides {
    pub line_samples: Option<usize>,
    pub initial_panels: Option<usize>,
    pub abs_tol: Option<f64>,
    pub rel_tol: Option<f64>,
    pub max_intervals: Option<usize>,
}

impl QuadratureOverrides {
    pub fn is_empty(&self) -> bool {
        *self == QuadratureOverrides::default()
    }

    pub fn apply(&self, mut s: LineSettings) -> LineSettings {
        if let Some(v) = self.line_samples {
            s.line_samples = v;
        }
        if let Some(v) = self.initial_panels {
            s.initial_panels = v;
        }
        if let Some(v) = self.abs_tol {
            s.adaptive.abs_tol = v;
        }
        if let Some(v) = self.rel_tol {
            s.adaptive.rel_tol = v;
        }
        if let Some(v) = self.max_intervals {
            s.adaptive.max_intervals = v;
        }
        s
    }

    fn or(self, other: QuadratureOverrides) -> Self {
        QuadratureOverrides {
            line_samples: self.line_samples.or(other.line_samples),
            initial_panels: self.initial_panels.or(other.initial_panels),
            abs_tol: self.abs_tol.or(other.abs_tol),
            rel_tol: self.rel_tol.or(other.rel_tol),
            max_intervals: self.max_intervals.or(other.max_intervals),
        }
    }
}

/// Settings shared by every subcommand, merged from flags and an optional
/// configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub subcommand: String,
    pub sea: Option<String>,
    pub d: Option<usize>,
    pub pixelate: Option<usize>,
    pub edges: Option<Vec<usize>>,
    pub out: Option<PathBuf>,
    pub base: LogBase,
    pub quadrature: QuadratureOverrides,
    pub threads: Option<usize>,
    pub seed: u64,
}

pub const DEFAULT_SEED: u64 = 7;
pub const THREADS_ENV: &str = "FERMISEA_THREADS";

/// Values given on the command line; `None` falls back to the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlagValues {
    pub sea: Option<String>,
    pub d: Option<usize>,
    pub pixelate: Option<usize>,
    pub edges: Option<String>,
    pub out: Option<PathBuf>,
    pub base: Option<f64>,
    pub quadrature: QuadratureOverrides,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn merge(subcommand: &str, flags: FlagValues, file: Option<&ConfigFile>) -> Result<Self> {
        let empty = ConfigFile::default();
        let file = file.unwrap_or(&empty);
        if flags.sea.is_some() && file.get("sea.spec").is_some() {
            return Err(Error::Config(
                "sea given both by --sea and by sea.spec in the config file".into(),
            ));
        }
        let sea = flags.sea.or_else(|| file.get("sea.spec").map(String::from));
        let edges = match flags.edges.as_deref().or(file.get("run.L")) {
            Some(s) => Some(parse_edges(s)?),
            None => None,
        };
        let base = match flags.base.or(file.parsed("entropy.base")?) {
            Some(b) => LogBase::new(b).map_err(|e| Error::Config(e.to_string()))?,
            None => LogBase::BITS,
        };
        let file_quad = QuadratureOverrides {
            line_samples: file.parsed("quadrature.line_samples")?,
            initial_panels: file.parsed("quadrature.initial_panels")?,
            abs_tol: file.parsed("quadrature.abs_tol")?,
            rel_tol: file.parsed("quadrature.rel_tol")?,
            max_intervals: file.parsed("quadrature.max_intervals")?,
        };
        let threads =
            match flags.threads.or(file.parsed("run.threads")?) {
                Some(t) => Some(t),
                None => match std::env::var(THREADS_ENV) {
                    Ok(v) => Some(v.trim().parse().map_err(|_| {
                        Error::Config(format!("{THREADS_ENV}: cannot parse '{v}'"))
                    })?),
                    Err(_) => None,
                },
            };
        if threads == Some(0) {
            return Err(Error::Config("thread count must be positive".into()));
        }
        Ok(RunConfig {
            subcommand: subcommand.to_string(),
            sea,
            d: flags.d.or(file.parsed("sea.d")?),
            pixelate: flags.pixelate.or(file.parsed("sea.pixelate")?),
            edges,
            out: flags
                .out
                .or_else(|| file.get("output.path").map(PathBuf::from)),
            base,
            quadrature: flags.quadrature.or(file_quad),
            threads,
            seed: match flags.seed {
                Some(s) => s,
                None => file.parsed("run.seed")?.unwrap_or(DEFAULT_SEED),
            },
        })
    }

    /// The single sea source, parsed and optionally pixelated.
    pub fn sea(&self) -> Result<FermiSea> {
        let spec = self
            .sea
            .as_deref()
            .ok_or_else(|| Error::Config("no sea given (use --sea or sea.spec)".into()))?;
        let sea = parse_sea(spec, self.d)?;
        match self.pixelate {
            Some(m) => sea.pixelate(m),
            None => Ok(sea),
        }
    }

    /// The L list, which must be nonempty and strictly increasing.
    pub fn increasing_edges(&self) -> Result<Vec<usize>> {
        let edges = self
            .edges
            .clone()
            .ok_or_else(|| Error::Config("no L list given (use --L or run.L)".into()))?;
        if edges.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("L list must be strictly increasing".into()));
        }
        Ok(edges)
    }
}

fn num(key: &str, v: &str) -> Result<f64> {
    v.trim()
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::Config(format!("{key}: '{v}' is not a finite number")))
}

fn uint(key: &str, v: &str) -> Result<usize> {
    v.trim()
        .parse::<usize>()
        .map_err(|_| Error::Config(format!("{key}: '{v}' is not a nonnegative integer")))
}

fn num_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|x| num(key, x)).collect()
}

/// Parses `a`, `a+bi`, `a-bi`, `bi`, `i`, `-i`.
pub fn parse_complex(s: &str) -> Result<Complex64> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || Error::Config(format!("'{s}' is not a complex number"));
    if t.is_empty() {
        return Err(bad());
    }
    let Some(body) = t.strip_suffix('i') else {
        return Ok(Complex64::new(num("complex", &t).map_err(|_| bad())?, 0.0));
    };
    // split at the last sign that is not leading and not an exponent sign
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(i) => (&body[..i], &body[i..]),
        None => ("0", body),
    };
    let im = match im {
        "" | "+" => "1",
        "-" => "-1",
        x => x,
    };
    let re: f64 = re.parse().map_err(|_| bad())?;
    let im: f64 = im.parse().map_err(|_| bad())?;
    if !(re.is_finite() && im.is_finite()) {
        return Err(bad());
    }
    Ok(Complex64::new(re, im))
}

fn params(body: &str) -> Result<Vec<(String, String)>> {
    body.split(';')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| Error::Config(format!("sea parameter '{p}' is not key=value")))
        })
        .collect()
}

fn reconcile_dim(found: Option<usize>, given: Option<usize>) -> Result<Option<usize>> {
    match (found, given) {
        (Some(a), Some(b)) if a != b => Err(Error::Config(format!(
            "sea has dimension {a} but d = {b} was requested"
        ))),
        (a, b) => Ok(a.or(b)),
    }
}

/// Parses an inline sea specification. `d` supplies the dimension when the
/// specification leaves it open.
pub fn parse_sea(spec: &str, d: Option<usize>) -> Result<FermiSea> {
    let spec = spec.trim();
    if let Some(inner) = spec.strip_prefix("not:") {
        return Ok(parse_sea(inner, d)?.complement());
    }
    let (kind, body) = spec.split_once(':').unwrap_or((spec, ""));
    let mut kv = params(body)?;
    let explicit_d = match kv.iter().position(|(k, _)| k == "d") {
        Some(i) => Some(uint("d", &kv.remove(i).1)?),
        None => None,
    };
    let d = reconcile_dim(explicit_d, d)?;
    let take = |kv: &mut Vec<(String, String)>, key: &str| -> Option<String> {
        kv.iter()
            .position(|(k, _)| k == key)
            .map(|i| kv.remove(i).1)
    };
    let sea = match kind {
        "empty" | "full" => {
            let d = d.unwrap_or(1);
            if d == 0 {
                return Err(Error::Config("dimension must be positive".into()));
            }
            if kind == "empty" {
                FermiSea::empty(d)
            } else {
                FermiSea::full(d)
            }
        }
        "interval" => {
            let kf = num_list(
                "kf",
                &take(&mut kv, "kf").ok_or_else(|| Error::Config("interval needs kf".into()))?,
            )?;
            let center = match take(&mut kv, "center") {
                Some(c) => num_list("center", &c)?,
                None => Vec::new(),
            };
            let dim =
                reconcile_dim(if kf.len() > 1 { Some(kf.len()) } else { None }, d)?.unwrap_or(1);
            let widths = if kf.len() == 1 { vec![kf[0]; dim] } else { kf };
            let centers = match center.len() {
                0 => vec![0.0; dim],
                1 => vec![center[0]; dim],
                n if n == dim => center,
                n => {
                    return Err(Error::Config(format!(
                        "center has {n} components, expected {dim}"
                    )))
                }
            };
            FermiSea::interval_product(centers, widths)?
        }
        "nn" => {
            let t = take(&mut kv, "t").map_or(Ok(1.0), |v| num("t", &v))?;
            let mu = take(&mut kv, "mu").map_or(Ok(0.0), |v| num("mu", &v))?;
            FermiSea::from_dispersion(HoppingModel::nearest_neighbor(d.unwrap_or(1), t, mu)?)
        }
        "hop" => {
            let mu = take(&mut kv, "mu").map_or(Ok(0.0), |v| num("mu", &v))?;
            let mut terms = Vec::new();
            for (k, v) in kv.drain(..) {
                let offset: Vec<i64> = k
                    .split('x')
                    .map(|c| {
                        c.trim()
                            .parse::<i64>()
                            .map_err(|_| Error::Config(format!("'{k}' is not a hopping offset")))
                    })
                    .collect::<Result<_>>()?;
                terms.push((offset, parse_complex(&v)?));
            }
            let dim = match terms.first() {
                Some((o, _)) => reconcile_dim(Some(o.len()), d)?.unwrap_or(1),
                None => d.unwrap_or(1),
            };
            FermiSea::from_dispersion(HoppingModel::new(dim, terms, mu)?)
        }
        "balls" => {
            let centers: Vec<Vec<f64>> = take(&mut kv, "c")
                .ok_or_else(|| Error::Config("balls needs centres c=..".into()))?
                .split('|')
                .map(|c| num_list("c", c))
                .collect::<Result<_>>()?;
            let radii = num_list(
                "r",
                &take(&mut kv, "r")
                    .ok_or_else(|| Error::Config("balls needs r=..".into()))?
                    .replace('|', ","),
            )?;
            let dim = reconcile_dim(Some(centers[0].len()), d)?.unwrap_or(1);
            let radius = |i: usize| match radii.len() {
                1 => Ok(radii[0]),
                n if n == centers.len() => Ok(radii[i]),
                n => Err(Error::Config(format!(
                    "{n} radii for {} balls",
                    centers.len()
                ))),
            };
            let balls = centers
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    Ok(Ball {
                        center: c.clone(),
                        radius: radius(i)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            FermiSea::ball_union(dim, balls)?
        }
        "checkerboard" => {
            reconcile_dim(Some(2), d)?;
            let m = uint(
                "m",
                &take(&mut kv, "m").ok_or_else(|| Error::Config("checkerboard needs m".into()))?,
            )?;
            FermiSea::checkerboard(m)?
        }
        other => return Err(Error::Config(format!("unknown sea kind '{other}'"))),
    };
    if let Some((k, _)) = kv.first() {
        return Err(Error::Config(format!(
            "unknown parameter '{k}' for sea '{kind}'"
        )));
    }
    Ok(sea)
}

/// Parses an L list: comma-separated integers, inclusive ranges `a..b`,
/// stepped ranges `a..b:s` and geometric ranges `a..b:xk`.
pub fn parse_edges(s: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
        match item.split_once("..") {
            None => out.push(uint("L", item)?),
            Some((a, rest)) => {
                let (b, step) = rest.split_once(':').unwrap_or((rest, "1"));
                let (a, b) = (uint("L", a)?, uint("L", b)?);
                if let Some(f) = step.strip_prefix('x') {
                    let f = uint("L", f)?;
                    if f < 2 || a == 0 {
                        return Err(Error::Config(format!("bad geometric range '{item}'")));
                    }
                    let mut v = a;
                    while v <= b {
                        out.push(v);
                        v *= f;
                    }
                } else {
                    let st = uint("L", step)?;
                    if st == 0 {
                        return Err(Error::Config(format!("zero step in '{item}'")));
                    }
                    out.extend((a..=b).step_by(st));
                }
            }
        }
    }
    if out.is_empty() {
        return Err(Error::Config("empty L list".into()));
    }
    Ok(out)
}

/// Parses a momentum such as `l,0`, `pi/2,-pi`, `2l,0.3` or `3*pi/4`.
/// `l` is the cell edge of a checkerboard sea.
pub fn parse_momentum(s: &str, sea: &FermiSea) -> Result<Vec<f64>> {
    let q: Vec<f64> = s
        .split(',')
        .map(|c| parse_component(c, sea))
        .collect::<Result<_>>()?;
    if q.len() != sea.dim() {
        return Err(Error::Config(format!(
            "momentum '{s}' has {} components, sea has dimension {}",
            q.len(),
            sea.dim()
        )));
    }
    Ok(q)
}

fn parse_component(raw: &str, sea: &FermiSea) -> Result<f64> {
    let bad = || Error::Config(format!("cannot parse momentum component '{raw}'"));
    let t: String = raw.chars().filter(|c| !c.is_whitespace()).collect();
    let (num_part, den) = match t.split_once('/') {
        Some((n, d)) => (n.to_string(), d.parse::<f64>().map_err(|_| bad())?),
        None => (t.clone(), 1.0),
    };
    let (sign, body) = match num_part.strip_prefix('-') {
        Some(b) => (-1.0, b.to_string()),
        None => (1.0, num_part.trim_start_matches('+').to_string()),
    };
    let (coef, unit) = if let Some(c) = body.strip_suffix("pi") {
        (c, PI)
    } else if let Some(c) = body.strip_suffix('l') {
        let l = match sea {
            FermiSea::Checkerboard(cb) => cb.edge(),
            _ => {
                return Err(Error::Config(
                    "'l' is only defined for checkerboard seas".into(),
                ))
            }
        };
        (c, l)
    } else {
        (body.as_str(), 1.0)
    };
    let coef = coef.trim_end_matches('*');
    let c = if coef.is_empty() {
        if unit == 1.0 {
            return Err(bad());
        }
        1.0
    } else {
        coef.parse::<f64>().map_err(|_| bad())?
    };
    let v = sign * c * unit / den;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

/// Parses an integer lattice offset `1,0,-2`.
pub fn parse_offset(s: &str) -> Result<Vec<i64>> {
    s.split(',')
        .map(|c| {
            c.trim()
                .parse::<i64>()
                .map_err(|_| Error::Config(format!("'{s}' is not an integer offset")))
        })
        .collect()
}
