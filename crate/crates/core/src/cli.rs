//! Command-line front end.
//!
//! Every subcommand renders its whole result into memory first; files are
//! written through a temporary sibling and renamed, so a failing run leaves
//! no output behind. Errors are reported on stderr as one line
//! `error kind=<kind> code=<exit code> msg=<message>`.
//!
//! Output formats (first line is always a versioned `#` comment):
//!
//! | subcommand      | columns |
//! |-----------------|---------|
//! | `kernel-entry`  | `x0..,re,im` |
//! | `entropy-sweep` | `d,L,n,S,purity_lower,tangent_upper,a,b,x0,base[,fourier,fourier_rel_dev]` |
//! | `xi-map`        | `q0..,xi` or, with `--cone`, `q0..,xi,cone_lower,cone_upper` |
//! | `purity-check`  | `L,matrix,fourier,rel_dev` |
//! | `fejer-sum`     | `L,quadrature,digamma_formula,deviation,ratio` |
//! | `fit-scaling`   | JSON summary |
//! | `jw-check`      | `N,m,block,spin,fermion,deviation,spectrum_deviation` |
//! | `selftest`      | `PASS name` / `FAIL name detail` lines |

use std::f64::consts::PI;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;

use crate::config::{
    parse_momentum, parse_offset, parse_sea, ConfigFile, FlagValues, QuadratureOverrides, RunConfig,
};
use crate::entropy::{block_entropy, purity_lower_bound, LogBase};
use crate::error::{Error, Result};
use crate::geometry::{
    cone_check, fejer_linear_sum, purity_via_fourier, write_profile_csv, xi, ConeOptions,
};
use crate::jw::{couplings_from_hopping, jw_check, spectrum_deviation, Couplings, SpinChainSpec};
use crate::kernel::{build_region_matrix, CorrelationKernel, EvalMode, Region};
use crate::model::FermiSea;
use crate::scaling::{
    fit_law, read_sweep_csv, sandwich_report, sweep, write_summary_json, write_sweep_csv,
    RegionKind, SweepOptions, SweepTable,
};

#[derive(Debug, Parser)]
#[command(
    name = "fermisea",
    version,
    about = "Entanglement entropy of free-fermion Fermi seas"
)]
struct Cli {
    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: FERMISEA_THREADS or all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for randomized sampling.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Default)]
struct SeaArgs {
    /// Inline sea specification, e.g. `interval:kf=1.57` or `nn:mu=0;d=2`.
    #[arg(long)]
    sea: Option<String>,
    /// Dimension for specifications that leave it open.
    #[arg(long)]
    d: Option<usize>,
    /// Replace the sea by its pixelation on an M^d grid.
    #[arg(long)]
    pixelate: Option<usize>,
}

#[derive(Debug, Args, Default)]
struct QuadArgs {
    #[arg(long)]
    line_samples: Option<usize>,
    #[arg(long)]
    initial_panels: Option<usize>,
    #[arg(long)]
    abs_tol: Option<f64>,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    max_intervals: Option<usize>,
}

impl From<&QuadArgs> for QuadratureOverrides {
    fn from(q: &QuadArgs) -> Self {
        QuadratureOverrides {
            line_samples: q.line_samples,
            initial_panels: q.initial_panels,
            abs_tol: q.abs_tol,
            rel_tol: q.rel_tol,
            max_intervals: q.max_intervals,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Correlation-matrix entries γ_x.
    KernelEntry {
        #[command(flatten)]
        sea: SeaArgs,
        #[command(flatten)]
        quad: QuadArgs,
        /// Lattice offset, comma separated; repeatable.
        #[arg(long = "x", required = true, allow_hyphen_values = true)]
        offsets: Vec<String>,
        /// Evaluate on an M^d FFT grid instead.
        #[arg(long)]
        fft: Option<usize>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Block entropies and bounds over an L list.
    EntropySweep {
        #[command(flatten)]
        sea: SeaArgs,
        #[command(flatten)]
        quad: QuadArgs,
        #[arg(long = "L")]
        edges: Option<String>,
        #[arg(long)]
        base: Option<f64>,
        /// `cube` or `ball`.
        #[arg(long, default_value = "cube")]
        region: String,
        /// Also compute the purity deficit through the Fourier route.
        #[arg(long)]
        fourier: bool,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Ξ(q) at given momenta, or the small-q cone check.
    XiMap {
        #[command(flatten)]
        sea: SeaArgs,
        /// Momentum such as `l,0` or `pi/2,0.1`; repeatable.
        #[arg(long = "q", allow_hyphen_values = true)]
        q: Vec<String>,
        /// Run the cone check on ‖q‖ ≤ EPS.
        #[arg(long)]
        cone: Option<f64>,
        #[arg(long, default_value_t = 16)]
        directions: usize,
        #[arg(long, default_value_t = 8)]
        radii: usize,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// tr(1 − γ̃²) from the block matrix and from the Fourier identity.
    PurityCheck {
        #[command(flatten)]
        sea: SeaArgs,
        #[command(flatten)]
        quad: QuadArgs,
        #[arg(long = "L")]
        edges: Option<String>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// ∫₀^π F_L(x)·x dx against its digamma closed form.
    FejerSum {
        #[arg(long = "L")]
        edges: Option<String>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Area-law fit of a sweep (from --input or computed inline).
    FitScaling {
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        sea: SeaArgs,
        #[command(flatten)]
        quad: QuadArgs,
        #[arg(long = "L")]
        edges: Option<String>,
        #[arg(long)]
        base: Option<f64>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Spin-chain vs free-fermion entropies through Jordan–Wigner.
    JwCheck {
        /// Chain lengths, e.g. `6,8,10`.
        #[arg(long = "N")]
        sites: String,
        /// 1-D nearest-neighbour model instead of explicit couplings.
        #[arg(long)]
        sea: Option<String>,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        h0: f64,
        #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
        h1: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        h2: f64,
        #[arg(long)]
        base: Option<f64>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Runs the invariant suite.
    Selftest {
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::KernelEntry { .. } => "kernel-entry",
            Command::EntropySweep { .. } => "entropy-sweep",
            Command::XiMap { .. } => "xi-map",
            Command::PurityCheck { .. } => "purity-check",
            Command::FejerSum { .. } => "fejer-sum",
            Command::FitScaling { .. } => "fit-scaling",
            Command::JwCheck { .. } => "jw-check",
            Command::Selftest { .. } => "selftest",
        }
    }
}

/// Rendered output of one subcommand.
struct Output {
    bytes: Vec<u8>,
    /// Exit code reported after a successful write.
    status: i32,
}

impl Output {
    fn ok(bytes: Vec<u8>) -> Self {
        Output { bytes, status: 0 }
    }
}

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with_io(argv, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with_io<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            let first = e.to_string();
            let msg = first.lines().next().unwrap_or("invalid arguments");
            return report(
                err,
                &Error::Config(msg.trim_start_matches("error: ").to_string()),
            );
        }
    };
    match execute(cli) {
        Ok((output, path)) => {
            let written = match &path {
                Some(p) => write_atomic(p, &output.bytes),
                None => out.write_all(&output.bytes).map_err(Error::from),
            };
            match written {
                Ok(()) => output.status,
                Err(e) => report(err, &e),
            }
        }
        Err(e) => report(err, &e),
    }
}

fn report(err: &mut dyn Write, e: &Error) -> i32 {
    let code = e.exit_code();
    let msg = e.to_string().replace(['\n', '\r'], " ");
    let _ = writeln!(err, "error kind={} code={code} msg={msg}", e.kind());
    code
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::Io(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        Error::from(e)
    })
}

fn execute(cli: Cli) -> Result<(Output, Option<PathBuf>)> {
    let file = cli.config.as_deref().map(ConfigFile::load).transpose()?;
    let name = cli.command.name();
    let mut flags = FlagValues {
        threads: cli.threads,
        seed: cli.seed,
        ..Default::default()
    };
    match &cli.command {
        Command::KernelEntry { sea, quad, out, .. }
        | Command::PurityCheck { sea, quad, out, .. } => {
            set_sea(&mut flags, sea);
            flags.quadrature = quad.into();
            flags.out = out.clone();
        }
        Command::EntropySweep {
            sea,
            quad,
            out,
            base,
            ..
        }
        | Command::FitScaling {
            sea,
            quad,
            out,
            base,
            ..
        } => {
            set_sea(&mut flags, sea);
            flags.quadrature = quad.into();
            flags.out = out.clone();
            flags.base = *base;
        }
        Command::XiMap { sea, out, .. } => {
            set_sea(&mut flags, sea);
            flags.out = out.clone();
        }
        Command::JwCheck { sea, base, out, .. } => {
            flags.sea = sea.clone();
            flags.base = *base;
            flags.out = out.clone();
        }
        Command::FejerSum { out, .. } | Command::Selftest { out } => flags.out = out.clone(),
    }
    if let Command::EntropySweep { edges, .. }
    | Command::PurityCheck { edges, .. }
    | Command::FejerSum { edges, .. }
    | Command::FitScaling { edges, .. } = &cli.command
    {
        flags.edges = edges.clone();
    }
    let rc = RunConfig::merge(name, flags, file.as_ref())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(rc.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
    let output = pool.install(|| dispatch(&cli.command, &rc))?;
    Ok((output, rc.out.clone()))
}

fn set_sea(flags: &mut FlagValues, sea: &SeaArgs) {
    flags.sea = sea.sea.clone();
    flags.d = sea.d;
    flags.pixelate = sea.pixelate;
}

fn dispatch(cmd: &Command, rc: &RunConfig) -> Result<Output> {
    match cmd {
        Command::KernelEntry { offsets, fft, .. } => kernel_entry(rc, offsets, *fft),
        Command::EntropySweep {
            region, fourier, ..
        } => entropy_sweep(rc, region, *fourier),
        Command::XiMap {
            q,
            cone,
            directions,
            radii,
            ..
        } => xi_map(rc, q, *cone, *directions, *radii),
        Command::PurityCheck { .. } => purity_check(rc),
        Command::FejerSum { .. } => fejer_sum(rc),
        Command::FitScaling { input, .. } => fit_scaling_cmd(rc, input.as_deref()),
        Command::JwCheck {
            sites, h0, h1, h2, ..
        } => jw_check_cmd(
            rc,
            sites,
            Couplings {
                h0: *h0,
                h1: *h1,
                h2: *h2,
            },
        ),
        Command::Selftest { .. } => Ok(selftest(rc)),
    }
}

fn kernel_for(rc: &RunConfig, sea: FermiSea) -> Result<CorrelationKernel> {
    let kernel = CorrelationKernel::new(sea);
    match kernel.mode() {
        EvalMode::Quadrature(s) if !rc.quadrature.is_empty() => CorrelationKernel::with_mode(
            kernel.sea().clone(),
            EvalMode::Quadrature(rc.quadrature.apply(s)),
        ),
        _ => Ok(kernel),
    }
}

fn kernel_entry(rc: &RunConfig, offsets: &[String], fft: Option<usize>) -> Result<Output> {
    let sea = rc.sea()?;
    let kernel = match fft {
        Some(m) => CorrelationKernel::with_mode(sea, EvalMode::FftGrid { resolution: m })?,
        None => kernel_for(rc, sea)?,
    };
    let xs: Vec<Vec<i64>> = offsets
        .iter()
        .map(|s| parse_offset(s))
        .collect::<Result<_>>()?;
    let mut buf = Vec::new();
    writeln!(
        buf,
        "# fermisea kernel-entry v1 sea={}",
        kernel.sea().label()
    )?;
    kernel.write_csv(&mut buf, &xs)?;
    Ok(Output::ok(buf))
}

fn region_kind(s: &str) -> Result<RegionKind> {
    match s {
        "cube" => Ok(RegionKind::Cube),
        "ball" => Ok(RegionKind::Ball),
        other => Err(Error::Config(format!(
            "unknown region '{other}' (cube or ball)"
        ))),
    }
}

fn run_sweep(rc: &RunConfig, region: RegionKind, fourier: bool) -> Result<SweepTable> {
    let kernel = kernel_for(rc, rc.sea()?)?;
    let edges = rc.increasing_edges()?;
    let opts = SweepOptions {
        base: rc.base,
        region,
        fourier_check: fourier,
    };
    sweep(&kernel, &edges, &opts)
}

fn entropy_sweep(rc: &RunConfig, region: &str, fourier: bool) -> Result<Output> {
    let table = run_sweep(rc, region_kind(region)?, fourier)?;
    let mut buf = Vec::new();
    match &table.fourier {
        None => write_sweep_csv(&mut buf, &table)?,
        Some(values) => {
            let mut plain = Vec::new();
            write_sweep_csv(&mut plain, &table)?;
            let text = String::from_utf8(plain).map_err(|e| Error::Io(e.to_string()))?;
            let mut lines = text.lines();
            for (i, line) in lines.by_ref().enumerate().take(2) {
                if i == 1 {
                    writeln!(buf, "{line},fourier,fourier_rel_dev")?;
                } else {
                    writeln!(buf, "{line}")?;
                }
            }
            for (line, (r, f)) in lines.zip(table.reports.iter().zip(values)) {
                let dev = relative_deviation(r.purity_lower, *f);
                writeln!(buf, "{line},{f:e},{dev:e}")?;
            }
        }
    }
    Ok(Output::ok(buf))
}

fn relative_deviation(reference: f64, value: f64) -> f64 {
    let scale = reference.abs().max(1e-300);
    (value - reference).abs() / scale
}

fn xi_map(
    rc: &RunConfig,
    qs: &[String],
    cone: Option<f64>,
    directions: usize,
    radii: usize,
) -> Result<Output> {
    let sea = rc.sea()?;
    let mut buf = Vec::new();
    match cone {
        Some(eps) => {
            if !qs.is_empty() {
                return Err(Error::Config(
                    "--q and --cone are mutually exclusive".into(),
                ));
            }
            let opts = ConeOptions {
                directions,
                radii,
                seed: rc.seed,
            };
            let report = cone_check(&sea, eps, &opts)?;
            write_profile_csv(&mut buf, &report.profile)?;
            writeln!(
                buf,
                "# cone epsilon={:e} s_minus={:e} s_plus={:e} slopes={:?} tol={:e} violations={}",
                report.epsilon,
                report.s_minus,
                report.s_plus,
                report.slopes,
                report.tol,
                report.violations
            )?;
        }
        None => {
            if qs.is_empty() {
                return Err(Error::Config("xi-map needs --q or --cone".into()));
            }
            let momenta: Vec<Vec<f64>> = qs
                .iter()
                .map(|s| parse_momentum(s, &sea))
                .collect::<Result<_>>()?;
            let values: Vec<f64> = {
                use rayon::prelude::*;
                momenta
                    .par_iter()
                    .map(|q| xi(&sea, q))
                    .collect::<Result<_>>()?
            };
            writeln!(buf, "# fermisea xi-map v1 sea={}", sea.label())?;
            let header: Vec<String> = (0..sea.dim())
                .map(|i| format!("q{i}"))
                .chain(["xi".to_string()])
                .collect();
            writeln!(buf, "{}", header.join(","))?;
            for (q, v) in momenta.iter().zip(values) {
                let mut row: Vec<String> = q.iter().map(|x| format!("{x:e}")).collect();
                row.push(format!("{v:e}"));
                writeln!(buf, "{}", row.join(","))?;
            }
        }
    }
    Ok(Output::ok(buf))
}

fn purity_check(rc: &RunConfig) -> Result<Output> {
    use rayon::prelude::*;
    let sea = rc.sea()?;
    let edges = rc.increasing_edges()?;
    let kernel = kernel_for(rc, sea.clone())?;
    let rows: Vec<(usize, f64, f64)> = edges
        .par_iter()
        .map(|&l| {
            let matrix =
                purity_lower_bound(&build_region_matrix(&kernel, &Region::cube(sea.dim(), l)?)?);
            Ok((l, matrix, purity_via_fourier(&sea, l)?))
        })
        .collect::<Result<_>>()?;
    let mut buf = Vec::new();
    writeln!(buf, "# fermisea purity-check v1 sea={}", sea.label())?;
    writeln!(buf, "L,matrix,fourier,rel_dev")?;
    for (l, m, f) in rows {
        writeln!(buf, "{l},{m:e},{f:e},{:e}", relative_deviation(m, f))?;
    }
    Ok(Output::ok(buf))
}

fn fejer_sum(rc: &RunConfig) -> Result<Output> {
    use rayon::prelude::*;
    let edges = rc.increasing_edges()?;
    let rows = edges
        .par_iter()
        .map(|&l| fejer_linear_sum(l))
        .collect::<Result<Vec<_>>>()?;
    let mut buf = Vec::new();
    writeln!(buf, "# fermisea fejer-sum v1")?;
    writeln!(buf, "L,quadrature,digamma_formula,deviation,ratio")?;
    for r in rows {
        let ratio = if r.l > 1 {
            format!("{:e}", r.quadrature / (2.0 * (r.l as f64).ln()))
        } else {
            String::new()
        };
        writeln!(
            buf,
            "{},{:e},{:e},{:e},{ratio}",
            r.l,
            r.quadrature,
            r.digamma_formula,
            r.deviation()
        )?;
    }
    Ok(Output::ok(buf))
}

fn fit_scaling_cmd(rc: &RunConfig, input: Option<&Path>) -> Result<Output> {
    let table = match input {
        Some(path) => {
            if rc.sea.is_some() {
                return Err(Error::Config(
                    "give either --input or a sea, not both".into(),
                ));
            }
            let file = std::fs::File::open(path)
                .map_err(|e| Error::Io(format!("cannot open {}: {e}", path.display())))?;
            read_sweep_csv(std::io::BufReader::new(file), &path.display().to_string())?
        }
        None => run_sweep(rc, RegionKind::Cube, false)?,
    };
    let report = sandwich_report(&table, table.d)?;
    let mut buf = Vec::new();
    write_summary_json(&mut buf, &report)?;
    if !buf.ends_with(b"\n") {
        buf.push(b'\n');
    }
    Ok(Output::ok(buf))
}

fn jw_check_cmd(rc: &RunConfig, sites: &str, couplings: Couplings) -> Result<Output> {
    let ns = crate::config::parse_edges(sites)?;
    let model = match &rc.sea {
        Some(spec) => match parse_sea(spec, Some(1))? {
            FermiSea::Dispersion(m) => Some(m),
            other => {
                return Err(Error::Capability(format!(
                    "jw-check needs a hopping model, got a {} sea",
                    other.label()
                )))
            }
        },
        None => None,
    };
    let specs: Vec<SpinChainSpec> = ns
        .iter()
        .map(|&n| match &model {
            Some(m) => SpinChainSpec::from_model(m, n),
            None => SpinChainSpec::new(n, couplings),
        })
        .collect::<Result<_>>()?;
    let mut buf = Vec::new();
    let c = specs[0].couplings();
    writeln!(
        buf,
        "# fermisea jw-check v1 h0={:e} h1={:e} h2={:e}",
        c.h0, c.h1, c.h2
    )?;
    writeln!(buf, "N,m,block,spin,fermion,deviation,spectrum_deviation")?;
    for spec in &specs {
        let spectrum = if spec.sites() <= crate::jw::MAX_DENSE_SITES {
            format!("{:e}", spectrum_deviation(spec)?)
        } else {
            String::new()
        };
        for row in jw_check(spec, rc.base)? {
            writeln!(
                buf,
                "{},{},{},{:e},{:e},{:e},{spectrum}",
                row.n, row.m, row.block, row.spin, row.fermion, row.deviation
            )?;
        }
    }
    Ok(Output::ok(buf))
}

type Check = (&'static str, fn() -> Result<(bool, String)>);

const SELFTEST: &[Check] = &[
    ("half-filled-chain-single-site", check_single_site),
    ("sandwich-1d", check_sandwich_1d),
    ("particle-hole-2d", check_particle_hole),
    ("empty-and-full-seas", check_empty_full),
    ("checkerboard-xi", check_checkerboard),
    ("fejer-digamma", check_fejer),
    ("fourier-identity-1d", check_fourier_1d),
    ("ball-cone", check_cone),
    ("jordan-wigner", check_jw),
    ("planted-law-fit", check_fit),
    ("concavity-1d", check_concavity),
];

fn selftest(_rc: &RunConfig) -> Output {
    let mut text = String::from("# fermisea selftest v1\n");
    let mut failed = 0;
    for (name, check) in SELFTEST {
        match check() {
            Ok((true, detail)) => {
                let _ = writeln!(text, "PASS {name} {detail}");
            }
            Ok((false, detail)) => {
                failed += 1;
                let _ = writeln!(text, "FAIL {name} {detail}");
            }
            Err(e) => {
                failed += 1;
                let _ = writeln!(text, "FAIL {name} error={}", e.kind());
            }
        }
    }
    let _ = writeln!(text, "# {} checks, {failed} failed", SELFTEST.len());
    Output {
        bytes: text.into_bytes(),
        status: if failed == 0 { 0 } else { 3 },
    }
}

fn chain_kernel() -> CorrelationKernel {
    CorrelationKernel::new(FermiSea::half_filled_chain())
}

fn check_single_site() -> Result<(bool, String)> {
    let m = build_region_matrix(&chain_kernel(), &Region::cube(1, 1)?)?;
    let s = block_entropy(&m, LogBase::BITS)?.entropy;
    Ok(((s - 1.0).abs() < 1e-12, format!("S={s:.15}")))
}

fn check_sandwich_1d() -> Result<(bool, String)> {
    let kernel = chain_kernel();
    let edges: Vec<usize> = (1..=32).collect();
    let table = sweep(&kernel, &edges, &SweepOptions::default())?;
    let bad = table
        .reports
        .iter()
        .filter(|r| !r.sandwich_holds(1e-9))
        .count();
    Ok((bad == 0, format!("violations={bad}")))
}

fn check_particle_hole() -> Result<(bool, String)> {
    let sea = parse_sea("nn:mu=0.7;d=2", None)?;
    let region = Region::cube(2, 4)?;
    let a = block_entropy(
        &build_region_matrix(&CorrelationKernel::new(sea.clone()), &region)?,
        LogBase::BITS,
    )?;
    let b = block_entropy(
        &build_region_matrix(&CorrelationKernel::new(sea.complement()), &region)?,
        LogBase::BITS,
    )?;
    let dev = (a.entropy - b.entropy).abs();
    Ok((dev < 1e-10, format!("deviation={dev:e}")))
}

fn check_empty_full() -> Result<(bool, String)> {
    let region = Region::cube(2, 3)?;
    let mut worst: f64 = 0.0;
    for sea in [FermiSea::empty(2), FermiSea::full(2)] {
        let r = block_entropy(
            &build_region_matrix(&CorrelationKernel::new(sea), &region)?,
            LogBase::BITS,
        )?;
        worst = worst.max(r.entropy.abs()).max(r.purity_lower.abs());
    }
    Ok((worst < 1e-12, format!("max={worst:e}")))
}

fn check_checkerboard() -> Result<(bool, String)> {
    let sea = FermiSea::checkerboard(4)?;
    let v = xi(&sea, &parse_momentum("l,0", &sea)?)?;
    let dev = (v - 2.0 * PI * PI).abs();
    Ok((dev < 1e-6, format!("xi={v:.10}")))
}

fn check_fejer() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for l in [8, 64, 512] {
        let r = fejer_linear_sum(l)?;
        worst = worst.max(r.deviation() * l as f64);
    }
    Ok((worst < 1.01, format!("max_L_times_deviation={worst:.6}")))
}

fn check_fourier_1d() -> Result<(bool, String)> {
    let sea = FermiSea::interval_product(vec![0.3], vec![1.1])?;
    let kernel = CorrelationKernel::new(sea.clone());
    let mut worst: f64 = 0.0;
    for l in [1, 4, 16] {
        let m = purity_lower_bound(&build_region_matrix(&kernel, &Region::cube(1, l)?)?);
        worst = worst.max(relative_deviation(m, purity_via_fourier(&sea, l)?));
    }
    Ok((worst < 1e-6, format!("rel_dev={worst:e}")))
}

fn check_cone() -> Result<(bool, String)> {
    let sea = parse_sea("balls:r=0.5;c=-1.5,0,0|1.5,0,0", None)?;
    let report = cone_check(&sea, 0.05, &ConeOptions::default())?;
    Ok((
        report.violations == 0,
        format!("violations={}", report.violations),
    ))
}

fn check_jw() -> Result<(bool, String)> {
    let spec = SpinChainSpec::new(6, couplings_from_hopping(0.3, Complex64::new(1.0, 0.4)))?;
    let entropy_dev = jw_check(&spec, LogBase::BITS)?
        .iter()
        .map(|r| r.deviation)
        .fold(0.0, f64::max);
    let spectrum_dev = spectrum_deviation(&spec)?;
    Ok((
        entropy_dev < 1e-8 && spectrum_dev < 1e-8,
        format!("entropy_dev={entropy_dev:e} spectrum_dev={spectrum_dev:e}"),
    ))
}

fn check_fit() -> Result<(bool, String)> {
    let edges: Vec<usize> = (8..=40).step_by(4).collect();
    let values: Vec<f64> = edges
        .iter()
        .map(|&l| {
            let l = l as f64;
            0.7 * l * l.ln() - 0.2 * l + 1.5
        })
        .collect();
    let fit = fit_law(&edges, &values, 2, 8)?;
    let dev = (fit.c - 0.7)
        .abs()
        .max((fit.c1 + 0.2).abs())
        .max((fit.c0 - 1.5).abs());
    Ok((
        dev < 1e-8,
        format!("c={:.10} c1={:.10} c0={:.10}", fit.c, fit.c1, fit.c0),
    ))
}

fn check_concavity() -> Result<(bool, String)> {
    let kernel = CorrelationKernel::new(FermiSea::interval_product(vec![0.0], vec![0.9])?);
    let edges: Vec<usize> = (1..=40).collect();
    let s = sweep(&kernel, &edges, &SweepOptions::default())?.entropies();
    let worst = s
        .windows(3)
        .map(|w| w[2] - 2.0 * w[1] + w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((worst <= 1e-10, format!("max_second_difference={worst:e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv: Vec<&str> = std::iter::once("fermisea")
            .chain(args.iter().copied())
            .collect();
        let code = run_with_io(argv, &mut out, &mut err);
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn unknown_flag_is_a_config_error() {
        let (code, out, err) = run_capture(&["fejer-sum", "--L", "4", "--bogus"]);
        assert_eq!(code, 2);
        assert!(out.is_empty());
        assert!(err.starts_with("error kind=config code=2 msg="));
        assert_eq!(err.lines().count(), 1);
    }

    #[test]
    fn checkerboard_xi_map() {
        let (code, out, _) = run_capture(&["xi-map", "--sea", "checkerboard:m=4", "--q", "l,0"]);
        assert_eq!(code, 0);
        let value: f64 = out
            .lines()
            .nth(2)
            .unwrap()
            .split(',')
            .nth(2)
            .unwrap()
            .parse()
            .unwrap();
        assert!((value - 19.7392).abs() < 1e-4);
    }

    #[test]
    fn capability_error_code() {
        let (code, _, err) = run_capture(&["jw-check", "--N", "6", "--sea", "interval:kf=1"]);
        assert_eq!(code, 4, "{err}");
    }

    #[test]
    fn fejer_rows() {
        let (code, out, _) = run_capture(&["fejer-sum", "--L", "1,2,4"]);
        assert_eq!(code, 0);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[1], "L,quadrature,digamma_formula,deviation,ratio");
        assert_eq!(lines.len(), 5);
        assert!(lines[2].ends_with(','));
    }
}
