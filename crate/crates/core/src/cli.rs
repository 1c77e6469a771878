//! Command-line driver: argument parsing, report writing and audits.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cases::{build_case, convergence_study, CaseConfig, ReferenceKind};
use crate::diagnostics::{EntropyReport, EocTable, NormWeight};
use crate::error::{Error, Result};
use crate::fluxes::{ec_fluxes, limited_scaled_jump, reconstruct_scaled_jump, summed_flux, FluxRequest, SchemeKind};
use crate::grid::Field;
use crate::integrator::{run, EndTimePolicy, LambdaPolicy, RunOutcome, StepConfig};
use crate::kinetic::{build_velocity_set, chi_potential, kinetic_entropy, maxwellian, DEFAULT_LAMBDA_SAFETY};
use crate::linalg::{dot, mat_t_vec, Point, State};
use crate::models::{Model, SwState};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "VECKIN_THREADS";

#[derive(Debug, Parser)]
#[command(name = "veckin", version, about = "Vector-kinetic entropy stable solver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one case and write solution.csv and entropy.csv.
    Run(RunArgs),
    /// Grid-refinement study written to eoc.csv.
    Eoc(EocArgs),
    /// Random sweeps of the flux and moment identities written to audit.csv.
    Audit(AuditArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Ec,
    Es1,
    Es2,
    #[value(name = "es2-limited")]
    Es2Limited,
}

impl From<SchemeArg> for SchemeKind {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Ec => SchemeKind::EC,
            SchemeArg::Es1 => SchemeKind::ES1,
            SchemeArg::Es2 => SchemeKind::ES2,
            SchemeArg::Es2Limited => SchemeKind::ES2Limited,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    PerStep,
    Frozen,
}

impl From<PolicyArg> for LambdaPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::PerStep => LambdaPolicy::PerStep,
            PolicyArg::Frozen => LambdaPolicy::Frozen,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EndTimeArg {
    Exact,
    FirstReach,
}

impl From<EndTimeArg> for EndTimePolicy {
    fn from(e: EndTimeArg) -> Self {
        match e {
            EndTimeArg::Exact => EndTimePolicy::Exact,
            EndTimeArg::FirstReach => EndTimePolicy::FirstReach,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormArg {
    CountScaled,
    Volume,
}

impl From<NormArg> for NormWeight {
    fn from(n: NormArg) -> Self {
        match n {
            NormArg::CountScaled => NormWeight::CountScaled,
            NormArg::Volume => NormWeight::Volume,
        }
    }
}

/// Overrides shared by `run` and `eoc`.
#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    #[arg(long)]
    pub case: String,
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    #[arg(long)]
    pub cfl: Option<f64>,
    #[arg(long = "tend")]
    pub t_end: Option<f64>,
    #[arg(long, value_enum, default_value = "per-step")]
    pub lambda_policy: PolicyArg,
    #[arg(long, default_value_t = DEFAULT_LAMBDA_SAFETY)]
    pub lambda_safety: f64,
    /// `first-reach` keeps the last step at full CFL size and stops past the end time.
    #[arg(long, value_enum, default_value = "exact")]
    pub end_time: EndTimeArg,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub nx: Option<usize>,
    #[arg(long)]
    pub ny: Option<usize>,
    /// Write every k-th entropy row (the first and last are always written).
    #[arg(long, default_value_t = 1)]
    pub report_every: usize,
}

#[derive(Debug, Clone, Args)]
pub struct EocArgs {
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, value_delimiter = ',')]
    pub grids: Option<Vec<usize>>,
    #[arg(long, value_enum, default_value = "count-scaled")]
    pub norm: NormArg,
    /// Cells per direction of the numerical reference, for cases without a
    /// closed-form solution.
    #[arg(long)]
    pub reference_cells: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct AuditArgs {
    #[arg(long)]
    pub case: String,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

/// A validated `run` request.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub case: CaseConfig,
    pub cells: [usize; 2],
    pub config: StepConfig<f64>,
    pub out: PathBuf,
    pub report_every: usize,
}

/// A validated `eoc` request.
#[derive(Debug, Clone, PartialEq)]
pub struct EocManifest {
    pub case: CaseConfig,
    pub grids: Vec<usize>,
    pub config: StepConfig<f64>,
    pub weight: NormWeight,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditManifest {
    pub case: CaseConfig,
    pub samples: usize,
    pub seed: u64,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Manifest {
    Run(RunManifest),
    Eoc(EocManifest),
    Audit(AuditManifest),
}

fn step_config(case: &CaseConfig, a: &SolverArgs) -> Result<StepConfig<f64>> {
    let scheme = a.scheme.map_or(case.scheme(), SchemeKind::from);
    let mut config = case.step_config::<f64>(scheme, a.t_end.unwrap_or(case.t_end_for(scheme)));
    if let Some(c) = a.cfl {
        config.cfl = c;
    }
    config.lambda_policy = a.lambda_policy.into();
    config.lambda_safety = a.lambda_safety;
    config.end_time = a.end_time.into();
    config.validate()?;
    Ok(config)
}

fn positive(name: &str, v: usize) -> Result<usize> {
    if v == 0 {
        return Err(Error::Domain(format!("--{name} must be at least 1")));
    }
    Ok(v)
}

impl Manifest {
    /// Checks the parsed flags against the selected case.
    pub fn from_cli(cli: Cli) -> Result<Self> {
        match cli.command {
            Command::Run(a) => {
                let case = build_case(&a.solver.case)?;
                let config = step_config(&case, &a.solver)?;
                let nx = positive("nx", a.nx.unwrap_or(case.cells[0]))?;
                let ny = match (case.dim(), a.ny) {
                    (1, Some(_)) => {
                        return Err(Error::Domain(format!("{} is one-dimensional; drop --ny", case.name())))
                    }
                    (1, None) => 1,
                    (_, Some(ny)) => positive("ny", ny)?,
                    (_, None) if a.nx.is_some() => nx,
                    (_, None) => case.cells[1],
                };
                Ok(Manifest::Run(RunManifest {
                    case,
                    cells: [nx, ny],
                    config,
                    out: a.solver.out,
                    report_every: positive("report-every", a.report_every)?,
                }))
            }
            Command::Eoc(a) => {
                let mut case = build_case(&a.solver.case)?;
                let config = step_config(&case, &a.solver)?;
                if let Some(cells) = a.reference_cells {
                    if case.reference == ReferenceKind::Exact {
                        return Err(Error::Domain(format!("{} has an exact reference", case.name())));
                    }
                    case.reference = ReferenceKind::SelfConvergence {
                        cells: positive("reference-cells", cells)?,
                    };
                }
                let grids = a.grids.unwrap_or_else(|| case.eoc_grids.clone());
                if grids.len() < 2 {
                    return Err(Error::EocUndefined(grids.len()));
                }
                if grids.windows(2).any(|w| w[0] >= w[1]) || grids[0] == 0 {
                    return Err(Error::Domain("--grids must be positive and strictly increasing".into()));
                }
                if case.reference == ReferenceKind::None {
                    return Err(Error::Domain(format!("case {} has no reference solution", case.name())));
                }
                Ok(Manifest::Eoc(EocManifest {
                    case,
                    grids,
                    config,
                    weight: a.norm.into(),
                    out: a.solver.out,
                }))
            }
            Command::Audit(a) => Ok(Manifest::Audit(AuditManifest {
                case: build_case(&a.case)?,
                samples: positive("samples", a.samples)?,
                seed: a.seed,
                out: a.out,
            })),
        }
    }
}

/// Parses `argv` (program name first) into a validated manifest. The error
/// carries the message and exit code to report.
pub fn parse_args<I, S>(argv: I) -> std::result::Result<Manifest, (String, i32)>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| {
        let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        (e.render().to_string(), code)
    })?;
    Manifest::from_cli(cli).map_err(|e| (format!("error: {e}\n"), EXIT_USAGE))
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// `x[,y],comp_0..` per interior cell, row-major.
pub fn solution_csv(u: &Field<f64>) -> String {
    let grid = u.grid();
    let mut s = String::from(if grid.dim() == 2 { "x,y" } else { "x" });
    for k in 0..u.components() {
        write!(s, ",comp_{k}").unwrap();
    }
    s.push('\n');
    for (i, j) in grid.interior_cells() {
        let x = grid.center(i, j);
        s.push_str(&num(x[0]));
        if grid.dim() == 2 {
            write!(s, ",{}", num(x[1])).unwrap();
        }
        for v in u.cell(grid.index(i, j)) {
            write!(s, ",{}", num(*v)).unwrap();
        }
        s.push('\n');
    }
    s
}

/// One row per step; `every` thins the rows but keeps the first and last.
pub fn entropy_csv(report: &EntropyReport<f64>, every: usize) -> String {
    let mm = report.velocities;
    let mut s = String::from("t,eta_mean");
    for m in 1..=mm {
        write!(s, ",H_{m}").unwrap();
    }
    s.push_str(",signed_eta,abs_eta");
    for m in 1..=mm {
        write!(s, ",signed_H_{m}").unwrap();
    }
    for m in 1..=mm {
        write!(s, ",abs_H_{m}").unwrap();
    }
    s.push('\n');
    let rows = report.steps();
    let every = every.max(1);
    for (n, r) in rows.iter().enumerate() {
        if n % every != 0 && n + 1 != rows.len() {
            continue;
        }
        write!(s, "{},{}", num(r.time), num(r.eta_mean)).unwrap();
        for v in &r.h_mean {
            write!(s, ",{}", num(*v)).unwrap();
        }
        write!(s, ",{},{}", num(r.signed_eta), num(r.abs_eta)).unwrap();
        for v in r.signed_h.iter().chain(&r.abs_h) {
            write!(s, ",{}", num(*v)).unwrap();
        }
        s.push('\n');
    }
    s
}

/// `n,dx,l2,order` for one component, `n,dx,l2_0..,order_0..` otherwise.
/// The first row's orders are empty.
pub fn eoc_csv(table: &EocTable<f64>) -> String {
    let p = table.rows.first().map_or(1, |r| r.l2.len());
    let mut s = String::from("n,dx");
    if p == 1 {
        s.push_str(",l2,order");
    } else {
        for k in 0..p {
            write!(s, ",l2_{k}").unwrap();
        }
        for k in 0..p {
            write!(s, ",order_{k}").unwrap();
        }
    }
    s.push('\n');
    for r in &table.rows {
        write!(s, "{},{}", r.n, num(r.dx)).unwrap();
        for v in &r.l2 {
            write!(s, ",{}", num(*v)).unwrap();
        }
        for o in &r.order {
            s.push(',');
            if let Some(o) = o {
                s.push_str(&num(*o));
            }
        }
        s.push('\n');
    }
    s
}

/// One audited quantity: the largest observed value and its bound.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditLine {
    pub metric: &'static str,
    pub value: f64,
    pub threshold: f64,
}

impl AuditLine {
    pub fn passed(&self) -> bool {
        self.value <= self.threshold
    }
}

pub fn audit_csv(lines: &[AuditLine]) -> String {
    let mut s = String::from("metric,value,threshold,pass\n");
    for l in lines {
        writeln!(s, "{},{},{},{}", l.metric, num(l.value), num(l.threshold), l.passed()).unwrap();
    }
    s
}

fn random_state(model: &Model, rng: &mut ChaCha8Rng) -> State<f64> {
    match *model {
        Model::ShallowWater { dim } => SwState {
            rho: rng.gen_range(0.1..5.0),
            vel: [
                rng.gen_range(-3.0..3.0),
                if dim == 2 { rng.gen_range(-3.0..3.0) } else { 0.0 },
            ],
            dim,
        }
        .to_conserved(),
        _ => [rng.gen_range(-2.0..2.0), 0.0, 0.0],
    }
}

fn random_point(case: &CaseConfig, rng: &mut ChaCha8Rng) -> Point<f64> {
    let mut x = [0.0; 2];
    for d in 0..case.dim() {
        x[d] = rng.gen_range(case.lo[d]..case.hi[d]);
    }
    x
}

fn ulps(err: f64, scale: f64) -> f64 {
    err / (f64::EPSILON * scale.abs().max(f64::MIN_POSITIVE))
}

/// Random sweeps of the entropy conservation conditions, the moment
/// identities and the sign property for the model of `case`.
pub fn audit_sweep(case: &CaseConfig, samples: usize, seed: u64) -> Result<Vec<AuditLine>> {
    let model = case.model;
    let dim = model.dim();
    let p = model.vars();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut kinetic_res, mut macro_res, mut maxw, mut hsum) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut sign_violations = 0usize;

    let mut set_ulps = 0.0f64;
    for lambda in [0.3, 1.0, 1.1, 7.5] {
        let v = build_velocity_set(dim, lambda)?;
        let (mut sa, mut sb) = (0.0, [0.0; 2]);
        let mut va = [0.0; 2];
        let mut vb = [[0.0; 2]; 2];
        for m in 0..v.len() {
            sa += v.a(m);
            for j in 0..dim {
                sb[j] += v.b(m, j);
                va[j] += v.velocity(m, j) * v.a(m);
                for d in 0..dim {
                    vb[j][d] += v.velocity(m, j) * v.b(m, d);
                }
            }
        }
        set_ulps = set_ulps.max(ulps((sa - 1.0_f64).abs(), 1.0));
        for j in 0..dim {
            set_ulps = set_ulps.max(ulps(sb[j].abs(), 1.0 / lambda));
            set_ulps = set_ulps.max(ulps(va[j].abs(), lambda));
            for d in 0..dim {
                let target = if j == d { 1.0 } else { 0.0 };
                set_ulps = set_ulps.max(ulps((vb[j][d] - target).abs(), 1.0));
            }
        }
    }

    for _ in 0..samples {
        let ul = random_state(&model, &mut rng);
        let ur = random_state(&model, &mut rng);
        let x = random_point(case, &mut rng);
        let speed = model.max_wave_speed(&ul, &x).max(model.max_wave_speed(&ur, &x));
        let v = build_velocity_set(dim, DEFAULT_LAMBDA_SAFETY * dim as f64 * speed + 1e-3)?;

        let f = maxwellian(&model, &v, &ul, &x);
        let h = kinetic_entropy(&model, &v, &ul, &x);
        let eta = model.entropy(&ul, &x);
        hsum = hsum.max((h[..v.len()].iter().sum::<f64>() - eta).abs() / (1.0 + eta.abs()));
        for k in 0..p {
            let total: f64 = (0..v.len()).map(|m| f[m][k]).sum();
            maxw = maxw.max((total - ul[k]).abs() / (1.0 + ul[k].abs()));
            for d in 0..dim {
                let g = model.flux(&ul, &x, d)[k];
                let moment: f64 = (0..v.len()).map(|m| v.velocity(m, d) * f[m][k]).sum();
                maxw = maxw.max((moment - g).abs() / (1.0 + g.abs()));
            }
        }

        for d in 0..dim {
            let req = FluxRequest::from_states(&model, d, ul, ur, x);
            let jump = req.jump();
            let fl = ec_fluxes(&model, &v, &req)?;
            let chi_l = chi_potential(&model, &v, &ul, &x);
            let chi_r = chi_potential(&model, &v, &ur, &x);
            for m in 0..v.len() {
                let dchi = chi_r[m][d] - chi_l[m][d];
                kinetic_res = kinetic_res.max((dot(&jump, &fl[m]) - dchi).abs() / (1.0 + dchi.abs()));
            }
            let total = summed_flux(SchemeKind::EC, &model, &v, &req)?;
            let dpsi = model.entropy_potential(&ur, &x, d) - model.entropy_potential(&ul, &x, d);
            macro_res = macro_res.max((dot(&jump, &total) - dpsi).abs() / (1.0 + dpsi.abs()));
        }

        for _ in 0..10 {
            let d = rng.gen_range(0..dim);
            let (r, _) = model.dissipation_basis(&ul, &ur, &x, d)?;
            let mut jumps = [[0.0; 3]; 3];
            for jmp in jumps.iter_mut() {
                for v in jmp.iter_mut().take(p) {
                    *v = rng.gen_range(-1.0..1.0);
                }
            }
            let w = mat_t_vec(&r, &jumps[1]);
            for wt in [
                reconstruct_scaled_jump(&r, &jumps[0], &jumps[1], &jumps[2]),
                limited_scaled_jump(&r, &jumps[0], &jumps[1], &jumps[2]),
            ] {
                for k in 0..p {
                    if wt[k] * w[k] < 0.0 || (w[k] == 0.0 && wt[k] != 0.0) {
                        sign_violations += 1;
                    }
                }
            }
        }
    }

    Ok(vec![
        AuditLine {
            metric: "ec_kinetic_residual",
            value: kinetic_res,
            threshold: 1e-11,
        },
        AuditLine {
            metric: "ec_macroscopic_residual",
            value: macro_res,
            threshold: 1e-11,
        },
        AuditLine {
            metric: "velocity_set_moment_ulps",
            value: set_ulps,
            threshold: 4.0,
        },
        AuditLine {
            metric: "maxwellian_moment_error",
            value: maxw,
            threshold: 1e-13,
        },
        AuditLine {
            metric: "kinetic_entropy_sum_error",
            value: hsum,
            threshold: 1e-14,
        },
        AuditLine {
            metric: "sign_property_violations",
            value: sign_violations as f64,
            threshold: 0.0,
        },
    ])
}

fn write_file(dir: &Path, name: &str, body: &str) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, body).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Executes `manifest`, writing its reports. Returns the process exit code.
pub fn execute(manifest: &Manifest) -> i32 {
    match execute_inner(manifest) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}

fn execute_inner(manifest: &Manifest) -> Result<i32> {
    match manifest {
        Manifest::Run(m) => {
            let grid = m.case.grid::<f64>(m.cells)?;
            let init = m.case.initial_field(&grid);
            let (outcome, failure) = match run(&m.case.model, &init, &m.config) {
                Ok(o) => (o, None),
                Err(f) => {
                    let f = *f;
                    (
                        RunOutcome {
                            state: f.state,
                            report: f.report,
                        },
                        Some(f.error),
                    )
                }
            };
            write_file(&m.out, "solution.csv", &solution_csv(&outcome.state.u))?;
            write_file(&m.out, "entropy.csv", &entropy_csv(&outcome.report, m.report_every))?;
            match failure {
                Some(e) => {
                    eprintln!("error: {e} (partial reports written)");
                    Ok(EXIT_FAILURE)
                }
                None => {
                    println!(
                        "{}: {} steps to t = {} with {}",
                        m.case.name(),
                        outcome.state.step,
                        outcome.state.time,
                        m.config.scheme.name()
                    );
                    Ok(EXIT_OK)
                }
            }
        }
        Manifest::Eoc(m) => {
            let table = convergence_study(&m.case, &m.grids, &m.config, m.weight)?;
            let body = eoc_csv(&table);
            write_file(&m.out, "eoc.csv", &body)?;
            print!("{body}");
            Ok(EXIT_OK)
        }
        Manifest::Audit(m) => {
            let lines = audit_sweep(&m.case, m.samples, m.seed)?;
            let body = audit_csv(&lines);
            write_file(&m.out, "audit.csv", &body)?;
            print!("{body}");
            Ok(if lines.iter().all(AuditLine::passed) {
                EXIT_OK
            } else {
                EXIT_FAILURE
            })
        }
    }
}

/// Sizes the global worker pool from [`THREADS_ENV`] when set.
pub fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| Error::Domain(format!("{THREADS_ENV} must be an integer >= 1, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Domain(format!("thread pool: {e}")))
}

/// Full CLI entry point; returns the exit code.
pub fn main_with<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let manifest = match parse_args(argv) {
        Ok(m) => m,
        Err((msg, code)) => {
            if code == EXIT_OK {
                print!("{msg}");
            } else {
                eprint!("{msg}");
            }
            return code;
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return EXIT_USAGE;
    }
    execute(&manifest)
}
