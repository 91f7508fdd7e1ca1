//! Batch runner: every subcommand reads one TOML config, writes CSV tables with
//! JSON sidecars into the output directory and returns an exit status
//! (0 all checks pass, 1 a check failed, 2 configuration or runtime error).

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::fields::{FieldSample, ForcingSpec, GridSpec, NoiseKind, NoiseSpec};
use crate::io::{self, num, Table};
use crate::kernel::{Kernel, KernelSpec};
use crate::regularity::{self, PairClass, ScanOptions};
use crate::seminorms::{self, CampanatoSampling, DomainSpec, HolderSampling, Witness};
use crate::solver::{MildSolver, SolveConfig};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "holderlab",
    version,
    about = "Regularity experiments for stochastic fractional heat equations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true, env = "HOLDERLAB_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, env = "HOLDERLAB_SEED")]
    pub seed: Option<u64>,
    #[arg(long, global = true, env = "HOLDERLAB_REPLICATES")]
    pub replicates: Option<usize>,
    /// Worker threads; 0 uses one per core.
    #[arg(long, global = true, env = "HOLDERLAB_THREADS")]
    pub threads: Option<usize>,
    #[arg(long, global = true, env = "HOLDERLAB_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Kernel mass, self-similarity and envelope checks.
    KernelVerify,
    /// Ensemble of mild solutions with probe statistics.
    Simulate,
    /// Moment-increment exponent fits over an ensemble.
    Estimate,
    /// Campanato and Hölder seminorms of a synthetic field.
    Seminorm,
    /// Exponent plan table over a grid of (α, p).
    Plan,
    /// Dyadic chaining inequality on simulated paths.
    Chaining,
    /// Summary of the sidecars already in the output directory.
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::KernelVerify => "kernel-verify",
            Command::Simulate => "simulate",
            Command::Estimate => "estimate",
            Command::Seminorm => "seminorm",
            Command::Plan => "plan",
            Command::Chaining => "chaining",
            Command::Report => "report",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseBlock {
    pub kind: NoiseKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateBlock {
    pub store_every: usize,
    /// Probe positions; each snaps to the nearest grid node.
    pub probe_x: Vec<f64>,
    /// Full fields are written for the first this many replicates.
    pub field_replicates: usize,
}

impl Default for SimulateBlock {
    fn default() -> Self {
        Self {
            store_every: 1,
            probe_x: vec![0.0],
            field_replicates: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlanBlock {
    pub p: f64,
    pub beta: f64,
    pub delta_gap: f64,
    /// Grid for the `plan` table.
    pub alphas: Vec<f64>,
    pub ps: Vec<f64>,
}

impl Default for PlanBlock {
    fn default() -> Self {
        Self {
            p: 8.0,
            beta: 0.1,
            delta_gap: 0.1,
            alphas: vec![0.5, 0.625, 0.75, 0.875, 1.0],
            ps: vec![4.0, 8.0, 16.0, 32.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// `|mass - 1|` bound; `1e-6` in one dimension and `1e-4` in two when unset.
    pub mass: Option<f64>,
    pub self_similarity: f64,
    /// Largest admissible `max/min` of kernel-to-envelope ratios.
    pub bound_spread: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            mass: None,
            self_similarity: 1e-8,
            bound_spread: 50.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelChecks {
    pub mass_times: Vec<f64>,
    pub selfsim_times: Vec<f64>,
    pub selfsim_points: usize,
    pub selfsim_x_max: f64,
    pub bound_times: Vec<f64>,
    pub bound_x: Vec<f64>,
    /// Unset runs the envelope checks only where they apply (`α < 1`).
    pub sharp_bound: Option<bool>,
    pub derivative: Option<bool>,
}

impl Default for KernelChecks {
    fn default() -> Self {
        Self {
            mass_times: vec![0.1, 1.0, 10.0],
            selfsim_times: vec![0.1, 10.0],
            selfsim_points: 100,
            selfsim_x_max: 5.0,
            bound_times: vec![0.1, 1.0, 10.0],
            bound_x: (0..13).map(|i| 10f64.powf(-2.0 + i as f64 / 3.0)).collect(),
            sharp_bound: None,
            derivative: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimateBlock {
    /// Spatial lags in grid steps, taken at the last stored time.
    pub space_lags: Vec<usize>,
    /// Time lags in stored rows.
    pub time_lags: Vec<usize>,
    /// Time pairs start at this fraction of the stored rows.
    pub t_min_frac: f64,
    pub x_stride: usize,
    pub t_stride: usize,
    pub shells_per_octave: usize,
}

impl Default for EstimateBlock {
    fn default() -> Self {
        Self {
            space_lags: vec![1, 2, 3, 4, 6, 8, 11, 16],
            time_lags: vec![1, 2, 3, 4, 6, 8, 11, 16],
            t_min_frac: 0.5,
            x_stride: 1,
            t_stride: 1,
            shells_per_octave: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    /// `value`.
    Constant,
    /// `value |x|^gamma`.
    PowerX,
    /// `value t`.
    LinearT,
    /// `value (t + x)`.
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeminormBlock {
    pub field: SyntheticKind,
    pub value: f64,
    pub gamma: f64,
    pub t_max: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub nt: usize,
    pub nx: usize,
    pub p: f64,
    pub theta: f64,
    pub holder_exponent: f64,
    pub stride_t: usize,
    pub stride_x: usize,
    pub random_pairs: usize,
}

impl Default for SeminormBlock {
    fn default() -> Self {
        Self {
            field: SyntheticKind::PowerX,
            value: 1.0,
            gamma: 0.5,
            t_max: 1.0,
            x_min: -1.0,
            x_max: 1.0,
            nt: 33,
            nx: 129,
            p: 2.0,
            theta: 1.25,
            holder_exponent: 0.25,
            stride_t: 4,
            stride_x: 4,
            random_pairs: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainingBlock {
    pub alpha_exp: f64,
    pub m: usize,
}

impl Default for ChainingBlock {
    fn default() -> Self {
        Self {
            alpha_exp: 0.25,
            m: 0,
        }
    }
}

/// Everything a run depends on. The output directory is not part of the hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub replicates: usize,
    pub out: Option<PathBuf>,
    pub kernel: KernelSpec,
    pub grid: GridSpec,
    pub noise: NoiseBlock,
    pub forcing: ForcingSpec,
    pub simulate: SimulateBlock,
    pub plan: PlanBlock,
    pub tolerances: Tolerances,
    pub kernel_checks: KernelChecks,
    pub estimate: EstimateBlock,
    pub seminorm: SeminormBlock,
    pub chaining: ChainingBlock,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            replicates: 100,
            out: None,
            kernel: KernelSpec::new(0.75, 1),
            grid: GridSpec {
                t_max: 1.0,
                nt: 256,
                domain_len: 16.0,
                nx: 128,
            },
            noise: NoiseBlock {
                kind: NoiseKind::SpacetimeWhite,
            },
            forcing: ForcingSpec::constant(1.0),
            simulate: SimulateBlock::default(),
            plan: PlanBlock::default(),
            tolerances: Tolerances::default(),
            kernel_checks: KernelChecks::default(),
            estimate: EstimateBlock::default(),
            seminorm: SeminormBlock::default(),
            chaining: ChainingBlock::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| format!("config parse error: {e}"))
    }

    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        io::config_hash(&c)
    }

    pub fn solve_config(&self) -> SolveConfig {
        SolveConfig {
            kernel: self.kernel.clone(),
            grid: self.grid,
            noise: NoiseSpec::new(self.noise.kind, self.seed, 0),
            forcing: self.forcing.clone(),
            store_every: self.simulate.store_every,
            moment_p: Some(self.plan.p),
        }
    }

    /// Checks the blocks a subcommand reads, before it computes anything.
    pub fn validate(&self, cmd: Command) -> Result<(), String> {
        let kernel = || self.kernel.validate().map_err(|e| format!("[kernel] {e}"));
        let solve = || {
            self.solve_config()
                .validate()
                .map_err(|e| format!("[grid/forcing/simulate] {e}"))
        };
        let positive = |name: &str, v: &[f64]| -> Result<(), String> {
            match v.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
                Some(t) => Err(format!("{name}: entries must be positive, got {t}")),
                None => Ok(()),
            }
        };
        match cmd {
            Command::KernelVerify => {
                kernel()?;
                let k = &self.kernel_checks;
                positive("[kernel_checks] mass_times", &k.mass_times)?;
                positive("[kernel_checks] selfsim_times", &k.selfsim_times)?;
                positive("[kernel_checks] bound_times", &k.bound_times)?;
                positive("[kernel_checks] bound_x", &k.bound_x)?;
                if !(k.selfsim_x_max > 0.0) || k.selfsim_points == 0 {
                    return Err("[kernel_checks] selfsim grid must be non-empty".into());
                }
                if let Some(m) = self.tolerances.mass {
                    if !(m > 0.0) {
                        return Err(format!("[tolerances] mass must be positive, got {m}"));
                    }
                }
            }
            Command::Simulate | Command::Estimate | Command::Chaining => {
                solve()?;
                if cmd == Command::Estimate {
                    let e = &self.estimate;
                    if e.space_lags.iter().chain(&e.time_lags).any(|&l| l == 0) {
                        return Err("[estimate] lags must be positive".into());
                    }
                    if !(0.0..1.0).contains(&e.t_min_frac) {
                        return Err(format!(
                            "[estimate] t_min_frac must lie in [0, 1), got {}",
                            e.t_min_frac
                        ));
                    }
                    if e.shells_per_octave == 0 {
                        return Err("[estimate] shells_per_octave must be positive".into());
                    }
                    self.plan_for_run()?;
                }
                if cmd == Command::Chaining
                    && !(self.chaining.alpha_exp > 0.0 && self.chaining.alpha_exp <= 1.0)
                {
                    return Err(format!(
                        "[chaining] alpha_exp must lie in (0, 1], got {}",
                        self.chaining.alpha_exp
                    ));
                }
            }
            Command::Seminorm => {
                let s = &self.seminorm;
                if s.nt < 2 || s.nx < 2 || !(s.t_max > 0.0) || !(s.x_max > s.x_min) {
                    return Err("[seminorm] need nt, nx >= 2, t_max > 0 and x_max > x_min".into());
                }
                seminorms::embedding_gamma(s.p, s.theta, 1)
                    .map_err(|e| format!("[seminorm] {e}"))?;
                if !(s.holder_exponent > 0.0 && s.holder_exponent <= 1.0) {
                    return Err(format!(
                        "[seminorm] holder_exponent must lie in (0, 1], got {}",
                        s.holder_exponent
                    ));
                }
            }
            Command::Plan => {
                positive("[plan] alphas", &self.plan.alphas)?;
                positive("[plan] ps", &self.plan.ps)?;
            }
            Command::Report => {}
        }
        Ok(())
    }

    fn plan_for_run(&self) -> Result<regularity::ExponentPlan, String> {
        regularity::make_plan(
            self.plan.p,
            self.kernel.alpha,
            self.kernel.dim,
            self.noise.kind,
            self.plan.beta,
            self.plan.delta_gap,
        )
        .map_err(|e| format!("[plan] {e}"))
    }
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// exit status. Messages go to stderr, the per-check summary to stdout.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_CONFIG
            } else {
                EXIT_PASS
            };
            let _ = e.print();
            return code;
        }
    };
    let cmd = cli.command;
    match execute(&cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {}: {msg}", cmd.name());
            EXIT_CONFIG
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, String> {
    let mut config = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
            RunConfig::from_toml(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if let Some(n) = cli.replicates {
        config.replicates = n;
    }
    if let Some(o) = &cli.out {
        config.out = Some(o.clone());
    }
    Ok(config)
}

fn execute(cli: &Cli) -> Result<i32, String> {
    let config = load_config(cli)?;
    config.validate(cli.command)?;
    let out = config
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("holderlab-out"));
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| format!("thread pool: {e}"))?;
    let started = Instant::now();
    let outcome = pool.install(|| {
        let mut run = Run::new(&config, &out, cli.command);
        let code = match cli.command {
            Command::KernelVerify => kernel_verify(&mut run),
            Command::Simulate => simulate(&mut run),
            Command::Estimate => estimate(&mut run),
            Command::Seminorm => seminorm(&mut run),
            Command::Plan => plan_table(&mut run),
            Command::Chaining => chaining(&mut run),
            Command::Report => report(&mut run),
        }?;
        run.finish(code)?;
        Ok::<i32, String>(code)
    })?;
    io::write_json(
        &out.join("timing.json"),
        &json!({"subcommand": cli.command.name(), "wall_seconds": started.elapsed().as_secs_f64()}),
    )
    .map_err(disk)?;
    Ok(outcome)
}

fn disk(e: std::io::Error) -> String {
    format!("output error: {e}")
}

/// Output state shared by the subcommands.
struct Run<'a> {
    config: &'a RunConfig,
    out: &'a Path,
    cmd: Command,
    hash: String,
    files: Vec<String>,
    warnings: Vec<String>,
    checks: Vec<(String, bool)>,
}

impl<'a> Run<'a> {
    fn new(config: &'a RunConfig, out: &'a Path, cmd: Command) -> Self {
        Self {
            config,
            out,
            cmd,
            hash: config.hash(),
            files: Vec::new(),
            warnings: Vec::new(),
            checks: Vec::new(),
        }
    }

    fn table(&mut self, table: &Table, summary: Value) -> Result<(), String> {
        io::write_table(self.out, table, &self.hash, summary).map_err(disk)?;
        self.files.push(format!("{}.csv", table.name));
        Ok(())
    }

    fn check(&mut self, name: &str, pass: bool, detail: String) {
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        self.checks.push((name.to_string(), pass));
    }

    fn finish(&self, code: i32) -> Result<(), String> {
        fs::create_dir_all(self.out).map_err(disk)?;
        let checks: Vec<Value> = self
            .checks
            .iter()
            .map(|(n, p)| json!({"name": n, "pass": p}))
            .collect();
        let manifest = json!({
            "subcommand": self.cmd.name(),
            "config_hash": self.hash,
            "version": io::VERSION,
            "seed": self.config.seed,
            "replicates": self.config.replicates,
            "exit_status": code,
            "checks": checks,
            "warnings": self.warnings,
            "files": self.files,
            "config": self.config_without_out(),
        });
        io::write_json(&self.out.join("manifest.json"), &manifest).map_err(disk)
    }

    fn config_without_out(&self) -> RunConfig {
        let mut c = self.config.clone();
        c.out = None;
        c
    }

    fn status(&self) -> i32 {
        if self.checks.iter().all(|(_, p)| *p) {
            EXIT_PASS
        } else {
            EXIT_FAIL
        }
    }
}

fn kernel_verify(run: &mut Run) -> Result<i32, String> {
    let cfg = run.config;
    let kc = &cfg.kernel_checks;
    let kernel = Kernel::new(cfg.kernel.clone()).map_err(|e| e.to_string())?;
    let d = cfg.kernel.dim;
    let alpha = cfg.kernel.alpha;

    let mass_tol = cfg
        .tolerances
        .mass
        .unwrap_or(if d == 1 { 1e-6 } else { 1e-4 });
    let masses: Vec<f64> = kc
        .mass_times
        .par_iter()
        .map(|&t| kernel.mass(t))
        .collect::<Result<_, _>>()
        .map_err(|e| format!("mass: {e}"))?;
    let mut t = Table::new("kernel_mass", &["t", "mass", "abs_error", "pass"]);
    let mut worst = 0.0f64;
    for (&time, &m) in kc.mass_times.iter().zip(&masses) {
        let err = (m - 1.0).abs();
        worst = worst.max(err);
        t.push(vec![
            num(time),
            num(m),
            num(err),
            (err < mass_tol).to_string(),
        ]);
    }
    let pass = worst < mass_tol;
    run.table(
        &t,
        json!({"pass": pass, "tolerance": mass_tol, "max_abs_error": worst}),
    )?;
    run.check(
        "mass",
        pass,
        format!("max |mass - 1| = {worst:e}, tolerance {mass_tol:e}"),
    );

    let xs: Vec<f64> = (1..=kc.selfsim_points)
        .map(|i| kc.selfsim_x_max * i as f64 / kc.selfsim_points as f64)
        .collect();
    let points: Vec<(f64, f64)> = kc
        .selfsim_times
        .iter()
        .flat_map(|&t| xs.iter().map(move |&x| (t, x)))
        .collect();
    let order = cfg.kernel.order();
    let rows: Vec<(f64, f64, f64, f64)> = points
        .par_iter()
        .map(|&(t, x)| {
            let direct = kernel.eval_radial(t, x)?;
            let scale = t.powf(-1.0 / order);
            let scaled = t.powf(-(d as f64) / order) * kernel.eval_radial(1.0, scale * x)?;
            Ok((t, x, direct, scaled))
        })
        .collect::<Result<_, crate::kernel::KernelError>>()
        .map_err(|e| format!("self-similarity: {e}"))?;
    let tol = cfg.tolerances.self_similarity;
    let mut t = Table::new(
        "kernel_selfsim",
        &["t", "r", "direct", "rescaled", "rel_error"],
    );
    let mut worst = 0.0f64;
    for &(time, x, a, b) in &rows {
        let rel = (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
        t.push(vec![num(time), num(x), num(a), num(b), num(rel)]);
    }
    let pass = worst < tol;
    run.table(
        &t,
        json!({"pass": pass, "tolerance": tol, "max_rel_error": worst}),
    )?;
    run.check(
        "self_similarity",
        pass,
        format!("max relative error {worst:e}, tolerance {tol:e}"),
    );

    let spread_tol = cfg.tolerances.bound_spread;
    if kc.sharp_bound.unwrap_or(alpha < 1.0) {
        let rep = kernel
            .sharp_bound_ratio(&kc.bound_times, &kc.bound_x)
            .map_err(|e| format!("sharp bound: {e}"))?;
        bound_table(run, "kernel_sharp_bound", &rep, spread_tol)?;
    }
    if kc.derivative.unwrap_or(alpha < 1.0 && d == 1) {
        let rep = kernel
            .derivative_bound_ratio(&kc.bound_times, &kc.bound_x)
            .map_err(|e| format!("derivative bound: {e}"))?;
        bound_table(run, "kernel_derivative_bound", &rep, spread_tol)?;
    }
    Ok(run.status())
}

fn bound_table(
    run: &mut Run,
    name: &str,
    rep: &crate::kernel::BoundRatioReport,
    spread_tol: f64,
) -> Result<(), String> {
    let mut t = Table::new(name, &["t", "r", "value", "envelope", "ratio"]);
    for r in &rep.rows {
        t.push(vec![
            num(r.t),
            num(r.x),
            num(r.value),
            num(r.bound),
            num(r.ratio),
        ]);
    }
    let spread = rep.spread();
    let pass = rep.min_ratio > 0.0 && spread.is_finite() && spread < spread_tol;
    run.table(
        &t,
        json!({"pass": pass, "min_ratio": rep.min_ratio, "max_ratio": rep.max_ratio, "spread": spread, "tolerance": spread_tol}),
    )?;
    run.check(
        name,
        pass,
        format!(
            "ratio in [{:e}, {:e}], spread {spread:.3} < {spread_tol}",
            rep.min_ratio, rep.max_ratio
        ),
    );
    Ok(())
}

fn nearest_node(grid: &GridSpec, x: f64) -> usize {
    let j = ((x + 0.5 * grid.domain_len) / grid.dx()).round();
    (j.max(0.0) as usize) % grid.nx
}

/// Solves replicates `0..n` in parallel chunks and hands each field to `visit`
/// in replicate order.
fn for_each_replicate<F>(solver: &MildSolver, n: usize, mut visit: F) -> Result<(), String>
where
    F: FnMut(u64, FieldSample) -> Result<(), String>,
{
    const CHUNK: usize = 64;
    let mut start = 0;
    while start < n {
        let end = (start + CHUNK).min(n);
        let batch: Vec<FieldSample> = (start..end)
            .into_par_iter()
            .map(|r| solver.solve(r as u64))
            .collect();
        for (off, f) in batch.into_iter().enumerate() {
            visit((start + off) as u64, f)?;
        }
        start = end;
    }
    Ok(())
}

fn simulate(run: &mut Run) -> Result<i32, String> {
    let cfg = run.config;
    let sc = cfg.solve_config();
    let solver = MildSolver::new(&sc).map_err(|e| e.to_string())?;
    run.warnings.extend(solver.warnings().iter().cloned());
    let n = cfg.replicates;
    if n == 0 {
        return Ok(EXIT_PASS);
    }
    let probes: Vec<usize> = cfg
        .simulate
        .probe_x
        .iter()
        .map(|&x| nearest_node(&cfg.grid, x))
        .collect();
    let times = sc.stored_times();
    let p = cfg.plan.p;
    let cells = times.len() * probes.len();
    let (mut s1, mut s2, mut sp) = (vec![0.0; cells], vec![0.0; cells], vec![0.0; cells]);
    let out = run.out.to_path_buf();
    let mut field_files = Vec::new();
    for_each_replicate(&solver, n, |r, field| {
        for i in 0..times.len() {
            for (k, &j) in probes.iter().enumerate() {
                let v = field.at(i, j);
                let c = i * probes.len() + k;
                s1[c] += v;
                s2[c] += v * v;
                sp[c] += v.abs().powf(p);
            }
        }
        if (r as usize) < cfg.simulate.field_replicates {
            fs::create_dir_all(&out).map_err(disk)?;
            let name = format!("field_r{r:05}.csv");
            let file = fs::File::create(out.join(&name)).map_err(disk)?;
            field
                .write_csv(std::io::BufWriter::new(file))
                .map_err(disk)?;
            field_files.push(name);
        }
        Ok(())
    })?;
    run.files.extend(field_files);
    let nf = n as f64;
    let header = ["t", "x", "value"];
    let mut mean = Table::new("probe_mean", &header);
    let mut var = Table::new("probe_variance", &header);
    let mut mom = Table::new("probe_abs_moment", &header);
    for (i, &t) in times.iter().enumerate() {
        for (k, &j) in probes.iter().enumerate() {
            let c = i * probes.len() + k;
            let m = s1[c] / nf;
            let v = if n > 1 {
                (s2[c] - nf * m * m) / (nf - 1.0)
            } else {
                0.0
            };
            let x = num(cfg.grid.x(j));
            mean.push(vec![num(t), x.clone(), num(m)]);
            var.push(vec![num(t), x.clone(), num(v)]);
            mom.push(vec![num(t), x, num(sp[c] / nf)]);
        }
    }
    run.table(&mean, json!({"statistic": "mean", "replicates": n}))?;
    run.table(
        &var,
        json!({"statistic": "unbiased variance", "replicates": n}),
    )?;
    run.table(
        &mom,
        json!({"statistic": "mean |u|^p", "p": p, "replicates": n}),
    )?;
    Ok(EXIT_PASS)
}

fn estimate(run: &mut Run) -> Result<i32, String> {
    let cfg = run.config;
    let plan = cfg.plan_for_run()?;
    let solver = MildSolver::new(&cfg.solve_config()).map_err(|e| e.to_string())?;
    run.warnings.extend(solver.warnings().iter().cloned());
    let mut ensemble = Vec::with_capacity(cfg.replicates);
    for_each_replicate(&solver, cfg.replicates, |_, f| {
        ensemble.push(f);
        Ok(())
    })?;
    let Some(first) = ensemble.first() else {
        return Err("estimate needs at least one replicate".into());
    };
    let e = &cfg.estimate;
    let last = first.n_times() - 1;
    let ti_min = (e.t_min_frac * last as f64).floor() as usize;
    let mut probes = regularity::space_pairs(first, last, &e.space_lags, e.x_stride);
    probes.extend(regularity::time_pairs(
        first,
        ti_min.max(1),
        &e.time_lags,
        e.t_stride,
        e.x_stride,
    ));
    let options = ScanOptions {
        shells_per_octave: e.shells_per_octave,
        ..ScanOptions::default()
    };
    let scan = regularity::moment_increment_scan(&ensemble, &plan, &probes, &options)
        .map_err(|e| e.to_string())?;

    let mut shells = Table::new("exponent_shells", &["class", "scale", "statistic", "pairs"]);
    let mut fits = Table::new(
        "exponent_fits",
        &[
            "class",
            "scales",
            "slope",
            "intercept",
            "r_squared",
            "ci_half_width",
            "raw_exponent",
        ],
    );
    let mut summary = serde_json::Map::new();
    for (label, fit) in [
        ("combined", &scan.combined),
        ("space", &scan.space),
        ("time", &scan.time),
        ("mixed", &scan.mixed),
    ] {
        let Some(f) = fit else { continue };
        for ((s, v), c) in f.scales.iter().zip(&f.statistics).zip(&f.pair_counts) {
            shells.push(vec![label.into(), num(*s), num(*v), c.to_string()]);
        }
        fits.push(vec![
            label.into(),
            f.scales.len().to_string(),
            num(f.slope),
            num(f.intercept),
            num(f.r_squared),
            num(f.confidence_half_width),
            num(f.raw_exponent),
        ]);
        summary.insert(label.into(), json!(f.raw_exponent));
    }
    let mut notes = Table::new("exponent_notes", &["class", "scale", "pairs", "reason"]);
    for s in scan.dropped.iter().chain(&scan.saturated) {
        notes.push(vec![
            s.class.clone(),
            num(s.scale),
            s.pairs.to_string(),
            s.reason.clone(),
        ]);
    }
    let saturated_space = scan
        .saturated
        .iter()
        .any(|s| s.class == format!("{:?}", PairClass::Space).to_lowercase());
    run.table(&shells, json!({"p": plan.p, "replicates": scan.replicates}))?;
    run.table(
        &fits,
        json!({"p": plan.p, "raw_exponents": summary, "plan": plan}),
    )?;
    run.table(&notes, json!({"space_saturated": saturated_space}))?;
    Ok(EXIT_PASS)
}

fn seminorm(run: &mut Run) -> Result<i32, String> {
    let s = &run.config.seminorm;
    let (value, gamma) = (s.value, s.gamma);
    let kind = s.field;
    let field =
        FieldSample::from_fn(
            (0.0, s.t_max, s.nt),
            (s.x_min, s.x_max, s.nx),
            |t, x| match kind {
                SyntheticKind::Constant => value,
                SyntheticKind::PowerX => value * x.abs().powf(gamma),
                SyntheticKind::LinearT => value * t,
                SyntheticKind::Linear => value * (t + x),
            },
        )
        .map_err(|e| e.to_string())?;
    let domain = DomainSpec::of_field(&field).map_err(|e| e.to_string())?;
    let sampling = CampanatoSampling::dyadic(&field, &domain, s.stride_t, s.stride_x);
    let camp = seminorms::campanato_seminorm(&field, &domain, s.p, s.theta, &sampling)
        .map_err(|e| e.to_string())?;
    let hold = seminorms::holder_seminorm(
        &field,
        s.holder_exponent,
        &HolderSampling {
            random_pairs: s.random_pairs,
            seed: run.config.seed,
        },
    )
    .map_err(|e| e.to_string())?;
    let mut t = Table::new(
        "seminorm",
        &[
            "kind",
            "p",
            "exponent",
            "value",
            "witness",
            "evaluated",
            "skipped",
        ],
    );
    for r in [&camp, &hold] {
        let w = match &r.witness {
            Witness::None => "none".to_string(),
            Witness::Cylinder { t, x, radius, .. } => {
                format!("cylinder t={t} x={x} radius={radius}")
            }
            Witness::Pair { a, b, .. } => format!("pair ({},{})-({},{})", a.0, a.1, b.0, b.1),
        };
        t.push(vec![
            r.kind.clone(),
            num(r.p),
            num(r.exponent),
            num(r.value),
            w,
            r.evaluated.to_string(),
            r.skipped.to_string(),
        ]);
    }
    let embedded = seminorms::embedding_gamma(s.p, s.theta, 1).map_err(|e| e.to_string())?;
    run.table(
        &t,
        json!({"campanato": camp.value, "holder": hold.value, "embedding_gamma": embedded}),
    )?;
    Ok(EXIT_PASS)
}

fn plan_table(run: &mut Run) -> Result<i32, String> {
    let cfg = run.config;
    let d = cfg.kernel.dim;
    let mut t = Table::new(
        "plan",
        &[
            "alpha",
            "p",
            "d",
            "kind",
            "beta_max",
            "beta",
            "theta",
            "beta_star",
            "q",
            "r",
            "gamma",
            "admissible",
            "reason",
        ],
    );
    let mut admissible = 0usize;
    for kind in [NoiseKind::SingleBm, NoiseKind::SpacetimeWhite] {
        let kind_name = match kind {
            NoiseKind::SingleBm => "single_bm",
            NoiseKind::SpacetimeWhite => "spacetime_white",
        };
        for &alpha in &cfg.plan.alphas {
            for &p in &cfg.plan.ps {
                let bmax = regularity::beta_max(p, alpha, d, kind);
                let head = vec![
                    num(alpha),
                    num(p),
                    d.to_string(),
                    kind_name.to_string(),
                    num(bmax),
                ];
                let row = match regularity::make_plan(
                    p,
                    alpha,
                    d,
                    kind,
                    cfg.plan.beta,
                    cfg.plan.delta_gap,
                ) {
                    Ok(pl) => {
                        admissible += 1;
                        [
                            num(pl.beta),
                            num(pl.theta),
                            num(pl.beta_star),
                            num(pl.q),
                            num(pl.r),
                            num(pl.gamma),
                            "true".into(),
                            String::new(),
                        ]
                    }
                    Err(e) => {
                        let nan = || String::from("NaN");
                        [
                            num(cfg.plan.beta),
                            nan(),
                            nan(),
                            nan(),
                            nan(),
                            nan(),
                            "false".into(),
                            e.to_string(),
                        ]
                    }
                };
                t.push(head.into_iter().chain(row).collect());
            }
        }
    }
    let rows = t.rows.len();
    run.table(&t, json!({"rows": rows, "admissible": admissible}))?;
    Ok(EXIT_PASS)
}

fn chaining(run: &mut Run) -> Result<i32, String> {
    let cfg = run.config;
    let solver = MildSolver::new(&cfg.solve_config()).map_err(|e| e.to_string())?;
    run.warnings.extend(solver.warnings().iter().cloned());
    let (alpha_exp, m) = (cfg.chaining.alpha_exp, cfg.chaining.m);
    let mut t = Table::new("chaining", &["replicate", "big_m", "lhs", "rhs", "pass"]);
    let mut failures = 0usize;
    for_each_replicate(&solver, cfg.replicates, |r, field| {
        // Final row closed periodically: 2^M + 1 dyadic points.
        let row = field.row(field.n_times() - 1);
        let mut path = row.to_vec();
        path.push(row[0]);
        let rep = regularity::chaining_bound(&path, alpha_exp, m).map_err(|e| e.to_string())?;
        if !rep.pass {
            failures += 1;
        }
        t.push(vec![
            r.to_string(),
            rep.big_m.to_string(),
            num(rep.lhs),
            num(rep.rhs),
            rep.pass.to_string(),
        ]);
        Ok(())
    })?;
    let pass = failures == 0;
    run.table(&t, json!({"pass": pass, "failures": failures}))?;
    run.check(
        "chaining",
        pass,
        format!(
            "{failures} of {} paths violate the dyadic bound",
            cfg.replicates
        ),
    );
    Ok(run.status())
}

fn report(run: &mut Run) -> Result<i32, String> {
    let mut names: Vec<PathBuf> = match fs::read_dir(run.out) {
        Ok(rd) => rd.filter_map(|e| e.ok().map(|e| e.path())).collect(),
        Err(e) => return Err(format!("cannot read {}: {e}", run.out.display())),
    };
    names.sort();
    let mut t = Table::new("report", &["file", "config_hash", "rows", "pass"]);
    let mut any_fail = false;
    for path in names {
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        if !name.ends_with(".json")
            || ["manifest.json", "timing.json", "report.json"].contains(&name)
        {
            continue;
        }
        let text = fs::read_to_string(&path).map_err(disk)?;
        let Ok(v) = serde_json::from_str::<Value>(&text) else {
            continue;
        };
        let pass = v["summary"]["pass"].as_bool();
        any_fail |= pass == Some(false);
        t.push(vec![
            v["file"].as_str().unwrap_or(name).to_string(),
            v["config_hash"].as_str().unwrap_or("").to_string(),
            v["rows"]
                .as_u64()
                .map(|r| r.to_string())
                .unwrap_or_default(),
            pass.map(|p| p.to_string()).unwrap_or_else(|| "n/a".into()),
        ]);
    }
    let tables = t.rows.len();
    run.table(&t, json!({"pass": !any_fail, "tables": tables}))?;
    run.check("report", !any_fail, format!("{tables} tables summarized"));
    Ok(run.status())
}
