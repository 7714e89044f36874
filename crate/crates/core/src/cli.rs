//! Batch experiment runner.
//!
//! Every command resolves one [`Experiment`] from defaults, an optional TOML
//! config file, `--set key=value` overrides and dedicated flags (in that
//! order), then writes CSV to `--out` or stdout. Output files start with a
//! `#` header whose lines, stripped of the `# ` prefix, form a config file
//! that reproduces the run.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::metrics::{self, MetricInputs};
use crate::model::{QueryRange, SystemConfig, SystemParams};
use crate::opt::{self, index_grid, GridSpec};
use crate::sim::{self, Estimate, SimEstimates, DEFAULT_FRAMES};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_GAMMA_TH: f64 = 0.8;
const NA: &str = "NA";

#[derive(Debug, Parser)]
#[command(name = "cowu", version, about = "Pull/push coexistence with content-based wake-up")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form γ_w, γ_u and E_tot per α.
    Analyze(CommonArgs),
    /// Monte Carlo estimates per α.
    Simulate(CommonArgs),
    /// Every (α, λ) cell with its feasibility flag.
    Sweep(CommonArgs),
    /// Largest supported arrival rate.
    LambdaMax(CommonArgs),
    /// Energy-optimal α and the energy ratio to Round-Robin per λ.
    AlphaOpt(CommonArgs),
    /// Datasets, plot scripts and a manifest for one figure.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    #[default]
    Cowu,
    Rr,
}

impl Scheme {
    fn name(self) -> &'static str {
        match self {
            Scheme::Cowu => "cowu",
            Scheme::Rr => "rr",
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a config key, e.g. `--set n_pull=15`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Comma-separated α values.
    #[arg(long)]
    pub alpha: Option<String>,
    /// Comma-separated λ values for sweep, lambda-max and alpha-opt.
    #[arg(long)]
    pub lambda: Option<String>,
    #[arg(long)]
    pub gamma_th: Option<f64>,
    #[arg(long)]
    pub frames: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub scheme: Option<Scheme>,
    /// Evaluate sweep cells by simulation instead of the closed forms.
    #[arg(long)]
    pub simulate: bool,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    Fig3,
    Fig4,
    Fig5,
}

#[derive(Debug, Clone, Args)]
pub struct ReproduceArgs {
    #[arg(long)]
    pub figure: Figure,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Frames per simulation point (fig3); 0 skips the simulation.
    #[arg(long, default_value_t = DEFAULT_FRAMES)]
    pub frames: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    fn into_vec(self) -> Vec<f64> {
        match self {
            OneOrMany::One(v) => vec![v],
            OneOrMany::Many(v) => v,
        }
    }
}

/// Config file schema. Every key is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentFile {
    /// Written into output headers; ignored on input.
    #[allow(dead_code)]
    tool: Option<String>,
    n_pull: Option<usize>,
    n_push: Option<usize>,
    slots_per_frame: Option<usize>,
    slot_duration_s: Option<f64>,
    tx_prob: Option<f64>,
    arrival_rate: Option<f64>,
    power_tx_w: Option<f64>,
    power_rx_w: Option<f64>,
    v_min: Option<f64>,
    v_max: Option<f64>,
    query_lower: Option<f64>,
    query_upper: Option<f64>,
    alpha: Option<OneOrMany>,
    lambda_grid: Option<OneOrMany>,
    gamma_th: Option<f64>,
    frames: Option<usize>,
    seed: Option<u64>,
    scheme: Option<Scheme>,
}

/// A fully resolved run.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub config: SystemConfig,
    pub range: QueryRange,
    pub alphas: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub gamma_th: f64,
    pub frames: usize,
    pub seed: u64,
    pub scheme: Scheme,
}

/// `{0, 0.2, ..., 1}`.
pub fn default_alphas() -> Vec<f64> {
    index_grid(0, 5, 1.0, 5.0)
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("bad number {t:?}: {e}")))
        })
        .collect()
}

fn load_table(path: Option<&Path>, overrides: &[String]) -> Result<toml::Table> {
    let mut table = match path {
        Some(p) => {
            let text = fs::read_to_string(p)?;
            text.parse::<toml::Table>()
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None => toml::Table::new(),
    };
    for item in overrides {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {item:?} is not KEY=VALUE")))?;
        let parsed: toml::Table = format!("{} = {}", key.trim(), value.trim())
            .parse()
            .map_err(|e| Error::Config(format!("override {item:?}: {e}")))?;
        table.extend(parsed);
    }
    Ok(table)
}

impl Experiment {
    /// Resolves defaults, file, overrides and flags, with `α` defaulting to
    /// `{0, 0.2, ..., 1}`.
    pub fn resolve(args: &CommonArgs) -> Result<Self> {
        Self::resolve_with(args, default_alphas)
    }

    /// Like [`Experiment::resolve`] with the standard 0.05-step `α` grid as
    /// default, for the optimisation commands.
    pub fn resolve_for_search(args: &CommonArgs) -> Result<Self> {
        Self::resolve_with(args, || index_grid(0, 20, 1.0, 20.0))
    }

    fn resolve_with(args: &CommonArgs, default_alphas: fn() -> Vec<f64>) -> Result<Self> {
        let table = load_table(args.config.as_deref(), &args.overrides)?;
        let file: ExperimentFile = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;

        let d = SystemParams::default();
        let config = SystemConfig::new(SystemParams {
            n_pull: file.n_pull.unwrap_or(d.n_pull),
            n_push: file.n_push.unwrap_or(d.n_push),
            slots_per_frame: file.slots_per_frame.unwrap_or(d.slots_per_frame),
            slot_duration: file.slot_duration_s.unwrap_or(d.slot_duration),
            tx_prob: file.tx_prob.unwrap_or(d.tx_prob),
            arrival_rate: file.arrival_rate.unwrap_or(d.arrival_rate),
            power_tx: file.power_tx_w.unwrap_or(d.power_tx),
            power_rx: file.power_rx_w.unwrap_or(d.power_rx),
            v_min: file.v_min.unwrap_or(d.v_min),
            v_max: file.v_max.unwrap_or(d.v_max),
        })?;
        let range = QueryRange::new(
            file.query_lower.unwrap_or(0.6),
            file.query_upper.unwrap_or(0.9),
        )?;
        crate::model::wake_probability(&config.observation_model(), &range)?;

        let alphas = match &args.alpha {
            Some(s) => parse_list(s)?,
            None => file.alpha.map(OneOrMany::into_vec).unwrap_or_else(default_alphas),
        };
        let lambdas = match &args.lambda {
            Some(s) => parse_list(s)?,
            None => file
                .lambda_grid
                .map(OneOrMany::into_vec)
                .unwrap_or_else(|| index_grid(1, 10, 5.0, 1000.0)),
        };
        let gamma_th = args.gamma_th.or(file.gamma_th).unwrap_or(DEFAULT_GAMMA_TH);
        // Validates both axes and the threshold.
        GridSpec::new(alphas.clone(), lambdas.clone(), gamma_th)?;

        let frames = args.frames.or(file.frames).unwrap_or(DEFAULT_FRAMES);
        if frames == 0 {
            return Err(Error::Config("frames must be at least 1".into()));
        }
        Ok(Self {
            config,
            range,
            alphas,
            lambdas,
            gamma_th,
            frames,
            seed: args.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            scheme: args.scheme.or(file.scheme).unwrap_or_default(),
        })
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.alphas.clone(), self.lambdas.clone(), self.gamma_th)
    }

    /// `# `-prefixed header; without the prefix it is a valid config file.
    pub fn header(&self, command: &str) -> String {
        let p = self.config.params();
        let mut h = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(h, "# {k} = {v}");
        };
        line("tool", format!("\"cowu {VERSION} {command}\""));
        line("n_pull", p.n_pull.to_string());
        line("n_push", p.n_push.to_string());
        line("slots_per_frame", p.slots_per_frame.to_string());
        line("slot_duration_s", fmt_f(p.slot_duration));
        line("tx_prob", fmt_f(p.tx_prob));
        line("arrival_rate", fmt_f(p.arrival_rate));
        line("power_tx_w", fmt_f(p.power_tx));
        line("power_rx_w", fmt_f(p.power_rx));
        line("v_min", fmt_f(p.v_min));
        line("v_max", fmt_f(p.v_max));
        line("query_lower", fmt_f(self.range.lower));
        line("query_upper", fmt_f(self.range.upper));
        line("alpha", fmt_array(&self.alphas));
        line("lambda_grid", fmt_array(&self.lambdas));
        line("gamma_th", fmt_f(self.gamma_th));
        line("frames", self.frames.to_string());
        line("seed", self.seed.to_string());
        line("scheme", format!("\"{}\"", self.scheme.name()));
        h
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f(v: f64) -> String {
    format!("{v:?}")
}

fn fmt_array(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| fmt_f(*x)).collect();
    format!("[{}]", items.join(", "))
}

fn fmt_se(e: &Estimate) -> String {
    e.std_error.map(fmt_f).unwrap_or_else(|| NA.to_string())
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(path, text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

pub fn analyze_csv(exp: &Experiment) -> Result<String> {
    let mut s = exp.header("analyze");
    s.push_str("alpha,gamma_w,gamma_u,e_tot_joules\n");
    match exp.scheme {
        Scheme::Cowu => {
            for &alpha in &exp.alphas {
                let r = metrics::evaluate(&MetricInputs::new(exp.config, exp.range, alpha)?)?;
                let _ = writeln!(s, "{},{},{},{}", fmt_f(alpha), fmt_f(r.gamma_w), fmt_f(r.gamma_u), fmt_f(r.e_tot));
            }
        }
        Scheme::Rr => {
            let gu = metrics::rr_gamma_u(&exp.config)?;
            let e = metrics::rr_pull_energy(&exp.config)?;
            let _ = writeln!(s, "{NA},{},{},{}", fmt_f(1.0), fmt_f(gu), fmt_f(e));
        }
    }
    Ok(s)
}

fn sim_row(s: &mut String, alpha: &str, est: &SimEstimates) {
    let _ = writeln!(
        s,
        "{alpha},{},{},{},{},{},{},{},{}",
        fmt_f(est.gamma_w.mean),
        fmt_se(&est.gamma_w),
        fmt_f(est.gamma_u.mean),
        fmt_se(&est.gamma_u),
        fmt_f(est.e_tot.mean),
        fmt_se(&est.e_tot),
        est.frames,
        est.master_seed
    );
}

const SIM_COLUMNS: &str =
    "gamma_w,gamma_w_se,gamma_u,gamma_u_se,e_tot_joules,e_tot_se,frames,seed";

pub fn simulate_csv(exp: &Experiment) -> Result<String> {
    let mut s = exp.header("simulate");
    let _ = writeln!(s, "alpha,{SIM_COLUMNS}");
    match exp.scheme {
        Scheme::Cowu => {
            for &alpha in &exp.alphas {
                let est = sim::run_campaign(&exp.config, &exp.range, alpha, exp.frames, exp.seed)?;
                sim_row(&mut s, &fmt_f(alpha), &est);
            }
        }
        Scheme::Rr => {
            let est = sim::run_rr_campaign(&exp.config, exp.frames, exp.seed)?;
            sim_row(&mut s, NA, &est);
        }
    }
    Ok(s)
}

pub fn sweep_csv(exp: &Experiment, simulate: bool) -> Result<String> {
    let evaluator = if simulate {
        opt::Evaluator::Simulated {
            frames: exp.frames,
            master_seed: exp.seed,
        }
    } else {
        opt::Evaluator::Analytic
    };
    let result = opt::sweep_with(&exp.config, &exp.range, &exp.grid()?, evaluator)?;
    let mut s = exp.header(if simulate { "sweep --simulate" } else { "sweep" });
    s.push_str("alpha,lambda,gamma_w,gamma_u,e_tot_joules,feasible\n");
    for c in &result.cells {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            fmt_f(c.alpha),
            fmt_f(c.lambda),
            fmt_f(c.report.gamma_w),
            fmt_f(c.report.gamma_u),
            fmt_f(c.report.e_tot),
            c.feasible
        );
    }
    Ok(s)
}

fn join_alphas(alphas: &[f64]) -> String {
    alphas.iter().map(|a| fmt_f(*a)).collect::<Vec<_>>().join(";")
}

pub fn lambda_max_csv(exp: &Experiment) -> Result<String> {
    let grid = exp.grid()?;
    let r = match exp.scheme {
        Scheme::Cowu => opt::lambda_max(&exp.config, &exp.range, &grid)?,
        Scheme::Rr => opt::rr_lambda_max(&exp.config, &grid)?,
    };
    let mut s = exp.header("lambda-max");
    s.push_str("scheme,lambda_max,feasible_alphas\n");
    let _ = writeln!(s, "{},{},{}", exp.scheme.name(), fmt_f(r.lambda_max), join_alphas(&r.feasible_alphas));
    Ok(s)
}

pub fn alpha_opt_csv(exp: &Experiment) -> Result<String> {
    let grid = exp.grid()?;
    let mut s = exp.header("alpha-opt");
    s.push_str("lambda,alpha_opt,e_tot_joules,eta\n");
    let rr = metrics::rr_pull_energy(&exp.config).ok().filter(|e| *e > 0.0);
    for &lambda in &exp.lambdas {
        match opt::alpha_opt(&exp.config, &exp.range, lambda, &grid)? {
            Some(o) => {
                let eta = rr.map(|e| fmt_f(o.e_tot / e)).unwrap_or_else(|| NA.to_string());
                let _ = writeln!(s, "{},{},{},{eta}", fmt_f(lambda), fmt_f(o.alpha), fmt_f(o.e_tot));
            }
            None => {
                let _ = writeln!(s, "{},infeasible,{NA},{NA}", fmt_f(lambda));
            }
        }
    }
    Ok(s)
}

fn figure_header(figure: &str, lines: &[(&str, String)]) -> String {
    let mut h = format!("# tool = \"cowu {VERSION} reproduce\"\n# figure = \"{figure}\"\n");
    for (k, v) in lines {
        let _ = writeln!(h, "# {k} = {v}");
    }
    h
}

fn radio_lines(c: &SystemConfig) -> Vec<(&'static str, String)> {
    let p = c.params();
    vec![
        ("slot_duration_s", fmt_f(p.slot_duration)),
        ("tx_prob", fmt_f(p.tx_prob)),
        ("power_tx_w", fmt_f(p.power_tx)),
        ("power_rx_w", fmt_f(p.power_rx)),
        ("v_min", fmt_f(p.v_min)),
        ("v_max", fmt_f(p.v_max)),
    ]
}

/// Frame lengths of the trade-off figure.
pub const FIG3_SLOTS: [usize; 3] = [25, 50, 75];
/// Push populations of the arrival-rate figure.
pub const FIG4_PUSH: [usize; 3] = [15, 25, 35];
/// Pull populations of the arrival-rate figure.
pub const FIG4_PULL: [usize; 5] = [5, 15, 25, 35, 45];
/// Query ranges of the energy figure.
pub const FIG5_RANGES: [(f64, f64); 3] = [(0.94, 0.98), (0.93, 0.99), (0.92, 1.0)];

fn reproduce_fig3(args: &ReproduceArgs) -> Result<Vec<(String, String)>> {
    let base = SystemConfig::default();
    let range = QueryRange::new(0.6, 0.9)?;
    let alphas = default_alphas();
    let mut lines = vec![
        ("n_pull", "25".to_string()),
        ("n_push", "25".to_string()),
        ("arrival_rate", fmt_f(0.025)),
        ("query_lower", fmt_f(0.6)),
        ("query_upper", fmt_f(0.9)),
        ("slots_per_frame", "[25, 50, 75]".to_string()),
        ("alpha", fmt_array(&alphas)),
    ];
    lines.extend(radio_lines(&base));
    let mut files = Vec::new();

    let mut theory = figure_header("fig3", &lines);
    theory.push_str("slots_per_frame,alpha,gamma_w,gamma_u,e_tot_joules\n");
    for slots in FIG3_SLOTS {
        let cfg = base.with(|p| p.slots_per_frame = slots)?;
        for &alpha in &alphas {
            let r = metrics::evaluate(&MetricInputs::new(cfg, range, alpha)?)?;
            let _ = writeln!(theory, "{slots},{},{},{},{}", fmt_f(alpha), fmt_f(r.gamma_w), fmt_f(r.gamma_u), fmt_f(r.e_tot));
        }
    }
    files.push(("fig3_theory.csv".to_string(), theory));

    if args.frames > 0 {
        lines.push(("frames", args.frames.to_string()));
        lines.push(("seed", args.seed.to_string()));
        let mut simulated = figure_header("fig3", &lines);
        let _ = writeln!(simulated, "slots_per_frame,alpha,{SIM_COLUMNS}");
        for slots in FIG3_SLOTS {
            let cfg = base.with(|p| p.slots_per_frame = slots)?;
            for &alpha in &alphas {
                let est = sim::run_campaign(&cfg, &range, alpha, args.frames, args.seed)?;
                sim_row(&mut simulated, &format!("{slots},{}", fmt_f(alpha)), &est);
            }
        }
        files.push(("fig3_simulation.csv".to_string(), simulated));
    }

    let mut gp = figure_header("fig3", &lines);
    gp.push_str(concat!(
        "set datafile separator ','\n",
        "set terminal pngcairo size 1200,360\n",
        "set output 'fig3.png'\n",
        "set multiplot layout 1,3\n",
        "set xlabel 'alpha'\n",
    ));
    for (col, label) in [(3, "gamma_w"), (4, "gamma_u"), (5, "E_tot [J]")] {
        let _ = writeln!(gp, "set ylabel '{label}'");
        let mut parts = Vec::new();
        for slots in FIG3_SLOTS {
            parts.push(format!(
                "'fig3_theory.csv' using ($1=={slots}?$2:1/0):{col} with lines title 'theory L={slots}'"
            ));
            if args.frames > 0 {
                let sim_col = match col {
                    3 => 3,
                    4 => 5,
                    _ => 7,
                };
                parts.push(format!(
                    "'fig3_simulation.csv' using ($1=={slots}?$2:1/0):{sim_col} with points title 'sim L={slots}'"
                ));
            }
        }
        let _ = writeln!(gp, "plot {}", parts.join(", \\\n     "));
    }
    gp.push_str("unset multiplot\n");
    files.push(("fig3.gp".to_string(), gp));
    Ok(files)
}

fn reproduce_fig4() -> Result<Vec<(String, String)>> {
    let grid = GridSpec::standard(DEFAULT_GAMMA_TH)?;
    let range = QueryRange::new(0.94, 0.98)?;
    let base = SystemConfig::default();
    let mut lines = vec![
        ("n_push", "[15, 25, 35]".to_string()),
        ("n_pull", "[5, 15, 25, 35, 45]".to_string()),
        ("slots_per_frame", "50".to_string()),
        ("query_lower", fmt_f(0.94)),
        ("query_upper", fmt_f(0.98)),
        ("gamma_th", fmt_f(grid.gamma_th)),
        ("alpha", fmt_array(&grid.alpha_values)),
        ("lambda_grid", fmt_array(&grid.lambda_values)),
    ];
    lines.extend(radio_lines(&base));

    let mut csv = figure_header("fig4", &lines);
    csv.push_str("scheme,n_push,n_pull,lambda_max,feasible_alphas\n");
    for n_push in FIG4_PUSH {
        for n_pull in FIG4_PULL {
            let cfg = base.with(|p| {
                p.n_push = n_push;
                p.n_pull = n_pull;
            })?;
            let c = opt::lambda_max(&cfg, &range, &grid)?;
            let r = opt::rr_lambda_max(&cfg, &grid)?;
            let _ = writeln!(csv, "cowu,{n_push},{n_pull},{},{}", fmt_f(c.lambda_max), join_alphas(&c.feasible_alphas));
            let _ = writeln!(csv, "rr,{n_push},{n_pull},{},", fmt_f(r.lambda_max));
        }
    }

    let mut gp = figure_header("fig4", &lines);
    gp.push_str(concat!(
        "set datafile separator ','\n",
        "set terminal pngcairo size 640,400\n",
        "set output 'fig4.png'\n",
        "set xlabel 'N_w'\n",
        "set ylabel 'lambda_max [packet/slot]'\n",
    ));
    let mut parts = Vec::new();
    for n_push in FIG4_PUSH {
        for scheme in ["cowu", "rr"] {
            parts.push(format!(
                "'fig4_lambda_max.csv' using (strcol(1) eq '{scheme}' && $2=={n_push} ? $3 : 1/0):4 with linespoints title '{scheme} N_u={n_push}'"
            ));
        }
    }
    let _ = writeln!(gp, "plot {}", parts.join(", \\\n     "));
    Ok(vec![
        ("fig4_lambda_max.csv".to_string(), csv),
        ("fig4.gp".to_string(), gp),
    ])
}

fn reproduce_fig5() -> Result<Vec<(String, String)>> {
    let grid = GridSpec::standard(DEFAULT_GAMMA_TH)?;
    let base = SystemConfig::default();
    let mut lines = vec![
        ("n_pull", "25".to_string()),
        ("n_push", "25".to_string()),
        ("slots_per_frame", "50".to_string()),
        ("query_ranges", "[[0.94, 0.98], [0.93, 0.99], [0.92, 1.0]]".to_string()),
        ("gamma_th", fmt_f(grid.gamma_th)),
        ("alpha", fmt_array(&grid.alpha_values)),
        ("lambda_grid", fmt_array(&grid.lambda_values)),
    ];
    lines.extend(radio_lines(&base));
    let rr = metrics::rr_pull_energy(&base)?;

    let mut csv = figure_header("fig5", &lines);
    csv.push_str("query_lower,query_upper,lambda,alpha_opt,e_tot_joules,eta\n");
    for (lo, hi) in FIG5_RANGES {
        let range = QueryRange::new(lo, hi)?;
        for &lambda in &grid.lambda_values {
            let prefix = format!("{},{},{}", fmt_f(lo), fmt_f(hi), fmt_f(lambda));
            match opt::alpha_opt(&base, &range, lambda, &grid)? {
                Some(o) => {
                    let _ = writeln!(csv, "{prefix},{},{},{}", fmt_f(o.alpha), fmt_f(o.e_tot), fmt_f(o.e_tot / rr));
                }
                None => {
                    let _ = writeln!(csv, "{prefix},infeasible,{NA},{NA}");
                }
            }
        }
    }

    let mut gp = figure_header("fig5", &lines);
    gp.push_str(concat!(
        "set datafile separator ','\n",
        "set datafile missing 'NA'\n",
        "set terminal pngcairo size 900,360\n",
        "set output 'fig5.png'\n",
        "set multiplot layout 1,2\n",
        "set xlabel 'lambda [packet/slot]'\n",
    ));
    for (col, label) in [(4, "alpha_opt"), (6, "eta")] {
        let _ = writeln!(gp, "set ylabel '{label}'");
        let parts: Vec<String> = FIG5_RANGES
            .iter()
            .map(|(lo, hi)| {
                format!(
                    "'fig5_alpha_opt.csv' using ($1=={lo} && $2=={hi} ? $3 : 1/0):{col} with linespoints title '[{lo}, {hi}]'"
                )
            })
            .collect();
        let _ = writeln!(gp, "plot {}", parts.join(", \\\n     "));
    }
    gp.push_str("unset multiplot\n");
    Ok(vec![
        ("fig5_alpha_opt.csv".to_string(), csv),
        ("fig5.gp".to_string(), gp),
    ])
}

/// Writes the figure's files plus `manifest.toml` into `args.out`; returns
/// the written paths.
pub fn reproduce(args: &ReproduceArgs) -> Result<Vec<PathBuf>> {
    let (name, files) = match args.figure {
        Figure::Fig3 => ("fig3", reproduce_fig3(args)?),
        Figure::Fig4 => ("fig4", reproduce_fig4()?),
        Figure::Fig5 => ("fig5", reproduce_fig5()?),
    };
    fs::create_dir_all(&args.out)?;
    let mut written = Vec::new();
    let mut manifest = format!("# tool = \"cowu {VERSION} reproduce\"\nfigure = \"{name}\"\n");
    if args.figure == Figure::Fig3 {
        let _ = writeln!(manifest, "frames = {}\nseed = {}", args.frames, args.seed);
    }
    manifest.push_str("files = [");
    for (i, (file, text)) in files.iter().enumerate() {
        let path = args.out.join(file);
        fs::write(&path, text)?;
        written.push(path);
        let _ = write!(manifest, "{}\"{file}\"", if i == 0 { "" } else { ", " });
    }
    manifest.push_str("]\n\n");
    // Parameters are repeated verbatim from the dataset header.
    manifest.push_str("[parameters]\n");
    for line in files[0].1.lines().take_while(|l| l.starts_with("# ")).skip(1) {
        manifest.push_str(&line[2..]);
        manifest.push('\n');
    }
    let path = args.out.join("manifest.toml");
    fs::write(&path, manifest)?;
    written.push(path);
    Ok(written)
}

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Analyze(a) => emit(a.out.as_deref(), &analyze_csv(&Experiment::resolve(a)?)?),
        Command::Simulate(a) => emit(a.out.as_deref(), &simulate_csv(&Experiment::resolve(a)?)?),
        Command::Sweep(a) => emit(
            a.out.as_deref(),
            &sweep_csv(&Experiment::resolve_for_search(a)?, a.simulate)?,
        ),
        Command::LambdaMax(a) => emit(
            a.out.as_deref(),
            &lambda_max_csv(&Experiment::resolve_for_search(a)?)?,
        ),
        Command::AlphaOpt(a) => emit(
            a.out.as_deref(),
            &alpha_opt_csv(&Experiment::resolve_for_search(a)?)?,
        ),
        Command::Reproduce(a) => reproduce(a).map(|_| ()),
    }
}

/// Process exit status for an error: 3 for infeasible configurations,
/// 1 for I/O failures, 2 for everything else.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Infeasible(_) => 3,
        Error::Io(_) => 1,
        Error::Domain(_) | Error::Config(_) => 2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve_to_the_tradeoff_setup() {
        let exp = Experiment::resolve(&CommonArgs::default()).unwrap();
        assert_eq!(exp.config, SystemConfig::default());
        assert_eq!(exp.range, QueryRange::new(0.6, 0.9).unwrap());
        assert_eq!(exp.alphas, vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0]);
        assert_eq!(exp.frames, DEFAULT_FRAMES);
    }

    #[test]
    fn overrides_and_flags_take_precedence() {
        let args = CommonArgs {
            overrides: vec!["n_pull = 3".into(), "alpha=[0.5]".into(), "seed=9".into()],
            alpha: Some("0.1, 0.3".into()),
            ..Default::default()
        };
        let exp = Experiment::resolve(&args).unwrap();
        assert_eq!(exp.config.n_pull(), 3);
        assert_eq!(exp.alphas, vec![0.1, 0.3]);
        assert_eq!(exp.seed, 9);
    }

    #[test]
    fn bad_configs_are_rejected() {
        let bad = |o: &str| {
            Experiment::resolve(&CommonArgs {
                overrides: vec![o.into()],
                ..Default::default()
            })
            .unwrap_err()
        };
        assert!(matches!(bad("unknown_key=1"), Error::Config(_)));
        assert!(matches!(bad("tx_prob=0"), Error::Domain(_)));
        assert!(matches!(bad("query_upper=1.5"), Error::Domain(_)));
        assert!(matches!(bad("frames=0"), Error::Config(_)));
        assert!(matches!(bad("alpha=[0.5, 0.2]"), Error::Domain(_)));
        assert!(matches!(bad("novalue"), Error::Config(_)));
    }

    #[test]
    fn header_round_trips_as_config() {
        let exp = Experiment::resolve(&CommonArgs {
            overrides: vec!["n_push=7".into(), "tx_prob=0.1".into()],
            ..Default::default()
        })
        .unwrap();
        let header = exp.header("analyze");
        let body: String = header.lines().map(|l| format!("{}\n", &l[2..])).collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        fs::write(&path, body).unwrap();
        let again = Experiment::resolve(&CommonArgs {
            config: Some(path),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(again, exp);
    }

    #[test]
    fn float_format_round_trips() {
        for v in [0.0, 1.0, 0.1, 4.38981442013142e-21, 0.023820429045878] {
            assert_eq!(fmt_f(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Infeasible("x".into())), 3);
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(exit_code(&Error::Domain("x".into())), 2);
    }
}
