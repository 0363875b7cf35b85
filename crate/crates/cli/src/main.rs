use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use iridium_core::config::{load_scenario, LoadedScenario};
use iridium_core::fleet::{simulate, Engine};
use iridium_core::gap::{
    analyze_gap, max_capacity_path, pgm_required, pgm_required_series, required_dissolution_rate, sweep_gamma,
    sweep_tau, CellParams, GapOptions,
};
use iridium_core::history::validate_history;
use iridium_core::manifest::RunManifest;
use iridium_core::matrix::run_matrix;
use iridium_core::output::{
    demand_table, gap_report_json, read_series_file, stockpile_table, supply_table, sweep_summary_table, write_file,
    write_json, Format, Table,
};
use iridium_core::scenario::RecyclingRamp;
use iridium_core::series::Unit;
use iridium_core::supply::{project_supply, SupplyOptions, SupplyVariant, SUPPLY_ASSUMPTION};
use iridium_core::Error;

/// Iridium demand, supply and gap projections for PEM electrolyzer fleets.
#[derive(Debug, Parser)]
#[command(name = "iridium", version, about)]
struct Cli {
    /// Overrides the seed of every scenario.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (or file, for `supply`). Tables go to stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    /// Suppress progress messages on stderr.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EngineArg {
    Mc,
    Expected,
}

impl From<EngineArg> for Engine {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Mc => Engine::Mc,
            EngineArg::Expected => Engine::Expected,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum VariantArg {
    Strong,
    Weak,
}

impl From<VariantArg> for SupplyVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Strong => SupplyVariant::Strong,
            VariantArg::Weak => SupplyVariant::Weak,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SweepParam {
    Tau,
    Gamma,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Scenario file utilities.
    Scenario {
        #[command(subcommand)]
        action: ScenarioAction,
    },
    /// Run the fleet model and write demand_breakdown.csv plus run_meta.json.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum, default_value_t = EngineArg::Expected)]
        engine: EngineArg,
    },
    /// Project iridium available for electrolysis from sector history.
    Supply {
        #[arg(long)]
        history: PathBuf,
        #[arg(long, value_enum)]
        variant: VariantArg,
        /// Last projected year.
        #[arg(long, default_value_t = 2050)]
        horizon: i32,
        /// First projected year (defaults to the year after the history).
        #[arg(long)]
        start: Option<i32>,
        /// Primary supply in t/yr.
        #[arg(long, default_value_t = 7.5)]
        primary: f64,
    },
    /// Segment demand − supply and track the stockpile.
    Gaps {
        /// CSV with `year` and `m_total` or `value`.
        #[arg(long)]
        demand: PathBuf,
        /// CSV with `year` and `available_pemel_t` or `value`.
        #[arg(long)]
        supply: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        stock0: f64,
        /// Primary supply the percentages refer to, t/yr.
        #[arg(long, default_value_t = 7.5)]
        baseline: f64,
    },
    /// Cumulative demand over a range of lifetimes or recycling ramps.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum)]
        param: SweepParam,
        /// τ values, or ramp end efficiencies for `gamma`.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Vec<f64>,
        #[arg(long, value_enum, default_value_t = EngineArg::Expected)]
        engine: EngineArg,
    },
    /// Derived metrics.
    Derived {
        #[command(subcommand)]
        metric: Derived,
    },
    /// Run every scenario against every supply variant with sensitivity panels.
    RunMatrix {
        /// Directory holding matrix.toml, history.csv and scenario files.
        #[arg(long, env = "IRIDIUM_CONFIG_DIR", default_value = "data")]
        config_dir: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum ScenarioAction {
    /// Check a scenario file and print its resolved series.
    Validate { file: PathBuf },
}

#[derive(Debug, Subcommand)]
enum Derived {
    /// PGM output needed to yield additional iridium.
    Pgm {
        /// Additional iridium in t.
        #[arg(long, conflicts_with = "series")]
        iridium: Option<f64>,
        /// CSV with `year` and `gap_t` or `value`; only shortfalls count.
        #[arg(long)]
        series: Option<PathBuf>,
        #[arg(long, default_value_t = 0.02)]
        ir_fraction: f64,
    },
    /// Maximum capacity reachable with a given iridium supply.
    Maxcap {
        /// CSV with `year` and `available_pemel_t` or `value`.
        #[arg(long)]
        supply: PathBuf,
        /// Scenario providing ω, γ and lifetimes.
        #[arg(long)]
        scenario: PathBuf,
        /// Share of the supply allocated to electrolysis.
        #[arg(long, default_value_t = 1.0)]
        allocation: f64,
    },
    /// Anode dissolution rate sustaining a lifetime at the scenario's ω.
    Dissolution {
        #[arg(long)]
        scenario: PathBuf,
        /// Lifetimes in years.
        #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = [10.0, 14.0])]
        tau: Vec<f64>,
        #[arg(long, default_value_t = 3.0)]
        power_density: f64,
        #[arg(long, default_value_t = 0.9)]
        capacity_factor: f64,
        #[arg(long, default_value_t = 1.0)]
        consumable_fraction: f64,
    },
}

/// Bad arguments detected after parsing; exits with 1.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

struct Ctx {
    seed: Option<u64>,
    out: Option<PathBuf>,
    format: Format,
    quiet: bool,
}

impl Ctx {
    fn note(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn ext(&self) -> &'static str {
        match self.format {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }

    /// Writes `table` as `<out>/<stem>.<ext>` or prints it.
    fn emit(&self, stem: &str, table: &Table) -> anyhow::Result<()> {
        let text = table.render(self.format);
        match &self.out {
            Some(dir) => {
                let p = dir.join(format!("{stem}.{}", self.ext()));
                write_file(&p, text.as_bytes())?;
                self.note(format!("wrote {}", p.display()));
            }
            None => print!("{text}"),
        }
        Ok(())
    }

    fn emit_json(&self, name: &str, value: &serde_json::Value) -> anyhow::Result<()> {
        match &self.out {
            Some(dir) => {
                let p = dir.join(name);
                write_json(&p, value)?;
                self.note(format!("wrote {}", p.display()));
            }
            None => println!("{}", serde_json::to_string_pretty(value)?),
        }
        Ok(())
    }

    fn load(&self, path: &Path) -> anyhow::Result<LoadedScenario> {
        let mut l = load_scenario(path)?;
        if let Some(seed) = self.seed {
            l.scenario.seed = seed;
        }
        Ok(l)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let ctx = Ctx {
        seed: cli.seed,
        out: cli.out,
        format: cli.format.into(),
        quiet: cli.quiet,
    };
    match run(&ctx, cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", render_error(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}

/// Joins the cause chain, skipping causes already spelled out by their parent.
fn render_error(e: &anyhow::Error) -> String {
    let mut out = String::new();
    let mut prev = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !prev.contains(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
        prev = msg;
    }
    out
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.downcast_ref::<Usage>().is_some() {
            return 1;
        }
        if let Some(err) = cause.downcast_ref::<Error>() {
            return if err.is_validation() { 1 } else { 2 };
        }
    }
    2
}

fn run(ctx: &Ctx, command: Command) -> anyhow::Result<()> {
    match command {
        Command::Scenario {
            action: ScenarioAction::Validate { file },
        } => validate_scenario(ctx, &file),
        Command::Simulate { scenario, engine } => simulate_cmd(ctx, &scenario, engine.into()),
        Command::Supply {
            history,
            variant,
            horizon,
            start,
            primary,
        } => supply_cmd(ctx, &history, variant.into(), start, horizon, primary),
        Command::Gaps {
            demand,
            supply,
            stock0,
            baseline,
        } => gaps_cmd(ctx, &demand, &supply, stock0, baseline),
        Command::Sweep {
            scenario,
            param,
            values,
            engine,
        } => sweep_cmd(ctx, &scenario, param, &values, engine.into()),
        Command::Derived { metric } => derived_cmd(ctx, metric),
        Command::RunMatrix { config_dir } => {
            let out = ctx.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            if ctx.seed.is_some() {
                ctx.note("--seed is ignored by run-matrix; seeds come from the scenario files");
            }
            let t = Instant::now();
            let (m, written) = run_matrix(&config_dir, &out)?;
            for c in m.cells() {
                ctx.note(format!(
                    "{:<20} {:<6} shortfall {:>8.2} t  surplus {:>7.2} t  {}",
                    c.scenario,
                    c.variant,
                    c.total_shortfall,
                    c.total_surplus,
                    if c.feasible { "feasible" } else { "infeasible" }
                ));
            }
            ctx.note(format!(
                "wrote {} files to {} in {:.2?}",
                written.len(),
                out.display(),
                t.elapsed()
            ));
            Ok(())
        }
    }
}

fn validate_scenario(ctx: &Ctx, file: &Path) -> anyhow::Result<()> {
    let l = ctx.load(file)?;
    let s = &l.scenario;
    let (a, b) = s.horizon;
    let cum = s.pathway.cumulative().slice(a, b)?;
    let adds = s.pathway.additions().slice(a, b)?;
    let omega = s.omega.series(a, b)?;
    let gamma = s.gamma.series(a, b)?;
    let rows = cum
        .years()
        .map(|y| {
            let v = [&cum, &adds, &omega, &gamma].map(|x| x.at(y).expect("same range"));
            (y.to_string(), v.to_vec())
        })
        .collect();
    let table = Table {
        key: "year".into(),
        columns: vec![
            "cumulative_gw".into(),
            "additions_gw".into(),
            "omega_kg_per_gw".into(),
            "gamma".into(),
        ],
        rows,
    };
    ctx.note(format!(
        "{}: ok (τ = {}, seed = {}, horizon {a}..={b}, mc_subsample = {})",
        s.id, s.tau_mean, s.seed, s.mc_subsample
    ));
    ctx.emit(&format!("{}_resolved", s.id), &table)
}

fn simulate_cmd(ctx: &Ctx, path: &Path, engine: Engine) -> anyhow::Result<()> {
    let l = ctx.load(path)?;
    let t = Instant::now();
    let d = simulate(&l.scenario, engine)?;
    for w in &d.warnings {
        ctx.note(format!("warning: {w}"));
    }
    ctx.note(format!(
        "{} ({engine}): Σ m_total = {:.3} t in {:.2?}",
        l.scenario.id,
        d.cumulative_demand(),
        t.elapsed()
    ));
    ctx.emit("demand_breakdown", &demand_table(&d))?;
    if ctx.out.is_some() {
        let mut man = RunManifest::new(&l.scenario.id, engine, l.scenario.seed, &l.inputs);
        man.resolved_config = Some(serde_json::to_value(&l.config)?);
        man.notes.extend(d.warnings.iter().cloned());
        let meta = json!({
            "manifest": man,
            "mc_subsample": l.scenario.mc_subsample,
            "simulated_units": d.simulated_units,
            "versions": { "iridium": env!("CARGO_PKG_VERSION") },
        });
        ctx.emit_json("run_meta.json", &meta)?;
    }
    Ok(())
}

fn supply_cmd(
    ctx: &Ctx,
    history: &Path,
    variant: SupplyVariant,
    start: Option<i32>,
    horizon: i32,
    primary: f64,
) -> anyhow::Result<()> {
    let h = validate_history(history)?;
    let opts = SupplyOptions {
        primary,
        horizon: (start.unwrap_or(h.last_year() + 1), horizon),
    };
    let p = project_supply(&h, variant, &opts)?;
    ctx.note(format!("{variant} supply (φ = {}): {SUPPLY_ASSUMPTION}", p.phi));
    let table = supply_table(&p);
    match &ctx.out {
        Some(o) if o.extension().is_some() => {
            write_file(o, table.render(ctx.format).as_bytes())?;
            ctx.note(format!("wrote {}", o.display()));
            Ok(())
        }
        _ => ctx.emit("supply", &table),
    }
}

fn gaps_cmd(ctx: &Ctx, demand: &Path, supply: &Path, stock0: f64, baseline: f64) -> anyhow::Result<()> {
    let d = read_series_file(demand, &["m_total", "value"], Unit::TonnePerYear)
        .with_context(|| format!("reading demand {}", demand.display()))?;
    let s = read_series_file(supply, &["available_pemel_t", "value"], Unit::TonnePerYear)
        .with_context(|| format!("reading supply {}", supply.display()))?;
    let r = analyze_gap(
        &d,
        &s,
        &GapOptions {
            initial_stock: stock0,
            baseline_primary: baseline,
        },
    )?;
    ctx.note(format!(
        "shortfall {:.3} t, surplus {:.3} t, {}",
        r.total_shortfall,
        r.total_surplus,
        if r.feasible { "feasible" } else { "infeasible" }
    ));
    ctx.emit_json("gap_report.json", &gap_report_json(&r))?;
    ctx.emit("stockpile", &stockpile_table(&r))
}

fn sweep_cmd(ctx: &Ctx, path: &Path, param: SweepParam, values: &[f64], engine: Engine) -> anyhow::Result<()> {
    if values.is_empty() {
        return Err(Usage("--values must list at least one value".into()).into());
    }
    let l = ctx.load(path)?;
    let s = &l.scenario;
    let r = match param {
        SweepParam::Tau => sweep_tau(s, values, engine)?,
        SweepParam::Gamma => {
            let ramps = values
                .iter()
                .map(|&g| {
                    let start = s.gamma.gamma_start.min(g);
                    let ramp = RecyclingRamp::new(start, g, s.gamma.start_year.max(s.horizon.0), s.gamma.ramp_end_year.max(s.horizon.0))?;
                    Ok((format!("{g}"), ramp))
                })
                .collect::<Result<Vec<_>, Error>>()?;
            sweep_gamma(s, &ramps, engine)?
        }
    };
    ctx.note(format!("minimizer: {}", r.minimizer_label()));
    ctx.emit("sweep", &sweep_summary_table(&r))
}

fn derived_cmd(ctx: &Ctx, metric: Derived) -> anyhow::Result<()> {
    match metric {
        Derived::Pgm {
            iridium,
            series,
            ir_fraction,
        } => match (iridium, series) {
            (Some(t), None) => {
                let pgm = pgm_required(t, ir_fraction)?;
                ctx.emit_json("pgm.json", &json!({ "iridium_t": t, "ir_fraction": ir_fraction, "pgm_t": pgm }))
            }
            (None, Some(p)) => {
                let gap = read_series_file(&p, &["gap_t", "value"], Unit::TonnePerYear)?;
                let extra = gap.map(|v| v.max(0.0));
                let pgm = pgm_required_series(&extra, ir_fraction)?;
                let rows = extra
                    .iter()
                    .map(|(y, v)| (y.to_string(), vec![v, pgm.at(y).expect("same range")]))
                    .collect();
                ctx.emit(
                    "pgm",
                    &Table {
                        key: "year".into(),
                        columns: vec!["extra_iridium_t".into(), "pgm_t".into()],
                        rows,
                    },
                )
            }
            _ => Err(Usage("give exactly one of --iridium or --series".into()).into()),
        },
        Derived::Maxcap {
            supply,
            scenario,
            allocation,
        } => {
            if !(allocation > 0.0 && allocation <= 1.0) {
                return Err(Usage(format!("--allocation {allocation} not in (0, 1]")).into());
            }
            let l = ctx.load(&scenario)?;
            let s = read_series_file(&supply, &["available_pemel_t", "value"], Unit::TonnePerYear)?
                .scale(allocation)?;
            let m = max_capacity_path(&s, &l.scenario.omega, &l.scenario)?;
            let rows = m
                .cumulative
                .years()
                .map(|y| {
                    let v = [&m.cumulative, &m.additions, &m.replaced, &m.iridium_available, &m.iridium_used]
                        .map(|x| x.at(y).expect("same range"));
                    (y.to_string(), v.to_vec())
                })
                .collect();
            ctx.emit(
                "maxcap",
                &Table {
                    key: "year".into(),
                    columns: ["capacity_gw", "additions_gw", "replaced_gw", "iridium_available_t", "iridium_used_t"]
                        .map(String::from)
                        .to_vec(),
                    rows,
                },
            )
        }
        Derived::Dissolution {
            scenario,
            tau,
            power_density,
            capacity_factor,
            consumable_fraction,
        } => {
            let l = ctx.load(&scenario)?;
            let s = &l.scenario;
            let cell = CellParams {
                power_density_w_per_cm2: power_density,
                capacity_factor,
                consumable_fraction,
            };
            let omega = s.omega.series(s.horizon.0, s.horizon.1)?;
            let rates = tau
                .iter()
                .map(|&t| required_dissolution_rate(&omega, t, &cell))
                .collect::<Result<Vec<_>, Error>>()?;
            ctx.note(format!(
                "cell: {power_density} W/cm², capacity factor {capacity_factor}, consumable fraction {consumable_fraction}"
            ));
            let rows = omega
                .iter()
                .map(|(y, w)| {
                    let mut v = vec![w];
                    v.extend(rates.iter().map(|r| r.at(y).expect("same range")));
                    (y.to_string(), v)
                })
                .collect();
            let mut columns = vec!["omega_kg_per_gw".to_string()];
            columns.extend(tau.iter().map(|t| format!("rate_mg_cm2_h_tau_{t}")));
            ctx.emit(
                "dissolution",
                &Table {
                    key: "year".into(),
                    columns,
                    rows,
                },
            )
        }
    }
}
