use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use mechscale::fit::{fit_dataset, fit_integration_settings, FitSpec};
use mechscale::io::{
    curve_csv, law_csv, normalize_axis, parse_dataset, ssa_stats_csv, write_atomic, CurveRow, FitDocument,
    NormalizeMode, ParamsDocument,
};
use mechscale::laws::{
    amdahl_speedup, gustafson_speedup, speedup, throughput, usl_approx_speedup, usl_speedup, AmdahlParams,
    GustafsonParams, SwarmParams, UslParams, swarm_performance,
};
use mechscale::ssa::{run_ensemble, SsaSettings};
use mechscale::{find_critical_n, integrate_to_steady, presets, sweep, Contribution, IntegrationSettings, Rates, SystemConfig};
use serde_json::json;

/// Relative `--out` paths are resolved against this directory when it is set.
const OUT_DIR_ENV: &str = "MECHSCALE_OUT_DIR";

#[derive(Parser)]
#[command(name = "mechscale", version, about = "Steady states, scalability curves, stochastic runs and rate fits for the solo/grupo/fermo model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate to the steady state at one system size and print it as JSON.
    Steady {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        n: f64,
        #[command(flatten)]
        integration: IntegrationArgs,
    },
    /// Steady states over a range of sizes, written as `n,s,g,f,x,speedup`.
    Sweep {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        range: RangeArgs,
        #[command(flatten)]
        integration: IntegrationArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a classical scalability law over a range of sizes.
    Laws {
        #[command(subcommand)]
        law: Law,
    },
    /// Ensemble of exact stochastic simulations started from `(n, 0, 0)`.
    Ssa {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = 100)]
        runs: usize,
        #[arg(long)]
        t_end: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Sampling period; defaults to t_end / 100.
        #[arg(long)]
        record_interval: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit rates and c_s to a `n,x` dataset by differential evolution.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "none")]
        normalize: NormalizeMode,
        /// Pin a parameter, e.g. `--fix k5=0`. Repeatable.
        #[arg(long = "fix", value_name = "NAME=VALUE")]
        fixed: Vec<String>,
        /// Use the first data point's throughput as c_s.
        #[arg(long)]
        pin_cs_first: bool,
        #[arg(long, default_value_t = 0.0)]
        cg: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 300)]
        generations: usize,
        /// Defaults to 15 per free parameter.
        #[arg(long)]
        population: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the size of maximal throughput as JSON, or `none` for a monotone curve.
    Critical {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = 1.0)]
        n_min: f64,
        #[arg(long)]
        n_max: f64,
        #[command(flatten)]
        integration: IntegrationArgs,
    },
}

#[derive(Subcommand)]
enum Law {
    /// n / (1 + sigma (n - 1))
    Amdahl {
        #[arg(long)]
        sigma: f64,
        #[command(flatten)]
        range: RangeArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// n + (1 - n) sigma
    Gustafson {
        #[arg(long)]
        sigma: f64,
        #[command(flatten)]
        range: RangeArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// n / (1 + sigma (n - 1) + kappa n (n - 1))
    #[command(allow_negative_numbers = true)]
    Usl {
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        kappa: f64,
        #[command(flatten)]
        range: RangeArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// a n^b exp(c n)
    #[command(allow_negative_numbers = true)]
    Swarm {
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
        #[arg(long)]
        c: f64,
        #[command(flatten)]
        range: RangeArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// n / ((k2/k4)^2 n^2 + (k2/k4) n + 1)
    UslApprox {
        #[arg(long)]
        k2: f64,
        #[arg(long)]
        k4: f64,
        #[command(flatten)]
        range: RangeArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ParamArgs {
    /// JSON file with k1..k7, c_s, c_g.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    params: Option<PathBuf>,
    /// `table1` or `table2:<sql|wireless|particles|swarm|nas-bt|nas-sp>`.
    #[arg(long)]
    preset: Option<String>,
    /// Override the solo contribution.
    #[arg(long)]
    cs: Option<f64>,
    /// Override the grupo contribution.
    #[arg(long)]
    cg: Option<f64>,
}

impl ParamArgs {
    fn load(&self) -> anyhow::Result<(Rates, Contribution)> {
        let doc = match (&self.params, &self.preset) {
            (Some(path), _) => ParamsDocument::load(path).with_context(|| format!("loading {}", path.display()))?,
            (None, Some(name)) => presets::by_name(name)?.to_document(),
            (None, None) => bail!(mechscale::Error::InvalidInput("one of --params or --preset is required".into())),
        };
        let contribution = Contribution::new(
            self.cs.unwrap_or(doc.contribution.c_s),
            self.cg.unwrap_or(doc.contribution.c_g),
        )?;
        Ok((doc.rates, contribution))
    }
}

#[derive(Args)]
struct RangeArgs {
    #[arg(long, default_value_t = 1.0)]
    n_min: f64,
    #[arg(long)]
    n_max: f64,
    /// Evenly spaced sizes; without it every integer step from n-min is used.
    #[arg(long)]
    n_steps: Option<usize>,
}

impl RangeArgs {
    fn sizes(&self) -> mechscale::Result<Vec<f64>> {
        size_grid(self.n_min, self.n_max, self.n_steps)
    }
}

#[derive(Args)]
struct IntegrationArgs {
    /// Steady-state tolerance on the right-hand side, relative to max(1, n).
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    max_steps: Option<u64>,
}

impl IntegrationArgs {
    fn settings(&self) -> IntegrationSettings {
        let d = IntegrationSettings::default();
        IntegrationSettings {
            steady_tol: self.tol.unwrap_or(d.steady_tol),
            t_max: self.t_max.unwrap_or(d.t_max),
            max_steps: self.max_steps.unwrap_or(d.max_steps),
            ..d
        }
    }
}

fn size_grid(n_min: f64, n_max: f64, steps: Option<usize>) -> mechscale::Result<Vec<f64>> {
    use mechscale::Error::InvalidInput;
    if !(n_min.is_finite() && n_max.is_finite() && n_min > 0.0 && n_max >= n_min) {
        return Err(InvalidInput(format!("need 0 < n-min <= n-max, got [{n_min}, {n_max}]")));
    }
    Ok(match steps {
        Some(0) => return Err(InvalidInput("n-steps must be at least 1".into())),
        Some(1) => vec![n_min],
        Some(k) => (0..k).map(|i| n_min + (n_max - n_min) * i as f64 / (k - 1) as f64).collect(),
        None => (0..).map(|i| n_min + i as f64).take_while(|n| *n <= n_max * (1.0 + 1e-12)).collect(),
    })
}

fn resolve_out(path: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if path.is_relative() && !dir.is_empty() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

fn emit(out: Option<&Path>, contents: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            let path = resolve_out(path);
            write_atomic(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        }
        None => print!("{contents}"),
    }
    Ok(())
}

fn run_law(law: Law) -> anyhow::Result<()> {
    let (header, rows, out): (&str, Vec<(f64, f64)>, Option<PathBuf>) = match law {
        Law::Amdahl { sigma, range, out } => {
            let p = AmdahlParams::new(sigma)?;
            ("speedup", range.sizes()?.into_iter().map(|n| (n, amdahl_speedup(&p, n))).collect(), out)
        }
        Law::Gustafson { sigma, range, out } => {
            let p = GustafsonParams::new(sigma)?;
            ("speedup", range.sizes()?.into_iter().map(|n| (n, gustafson_speedup(&p, n))).collect(), out)
        }
        Law::Usl { sigma, kappa, range, out } => {
            let p = UslParams::new(sigma, kappa)?;
            let rows = range
                .sizes()?
                .into_iter()
                .map(|n| usl_speedup(&p, n).map(|v| (n, v)))
                .collect::<mechscale::Result<_>>()?;
            ("speedup", rows, out)
        }
        Law::Swarm { a, b, c, range, out } => {
            let p = SwarmParams::new(a, b, c)?;
            ("performance", range.sizes()?.into_iter().map(|n| (n, swarm_performance(&p, n))).collect(), out)
        }
        Law::UslApprox { k2, k4, range, out } => {
            if !(k2.is_finite() && k2 >= 0.0 && k4.is_finite() && k4 > 0.0) {
                bail!(mechscale::Error::InvalidInput(format!("need k2 >= 0 and k4 > 0, got k2={k2}, k4={k4}")));
            }
            ("speedup", range.sizes()?.into_iter().map(|n| (n, usl_approx_speedup(k2, k4, n))).collect(), out)
        }
    };
    emit(out.as_deref(), &law_csv(header, &rows))
}

fn parse_fix(spec: FitSpec, item: &str) -> anyhow::Result<FitSpec> {
    let Some((name, value)) = item.split_once('=') else {
        bail!(mechscale::Error::InvalidInput(format!("--fix expects NAME=VALUE, got '{item}'")));
    };
    let value: f64 = value
        .trim()
        .parse()
        .map_err(|_| mechscale::Error::InvalidInput(format!("--fix value for {name} is not a number: '{value}'")))?;
    Ok(spec.fix(name.trim(), value)?)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Steady { params, n, integration } => {
            let (rates, contribution) = params.load()?;
            let cfg = SystemConfig::new(rates, contribution, n)?;
            let fp = integrate_to_steady(&cfg, &integration.settings())?;
            let doc = json!({
                "n": n,
                "s_star": fp.s_star,
                "g_star": fp.g_star,
                "f_star": fp.f_star,
                "stability": fp.stability,
                "residual": fp.residual,
                "throughput": throughput(&fp, &contribution),
                "speedup": speedup(&fp, &contribution).ok(),
            });
            println!("{}", serde_json::to_string_pretty(&doc)?);
        }
        Command::Sweep { params, range, integration, out } => {
            let (rates, contribution) = params.load()?;
            let result = sweep(&rates, &contribution, &range.sizes()?, &integration.settings())?;
            emit(out.as_deref(), &curve_csv(&CurveRow::from_sweep(&result)))?;
        }
        Command::Laws { law } => run_law(law)?,
        Command::Ssa { params, n, runs, t_end, seed, record_interval, out } => {
            let (rates, _) = params.load()?;
            let settings = SsaSettings { t_end, seed, record_interval: record_interval.unwrap_or(t_end / 100.0) };
            let stats = run_ensemble(n, &rates, &settings, runs)?;
            emit(out.as_deref(), &ssa_stats_csv(&stats))?;
        }
        Command::Fit { data, normalize, fixed, pin_cs_first, cg, seed, generations, population, out } => {
            let text = std::fs::read_to_string(&data).with_context(|| format!("reading {}", data.display()))?;
            let label = data.file_stem().map(|s| s.to_string_lossy().into_owned());
            let dataset = parse_dataset(&text).with_context(|| format!("parsing {}", data.display()))?;
            let dataset = normalize_axis(&dataset, normalize)?;
            let mut spec = FitSpec { c_g: cg, pin_cs_first, ..FitSpec::default() }.with_seed(seed);
            spec.de.max_generations = generations;
            spec.de.population = population;
            for item in &fixed {
                spec = parse_fix(spec, item)?;
            }
            let result = fit_dataset(&dataset, &spec, &fit_integration_settings())?;
            emit(out.as_deref(), &FitDocument::from_result(&result, label).to_json()?)?;
        }
        Command::Critical { params, n_min, n_max, integration } => {
            let (rates, contribution) = params.load()?;
            let result = sweep(&rates, &contribution, &size_grid(n_min, n_max, None)?, &integration.settings())?;
            match find_critical_n(&result) {
                Some((n_c, x_max)) => println!("{}", json!({ "n_c": n_c, "x_max": x_max })),
                None => println!("none"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let kind = err.chain().find_map(|e| e.downcast_ref::<mechscale::Error>()).map_or("error", |e| e.kind());
            let message = format!("{err:#}").replace('\n', " ");
            eprintln!("error: {kind}: {message}");
            ExitCode::FAILURE
        }
    }
}
