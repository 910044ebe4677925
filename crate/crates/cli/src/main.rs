use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use sotx_core::config::RunConfig;
use sotx_core::io::{labels_json, read_measure, read_series, write_json, write_measure, write_scan};
use sotx_core::partition::regime_scan;
use sotx_core::pipeline::{check_names, run_checks, run_solve, CheckInput, CheckStatus, SolveOutcome};
use sotx_core::presets::{find_preset, preset_names, PresetParams};
use sotx_core::transport::build_solver;

/// Optimal transport between signed measures with smooth, atomic and
/// fractal parts.
#[derive(Parser)]
#[command(name = "sotx", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl Common {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p).with_context(|| format!("loading config {}", p.display()))?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out_dir(&self) -> Result<&Path> {
        std::fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        Ok(&self.out)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write a preset pair as `mu.json` / `nu.json` manifests with CSV payloads.
    Generate {
        #[arg(long)]
        preset: String,
        #[arg(long)]
        depth: Option<u32>,
        #[arg(long)]
        cells: Option<usize>,
        #[arg(long)]
        count: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Solve the block transport problem and write plan, duals, map and labels.
    Solve {
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        nu: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run a verification check: ma, legendre, monotone, fractal, kernel, weak-error or all.
    Verify {
        kind: String,
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        nu: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Inter-sign ratio and signed distance between consecutive windows of a series.
    Scan {
        #[arg(long)]
        series: PathBuf,
        #[arg(long)]
        window: usize,
        #[arg(long, default_value_t = 1)]
        stride: usize,
        #[command(flatten)]
        common: Common,
    },
}

/// Whether every check passed.
type Passed = bool;

fn generate(preset: &str, params: PresetParams, common: &Common) -> Result<Passed> {
    let p = find_preset(preset).map_err(|e| anyhow!("{e}; available presets: {}", preset_names().join(", ")))?;
    let pair = p.build(&params)?;
    let out = common.out_dir()?;
    let mu = write_measure(out, "mu", &pair.mu, Some(&pair.info))?;
    let nu = write_measure(out, "nu", &pair.nu, Some(&pair.info))?;
    println!("wrote {} and {}", mu.display(), nu.display());
    Ok(true)
}

fn solve(mu: &Path, nu: &Path, common: &Common) -> Result<Passed> {
    let cfg = common.config()?;
    let (mu, _) = read_measure(mu).with_context(|| format!("reading {}", mu.display()))?;
    let (nu, _) = read_measure(nu).with_context(|| format!("reading {}", nu.display()))?;
    let out = common.out_dir()?;
    let s = match run_solve(&mu, &nu, &cfg)? {
        SolveOutcome::Solved(s) => s,
        SolveOutcome::Aborted(a) => {
            write_json(&out.join("report.json"), &a)?;
            eprintln!("{}; see {}", a.reason, out.join("report.json").display());
            return Ok(false);
        }
    };
    write_json(&out.join("plan.json"), &s.plan)?;
    write_json(&out.join("duals.json"), s.duals())?;
    write_json(&out.join("map.json"), &s.map)?;
    write_json(&out.join("labels.json"), &labels_json(&s.labels))?;
    write_json(&out.join("report.json"), &s.report())?;
    let m = &s.summary;
    println!("objective  {:.12}", m.objective);
    println!("d_ST       {:.12}", m.d_st);
    match m.inter_sign_ratio {
        Some(r) => println!("R          {r:.6}"),
        None => println!("R          n/a"),
    }
    for (sign, b) in &m.b_split {
        println!("b-split    {sign:?} {b:.6}");
    }
    for (region, mass) in &m.region_masses {
        println!("region     {:<10} {mass:.6}", region.name());
    }
    println!("gap        {:.3e} (relative)", m.gap.relative);
    for w in &m.warnings {
        eprintln!("warning: {w}");
    }
    Ok(true)
}

fn verify(kind: &str, mu: &Path, nu: &Path, common: &Common) -> Result<Passed> {
    if kind != "all" && !check_names().contains(&kind) {
        anyhow::bail!("unknown check '{kind}'; expected one of: {}, all", check_names().join(", "));
    }
    let cfg = common.config()?;
    let (mu, manifest) = read_measure(mu).with_context(|| format!("reading {}", mu.display()))?;
    let (nu, _) = read_measure(nu).with_context(|| format!("reading {}", nu.display()))?;
    let input = CheckInput::new(&mu, &nu, manifest.preset.as_ref(), &cfg);
    let report = run_checks(kind, &input)?;
    let path = common.out_dir()?.join(format!("verify_{kind}.json"));
    write_json(&path, &report)?;
    for c in &report.checks {
        let status = match c.status {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Skipped => "SKIP",
        };
        println!("{:<11} {status}  {}", c.name, c.summary);
    }
    Ok(report.pass)
}

fn scan(series: &Path, window: usize, stride: usize, common: &Common) -> Result<Passed> {
    let cfg = common.config()?;
    let values = read_series(series).with_context(|| format!("reading {}", series.display()))?;
    let solver = build_solver(&cfg.solver)?;
    let rows = regime_scan(&values, window, stride, &cfg.cost_spec()?, solver.as_ref())?;
    let path = common.out_dir()?.join("scan.csv");
    write_scan(&path, &rows)?;
    println!("wrote {} rows to {}", rows.len(), path.display());
    Ok(true)
}

fn run(cli: Cli) -> Result<Passed> {
    match cli.command {
        Command::Generate {
            preset,
            depth,
            cells,
            count,
            common,
        } => {
            let params = PresetParams {
                depth,
                cells,
                count,
                seed: common.seed.unwrap_or(0),
            };
            generate(&preset, params, &common)
        }
        Command::Solve { mu, nu, common } => solve(&mu, &nu, &common),
        Command::Verify { kind, mu, nu, common } => verify(&kind, &mu, &nu, &common),
        Command::Scan {
            series,
            window,
            stride,
            common,
        } => scan(&series, window, stride, &common),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
