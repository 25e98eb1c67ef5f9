//! `hetlb`: design compatibility matrices, run experiments and write CSV bundles.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 infeasible model.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use hetlb::config::Config;
use hetlb::experiment::{self, Bundle, ExperimentSettings};
use hetlb::graph::irg_sample;
use hetlb::meanfield::{self, certificates_csv, tail_decay_check, FixedPointOptions};
use hetlb::par::{self, Execution};
use hetlb::sim::{simulate, Policy, RunOptions, SimState};
use hetlb::stability::{design_p_matrix, subcritical_check};
use hetlb::{seed, Error};

#[derive(Parser, Debug)]
#[command(name = "hetlb", version, about = "Heterogeneous JSQ(d) load balancing on compatibility graphs")]
struct Cli {
    /// Directory for output files.
    #[arg(long, env = "HETLB_OUT_DIR", default_value = "out", global = true)]
    out_dir: PathBuf,

    /// Worker threads for replications.
    #[arg(long, env = "HETLB_WORKERS", global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Design a compatibility matrix meeting the capacity target.
    Design {
        config: PathBuf,
    },
    /// Run a seeded experiment and write its CSV bundle.
    Experiment {
        name: ExperimentName,
        config: PathBuf,
        /// Number of replications (overrides sim.seeds).
        #[arg(long)]
        seeds: Option<usize>,
        /// Master seed (overrides sim.master_seed).
        #[arg(long)]
        master_seed: Option<u64>,
        /// Run replications on the calling thread.
        #[arg(long)]
        sequential: bool,
    },
    /// Compute the mean-field fixed point, its identities and tail certificates.
    FixedPoint {
        config: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Simulate one replication and write its trajectory.
    Simulate {
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = PolicyArg::JsqD)]
        policy: PolicyArg,
        /// Replication index under the master seed.
        #[arg(long, default_value_t = 0)]
        replication: u64,
    },
    /// Print stability margins of a configuration.
    Check {
        config: PathBuf,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
#[value(rename_all = "snake_case")]
enum ExperimentName {
    StabilityCompare,
    Convergence,
    Uniqueness,
    Coupling,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum PolicyArg {
    #[value(name = "jsq_d")]
    JsqD,
    #[value(name = "gwsq_d")]
    GwsqD,
}

fn load(path: &Path) -> Result<Config> {
    Config::load(path).with_context(|| format!("reading config {}", path.display()))
}

fn write_bundle(bundle: &Bundle, dir: &Path) -> Result<()> {
    bundle.write_to(dir).with_context(|| format!("writing to {}", dir.display()))?;
    for (name, _) in &bundle.files {
        println!("wrote {}", dir.join(name).display());
    }
    Ok(())
}

fn fmt_list(xs: &[f64]) -> String {
    let items: Vec<String> = xs.iter().map(|x| format!("{x:?}")).collect();
    format!("[{}]", items.join(", "))
}

fn design(cli: &Cli, path: &Path) -> Result<()> {
    let cfg = load(path)?;
    let design = design_p_matrix(&cfg.params)?;
    let margins = subcritical_check(&cfg.params.with_p(design.p.clone())?);
    let mut out = String::new();
    writeln!(out, "# designed compatibility matrix, rows are dispatcher types")?;
    writeln!(out, "rho0 = {}", design.rho0)?;
    writeln!(out, "rho_star = {}", design.rho_star)?;
    writeln!(out, "margins = {}", fmt_list(&margins.loads))?;
    writeln!(out, "\n[compat]")?;
    // row-major, one dispatcher type per line
    let rows: Vec<String> =
        design.p.iter().map(|r| r.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ")).collect();
    writeln!(out, "p = [{}]", rows.join(",\n     "))?;
    std::fs::create_dir_all(&cli.out_dir)?;
    let file = cli.out_dir.join("design.toml");
    std::fs::write(&file, &out)?;
    for (k, row) in design.p.iter().enumerate() {
        println!("p[{}] = {}", k + 1, fmt_list(row));
    }
    for (m, r) in margins.loads.iter().enumerate() {
        println!("margin type {}: {r:.6}", m + 1);
    }
    println!("wrote {}", file.display());
    Ok(())
}

fn run_experiment(
    cli: &Cli,
    name: ExperimentName,
    path: &Path,
    seeds: Option<usize>,
    master_seed: Option<u64>,
    sequential: bool,
) -> Result<()> {
    let cfg = load(path)?;
    let mut s = ExperimentSettings::from(&cfg.sim);
    s.seeds = seeds.unwrap_or(s.seeds);
    s.master_seed = master_seed.unwrap_or(s.master_seed);
    s.exec = if sequential { Execution::Sequential } else { Execution::Parallel };
    let init = cfg.init.primary().map(Vec::as_slice);
    let bundle = match name {
        ExperimentName::StabilityCompare => {
            let r = experiment::stability_compare(&cfg.params, init, &s)?;
            println!("complete graph longer type-1 queues in {:.1}% of pairs", 100.0 * r.win_fraction());
            r.bundle()
        }
        ExperimentName::Convergence => {
            let init = init.context("convergence needs an [init] Q matrix")?;
            let ns: Vec<usize> = [100, 500, 1000].into_iter().filter(|&n| n <= s.n).collect();
            let r = experiment::convergence(&cfg.params, init, &ns, &s)?;
            for (n, errs) in r.ns.iter().zip(&r.sup_errors) {
                println!("N={n}: max sup error {:.4}", errs.iter().copied().fold(0.0, f64::max));
            }
            r.bundle()
        }
        ExperimentName::Uniqueness => {
            anyhow::ensure!(!cfg.init.named.is_empty(), "uniqueness needs initial matrices in [init]");
            let r = experiment::uniqueness(&cfg.params, &cfg.init.named, 50.0, 0.1, s.l_max, s.exec)?;
            println!("endpoint spread of q_(m,1) at T=50: {:.3e}", r.spread());
            r.bundle()
        }
        ExperimentName::Coupling => {
            let ns: Vec<usize> = [100, 1000].into_iter().filter(|&n| n <= s.n).collect();
            let r = experiment::coupling(&cfg.params, init, &ns, &s)?;
            for (n, ratio) in r.ns.iter().zip(r.mean_ratio()) {
                println!("N={n}: mean Delta/N at horizon {ratio:.4}");
            }
            r.bundle()
        }
    };
    write_bundle(&bundle, &cli.out_dir)
}

fn fixed_point(cli: &Cli, path: &Path, tol: f64) -> Result<()> {
    let cfg = load(path)?;
    let opts = FixedPointOptions { tol, l_max: cfg.sim.l_max, ..Default::default() };
    let fp = meanfield::fixed_point_with(&cfg.params, &opts)?;
    let flow = meanfield::flow_balance_residual(&fp.q, &cfg.params);
    let level = meanfield::level_identity_residuals(&fp.q, &cfg.params).into_iter().fold(0.0, f64::max);
    let rec = meanfield::recursion_verify(&fp.q, &cfg.params);
    println!("converged at t = {:.1}, drift l1 = {:.2e}", fp.time, fp.drift_l1);
    println!("flow balance residual {flow:.2e}, level identity residual {level:.2e}");
    println!("recursion residual {:.2e} over {} levels ({} skipped)", rec.max_residual, rec.checked, rec.skipped.len());
    let mut bundle = Bundle::default();
    bundle.files.push(("fixed_point.csv".into(), fp.q.to_csv()));
    if cfg.params.d() >= 2 {
        let certs = tail_decay_check(&fp.q, &cfg.params)?;
        bundle.files.push(("certificates.csv".into(), certificates_csv(&certs)));
    }
    write_bundle(&bundle, &cli.out_dir)
}

fn simulate_once(cli: &Cli, path: &Path, policy: PolicyArg, replication: u64) -> Result<()> {
    let cfg = load(path)?;
    let rep = seed::replication_seed(cfg.sim.master_seed, replication);
    let graph = irg_sample(&cfg.params, cfg.sim.n, seed::graph_seed(rep));
    let init = match cfg.init.primary() {
        Some(rows) => SimState::from_pmf_rows(&graph, rows)?,
        None => SimState::empty(&graph),
    };
    let policy = match policy {
        PolicyArg::JsqD => Policy::JsqD,
        PolicyArg::GwsqD => Policy::GwsqD,
    };
    let opts = RunOptions { horizon: cfg.sim.horizon, snapshot_dt: cfg.sim.snapshot_dt, l_max: cfg.sim.l_max };
    let out = simulate(&graph, &cfg.params, policy, init, &opts, seed::sim_seed(rep))?;
    let c = out.final_state.counters;
    println!("arrivals {}, departures {}, dropped {}, fallbacks {}", c.arrivals, c.departures, c.dropped, c.fallbacks);
    if c.dropped > 0 {
        eprintln!("warning: {} tasks dropped at dispatchers without neighbors", c.dropped);
    }
    let mut bundle = Bundle::default();
    bundle.files.push((format!("trajectory_{}_r{replication}.csv", policy.tag()), out.trajectory.to_csv()));
    write_bundle(&bundle, &cli.out_dir)
}

fn check(path: &Path) -> Result<()> {
    let cfg = load(path)?;
    let p = &cfg.params;
    println!("load lambda*xi = {}, capacity sum v*u = {}", p.load(), p.capacity());
    let margins = subcritical_check(p);
    for (m, r) in margins.loads.iter().enumerate() {
        println!("margin type {}: {r:.6}", m + 1);
    }
    println!("subcritical: {}", margins.subcritical);
    if !p.capacity_check() {
        return Err(Error::CapacityViolated { load: p.load(), capacity: p.capacity() }.into());
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.workers {
        par::init_workers(n);
    }
    match &cli.command {
        Command::Design { config } => design(cli, config),
        Command::Experiment { name, config, seeds, master_seed, sequential } => {
            run_experiment(cli, *name, config, *seeds, *master_seed, *sequential)
        }
        Command::FixedPoint { config, tol } => fixed_point(cli, config, *tol),
        Command::Simulate { config, policy, replication } => simulate_once(cli, config, *policy, *replication),
        Command::Check { config } => check(config),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::CapacityViolated { .. }) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
