use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use ac_cli::config::{self, RunConfig};
use ac_cli::{compare, converge, runner, CliError};

/// Structured-grid Allen-Cahn solver: max-norm-stable closed-form scheme,
/// kinetic form, and reference baselines.
#[derive(Parser)]
#[command(name = "ac", version, about, max_term_width = 100)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    /// Accept parameters outside the scheme's validity window; invariant
    /// monitors record violations instead of aborting.
    #[arg(long)]
    allow_unsafe: bool,
    /// Write artifacts here instead of the config's output_dir.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Replace the config's RNG seed (random initial data only).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a configuration and report the derived parameters.
    Validate {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run one simulation; write energy.csv, snapshots, and summary.txt.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run a mesh-refinement ladder and report convergence rates.
    Converge {
        config: PathBuf,
        /// Number of doublings from the base resolution (ignored when the
        /// config lists levels_n).
        #[arg(long)]
        levels: Option<usize>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run several configurations of one experiment side by side.
    Compare {
        #[arg(required = true, num_args = 2..)]
        configs: Vec<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
}

fn load(path: &PathBuf, over: &Overrides) -> Result<RunConfig, CliError> {
    let mut cfg = config::parse_file(path)?;
    if over.allow_unsafe {
        cfg.allow_unsafe = true;
    }
    if let Some(dir) = &over.output_dir {
        cfg.output_dir = dir.clone();
    }
    if let Some(seed) = over.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:10.4e}"),
        None => format!("{:>10}", "-"),
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Validate { config, overrides } => {
            let cfg = load(&config, &overrides)?;
            let r = cfg.resolve()?;
            let p = &r.params;
            println!("configuration ok");
            println!(
                "problem = {} ({}d, {})",
                r.problem.tag(),
                r.spec.dimension(),
                r.spec.boundary_condition()
            );
            println!("scheme = {}", cfg.scheme.tag());
            println!(
                "n = {} (dx = {:.6e}), dt = {:.6e}, steps = {} (t = {:.6e})",
                cfg.n,
                r.spec.dx(),
                p.dt,
                r.steps,
                r.steps as f64 * p.dt
            );
            println!(
                "eps_interface = {:.6e}, eps_ratio = {:.6e}, omega1 = {:.6e}, s = {:.6e}",
                p.eps_interface, p.eps_ratio, p.omega1, p.s
            );
            match &r.window_note {
                None => println!("validity window = ok"),
                Some(note) => println!("validity window = violated ({note}); running unchecked"),
            }
            Ok(())
        }
        Command::Run { config, overrides } => {
            let cfg = load(&config, &overrides)?;
            let out = runner::run_and_write(&cfg)?;
            println!(
                "wrote {} ({} records), {} snapshot(s), summary.txt",
                cfg.output_dir.join("energy.csv").display(),
                out.records.len(),
                out.snapshots.len()
            );
            let first = out.records.first().expect("records");
            let last = out.records.last().expect("records");
            println!(
                "max|phi| peak = {:.6e}, energy {:.6e} -> {:.6e}, monotone = {}",
                out.max_abs_peak,
                first.energy,
                last.energy,
                if out.monotone.pass { "pass" } else { "fail" }
            );
            if let Some((inf, _, rms)) = out.exact_err {
                println!("errors vs exact: inf = {inf:.6e}, rms = {rms:.6e}");
            }
            Ok(())
        }
        Command::Converge {
            config,
            levels,
            overrides,
        } => {
            let cfg = load(&config, &overrides)?;
            let table = converge::run_and_write(&cfg, levels)?;
            println!("reference: {}", table.reference);
            println!(
                "{:>6} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}",
                "n", "dx", "err_inf", "cr_inf", "err_rms", "cr_rms", "err_l2"
            );
            for l in &table.levels {
                println!(
                    "{:>6} {:10.4e} {:10.4e} {} {:10.4e} {} {:10.4e}",
                    l.n,
                    l.dx,
                    l.err_inf,
                    fmt_opt(l.cr_inf),
                    l.err_rms,
                    fmt_opt(l.cr_rms),
                    l.err_l2
                );
            }
            println!("wrote {}", cfg.output_dir.join("converge.csv").display());
            Ok(())
        }
        Command::Compare { configs, overrides } => {
            let cfgs = configs
                .iter()
                .map(|p| load(p, &overrides))
                .collect::<Result<Vec<_>, _>>()?;
            let rows = compare::run_and_write(&cfgs)?;
            println!(
                "{:>10} {:>10} {:>8} {:>10} {:>10} {:>12} {:>10} {:>9}",
                "scheme", "dt", "steps", "err_inf", "err_rms", "max_abs_peak", "energy", "monotone"
            );
            for r in &rows {
                println!(
                    "{:>10} {:10.4e} {:>8} {} {} {:12.6e} {:10.4e} {:>9}",
                    r.scheme,
                    r.dt,
                    r.steps,
                    fmt_opt(r.err_inf),
                    fmt_opt(r.err_rms),
                    r.max_abs_peak,
                    r.energy_final,
                    if r.monotone { "pass" } else { "fail" }
                );
            }
            println!("wrote {}", cfgs[0].output_dir.join("compare.csv").display());
            Ok(())
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = dispatch(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
