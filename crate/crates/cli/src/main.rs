use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use log::info;

use elastocontrol_core::adjoint::solve_adjoint;
use elastocontrol_core::config::RunConfig;
use elastocontrol_core::objective::{fd_check, ControlGrid, ControlProblem, Direction, Evaluation};
use elastocontrol_core::optimizer::{optimize_control, Termination};
use elastocontrol_core::selftest;

mod output;

#[derive(Parser, Debug)]
#[command(name = "elastocontrol", version, about = "Optimal control of a damped elastic bar with a volume constraint")]
struct Cli {
    /// INI configuration file; missing keys take the reference values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set time.dt=0.01`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Time step (overrides `time.dt`).
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Mesh size (overrides `mesh.h`).
    #[arg(long = "mesh-h", global = true)]
    mesh_h: Option<f64>,
    /// Use fixed analytic directions instead of seeded random ones and check
    /// that repeated evaluations are bitwise identical.
    #[arg(long, global = true)]
    seedless: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate the state system and write the trajectory and pressure trace.
    Forward(ControlArgs),
    /// Solve the adjoint system at the given control.
    Adjoint(ControlArgs),
    /// Compare the adjoint gradient with central finite differences.
    Gradcheck {
        #[command(flatten)]
        control: ControlArgs,
        /// Number of control directions (one more is added for tau).
        #[arg(long, default_value_t = 5)]
        directions: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Amplitude of the smooth base control.
        #[arg(long, default_value_t = 0.01)]
        base_amplitude: f64,
    },
    /// Run the gradient ascent from the configured initial point.
    Optimize(ControlArgs),
    /// Run the quick invariant checks.
    Selftest,
}

#[derive(clap::Args, Debug, Clone)]
struct ControlArgs {
    /// Control file in the format written by `optimize` (default: zero control).
    #[arg(long)]
    control: Option<PathBuf>,
    /// Switching time (default: `control.tau0`, or the one stored with the control).
    #[arg(long)]
    tau: Option<f64>,
    /// Snapshot times, comma separated.
    #[arg(long, value_delimiter = ',')]
    times: Vec<f64>,
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => RunConfig::default(),
    };
    for item in &cli.overrides {
        let (k, v) = item.split_once('=').ok_or_else(|| anyhow!("--set expects key=value, got '{item}'"))?;
        cfg.set(k.trim(), v)?;
    }
    if let Some(dt) = cli.dt {
        cfg.dt = dt;
    }
    if let Some(h) = cli.mesh_h {
        cfg.h = h;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.display().to_string();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    Ok(BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?))
}

fn control_and_tau(problem: &ControlProblem, cfg: &RunConfig, args: &ControlArgs) -> Result<(ControlGrid, f64)> {
    match &args.control {
        Some(path) => {
            let (xi, stored_tau) = output::read_control(path, problem)?;
            Ok((xi, args.tau.or(stored_tau).unwrap_or(cfg.tau0())))
        }
        None => Ok((problem.zero_control(), args.tau.unwrap_or(cfg.tau0()))),
    }
}

fn evaluate_checked(problem: &ControlProblem, xi: &[Vec<f64>], tau: f64, seedless: bool) -> Result<Evaluation> {
    let ev = problem.evaluate(xi, tau)?;
    if seedless {
        let again = problem.evaluate(xi, tau)?;
        if again.j.to_bits() != ev.j.to_bits() || again.state.u != ev.state.u {
            bail!("repeated evaluation differs: J = {} vs {}", ev.j, again.j);
        }
    }
    Ok(ev)
}

fn write_state(dir: &Path, cfg: &RunConfig, ev: &Evaluation, requested: &[f64]) -> Result<()> {
    ev.state.write_csv(create(dir, "state.csv")?)?;
    ev.state.write_pressure_csv(create(dir, "pressure.csv")?)?;
    let times = output::state_snapshot_times(cfg, requested);
    output::write_state_snapshots(create(dir, "u_snapshots.csv")?, &ev.setup, &ev.state.u, &times)?;
    output::write_state_snapshots(create(dir, "udot_snapshots.csv")?, &ev.setup, &ev.state.udot, &times)?;
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if let Command::Selftest = cli.command {
        let results = selftest::run_all();
        let mut failed = 0;
        for r in &results {
            println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
            failed += usize::from(!r.passed);
        }
        if failed > 0 {
            bail!("{failed} of {} checks failed", results.len());
        }
        return Ok(());
    }

    let cfg = load_config(cli)?;
    let dir = PathBuf::from(&cfg.output_dir);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join("config.ini"), cfg.to_ini_string())?;
    let problem = cfg.control_problem()?;

    match &cli.command {
        Command::Forward(args) => {
            let (xi, tau) = control_and_tau(&problem, &cfg, args)?;
            let ev = evaluate_checked(&problem, &xi, tau, cli.seedless)?;
            write_state(&dir, &cfg, &ev, &args.times)?;
            let umax = ev.state.u.iter().flatten().fold(0.0f64, |a, b| a.max(b.abs()));
            println!("J = {:?}", ev.j);
            println!("max |u| = {umax:?}");
            println!("max volume residual = {:?}", ev.state.max_volume_residual());
        }
        Command::Adjoint(args) => {
            let (xi, tau) = control_and_tau(&problem, &cfg, args)?;
            let ev = evaluate_checked(&problem, &xi, tau, cli.seedless)?;
            let adj = solve_adjoint(&ev.setup, &ev.state, tau, &problem.objective)?;
            adj.write_csv(create(&dir, "adjoint.csv")?)?;
            println!("J = {:?}", ev.j);
        }
        Command::Gradcheck { control, directions, seed, base_amplitude } => {
            let (xi, tau) = match &control.control {
                Some(_) => control_and_tau(&problem, &cfg, control)?,
                None => (problem.smooth_control(*base_amplitude), control.tau.unwrap_or(cfg.tau0())),
            };
            let mut dirs: Vec<Direction> = if cli.seedless {
                (0..*directions).map(|i| Direction { xi: problem.mode_direction(i), tau: 0.0 }).collect()
            } else {
                problem.random_directions(*directions, *seed).into_iter().map(|xi| Direction { xi, tau: 0.0 }).collect()
            };
            dirs.push(Direction { xi: problem.zero_control(), tau: 1.0 });
            let hs = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6];
            let report = fd_check(&problem, &xi, tau, &dirs, &hs)?;
            if cli.seedless {
                let again = fd_check(&problem, &xi, tau, &dirs, &hs)?;
                if again.rows != report.rows {
                    bail!("repeated gradient check differs");
                }
            }
            report.write_csv(create(&dir, "gradcheck.csv")?)?;
            for (d, e) in report.best() {
                let label = if d + 1 == dirs.len() { "tau".to_string() } else { format!("xi {d}") };
                println!("direction {label}: best relative error {e:?}");
            }
            println!("worst best relative error = {:?}", report.worst_best());
        }
        Command::Optimize(args) => {
            let (xi0, tau0) = control_and_tau(&problem, &cfg, args)?;
            let ocfg = cfg.optimizer_config();
            let (report, xi, tau) = optimize_control(&problem, &xi0, tau0, &ocfg)?;
            report.write_csv(create(&dir, "iterations.csv")?)?;
            let ev = evaluate_checked(&problem, &xi, tau, cli.seedless)?;
            output::write_control(create(&dir, "control.csv")?, &ev, tau)?;
            let times = output::control_snapshot_times(&cfg, &args.times);
            output::write_control_snapshots(create(&dir, "xi_snapshots.csv")?, &ev, &times)?;
            write_state(&dir, &cfg, &ev, &args.times)?;
            let (g, tg) = report.history.last().map_or((0.0, 0.0), |h| (h.grad_norm_xi, h.grad_tau));
            let summary = format!(
                "termination = {:?}\niterations = {}\nJ = {:?}\ntau = {:?}\ngrad_norm = {:?}\ngrad_norm_xi = {:?}\ngrad_tau = {:?}\nrestarts = {}\n",
                report.termination,
                report.iterations(),
                report.j,
                tau,
                report.grad_norm,
                g,
                tg,
                report.restarts
            );
            fs::write(dir.join("summary.txt"), &summary)?;
            print!("{summary}");
            if let Termination::Aborted(reason) = &report.termination {
                bail!("optimizer aborted: {reason}");
            }
        }
        Command::Selftest => unreachable!(),
    }
    info!("outputs in {}", dir.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
