//! `dstatcom` — closed-loop DSTATCOM simulation, gain-set comparison, swarm
//! tuning of the DC-voltage PI loop, and optimizer self-checks.

mod io;

use clap::{Args, Parser, Subcommand};
use dstatcom_core::pso::{benchmarks, optimize};
use dstatcom_core::sim::{
    compare_gains, criteria_on, make_fitness, run_closed_loop, step_metrics, GainSet, SimError,
    Trajectory, TrajectorySignal,
};
use dstatcom_core::{canonical_loaded, load_scenario, render_toml, LoadedScenario};
use io::{
    comparison_csv, convergence_csv, fmt_f64, metrics_txt, trajectory_csv, write_atomic,
    MetricsReport,
};
use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "dstatcom",
    version,
    about = "Simulate a DSTATCOM current controller and tune its DC-voltage PI loop"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario once; write trajectory.csv and metrics.txt
    Simulate(SimulateArgs),
    /// Run every gain set; write per-set trajectories and comparison.csv
    Compare(CompareArgs),
    /// Swarm-tune (kp, ki); write convergence.csv, best_gains.txt and a comparison
    Tune(TuneArgs),
    /// Check the optimizer against standard benchmark functions
    Benchmark(BenchmarkArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario file (TOML); omit for the built-in benchmark scenario
    #[arg(long, value_name = "FILE")]
    scenario: Option<PathBuf>,
    /// Output directory, created if missing
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Print the fully resolved scenario as TOML before running
    #[arg(long)]
    print_config: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: ScenarioArgs,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    common: ScenarioArgs,
    /// Extra gain set as NAME:KP:KI (repeatable)
    #[arg(long = "gains", value_name = "NAME:KP:KI", value_parser = parse_gain_arg)]
    gains: Vec<GainSet>,
}

#[derive(Args)]
struct TuneArgs {
    #[command(flatten)]
    common: ScenarioArgs,
    /// Override the swarm seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the swarm size
    #[arg(long)]
    particles: Option<usize>,
    /// Override the iteration count
    #[arg(long)]
    iters: Option<usize>,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// Number of seeds (1..=N) to run each benchmark function on
    #[arg(long, default_value_t = 5)]
    seeds: usize,
    /// Also write benchmark.csv into this directory
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

struct Failure {
    code: u8,
    message: String,
}

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure { code, message: message.into() }
}

fn main() -> ExitCode {
    // Rust ignores SIGPIPE by default, turning writes to a closed pipe
    // (e.g. `dstatcom simulate | head`) into panics; die quietly instead,
    // like any other stream tool.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Tune(args) => cmd_tune(args),
        Command::Benchmark(args) => cmd_benchmark(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn parse_gain_arg(s: &str) -> Result<GainSet, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected NAME:KP:KI, got '{s}'"));
    }
    let name = parts[0].trim();
    check_set_name(name)?;
    let kp: f64 = parts[1].trim().parse().map_err(|_| format!("bad kp in '{s}'"))?;
    let ki: f64 = parts[2].trim().parse().map_err(|_| format!("bad ki in '{s}'"))?;
    if !(kp.is_finite() && kp >= 0.0 && ki.is_finite() && ki >= 0.0) {
        return Err(format!("gains must be finite and non-negative in '{s}'"));
    }
    Ok(GainSet::new(name, kp, ki))
}

fn check_set_name(name: &str) -> Result<(), String> {
    let mut chars = name.chars();
    let head_ok = chars.next().is_some_and(|c| c.is_ascii_alphanumeric() || c == '_');
    let tail_ok = chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'));
    if head_ok && tail_ok {
        Ok(())
    } else {
        Err(format!(
            "gain set name '{name}' is not filename-safe \
             (use letters, digits, '_', '-', '.')"
        ))
    }
}

fn load(args: &ScenarioArgs) -> Result<(LoadedScenario, String), Failure> {
    match &args.scenario {
        Some(path) => {
            let loaded =
                load_scenario(path).map_err(|e| fail(EXIT_CONFIG, e.to_string()))?;
            Ok((loaded, path.display().to_string()))
        }
        None => Ok((canonical_loaded(), "(built-in defaults)".to_string())),
    }
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    write_atomic(path, contents)
        .map_err(|e| fail(EXIT_CONFIG, format!("cannot write {}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn response_blocks(
    loaded: &LoadedScenario,
    traj: &Trajectory,
) -> Result<Vec<(&'static str, dstatcom_core::PerfMetrics, dstatcom_core::CriteriaValues)>, Failure>
{
    let sc = &loaded.scenario;
    let mut blocks = Vec::new();
    for (label, signal, reference) in [
        ("vdc vs reference", TrajectorySignal::Vdc, sc.vdc_ref),
        ("iq vs reference", TrajectorySignal::Iq, sc.iq_ref),
    ] {
        let metrics = step_metrics(traj, signal, &reference)
            .map_err(|e| fail(EXIT_CONFIG, e.to_string()))?;
        let criteria = criteria_on(traj, signal, &reference)
            .map_err(|e| fail(EXIT_CONFIG, e.to_string()))?;
        blocks.push((label, metrics, criteria));
    }
    Ok(blocks)
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), Failure> {
    let (loaded, origin) = load(&args.common)?;
    if args.common.print_config {
        print!("{}", render_toml(&loaded));
    }
    match run_closed_loop(&loaded.scenario) {
        Ok(traj) => {
            write(&args.common.out.join("trajectory.csv"), &trajectory_csv(&traj))?;
            let report = MetricsReport {
                scenario_origin: &origin,
                samples: traj.len(),
                t_last: traj.last_time(),
                diverged: None,
                blocks: response_blocks(&loaded, &traj)?,
            };
            write(&args.common.out.join("metrics.txt"), &metrics_txt(&report))?;
            println!("simulated {} samples to t = {} s", traj.len(), fmt_f64(traj.last_time().unwrap_or(0.0)));
            Ok(())
        }
        Err(SimError::Diverged { partial, t, reason }) => {
            write(&args.common.out.join("trajectory.csv"), &trajectory_csv(&partial))?;
            let report = MetricsReport {
                scenario_origin: &origin,
                samples: partial.len(),
                t_last: partial.last_time(),
                diverged: Some(&reason),
                blocks: Vec::new(),
            };
            write(&args.common.out.join("metrics.txt"), &metrics_txt(&report))?;
            Err(fail(
                EXIT_DIVERGED,
                format!("simulation diverged at t = {t} s: {reason} (partial trajectory written)"),
            ))
        }
        Err(other) => Err(fail(EXIT_CONFIG, other.to_string())),
    }
}

fn merged_gain_sets(
    loaded: &LoadedScenario,
    extra: &[GainSet],
) -> Result<Vec<GainSet>, Failure> {
    let mut sets = loaded.gain_sets.clone();
    sets.extend(extra.iter().cloned());
    let mut seen = HashSet::new();
    for set in &sets {
        check_set_name(&set.name).map_err(|e| fail(EXIT_CONFIG, e))?;
        if !seen.insert(set.name.clone()) {
            return Err(fail(EXIT_CONFIG, format!("duplicate gain set name '{}'", set.name)));
        }
    }
    Ok(sets)
}

fn run_comparison(
    loaded: &LoadedScenario,
    sets: &[GainSet],
    out: &Path,
) -> Result<(), Failure> {
    let report = compare_gains(&loaded.scenario, sets)
        .map_err(|e| fail(EXIT_CONFIG, e.to_string()))?;
    for (name, traj) in &report.trajectories {
        write(&out.join(format!("trajectory_{name}.csv")), &trajectory_csv(traj))?;
    }
    write(&out.join("comparison.csv"), &comparison_csv(&report.rows))?;
    println!("{:<12} {:>14} {:>14} {:>14} {:>10}", "name", "kp", "ki", "itae", "diverged");
    for row in &report.rows {
        let itae = row
            .criteria
            .map(|c| format!("{:.6e}", c.itae))
            .unwrap_or_else(|| "-".to_string());
        println!(
            "{:<12} {:>14.6} {:>14.6} {:>14} {:>10}",
            row.name, row.kp, row.ki, itae, row.diverged
        );
        if row.diverged {
            eprintln!("note: gain set '{}' diverged; its row is flagged", row.name);
        }
    }
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Result<(), Failure> {
    let (loaded, _origin) = load(&args.common)?;
    if args.common.print_config {
        print!("{}", render_toml(&loaded));
    }
    let sets = merged_gain_sets(&loaded, &args.gains)?;
    run_comparison(&loaded, &sets, &args.common.out)
}

fn cmd_tune(args: TuneArgs) -> Result<(), Failure> {
    let (mut loaded, _origin) = load(&args.common)?;
    if let Some(seed) = args.seed {
        loaded.swarm.seed = seed;
    }
    if let Some(particles) = args.particles {
        loaded.swarm.n_particles = particles;
    }
    if let Some(iters) = args.iters {
        loaded.swarm.n_iterations = iters;
    }
    loaded.swarm.validate().map_err(|e| fail(EXIT_CONFIG, e.to_string()))?;
    if args.common.print_config {
        print!("{}", render_toml(&loaded));
    }
    if loaded.gain_sets.iter().any(|g| g.name == "tuned") {
        return Err(fail(
            EXIT_CONFIG,
            "the gain set name 'tuned' is reserved for the tuning result",
        ));
    }

    let fitness = make_fitness(&loaded.scenario, &loaded.objective);
    let result =
        optimize(&fitness, &loaded.swarm).map_err(|e| fail(EXIT_CONFIG, e.to_string()))?;
    let out = &args.common.out;
    write(&out.join("convergence.csv"), &convergence_csv(&result.history))?;
    let best_gains = format!(
        "kp = {}\nki = {}\nfitness = {}\niterations = {}\nevaluations = {}\nseed = {}\n",
        fmt_f64(result.best_position[0]),
        fmt_f64(result.best_position[1]),
        fmt_f64(result.best_fitness),
        result.history.len(),
        result.evaluations,
        loaded.swarm.seed,
    );
    write(&out.join("best_gains.txt"), &best_gains)?;
    println!(
        "tuned gains: kp = {:.6}, ki = {:.6} (objective {:.6e}, {} evaluations)",
        result.best_position[0], result.best_position[1], result.best_fitness,
        result.evaluations
    );

    let mut sets = merged_gain_sets(&loaded, &[])?;
    sets.push(GainSet::new("tuned", result.best_position[0], result.best_position[1]));
    run_comparison(&loaded, &sets, out)
}

fn cmd_benchmark(args: BenchmarkArgs) -> Result<(), Failure> {
    if args.seeds == 0 {
        return Err(fail(EXIT_CONFIG, "--seeds must be at least 1"));
    }
    let seeds: Vec<u64> = (1..=args.seeds as u64).collect();
    let report = benchmarks::run_suite(&seeds, 30, 100, 200)
        .map_err(|e| fail(EXIT_CONFIG, e.to_string()))?;

    println!("{:<12} {:>5} {:>16} {:>12} {:>6}", "function", "seed", "best_fitness", "target", "pass");
    for o in &report.outcomes {
        println!(
            "{:<12} {:>5} {:>16.6e} {:>12} {:>6}",
            o.function,
            o.seed,
            o.best_fitness,
            format!("<{:.0e}", o.threshold),
            if o.passed { "yes" } else { "NO" }
        );
    }
    println!(
        "sphere: {}/{} passed, rosenbrock: {}/{} passed (at most one miss allowed) -> {}",
        report.sphere_passes,
        seeds.len(),
        report.rosenbrock_passes,
        seeds.len(),
        if report.passed { "PASS" } else { "FAIL" }
    );

    if let Some(out) = &args.out {
        let mut csv = String::from("function,seed,best_fitness,threshold,passed\n");
        for o in &report.outcomes {
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                o.function,
                o.seed,
                fmt_f64(o.best_fitness),
                fmt_f64(o.threshold),
                o.passed
            ));
        }
        write(&out.join("benchmark.csv"), &csv)?;
    }

    if report.passed {
        Ok(())
    } else {
        Err(fail(EXIT_CHECK_FAILED, "benchmark suite failed"))
    }
}
