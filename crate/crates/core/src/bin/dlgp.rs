use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dlgp_cbf::barrier::{BarrierForm, BarrierParams, DlgpBarrier};
use dlgp_cbf::gp::{KernelParams, Point, VelocitySet};
use dlgp_cbf::harness::bench::bench_dataset;
use dlgp_cbf::harness::output::{write_episode, write_json};
use dlgp_cbf::harness::{bench_barrier, compare, load_scenario, run_episode_with, EpisodeOptions, Variant};

#[derive(Parser)]
#[command(name = "dlgp", version, about = "Log-GP barrier navigation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode and write trajectory, metrics and timing files.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        #[arg(long)]
        variant: Option<Variant>,
        /// Write the barrier field around the point of closest approach.
        #[arg(long)]
        dump_field: bool,
        /// Write per-frame perception state as JSON lines.
        #[arg(long)]
        dump_perception: bool,
    },
    /// Run several variants on the same seeded scenario.
    Compare {
        scenario: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [Variant::Dlgp, Variant::DlgpNoDhdt, Variant::GpLinear])]
        variants: Vec<Variant>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Compare analytic barrier derivatives with central differences.
    CheckGradients {
        #[arg(long, default_value_t = 100)]
        cases: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Time barrier construction plus one full evaluation.
    Bench {
        #[arg(long, value_delimiter = ',', default_values_t = [1, 5, 15, 30, 60])]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 200)]
        repetitions: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

type CmdResult = Result<ExitCode, Box<dyn std::error::Error>>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            scenario,
            seed,
            out_dir,
            variant,
            dump_field,
            dump_perception,
        } => run(scenario, seed, out_dir, variant, dump_field, dump_perception),
        Command::Compare {
            scenario,
            variants,
            seed,
            out_dir,
        } => run_compare(scenario, variants, seed, out_dir),
        Command::CheckGradients { cases, seed } => check_gradients(cases, seed),
        Command::Bench {
            sizes,
            repetitions,
            seed,
        } => run_bench(&sizes, repetitions, seed),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}

fn run(
    scenario: PathBuf,
    seed: Option<u64>,
    out_dir: PathBuf,
    variant: Option<Variant>,
    dump_field: bool,
    dump_perception: bool,
) -> CmdResult {
    let mut cfg = load_scenario(&scenario)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(v) = variant {
        cfg.variant = v;
    }
    let result = run_episode_with(
        &cfg,
        EpisodeOptions {
            record_perception: dump_perception,
            capture_field: dump_field,
        },
    );
    let written = write_episode(&out_dir, &result)?;
    let m = &result.metrics;
    println!(
        "{} [{}] seed {}: {:?} after {:.2} s, min clearance {}, var(v) {:.4}, var(omega) {:.4}, mean eval {:.3} ms",
        m.scenario,
        m.variant,
        m.seed,
        m.outcome,
        m.duration,
        m.min_clearance.map_or("n/a".into(), |c| format!("{c:.3} m")),
        m.linear_speed_variance,
        m.angular_speed_variance,
        m.mean_eval_ms,
    );
    for p in written {
        println!("  wrote {}", p.display());
    }
    if let Some(e) = &m.error {
        eprintln!("episode error: {e}");
        return Ok(ExitCode::from(3));
    }
    Ok(if m.collision {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

fn run_compare(scenario: PathBuf, variants: Vec<Variant>, seed: Option<u64>, out_dir: PathBuf) -> CmdResult {
    let mut cfg = load_scenario(&scenario)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let table = compare(&cfg, &variants)?;
    std::fs::create_dir_all(&out_dir)?;
    write_json(&out_dir.join("comparison.json"), &table)?;
    table.write_csv(std::fs::File::create(out_dir.join("comparison.csv"))?)?;
    println!(
        "{:<14} {:<10} {:>9} {:>10} {:>10} {:>10}",
        "variant", "outcome", "arrival", "min_clear", "var_v", "var_omega"
    );
    for m in &table.results {
        println!(
            "{:<14} {:<10} {:>9} {:>10} {:>10.4} {:>10.4}",
            m.variant.name(),
            format!("{:?}", m.outcome).to_lowercase(),
            m.arrival_time.map_or("-".into(), |t| format!("{t:.2}")),
            m.min_clearance.map_or("-".into(), |c| format!("{c:.3}")),
            m.linear_speed_variance,
            m.angular_speed_variance,
        );
    }
    let failed = table.results.iter().any(|m| m.collision || m.error.is_some());
    Ok(if failed { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let diff = (analytic - numeric).abs();
    if analytic.abs().max(numeric.abs()) < 1e-3 {
        if diff <= 1e-8 {
            0.0
        } else {
            diff / 1e-3
        }
    } else {
        diff / analytic.abs().max(numeric.abs())
    }
}

fn check_gradients(cases: usize, seed: u64) -> CmdResult {
    const STEP: f64 = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst_x, mut worst_t) = (0.0f64, 0.0f64);
    for _ in 0..cases {
        let n = rng.gen_range(1..=30);
        let (training, velocities) = bench_dataset(n, &mut rng);
        let barrier = DlgpBarrier::new(
            training.clone(),
            velocities.clone(),
            KernelParams::default(),
            BarrierParams::default(),
            BarrierForm::Log,
        )?;
        let q = Point::new(rng.gen_range(-1.0..6.0), rng.gen_range(-3.0..3.0));
        let eval = match barrier.evaluate_full(&q) {
            Ok(e) => e,
            Err(_) => continue,
        };
        let h = |p: Point| barrier.evaluate(&p);
        for (axis, g) in [
            (Point::new(STEP, 0.0), eval.grad[0]),
            (Point::new(0.0, STEP), eval.grad[1]),
        ] {
            let fd = (h(q + axis)? - h(q - axis)?) / (2.0 * STEP);
            worst_x = worst_x.max(relative_error(g, fd));
        }
        let shifted = |s: f64| -> Result<f64, Box<dyn std::error::Error>> {
            let moved = training.displaced(&velocities, s);
            let b = DlgpBarrier::new(
                moved,
                VelocitySet::zeros(n),
                KernelParams::default(),
                BarrierParams::default(),
                BarrierForm::Log,
            )?;
            Ok(b.evaluate(&q)?)
        };
        let fd_t = (shifted(STEP)? - shifted(-STEP)?) / (2.0 * STEP);
        worst_t = worst_t.max(relative_error(eval.dh_dt, fd_t));
    }
    let ok = worst_x <= 1e-5 && worst_t <= 1e-5;
    println!("cases: {cases}");
    println!("max relative error dh/dx: {worst_x:.3e}");
    println!("max relative error dh/dt: {worst_t:.3e}");
    println!("{}", if ok { "PASS" } else { "FAIL" });
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn run_bench(sizes: &[usize], repetitions: usize, seed: u64) -> CmdResult {
    if sizes.contains(&0) {
        return Err("sizes must be at least 1".into());
    }
    let rows = bench_barrier(sizes, repetitions, seed);
    println!(
        "{:>6} {:>6} {:>12} {:>12} {:>12}",
        "N", "reps", "mean_ms", "median_ms", "max_ms"
    );
    for r in &rows {
        println!(
            "{:>6} {:>6} {:>12.4} {:>12.4} {:>12.4}",
            r.points, r.repetitions, r.mean_ms, r.median_ms, r.max_ms
        );
    }
    Ok(ExitCode::SUCCESS)
}
