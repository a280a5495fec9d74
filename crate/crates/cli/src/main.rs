use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use servotrack::config::{ScenarioConfig, ENV_PREFIX};
use servotrack::selfcheck::{run_selfcheck, SelfcheckOptions};
use servotrack::sim::{compute_metrics, read_trace, run_scenario_with, write_trace, Metrics};

#[derive(Parser)]
#[command(
    name = "servotrack",
    version,
    about = "Visual-servoing tracker: scenarios, metrics and self-checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more scenario configs and write trace.csv, metrics and the resolved config.
    #[command(
        after_help = "Environment variables SERVOTRACK_<KEY> override config keys, with `__` for `.` \
                            (SERVOTRACK_CAMERA__RATE_HZ=10). --set wins over the environment, --seed over both."
    )]
    Run {
        /// Scenario config files
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        /// Output directory; with several configs, one subdirectory per config stem
        #[arg(long)]
        out: PathBuf,
        /// Replace the config seed
        #[arg(long)]
        seed: Option<u64>,
        /// Override a config key, e.g. --set path.speed=0.3
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Scenarios to run in parallel
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Numerical self-checks of the control laws, normalisation and stereo geometry.
    Selfcheck {
        #[arg(long, hide = true, default_value_t = SelfcheckOptions::default().normalization_tol)]
        normalization_tol: f64,
    },
    /// Recompute metrics from a trace file.
    Metrics {
        /// trace.csv written by `run`
        trace: PathBuf,
        /// Config whose camera produced the trace (defaults otherwise)
        #[arg(long)]
        config: Option<PathBuf>,
        /// Print JSON instead of key: value text
        #[arg(long)]
        json: bool,
    },
}

fn load_config(path: &Path, overrides: &[String], seed: Option<u64>) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cfg = ScenarioConfig::default();
    let ctx = || format!("in {}", path.display());
    cfg.apply_text(&text).with_context(ctx)?;
    cfg.apply_env(std::env::vars().filter(|(k, _)| k.starts_with(ENV_PREFIX)))
        .with_context(ctx)?;
    cfg.apply_overrides(overrides).with_context(ctx)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    cfg.validate().with_context(ctx)?;
    Ok(cfg)
}

fn write_outputs(cfg: &ScenarioConfig, out: &Path) -> Result<Metrics> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let frames_dir = out.join("frames");
    if cfg.dump_frames {
        fs::create_dir_all(&frames_dir).with_context(|| format!("creating {}", frames_dir.display()))?;
    }
    let mut dump_err = None;
    let result = run_scenario_with(cfg, |k, rendered, _| {
        if cfg.dump_frames && dump_err.is_none() {
            let path = frames_dir.join(format!("frame_{k:05}.ppm"));
            if let Err(e) = rendered.frame.write_ppm(&path) {
                dump_err = Some(anyhow::Error::new(e).context(format!("writing {}", path.display())));
            }
        }
    })?;
    if let Some(e) = dump_err {
        return Err(e);
    }

    let trace_path = out.join("trace.csv");
    let file = fs::File::create(&trace_path).with_context(|| format!("creating {}", trace_path.display()))?;
    write_trace(BufWriter::new(file), &result.trace).with_context(|| format!("writing {}", trace_path.display()))?;
    let write = |name: &str, body: String| {
        let p = out.join(name);
        fs::write(&p, body).with_context(|| format!("writing {}", p.display()))
    };
    write("metrics.json", result.metrics.to_json() + "\n")?;
    write("metrics.txt", result.metrics.to_string())?;
    write("config.resolved.cfg", cfg.to_text())?;
    Ok(result.metrics)
}

fn cmd_run(configs: &[PathBuf], out: &Path, seed: Option<u64>, overrides: &[String], jobs: usize) -> Result<()> {
    let mut jobs_list = Vec::new();
    for path in configs {
        let cfg = load_config(path, overrides, seed)?;
        let dir = if configs.len() == 1 {
            out.to_path_buf()
        } else {
            let stem = path.file_stem().context("config path has no file name")?;
            out.join(stem)
        };
        jobs_list.push((path.clone(), cfg, dir));
    }
    let mut dirs: Vec<_> = jobs_list.iter().map(|(_, _, d)| d).collect();
    dirs.sort();
    dirs.dedup();
    if dirs.len() != jobs_list.len() {
        bail!("two configs share a file stem; their outputs would collide");
    }

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<Metrics>>>> = Mutex::new((0..jobs_list.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, jobs_list.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some((_, cfg, dir)) = jobs_list.get(i) else { break };
                let r = write_outputs(cfg, dir);
                results.lock().expect("no panics while holding the lock")[i] = Some(r);
            });
        }
    });

    let mut failed = 0;
    for ((path, _, dir), r) in jobs_list.iter().zip(results.into_inner().expect("threads joined")) {
        match r.expect("every job ran") {
            Ok(m) => {
                if jobs_list.len() > 1 {
                    println!("== {} -> {}", path.display(), dir.display());
                }
                print!("{m}");
            }
            Err(e) => {
                eprintln!("error: {}: {e:#}", path.display());
                failed += 1;
            }
        }
    }
    if failed > 0 {
        bail!("{failed} of {} scenarios failed", jobs_list.len());
    }
    Ok(())
}

fn cmd_metrics(trace: &Path, config: Option<&Path>, json: bool) -> Result<()> {
    let cfg = match config {
        Some(p) => load_config(p, &[], None)?,
        None => ScenarioConfig::default(),
    };
    let file = fs::File::open(trace).with_context(|| format!("opening {}", trace.display()))?;
    let rows = read_trace(BufReader::new(file)).with_context(|| format!("reading {}", trace.display()))?;
    let m = compute_metrics(&rows, &cfg.camera).with_context(|| format!("in {}", trace.display()))?;
    if json {
        println!("{}", m.to_json());
    } else {
        print!("{m}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            configs,
            out,
            seed,
            overrides,
            jobs,
        } => cmd_run(&configs, &out, seed, &overrides, jobs),
        Command::Selfcheck { normalization_tol } => {
            let results = run_selfcheck(&SelfcheckOptions {
                normalization_tol,
                ..SelfcheckOptions::default()
            });
            for r in &results {
                println!("{r}");
            }
            let failed = results.iter().filter(|r| !r.passed).count();
            if failed == 0 {
                Ok(())
            } else {
                Err(anyhow::anyhow!("{failed} self-check(s) failed"))
            }
        }
        Command::Metrics { trace, config, json } => cmd_metrics(&trace, config.as_deref(), json),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
