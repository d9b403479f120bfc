use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use conav_core::harness::{report_table, run_batch, run_episode, summary_table, trial_grid, EpisodeConfig, Method};
use conav_core::world::{maps, Scenario};

#[derive(Parser)]
#[command(name = "conav", about = "Joint communication and motion planning simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one episode and write its trajectory log.
    Run {
        /// Built-in map name (basic, intersection, hallway) or a scenario file path.
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Disable communication (null signal only).
        #[arg(long)]
        baseline: bool,
        /// Priority factor F in [0, 1]; omitted keeps the scenario weights.
        #[arg(long)]
        f_priority: Option<f64>,
        /// Log destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every (scenario, method, F, seed) combination.
    Batch {
        #[arg(long, value_delimiter = ',', default_value = "basic,intersection,hallway")]
        scenarios: Vec<String>,
        /// Seeds as a comma list or an inclusive range `a..b`.
        #[arg(long, default_value = "0..9")]
        seeds: String,
        #[arg(long, value_delimiter = ',')]
        sweep_f: Vec<f64>,
        /// Run the full method only.
        #[arg(long)]
        full_only: bool,
        #[arg(long, default_value = "results")]
        out_dir: PathBuf,
    },
    /// Run the oracle suites and report pass/fail.
    Verify {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn load(name: &str) -> Result<Scenario, String> {
    match maps::text(name) {
        Some(_) => maps::load(name).map_err(|e| e.to_string()),
        None => Scenario::load(name).map_err(|e| format!("{name}: {e}")),
    }
}

fn parse_seeds(s: &str) -> Result<Vec<u64>, String> {
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| format!("bad seed range `{s}`"))?;
        let b: u64 = b.trim().parse().map_err(|_| format!("bad seed range `{s}`"))?;
        return Ok((a..=b).collect());
    }
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse().map_err(|_| format!("bad seed `{t}`")))
        .collect()
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<ExitCode, String> {
    let cli = Cli::parse();
    let cfg = EpisodeConfig::default();
    match cli.cmd {
        Cmd::Run {
            scenario,
            seed,
            baseline,
            f_priority,
            out,
        } => {
            if let Some(f) = f_priority {
                if !(0.0..=1.0).contains(&f) {
                    return Err("--f-priority must lie in [0, 1]".into());
                }
            }
            let s = load(&scenario)?;
            let method = if baseline { Method::Baseline } else { Method::Full };
            let e = run_episode(&s, method, seed, f_priority, &cfg);
            let log = e.log_text();
            match out {
                Some(p) => fs::write(&p, log).map_err(|e| format!("{}: {e}", p.display()))?,
                None => print!("{log}"),
            }
            eprint!("{}", report_table(std::slice::from_ref(&e.report)));
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Batch {
            scenarios,
            seeds,
            sweep_f,
            full_only,
            out_dir,
        } => {
            let maps: Vec<Scenario> = scenarios.iter().map(|n| load(n)).collect::<Result<_, _>>()?;
            let seeds = parse_seeds(&seeds)?;
            let sweep: Vec<Option<f64>> = if sweep_f.is_empty() {
                vec![None]
            } else {
                sweep_f.into_iter().map(Some).collect()
            };
            let methods: &[Method] = if full_only {
                &[Method::Full]
            } else {
                &[Method::Full, Method::Baseline]
            };
            let trials = trial_grid(&maps, methods, &seeds, &sweep);
            let reports = run_batch(&trials, &cfg);
            fs::create_dir_all(&out_dir).map_err(|e| format!("{}: {e}", out_dir.display()))?;
            let trials_path = out_dir.join("trials.tsv");
            let summary_path = out_dir.join("summary.tsv");
            fs::write(&trials_path, report_table(&reports)).map_err(|e| e.to_string())?;
            let summary = summary_table(&reports);
            fs::write(&summary_path, &summary).map_err(|e| e.to_string())?;
            print!("{summary}");
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Verify { seed } => {
            let results = conav_core::verify::run_all(seed);
            let mut ok = true;
            for r in &results {
                println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
                ok &= r.passed;
            }
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}
