use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use covqec::codes::serialize::write_code;
use covqec::experiments::concentration::run_concentration;
use covqec::experiments::nogo::running_min_csv;
use covqec::experiments::{
    run_demo, run_encode, run_nogo, run_verify, shipped_code, DemoKind, ExperimentConfig, ExperimentKind,
};
use covqec::verify::VerificationReport;

#[derive(Parser)]
#[command(name = "covqec", version, about = "Covariant erasure codes: demos, experiments and file checks")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of sampled codes (concentration).
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Group: trivial, z<N>, s<N> or file:PATH.
    #[arg(long, global = true)]
    group: Option<String>,
    /// Number of code modes of the random code.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Tolerance override, repeatable.
    #[arg(long, global = true, value_name = "KEY=VALUE")]
    tol: Vec<String>,
    /// Directory for report and CSV files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Largest total code dimension d^n.
    #[arg(long, global = true)]
    budget: Option<usize>,
    /// Multistart restarts.
    #[arg(long, global = true)]
    restarts: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Build a code and run its checks: u1, s3-product, gyroscope or random.
    Demo { kind: String },
    /// Sample random covariant codes and compare with the concentration bounds.
    Concentration,
    /// Search for erasure-correcting U(1)-covariant isometries.
    Nogo,
    /// Check a code file: trace preservation, covariance, KL residuals.
    Verify { code_file: PathBuf },
    /// Encode a state file with a code file.
    Encode { code_file: PathBuf, state_file: PathBuf },
    /// Write a shipped code to a code file: qutrit-base, gyroscope, u1-lattice or random.
    Export { name: String },
}

struct Outcome {
    stdout: String,
    files: Vec<(String, String)>,
    pass: bool,
    timings: String,
}

impl Outcome {
    fn from_report(r: &VerificationReport, stem: &str) -> Result<Self> {
        Ok(Self {
            stdout: r.to_text(),
            files: vec![(format!("{stem}.txt"), r.to_text()), (format!("{stem}.csv"), r.to_csv()?)],
            pass: r.all_pass(),
            timings: r.timing_summary(),
        })
    }
}

fn config(kind: ExperimentKind, c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::new(kind);
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(s) = c.samples {
        cfg.samples = s;
    }
    if let Some(g) = &c.group {
        cfg.group = g.parse()?;
    }
    if let Some(n) = c.n {
        cfg.n = n;
    }
    for t in &c.tol {
        cfg.tol.set(t)?;
    }
    cfg.out = c.out.clone();
    if let Some(b) = c.budget {
        cfg.budget = b;
    }
    if let Some(r) = c.restarts {
        cfg.restarts = r;
    }
    for w in cfg.validate()? {
        eprintln!("{w}");
    }
    Ok(cfg)
}

fn echo_lines(echo: &[(String, String)]) -> String {
    echo.iter().map(|(k, v)| format!("# {k}: {v}\n")).collect()
}

fn read(p: &PathBuf) -> Result<String> {
    fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))
}

fn run(cli: Cli) -> Result<Outcome> {
    let c = &cli.common;
    match cli.command {
        Command::Demo { kind } => {
            let kind: DemoKind = kind.parse()?;
            let cfg = config(ExperimentKind::Demo(kind), c)?;
            let r = run_demo(kind, &cfg)?;
            Outcome::from_report(&r, &cfg.kind.stem())
        }
        Command::Concentration => {
            let cfg = config(ExperimentKind::Concentration, c)?;
            let run = run_concentration(&cfg)?;
            let mut o = Outcome::from_report(&run.summary, "concentration-summary")?;
            o.files.push(("concentration.csv".into(), run.records_csv()?));
            Ok(o)
        }
        Command::Nogo => {
            let cfg = config(ExperimentKind::Nogo, c)?;
            let (r, results) = run_nogo(&cfg)?;
            let mut o = Outcome::from_report(&r, "nogo")?;
            o.files.push(("nogo-restarts.csv".into(), running_min_csv(&cfg.echo(), &results)?));
            Ok(o)
        }
        Command::Verify { code_file } => {
            let cfg = config(ExperimentKind::Verify { code: code_file.clone() }, c)?;
            let r = run_verify(&cfg, &read(&code_file)?)?;
            Outcome::from_report(&r, "verify")
        }
        Command::Encode { code_file, state_file } => {
            let cfg = config(ExperimentKind::Encode { code: code_file.clone(), state: state_file.clone() }, c)?;
            let text = run_encode(&cfg, &read(&code_file)?, &read(&state_file)?)?;
            Ok(Outcome {
                stdout: text.clone(),
                files: vec![("encoded.state".into(), text)],
                pass: true,
                timings: String::new(),
            })
        }
        Command::Export { name } => {
            let cfg = config(ExperimentKind::Demo(DemoKind::Random), c)?;
            let mut echo = cfg.echo();
            echo[1].1 = format!("export {name}");
            let text = format!("{}{}", echo_lines(&echo), write_code(&shipped_code(&name, &cfg)?)?);
            Ok(Outcome {
                stdout: text.clone(),
                files: vec![(format!("{name}.code"), text)],
                pass: true,
                timings: String::new(),
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = cli.common.out.clone();
    let outcome = match run(cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    print!("{}", outcome.stdout);
    if !outcome.timings.is_empty() {
        eprintln!("timings: {}", outcome.timings);
    }
    if let Some(dir) = out {
        let written = fs::create_dir_all(&dir)
            .and_then(|_| outcome.files.iter().try_for_each(|(name, body)| fs::write(dir.join(name), body)));
        if let Err(e) = written {
            eprintln!("error: writing to {}: {e}", dir.display());
            return ExitCode::from(2);
        }
    }
    if outcome.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
