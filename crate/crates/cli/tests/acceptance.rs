//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if a criterion fails that is not listed in `KNOWN_RED`, or if a
//! known-red criterion disagrees with its independent oracle.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use covqec::codes::{
    branch_projection_fidelity, identity_embedding, qutrit_base_code, random_covariant_code, u1_isometry_code,
    u1_lattice_code, LatticeWindow,
};
use covqec::experiments::concentration::{mean_sd_se, IMPLICATION_EPSILONS};
use covqec::experiments::config::DEFAULT_BUDGET;
use covqec::experiments::demo::{closed_form_gap, mode_observables, CLOSED_FORM_INPUTS};
use covqec::experiments::{
    run_concentration, run_demo, run_nogo_probe, shipped_code, DemoKind, ExperimentConfig, ExperimentKind, GroupSpec,
    NogoConfig, Verdict,
};
use covqec::groups::FiniteGroup;
use covqec::rng::derive_seed;
use covqec::verify::{
    alpha_independence_check, covariance_residual, haar_inputs, random_code_identities, recovery_pipeline_check,
    VerificationReport,
};
use covqec::Result;

/// Criteria that cannot hold as stated. They are run and reported, and must
/// agree with their oracle, but do not fail the suite.
const KNOWN_RED: &[u32] = &[1];

type Criterion = fn() -> Result<Outcome>;

struct Outcome {
    pass: bool,
    detail: String,
    /// For known-red criteria: whether the measurement matches the oracle.
    faithful: bool,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Self { pass, detail, faithful: true }
    }
}

fn cfg(kind: ExperimentKind) -> ExperimentConfig {
    ExperimentConfig::new(kind)
}

fn check_of(r: &VerificationReport, name: &str) -> f64 {
    r.checks.iter().find(|c| c.name == name).unwrap_or_else(|| panic!("missing check {name}")).residual
}

fn criterion_1() -> Result<Outcome> {
    let start = Instant::now();
    let window = LatticeWindow::new(3, 8)?;
    let code = u1_lattice_code(&window)?;
    let charge = covariance_residual(&code)?;
    let inputs = haar_inputs(code.space_in(), 50, 0);
    let mut fids = Vec::new();
    let mut oracle_gap = 0.0f64;
    for j in 0..3 {
        fids.push(recovery_pipeline_check(&code, j, &inputs)?);
        let oracle = inputs.iter().map(|k| branch_projection_fidelity(&window, j, k)).fold(f64::INFINITY, f64::min);
        oracle_gap = oracle_gap.max((fids[j] - oracle).abs());
    }
    let elapsed = start.elapsed();
    let floor = 1.0 - 1e-12;
    let pass = fids.iter().all(|&f| f >= floor) && charge == 0.0 && elapsed < Duration::from_secs(10);
    let mut o = Outcome::new(
        pass,
        format!(
            "min fidelity per mode {:?} (need >= 1-1e-12), charge residual {charge}, oracle gap {oracle_gap:.1e}, {:.2}s",
            fids.iter().map(|f| format!("{f:.16}")).collect::<Vec<_>>(),
            elapsed.as_secs_f64()
        ),
    );
    o.faithful = oracle_gap <= 1e-10 && charge == 0.0 && fids[0] >= floor;
    Ok(o)
}

fn criterion_2() -> Result<Outcome> {
    let start = Instant::now();
    let r = run_demo(DemoKind::S3Product, &cfg(ExperimentKind::Demo(DemoKind::S3Product)))?;
    let elapsed = start.elapsed();
    let wiring: Vec<f64> = r.checks.iter().filter(|c| c.name.contains(".wiring[")).map(|c| c.residual).collect();
    let worst = wiring.iter().copied().fold(0.0, f64::max);
    let genuine = check_of(&r, "qutrit_blocks.covariance");
    let pass = wiring.len() == 12 && worst <= 1e-12 && genuine <= 1e-12 && elapsed < Duration::from_secs(60);
    Ok(Outcome::new(
        pass,
        format!(
            "{} wiring distances (6 qutrit blocks, 6 qubit-pair blocks), max {worst:.3e} (need <= 1e-12), genuine qutrit covariance {genuine:.3e}, {:.2}s",
            wiring.len(),
            elapsed.as_secs_f64()
        ),
    ))
}

fn criterion_3() -> Result<Outcome> {
    let mut c = cfg(ExperimentKind::Demo(DemoKind::Gyroscope));
    c.tol.fidelity = 1e-10;
    let r = run_demo(DemoKind::Gyroscope, &c)?;
    let fids: Vec<f64> = (0..5).map(|j| check_of(&r, &format!("gyroscope.recovery[mode {j}]"))).collect();
    let worst = fids.iter().copied().fold(1.0, f64::min);
    Ok(Outcome::new(worst >= 1.0 - 1e-10, format!("5 shares, 20 inputs, min fidelity {worst:.16} (need >= 1-1e-10)")))
}

fn criterion_4() -> Result<Outcome> {
    let start = Instant::now();
    let (mut inv, mut marg, mut gram, mut closed_form) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (order, n) in [(2, 5), (3, 3)] {
        let group = FiniteGroup::cyclic(order)?;
        for seed in 0..25u64 {
            let (code, diag) = random_covariant_code(&group, n, seed, DEFAULT_BUDGET)?;
            let ids = random_code_identities(&diag)?;
            inv = inv.max(ids.invariance);
            marg = marg.max(ids.projector_marginals);
            gram = gram.max(ids.gram);
            closed_form = closed_form.max(closed_form_gap(&code, &diag, 0, CLOSED_FORM_INPUTS, derive_seed(seed, 2))?);
        }
    }
    let elapsed = start.elapsed();
    let pass =
        inv <= 1e-12 && marg <= 1e-10 && gram <= 1e-10 && closed_form <= 1e-8 && elapsed < Duration::from_secs(300);
    Ok(Outcome::new(
        pass,
        format!(
            "Z2 n=5 and Z3 n=3, 25 seeds each: invariance {inv:.2e}, marginals {marg:.2e}, gram {gram:.2e}, closed form {closed_form:.2e}, {:.2}s",
            elapsed.as_secs_f64()
        ),
    ))
}

fn concentration(n: usize) -> Result<covqec::experiments::ConcentrationRun> {
    let mut c = cfg(ExperimentKind::Concentration);
    c.group = GroupSpec::Cyclic(2);
    c.n = n;
    c.samples = 200;
    run_concentration(&c)
}

fn criterion_5() -> Result<Outcome> {
    let run = concentration(5)?;
    let d = run.d as f64;
    let mut violations = 0;
    let mut mismatches = 0;
    for rec in &run.records {
        for (k, &eps) in IMPLICATION_EPSILONS.iter().enumerate() {
            // recomputed from the raw columns
            let premise = rec.deviation <= eps / (3.0 * d * d);
            let holds = rec.fworst >= 1.0 - eps - 1e-6;
            if premise && !holds {
                violations += 1;
            }
            let expect = match (premise, holds) {
                (false, _) => Verdict::PremiseFalse,
                (true, true) => Verdict::Holds,
                (true, false) => Verdict::Violated,
            };
            if rec.implication[k] != expect {
                mismatches += 1;
            }
        }
    }
    let gap = run.records.iter().map(|r| r.lower_bound - r.fworst).fold(f64::NEG_INFINITY, f64::max);
    let pass = run.records.len() == 200 && violations == 0 && mismatches == 0 && gap <= 1e-8;
    Ok(Outcome::new(
        pass,
        format!(
            "{} samples d=2 n=5: {violations} violations, {mismatches} verdict mismatches, max(lower bound - fworst) {gap:.3e} (need <= 1e-8)",
            run.records.len()
        ),
    ))
}

fn criterion_6() -> Result<Outcome> {
    let stats = |n| -> Result<(f64, f64, usize)> {
        let run = concentration(n)?;
        let devs: Vec<f64> = run.records.iter().map(|r| r.deviation).collect();
        let (mean, _, se) = mean_sd_se(&devs);
        Ok((mean, se, devs.len()))
    };
    let (m4, se4, c4) = stats(4)?;
    let (m6, se6, c6) = stats(6)?;
    let pass = c4 >= 200 && c6 >= 200 && m4 > m6 && m4 - 3.0 * se4 > m6 + 3.0 * se6;
    Ok(Outcome::new(pass, format!("n=4 mean {m4:.6} +- {:.6}, n=6 mean {m6:.6} +- {:.6} (3 SE)", 3.0 * se4, 3.0 * se6)))
}

fn criterion_7() -> Result<Outcome> {
    let charged = run_nogo_probe(&NogoConfig::charged(64, 0)?)?;
    let uncharged = run_nogo_probe(&NogoConfig::uncharged(64, 0)?)?;
    let probe = NogoConfig::uncharged(64, 0)?;
    let found = u1_isometry_code(&probe.charges_in, &probe.charges_out, &uncharged.best_params)?;

    let c = cfg(ExperimentKind::Demo(DemoKind::Random));
    let spread = |code: &covqec::codes::Code, modes: Option<usize>| -> Result<f64> {
        let mut obs = mode_observables(code.space_out());
        if let Some(m) = modes {
            obs.retain(|(j, _)| *j == m);
        }
        alpha_independence_check(code, &obs, &haar_inputs(code.space_in(), 8, 7))
    };
    let mut perfect = vec![
        ("qutrit-base", spread(&qutrit_base_code()?, None)?),
        ("gyroscope", spread(&shipped_code("gyroscope", &c)?, None)?),
        ("uncharged-probe-optimum", spread(&found, None)?),
    ];
    let u1 = shipped_code("u1-lattice", &c)?;
    perfect.push(("u1-lattice[mode 0]", spread(&u1, Some(0))?));
    let worst_perfect = perfect.iter().map(|p| p.1).fold(0.0, f64::max);
    let counter = spread(&identity_embedding(3, 3)?, None)?;

    let pass = charged.restarts_run() == 64
        && charged.best_residual >= 1e-3
        && uncharged.best_residual <= 1e-9
        && worst_perfect <= 1e-8
        && counter > 0.5;
    Ok(Outcome::new(
        pass,
        format!(
            "64 restarts: charged best KL {:.4e} (need >= 1e-3), uncharged {:.3e} (need <= 1e-9); alpha spread max {worst_perfect:.2e} over {:?}, identity embedding {counter:.3}",
            charged.best_residual,
            uncharged.best_residual,
            perfect.iter().map(|p| p.0).collect::<Vec<_>>()
        ),
    ))
}

fn criterion_8() -> Result<Outcome> {
    let r = run_demo(DemoKind::S3Product, &cfg(ExperimentKind::Demo(DemoKind::S3Product)))?;
    let cov = check_of(&r, "qutrit_blocks_twirl.covariance");
    let kl = (0..9).map(|j| check_of(&r, &format!("qutrit_blocks_twirl.kl[mode {j}]"))).fold(0.0, f64::max);
    let single = check_of(&r, "qutrit_base_twirl.covariance");
    Ok(Outcome::new(
        cov <= 1e-12 && kl <= 1e-10 && single <= 1e-12,
        format!("twirl covariance {cov:.3e}, single-block twirl covariance {single:.3e} (need <= 1e-12), per-block KL max {kl:.3e} (need <= 1e-10)"),
    ))
}

fn cli_run(dir: &Path, args: &[&str]) -> (Vec<u8>, i32) {
    let out =
        Command::new(env!("CARGO_BIN_EXE_covqec")).args(args).arg("--out").arg(dir).output().expect("binary runs");
    (out.stdout, out.status.code().unwrap_or(-1))
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .expect("output dir")
        .map(|e| {
            let e = e.expect("entry");
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).expect("readable"))
        })
        .collect();
    files.sort();
    files
}

fn criterion_9() -> Result<Outcome> {
    let tmp = tempfile::tempdir()?;
    let code = tmp.path().join("qutrit.code");
    let state = tmp.path().join("one.state");
    let (text, _) = cli_run(&tmp.path().join("export"), &["export", "qutrit-base"]);
    std::fs::write(&code, text)?;
    std::fs::write(&state, "dims: 3\n0 0\n1 0\n0 0\n")?;
    let code = code.to_string_lossy().into_owned();
    let state = state.to_string_lossy().into_owned();
    let runs: Vec<Vec<&str>> = vec![
        vec!["demo", "random", "--seed", "5"],
        vec!["demo", "gyroscope"],
        vec!["concentration", "--samples", "12", "--n", "4", "--seed", "3"],
        vec!["nogo", "--restarts", "4"],
        vec!["verify", &code],
        vec!["encode", &code, &state],
        vec!["export", "random", "--group", "z3", "--n", "3", "--seed", "9"],
    ];
    let mut files = 0;
    let mut bad = Vec::new();
    for (i, args) in runs.iter().enumerate() {
        let a = tmp.path().join(format!("run{i}a"));
        let b = tmp.path().join(format!("run{i}b"));
        let (out_a, code_a) = cli_run(&a, args);
        let (out_b, code_b) = cli_run(&b, args);
        let (snap_a, snap_b) = (snapshot(&a), snapshot(&b));
        let echoed = snap_a.iter().all(|(_, body)| body.starts_with(b"# version: covqec "));
        if out_a != out_b || code_a != code_b || code_a != 0 || snap_a != snap_b || snap_a.is_empty() || !echoed {
            bad.push(args.join(" "));
        }
        files += snap_a.len();
    }
    Ok(Outcome::new(
        bad.is_empty(),
        format!("{} commands run twice, {files} files compared byte for byte; differing: {bad:?}", runs.len()),
    ))
}

fn main() {
    let criteria: [(u32, &str, Criterion); 9] = [
        (1, "u1 lattice recovery", criterion_1),
        (2, "S3 wiring equivalence", criterion_2),
        (3, "gyroscope recovery", criterion_3),
        (4, "random code identities", criterion_4),
        (5, "implication suite", criterion_5),
        (6, "concentration trend", criterion_6),
        (7, "no-go probe and alpha spread", criterion_7),
        (8, "twirling", criterion_8),
        (9, "CLI determinism", criterion_9),
    ];
    let mut broken = Vec::new();
    for (id, name, run) in criteria {
        let start = Instant::now();
        match run() {
            Ok(o) => {
                let tag = if o.pass { "PASS" } else { "FAIL" };
                let red = KNOWN_RED.contains(&id);
                let note = if !o.pass && red { " [known red]" } else { "" };
                println!("{tag} {id} {name}: {}{note} ({:.1}s)", o.detail, start.elapsed().as_secs_f64());
                if (!o.pass && !red) || (red && !o.faithful) {
                    broken.push(id);
                }
            }
            Err(e) => {
                println!("FAIL {id} {name}: error {e}");
                broken.push(id);
            }
        }
    }
    if !broken.is_empty() {
        eprintln!("acceptance: unexpected failures in criteria {broken:?}");
        std::process::exit(1);
    }
}
