//! Multistart search for an erasure-correcting U(1)-covariant isometry.

use rand_distr::{Distribution, StandardNormal};

use super::config::ExperimentConfig;
use crate::codes::serialize::format_f64;
use crate::codes::{u1_covariant_isometry, u1_isometry_code, u1_param_count};
use crate::error::Result;
use crate::groups::ChargeRep;
use crate::hilbert::{CMatrix, ModeSpace};
use crate::optim::{levenberg_marquardt, LmOptions};
use crate::rng::{derive_seed, seeded_rng};
use crate::verify::{
    alpha_independence_check, charge_operator, haar_inputs, kl_residual, kl_residual_vector, VerificationReport,
};

#[derive(Clone, Debug)]
pub struct NogoConfig {
    pub charges_in: ChargeRep,
    pub charges_out: Vec<ChargeRep>,
    pub restarts: usize,
    pub seed: u64,
    pub lm: LmOptions,
}

impl NogoConfig {
    pub fn new(charges_in: ChargeRep, charges_out: Vec<ChargeRep>, restarts: usize, seed: u64) -> Self {
        Self { charges_in, charges_out, restarts, seed, lm: LmOptions::default() }
    }

    /// Qubit with charges (0, 1) into three modes with charges (0, 1, 2).
    pub fn charged(restarts: usize, seed: u64) -> Result<Self> {
        let out = ChargeRep::new(vec![0, 1, 2])?;
        Ok(Self::new(ChargeRep::new(vec![0, 1])?, vec![out.clone(), out.clone(), out], restarts, seed))
    }

    /// The same shapes with every charge zero.
    pub fn uncharged(restarts: usize, seed: u64) -> Result<Self> {
        let out = ChargeRep::new(vec![0, 0, 0])?;
        Ok(Self::new(ChargeRep::new(vec![0, 0])?, vec![out.clone(), out.clone(), out], restarts, seed))
    }
}

#[derive(Clone, Debug)]
pub struct NogoResult {
    /// Smallest `max_j` KL residual found.
    pub best_residual: f64,
    pub best_restart: usize,
    pub best_params: Vec<f64>,
    /// KL residual of the best isometry for each erased mode.
    pub per_mode: Vec<f64>,
    /// Best residual after each restart.
    pub running_min: Vec<f64>,
    pub iterations: usize,
    /// Spread of the charge expectation on each mode over Haar inputs,
    /// maximized over modes, for the best isometry.
    pub alpha_spread: f64,
}

impl NogoResult {
    pub fn restarts_run(&self) -> usize {
        self.running_min.len()
    }
}

const ALPHA_INPUTS: usize = 16;

/// Runs restarts in index order; restart `r` starts from Gaussian
/// parameters seeded by `derive_seed(seed, r)`.
pub fn run_nogo_probe(cfg: &NogoConfig) -> Result<NogoResult> {
    let count = u1_param_count(&cfg.charges_in, &cfg.charges_out)?;
    let space_out = ModeSpace::new(cfg.charges_out.iter().map(|c| c.dim()).collect())?;
    let modes: Vec<usize> = (0..cfg.charges_out.len()).collect();
    let kraus_of = |p: &[f64]| -> Result<Vec<CMatrix>> {
        Ok(vec![u1_covariant_isometry(&cfg.charges_in, &cfg.charges_out, p)?.into_matrix()])
    };
    let per_mode = |p: &[f64]| -> Result<Vec<f64>> {
        let k = kraus_of(p)?;
        modes.iter().map(|&j| kl_residual(&k, &space_out, j)).collect()
    };
    let objective = |p: &[f64]| -> Vec<f64> {
        kraus_of(p).and_then(|k| kl_residual_vector(&k, &space_out, &modes)).expect("parameter count fixed above")
    };

    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    let mut running_min = Vec::with_capacity(cfg.restarts);
    let mut iterations = 0;
    for r in 0..cfg.restarts {
        let mut rng = seeded_rng(derive_seed(cfg.seed, r as u64));
        let x0: Vec<f64> = (0..count).map(|_| StandardNormal.sample(&mut rng)).collect();
        let fit = levenberg_marquardt(objective, &x0, &cfg.lm);
        iterations += fit.iterations;
        let value = per_mode(&fit.x)?.into_iter().fold(0.0, f64::max);
        if best.as_ref().is_none_or(|b| value < b.0) {
            best = Some((value, r, fit.x));
        }
        let current = best.as_ref().map_or(f64::INFINITY, |b| b.0);
        running_min.push(current);
    }
    let (best_residual, best_restart, best_params) = best.unwrap_or((f64::INFINITY, 0, vec![0.0; count]));

    let code = u1_isometry_code(&cfg.charges_in, &cfg.charges_out, &best_params)?;
    let generators: Vec<(usize, CMatrix)> =
        cfg.charges_out.iter().enumerate().map(|(m, c)| (m, charge_operator(c.charges()))).collect();
    let inputs = haar_inputs(code.space_in(), ALPHA_INPUTS, derive_seed(cfg.seed, u64::MAX));
    let alpha_spread = alpha_independence_check(&code, &generators, &inputs)?;
    Ok(NogoResult {
        best_residual,
        best_restart,
        per_mode: per_mode(&best_params)?,
        best_params,
        running_min,
        iterations,
        alpha_spread,
    })
}

/// Both probes at `cfg.restarts` restarts and `cfg.seed`: the charged one
/// must stay at or above `tol.nogo_floor`, the uncharged one must reach
/// `tol.nogo_perfect`.
pub fn run_nogo(cfg: &ExperimentConfig) -> Result<(VerificationReport, Vec<(&'static str, NogoResult)>)> {
    cfg.validate()?;
    let mut r = VerificationReport::new("nogo probe").with_config(cfg.echo());
    let cases = [
        ("charged", NogoConfig::charged(cfg.restarts, cfg.seed)?),
        ("uncharged", NogoConfig::uncharged(cfg.restarts, cfg.seed)?),
    ];
    let mut results = Vec::new();
    for (name, probe) in cases {
        let res = run_nogo_probe(&probe)?;
        r.note(format!(
            "{name}: charges_in {:?}, charges_out {:?}",
            probe.charges_in.charges(),
            probe.charges_out.iter().map(|c| c.charges().to_vec()).collect::<Vec<_>>()
        ));
        if name == "charged" {
            r.at_least(format!("{name}.best_kl"), res.best_residual, cfg.tol.nogo_floor, Some(cfg.seed));
        } else {
            r.at_most(format!("{name}.best_kl"), res.best_residual, cfg.tol.nogo_perfect, Some(cfg.seed));
        }
        for (j, v) in res.per_mode.iter().enumerate() {
            r.value(format!("{name}.kl[mode {j}]"), *v);
        }
        r.value(format!("{name}.best_restart"), res.best_restart as f64);
        r.value(format!("{name}.iterations"), res.iterations as f64);
        r.value(format!("{name}.alpha_spread"), res.alpha_spread);
        results.push((name, res));
    }
    Ok((r, results))
}

/// `case,restart,best_kl` rows of the running minimum after `echo` lines.
pub fn running_min_csv(echo: &[(String, String)], results: &[(&str, NogoResult)]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["case", "restart", "best_kl"])?;
    for (name, res) in results {
        for (i, v) in res.running_min.iter().enumerate() {
            w.write_record([name.to_string(), i.to_string(), format_f64(*v)])?;
        }
    }
    let body = String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("utf-8 csv");
    let head: String = echo.iter().map(|(k, v)| format!("# {k}: {v}\n")).collect();
    Ok(format!("{head}{body}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charged_probe_stays_away_from_zero() {
        let r = run_nogo_probe(&NogoConfig::charged(4, 1).unwrap()).unwrap();
        assert!(r.best_residual >= 1e-3, "{}", r.best_residual);
        assert!(r.running_min.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn uncharged_probe_finds_a_perfect_code() {
        let r = run_nogo_probe(&NogoConfig::uncharged(2, 0).unwrap()).unwrap();
        assert!(r.best_residual <= 1e-9, "{}", r.best_residual);
        assert!(r.alpha_spread <= 1e-8);
    }

    #[test]
    fn more_restarts_never_worsen_the_best() {
        let a = run_nogo_probe(&NogoConfig::charged(3, 5).unwrap()).unwrap();
        let b = run_nogo_probe(&NogoConfig::charged(6, 5).unwrap()).unwrap();
        assert!(b.best_residual <= a.best_residual);
        assert_eq!(&b.running_min[..3], &a.running_min[..]);
    }
}
