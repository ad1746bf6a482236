//! Builds each shipped code at its default parameters and runs the checks
//! that apply to it.

use std::time::Instant;

use super::config::{DemoKind, ExperimentConfig, Tolerances};
use crate::channels::{choi_distance, ensemble_fidelity_pure, Channel};
use crate::codes::{
    branch_projection_fidelity, gyroscope_code, permutation_covariant_code, qubit_pair_code, qutrit_base_code,
    random_covariant_code, twirl_code, u1_lattice_code, unnormalized_gram, Code, LatticeWindow, Symmetry,
    DEFAULT_CODE_BUDGET, DEFAULT_K, DEFAULT_L,
};
use crate::error::{Error, Result};
use crate::groups::{FiniteGroup, GroupAction, Representation};
use crate::hilbert::{operator_norm, trace_norm, CMatrix, DenseKet, DenseOperator, ModeSpace, C64, ONE};
use crate::rng::derive_seed;
use crate::verify::{
    alpha_independence_check, charge_operator, closed_form_recovery_for, covariance_residual,
    finite_covariance_residual, fworst_estimate, fworst_lower_bound, gell_mann, haar_inputs, kl_erasure_check,
    random_code_identities, recovery_pipeline_check, sparse_to_dense, VerificationReport,
};

/// Haar inputs per erased mode in the lattice demo.
pub const U1_INPUTS: usize = 50;
/// Haar inputs per erased mode in the gyroscope demo.
pub const GYROSCOPE_INPUTS: usize = 20;
/// Haar inputs of the closed-form recovery comparison on code mode 0.
pub const CLOSED_FORM_INPUTS: usize = 100;

pub fn run_demo(kind: DemoKind, cfg: &ExperimentConfig) -> Result<VerificationReport> {
    cfg.validate()?;
    let mut r = VerificationReport::new(format!("demo {}", kind.name())).with_config(cfg.echo());
    let start = Instant::now();
    match kind {
        DemoKind::U1 => u1_demo(&mut r, cfg)?,
        DemoKind::S3Product => s3_product_demo(&mut r, cfg)?,
        DemoKind::Gyroscope => gyroscope_demo(&mut r, cfg)?,
        DemoKind::Random => random_demo(&mut r, cfg)?,
    }
    r.timing("total", start.elapsed());
    Ok(r)
}

/// Traceless Gell-Mann operators on every mode of `space`.
pub fn mode_observables(space: &ModeSpace) -> Vec<(usize, CMatrix)> {
    space
        .dims()
        .iter()
        .enumerate()
        .flat_map(|(m, &d)| gell_mann(d).into_iter().skip(1).map(move |e| (m, sparse_to_dense(d, &e))))
        .collect()
}

/// Choi distance between "act with `U_in(g)`, then encode" and "encode,
/// then act with `U_out(g)`", for every group element.
pub fn wiring_distances(code: &Code, rep_in: &Representation, rep_out: &Representation) -> Result<Vec<f64>> {
    let kraus = code.encoder_kraus()?;
    rep_in
        .group()
        .elements()
        .map(|g| {
            let u_in = rep_in.unitary(g);
            let before: Vec<CMatrix> = kraus.iter().map(|k| k * u_in.matrix()).collect();
            let after: Vec<CMatrix> = kraus.iter().map(|k| rep_out.apply_columns(g, k)).collect();
            let a = Channel::new_unchecked(code.space_in().clone(), code.space_out().clone(), before)?;
            let b = Channel::new_unchecked(code.space_in().clone(), code.space_out().clone(), after)?;
            Ok(choi_distance(&a, &b))
        })
        .collect()
}

fn finite_reps(code: &Code) -> Result<(Representation, Representation)> {
    match code.symmetry() {
        Symmetry::Finite { rep_in, rep_out } => Ok((rep_in.clone(), rep_out.clone())),
        _ => Err(Error::NoSymmetry),
    }
}

fn kl_checks(r: &mut VerificationReport, prefix: &str, code: &Code, tol: f64) -> Result<()> {
    for j in 0..code.space_out().num_modes() {
        r.at_most(format!("{prefix}.kl[mode {j}]"), kl_erasure_check(code, j)?, tol, None);
    }
    Ok(())
}

fn recovery_checks(
    r: &mut VerificationReport,
    prefix: &str,
    code: &Code,
    modes: &[usize],
    inputs: &[DenseKet],
    seed: u64,
    tol: &Tolerances,
) -> Result<()> {
    for &j in modes {
        let f = recovery_pipeline_check(code, j, inputs)?;
        r.at_least(format!("{prefix}.recovery[mode {j}]"), f, 1.0 - tol.fidelity, Some(seed));
    }
    Ok(())
}

fn u1_demo(r: &mut VerificationReport, cfg: &ExperimentConfig) -> Result<()> {
    let tol = &cfg.tol;
    let window = LatticeWindow::new(DEFAULT_L, DEFAULT_K)?;
    let code = u1_lattice_code(&window)?;
    r.note(format!("lattice window L={} K={} mode dims {:?}", window.l(), window.k(), code.space_out().dims()));
    r.at_most("u1.charge_conservation", covariance_residual(&code)?, 0.0, None);
    let gram = unnormalized_gram(&window);
    let norm = 2 * window.k() + 1;
    let gram_err = (0..gram.len())
        .flat_map(|a| (0..gram.len()).map(move |b| (a, b)))
        .map(|(a, b)| (gram[a][b] - if a == b { norm } else { 0 }).abs())
        .max()
        .unwrap_or(0);
    r.at_most("u1.gram_is_scaled_identity", gram_err as f64, 0.0, None);

    let inputs = haar_inputs(code.space_in(), U1_INPUTS, cfg.seed);
    let basis: Vec<DenseKet> =
        (0..window.input_dim()).map(|i| DenseKet::basis(code.space_in().clone(), i)).collect::<Result<_>>()?;
    for j in 0..3 {
        let f = recovery_pipeline_check(&code, j, &inputs)?;
        r.at_least(format!("u1.recovery[mode {j}]"), f, 1.0 - tol.fidelity, Some(cfg.seed));
        let fb = recovery_pipeline_check(&code, j, &basis)?;
        r.at_least(format!("u1.basis_recovery[mode {j}]"), fb, 1.0 - tol.fidelity, None);
        let pipe = code.pipeline(j)?;
        let mut gap = 0.0f64;
        for k in &inputs {
            let got = ensemble_fidelity_pure(k, &pipe.apply_ket(k)?);
            gap = gap.max((got - branch_projection_fidelity(&window, j, k)).abs());
        }
        r.at_most(format!("u1.branch_projection_agreement[mode {j}]"), gap, tol.fidelity, Some(cfg.seed));
    }
    let charges = match code.symmetry() {
        Symmetry::U1 { charges_out, .. } => charges_out.clone(),
        _ => unreachable!("lattice code carries charges"),
    };
    for (j, c) in charges.iter().enumerate() {
        let spread = alpha_independence_check(&code, &[(j, charge_operator(c.charges()))], &inputs)?;
        if j == 0 {
            r.at_most("u1.alpha_spread[mode 0]", spread, tol.alpha, Some(cfg.seed));
        } else {
            r.value(format!("u1.alpha_spread[mode {j}]"), spread);
        }
    }
    Ok(())
}

fn s3_product_demo(r: &mut VerificationReport, cfg: &ExperimentConfig) -> Result<()> {
    let tol = &cfg.tol;
    let base = qutrit_base_code()?;

    // qutrit base code, S3 permuting three blocks
    let natural = GroupAction::natural(3)?;
    let a = permutation_covariant_code(&base, &natural, DEFAULT_CODE_BUDGET)?;
    let (a_in, a_out) = finite_reps(&a)?;
    for (g, dist) in wiring_distances(&a, &a_in, &a_out)?.into_iter().enumerate() {
        r.at_most(format!("qutrit_blocks.wiring[g={}]", natural.group().name(g)), dist, tol.covariance, None);
    }
    r.at_most("qutrit_blocks.covariance", covariance_residual(&a)?, tol.covariance, None);
    let t = Instant::now();
    kl_checks(r, "qutrit_blocks", &a, tol.kl)?;
    r.timing("qutrit_blocks.kl", t.elapsed());
    let t = Instant::now();
    let inputs = haar_inputs(a.space_in(), 4, cfg.seed);
    recovery_checks(r, "qutrit_blocks", &a, &[0, 4, 8], &inputs, cfg.seed, tol)?;
    r.timing("qutrit_blocks.recovery", t.elapsed());
    let t = Instant::now();
    let obs = mode_observables(a.space_out());
    r.at_most("qutrit_blocks.alpha_spread", alpha_independence_check(&a, &obs, &inputs)?, tol.alpha, Some(cfg.seed));
    r.timing("qutrit_blocks.alpha", t.elapsed());

    // qubit-pair stand-in, S3 acting regularly on six blocks
    let s3 = FiniteGroup::symmetric(3)?;
    let regular = GroupAction::regular(&s3);
    let b = permutation_covariant_code(&qubit_pair_code()?, &regular, DEFAULT_CODE_BUDGET)?;
    let (b_in, b_out) = finite_reps(&b)?;
    for (g, dist) in wiring_distances(&b, &b_in, &b_out)?.into_iter().enumerate() {
        r.at_most(format!("qubit_pair_blocks.wiring[g={}]", s3.name(g)), dist, tol.covariance, None);
    }
    let pair_kl = (0..2).map(|j| kl_erasure_check(&qubit_pair_code()?, j)).collect::<Result<Vec<_>>>()?;
    r.value("qubit_pair.kl.max", pair_kl.into_iter().fold(0.0, f64::max));
    r.note("the qubit-pair block is not an erasure code; its KL residual is reported, not required");

    // twirls
    let trivial_in = Representation::trivial(natural.group().clone(), base.space_in().clone());
    let permute_out = Representation::factor_permutation(natural.clone(), ModeSpace::new(vec![3])?);
    r.value("qutrit_base.permutation_covariance", finite_covariance_residual(&base, &trivial_in, &permute_out)?);
    let single = twirl_code(&base, Some((&trivial_in, &permute_out)))?;
    r.at_most("qutrit_base_twirl.covariance", covariance_residual(&single)?, tol.covariance, None);
    let single_kl = (0..3).map(|j| kl_erasure_check(&single, j)).collect::<Result<Vec<_>>>()?;
    r.value("qutrit_base_twirl.kl.max", single_kl.into_iter().fold(0.0, f64::max));
    let t = Instant::now();
    let tw = twirl_code(&a, None)?;
    r.at_most("qutrit_blocks_twirl.covariance", covariance_residual(&tw)?, tol.covariance, None);
    r.at_most(
        "qutrit_blocks_twirl.equals_code",
        choi_distance(&tw.encoder_channel()?, &a.encoder_channel()?),
        tol.covariance,
        None,
    );
    kl_checks(r, "qutrit_blocks_twirl", &tw, tol.kl)?;
    r.timing("qutrit_blocks.twirl", t.elapsed());
    Ok(())
}

/// Z2 acting on a qutrit by exchanging `|0⟩` and `|1⟩`.
pub fn qutrit_swap_rep() -> Result<Representation> {
    let z2 = FiniteGroup::cyclic(2)?;
    let mut swap = CMatrix::zeros(3, 3);
    swap[(0, 1)] = ONE;
    swap[(1, 0)] = ONE;
    swap[(2, 2)] = ONE;
    Representation::from_unitaries(z2, ModeSpace::new(vec![3])?, vec![CMatrix::identity(3, 3), swap])
}

fn gyroscope_demo(r: &mut VerificationReport, cfg: &ExperimentConfig) -> Result<()> {
    let tol = &cfg.tol;
    let base = qutrit_base_code()?;
    kl_checks(r, "qutrit_base", &base, tol.kl)?;
    let code = gyroscope_code(&base, &qutrit_swap_rep()?)?;
    r.at_most("gyroscope.covariance", covariance_residual(&code)?, tol.covariance, None);
    kl_checks(r, "gyroscope", &code, tol.kl)?;
    let inputs = haar_inputs(code.space_in(), GYROSCOPE_INPUTS, cfg.seed);
    let modes: Vec<usize> = (0..code.space_out().num_modes()).collect();
    recovery_checks(r, "gyroscope", &code, &modes, &inputs, cfg.seed, tol)?;
    let obs = mode_observables(code.space_out());
    r.at_most("gyroscope.alpha_spread", alpha_independence_check(&code, &obs, &inputs)?, tol.alpha, Some(cfg.seed));
    Ok(())
}

fn random_demo(r: &mut VerificationReport, cfg: &ExperimentConfig) -> Result<()> {
    let tol = &cfg.tol;
    let group = cfg.group.build()?;
    let (code, diag) = random_covariant_code(&group, cfg.n, cfg.seed, cfg.budget)?;
    let ids = random_code_identities(&diag)?;
    let seed = Some(cfg.seed);
    r.at_most("random.psi_invariance", ids.invariance, tol.invariance, seed);
    r.at_most("random.projector_marginals", ids.projector_marginals, tol.identity, seed);
    r.at_most("random.gram_identity", ids.gram, tol.identity, seed);
    r.at_most("random.covariance", covariance_residual(&code)?, tol.covariance, seed);
    let worst = closed_form_gap(&code, &diag, 0, CLOSED_FORM_INPUTS, derive_seed(cfg.seed, 2))?;
    r.at_most("random.closed_form_recovery[mode 0]", worst, tol.closed_form, seed);
    for j in 1..cfg.n {
        let w = closed_form_gap(&code, &diag, j, 10, derive_seed(cfg.seed, 2 + j as u64))?;
        r.at_most(format!("random.closed_form_recovery[mode {j}]"), w, tol.closed_form, seed);
    }
    let d = diag.d();
    let tau = CMatrix::identity(d * d, d * d) / C64::new((d * d) as f64, 0.0);
    r.value("random.deviation", operator_norm(&(diag.psi01.matrix() - tau)));
    let est = fworst_estimate(&code, 0, cfg.restarts, derive_seed(cfg.seed, 1))?;
    let lb = fworst_lower_bound(&diag)?;
    r.value("random.fworst[mode 0]", est.value);
    r.value("random.fworst_lower_bound", lb);
    r.at_most("random.lower_bound_minus_fworst", lb - est.value, tol.bound, seed);
    for j in 0..cfg.n {
        r.value(format!("random.kl[mode {j}]"), kl_erasure_check(&code, j)?);
    }
    Ok(())
}

/// Largest trace distance between the closed-form recovery and the circuit
/// over Haar-random pure inputs, erasing code mode `j`.
pub fn closed_form_gap(
    code: &Code,
    diag: &crate::codes::RandomCodeDiagnostics,
    j: usize,
    count: usize,
    seed: u64,
) -> Result<f64> {
    let pipe = code.pipeline(j)?;
    let mut worst = 0.0f64;
    for k in haar_inputs(code.space_in(), count, seed) {
        let rho = k.density();
        let a = closed_form_recovery_for(diag, j, &rho)?;
        let b: DenseOperator = pipe.apply(&rho)?;
        worst = worst.max(trace_norm(&(a.matrix() - b.matrix())) / 2.0);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::ExperimentKind;

    #[test]
    fn swap_rep_is_a_representation() {
        assert!(qutrit_swap_rep().unwrap().homomorphism_residual() < 1e-14);
    }

    #[test]
    fn gyroscope_demo_passes() {
        let cfg = ExperimentConfig::new(ExperimentKind::Demo(DemoKind::Gyroscope));
        let r = run_demo(DemoKind::Gyroscope, &cfg).unwrap();
        assert!(r.all_pass(), "{}", r.to_text());
    }

    #[test]
    fn random_demo_passes() {
        let cfg = ExperimentConfig::new(ExperimentKind::Demo(DemoKind::Random));
        let r = run_demo(DemoKind::Random, &cfg).unwrap();
        assert!(r.all_pass(), "{}", r.to_text());
    }
}
