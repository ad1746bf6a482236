//! Checks and encoding for codes stored in files.

use super::config::ExperimentConfig;
use crate::channels::TP_TOL;
use crate::codes::serialize::{read_code, read_state, write_state};
use crate::codes::{
    gyroscope_code, qutrit_base_code, random_covariant_code, u1_lattice_code, Code, LatticeWindow, Symmetry, DEFAULT_K,
    DEFAULT_L,
};
use crate::error::{Error, Result};
use crate::verify::{covariance_residual, kl_erasure_check, VerificationReport};

/// Trace preservation, covariance (when the file declares a symmetry) and
/// the KL residual of every output mode.
pub fn verify_code(code: &Code, cfg: &ExperimentConfig) -> VerificationReport {
    let mut r = VerificationReport::new(format!("verify {}", code.kind())).with_config(cfg.echo());
    let seed = code.seed();
    match code.encoder_channel() {
        Ok(ch) => {
            r.at_most("trace_preservation", ch.trace_preservation_residual(), TP_TOL, seed);
        }
        Err(e) => r.note(format!("encoder channel unavailable: {e}")),
    }
    if matches!(code.symmetry(), Symmetry::None) {
        r.note("no symmetry declared; covariance not checked");
    } else {
        match covariance_residual(code) {
            Ok(v) => {
                r.at_most("covariance", v, cfg.tol.covariance, seed);
            }
            Err(e) => r.note(format!("covariance failed: {e}")),
        }
    }
    for j in 0..code.space_out().num_modes() {
        match kl_erasure_check(code, j) {
            Ok(v) => {
                r.at_most(format!("kl[mode {j}]"), v, cfg.tol.kl, seed);
            }
            Err(e) => r.note(format!("kl[mode {j}] failed: {e}")),
        }
    }
    r
}

pub fn run_verify(cfg: &ExperimentConfig, code_text: &str) -> Result<VerificationReport> {
    cfg.validate()?;
    Ok(verify_code(&read_code(code_text)?, cfg))
}

/// Encodes the state file with the code file; the result is a state file.
/// Requires an isometric encoder.
pub fn run_encode(cfg: &ExperimentConfig, code_text: &str, state_text: &str) -> Result<String> {
    cfg.validate()?;
    let code = read_code(code_text)?;
    let ket = read_state(state_text)?;
    if !ket.space().same_shape(code.space_in()) {
        return Err(Error::DimensionMismatch(format!(
            "state on {:?} but the code expects {:?}",
            ket.space().dims(),
            code.space_in().dims()
        )));
    }
    let mut out = code.encode(&ket)?;
    if out.len() != 1 {
        return Err(Error::InvalidChannel(format!(
            "encoder has {} Kraus operators; encode needs an isometric code",
            out.len()
        )));
    }
    let echo: String = cfg.echo().iter().map(|(k, v)| format!("# {k}: {v}\n")).collect();
    Ok(format!("{echo}{}", write_state(&out.remove(0))))
}

/// Names accepted by [`shipped_code`].
pub const SHIPPED_CODES: [&str; 4] = ["qutrit-base", "gyroscope", "u1-lattice", "random"];

/// A shipped code at its default parameters; `random` uses the group, `n`,
/// seed and budget of `cfg`.
pub fn shipped_code(name: &str, cfg: &ExperimentConfig) -> Result<Code> {
    match name {
        "qutrit-base" => qutrit_base_code(),
        "gyroscope" => gyroscope_code(&qutrit_base_code()?, &super::demo::qutrit_swap_rep()?),
        "u1-lattice" => u1_lattice_code(&LatticeWindow::new(DEFAULT_L, DEFAULT_K)?),
        "random" => Ok(random_covariant_code(&cfg.group.build()?, cfg.n, cfg.seed, cfg.budget)?.0),
        other => Err(Error::Config(format!("unknown code {other:?} (expected one of {})", SHIPPED_CODES.join(", ")))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::qutrit_base_code;
    use crate::codes::serialize::write_code;
    use crate::experiments::config::ExperimentKind;
    use crate::hilbert::{DenseKet, ModeSpace};

    fn cfg() -> ExperimentConfig {
        ExperimentConfig::new(ExperimentKind::Demo(crate::experiments::DemoKind::U1))
    }

    #[test]
    fn verify_qutrit_file() {
        let text = write_code(&qutrit_base_code().unwrap()).unwrap();
        let r = run_verify(&cfg(), &text).unwrap();
        assert!(r.all_pass(), "{}", r.to_text());
        assert_eq!(r.checks.len(), 4);
    }

    #[test]
    fn shipped_codes_round_trip_through_files() {
        let c = cfg();
        for name in SHIPPED_CODES {
            let code = shipped_code(name, &c).unwrap();
            let text = write_code(&code).unwrap();
            let back = read_code(&text).unwrap();
            assert_eq!(write_code(&back).unwrap(), text, "{name}");
        }
        assert!(shipped_code("nope", &c).is_err());
    }

    #[test]
    fn encode_basis_state() {
        let code = write_code(&qutrit_base_code().unwrap()).unwrap();
        let state = write_state(&DenseKet::basis(ModeSpace::new(vec![3]).unwrap(), 1).unwrap());
        let out = run_encode(&cfg(), &code, &state).unwrap();
        assert!(out.starts_with("# version: "));
        let ket = read_state(&out).unwrap();
        assert_eq!(ket.space().dims(), &[3, 3, 3]);
        // |1⟩ ↦ (|012⟩ + |120⟩ + |201⟩)/√3
        let idx = ket.space().index_of(&[0, 1, 2]);
        assert!((ket.amplitudes()[idx].re - 1.0 / 3f64.sqrt()).abs() < 1e-15);
    }
}
