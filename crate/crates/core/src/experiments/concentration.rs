//! Sampling random covariant codes and comparing the spread of the
//! reference/code-mode marginal with recovery fidelity.

use rayon::prelude::*;

use super::config::ExperimentConfig;
use crate::codes::serialize::format_f64;
use crate::codes::{random_covariant_code, Code, RandomCodeDiagnostics};
use crate::error::{Error, Result};
use crate::groups::FiniteGroup;
use crate::hilbert::{operator_norm, CMatrix, C64};
use crate::rng::derive_seed;
use crate::verify::{fworst_estimate, fworst_lower_bound, FidelityMethod, VerificationReport};

/// Accuracy levels of the deviation-to-fidelity implication rows.
pub const IMPLICATION_EPSILONS: [f64; 5] = [0.05, 0.1, 0.2, 0.5, 1.0];
/// Deviation levels of the probe comparison rows.
pub const PROBE_DELTAS: [f64; 4] = [0.25, 0.5, 0.75, 1.0];
/// Fresh seeds tried when a sample's `E†E` is near-singular.
const RESAMPLE_ATTEMPTS: u64 = 8;

/// Outcome of `‖Ψ₀₁ − τ₀₁‖ ≤ ε/(3d²) ⇒ F_worst ≥ 1 − ε`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    PremiseFalse,
    Holds,
    Violated,
}

impl Verdict {
    pub fn tag(self) -> &'static str {
        match self {
            Verdict::PremiseFalse => "premise-false",
            Verdict::Holds => "holds",
            Verdict::Violated => "violated",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConcentrationRecord {
    pub index: usize,
    /// Seed of the code actually used (a resampled one after a singular draw).
    pub seed: u64,
    pub d: usize,
    pub n: usize,
    /// `‖Ψ₀₁ − τ₀₁‖_∞`.
    pub deviation: f64,
    pub psi0_min: f64,
    pub psi0_max: f64,
    pub lower_bound: f64,
    pub fworst: f64,
    pub fworst_method: FidelityMethod,
    /// One verdict per entry of [`IMPLICATION_EPSILONS`].
    pub implication: Vec<Verdict>,
    /// `|tr σ (Ψ₀₁ − τ₀₁)|` for each probe of [`probe_names`].
    pub probes: Vec<f64>,
}

/// Probe states on (reference, code mode 0): every basis state `|ab⟩`
/// followed by the maximally entangled state.
pub fn probe_names(d: usize) -> Vec<String> {
    let mut v: Vec<String> = (0..d * d).map(|i| format!("basis_{}_{}", i / d, i % d)).collect();
    v.push("max_entangled".into());
    v
}

fn probe_deviations(diag: &RandomCodeDiagnostics) -> Vec<f64> {
    let d = diag.d();
    let dd = d * d;
    let m = diag.psi01.matrix();
    let tau = 1.0 / dd as f64;
    let mut v: Vec<f64> = (0..dd).map(|i| (m[(i, i)].re - tau).abs()).collect();
    // ⟨Φ|Ψ₀₁|Φ⟩ with |Φ⟩ = Σ_a |aa⟩/√d
    let mut bell = C64::new(0.0, 0.0);
    for a in 0..d {
        for b in 0..d {
            bell += m[(a * d + a, b * d + b)];
        }
    }
    v.push((bell.re / d as f64 - tau).abs());
    v
}

/// `1 − d^{(9−2n)/8}`: the fidelity level of the concentration statement.
pub fn concentration_threshold(d: usize, n: usize) -> f64 {
    1.0 - (d as f64).powf((9.0 - 2.0 * n as f64) / 8.0)
}

/// `exp(−(d²/216)[d^{(2n−8)/4} − 432 ln(30 d^{(7+2n)/8})])`, the bound on
/// `P(F_worst < threshold)`. Exceeds 1 at every small size.
pub fn concentration_bound(d: usize, n: usize) -> f64 {
    let d = d as f64;
    let n = n as f64;
    let bracket = d.powf((2.0 * n - 8.0) / 4.0) - 432.0 * (30.0 * d.powf((7.0 + 2.0 * n) / 8.0)).ln();
    (-(d * d / 216.0) * bracket).exp()
}

/// `exp(−d^{n−2} δ² / 6)`, the bound on `P(|tr σ(Ψ₀₁ − τ₀₁)| ≥ δ/d²)`.
pub fn probe_bound(d: usize, n: usize, delta: f64) -> f64 {
    (-(d as f64).powi(n as i32 - 2) * delta * delta / 6.0).exp()
}

fn sample_code(group: &FiniteGroup, n: usize, seed: u64, budget: usize) -> Result<(u64, Code, RandomCodeDiagnostics)> {
    let mut last = None;
    for attempt in 0..RESAMPLE_ATTEMPTS {
        let s = if attempt == 0 { seed } else { derive_seed(seed, attempt) };
        match random_covariant_code(group, n, s, budget) {
            Ok((code, diag)) => return Ok((s, code, diag)),
            Err(e @ Error::NearSingular(_)) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

/// One sample: code seed `derive_seed(master, index)`.
pub fn concentration_sample(
    group: &FiniteGroup,
    n: usize,
    master: u64,
    index: usize,
    budget: usize,
    restarts: usize,
    implication_slack: f64,
) -> Result<ConcentrationRecord> {
    let (seed, code, diag) = sample_code(group, n, derive_seed(master, index as u64), budget)?;
    let d = diag.d();
    let tau = CMatrix::identity(d * d, d * d) / C64::new((d * d) as f64, 0.0);
    let deviation = operator_norm(&(diag.psi01.matrix() - tau));
    let est = fworst_estimate(&code, 0, restarts, derive_seed(seed, 1))?;
    let lower_bound = fworst_lower_bound(&diag)?;
    let implication = IMPLICATION_EPSILONS
        .iter()
        .map(|&eps| {
            if deviation > eps / (3.0 * (d * d) as f64) {
                Verdict::PremiseFalse
            } else if est.value >= 1.0 - eps - implication_slack {
                Verdict::Holds
            } else {
                Verdict::Violated
            }
        })
        .collect();
    Ok(ConcentrationRecord {
        index,
        seed,
        d,
        n,
        deviation,
        psi0_min: diag.psi0_spectrum[0],
        psi0_max: *diag.psi0_spectrum.last().expect("nonempty spectrum"),
        lower_bound,
        fworst: est.value,
        fworst_method: est.method,
        implication,
        probes: probe_deviations(&diag),
    })
}

#[derive(Clone, Debug)]
pub struct ConcentrationRun {
    pub config: Vec<(String, String)>,
    pub d: usize,
    pub n: usize,
    pub records: Vec<ConcentrationRecord>,
    pub summary: VerificationReport,
}

/// Mean, sample standard deviation and standard error.
pub fn mean_sd_se(xs: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt(), var.sqrt() / n.sqrt())
}

pub fn run_concentration(cfg: &ExperimentConfig) -> Result<ConcentrationRun> {
    cfg.validate()?;
    let group = cfg.group.build()?;
    let records: Vec<ConcentrationRecord> = (0..cfg.samples)
        .into_par_iter()
        .map(|i| concentration_sample(&group, cfg.n, cfg.seed, i, cfg.budget, cfg.restarts, cfg.tol.implication))
        .collect::<Result<_>>()?;
    let d = group.order();
    let summary = summarize(cfg, d, &records);
    Ok(ConcentrationRun { config: cfg.echo(), d, n: cfg.n, records, summary })
}

fn summarize(cfg: &ExperimentConfig, d: usize, records: &[ConcentrationRecord]) -> VerificationReport {
    let n = cfg.n;
    let total = records.len() as f64;
    let mut r =
        VerificationReport::new(format!("concentration d={d} n={n} samples={}", records.len())).with_config(cfg.echo());
    let devs: Vec<f64> = records.iter().map(|x| x.deviation).collect();
    let (mean, sd, se) = mean_sd_se(&devs);
    r.value("deviation.mean", mean);
    r.value("deviation.sd", sd);
    r.value("deviation.se", se);
    let fw: Vec<f64> = records.iter().map(|x| x.fworst).collect();
    r.value("fworst.mean", mean_sd_se(&fw).0);
    r.value("fworst.min", fw.iter().copied().fold(f64::INFINITY, f64::min));
    r.value("lower_bound.mean", mean_sd_se(&records.iter().map(|x| x.lower_bound).collect::<Vec<_>>()).0);
    r.value("psi0.min", records.iter().map(|x| x.psi0_min).fold(f64::INFINITY, f64::min));

    for (k, eps) in IMPLICATION_EPSILONS.iter().enumerate() {
        let applicable = records.iter().filter(|x| x.implication[k] != Verdict::PremiseFalse).count();
        let violations = records.iter().filter(|x| x.implication[k] == Verdict::Violated).count();
        r.value(format!("implication.eps={eps}.premise_true"), applicable as f64);
        r.at_most(format!("implication.eps={eps}.violations"), violations as f64, 0.0, Some(cfg.seed));
    }
    let gap = records.iter().map(|x| x.lower_bound - x.fworst).fold(f64::NEG_INFINITY, f64::max);
    r.at_most("lower_bound_minus_fworst.max", gap, cfg.tol.bound, Some(cfg.seed));

    let threshold = concentration_threshold(d, n);
    let bound = concentration_bound(d, n);
    let freq = records.iter().filter(|x| x.fworst < threshold).count() as f64 / total;
    r.value("concentration.threshold", threshold);
    r.value("concentration.bound", bound);
    r.value("concentration.frequency", freq);
    if bound >= 1.0 {
        r.note("concentration bound: vacuous at this scale");
    } else {
        r.at_most("concentration.frequency", freq, bound, Some(cfg.seed));
    }

    let names = probe_names(d);
    for &delta in &PROBE_DELTAS {
        let level = delta / (d * d) as f64;
        let (worst, name) = (0..names.len())
            .map(|p| (records.iter().filter(|x| x.probes[p] >= level).count() as f64 / total, p))
            .fold((f64::NEG_INFINITY, 0), |acc, v| if v.0 > acc.0 { v } else { acc });
        let b = probe_bound(d, n, delta);
        r.value(format!("probe.delta={delta}.bound"), b);
        r.note(format!("probe delta={delta}: largest frequency from {}", names[name]));
        if b >= 1.0 {
            r.value(format!("probe.delta={delta}.frequency"), worst);
            r.note(format!("probe bound delta={delta}: vacuous at this scale"));
        } else {
            r.at_most(format!("probe.delta={delta}.frequency"), worst, b, Some(cfg.seed));
        }
    }
    r
}

impl ConcentrationRun {
    /// Per-sample records after the config echo.
    pub fn records_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> =
            ["index", "seed", "d", "n", "deviation", "psi0_min", "psi0_max", "lower_bound", "fworst", "fworst_method"]
                .iter()
                .map(|s| s.to_string())
                .collect();
        header.extend(IMPLICATION_EPSILONS.iter().map(|e| format!("implication_eps_{e}")));
        header.extend(probe_names(self.d).into_iter().map(|p| format!("probe_{p}")));
        w.write_record(&header)?;
        for x in &self.records {
            let mut row = vec![
                x.index.to_string(),
                x.seed.to_string(),
                x.d.to_string(),
                x.n.to_string(),
                format_f64(x.deviation),
                format_f64(x.psi0_min),
                format_f64(x.psi0_max),
                format_f64(x.lower_bound),
                format_f64(x.fworst),
                x.fworst_method.tag().to_string(),
            ];
            row.extend(x.implication.iter().map(|v| v.tag().to_string()));
            row.extend(x.probes.iter().map(|&p| format_f64(p)));
            w.write_record(&row)?;
        }
        let body = String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("utf-8 csv");
        let echo: String = self.config.iter().map(|(k, v)| format!("# {k}: {v}\n")).collect();
        Ok(format!("{echo}{body}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::{ExperimentKind, GroupSpec};

    #[test]
    fn bounds_are_vacuous_at_desk_scale() {
        for n in 3..=12 {
            assert!(concentration_bound(2, n) > 1.0);
        }
        assert!((probe_bound(2, 5, 1.0) - (-8.0f64 / 6.0).exp()).abs() < 1e-15);
        assert!((concentration_threshold(2, 5) - (1.0 - 2f64.powf(-1.0 / 8.0))).abs() < 1e-15);
    }

    #[test]
    fn trivial_group_is_exact() {
        let g = FiniteGroup::trivial();
        let r = concentration_sample(&g, 4, 3, 0, 4096, 2, 1e-6).unwrap();
        assert_eq!(r.deviation, 0.0);
        assert!((r.fworst - 1.0).abs() < 1e-12);
        assert!(r.implication.iter().all(|&v| v == Verdict::Holds));
    }

    #[test]
    fn small_run_is_reproducible_and_well_formed() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::Concentration);
        cfg.group = GroupSpec::Cyclic(2);
        cfg.n = 4;
        cfg.samples = 6;
        cfg.restarts = 4;
        let a = run_concentration(&cfg).unwrap();
        let b = run_concentration(&cfg).unwrap();
        let csv = a.records_csv().unwrap();
        assert_eq!(csv, b.records_csv().unwrap());
        assert_eq!(a.summary.to_text(), b.summary.to_text());
        assert!(csv.starts_with("# version: covqec "));
        assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 7);
        for r in &a.records {
            assert!(r.deviation.is_finite() && r.fworst.is_finite() && r.lower_bound.is_finite());
            assert!(r.lower_bound <= r.fworst + 1e-8);
            assert_eq!(r.probes.len(), 5);
        }
    }

    #[test]
    fn probe_deviations_match_direct_traces() {
        let g = FiniteGroup::cyclic(3).unwrap();
        let (_, diag) = random_covariant_code(&g, 3, 4, 4096).unwrap();
        let v = probe_deviations(&diag);
        let phi = crate::hilbert::CVector::from_fn(9, |i, _| {
            if i / 3 == i % 3 {
                C64::new(1.0 / 3f64.sqrt(), 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let direct = (phi.dotc(&(diag.psi01.matrix() * &phi)).re - 1.0 / 9.0).abs();
        assert!((v[9] - direct).abs() < 1e-14);
    }
}
