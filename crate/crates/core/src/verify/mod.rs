//! Checks on codes: covariance, Knill–Laflamme erasure conditions, recovery
//! pipelines, the closed-form recovery of the random code and its
//! worst-case fidelity bounds.

mod report;

pub use report::{Check, FidelityEstimate, FidelityMethod, Relation, VerificationReport};

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::channels::{choi_distance, ensemble_fidelity_pure};
use crate::codes::{erased_kraus, invariant_projector, Code, RandomCodeDiagnostics, Symmetry, SINGULAR_CUTOFF};
use crate::error::{Error, Result};
use crate::groups::{conjugate_channel, total_charges, Representation};
use crate::hilbert::{
    haar_ket, hermitian_eigen, max_abs, operator_norm, psd_func, CMatrix, DenseKet, DenseOperator, ModeSpace, PsdFn,
    C64,
};
use crate::rng::{derive_seed, seeded_rng};

/// Encoder entries at or below this magnitude count as structural zeros in
/// the charge-conservation test.
pub const CHARGE_ENTRY_CUTOFF: f64 = 1e-14;

/// Covariance defect of a code.
///
/// Finite groups: `max_g` Choi distance between `U_out(g) E(U_in(g)† · U_in(g)) U_out(g)†`
/// and `E`. U(1) charges: largest `|Σ q_out − Σ q_in|` over nonzero encoder
/// entries (an integer, so exact).
pub fn covariance_residual(code: &Code) -> Result<f64> {
    match code.symmetry() {
        Symmetry::None => Err(Error::NoSymmetry),
        Symmetry::Finite { rep_in, rep_out } => finite_covariance_residual(code, rep_in, rep_out),
        Symmetry::U1 { charges_in, charges_out } => {
            let qin = total_charges(charges_in);
            let qout = total_charges(charges_out);
            let mut worst = 0i64;
            for k in code.encoder_kraus()? {
                for c in 0..k.ncols() {
                    for r in 0..k.nrows() {
                        if k[(r, c)].norm() > CHARGE_ENTRY_CUTOFF {
                            worst = worst.max((qout[r] - qin[c]).abs());
                        }
                    }
                }
            }
            Ok(worst as f64)
        }
    }
}

/// Finite-group covariance residual under explicit representations.
pub fn finite_covariance_residual(code: &Code, rep_in: &Representation, rep_out: &Representation) -> Result<f64> {
    let enc = code.encoder_channel()?;
    let group = rep_in.group();
    let per: Vec<f64> = group
        .elements()
        .into_par_iter()
        .map(|g| conjugate_channel(&enc, rep_in, rep_out, g).map(|c| choi_distance(&c, &enc)))
        .collect::<Result<_>>()?;
    Ok(per.into_iter().fold(0.0, f64::max))
}

/// Generalized Gell-Mann basis of `d×d` Hermitian matrices, identity first,
/// as sparse `(row, col, value)` lists.
pub fn gell_mann(d: usize) -> Vec<Vec<(usize, usize, C64)>> {
    let mut out = vec![(0..d).map(|i| (i, i, C64::new(1.0, 0.0))).collect::<Vec<_>>()];
    for k in 0..d {
        for l in k + 1..d {
            out.push(vec![(k, l, C64::new(1.0, 0.0)), (l, k, C64::new(1.0, 0.0))]);
            out.push(vec![(k, l, C64::new(0.0, -1.0)), (l, k, C64::new(0.0, 1.0))]);
        }
    }
    for l in 1..d {
        let s = (2.0 / (l * (l + 1)) as f64).sqrt();
        let mut m: Vec<_> = (0..l).map(|i| (i, i, C64::new(s, 0.0))).collect();
        m.push((l, l, C64::new(-s * l as f64, 0.0)));
        out.push(m);
    }
    out
}

/// Dense form of a sparse basis element.
pub fn sparse_to_dense(d: usize, entries: &[(usize, usize, C64)]) -> CMatrix {
    let mut m = CMatrix::zeros(d, d);
    for &(r, c, v) in entries {
        m[(r, c)] += v;
    }
    m
}

/// `K_a† (A ⊗ I) K_b − (tr/d_in) I` for every Kraus pair and every Gell-Mann
/// `A` on mode `j`, passed to `visit`.
fn kl_blocks(kraus: &[CMatrix], space_out: &ModeSpace, j: usize, mut visit: impl FnMut(CMatrix)) -> Result<()> {
    let d = space_out.dim(j);
    let pieces = erased_kraus(kraus, space_out, j)?;
    let din = kraus.first().map_or(0, |k| k.ncols());
    let basis = gell_mann(d);
    let nk = kraus.len();
    for a in 0..nk {
        for b in 0..nk {
            let mut prod = vec![CMatrix::zeros(0, 0); d * d];
            for p in 0..d {
                let lhs = pieces[a * d + p].adjoint();
                for q in 0..d {
                    prod[p * d + q] = &lhs * &pieces[b * d + q];
                }
            }
            for elem in &basis {
                let mut m = CMatrix::zeros(din, din);
                for &(p, q, v) in elem {
                    m += &prod[p * d + q] * v;
                }
                let c = m.trace() / C64::new(din as f64, 0.0);
                for i in 0..din {
                    m[(i, i)] -= c;
                }
                visit(m);
            }
        }
    }
    Ok(())
}

/// Knill–Laflamme residual for erasure of mode `j` of an encoder given by
/// Kraus operators: the largest operator norm of the traceless part of
/// `K_a† (A ⊗ I) K_b` over Kraus pairs and a Gell-Mann basis on mode `j`.
/// Zero iff the erasure is perfectly correctable.
pub fn kl_residual(kraus: &[CMatrix], space_out: &ModeSpace, j: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    kl_blocks(kraus, space_out, j, |m| worst = worst.max(operator_norm(&m)))?;
    Ok(worst)
}

/// Real and imaginary parts of every traceless block, concatenated over
/// `modes`; its squared norm is a smooth KL cost.
pub fn kl_residual_vector(kraus: &[CMatrix], space_out: &ModeSpace, modes: &[usize]) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for &j in modes {
        kl_blocks(kraus, space_out, j, |m| {
            for z in m.iter() {
                out.push(z.re);
                out.push(z.im);
            }
        })?;
    }
    Ok(out)
}

pub fn kl_erasure_check(code: &Code, j: usize) -> Result<f64> {
    kl_residual(&canonical_kraus(&code.encoder_kraus()?), code.space_out(), j)
}

/// An equivalent Kraus family with at most `rank` operators (eigenvectors of
/// the Gram matrix `tr(K_a† K_b)`).
pub fn canonical_kraus(kraus: &[CMatrix]) -> Vec<CMatrix> {
    if kraus.len() <= 1 {
        return kraus.to_vec();
    }
    let n = kraus.len();
    let gram = CMatrix::from_fn(n, n, |a, b| kraus[a].dotc(&kraus[b]));
    let (vals, vecs) = hermitian_eigen(&gram);
    let top = vals.last().copied().unwrap_or(0.0);
    let mut out: Vec<CMatrix> = Vec::new();
    for (i, &l) in vals.iter().enumerate().rev() {
        if l <= 1e-14 * top.max(1e-300) {
            continue;
        }
        let mut k = CMatrix::zeros(kraus[0].nrows(), kraus[0].ncols());
        for (a, ka) in kraus.iter().enumerate() {
            k += ka * vecs[(a, i)];
        }
        out.push(k);
    }
    out
}

/// Smallest recovery fidelity over `inputs` for erasure of mode `j`.
pub fn recovery_pipeline_check(code: &Code, j: usize, inputs: &[DenseKet]) -> Result<f64> {
    let pipe = code.pipeline(j)?;
    let fids: Vec<f64> = inputs
        .par_iter()
        .map(|k| pipe.apply_ket(k).map(|out| ensemble_fidelity_pure(k, &out)))
        .collect::<Result<_>>()?;
    Ok(fids.into_iter().fold(1.0, f64::min))
}

/// Spread `max − min` of `tr(T ρ_i)` over `inputs`, where `ρ_i` is the
/// marginal of the encoded input on mode `i`; maximized over the given
/// `(mode, T)` pairs.
pub fn alpha_independence_check(code: &Code, generators: &[(usize, CMatrix)], inputs: &[DenseKet]) -> Result<f64> {
    let enc = code.encoder();
    let encoded: Vec<Vec<DenseKet>> = inputs.par_iter().map(|k| enc.apply_ket(k)).collect::<Result<_>>()?;
    let mut marginals: BTreeMap<usize, Vec<CMatrix>> = BTreeMap::new();
    let mut worst = 0.0f64;
    for (mode, t) in generators {
        if !marginals.contains_key(mode) {
            let ms =
                encoded.iter().map(|ens| ensemble_marginal(ens, code.space_out(), *mode)).collect::<Result<_>>()?;
            marginals.insert(*mode, ms);
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for m in &marginals[mode] {
            // tr(T m) without the product
            let v: f64 = t.iter().zip(m.transpose().iter()).map(|(a, b)| (a * b).re).sum();
            lo = lo.min(v);
            hi = hi.max(v);
        }
        worst = worst.max(hi - lo);
    }
    Ok(worst)
}

/// Reduced density matrix of an ensemble on one mode, without forming the
/// full density operator.
pub fn ensemble_marginal(ensemble: &[DenseKet], space: &ModeSpace, mode: usize) -> Result<CMatrix> {
    space.check_mode(mode)?;
    let d = space.dim(mode);
    let left: usize = space.dims()[..mode].iter().product();
    let right: usize = space.dims()[mode + 1..].iter().product();
    let mut out = CMatrix::zeros(d, d);
    for k in ensemble {
        let a = k.amplitudes();
        let m = CMatrix::from_fn(d, left * right, |p, c| {
            let (l, r) = (c / right, c % right);
            a[(l * d + p) * right + r]
        });
        out += &m * m.adjoint();
    }
    Ok(out)
}

/// Diagonal momentum operator of a U(1) mode (its charges).
pub fn charge_operator(charges: &[i64]) -> CMatrix {
    CMatrix::from_diagonal(&crate::hilbert::CVector::from_iterator(
        charges.len(),
        charges.iter().map(|&q| C64::new(q as f64, 0.0)),
    ))
}

fn require_invertible(psi0: &DenseOperator) -> Result<()> {
    let (vals, _) = hermitian_eigen(psi0.matrix());
    let (lo, hi) = (vals[0], *vals.last().expect("nonempty"));
    if hi <= 0.0 || lo < SINGULAR_CUTOFF * hi {
        return Err(Error::NearSingular(lo / hi.max(f64::MIN_POSITIVE)));
    }
    Ok(())
}

/// Closed-form output of encode, erase code mode 0, decode:
/// `tr₁( √(Ψ₀₁ᵀ) ((Ψ₀ᵀ)^{-1/2} ρ (Ψ₀ᵀ)^{-1/2} ⊗ I) √(Ψ₀₁ᵀ) )`, transposes in the
/// computational basis.
pub fn closed_form_recovery(diag: &RandomCodeDiagnostics, rho: &DenseOperator) -> Result<DenseOperator> {
    closed_form_recovery_for(diag, 0, rho)
}

/// [`closed_form_recovery`] for erasure of code mode `j`.
pub fn closed_form_recovery_for(diag: &RandomCodeDiagnostics, j: usize, rho: &DenseOperator) -> Result<DenseOperator> {
    require_invertible(&diag.psi0)?;
    let pair = if j == 0 { diag.psi01.clone() } else { diag.pair_marginal(j)? };
    let s = psd_func(&pair.transpose(), PsdFn::Sqrt, 0.0)?;
    let b = psd_func(&diag.psi0.transpose(), PsdFn::InvSqrt, 0.0)?;
    let q = b.matrix() * rho.matrix() * b.matrix();
    let d = diag.d();
    let inner = q.kronecker(&CMatrix::identity(d, d));
    let full = s.matrix() * inner * s.matrix();
    DenseOperator::on(pair.space_in().clone(), full)?.partial_trace(&[0])
}

/// `tr₁(√(Ψ₀₁ᵀ)) (Ψ₀ᵀ)^{-1/2} / √d`: `|⟨κ|A|κ⟩|` bounds the recovery
/// fidelity of `|κ⟩` from below for the Schmidt decoder. Its numerical
/// range is the complex conjugate of that of `tr₁(√Ψ₀₁) Ψ₀^{-1/2} / √d`.
pub fn fidelity_bound_operator(diag: &RandomCodeDiagnostics) -> Result<CMatrix> {
    require_invertible(&diag.psi0)?;
    let s = psd_func(&diag.psi01.transpose(), PsdFn::Sqrt, 0.0)?;
    let b = psd_func(&diag.psi0.transpose(), PsdFn::InvSqrt, 0.0)?;
    let c = s.partial_trace(&[0])?;
    Ok(c.matrix() * b.matrix() / C64::new((diag.d() as f64).sqrt(), 0.0))
}

/// Lower bound on `min_κ |⟨κ|A|κ⟩|` for [`fidelity_bound_operator`], clamped to
/// `[0, 1]`.
pub fn fworst_lower_bound(diag: &RandomCodeDiagnostics) -> Result<f64> {
    Ok(numerical_range_distance(&fidelity_bound_operator(diag)?).clamp(0.0, 1.0))
}

/// `max_θ λ_min((e^{iθ}A + e^{-iθ}A†)/2)` over `θ ∈ [0, 2π)`: the distance
/// of the origin from the numerical range of `A` when positive, which
/// bounds `|⟨κ|A|κ⟩|` from below. Negative when 0 is in the range.
/// Evaluated on a 64-point grid and refined by golden-section search around
/// the best grid point.
pub fn numerical_range_distance(a: &CMatrix) -> f64 {
    let f = |theta: f64| -> f64 {
        let m = a * C64::from_polar(1.0, theta);
        let h = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        hermitian_eigen(&h).0[0]
    };
    const GRID: usize = 64;
    let step = std::f64::consts::TAU / GRID as f64;
    let (best_i, _) =
        (0..GRID)
            .map(|i| (i, f(i as f64 * step)))
            .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    let (mut lo, mut hi) = ((best_i as f64 - 1.0) * step, (best_i as f64 + 1.0) * step);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut x1, mut x2) = (hi - g * (hi - lo), lo + g * (hi - lo));
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..60 {
        if f1 > f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    f1.max(f2).max(f(best_i as f64 * step))
}

/// Residuals of the random-code identities: invariance of `Ψ`, `tr_i Π = I`
/// for every mode, and `E†E = d Ψ₀ᵀ`.
pub struct RandomCodeIdentities {
    pub invariance: f64,
    pub projector_marginals: f64,
    pub gram: f64,
}

pub fn random_code_identities(diag: &RandomCodeDiagnostics) -> Result<RandomCodeIdentities> {
    let d = diag.d();
    let rep = Representation::power(&Representation::regular(&diag.group), diag.n + 1)?;
    let mut invariance = 0.0f64;
    for g in diag.group.elements() {
        let moved = rep.apply(g, &diag.psi)?;
        invariance =
            invariance.max((moved.amplitudes() - diag.psi.amplitudes()).iter().fold(0.0, |a: f64, z| a.max(z.norm())));
    }
    let p = invariant_projector(&diag.group, diag.n)?;
    let n_rest = diag.n;
    let id = CMatrix::identity(d.pow(n_rest as u32), d.pow(n_rest as u32));
    let mut projector_marginals = 0.0f64;
    for i in 0..=diag.n {
        let keep: Vec<usize> = (0..=diag.n).filter(|&m| m != i).collect();
        let r = p.partial_trace(&keep)?;
        projector_marginals = projector_marginals.max(max_abs(&(r.matrix() - &id)));
    }
    let e = diag.e_raw.matrix();
    let gram = max_abs(&(e.adjoint() * e - diag.psi0.matrix().transpose() * C64::new(d as f64, 0.0)));
    Ok(RandomCodeIdentities { invariance, projector_marginals, gram })
}

/// Default number of restarts of [`fworst_estimate`].
pub const FWORST_RESTARTS: usize = 32;
/// Haar samples that floor the multistart minimum.
pub const FWORST_HAAR_SAMPLES: usize = 10_000;
const FWORST_MAX_ITERS: usize = 500;
const FWORST_STOP: f64 = 1e-12;

/// Minimum recovery fidelity over pure inputs for erasure of mode `j`.
///
/// `F(κ)² = Σ_k |⟨κ|R_k|κ⟩|²` with `R_k` the Kraus operators of the whole
/// encode-erase-decode channel. Each restart starts from a Haar-random
/// `κ` and runs projected gradient descent on the unit sphere with Armijo
/// backtracking until the improvement drops below `1e-12`; the result is
/// also floored by [`FWORST_HAAR_SAMPLES`] Haar samples.
pub fn fworst_estimate(code: &Code, j: usize, restarts: usize, seed: u64) -> Result<FidelityEstimate> {
    let kraus = canonical_kraus(&code.pipeline(j)?.kraus()?);
    fworst_from_kraus(&kraus, code.space_in(), restarts, seed)
}

/// [`fworst_estimate`] for an explicit square Kraus family.
pub fn fworst_from_kraus(kraus: &[CMatrix], space: &ModeSpace, restarts: usize, seed: u64) -> Result<FidelityEstimate> {
    let n = space.total_dim();
    if kraus.iter().any(|k| k.nrows() != n || k.ncols() != n) {
        return Err(Error::DimensionMismatch("recovery Kraus operators must be square on the input".into()));
    }
    let runs: Vec<(f64, usize)> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = seeded_rng(derive_seed(seed, r as u64));
            let k0 = haar_ket(space.clone(), &mut rng).into_amplitudes();
            descend(kraus, k0)
        })
        .collect();
    let iterations = runs.iter().map(|r| r.1).sum();
    let best_descent = runs.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let haar_floor = haar_minimum(kraus, space, FWORST_HAAR_SAMPLES, derive_seed(seed, u64::MAX));
    let value = best_descent.min(haar_floor).max(0.0).sqrt().min(1.0);
    Ok(FidelityEstimate {
        value,
        method: FidelityMethod::MultistartMinimization,
        restarts,
        iterations,
        haar_floor: haar_floor.max(0.0).sqrt().min(1.0),
    })
}

fn squared_fidelity(kraus: &[CMatrix], k: &crate::hilbert::CVector) -> f64 {
    kraus.iter().map(|r| k.dotc(&(r * k)).norm_sqr()).sum()
}

fn haar_minimum(kraus: &[CMatrix], space: &ModeSpace, samples: usize, seed: u64) -> f64 {
    let chunks = 16usize;
    let per = samples.div_ceil(chunks);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = seeded_rng(derive_seed(seed, c as u64));
            let count = per.min(samples.saturating_sub(c * per));
            (0..count)
                .map(|_| squared_fidelity(kraus, haar_ket(space.clone(), &mut rng).amplitudes()))
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| f64::INFINITY, f64::min)
}

/// Projected gradient descent of `F²` from `k`; returns the final value and
/// iteration count.
fn descend(kraus: &[CMatrix], mut k: crate::hilbert::CVector) -> (f64, usize) {
    let mut f = squared_fidelity(kraus, &k);
    let mut step = 0.5;
    for it in 0..FWORST_MAX_ITERS {
        let mut grad = crate::hilbert::CVector::zeros(k.len());
        for r in kraus {
            let rk = r * &k;
            let z = k.dotc(&rk);
            grad += rk * z.conj() + r.adjoint() * &k * z;
        }
        let radial = k.dotc(&grad).re;
        let tangent = &grad - &k * C64::new(radial, 0.0);
        let gn = tangent.norm_squared();
        if gn < 1e-30 {
            return (f, it);
        }
        let mut t = step;
        let mut accepted = None;
        for _ in 0..50 {
            let trial = (&k - &tangent * C64::new(t, 0.0)).normalize();
            let ft = squared_fidelity(kraus, &trial);
            if ft <= f - 1e-4 * t * gn {
                accepted = Some((trial, ft));
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some((trial, ft)) => {
                let improvement = f - ft;
                k = trial;
                f = ft;
                step = (t * 2.0).min(4.0);
                if improvement < FWORST_STOP {
                    return (f, it + 1);
                }
            }
            None => return (f, it + 1),
        }
    }
    (f, FWORST_MAX_ITERS)
}

/// Haar-random kets on `space`, seeded per index.
pub fn haar_inputs(space: &ModeSpace, count: usize, seed: u64) -> Vec<DenseKet> {
    (0..count).map(|i| haar_ket(space.clone(), &mut seeded_rng(derive_seed(seed, i as u64)))).collect()
}
