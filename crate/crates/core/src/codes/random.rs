//! Random covariant code: a Haar-random state on `n` copies of the regular
//! representation is symmetrized into an invariant state `Ψ` on a reference
//! mode plus `n` code modes, and the reference mode becomes the input.

use super::{Code, Symmetry};
use crate::channels::{Channel, Circuit, Stage};
use crate::error::{Error, Result};
use crate::groups::{FiniteGroup, Representation};
use crate::hilbert::{
    haar_ket, hermitian_eigen, psd_func, schmidt_decompose, CMatrix, DenseKet, DenseOperator, ModeSpace, PsdFn, C64,
};
use crate::rng::seeded_rng;

/// Eigenvalues of `E†E` below this fraction of the largest are rejected.
pub const SINGULAR_CUTOFF: f64 = 1e-10;

/// Intermediate objects of [`random_covariant_code`]. Mode 0 of `psi` is the
/// reference; mode `i + 1` is code mode `i`.
#[derive(Clone, Debug)]
pub struct RandomCodeDiagnostics {
    pub group: FiniteGroup,
    pub n: usize,
    pub seed: u64,
    /// The Haar-random seed state on `n` modes.
    pub phi: DenseKet,
    pub psi: DenseKet,
    /// Reduced state of `psi` on the reference and code mode 0.
    pub psi01: DenseOperator,
    /// Reduced state of `psi` on the reference.
    pub psi0: DenseOperator,
    /// Ascending eigenvalues of `psi0`.
    pub psi0_spectrum: Vec<f64>,
    /// Unnormalized encoder `E`, `E|j⟩ = √d (⟨j| ⊗ I)|Ψ⟩`.
    pub e_raw: DenseOperator,
}

impl RandomCodeDiagnostics {
    pub fn d(&self) -> usize {
        self.group.order()
    }

    /// Reduced state of `psi` on the reference and code mode `j`.
    pub fn pair_marginal(&self, j: usize) -> Result<DenseOperator> {
        self.psi.space().check_mode(j + 1)?;
        self.psi.density().partial_trace(&[0, j + 1])
    }
}

/// Isometry `M|h₁…h_n⟩ = Σ_g |g, gh₁, …, gh_n⟩ / √d` onto the invariant
/// subspace of `n + 1` regular-representation modes.
pub fn invariant_isometry(group: &FiniteGroup, n: usize) -> Result<DenseOperator> {
    let d = group.order();
    let space_in = ModeSpace::uniform(d, n)?;
    let space_out = ModeSpace::uniform(d, n + 1)?;
    let s = C64::new(1.0 / (d as f64).sqrt(), 0.0);
    let mut m = CMatrix::zeros(space_out.total_dim(), space_in.total_dim());
    for h in 0..space_in.total_dim() {
        let digits = space_in.digits(h);
        for g in group.elements() {
            let mut out = Vec::with_capacity(n + 1);
            out.push(g);
            out.extend(digits.iter().map(|&x| group.mul(g, x)));
            m[(space_out.index_of(&out), h)] += s;
        }
    }
    DenseOperator::new(space_out, space_in, m)
}

/// Projector `M M†` onto the invariant subspace.
pub fn invariant_projector(group: &FiniteGroup, n: usize) -> Result<DenseOperator> {
    let m = invariant_isometry(group, n)?;
    let space = m.space_out().clone();
    DenseOperator::on(space, m.matrix() * m.matrix().adjoint())
}

/// Samples the code for `seed`. The encoder is `T = E (E†E)^{-1/2}`; the
/// decoder for code mode `j` is built from the Schmidt form of `Ψ` across
/// (reference, code mode `j`) | (other code modes).
pub fn random_covariant_code(
    group: &FiniteGroup,
    n: usize,
    seed: u64,
    budget: usize,
) -> Result<(Code, RandomCodeDiagnostics)> {
    if n < 3 {
        return Err(Error::Config(format!("random covariant code needs n >= 3, got {n}")));
    }
    let d = group.order();
    let total = d.checked_pow(n as u32).filter(|&t| t <= budget);
    let Some(code_dim) = total else {
        return Err(Error::InstanceTooLarge { dim: d.checked_pow(n as u32).unwrap_or(usize::MAX), budget });
    };
    let mut rng = seeded_rng(seed);
    let phi = haar_ket(ModeSpace::uniform(d, n)?, &mut rng);
    let m = invariant_isometry(group, n)?;
    let psi = m.apply(&phi)?;

    let code_space = ModeSpace::uniform(d, n)?;
    let input = ModeSpace::new(vec![d])?;
    let sd = (d as f64).sqrt();
    let e = CMatrix::from_fn(code_dim, d, |i, j| psi.amplitudes()[j * code_dim + i] * sd);
    let e_raw = DenseOperator::new(code_space.clone(), input.clone(), e)?;

    let gram = DenseOperator::on(input.clone(), e_raw.matrix().adjoint() * e_raw.matrix())?;
    let (vals, _) = hermitian_eigen(gram.matrix());
    let (lo, hi) = (vals[0], vals[d - 1]);
    if hi <= 0.0 || lo < SINGULAR_CUTOFF * hi {
        return Err(Error::NearSingular(lo / hi.max(f64::MIN_POSITIVE)));
    }
    let inv = psd_func(&gram, PsdFn::InvSqrt, 0.0)?;
    let t = DenseOperator::new(code_space, input.clone(), e_raw.matrix() * inv.matrix())?;

    let rho = psi.density();
    let psi0 = rho.partial_trace(&[0])?;
    let psi01 = rho.partial_trace(&[0, 1])?;
    let (psi0_spectrum, _) = hermitian_eigen(psi0.matrix());

    let regular = Representation::regular(group);
    let symmetry = Symmetry::Finite { rep_in: regular.clone(), rep_out: Representation::power(&regular, n)? };
    let mut code = Code::new("random", Circuit::from_channel(Channel::isometry(&t)?), symmetry)?
        .with_param("group_order", d)
        .with_param("n", n)
        .with_seed(seed);
    for j in 0..n {
        code = code.with_decoder(j, schmidt_decoder(&psi, d, n, j)?)?;
    }
    let diag = RandomCodeDiagnostics { group: group.clone(), n, seed, phi, psi, psi01, psi0, psi0_spectrum, e_raw };
    Ok((code, diag))
}

/// Decoder for erasure of code mode `j`. Swapping `Ψ` modes 1 and `j + 1`
/// reduces to the mode-0 case; the surviving modes are reordered to match.
fn schmidt_decoder(psi: &DenseKet, d: usize, n: usize, j: usize) -> Result<Circuit> {
    let mut swap: Vec<usize> = (0..=n).collect();
    swap.swap(1, j + 1);
    let psi_j = psi.permute_modes(&swap)?;
    let rest = ModeSpace::uniform(d, n - 1)?;
    let w = schmidt_unitary(&psi_j, d, n)?;
    let tail = d.pow(n as u32 - 2);
    let kraus: Vec<CMatrix> = (0..tail).map(|m| CMatrix::from_fn(d, w.ncols(), |a, c| w[(a * tail + m, c)])).collect();
    let local = Channel::new(rest.clone(), ModeSpace::new(vec![d])?, kraus)?;
    let mut circuit = Circuit::new(rest);
    if j > 0 {
        let mut order: Vec<usize> = (1..j).collect();
        order.push(0);
        order.extend(j..n - 1);
        circuit = circuit.then(Stage::Permute { order })?;
    }
    circuit.then(Stage::Local { start: 0, channel: local })
}

/// `(U₀₁ᵀ ⊗ I) V` on the `n - 1` surviving modes, where `V|R_k⟩ = |k⟩|0…0⟩`
/// and `U₀₁ᵀ|k⟩ = |L̄_k⟩` for the Schmidt pairs `(L_k, R_k)` of `Ψ`.
fn schmidt_unitary(psi: &DenseKet, d: usize, n: usize) -> Result<CMatrix> {
    let s = schmidt_decompose(psi, &[0, 1])?;
    let dim = d.pow(n as u32 - 1);
    let stride = d.pow(n as u32 - 3);
    let pairs = d * d;
    let mut v = CMatrix::zeros(dim, dim);
    let mut used = vec![false; dim];
    let mut span = CMatrix::zeros(dim, dim);
    for (k, r) in s.right.iter().enumerate().take(pairs) {
        v.set_row(k * stride, &r.amplitudes().adjoint());
        used[k * stride] = true;
        span += r.amplitudes() * r.amplitudes().adjoint();
    }
    let complement = CMatrix::identity(dim, dim) - span;
    let (vals, vecs) = hermitian_eigen(&complement);
    let free = (0..dim).filter(|&i| !used[i]);
    let basis = vals.iter().enumerate().filter(|(_, &l)| l > 0.5).map(|(i, _)| i);
    for (row, col) in free.zip(basis) {
        v.set_row(row, &vecs.column(col).adjoint());
    }
    let mut u01t = CMatrix::zeros(pairs, pairs);
    for (k, l) in s.left.iter().enumerate() {
        u01t.set_column(k, &l.amplitudes().map(|z| z.conj()));
    }
    let u = u01t.kronecker(&CMatrix::identity(stride, stride));
    Ok(u * v)
}
