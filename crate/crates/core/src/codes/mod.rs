//! Code constructions. Every constructor returns a [`Code`]: an encoder
//! circuit, the symmetry it is covariant under, and decoders keyed by the
//! erased output mode (0-based).
//!
//! A decoder for mode `j` acts on the output space with mode `j` removed;
//! [`Code::pipeline`] wires encode, erase-and-fill and decode together.

mod lattice;
mod random;
pub mod serialize;

use std::collections::BTreeMap;
use std::sync::OnceLock;

pub use lattice::{
    branch_projection_fidelity, lattice_decoder_unchecked, lattice_steps, naive_lattice_steps, u1_lattice_code,
    u1_lattice_decoders, unnormalized_gram, validate_lattice_decoder, LatticeDecoderSteps, LatticeMap, LatticeWindow,
    DEFAULT_K, DEFAULT_L,
};
pub use random::{
    invariant_isometry, invariant_projector, random_covariant_code, RandomCodeDiagnostics, SINGULAR_CUTOFF,
};

use crate::channels::{Channel, Circuit, Stage};
use crate::error::{Error, Result};
use crate::groups::{total_charges, ChargeRep, GroupAction, Representation};
use crate::hilbert::{
    hermitian_eigen, max_abs, psd_func, CMatrix, DenseKet, DenseOperator, ModeSpace, PsdFn, C64, ONE,
};

/// Largest total output dimension the tensor-product constructions accept
/// unless told otherwise.
pub const DEFAULT_CODE_BUDGET: usize = 1 << 15;
pub const ISOMETRY_TOL: f64 = 1e-9;

/// Group context of a code. One per code, so the variant size gap is harmless.
#[derive(Clone, Debug, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Symmetry {
    None,
    Finite {
        rep_in: Representation,
        rep_out: Representation,
    },
    /// Per-mode integer charges.
    U1 {
        charges_in: Vec<ChargeRep>,
        charges_out: Vec<ChargeRep>,
    },
}

/// An encoding channel with its symmetry and decoders.
#[derive(Clone, Debug)]
pub struct Code {
    kind: String,
    params: Vec<(String, String)>,
    seed: Option<u64>,
    encoder: Circuit,
    symmetry: Symmetry,
    decoders: BTreeMap<usize, Circuit>,
    normalization: f64,
    channel: OnceLock<Channel>,
}

impl Code {
    pub fn new(kind: impl Into<String>, encoder: Circuit, symmetry: Symmetry) -> Result<Self> {
        match &symmetry {
            Symmetry::None => {}
            Symmetry::Finite { rep_in, rep_out } => {
                if !rep_in.space().same_shape(encoder.space_in()) || !rep_out.space().same_shape(encoder.space_out()) {
                    return Err(Error::DimensionMismatch(format!(
                        "representations on {:?} -> {:?} for a code {:?} -> {:?}",
                        rep_in.space().dims(),
                        rep_out.space().dims(),
                        encoder.space_in().dims(),
                        encoder.space_out().dims()
                    )));
                }
                if rep_in.group() != rep_out.group() {
                    return Err(Error::InvalidRepresentation("input and output reps over different groups".into()));
                }
            }
            Symmetry::U1 { charges_in, charges_out } => {
                let din: Vec<usize> = charges_in.iter().map(|c| c.dim()).collect();
                let dout: Vec<usize> = charges_out.iter().map(|c| c.dim()).collect();
                if din != encoder.space_in().dims() || dout != encoder.space_out().dims() {
                    return Err(Error::DimensionMismatch("charge lists do not match code modes".into()));
                }
            }
        }
        Ok(Self {
            kind: kind.into(),
            params: Vec::new(),
            seed: None,
            encoder,
            symmetry,
            decoders: BTreeMap::new(),
            normalization: 1.0,
            channel: OnceLock::new(),
        })
    }

    /// Code from an isometry matrix.
    pub fn from_isometry(kind: impl Into<String>, iso: &DenseOperator, symmetry: Symmetry) -> Result<Self> {
        if !iso.is_isometry(ISOMETRY_TOL) {
            return Err(Error::InvalidChannel("encoder is not an isometry".into()));
        }
        Self::new(kind, Circuit::from_channel(Channel::isometry(iso)?), symmetry)
    }

    pub fn with_param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.push((key.to_string(), value.to_string()));
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_normalization(mut self, c: f64) -> Self {
        self.normalization = c;
        self
    }

    /// Registers a decoder for erasure of output mode `j`.
    pub fn with_decoder(mut self, j: usize, decoder: Circuit) -> Result<Self> {
        let expect_in = self.space_out().without(j)?;
        if !decoder.space_in().same_shape(&expect_in) || !decoder.space_out().same_shape(self.space_in()) {
            return Err(Error::DimensionMismatch(format!(
                "decoder {:?} -> {:?} for erasure of mode {j} (expected {:?} -> {:?})",
                decoder.space_in().dims(),
                decoder.space_out().dims(),
                expect_in.dims(),
                self.space_in().dims()
            )));
        }
        self.decoders.insert(j, decoder);
        Ok(self)
    }

    pub fn kind(&self) -> &str {
        &self.kind
    }

    pub fn params(&self) -> &[(String, String)] {
        &self.params
    }

    pub fn param(&self, key: &str) -> Option<&str> {
        self.params.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn space_in(&self) -> &ModeSpace {
        self.encoder.space_in()
    }

    pub fn space_out(&self) -> &ModeSpace {
        self.encoder.space_out()
    }

    pub fn symmetry(&self) -> &Symmetry {
        &self.symmetry
    }

    /// `c` in `raw† raw = c I` for the unnormalized construction.
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn encoder(&self) -> &Circuit {
        &self.encoder
    }

    pub fn encoder_kraus(&self) -> Result<Vec<CMatrix>> {
        Ok(self.encoder_channel()?.kraus().to_vec())
    }

    /// The encoder as one Kraus family, computed once.
    pub fn encoder_channel(&self) -> Result<Channel> {
        if let Some(c) = self.channel.get() {
            return Ok(c.clone());
        }
        let c = self.encoder.to_channel()?;
        Ok(self.channel.get_or_init(|| c).clone())
    }

    /// The encoder matrix when the encoder is a single isometry.
    pub fn encoder_isometry(&self) -> Result<Option<DenseOperator>> {
        let k = self.encoder_kraus()?;
        if k.len() != 1 {
            return Ok(None);
        }
        let op = DenseOperator::new(self.space_out().clone(), self.space_in().clone(), k.into_iter().next().unwrap())?;
        Ok(op.is_isometry(ISOMETRY_TOL).then_some(op))
    }

    pub fn decoder(&self, j: usize) -> Result<&Circuit> {
        self.decoders.get(&j).ok_or(Error::MissingDecoder(j))
    }

    pub fn decoded_modes(&self) -> Vec<usize> {
        self.decoders.keys().copied().collect()
    }

    /// Encode, erase-and-fill mode `j`, decode.
    pub fn pipeline(&self, j: usize) -> Result<Circuit> {
        let dec = self.decoder(j)?;
        Ok(self
            .encoder
            .clone()
            .then(Stage::EraseFill { mode: j })?
            .then(Stage::Discard { mode: j })?
            .then_circuit(dec)?
            .simplify())
    }

    /// Encoder followed by erase-and-fill of mode `j`.
    pub fn erased_encoder(&self, j: usize) -> Result<Circuit> {
        self.encoder.clone().then(Stage::EraseFill { mode: j })
    }

    /// Pure encoded input as an ensemble on the output space.
    pub fn encode(&self, ket: &DenseKet) -> Result<Vec<DenseKet>> {
        self.encoder.apply_ket(ket)
    }

    fn into_symmetry(mut self, symmetry: Symmetry) -> Self {
        self.symmetry = symmetry;
        self
    }
}

/// Transpose-channel recovery for the Kraus family `noisy` (noise after
/// encoding) with respect to the maximally mixed input:
/// `R_m = N_m† Ω^{-1/2} / √d_in`, `Ω = Σ N_m N_m† / d_in`, completed on the
/// kernel of `Ω` by `|0⟩⟨u|`.
pub fn transpose_channel_decoder(noisy: &[CMatrix], space_noisy: &ModeSpace, space_in: &ModeSpace) -> Result<Channel> {
    let din = space_in.total_dim();
    let n = space_noisy.total_dim();
    let mut omega = CMatrix::zeros(n, n);
    for k in noisy {
        omega += k * k.adjoint();
    }
    omega /= C64::new(din as f64, 0.0);
    let omega_op = DenseOperator::on(space_noisy.clone(), omega)?;
    let inv = psd_func(&omega_op, PsdFn::InvSqrt, crate::hilbert::DEFAULT_REL_CUTOFF)?;
    let s = C64::new(1.0 / (din as f64).sqrt(), 0.0);
    let mut kraus: Vec<CMatrix> = noisy.iter().map(|k| k.adjoint() * inv.matrix() * s).collect();
    kraus.extend(kernel_completion(&(&inv.matrix().clone() * omega_op.matrix() * inv.matrix()), din));
    Channel::new(space_noisy.clone(), space_in.clone(), kraus)
}

/// Kraus operators `|0⟩⟨u|` over an orthonormal basis `{u}` of the
/// complement of the range of the projector `p`.
fn kernel_completion(p: &CMatrix, dout: usize) -> Vec<CMatrix> {
    let n = p.nrows();
    let comp = CMatrix::identity(n, n) - p;
    let (vals, vecs) = hermitian_eigen(&comp);
    vals.iter()
        .enumerate()
        .filter(|(_, &l)| l > 0.5)
        .map(|(i, _)| {
            let mut k = CMatrix::zeros(dout, n);
            k.set_row(0, &vecs.column(i).adjoint());
            k
        })
        .collect()
}

/// `⟨m|_j V` for every basis value `m` of mode `j`.
pub fn erased_kraus(kraus: &[CMatrix], space_out: &ModeSpace, j: usize) -> Result<Vec<CMatrix>> {
    space_out.check_mode(j)?;
    let din = kraus.first().map_or(0, |k| k.ncols());
    let d = space_out.dim(j);
    let left: usize = space_out.dims()[..j].iter().product();
    let right: usize = space_out.dims()[j + 1..].iter().product();
    let mut out = Vec::with_capacity(kraus.len() * d);
    for k in kraus {
        for m in 0..d {
            out.push(CMatrix::from_fn(left * right, din, |r, col| {
                let (l, rr) = (r / right, r % right);
                k[((l * d + m) * right + rr, col)]
            }));
        }
    }
    Ok(out)
}

/// Recovery channel from the full output space back to the input when
/// nothing was erased (`V†` plus completion for isometries).
pub fn no_erasure_decoder(code: &Code) -> Result<Channel> {
    transpose_channel_decoder(&code.encoder_kraus()?, code.space_out(), code.space_in())
}

/// Adds transpose-channel decoders for every output mode.
pub fn with_transpose_channel_decoders(mut code: Code) -> Result<Code> {
    let kraus = code.encoder_kraus()?;
    for j in 0..code.space_out().num_modes() {
        let rest = code.space_out().without(j)?;
        let noisy = erased_kraus(&kraus, code.space_out(), j)?;
        let dec = transpose_channel_decoder(&noisy, &rest, code.space_in())?;
        code = code.with_decoder(j, Circuit::from_channel(dec))?;
    }
    Ok(code)
}

/// One qutrit into three: `|j⟩ ↦ (1/√3) Σ_k |k, k+j, k+2j⟩` (mod 3).
pub fn qutrit_base_code() -> Result<Code> {
    let space_in = ModeSpace::new(vec![3])?;
    let space_out = ModeSpace::uniform(3, 3)?;
    let s = C64::new(1.0 / 3f64.sqrt(), 0.0);
    let mut v = CMatrix::zeros(27, 3);
    for j in 0..3 {
        for k in 0..3 {
            v[(space_out.index_of(&[k, (k + j) % 3, (k + 2 * j) % 3]), j)] = s;
        }
    }
    let iso = DenseOperator::new(space_out, space_in, v)?;
    with_transpose_channel_decoders(Code::from_isometry("qutrit-base", &iso, Symmetry::None)?)
}

/// One qubit into two: `|j⟩ ↦ (1/√2) Σ_k |k, k+j⟩` (mod 2). Not an erasure
/// code; used as a small block in tensor-product covariance checks.
pub fn qubit_pair_code() -> Result<Code> {
    let space_in = ModeSpace::new(vec![2])?;
    let space_out = ModeSpace::uniform(2, 2)?;
    let s = C64::new(0.5f64.sqrt(), 0.0);
    let mut v = CMatrix::zeros(4, 2);
    for j in 0..2 {
        for k in 0..2 {
            v[(space_out.index_of(&[k, (k + j) % 2]), j)] = s;
        }
    }
    let iso = DenseOperator::new(space_out, space_in, v)?;
    Code::from_isometry("qubit-pair", &iso, Symmetry::None)
}

/// `|x⟩ ↦ |x⟩^{⊗n}` on qubits.
pub fn repetition_code(n: usize) -> Result<Code> {
    let space_out = ModeSpace::uniform(2, n)?;
    let mut v = CMatrix::zeros(space_out.total_dim(), 2);
    v[(0, 0)] = ONE;
    v[(space_out.total_dim() - 1, 1)] = ONE;
    let iso = DenseOperator::new(space_out, ModeSpace::new(vec![2])?, v)?;
    Code::from_isometry("repetition", &iso, Symmetry::None).map(|c| c.with_param("n", n))
}

/// Embeds one mode as the first of `n` modes, the others fixed to `|0⟩`.
pub fn identity_embedding(dim: usize, n: usize) -> Result<Code> {
    let space_out = ModeSpace::uniform(dim, n)?;
    let stride = space_out.total_dim() / dim;
    let mut v = CMatrix::zeros(space_out.total_dim(), dim);
    for x in 0..dim {
        v[(x * stride, x)] = ONE;
    }
    let iso = DenseOperator::new(space_out, ModeSpace::new(vec![dim])?, v)?;
    Code::from_isometry("identity-embedding", &iso, Symmetry::None)
}

/// Decoder for a code given as independent blocks: `blocks[b]` maps the
/// current modes of block `b` to its input modes.
fn product_decoder(space: ModeSpace, blocks: Vec<Channel>) -> Result<Circuit> {
    let mut c = Circuit::new(space);
    let mut start = 0;
    for ch in blocks {
        let k_in = ch.space_out().num_modes();
        c = c.then(Stage::Local { start, channel: ch })?;
        start += k_in;
    }
    Ok(c)
}

/// `base^{⊗|A|}` with factor-permutation representations on inputs and
/// output blocks. Decoders correct one erasure per code, inside the block
/// that contains it, when `base` has a decoder for that position.
pub fn permutation_covariant_code(base: &Code, action: &GroupAction, budget: usize) -> Result<Code> {
    let copies = action.set_size();
    let block_out = base.space_out().total_dim();
    let total = (0..copies).try_fold(1usize, |acc, _| acc.checked_mul(block_out));
    match total {
        Some(t) if t <= budget => {}
        _ => return Err(Error::InstanceTooLarge { dim: total.unwrap_or(usize::MAX), budget }),
    }
    let base_channel = base.encoder_channel()?;
    let space_in = (0..copies).fold(ModeSpace::scalar(), |s, _| s.concat(base.space_in()));
    let k_out = base.space_out().num_modes();
    let mut enc = Circuit::new(ModeSpace::new(space_in.dims().to_vec())?);
    for a in 0..copies {
        enc = enc.then(Stage::Local { start: a * k_out, channel: base_channel.clone() })?;
    }
    let rep_in = Representation::factor_permutation(action.clone(), base.space_in().clone());
    let rep_out = Representation::factor_permutation(action.clone(), base.space_out().clone());
    let mut code = Code::new("permutation", enc, Symmetry::Finite { rep_in, rep_out })?
        .with_param("base", base.kind())
        .with_param("copies", copies)
        .with_param("group_order", action.group().order());
    for (k, v) in base.params() {
        code = code.with_param(&format!("base.{k}"), v);
    }
    if base.decoders.is_empty() {
        return Ok(code);
    }
    let clean = no_erasure_decoder(base)?;
    let space_out = code.space_out().clone();
    for a in 0..copies {
        for t in base.decoded_modes() {
            let inner = base.decoder(t)?.to_channel()?;
            let blocks = (0..copies).map(|b| if b == a { inner.clone() } else { clean.clone() }).collect();
            let rest = space_out.without(a * k_out + t)?;
            code = code.with_decoder(a * k_out + t, product_decoder(rest, blocks)?)?;
        }
    }
    Ok(code)
}

/// Base code with two ancillas recording a group element: Kraus
/// `(U^{⊗n}(g) V U(g)†) ⊗ |g⟩|g⟩ / √|G|`. `local` acts on each base mode
/// (all base modes and the input must share its dimension).
pub fn gyroscope_code(base: &Code, local: &Representation) -> Result<Code> {
    let group = local.group().clone();
    let d = group.order();
    let v =
        base.encoder_isometry()?.ok_or_else(|| Error::InvalidChannel("gyroscope base must be an isometry".into()))?;
    let n = base.space_out().num_modes();
    if local.space().num_modes() != 1
        || !base.space_in().same_shape(local.space())
        || base.space_out().dims().iter().any(|&m| m != local.space().dim(0))
    {
        return Err(Error::DimensionMismatch("local representation does not match base modes".into()));
    }
    let rep_block = Representation::power(local, n)?;
    let regular = crate::groups::Representation::regular(&group);
    let anc = ModeSpace::new(vec![d, d])?;
    let space_out = base.space_out().concat(&anc);
    let space_out = ModeSpace::new(space_out.dims().to_vec())?;
    let w = C64::new(1.0 / (d as f64).sqrt(), 0.0);
    let frame = |g: usize| -> CMatrix { rep_block.apply_columns(g, &local.apply_adjoint_right(g, v.matrix())) };
    let kraus: Vec<CMatrix> = group
        .elements()
        .map(|g| {
            let mut tag = CMatrix::zeros(d * d, 1);
            tag[(g * d + g, 0)] = ONE;
            frame(g).kronecker(&tag) * w
        })
        .collect();
    let enc = Channel::new(base.space_in().clone(), space_out.clone(), kraus)?;
    let rep_out = Representation::tensor(vec![rep_block.clone(), regular.clone(), regular])?;
    let mut code =
        Code::new("gyroscope", Circuit::from_channel(enc), Symmetry::Finite { rep_in: local.clone(), rep_out })?
            .with_param("base", base.kind())
            .with_param("group_order", d);

    // erased code mode: read ancilla n (index n-1 after the discard)
    for j in base.decoded_modes() {
        let inner = base.decoder(j)?.to_channel()?;
        let rest_rep = Representation::power(local, n - 1)?;
        let mut kraus = Vec::new();
        for g in group.elements() {
            for r in inner.kraus() {
                let framed = local.apply_columns(g, &rest_rep.apply_adjoint_right(g, r));
                for a in 0..d {
                    let mut bra = CMatrix::zeros(1, d * d);
                    bra[(0, g * d + a)] = ONE;
                    kraus.push(framed.kronecker(&bra));
                }
            }
        }
        let rest = space_out.without(j)?;
        let dec = Channel::new(rest.clone(), base.space_in().clone(), kraus)?;
        code = code.with_decoder(j, Circuit::from_channel(dec))?;
    }
    // erased ancilla: read the other one
    let clean = no_erasure_decoder(base)?;
    for lost in 0..2 {
        let mut kraus = Vec::new();
        for g in group.elements() {
            for r in clean.kraus() {
                let framed = local.apply_columns(g, &rep_block.apply_adjoint_right(g, r));
                let mut bra = CMatrix::zeros(1, d);
                bra[(0, g)] = ONE;
                kraus.push(framed.kronecker(&bra));
            }
        }
        let rest = space_out.without(n + lost)?;
        let dec = Channel::new(rest, base.space_in().clone(), kraus)?;
        code = code.with_decoder(n + lost, Circuit::from_channel(dec))?;
    }
    Ok(code)
}

/// The group average of a code's encoder under its own representations, or
/// under `reps` when given.
pub fn twirl_code(code: &Code, reps: Option<(&Representation, &Representation)>) -> Result<Code> {
    let (rep_in, rep_out) = match (reps, code.symmetry()) {
        (Some((a, b)), _) => (a.clone(), b.clone()),
        (None, Symmetry::Finite { rep_in, rep_out }) => (rep_in.clone(), rep_out.clone()),
        _ => return Err(Error::NoSymmetry),
    };
    let tw = crate::groups::twirl_channel(&code.encoder_channel()?, &rep_in, &rep_out)?;
    let mut out = Code::new("twirled", Circuit::from_channel(tw), Symmetry::Finite { rep_in, rep_out })?
        .with_param("source", code.kind());
    for (k, v) in code.params() {
        out = out.with_param(&format!("source.{k}"), v);
    }
    Ok(out)
}

/// Replaces the symmetry context of a code.
pub fn with_symmetry(code: Code, symmetry: Symmetry) -> Result<Code> {
    let probe = Code::new(code.kind.clone(), code.encoder.clone(), symmetry.clone())?;
    drop(probe);
    Ok(code.into_symmetry(symmetry))
}

/// Number of real parameters [`u1_covariant_isometry`] expects.
pub fn u1_param_count(charges_in: &ChargeRep, charges_out: &[ChargeRep]) -> Result<usize> {
    let totals = total_charges(charges_out);
    charges_in
        .charges()
        .iter()
        .map(|&q| {
            let s = totals.iter().filter(|&&t| t == q).count();
            if s == 0 {
                Err(Error::EmptySector(vec![q]))
            } else {
                Ok(2 * s)
            }
        })
        .sum()
}

/// Charge-conserving isometry from one input mode into `charges_out`
/// modes. Input basis vector `k` (charge `q`) takes `2·s_q` parameters, the
/// real and imaginary parts of its amplitudes over the `s_q` output basis
/// states of total charge `q`; columns sharing a charge are then
/// orthonormalized in input order.
pub fn u1_covariant_isometry(
    charges_in: &ChargeRep,
    charges_out: &[ChargeRep],
    params: &[f64],
) -> Result<DenseOperator> {
    let totals = total_charges(charges_out);
    let empty: Vec<i64> = charges_in.charges().iter().copied().filter(|q| !totals.contains(q)).collect();
    if !empty.is_empty() {
        let mut e = empty;
        e.dedup();
        return Err(Error::EmptySector(e));
    }
    let need = u1_param_count(charges_in, charges_out)?;
    if params.len() != need {
        return Err(Error::Config(format!("expected {need} parameters, got {}", params.len())));
    }
    let dout = totals.len();
    let din = charges_in.dim();
    let mut v = CMatrix::zeros(dout, din);
    let mut offset = 0;
    for (k, &q) in charges_in.charges().iter().enumerate() {
        let sector: Vec<usize> = (0..dout).filter(|&i| totals[i] == q).collect();
        let mut col = nalgebra::DVector::<C64>::zeros(dout);
        for (s, &i) in sector.iter().enumerate() {
            col[i] = C64::new(params[offset + 2 * s], params[offset + 2 * s + 1]);
        }
        offset += 2 * sector.len();
        for prev in 0..k {
            if charges_in.charges()[prev] == q {
                let p = v.column(prev).into_owned();
                let proj = p.dotc(&col);
                col -= p * proj;
            }
        }
        let norm = col.norm();
        if norm < 1e-12 {
            // degenerate chart point: first sector basis vector orthogonal to earlier columns
            let fallback = sector.iter().find_map(|&i| {
                let mut e = nalgebra::DVector::<C64>::zeros(dout);
                e[i] = ONE;
                for prev in 0..k {
                    if charges_in.charges()[prev] == q {
                        let p = v.column(prev).into_owned();
                        let proj = p.dotc(&e);
                        e -= p * proj;
                    }
                }
                (e.norm() > 1e-6).then(|| e.normalize())
            });
            match fallback {
                Some(e) => v.set_column(k, &e),
                None => {
                    return Err(Error::DimensionMismatch(format!(
                        "charge {q} sector of dimension {} is too small for the inputs of that charge",
                        sector.len()
                    )))
                }
            }
        } else {
            v.set_column(k, &(col / C64::new(norm, 0.0)));
        }
    }
    let space_out = ModeSpace::new(charges_out.iter().map(|c| c.dim()).collect())?;
    let op = DenseOperator::new(space_out, ModeSpace::new(vec![din])?, v)?;
    debug_assert!(max_abs(&(op.matrix().adjoint() * op.matrix() - CMatrix::identity(din, din))) < 1e-10);
    Ok(op)
}

/// Code wrapper around [`u1_covariant_isometry`].
pub fn u1_isometry_code(charges_in: &ChargeRep, charges_out: &[ChargeRep], params: &[f64]) -> Result<Code> {
    let iso = u1_covariant_isometry(charges_in, charges_out, params)?;
    Code::from_isometry(
        "u1-isometry",
        &iso,
        Symmetry::U1 { charges_in: vec![charges_in.clone()], charges_out: charges_out.to_vec() },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{choi_distance, ensemble_fidelity_pure};
    use crate::groups::FiniteGroup;
    use crate::hilbert::haar_ket;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn qutrit_code_is_exact_isometry() {
        let c = qutrit_base_code().unwrap();
        let v = c.encoder_isometry().unwrap().unwrap();
        assert!(max_abs(&(v.matrix().adjoint() * v.matrix() - CMatrix::identity(3, 3))) < 1e-15);
        assert_eq!(c.decoded_modes(), vec![0, 1, 2]);
    }

    #[test]
    fn qutrit_marginals_are_maximally_mixed() {
        let c = qutrit_base_code().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tau = CMatrix::identity(3, 3) / C64::new(3.0, 0.0);
        for _ in 0..10 {
            let k = haar_ket(c.space_in().clone(), &mut rng);
            let enc = c.encode(&k).unwrap().remove(0);
            for j in 0..3 {
                let m = enc.density().partial_trace(&[j]).unwrap();
                assert!(max_abs(&(m.matrix() - &tau)) < 1e-12);
            }
        }
    }

    #[test]
    fn qutrit_pipeline_recovers() {
        let c = qutrit_base_code().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for j in 0..3 {
            let p = c.pipeline(j).unwrap();
            let ch = p.to_channel().unwrap();
            assert!(choi_distance(&ch, &Channel::identity(c.space_in().clone())) < 1e-10);
            let k = haar_ket(c.space_in().clone(), &mut rng);
            assert!(ensemble_fidelity_pure(&k, &p.apply_ket(&k).unwrap()) > 1.0 - 1e-12);
        }
    }

    #[test]
    fn transpose_channel_without_noise_inverts_isometry() {
        let c = qutrit_base_code().unwrap();
        let clean = no_erasure_decoder(&c).unwrap();
        let full = c.encoder_channel().unwrap().compose(&clean).unwrap();
        assert!(choi_distance(&full, &Channel::identity(c.space_in().clone())) < 1e-10);
    }

    #[test]
    fn trivial_permutation_code_is_base() {
        let base = qutrit_base_code().unwrap();
        let action = GroupAction::trivial(&FiniteGroup::trivial(), 1);
        let c = permutation_covariant_code(&base, &action, DEFAULT_CODE_BUDGET).unwrap();
        assert_eq!(c.space_out().dims(), base.space_out().dims());
        assert!(choi_distance(&c.encoder_channel().unwrap(), &base.encoder_channel().unwrap()) < 1e-14);
    }

    #[test]
    fn z2_permutation_code_shapes_and_budget() {
        let base = qutrit_base_code().unwrap();
        let z2 = FiniteGroup::cyclic(2).unwrap();
        let c = permutation_covariant_code(&base, &GroupAction::regular(&z2), DEFAULT_CODE_BUDGET).unwrap();
        assert_eq!(c.space_in().dims(), &[3, 3]);
        assert_eq!(c.space_out().dims(), &[3; 6]);
        assert_eq!(c.decoded_modes(), (0..6).collect::<Vec<_>>());
        let err = permutation_covariant_code(&base, &GroupAction::regular(&z2), 700).unwrap_err();
        assert!(err.to_string().contains("instance too large"));
    }

    #[test]
    fn z2_permutation_code_pipeline() {
        let base = qutrit_base_code().unwrap();
        let z2 = FiniteGroup::cyclic(2).unwrap();
        let c = permutation_covariant_code(&base, &GroupAction::regular(&z2), DEFAULT_CODE_BUDGET).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for j in [0, 4] {
            let p = c.pipeline(j).unwrap();
            let k = haar_ket(c.space_in().clone(), &mut rng);
            assert!(ensemble_fidelity_pure(&k, &p.apply_ket(&k).unwrap()) > 1.0 - 1e-10);
        }
    }

    #[test]
    fn gyroscope_trivial_group_appends_fixed_ancillas() {
        let base = qutrit_base_code().unwrap();
        let t = FiniteGroup::trivial();
        let local = Representation::trivial(t, ModeSpace::new(vec![3]).unwrap());
        let g = gyroscope_code(&base, &local).unwrap();
        assert_eq!(g.space_out().dims(), &[3, 3, 3, 1, 1]);
        let k = g.encoder_kraus().unwrap();
        assert_eq!(k.len(), 1);
        assert!(max_abs(&(&k[0] - base.encoder_kraus().unwrap()[0].clone())) < 1e-15);
    }

    #[test]
    fn u1_isometry_counting_and_identity() {
        let cin = ChargeRep::new(vec![0, 1]).unwrap();
        let q = ChargeRep::new(vec![0, 1]).unwrap();
        let totals = total_charges(&[q.clone(), q.clone(), q.clone()]);
        assert_eq!(totals.iter().filter(|&&t| t == 0).count(), 1);
        assert_eq!(totals.iter().filter(|&&t| t == 1).count(), 3);
        assert_eq!(u1_param_count(&cin, &[q.clone(), q.clone(), q.clone()]).unwrap(), 2 + 6);

        let id = u1_covariant_isometry(&cin, std::slice::from_ref(&q), &[1.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(id.matrix(), &CMatrix::identity(2, 2));

        let bad = ChargeRep::new(vec![0, 5]).unwrap();
        assert!(matches!(u1_covariant_isometry(&bad, &[q], &[0.0; 2]), Err(Error::EmptySector(v)) if v == vec![5]));
    }

    #[test]
    fn u1_isometry_random_params() {
        let cin = ChargeRep::new(vec![0, 1, 1]).unwrap();
        let q = ChargeRep::new(vec![0, 1, 2]).unwrap();
        let outs = vec![q.clone(), q.clone(), q];
        let totals = total_charges(&outs);
        let n = u1_param_count(&cin, &outs).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let p: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let v = u1_covariant_isometry(&cin, &outs, &p).unwrap();
            assert!(v.is_isometry(1e-10));
            for (o, i) in (0..27).flat_map(|o| (0..3).map(move |i| (o, i))) {
                if v.matrix()[(o, i)].norm() > 0.0 {
                    assert_eq!(totals[o], cin.charges()[i]);
                }
            }
        }
    }

    #[test]
    fn decoder_shape_is_checked() {
        let c = qutrit_base_code().unwrap();
        let wrong = Circuit::new(ModeSpace::uniform(3, 3).unwrap());
        assert!(c.with_decoder(0, wrong).is_err());
    }
}
