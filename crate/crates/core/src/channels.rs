//! Kraus channels, located erasure, Choi fingerprints, and staged circuits
//! that propagate pure-state ensembles without forming large density
//! matrices.

use crate::error::{Error, Result};
use crate::hilbert::{hermitian_eigen, max_abs, CMatrix, CVector, DenseKet, DenseOperator, ModeSpace, C64, ONE, ZERO};

/// Tolerance of the trace-preservation check on construction.
pub const TP_TOL: f64 = 1e-9;
/// Ensemble branches with squared norm at or below this are dropped.
pub const PRUNE_NORM_SQR: f64 = 1e-26;

/// Completely positive map in Kraus form.
#[derive(Clone, Debug, PartialEq)]
pub struct Channel {
    space_in: ModeSpace,
    space_out: ModeSpace,
    kraus: Vec<CMatrix>,
}

impl Channel {
    /// Validates shapes and `Σ K†K = I` within [`TP_TOL`].
    pub fn new(space_in: ModeSpace, space_out: ModeSpace, kraus: Vec<CMatrix>) -> Result<Self> {
        let ch = Self::new_unchecked(space_in, space_out, kraus)?;
        let r = ch.trace_preservation_residual();
        if r > TP_TOL {
            return Err(Error::InvalidChannel(format!("not trace preserving (residual {r:e})")));
        }
        Ok(ch)
    }

    /// Shape-checked Kraus family without the trace-preservation check.
    pub fn new_unchecked(space_in: ModeSpace, space_out: ModeSpace, kraus: Vec<CMatrix>) -> Result<Self> {
        if kraus.is_empty() {
            return Err(Error::InvalidChannel("empty Kraus family".into()));
        }
        let (o, i) = (space_out.total_dim(), space_in.total_dim());
        if let Some(k) = kraus.iter().find(|k| k.nrows() != o || k.ncols() != i) {
            return Err(Error::DimensionMismatch(format!(
                "Kraus operator {}x{} for channel {:?} -> {:?}",
                k.nrows(),
                k.ncols(),
                space_in.dims(),
                space_out.dims()
            )));
        }
        Ok(Self { space_in, space_out, kraus })
    }

    pub fn identity(space: ModeSpace) -> Self {
        let n = space.total_dim();
        Self { space_in: space.clone(), space_out: space, kraus: vec![CMatrix::identity(n, n)] }
    }

    /// Single-Kraus channel of an isometry (or unitary).
    pub fn isometry(op: &DenseOperator) -> Result<Self> {
        Self::new(op.space_in().clone(), op.space_out().clone(), vec![op.matrix().clone()])
    }

    /// Replaces every input by the maximally mixed state: Kraus `|i⟩⟨j|/√d`.
    pub fn completely_depolarizing(space: ModeSpace) -> Self {
        let d = space.total_dim();
        let s = C64::new(1.0 / (d as f64).sqrt(), 0.0);
        let kraus = (0..d * d)
            .map(|ij| {
                let mut k = CMatrix::zeros(d, d);
                k[(ij / d, ij % d)] = s;
                k
            })
            .collect();
        Self { space_in: space.clone(), space_out: space, kraus }
    }

    /// Traces out every mode of `space`: Kraus `⟨k|`.
    pub fn discard_all(space: ModeSpace) -> Self {
        let d = space.total_dim();
        let kraus = (0..d)
            .map(|k| {
                let mut m = CMatrix::zeros(1, d);
                m[(0, k)] = ONE;
                m
            })
            .collect();
        Self { space_in: space, space_out: ModeSpace::scalar(), kraus }
    }

    /// `ρ ↦ τ ⊗ tr(ρ)` on one mode: Kraus `|m⟩⟨k|/√d`.
    pub fn erase_fill_mode(space: ModeSpace) -> Self {
        Self::completely_depolarizing(space)
    }

    /// Erase-and-fill of mode `j` of `space` as a full-space channel.
    pub fn erase_and_fill(space: &ModeSpace, j: usize) -> Result<Self> {
        space.check_mode(j)?;
        let local = Self::erase_fill_mode(space.select(&[j])?);
        let circuit = Circuit::new(space.clone()).then(Stage::Local { start: j, channel: local })?;
        circuit.to_channel()
    }

    pub fn space_in(&self) -> &ModeSpace {
        &self.space_in
    }

    pub fn space_out(&self) -> &ModeSpace {
        &self.space_out
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    pub fn kraus_operators(&self) -> Vec<DenseOperator> {
        self.kraus
            .iter()
            .map(|k| DenseOperator::new(self.space_out.clone(), self.space_in.clone(), k.clone()).expect("shape"))
            .collect()
    }

    /// `‖Σ K†K − I‖_max`.
    pub fn trace_preservation_residual(&self) -> f64 {
        let n = self.space_in.total_dim();
        let mut s = CMatrix::zeros(n, n);
        for k in &self.kraus {
            s += k.adjoint() * k;
        }
        max_abs(&(s - CMatrix::identity(n, n)))
    }

    /// `Σ K ρ K†`.
    pub fn apply(&self, rho: &DenseOperator) -> Result<DenseOperator> {
        if !rho.space_in().same_shape(&self.space_in) || !rho.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "channel input {:?} vs operator {:?}",
                self.space_in.dims(),
                rho.space_in().dims()
            )));
        }
        let n = self.space_out.total_dim();
        let mut out = CMatrix::zeros(n, n);
        for k in &self.kraus {
            out += k * rho.matrix() * k.adjoint();
        }
        DenseOperator::on(self.space_out.clone(), out)
    }

    /// Channel applying `self` first, then `next`.
    pub fn compose(&self, next: &Channel) -> Result<Channel> {
        compose(self, next)
    }

    /// `self ⊗ other` with `self`'s modes first.
    pub fn tensor(&self, other: &Channel) -> Channel {
        let kraus = self.kraus.iter().flat_map(|a| other.kraus.iter().map(move |b| a.kronecker(b))).collect();
        Channel {
            space_in: self.space_in.concat(&other.space_in),
            space_out: self.space_out.concat(&other.space_out),
            kraus,
        }
    }

    /// Dense Choi matrix on `space_out ⊗ space_in`.
    pub fn choi(&self) -> ChoiMatrix {
        let (o, i) = (self.space_out.total_dim(), self.space_in.total_dim());
        let n = o * i;
        let mut m = CMatrix::zeros(n, n);
        for k in &self.kraus {
            let v = vectorize(k);
            m += &v * v.adjoint();
        }
        ChoiMatrix { operator: DenseOperator::on(self.space_out.concat(&self.space_in), m).expect("shape") }
    }
}

/// `a` then `b`: Kraus family `{B_j A_i}`.
pub fn compose(a: &Channel, b: &Channel) -> Result<Channel> {
    if !a.space_out.same_shape(&b.space_in) {
        return Err(Error::DimensionMismatch(format!(
            "cannot compose channel into {:?} with channel from {:?}",
            a.space_out.dims(),
            b.space_in.dims()
        )));
    }
    let kraus = b.kraus.iter().flat_map(|kb| a.kraus.iter().map(move |ka| kb * ka)).collect();
    Ok(Channel { space_in: a.space_in.clone(), space_out: b.space_out.clone(), kraus })
}

/// `vec(K) = Σ_i K|i⟩ ⊗ |i⟩`.
fn vectorize(k: &CMatrix) -> CVector {
    let (o, i) = k.shape();
    CVector::from_fn(o * i, |r, _| k[(r / i, r % i)])
}

/// `Σ_ij E(|i⟩⟨j|) ⊗ |i⟩⟨j|` for the un-normalized `Σ|ii⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChoiMatrix {
    pub operator: DenseOperator,
}

impl ChoiMatrix {
    /// Partial trace over the output factor.
    pub fn input_marginal(&self, space_out: &ModeSpace) -> Result<DenseOperator> {
        let k = space_out.num_modes();
        let keep: Vec<usize> = (k..self.operator.space_in().num_modes()).collect();
        self.operator.partial_trace(&keep)
    }
}

pub fn choi(ch: &Channel) -> ChoiMatrix {
    ch.choi()
}

/// Trace norm of the Choi-matrix difference, evaluated without forming
/// either Choi matrix. With the shorter Kraus family padded by zeros and
/// `d_k = vec(A_k) − vec(B_k)`, `J_A − J_B = X Y†` for `X = [d | b]`,
/// `Y = [a | d]`; its trace norm is that of `R_X R_Y†` from the QR factors.
/// Identical families give exactly zero.
pub fn choi_distance(a: &Channel, b: &Channel) -> f64 {
    assert!(
        a.space_in.same_shape(&b.space_in) && a.space_out.same_shape(&b.space_out),
        "choi_distance between channels on different spaces"
    );
    let r = a.kraus.len().max(b.kraus.len());
    let n = a.space_in.total_dim() * a.space_out.total_dim();
    let mut xs = Vec::with_capacity(2 * r);
    let mut ys = Vec::with_capacity(2 * r);
    let mut ds = Vec::with_capacity(r);
    for k in 0..r {
        let va = a.kraus.get(k).map_or_else(|| CVector::zeros(n), vectorize);
        let vb = b.kraus.get(k).map_or_else(|| CVector::zeros(n), vectorize);
        ds.push(&va - &vb);
        ys.push(va);
        xs.push(vb);
    }
    let x: Vec<CVector> = ds.iter().cloned().chain(xs).collect();
    let y: Vec<CVector> = ys.into_iter().chain(ds).collect();
    let rx = compact_columns(&x).qr().r();
    let ry = compact_columns(&y).qr().r();
    (rx * ry.adjoint()).singular_values().iter().sum()
}

/// The columns as a matrix with all-zero rows removed; the `R` factor of a
/// QR decomposition does not depend on them.
fn compact_columns(cols: &[CVector]) -> CMatrix {
    let n = cols.first().map_or(0, |c| c.len());
    let rows: Vec<usize> = (0..n).filter(|&i| cols.iter().any(|c| c[i] != C64::new(0.0, 0.0))).collect();
    // keep at least as many rows as columns so that R is square
    let height = rows.len().max(cols.len());
    CMatrix::from_fn(height, cols.len(), |i, j| rows.get(i).map_or(C64::new(0.0, 0.0), |&r| cols[j][r]))
}

/// Reference route: trace norm of the difference of dense Choi matrices.
pub fn choi_distance_dense(a: &Channel, b: &Channel) -> f64 {
    let d = &a.choi().operator.into_matrix() - b.choi().operator.into_matrix();
    hermitian_eigen(&d).0.iter().map(|l| l.abs()).sum()
}

/// `τ_j ⊗ tr_j(ρ)` with the fresh factor at position `j`.
pub fn erase_and_fill(rho: &DenseOperator, j: usize) -> Result<DenseOperator> {
    let space = rho.space_in().clone();
    space.check_mode(j)?;
    let rest: Vec<usize> = (0..space.num_modes()).filter(|&m| m != j).collect();
    let reduced = rho.partial_trace(&rest)?;
    let tau = DenseOperator::maximally_mixed(space.select(&[j])?);
    let joined = crate::hilbert::tensor_product(&tau, &reduced);
    // joined order is (j, rest...); move j back into place
    let mut order: Vec<usize> = (1..space.num_modes()).collect();
    order.insert(j, 0);
    joined.permute_modes(&order)?.relabel(space.clone(), space)
}

/// One step of a [`Circuit`].
#[derive(Clone, Debug, PartialEq)]
pub enum Stage {
    /// Channel on the contiguous modes `start..start + k` (`k` = number of
    /// channel input modes); those modes are replaced by the channel output.
    Local { start: usize, channel: Channel },
    /// Trace out one mode.
    Discard { mode: usize },
    /// Replace one mode by the maximally mixed state.
    EraseFill { mode: usize },
    /// New mode `k` is old mode `order[k]`.
    Permute { order: Vec<usize> },
    /// Basis-state map `|i⟩ ↦ |targets[i]⟩` onto `space_out`; injective, hence
    /// an isometry.
    BasisMap { space_out: ModeSpace, targets: Vec<usize> },
}

/// Sequence of stages acting on an evolving mode structure.
#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    space_in: ModeSpace,
    space_out: ModeSpace,
    stages: Vec<Stage>,
}

impl Circuit {
    pub fn new(space: ModeSpace) -> Self {
        Self { space_in: space.clone(), space_out: space, stages: Vec::new() }
    }

    /// Single-stage circuit for a channel on all modes.
    pub fn from_channel(channel: Channel) -> Self {
        let space_in = channel.space_in.clone();
        let space_out = channel.space_out.clone();
        Self { space_in, space_out, stages: vec![Stage::Local { start: 0, channel }] }
    }

    pub fn space_in(&self) -> &ModeSpace {
        &self.space_in
    }

    pub fn space_out(&self) -> &ModeSpace {
        &self.space_out
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    /// Appends a stage after checking it fits the current output space.
    pub fn then(mut self, stage: Stage) -> Result<Self> {
        self.space_out = stage_output_space(&self.space_out, &stage)?;
        self.stages.push(stage);
        Ok(self)
    }

    /// `self` followed by `next`.
    pub fn then_circuit(mut self, next: &Circuit) -> Result<Self> {
        if !self.space_out.same_shape(&next.space_in) {
            return Err(Error::DimensionMismatch(format!(
                "circuit output {:?} vs next input {:?}",
                self.space_out.dims(),
                next.space_in.dims()
            )));
        }
        for s in &next.stages {
            self = self.then(s.clone())?;
        }
        Ok(self)
    }

    /// Overrides the output mode structure (same dimensions).
    pub fn relabel_output(mut self, space: ModeSpace) -> Result<Self> {
        if !space.same_shape(&self.space_out) {
            return Err(Error::DimensionMismatch("relabel changes dimensions".into()));
        }
        self.space_out = space;
        Ok(self)
    }

    /// Fuses `EraseFill(j)` immediately followed by `Discard(j)` into
    /// `Discard(j)`.
    pub fn simplify(mut self) -> Self {
        let mut out: Vec<Stage> = Vec::with_capacity(self.stages.len());
        for s in self.stages.drain(..) {
            if let (Some(Stage::EraseFill { mode: a }), Stage::Discard { mode: b }) = (out.last(), &s) {
                if a == b {
                    out.pop();
                }
            }
            out.push(s);
        }
        self.stages = out;
        self
    }

    /// Pushes an ensemble `ρ = Σ|ψ_i⟩⟨ψ_i|` through every stage.
    pub fn apply_ensemble(&self, ensemble: Vec<DenseKet>) -> Result<Vec<DenseKet>> {
        for k in &ensemble {
            if !k.space().same_shape(&self.space_in) {
                return Err(Error::DimensionMismatch(format!(
                    "circuit input {:?} vs ket {:?}",
                    self.space_in.dims(),
                    k.space().dims()
                )));
            }
        }
        let mut cur: Vec<CMatrix> = ensemble
            .into_iter()
            .map(|k| {
                let v = k.into_amplitudes();
                CMatrix::from_column_slice(v.len(), 1, v.as_slice())
            })
            .collect();
        let mut space = self.space_in.clone();
        for s in &self.stages {
            let (next, sp) = apply_stage(&space, s, cur)?;
            cur = next.into_iter().filter(|m| m.norm_squared() > PRUNE_NORM_SQR).collect();
            space = sp;
        }
        cur.into_iter().map(|m| DenseKet::new(self.space_out.clone(), m.column(0).into_owned())).collect()
    }

    pub fn apply_ket(&self, ket: &DenseKet) -> Result<Vec<DenseKet>> {
        self.apply_ensemble(vec![ket.clone()])
    }

    /// Output density operator; input decomposed into its eigen-ensemble.
    pub fn apply(&self, rho: &DenseOperator) -> Result<DenseOperator> {
        let out = self.apply_ensemble(density_ensemble(rho)?)?;
        Ok(ensemble_density(self.space_out.clone(), &out))
    }

    /// Kraus operators of the whole circuit (exact, unpruned of nonzero terms).
    pub fn kraus(&self) -> Result<Vec<CMatrix>> {
        let n = self.space_in.total_dim();
        let mut cur = vec![CMatrix::identity(n, n)];
        let mut space = self.space_in.clone();
        for s in &self.stages {
            let (next, sp) = apply_stage(&space, s, cur)?;
            cur = next.into_iter().filter(|m| m.norm_squared() > PRUNE_NORM_SQR).collect();
            space = sp;
        }
        if cur.is_empty() {
            cur.push(CMatrix::zeros(self.space_out.total_dim(), n));
        }
        Ok(cur)
    }

    pub fn to_channel(&self) -> Result<Channel> {
        Channel::new(self.space_in.clone(), self.space_out.clone(), self.kraus()?)
    }
}

fn stage_output_space(space: &ModeSpace, stage: &Stage) -> Result<ModeSpace> {
    match stage {
        Stage::Local { start, channel } => {
            let k = channel.space_in.num_modes();
            if start + k > space.num_modes() || space.dims()[*start..start + k] != *channel.space_in.dims() {
                return Err(Error::DimensionMismatch(format!(
                    "channel on {:?} cannot act at mode {start} of {:?}",
                    channel.space_in.dims(),
                    space.dims()
                )));
            }
            space.splice(*start, k, &channel.space_out)
        }
        Stage::Discard { mode } => space.without(*mode),
        Stage::EraseFill { mode } => {
            space.check_mode(*mode)?;
            Ok(space.clone())
        }
        Stage::Permute { order } => {
            crate::hilbert::validate_permutation(order, space.num_modes())?;
            space.select(order)
        }
        Stage::BasisMap { space_out, targets } => {
            if targets.len() != space.total_dim() {
                return Err(Error::DimensionMismatch(format!(
                    "basis map with {} sources on total dimension {}",
                    targets.len(),
                    space.total_dim()
                )));
            }
            let mut seen = vec![false; space_out.total_dim()];
            for &t in targets {
                if t >= seen.len() || std::mem::replace(&mut seen[t], true) {
                    return Err(Error::InvalidChannel(format!("basis map not injective at target {t}")));
                }
            }
            Ok(space_out.clone())
        }
    }
}

/// Applies one stage to every column of every branch matrix.
fn apply_stage(space: &ModeSpace, stage: &Stage, branches: Vec<CMatrix>) -> Result<(Vec<CMatrix>, ModeSpace)> {
    let out_space = stage_output_space(space, stage)?;
    let out = match stage {
        Stage::Local { start, channel } => {
            let mut out = Vec::with_capacity(branches.len() * channel.kraus.len());
            for b in &branches {
                for k in &channel.kraus {
                    out.push(apply_local(
                        space,
                        b,
                        k,
                        channel.space_in.total_dim(),
                        *start,
                        channel.space_in.num_modes(),
                    ));
                }
            }
            out
        }
        Stage::Discard { mode } => {
            let d = space.dim(*mode);
            let left: usize = space.dims()[..*mode].iter().product();
            let right: usize = space.dims()[mode + 1..].iter().product();
            let mut out = Vec::with_capacity(branches.len() * d);
            for b in &branches {
                for k in 0..d {
                    out.push(CMatrix::from_fn(left * right, b.ncols(), |r, c| {
                        let (l, rr) = (r / right, r % right);
                        b[((l * d + k) * right + rr, c)]
                    }));
                }
            }
            out
        }
        Stage::EraseFill { mode } => {
            let sub = space.select(&[*mode])?;
            let ch = Channel::erase_fill_mode(sub);
            return apply_stage(space, &Stage::Local { start: *mode, channel: ch }, branches);
        }
        Stage::Permute { order } => {
            let idx = space.permutation_indices(order)?;
            branches.iter().map(|b| CMatrix::from_fn(b.nrows(), b.ncols(), |r, c| b[(idx[r], c)])).collect()
        }
        Stage::BasisMap { space_out, targets } => branches
            .iter()
            .map(|b| {
                let mut m = CMatrix::zeros(space_out.total_dim(), b.ncols());
                for (i, &t) in targets.iter().enumerate() {
                    m.set_row(t, &b.row(i));
                }
                m
            })
            .collect(),
    };
    Ok((out, out_space))
}

/// `(I_left ⊗ K ⊗ I_right) · b` where `K` acts on `k_modes` modes from `start`.
fn apply_local(space: &ModeSpace, b: &CMatrix, k: &CMatrix, din: usize, start: usize, k_modes: usize) -> CMatrix {
    let left: usize = space.dims()[..start].iter().product();
    let right: usize = space.dims()[start + k_modes..].iter().product();
    let dout = k.nrows();
    let cols = b.ncols();
    let mut out = CMatrix::zeros(left * dout * right, cols);
    for c in 0..cols {
        let src = b.column(c);
        let mut dst = out.column_mut(c);
        for l in 0..left {
            for i in 0..din {
                let base_in = (l * din + i) * right;
                let seg = src.rows(base_in, right);
                if seg.iter().all(|z| *z == ZERO) {
                    continue;
                }
                for o in 0..dout {
                    let m = k[(o, i)];
                    if m == ZERO {
                        continue;
                    }
                    let base_out = (l * dout + o) * right;
                    for r in 0..right {
                        dst[base_out + r] += m * seg[r];
                    }
                }
            }
        }
    }
    out
}

/// Eigen-ensemble `{√λ_i |v_i⟩}` of a density operator (nonzero terms).
pub fn density_ensemble(rho: &DenseOperator) -> Result<Vec<DenseKet>> {
    let (vals, vecs) = hermitian_eigen(rho.matrix());
    if let Some(&min) = vals.first() {
        if min < -crate::hilbert::PSD_TOL {
            return Err(Error::NotPsd(min));
        }
    }
    vals.iter()
        .enumerate()
        .filter(|(_, &l)| l > PRUNE_NORM_SQR)
        .map(|(i, &l)| DenseKet::new(rho.space_in().clone(), vecs.column(i) * C64::new(l.sqrt(), 0.0)))
        .collect()
}

/// `Σ|ψ_i⟩⟨ψ_i|` on `space`.
pub fn ensemble_density(space: ModeSpace, ensemble: &[DenseKet]) -> DenseOperator {
    let n = space.total_dim();
    let mut m = CMatrix::zeros(n, n);
    for k in ensemble {
        m += k.amplitudes() * k.amplitudes().adjoint();
    }
    DenseOperator::on(space, m).expect("shape")
}

/// `√(Σ_i |⟨κ|ψ_i⟩|²)`: fidelity of pure `κ` with an ensemble's density.
pub fn ensemble_fidelity_pure(target: &DenseKet, ensemble: &[DenseKet]) -> f64 {
    ensemble.iter().map(|k| target.inner(k).norm_sqr()).sum::<f64>().sqrt().min(1.0)
}

/// Total trace `Σ ‖ψ_i‖²` of an ensemble.
pub fn ensemble_trace(ensemble: &[DenseKet]) -> f64 {
    ensemble.iter().map(|k| k.norm_sqr()).sum()
}
