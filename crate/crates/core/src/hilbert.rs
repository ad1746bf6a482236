//! Dense complex tensor algebra over mode-structured Hilbert spaces.
//!
//! Basis ordering is row-major over the mode list: mode 0 is the most
//! significant digit of a flat basis index. Every tensor product puts the
//! left operand's modes first.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::seeded_rng;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Relative pseudo-inverse cutoff for [`psd_func`].
pub const DEFAULT_REL_CUTOFF: f64 = 1e-10;
/// Most negative eigenvalue still accepted as PSD.
pub const PSD_TOL: f64 = 1e-9;

pub(crate) const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub(crate) const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Ordered list of mode dimensions, optionally labelled.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ModeSpace {
    dims: Vec<usize>,
    labels: Option<Vec<String>>,
}

impl ModeSpace {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if let Some(pos) = dims.iter().position(|&d| d == 0) {
            return Err(Error::InvalidSpace(format!("mode {pos} has dimension 0")));
        }
        Ok(Self { dims, labels: None })
    }

    /// `count` copies of a `dim`-dimensional mode.
    pub fn uniform(dim: usize, count: usize) -> Result<Self> {
        Self::new(vec![dim; count])
    }

    /// The zero-mode space (total dimension 1).
    pub fn scalar() -> Self {
        Self { dims: Vec::new(), labels: None }
    }

    pub fn with_labels<S: Into<String>>(mut self, labels: Vec<S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() != self.dims.len() {
            return Err(Error::InvalidSpace(format!("{} labels for {} modes", labels.len(), self.dims.len())));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::InvalidSpace(format!("duplicate label {l:?}")));
            }
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn num_modes(&self) -> usize {
        self.dims.len()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn dim(&self, mode: usize) -> usize {
        self.dims[mode]
    }

    pub fn same_shape(&self, other: &ModeSpace) -> bool {
        self.dims == other.dims
    }

    pub(crate) fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.dims.len() {
            return Err(Error::InvalidMode { index: mode, modes: self.dims.len() });
        }
        Ok(())
    }

    /// Modes of `self` followed by modes of `other`. Labels survive only when
    /// both sides carry them and the union stays unique.
    pub fn concat(&self, other: &ModeSpace) -> ModeSpace {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        let labels = match (&self.labels, &other.labels) {
            (Some(a), Some(b)) if !a.iter().any(|l| b.contains(l)) => {
                let mut l = a.clone();
                l.extend(b.iter().cloned());
                Some(l)
            }
            _ => None,
        };
        ModeSpace { dims, labels }
    }

    /// Sub-space formed by `modes`, in the given order.
    pub fn select(&self, modes: &[usize]) -> Result<ModeSpace> {
        for &m in modes {
            self.check_mode(m)?;
        }
        Ok(ModeSpace {
            dims: modes.iter().map(|&m| self.dims[m]).collect(),
            labels: self.labels.as_ref().map(|l| modes.iter().map(|&m| l[m].clone()).collect()),
        })
    }

    /// Space with mode `j` removed.
    pub fn without(&self, j: usize) -> Result<ModeSpace> {
        self.check_mode(j)?;
        let keep: Vec<usize> = (0..self.num_modes()).filter(|&m| m != j).collect();
        self.select(&keep)
    }

    /// Replaces the contiguous range `start..start + len` by `replacement`.
    pub fn splice(&self, start: usize, len: usize, replacement: &ModeSpace) -> Result<ModeSpace> {
        if start + len > self.num_modes() {
            return Err(Error::DimensionMismatch(format!(
                "mode range {start}..{} outside {} modes",
                start + len,
                self.num_modes()
            )));
        }
        let mut dims = self.dims[..start].to_vec();
        dims.extend_from_slice(&replacement.dims);
        dims.extend_from_slice(&self.dims[start + len..]);
        Ok(ModeSpace { dims, labels: None })
    }

    /// Digits of a flat basis index, mode 0 first.
    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for (k, &d) in self.dims.iter().enumerate().rev() {
            out[k] = index % d;
            index /= d;
        }
        out
    }

    pub fn index_of(&self, digits: &[usize]) -> usize {
        digits.iter().zip(&self.dims).fold(0, |acc, (&x, &d)| acc * d + x)
    }

    /// Flat index map for reordering modes: `result[new_index] = old_index`
    /// where new mode `k` is old mode `order[k]`.
    pub fn permutation_indices(&self, order: &[usize]) -> Result<Vec<usize>> {
        validate_permutation(order, self.num_modes())?;
        let new_space = self.select(order)?;
        let total = self.total_dim();
        let mut old_digits = vec![0; self.num_modes()];
        Ok((0..total)
            .map(|new_idx| {
                let nd = new_space.digits(new_idx);
                for (k, &m) in order.iter().enumerate() {
                    old_digits[m] = nd[k];
                }
                self.index_of(&old_digits)
            })
            .collect())
    }
}

pub(crate) fn validate_permutation(order: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if order.len() != n {
        return Err(Error::DimensionMismatch(format!("permutation of length {} for {n} modes", order.len())));
    }
    for &m in order {
        if m >= n || seen[m] {
            return Err(Error::DimensionMismatch(format!("{order:?} is not a permutation")));
        }
        seen[m] = true;
    }
    Ok(())
}

/// State vector over a [`ModeSpace`]; not necessarily normalized.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseKet {
    space: ModeSpace,
    amps: CVector,
}

impl DenseKet {
    pub fn new(space: ModeSpace, amps: CVector) -> Result<Self> {
        if amps.len() != space.total_dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} amplitudes for total dimension {}",
                amps.len(),
                space.total_dim()
            )));
        }
        Ok(Self { space, amps })
    }

    pub fn from_vec(space: ModeSpace, amps: Vec<C64>) -> Result<Self> {
        Self::new(space, CVector::from_vec(amps))
    }

    pub fn basis(space: ModeSpace, index: usize) -> Result<Self> {
        let n = space.total_dim();
        if index >= n {
            return Err(Error::DimensionMismatch(format!("basis index {index} >= {n}")));
        }
        let mut amps = CVector::zeros(n);
        amps[index] = ONE;
        Ok(Self { space, amps })
    }

    pub fn space(&self) -> &ModeSpace {
        &self.space
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amps
    }

    pub fn into_amplitudes(self) -> CVector {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.norm_squared()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm_sqr() - 1.0).abs() <= tol
    }

    pub fn normalized(mut self) -> Self {
        let n = self.amps.norm();
        if n > 0.0 {
            self.amps /= C64::new(n, 0.0);
        }
        self
    }

    pub fn inner(&self, other: &DenseKet) -> C64 {
        self.amps.dotc(&other.amps)
    }

    pub fn scaled(mut self, s: C64) -> Self {
        self.amps *= s;
        self
    }

    pub fn tensor(&self, other: &DenseKet) -> DenseKet {
        let amps = self.amps.kronecker(&other.amps);
        DenseKet { space: self.space.concat(&other.space), amps }
    }

    /// `|self⟩⟨self|`.
    pub fn density(&self) -> DenseOperator {
        DenseOperator {
            space_out: self.space.clone(),
            space_in: self.space.clone(),
            mat: &self.amps * self.amps.adjoint(),
        }
    }

    /// Reorders modes: new mode `k` is old mode `order[k]`.
    pub fn permute_modes(&self, order: &[usize]) -> Result<DenseKet> {
        let idx = self.space.permutation_indices(order)?;
        let amps = CVector::from_iterator(idx.len(), idx.iter().map(|&i| self.amps[i]));
        Ok(DenseKet { space: self.space.select(order)?, amps })
    }

    /// Replaces the ModeSpace without moving data.
    pub fn relabel(mut self, space: ModeSpace) -> Result<Self> {
        if space.total_dim() != self.space.total_dim() {
            return Err(Error::DimensionMismatch("relabel changes total dimension".into()));
        }
        self.space = space;
        Ok(self)
    }

    /// Applies `op` to the contiguous modes `start..start + op.space_in.num_modes()`.
    /// Those modes are replaced by `op.space_out`.
    pub fn apply_on_modes(&self, op: &DenseOperator, start: usize) -> Result<DenseKet> {
        let k = op.space_in.num_modes();
        if start + k > self.space.num_modes() || self.space.dims()[start..start + k] != *op.space_in.dims() {
            return Err(Error::DimensionMismatch(format!(
                "operator on {:?} cannot act at mode {start} of {:?}",
                op.space_in.dims(),
                self.space.dims()
            )));
        }
        let left: usize = self.space.dims()[..start].iter().product();
        let right: usize = self.space.dims()[start + k..].iter().product();
        let din = op.space_in.total_dim();
        let dout = op.space_out.total_dim();
        let mut out = vec![ZERO; left * dout * right];
        for l in 0..left {
            let src = l * din * right;
            let dst = l * dout * right;
            for o in 0..dout {
                let row = &mut out[dst + o * right..dst + (o + 1) * right];
                for i in 0..din {
                    let m = op.mat[(o, i)];
                    if m == ZERO {
                        continue;
                    }
                    let col = &self.amps.as_slice()[src + i * right..src + (i + 1) * right];
                    for (r, x) in row.iter_mut().zip(col) {
                        *r += m * x;
                    }
                }
            }
        }
        let space = self.space.splice(start, k, &op.space_out)?;
        Ok(DenseKet { space, amps: CVector::from_vec(out) })
    }
}

/// Complex matrix from `space_in` to `space_out`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseOperator {
    space_out: ModeSpace,
    space_in: ModeSpace,
    mat: CMatrix,
}

impl DenseOperator {
    pub fn new(space_out: ModeSpace, space_in: ModeSpace, mat: CMatrix) -> Result<Self> {
        if mat.nrows() != space_out.total_dim() || mat.ncols() != space_in.total_dim() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix for spaces {:?} <- {:?}",
                mat.nrows(),
                mat.ncols(),
                space_out.dims(),
                space_in.dims()
            )));
        }
        Ok(Self { space_out, space_in, mat })
    }

    /// Square operator on `space`.
    pub fn on(space: ModeSpace, mat: CMatrix) -> Result<Self> {
        Self::new(space.clone(), space, mat)
    }

    pub fn identity(space: ModeSpace) -> Self {
        let n = space.total_dim();
        Self { space_out: space.clone(), space_in: space, mat: CMatrix::identity(n, n) }
    }

    /// Maximally mixed state `I / dim`.
    pub fn maximally_mixed(space: ModeSpace) -> Self {
        let n = space.total_dim();
        let mut op = Self::identity(space);
        op.mat /= C64::new(n as f64, 0.0);
        op
    }

    pub fn zeros(space_out: ModeSpace, space_in: ModeSpace) -> Self {
        let mat = CMatrix::zeros(space_out.total_dim(), space_in.total_dim());
        Self { space_out, space_in, mat }
    }

    /// Operator from real entries given row-major.
    pub fn from_real_rows(space: ModeSpace, rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        let mat = CMatrix::from_fn(n, rows.first().map_or(0, |r| r.len()), |i, j| C64::new(rows[i][j], 0.0));
        Self::on(space, mat)
    }

    pub fn space_out(&self) -> &ModeSpace {
        &self.space_out
    }

    pub fn space_in(&self) -> &ModeSpace {
        &self.space_in
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn is_square(&self) -> bool {
        self.space_out.same_shape(&self.space_in)
    }

    fn require_square(&self) -> Result<()> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "operator {:?} <- {:?} is not square over one space",
                self.space_out.dims(),
                self.space_in.dims()
            )));
        }
        Ok(())
    }

    pub fn dagger(&self) -> DenseOperator {
        DenseOperator { space_out: self.space_in.clone(), space_in: self.space_out.clone(), mat: self.mat.adjoint() }
    }

    /// Basis-explicit transpose in the computational basis.
    pub fn transpose(&self) -> DenseOperator {
        DenseOperator { space_out: self.space_in.clone(), space_in: self.space_out.clone(), mat: self.mat.transpose() }
    }

    /// `self · rhs`.
    pub fn compose(&self, rhs: &DenseOperator) -> Result<DenseOperator> {
        if !self.space_in.same_shape(&rhs.space_out) {
            return Err(Error::DimensionMismatch(format!(
                "cannot compose {:?} <- {:?} with {:?} <- {:?}",
                self.space_out.dims(),
                self.space_in.dims(),
                rhs.space_out.dims(),
                rhs.space_in.dims()
            )));
        }
        Ok(DenseOperator {
            space_out: self.space_out.clone(),
            space_in: rhs.space_in.clone(),
            mat: &self.mat * &rhs.mat,
        })
    }

    pub fn apply(&self, ket: &DenseKet) -> Result<DenseKet> {
        if !self.space_in.same_shape(ket.space()) {
            return Err(Error::DimensionMismatch(format!(
                "operator input {:?} vs ket {:?}",
                self.space_in.dims(),
                ket.space().dims()
            )));
        }
        DenseKet::new(self.space_out.clone(), &self.mat * ket.amplitudes())
    }

    pub fn add(&self, other: &DenseOperator) -> Result<DenseOperator> {
        self.check_same(other)?;
        Ok(DenseOperator { mat: &self.mat + &other.mat, ..self.clone() })
    }

    pub fn sub(&self, other: &DenseOperator) -> Result<DenseOperator> {
        self.check_same(other)?;
        Ok(DenseOperator { mat: &self.mat - &other.mat, ..self.clone() })
    }

    pub fn scale(&self, s: C64) -> DenseOperator {
        DenseOperator { mat: &self.mat * s, ..self.clone() }
    }

    fn check_same(&self, other: &DenseOperator) -> Result<()> {
        if !self.space_out.same_shape(&other.space_out) || !self.space_in.same_shape(&other.space_in) {
            return Err(Error::DimensionMismatch("operator spaces differ".into()));
        }
        Ok(())
    }

    pub fn trace(&self) -> C64 {
        self.mat.trace()
    }

    /// Re-labels the spaces without data movement (index override).
    pub fn relabel(mut self, space_out: ModeSpace, space_in: ModeSpace) -> Result<Self> {
        if space_out.total_dim() != self.space_out.total_dim() || space_in.total_dim() != self.space_in.total_dim() {
            return Err(Error::DimensionMismatch("relabel changes total dimension".into()));
        }
        self.space_out = space_out;
        self.space_in = space_in;
        Ok(self)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.is_square() && max_abs(&(&self.mat - self.mat.adjoint())) <= tol
    }

    pub fn is_isometry(&self, tol: f64) -> bool {
        let n = self.mat.ncols();
        max_abs(&(self.mat.adjoint() * &self.mat - CMatrix::identity(n, n))) <= tol
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.mat.nrows() == self.mat.ncols() && self.is_isometry(tol) && self.dagger().is_isometry(tol)
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.is_hermitian(tol.max(1e-12) * 10.0) && hermitian_eigen(&self.mat).0.iter().all(|&l| l >= -tol)
    }

    pub fn is_trace_one(&self, tol: f64) -> bool {
        (self.trace() - ONE).norm() <= tol
    }

    /// Reorders modes of a square operator: new mode `k` is old mode `order[k]`.
    pub fn permute_modes(&self, order: &[usize]) -> Result<DenseOperator> {
        self.require_square()?;
        let idx = self.space_in.permutation_indices(order)?;
        let n = idx.len();
        let mat = CMatrix::from_fn(n, n, |i, j| self.mat[(idx[i], idx[j])]);
        let space = self.space_in.select(order)?;
        Ok(DenseOperator { space_out: space.clone(), space_in: space, mat })
    }

    /// Reduced operator on the modes in `keep` (ascending order). An empty
    /// `keep` yields the 1x1 trace.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DenseOperator> {
        self.require_square()?;
        let space = &self.space_in;
        let mut keep: Vec<usize> = keep.to_vec();
        keep.sort_unstable();
        keep.dedup();
        for &m in &keep {
            space.check_mode(m)?;
        }
        let rest: Vec<usize> = (0..space.num_modes()).filter(|m| !keep.contains(m)).collect();
        let kept_space = space.select(&keep)?;
        let rest_space = space.select(&rest)?;
        let dk = kept_space.total_dim();
        let dr = rest_space.total_dim();
        // flat index of (kept, rest) pair in the original ordering
        let mut order = keep.clone();
        order.extend_from_slice(&rest);
        let perm = space.permutation_indices(&order)?;
        let mut out = CMatrix::zeros(dk, dk);
        for a in 0..dk {
            for b in 0..dk {
                let mut acc = ZERO;
                for r in 0..dr {
                    acc += self.mat[(perm[a * dr + r], perm[b * dr + r])];
                }
                out[(a, b)] = acc;
            }
        }
        Ok(DenseOperator { space_out: kept_space.clone(), space_in: kept_space, mat: out })
    }

    /// Applies a square `op` to the contiguous modes starting at `start`,
    /// acting as identity elsewhere: returns `(I ⊗ op ⊗ I) · self`.
    pub fn left_apply_on_modes(&self, op: &DenseOperator, start: usize) -> Result<DenseOperator> {
        let cols: Vec<CVector> = (0..self.mat.ncols())
            .map(|c| {
                let ket = DenseKet::new(self.space_out.clone(), self.mat.column(c).into_owned())?;
                Ok(ket.apply_on_modes(op, start)?.into_amplitudes())
            })
            .collect::<Result<_>>()?;
        let space_out = self.space_out.splice(start, op.space_in.num_modes(), &op.space_out)?;
        let mat = CMatrix::from_columns(&cols);
        DenseOperator::new(space_out, self.space_in.clone(), mat)
    }
}

pub(crate) fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Kronecker product with `a`'s modes first.
pub fn tensor_product(a: &DenseOperator, b: &DenseOperator) -> DenseOperator {
    DenseOperator {
        space_out: a.space_out.concat(&b.space_out),
        space_in: a.space_in.concat(&b.space_in),
        mat: a.mat.kronecker(&b.mat),
    }
}

/// Free-function form of [`DenseOperator::partial_trace`].
pub fn partial_trace(op: &DenseOperator, keep: &[usize]) -> Result<DenseOperator> {
    op.partial_trace(keep)
}

/// Eigen-decomposition of the Hermitian part of `m`, ascending eigenvalues.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let cols: Vec<CVector> = order.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();
    let vecs = if cols.is_empty() { CMatrix::zeros(0, 0) } else { CMatrix::from_columns(&cols) };
    (vals, vecs)
}

/// Result of [`schmidt_decompose`].
#[derive(Clone, Debug)]
pub struct Schmidt {
    /// Nonnegative, descending; `min(d_left, d_right)` entries (zeros kept).
    pub coefficients: Vec<f64>,
    pub left: Vec<DenseKet>,
    pub right: Vec<DenseKet>,
}

impl Schmidt {
    /// `Σ c_i |L_i⟩|R_i⟩` over the left-then-right mode ordering.
    pub fn reconstruct(&self) -> Option<DenseKet> {
        let mut it = self
            .coefficients
            .iter()
            .zip(self.left.iter().zip(&self.right))
            .map(|(&c, (l, r))| l.tensor(r).scaled(C64::new(c, 0.0)));
        let first = it.next()?;
        Some(it.fold(first, |acc, k| {
            let amps = acc.amplitudes() + k.amplitudes();
            DenseKet::new(acc.space().clone(), amps).expect("same space")
        }))
    }
}

/// Schmidt decomposition of `ket` across `left | rest`. Left kets live on the
/// `left` modes (ascending), right kets on the remaining modes.
pub fn schmidt_decompose(ket: &DenseKet, left: &[usize]) -> Result<Schmidt> {
    let space = ket.space();
    let mut left: Vec<usize> = left.to_vec();
    left.sort_unstable();
    left.dedup();
    for &m in &left {
        space.check_mode(m)?;
    }
    let right: Vec<usize> = (0..space.num_modes()).filter(|m| !left.contains(m)).collect();
    let mut order = left.clone();
    order.extend_from_slice(&right);
    let permuted = ket.permute_modes(&order)?;
    let ls = space.select(&left)?;
    let rs = space.select(&right)?;
    let (dl, dr) = (ls.total_dim(), rs.total_dim());
    let m = CMatrix::from_row_slice(dl, dr, permuted.amplitudes().as_slice());
    let svd = m.svd(true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V^T");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut coefficients = Vec::with_capacity(idx.len());
    let mut lk = Vec::with_capacity(idx.len());
    let mut rk = Vec::with_capacity(idx.len());
    for &i in &idx {
        coefficients.push(svd.singular_values[i].max(0.0));
        lk.push(DenseKet::new(ls.clone(), u.column(i).into_owned())?);
        rk.push(DenseKet::new(rs.clone(), vt.row(i).transpose())?);
    }
    Ok(Schmidt { coefficients, left: lk, right: rk })
}

/// Function applied by [`psd_func`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PsdFn {
    Sqrt,
    InvSqrt,
}

/// Matrix square root or pseudo-inverse square root of a PSD operator.
/// Eigenvalues below `rel_cutoff * λ_max` are treated as zero.
pub fn psd_func(op: &DenseOperator, which: PsdFn, rel_cutoff: f64) -> Result<DenseOperator> {
    op.require_square()?;
    let (vals, vecs) = hermitian_eigen(&op.mat);
    let min = vals.first().copied().unwrap_or(0.0);
    if min < -PSD_TOL {
        return Err(Error::NotPsd(min));
    }
    let max = vals.last().copied().unwrap_or(0.0).max(0.0);
    let cutoff = rel_cutoff * max;
    let f: Vec<f64> = vals
        .iter()
        .map(|&l| {
            if l <= cutoff || l <= 0.0 {
                0.0
            } else {
                match which {
                    PsdFn::Sqrt => l.sqrt(),
                    PsdFn::InvSqrt => 1.0 / l.sqrt(),
                }
            }
        })
        .collect();
    let mat = spectral(&vecs, &f);
    Ok(DenseOperator { mat, ..op.clone() })
}

pub(crate) fn spectral(vecs: &CMatrix, f: &[f64]) -> CMatrix {
    let n = vecs.nrows();
    let mut scaled = vecs.clone();
    for (j, &v) in f.iter().enumerate() {
        scaled.column_mut(j).scale_mut(v);
    }
    if n == 0 {
        return CMatrix::zeros(0, 0);
    }
    scaled * vecs.adjoint()
}

pub fn operator_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().iter().fold(0.0, |a: f64, &s| a.max(s))
}

pub fn trace_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().iter().sum()
}

/// Uhlmann fidelity `tr √(√a b √a)` of two density operators.
pub fn fidelity(a: &DenseOperator, b: &DenseOperator) -> Result<f64> {
    a.check_same(b)?;
    for op in [a, b] {
        let min = hermitian_eigen(&op.mat).0.first().copied().unwrap_or(0.0);
        if min < -PSD_TOL {
            return Err(Error::NotPsd(min));
        }
    }
    let sa = psd_func(a, PsdFn::Sqrt, 0.0)?;
    let m = &sa.mat * &b.mat * &sa.mat;
    let (vals, _) = hermitian_eigen(&m);
    let f: f64 = vals.iter().map(|&l| l.max(0.0).sqrt()).sum();
    Ok(f.clamp(0.0, 1.0))
}

/// `√⟨κ|ρ|κ⟩` for a normalized pure state `κ`.
pub fn fidelity_pure(ket: &DenseKet, rho: &DenseOperator) -> Result<f64> {
    let v = rho.apply(ket)?;
    Ok(ket.inner(&v).re.max(0.0).sqrt().min(1.0))
}

/// Norms of `a - b` together with the fidelity of `a` and `b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Comparison {
    pub operator_norm: f64,
    pub trace_norm: f64,
    pub fidelity: f64,
}

pub fn norms_and_fidelity(a: &DenseOperator, b: &DenseOperator) -> Result<Comparison> {
    let diff = a.sub(b)?;
    Ok(Comparison {
        operator_norm: operator_norm(&diff.mat),
        trace_norm: trace_norm(&diff.mat),
        fidelity: fidelity(a, b)?,
    })
}

/// Haar-random unit vector in `C^dim`, deterministic in `seed`.
pub fn random_haar_ket(dim: usize, seed: u64) -> Result<DenseKet> {
    let space = ModeSpace::new(vec![dim])?;
    let mut rng = seeded_rng(seed);
    Ok(haar_ket(space, &mut rng))
}

/// Haar-random unit vector on `space` drawn from `rng`. For total dimension 1
/// this is the phase-fixed `|0⟩`.
pub fn haar_ket<R: Rng + ?Sized>(space: ModeSpace, rng: &mut R) -> DenseKet {
    let n = space.total_dim();
    if n == 1 {
        return DenseKet::basis(space, 0).expect("dimension 1");
    }
    let amps = CVector::from_fn(n, |_, _| {
        C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    });
    DenseKet { space, amps }.normalized()
}

/// Haar-random density operator of rank one.
pub fn haar_density<R: Rng + ?Sized>(space: ModeSpace, rng: &mut R) -> DenseOperator {
    haar_ket(space, rng).density()
}

/// Random density operator `G G† / tr` with a complex Ginibre `G`.
pub fn random_density<R: Rng + ?Sized>(space: ModeSpace, rng: &mut R) -> DenseOperator {
    let n = space.total_dim();
    let g = CMatrix::from_fn(n, n, |_, _| {
        C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    });
    let mut m = &g * g.adjoint();
    let t = m.trace();
    m /= t;
    DenseOperator { space_out: space.clone(), space_in: space, mat: m }
}
