//! Finite groups given by multiplication tables, their unitary
//! representations, integer U(1) charges, and channel twirling.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::Rng;

use crate::channels::Channel;
use crate::error::{Error, Result};
use crate::hilbert::{max_abs, operator_norm, CMatrix, DenseKet, DenseOperator, ModeSpace, C64};
use crate::rng::seeded_rng;

/// Orders up to this size get an exhaustive associativity check.
pub const EXHAUSTIVE_ASSOCIATIVITY_ORDER: usize = 64;
const SAMPLED_TRIPLES: usize = 10_000;
/// Orders up to this size get an all-pairs homomorphism check.
pub const EXHAUSTIVE_HOMOMORPHISM_ORDER: usize = 24;
const SAMPLED_PAIRS: usize = 600;
pub const UNITARY_TOL: f64 = 1e-10;

#[derive(Debug, PartialEq, Eq)]
struct GroupData {
    order: usize,
    mul: Vec<Vec<usize>>,
    inv: Vec<usize>,
    identity: usize,
    names: Vec<String>,
}

/// Group with elements `0..order` and an explicit multiplication table.
/// Cheap to clone.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteGroup(Arc<GroupData>);

impl FiniteGroup {
    /// Validates a multiplication table: Latin square, two-sided identity,
    /// inverses, associativity.
    pub fn from_table(mul: Vec<Vec<usize>>) -> Result<Self> {
        let d = mul.len();
        if d == 0 {
            return Err(Error::InvalidGroup("empty table".into()));
        }
        for (g, row) in mul.iter().enumerate() {
            if row.len() != d {
                return Err(Error::InvalidGroup(format!("row {g} has {} entries, expected {d}", row.len())));
            }
            if let Some(&x) = row.iter().find(|&&x| x >= d) {
                return Err(Error::InvalidGroup(format!("closure: entry {x} in row {g} out of range")));
            }
        }
        for g in 0..d {
            let mut row_seen = vec![false; d];
            let mut col_seen = vec![false; d];
            for h in 0..d {
                if std::mem::replace(&mut row_seen[mul[g][h]], true)
                    || std::mem::replace(&mut col_seen[mul[h][g]], true)
                {
                    return Err(Error::InvalidGroup(format!("Latin square: element {g} has a repeated product")));
                }
            }
        }
        let identity = (0..d)
            .find(|&e| (0..d).all(|g| mul[e][g] == g && mul[g][e] == g))
            .ok_or_else(|| Error::InvalidGroup("identity: no two-sided identity element".into()))?;
        let mut inv = vec![0; d];
        for g in 0..d {
            inv[g] = (0..d)
                .find(|&h| mul[g][h] == identity && mul[h][g] == identity)
                .ok_or_else(|| Error::InvalidGroup(format!("inverse: element {g} has no two-sided inverse")))?;
        }
        let assoc = |a: usize, b: usize, c: usize| mul[mul[a][b]][c] == mul[a][mul[b][c]];
        if d <= EXHAUSTIVE_ASSOCIATIVITY_ORDER {
            for a in 0..d {
                for b in 0..d {
                    for c in 0..d {
                        if !assoc(a, b, c) {
                            return Err(Error::InvalidGroup(format!("associativity fails on ({a}, {b}, {c})")));
                        }
                    }
                }
            }
        } else {
            let mut rng = seeded_rng(0x6a09_e667);
            for _ in 0..SAMPLED_TRIPLES {
                let (a, b, c) = (rng.random_range(0..d), rng.random_range(0..d), rng.random_range(0..d));
                if !assoc(a, b, c) {
                    return Err(Error::InvalidGroup(format!("associativity fails on ({a}, {b}, {c})")));
                }
            }
        }
        let names = (0..d).map(|g| g.to_string()).collect();
        Ok(Self(Arc::new(GroupData { order: d, mul, inv, identity, names })))
    }

    fn with_names(self, names: Vec<String>) -> Self {
        let GroupData { order, mul, inv, identity, .. } = Arc::try_unwrap(self.0).unwrap_or_else(|a| GroupData {
            order: a.order,
            mul: a.mul.clone(),
            inv: a.inv.clone(),
            identity: a.identity,
            names: Vec::new(),
        });
        Self(Arc::new(GroupData { order, mul, inv, identity, names }))
    }

    pub fn trivial() -> Self {
        Self::cyclic(1).expect("order 1")
    }

    /// Z_n with element `k` standing for the k-th power of a generator.
    pub fn cyclic(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGroup("cyclic group of order 0".into()));
        }
        let mul = (0..n).map(|a| (0..n).map(|b| (a + b) % n).collect()).collect();
        Ok(Self::from_table(mul)?.with_names((0..n).map(|k| format!("g^{k}")).collect()))
    }

    /// S_n with permutations of `{0..n-1}` in lexicographic order (identity
    /// first) and product `(gh)(x) = g(h(x))`.
    pub fn symmetric(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGroup("symmetric group on 0 points".into()));
        }
        if n > 5 {
            return Err(Error::InvalidGroup(format!("symmetric({n}) is too large for a dense table")));
        }
        let perms = permutations(n);
        let index = |p: &[usize]| perms.iter().position(|q| q == p).expect("closed under composition");
        let mul = perms
            .iter()
            .map(|g| perms.iter().map(|h| index(&h.iter().map(|&x| g[x]).collect::<Vec<_>>())).collect())
            .collect();
        let names = perms
            .iter()
            .map(|p| format!("[{}]", p.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")))
            .collect();
        Ok(Self::from_table(mul)?.with_names(names))
    }

    /// Parses the plain-text table format: first line `d`, then `d` lines of
    /// `d` whitespace-separated indices, row `g` column `h` holding `gh`.
    /// Blank lines and lines starting with `#` are ignored.
    pub fn parse_table(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (ln, first) = lines.next().ok_or(Error::Parse { line: 1, msg: "missing order line".into() })?;
        let d: usize =
            first.parse().map_err(|_| Error::Parse { line: ln, msg: format!("bad group order {first:?}") })?;
        let mut mul = Vec::with_capacity(d);
        for _ in 0..d {
            let (ln, row) = lines.next().ok_or(Error::Parse { line: ln, msg: "table ends early".into() })?;
            let row: Vec<usize> = row
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| Error::Parse { line: ln, msg: format!("bad index {t:?}") }))
                .collect::<Result<_>>()?;
            mul.push(row);
        }
        if let Some((ln, _)) = lines.next() {
            return Err(Error::Parse { line: ln, msg: "trailing content after table".into() });
        }
        Self::from_table(mul)
    }

    pub fn format_table(&self) -> String {
        let mut s = format!("{}\n", self.order());
        for row in &self.0.mul {
            let _ = writeln!(s, "{}", row.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" "));
        }
        s
    }

    pub fn order(&self) -> usize {
        self.0.order
    }

    pub fn mul(&self, g: usize, h: usize) -> usize {
        self.0.mul[g][h]
    }

    pub fn inv(&self, g: usize) -> usize {
        self.0.inv[g]
    }

    pub fn identity(&self) -> usize {
        self.0.identity
    }

    pub fn name(&self, g: usize) -> &str {
        &self.0.names[g]
    }

    pub fn table(&self) -> &[Vec<usize>] {
        &self.0.mul
    }

    pub fn elements(&self) -> std::ops::Range<usize> {
        0..self.order()
    }

    pub fn is_abelian(&self) -> bool {
        self.elements().all(|g| self.elements().all(|h| self.mul(g, h) == self.mul(h, g)))
    }

    /// Pairs `(g, h)` used for homomorphism checks: all pairs for small
    /// groups, a fixed pseudo-random sample otherwise.
    fn check_pairs(&self) -> Vec<(usize, usize)> {
        let d = self.order();
        if d <= EXHAUSTIVE_HOMOMORPHISM_ORDER {
            self.elements().flat_map(|g| self.elements().map(move |h| (g, h))).collect()
        } else {
            let mut rng = seeded_rng(0xbb67_ae85);
            (0..SAMPLED_PAIRS).map(|_| (rng.random_range(0..d), rng.random_range(0..d))).collect()
        }
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for x in 0..used.len() {
            if !used[x] {
                used[x] = true;
                prefix.push(x);
                rec(prefix, used, out);
                prefix.pop();
                used[x] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// Left action of a group on the finite set `0..set_size`:
/// `table[g][a] = g·a`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupAction {
    group: FiniteGroup,
    table: Vec<Vec<usize>>,
}

impl GroupAction {
    pub fn new(group: FiniteGroup, table: Vec<Vec<usize>>) -> Result<Self> {
        if table.len() != group.order() {
            return Err(Error::InvalidAction(format!("{} rows for a group of order {}", table.len(), group.order())));
        }
        let n = table[0].len();
        for (g, row) in table.iter().enumerate() {
            let mut seen = vec![false; n];
            if row.len() != n || row.iter().any(|&a| a >= n || std::mem::replace(&mut seen[a], true)) {
                return Err(Error::InvalidAction(format!("element {g} does not act as a permutation")));
            }
        }
        if (0..n).any(|a| table[group.identity()][a] != a) {
            return Err(Error::InvalidAction("identity does not act trivially".into()));
        }
        for g in group.elements() {
            for h in group.elements() {
                let gh = group.mul(g, h);
                if let Some(a) = (0..n).find(|&a| table[g][table[h][a]] != table[gh][a]) {
                    return Err(Error::InvalidAction(format!("g·(h·a) != (gh)·a for g={g}, h={h}, a={a}")));
                }
            }
        }
        Ok(Self { group, table })
    }

    /// Left multiplication of the group on itself.
    pub fn regular(group: &FiniteGroup) -> Self {
        Self { group: group.clone(), table: group.table().to_vec() }
    }

    /// Every element fixes every point of a `size`-element set.
    pub fn trivial(group: &FiniteGroup, size: usize) -> Self {
        Self { group: group.clone(), table: vec![(0..size).collect(); group.order()] }
    }

    /// S_n acting on `{0..n-1}` by its defining permutations.
    pub fn natural(n: usize) -> Result<Self> {
        let group = FiniteGroup::symmetric(n)?;
        let table = permutations(n);
        Self::new(group, table)
    }

    pub fn group(&self) -> &FiniteGroup {
        &self.group
    }

    pub fn set_size(&self) -> usize {
        self.table[0].len()
    }

    pub fn act(&self, g: usize, a: usize) -> usize {
        self.table[g][a]
    }

    pub fn table(&self) -> &[Vec<usize>] {
        &self.table
    }
}

#[derive(Clone, Debug, PartialEq)]
enum RepKind {
    Trivial,
    Dense(Vec<CMatrix>),
    /// Permutes the `|A|` copies of `factor`: the factor in slot `b` moves to
    /// slot `g·b`.
    FactorPermutation {
        factor: ModeSpace,
        action: GroupAction,
    },
    Tensor(Vec<Representation>),
}

/// Unitary representation of a [`FiniteGroup`] on a [`ModeSpace`].
#[derive(Clone, Debug, PartialEq)]
pub struct Representation {
    group: FiniteGroup,
    space: ModeSpace,
    kind: RepKind,
}

impl Representation {
    /// Representation from explicit per-element unitaries, validated for
    /// unitarity and the homomorphism property.
    pub fn from_unitaries(group: FiniteGroup, space: ModeSpace, unitaries: Vec<CMatrix>) -> Result<Self> {
        let n = space.total_dim();
        if unitaries.len() != group.order() {
            return Err(Error::InvalidRepresentation(format!(
                "{} unitaries for a group of order {}",
                unitaries.len(),
                group.order()
            )));
        }
        for (g, u) in unitaries.iter().enumerate() {
            if u.nrows() != n || u.ncols() != n {
                return Err(Error::InvalidRepresentation(format!("U({g}) has wrong shape")));
            }
            if max_abs(&(u.adjoint() * u - CMatrix::identity(n, n))) > UNITARY_TOL {
                return Err(Error::InvalidRepresentation(format!("U({g}) is not unitary")));
            }
        }
        let rep = Self { group, space, kind: RepKind::Dense(unitaries) };
        let res = rep.homomorphism_residual();
        if res > UNITARY_TOL {
            return Err(Error::InvalidRepresentation(format!("homomorphism residual {res:e}")));
        }
        Ok(rep)
    }

    pub fn trivial(group: FiniteGroup, space: ModeSpace) -> Self {
        Self { group, space, kind: RepKind::Trivial }
    }

    /// `U(g)|h⟩ = |gh⟩` on a single mode of dimension `|G|`.
    pub fn regular(group: &FiniteGroup) -> Self {
        let d = group.order();
        let unitaries = group
            .elements()
            .map(|g| {
                let mut u = CMatrix::zeros(d, d);
                for h in group.elements() {
                    u[(group.mul(g, h), h)] = C64::new(1.0, 0.0);
                }
                u
            })
            .collect();
        Self {
            group: group.clone(),
            space: ModeSpace::new(vec![d]).expect("positive order"),
            kind: RepKind::Dense(unitaries),
        }
    }

    /// Permutation of `|A|` tensor copies of `factor` following `action`.
    pub fn factor_permutation(action: GroupAction, factor: ModeSpace) -> Self {
        let mut space = ModeSpace::scalar();
        for _ in 0..action.set_size() {
            space = space.concat(&factor);
        }
        Self {
            group: action.group().clone(),
            space: ModeSpace::new(space.dims().to_vec()).expect("positive dims"),
            kind: RepKind::FactorPermutation { factor, action },
        }
    }

    /// `U_1(g) ⊗ U_2(g) ⊗ …` over the concatenated spaces.
    pub fn tensor(parts: Vec<Representation>) -> Result<Self> {
        let group =
            parts.first().ok_or_else(|| Error::InvalidRepresentation("empty tensor product".into()))?.group.clone();
        if parts.iter().any(|p| p.group != group) {
            return Err(Error::InvalidRepresentation("tensor factors over different groups".into()));
        }
        let space = parts.iter().fold(ModeSpace::scalar(), |s, p| s.concat(&p.space));
        let space = ModeSpace::new(space.dims().to_vec())?;
        Ok(Self { group, space, kind: RepKind::Tensor(parts) })
    }

    /// `rep^{⊗count}`.
    pub fn power(rep: &Representation, count: usize) -> Result<Self> {
        Self::tensor(vec![rep.clone(); count])
    }

    pub fn group(&self) -> &FiniteGroup {
        &self.group
    }

    pub fn space(&self) -> &ModeSpace {
        &self.space
    }

    /// Short description of the construction, for reports.
    pub fn describe(&self) -> String {
        match &self.kind {
            RepKind::Trivial => "trivial".into(),
            RepKind::Dense(_) => format!("dense dim {}", self.space.total_dim()),
            RepKind::FactorPermutation { factor, action } => {
                format!("factor-permutation of {} copies of {:?}", action.set_size(), factor.dims())
            }
            RepKind::Tensor(parts) => {
                format!("tensor({})", parts.iter().map(|p| p.describe()).collect::<Vec<_>>().join(", "))
            }
        }
    }

    /// Structural view used by serialization.
    pub fn structure(&self) -> RepStructure<'_> {
        match &self.kind {
            RepKind::Trivial => RepStructure::Trivial,
            RepKind::Dense(us) => RepStructure::Dense(us),
            RepKind::FactorPermutation { factor, action } => RepStructure::FactorPermutation { factor, action },
            RepKind::Tensor(parts) => RepStructure::Tensor(parts),
        }
    }

    /// Dense matrix of `U(g)`. Avoid on large spaces; prefer
    /// [`Representation::apply_columns`].
    pub fn unitary(&self, g: usize) -> DenseOperator {
        let n = self.space.total_dim();
        let m = self.apply_columns(g, &CMatrix::identity(n, n));
        DenseOperator::on(self.space.clone(), m).expect("shape")
    }

    /// `U(g)|ψ⟩`.
    pub fn apply(&self, g: usize, ket: &DenseKet) -> Result<DenseKet> {
        if !ket.space().same_shape(&self.space) {
            return Err(Error::DimensionMismatch(format!(
                "representation on {:?} applied to ket on {:?}",
                self.space.dims(),
                ket.space().dims()
            )));
        }
        let out = self.apply_at(g, ket.clone().relabel(ModeSpace::new(ket.space().dims().to_vec())?)?, 0)?;
        out.relabel(ket.space().clone())
    }

    fn apply_at(&self, g: usize, ket: DenseKet, offset: usize) -> Result<DenseKet> {
        match &self.kind {
            RepKind::Trivial => Ok(ket),
            RepKind::Dense(us) => {
                let op = DenseOperator::on(self.space.clone(), us[g].clone())?;
                ket.apply_on_modes(&op, offset)
            }
            RepKind::FactorPermutation { factor, action } => {
                let order = self.factor_order(factor, action, g, offset, ket.space().num_modes());
                let space = ket.space().clone();
                ket.permute_modes(&order)?.relabel(space)
            }
            RepKind::Tensor(parts) => {
                let mut ket = ket;
                let mut off = offset;
                for p in parts {
                    ket = p.apply_at(g, ket, off)?;
                    off += p.space.num_modes();
                }
                Ok(ket)
            }
        }
    }

    /// Mode order moving block `a` to block `g·a`, for blocks starting at
    /// mode `offset` of `total`.
    fn factor_order(
        &self,
        factor: &ModeSpace,
        action: &GroupAction,
        g: usize,
        offset: usize,
        total: usize,
    ) -> Vec<usize> {
        let m = factor.num_modes();
        let ginv = self.group.inv(g);
        let mut order: Vec<usize> = (0..total).collect();
        for a in 0..action.set_size() {
            let src = action.act(ginv, a);
            for t in 0..m {
                order[offset + a * m + t] = offset + src * m + t;
            }
        }
        order
    }

    /// `U(g) · m` for a matrix whose rows index this representation's space.
    pub fn apply_columns(&self, g: usize, m: &CMatrix) -> CMatrix {
        if let RepKind::Dense(us) = &self.kind {
            return &us[g] * m;
        }
        if let RepKind::FactorPermutation { factor, action } = &self.kind {
            let order = self.factor_order(factor, action, g, 0, self.space.num_modes());
            let idx = self.space.permutation_indices(&order).expect("valid block permutation");
            return CMatrix::from_fn(m.nrows(), m.ncols(), |r, c| m[(idx[r], c)]);
        }
        if matches!(self.kind, RepKind::Trivial) {
            return m.clone();
        }
        let cols: Vec<_> = m
            .column_iter()
            .map(|c| {
                let ket = DenseKet::new(self.space.clone(), c.into_owned()).expect("row count matches space");
                self.apply(g, &ket).expect("same space").into_amplitudes()
            })
            .collect();
        if cols.is_empty() {
            return CMatrix::zeros(m.nrows(), 0);
        }
        CMatrix::from_columns(&cols)
    }

    /// `m · U(g)†`, for a matrix whose columns index this space.
    pub fn apply_adjoint_right(&self, g: usize, m: &CMatrix) -> CMatrix {
        if let RepKind::FactorPermutation { factor, action } = &self.kind {
            let order = self.factor_order(factor, action, g, 0, self.space.num_modes());
            let idx = self.space.permutation_indices(&order).expect("valid block permutation");
            return CMatrix::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, idx[c])]);
        }
        if m.nrows() > self.space.total_dim() {
            return m * self.unitary(g).matrix().adjoint();
        }
        self.apply_columns(g, &m.adjoint()).adjoint()
    }

    /// `max_{g,h} ‖U(g)U(h) − U(gh)‖`: operator norm on spaces up to 256
    /// dimensions, otherwise the largest deviation on a fixed set of random
    /// probe vectors.
    pub fn homomorphism_residual(&self) -> f64 {
        let n = self.space.total_dim();
        let probes = if n <= 256 {
            CMatrix::identity(n, n)
        } else {
            let mut rng = seeded_rng(0x3c6e_f372);
            let k = crate::hilbert::haar_ket(self.space.clone(), &mut rng);
            let k2 = crate::hilbert::haar_ket(self.space.clone(), &mut rng);
            CMatrix::from_columns(&[k.into_amplitudes(), k2.into_amplitudes()])
        };
        let mut worst: f64 = 0.0;
        for (g, h) in self.group.check_pairs() {
            let lhs = self.apply_columns(g, &self.apply_columns(h, &probes));
            let rhs = self.apply_columns(self.group.mul(g, h), &probes);
            let diff = lhs - rhs;
            let r =
                if n <= 256 { operator_norm(&diff) } else { diff.column_iter().fold(0.0, |a: f64, c| a.max(c.norm())) };
            worst = worst.max(r);
        }
        worst
    }
}

/// Borrowed structure of a [`Representation`].
pub enum RepStructure<'a> {
    Trivial,
    Dense(&'a [CMatrix]),
    FactorPermutation { factor: &'a ModeSpace, action: &'a GroupAction },
    Tensor(&'a [Representation]),
}

/// Integer U(1) charges of one mode's basis vectors.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ChargeRep {
    charges: Vec<i64>,
}

impl ChargeRep {
    pub fn new(charges: Vec<i64>) -> Result<Self> {
        if charges.is_empty() {
            return Err(Error::InvalidRepresentation("empty charge list".into()));
        }
        Ok(Self { charges })
    }

    /// Charges `lo, lo+1, …, hi`.
    pub fn range(lo: i64, hi: i64) -> Result<Self> {
        Self::new((lo..=hi).collect())
    }

    pub fn charges(&self) -> &[i64] {
        &self.charges
    }

    pub fn dim(&self) -> usize {
        self.charges.len()
    }
}

/// `diag(e^{i q_k θ})`.
pub fn u1_unitary(rep: &ChargeRep, theta: f64) -> DenseOperator {
    let n = rep.dim();
    let mut m = CMatrix::zeros(n, n);
    for (k, &q) in rep.charges.iter().enumerate() {
        m[(k, k)] = C64::from_polar(1.0, q as f64 * theta);
    }
    DenseOperator::on(ModeSpace::new(vec![n]).expect("nonempty"), m).expect("square")
}

/// Total charge of every basis state of `⊗ reps`, in row-major order.
pub fn total_charges(reps: &[ChargeRep]) -> Vec<i64> {
    reps.iter().fold(vec![0i64], |acc, r| acc.iter().flat_map(|&a| r.charges.iter().map(move |&q| a + q)).collect())
}

/// Kraus family `{U_out(g) K U_in(g)† / √|G|}` of the group average of `channel`.
pub fn twirl_channel(channel: &Channel, rep_in: &Representation, rep_out: &Representation) -> Result<Channel> {
    if rep_in.group() != rep_out.group() {
        return Err(Error::InvalidRepresentation("input and output reps over different groups".into()));
    }
    if !rep_in.space().same_shape(channel.space_in()) || !rep_out.space().same_shape(channel.space_out()) {
        return Err(Error::DimensionMismatch(format!(
            "representations on {:?} -> {:?} vs channel {:?} -> {:?}",
            rep_in.space().dims(),
            rep_out.space().dims(),
            channel.space_in().dims(),
            channel.space_out().dims()
        )));
    }
    let group = rep_in.group();
    let w = C64::new(1.0 / (group.order() as f64).sqrt(), 0.0);
    let mut kraus = Vec::with_capacity(group.order() * channel.kraus().len());
    for g in group.elements() {
        for k in channel.kraus() {
            let conj = rep_out.apply_columns(g, &rep_in.apply_adjoint_right(g, k));
            kraus.push(conj * w);
        }
    }
    Channel::new(channel.space_in().clone(), channel.space_out().clone(), kraus)
}

/// `U_out(g) · E(U_in(g)† · U_in(g)) · U_out(g)†` as a Kraus family.
pub fn conjugate_channel(
    channel: &Channel,
    rep_in: &Representation,
    rep_out: &Representation,
    g: usize,
) -> Result<Channel> {
    let kraus = channel.kraus().iter().map(|k| rep_out.apply_columns(g, &rep_in.apply_adjoint_right(g, k))).collect();
    Channel::new(channel.space_in().clone(), channel.space_out().clone(), kraus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::choi_distance;
    use crate::hilbert::haar_ket;
    use crate::hilbert::ZERO;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn permutation_fast_paths_match_dense_unitaries() {
        let rep =
            Representation::factor_permutation(GroupAction::natural(3).unwrap(), ModeSpace::new(vec![2]).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = CMatrix::from_fn(8, 5, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let wide = m.adjoint();
        for g in rep.group().elements() {
            let u = rep.unitary(g).into_matrix();
            assert_eq!(rep.apply_columns(g, &m), &u * &m);
            assert!(crate::hilbert::max_abs(&(rep.apply_adjoint_right(g, &wide) - &wide * u.adjoint())) == 0.0);
        }
    }

    #[test]
    fn small_groups() {
        let t = FiniteGroup::cyclic(1).unwrap();
        assert_eq!(t.order(), 1);
        let z4 = FiniteGroup::cyclic(4).unwrap();
        assert_eq!(z4.mul(1, 3), 0);
        assert_eq!(z4.inv(1), 3);
        let s3 = FiniteGroup::symmetric(3).unwrap();
        assert_eq!(s3.order(), 6);
        assert_eq!(s3.identity(), 0);
        assert!(!s3.is_abelian());
        assert!(z4.is_abelian());
    }

    #[test]
    fn bad_tables_name_the_axiom() {
        let not_latin = vec![vec![0, 1], vec![1, 1]];
        assert!(matches!(FiniteGroup::from_table(not_latin), Err(Error::InvalidGroup(m)) if m.contains("Latin")));
        // x*y = -x-y mod 3: Latin square without identity
        let no_id = vec![vec![0, 2, 1], vec![2, 1, 0], vec![1, 0, 2]];
        assert!(matches!(FiniteGroup::from_table(no_id), Err(Error::InvalidGroup(m)) if m.contains("identity")));
        // loop of order 5 with identity and inverses that is not associative
        let loop5 = vec![
            vec![0, 1, 2, 3, 4],
            vec![1, 0, 3, 4, 2],
            vec![2, 4, 0, 1, 3],
            vec![3, 2, 4, 0, 1],
            vec![4, 3, 1, 2, 0],
        ];
        assert!(matches!(FiniteGroup::from_table(loop5), Err(Error::InvalidGroup(m)) if m.contains("associativity")));
    }

    #[test]
    fn table_text_roundtrip() {
        let s3 = FiniteGroup::symmetric(3).unwrap();
        let parsed = FiniteGroup::parse_table(&s3.format_table()).unwrap();
        assert_eq!(parsed.table(), s3.table());
        assert!(FiniteGroup::parse_table("2\n0 1\n").is_err());
        assert!(FiniteGroup::parse_table("x\n").is_err());
    }

    #[test]
    fn regular_rep_cases() {
        let t = Representation::regular(&FiniteGroup::trivial());
        assert_eq!(t.unitary(0).matrix(), &CMatrix::identity(1, 1));
        let z2 = FiniteGroup::cyclic(2).unwrap();
        let r = Representation::regular(&z2);
        let swap = CMatrix::from_row_slice(2, 2, &[ZERO, C64::new(1.0, 0.0), C64::new(1.0, 0.0), ZERO]);
        assert_eq!(r.unitary(1).matrix(), &swap);
        let s3 = FiniteGroup::symmetric(3).unwrap();
        let r = Representation::regular(&s3);
        assert_eq!(r.homomorphism_residual(), 0.0);
        for g in s3.elements() {
            let u = r.unitary(g);
            // permutation matrix: exactly one 1 per column
            for c in u.matrix().column_iter() {
                assert_eq!(c.iter().filter(|z| **z == C64::new(1.0, 0.0)).count(), 1);
                assert_eq!(c.iter().filter(|z| **z == ZERO).count(), 5);
            }
        }
    }

    #[test]
    fn factor_permutation_cases() {
        let q = ModeSpace::new(vec![2]).unwrap();
        let trivial = Representation::factor_permutation(GroupAction::trivial(&FiniteGroup::trivial(), 2), q.clone());
        assert_eq!(trivial.unitary(0).matrix(), &CMatrix::identity(4, 4));

        let z2 = FiniteGroup::cyclic(2).unwrap();
        let swap = Representation::factor_permutation(GroupAction::regular(&z2), q);
        let u = swap.unitary(1);
        for (i, j) in [(0, 0), (1, 2), (2, 1), (3, 3)] {
            assert_eq!(u.matrix()[(i, j)], C64::new(1.0, 0.0));
        }
    }

    #[test]
    fn s3_factor_permutation_moves_slots() {
        // U(g) puts input slot g^{-1}·a into output slot a
        let s3 = FiniteGroup::symmetric(3).unwrap();
        let action = GroupAction::natural(3).unwrap();
        let space = ModeSpace::new(vec![3]).unwrap();
        let rep = Representation::factor_permutation(action.clone(), space);
        assert_eq!(rep.homomorphism_residual(), 0.0);
        let three = ModeSpace::uniform(3, 3).unwrap();
        for g in s3.elements() {
            for digits in [[0usize, 1, 2], [2, 2, 0], [1, 0, 0]] {
                let ket = DenseKet::basis(three.clone(), three.index_of(&digits)).unwrap();
                let out = rep.apply(g, &ket).unwrap();
                let expect: Vec<usize> = (0..3).map(|a| digits[action.act(s3.inv(g), a)]).collect();
                assert_eq!(out, DenseKet::basis(three.clone(), three.index_of(&expect)).unwrap());
            }
        }
    }

    #[test]
    fn invalid_action_rejected() {
        let z2 = FiniteGroup::cyclic(2).unwrap();
        assert!(GroupAction::new(z2.clone(), vec![vec![1, 0], vec![1, 0]]).is_err());
        let z3 = FiniteGroup::cyclic(3).unwrap();
        // generator acting as a transposition is not a Z3 action
        assert!(GroupAction::new(z3, vec![vec![0, 1], vec![1, 0], vec![0, 1]]).is_err());
    }

    #[test]
    fn dense_rep_validation() {
        let z2 = FiniteGroup::cyclic(2).unwrap();
        let sp = ModeSpace::new(vec![2]).unwrap();
        let z = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.0)]));
        assert!(
            Representation::from_unitaries(z2.clone(), sp.clone(), vec![CMatrix::identity(2, 2), z.clone()]).is_ok()
        );
        assert!(Representation::from_unitaries(z2.clone(), sp.clone(), vec![z.clone(), z.clone()]).is_err());
        assert!(Representation::from_unitaries(z2, sp, vec![CMatrix::identity(2, 2), z * C64::new(2.0, 0.0)]).is_err());
    }

    #[test]
    fn tensor_rep_matches_kron() {
        let z3 = FiniteGroup::cyclic(3).unwrap();
        let r = Representation::regular(&z3);
        let t = Representation::power(&r, 2).unwrap();
        for g in z3.elements() {
            let expect = crate::hilbert::tensor_product(&r.unitary(g), &r.unitary(g));
            assert_eq!(t.unitary(g).matrix(), expect.matrix());
        }
    }

    #[test]
    fn u1_cases() {
        let r = ChargeRep::new(vec![0, 1]).unwrap();
        assert_eq!(u1_unitary(&r, 0.0).matrix(), &CMatrix::identity(2, 2));
        let u = u1_unitary(&r, std::f64::consts::PI);
        assert!((u.matrix()[(1, 1)] - C64::new(-1.0, 0.0)).norm() < 1e-15);
        let m1 = ChargeRep::new(vec![3, 0, -3]).unwrap();
        let u = u1_unitary(&m1, 0.4);
        assert!((u.matrix()[(0, 0)] - C64::from_polar(1.0, 1.2)).norm() < 1e-15);
        assert!((u.matrix()[(2, 2)] - C64::from_polar(1.0, -1.2)).norm() < 1e-15);
        assert_eq!(total_charges(&[r.clone(), r]), vec![0, 1, 1, 2]);
    }

    #[test]
    fn u1_composition_law() {
        let r = ChargeRep::range(-4, 4).unwrap();
        for (a, b) in [(0.3, 1.1), (-2.0, 0.7), (5.0, 5.0)] {
            let lhs = u1_unitary(&r, a).compose(&u1_unitary(&r, b)).unwrap();
            let rhs = u1_unitary(&r, a + b);
            assert!(max_abs(&(lhs.matrix() - rhs.matrix())) < 1e-13);
        }
    }

    fn random_channel(space_in: ModeSpace, space_out: ModeSpace, seed: u64) -> Channel {
        // random isometry into out ⊗ env, split into Kraus operators
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (din, dout) = (space_in.total_dim(), space_out.total_dim());
        let env = 2;
        let cols: Vec<_> =
            (0..din).map(|_| haar_ket(ModeSpace::new(vec![dout * env]).unwrap(), &mut rng).into_amplitudes()).collect();
        let q = CMatrix::from_columns(&cols).qr().q();
        let kraus = (0..env).map(|e| CMatrix::from_fn(dout, din, |i, j| q[(i * env + e, j)])).collect();
        Channel::new(space_in, space_out, kraus).unwrap()
    }

    #[test]
    fn twirl_properties() {
        let s3 = FiniteGroup::symmetric(3).unwrap();
        let rep =
            Representation::factor_permutation(GroupAction::natural(3).unwrap(), ModeSpace::new(vec![2]).unwrap());
        let sp = rep.space().clone();
        let ch = random_channel(sp.clone(), sp.clone(), 3);
        let tw = twirl_channel(&ch, &rep, &rep).unwrap();
        for g in s3.elements() {
            let conj = conjugate_channel(&tw, &rep, &rep, g).unwrap();
            assert!(choi_distance(&conj, &tw) < 1e-12);
        }
        let tw2 = twirl_channel(&tw, &rep, &rep).unwrap();
        assert!(choi_distance(&tw2, &tw) < 1e-12);
        assert!(choi_distance(&ch, &tw) > 1e-3);

        let triv = FiniteGroup::trivial();
        let r1 = Representation::trivial(triv, sp.clone());
        let same = twirl_channel(&ch, &r1, &r1).unwrap();
        assert!(choi_distance(&same, &ch) < 1e-12);
    }
}
