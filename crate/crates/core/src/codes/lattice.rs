//! Truncated U(1) lattice code on three integer-momentum modes,
//! `|x⟩ ↦ Σ_{|y|≤K} |−3y, −x+y, 2(y+x)⟩ / √(2K+1)`, and its decoders built
//! from integer basis maps.

use std::collections::{BTreeMap, HashMap};

use super::{Code, Symmetry};
use crate::channels::{Channel, Circuit, Stage};
use crate::error::{Error, Result};
use crate::groups::ChargeRep;
use crate::hilbert::{CMatrix, DenseKet, DenseOperator, ModeSpace, C64};

pub const DEFAULT_L: i64 = 3;
pub const DEFAULT_K: i64 = 8;

/// Input support `|x| ≤ l`, summation range `|y| ≤ k`, and the inclusive
/// momentum range of each output mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LatticeWindow {
    l: i64,
    k: i64,
    ranges: [(i64, i64); 3],
}

impl LatticeWindow {
    /// Smallest ranges that hold every encoded amplitude.
    pub fn new(l: i64, k: i64) -> Result<Self> {
        if l < 0 || k < 0 {
            return Err(Error::InvalidWindow(format!("negative bound (l={l}, k={k})")));
        }
        Self::with_ranges(l, k, [(-3 * k, 3 * k), (-(l + k), l + k), (-2 * (l + k), 2 * (l + k))])
    }

    pub fn with_ranges(l: i64, k: i64, ranges: [(i64, i64); 3]) -> Result<Self> {
        if l < 0 || k < 0 {
            return Err(Error::InvalidWindow(format!("negative bound (l={l}, k={k})")));
        }
        let w = Self { l, k, ranges };
        for x in -l..=l {
            for y in -k..=k {
                let v = encoded_values(x, y);
                for m in 0..3 {
                    if w.index(m, v[m]).is_none() {
                        return Err(Error::InvalidWindow(format!(
                            "mode {m} range {:?} misses momentum {} (x={x}, y={y})",
                            ranges[m], v[m]
                        )));
                    }
                }
            }
        }
        Ok(w)
    }

    pub fn l(&self) -> i64 {
        self.l
    }

    pub fn k(&self) -> i64 {
        self.k
    }

    pub fn ranges(&self) -> [(i64, i64); 3] {
        self.ranges
    }

    pub fn input_dim(&self) -> usize {
        (2 * self.l + 1) as usize
    }

    pub fn mode_dim(&self, m: usize) -> usize {
        (self.ranges[m].1 - self.ranges[m].0 + 1) as usize
    }

    pub fn output_space(&self) -> ModeSpace {
        ModeSpace::new((0..3).map(|m| self.mode_dim(m)).collect()).expect("nonempty ranges")
    }

    pub fn input_space(&self) -> ModeSpace {
        ModeSpace::new(vec![self.input_dim()]).expect("nonempty window")
    }

    /// Basis index of momentum `v` on mode `m`.
    pub fn index(&self, m: usize, v: i64) -> Option<usize> {
        let (lo, hi) = self.ranges[m];
        (lo..=hi).contains(&v).then(|| (v - lo) as usize)
    }

    pub fn value(&self, m: usize, idx: usize) -> i64 {
        self.ranges[m].0 + idx as i64
    }

    pub fn input_index(&self, x: i64) -> Option<usize> {
        (-self.l..=self.l).contains(&x).then(|| (x + self.l) as usize)
    }

    pub fn charges(&self, m: usize) -> ChargeRep {
        ChargeRep::range(self.ranges[m].0, self.ranges[m].1).expect("nonempty range")
    }
}

/// Output momenta of the `(x, y)` term.
pub(crate) fn encoded_values(x: i64, y: i64) -> [i64; 3] {
    [-3 * y, -x + y, 2 * (y + x)]
}

/// `(a, b) ↦ matrix · (a / d₀, b / d₁)`, defined when `d₀ | a` and `d₁ | b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LatticeMap {
    pre_divide: [i64; 2],
    matrix: [[i64; 2]; 2],
}

impl LatticeMap {
    pub fn new(pre_divide: [i64; 2], matrix: [[i64; 2]; 2]) -> Result<Self> {
        if pre_divide.iter().any(|&d| d < 1) {
            return Err(Error::InvalidWindow(format!("divisors {pre_divide:?} must be positive")));
        }
        let det = matrix[0][0] * matrix[1][1] - matrix[0][1] * matrix[1][0];
        if det.abs() != 1 {
            return Err(Error::InvalidWindow(format!("matrix {matrix:?} is not unimodular")));
        }
        Ok(Self { pre_divide, matrix })
    }

    /// Unimodular linear map.
    pub fn linear(matrix: [[i64; 2]; 2]) -> Self {
        Self::new([1, 1], matrix).expect("unimodular constant")
    }

    /// `|d₀a, d₁b⟩ ↦ |a, b⟩`.
    pub fn divide(d0: i64, d1: i64) -> Self {
        Self::new([d0, d1], [[1, 0], [0, 1]]).expect("positive constant")
    }

    pub fn pre_divide(&self) -> [i64; 2] {
        self.pre_divide
    }

    pub fn matrix(&self) -> [[i64; 2]; 2] {
        self.matrix
    }

    pub fn apply(&self, (a, b): (i64, i64)) -> Option<(i64, i64)> {
        let [d0, d1] = self.pre_divide;
        if a % d0 != 0 || b % d1 != 0 {
            return None;
        }
        let (a, b) = (a / d0, b / d1);
        let m = self.matrix;
        Some((m[0][0] * a + m[0][1] * b, m[1][0] * a + m[1][1] * b))
    }
}

/// Map sequence for one erased mode; after the last step register `keep`
/// holds the logical value and the other register is traced out.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticeDecoderSteps {
    pub steps: Vec<LatticeMap>,
    pub keep: usize,
}

impl LatticeDecoderSteps {
    /// `(junk, logical)` for a surviving pair, if every step is defined.
    pub fn apply(&self, pair: (i64, i64)) -> Option<(i64, i64)> {
        let (a, b) = self.steps.iter().try_fold(pair, |p, m| m.apply(p))?;
        Some(if self.keep == 0 { (b, a) } else { (a, b) })
    }
}

/// Decoder steps for erasure of output mode `j` (0-based).
///
/// | erased | surviving `(a, b)` | steps | result |
/// |---|---|---|---|
/// | 0 | `(−x+y, 2y+2x)` | `(a, b−2a)`, `|a,4b⟩→|a,b⟩`, `(a+b, b)` | `(y, x)`, keep 1 |
/// | 1 | `(−3y, 2y+2x)` | `|3a,2b⟩→|a,b⟩`, `(a, 2a+b)`, `(b−a, b)` | `(x, x−y)`, keep 0 |
/// | 2 | `(−3y, −x+y)` | `|3a,b⟩→|a,b⟩`, `(a, a+b)`, `(−(a+b), −b)` | `(x+y, x)`, keep 1 |
pub fn lattice_steps(j: usize) -> LatticeDecoderSteps {
    match j {
        0 => LatticeDecoderSteps {
            steps: vec![
                LatticeMap::linear([[1, 0], [-2, 1]]),
                LatticeMap::divide(1, 4),
                LatticeMap::linear([[1, 1], [0, 1]]),
            ],
            keep: 1,
        },
        1 => LatticeDecoderSteps {
            steps: vec![
                LatticeMap::divide(3, 2),
                LatticeMap::linear([[1, 0], [2, 1]]),
                LatticeMap::linear([[-1, 1], [0, 1]]),
            ],
            keep: 0,
        },
        2 => LatticeDecoderSteps {
            steps: vec![
                LatticeMap::divide(3, 1),
                LatticeMap::linear([[1, 0], [1, 1]]),
                LatticeMap::linear([[-1, -1], [0, -1]]),
            ],
            keep: 1,
        },
        _ => panic!("lattice code has three modes"),
    }
}

/// Step lists that differ from [`lattice_steps`] only in the final map,
/// `(a−b, b)`, `(−(a+b), b)` or `(a+b, −a)`. They look plausible but do not decode.
pub fn naive_lattice_steps(j: usize) -> LatticeDecoderSteps {
    let mut s = lattice_steps(j);
    let last = match j {
        0 => [[1, -1], [0, 1]],
        1 => [[-1, -1], [0, 1]],
        _ => [[1, 1], [-1, 0]],
    };
    *s.steps.last_mut().expect("three steps") = LatticeMap::linear(last);
    s
}

/// Checks that `steps` sends every reachable surviving pair of every window
/// input `|x⟩` to `(junk, x)` with `junk` a function of the erased momentum
/// alone. This is what exact recovery of each branch requires.
pub fn validate_lattice_decoder(window: &LatticeWindow, j: usize, steps: &LatticeDecoderSteps) -> Result<()> {
    let mut junk_of: HashMap<i64, i64> = HashMap::new();
    for x in -window.l..=window.l {
        for y in -window.k..=window.k {
            let v = encoded_values(x, y);
            let pair = surviving_pair(&v, j);
            let (junk, got) = steps.apply(pair).ok_or_else(|| {
                Error::DecoderValidation(format!("mode {j}: step undefined on {pair:?} (x={x}, y={y})"))
            })?;
            if got != x {
                return Err(Error::DecoderValidation(format!("mode {j}: {pair:?} decodes to {got}, expected {x}")));
            }
            if let Some(prev) = junk_of.insert(v[j], junk) {
                if prev != junk {
                    return Err(Error::DecoderValidation(format!(
                        "mode {j}: residual register depends on the input (erased momentum {})",
                        v[j]
                    )));
                }
            }
        }
    }
    Ok(())
}

fn surviving_pair(v: &[i64; 3], j: usize) -> (i64, i64) {
    let rest: Vec<i64> = (0..3).filter(|&m| m != j).map(|m| v[m]).collect();
    (rest[0], rest[1])
}

/// Basis-map decoder on the two surviving modes followed by discarding the
/// residual register. Pairs outside the decodable domain go to extra
/// residual slots so the map stays injective.
fn lattice_decoder(window: &LatticeWindow, j: usize, steps: &LatticeDecoderSteps) -> Result<Circuit> {
    let space = window.output_space().without(j)?;
    let rest_modes: Vec<usize> = (0..3).filter(|&m| m != j).collect();
    let (da, db) = (space.dim(0), space.dim(1));
    let mut valid = Vec::new();
    let mut invalid = Vec::new();
    for ia in 0..da {
        for ib in 0..db {
            let pair = (window.value(rest_modes[0], ia), window.value(rest_modes[1], ib));
            match steps.apply(pair) {
                Some((junk, x)) if window.input_index(x).is_some() => valid.push((ia * db + ib, junk, x)),
                _ => invalid.push(ia * db + ib),
            }
        }
    }
    let (jmin, jmax) = valid.iter().fold((i64::MAX, i64::MIN), |(lo, hi), &(_, junk, _)| (lo.min(junk), hi.max(junk)));
    let (jmin, span) = if valid.is_empty() { (0, 0) } else { (jmin, (jmax - jmin + 1) as usize) };
    let xdim = window.input_dim();
    let extra = invalid.len().div_ceil(xdim);
    let junk_dim = (span + extra).max(1);
    let mut targets = vec![0usize; da * db];
    for &(src, junk, x) in &valid {
        targets[src] = window.input_index(x).expect("checked") * junk_dim + (junk - jmin) as usize;
    }
    for (i, &src) in invalid.iter().enumerate() {
        targets[src] = (i % xdim) * junk_dim + span + i / xdim;
    }
    let out = ModeSpace::new(vec![xdim, junk_dim])?;
    Circuit::new(space).then(Stage::BasisMap { space_out: out, targets })?.then(Stage::Discard { mode: 1 })
}

/// Validated decoders for every erased mode.
pub fn u1_lattice_decoders(window: &LatticeWindow) -> Result<BTreeMap<usize, Circuit>> {
    (0..3)
        .map(|j| {
            let steps = lattice_steps(j);
            validate_lattice_decoder(window, j, &steps)?;
            Ok((j, lattice_decoder(window, j, &steps)?))
        })
        .collect()
}

/// Builds a decoder circuit from arbitrary steps without validation.
pub fn lattice_decoder_unchecked(window: &LatticeWindow, j: usize, steps: &LatticeDecoderSteps) -> Result<Circuit> {
    lattice_decoder(window, j, steps)
}

/// Unnormalized encoder entries `(output index, input index)`.
fn encoder_support(window: &LatticeWindow) -> Vec<(usize, usize)> {
    let space = window.output_space();
    let mut out = Vec::new();
    for x in -window.l..=window.l {
        for y in -window.k..=window.k {
            let v = encoded_values(x, y);
            let digits: Vec<usize> = (0..3).map(|m| window.index(m, v[m]).expect("window invariant")).collect();
            out.push((space.index_of(&digits), window.input_index(x).expect("in window")));
        }
    }
    out
}

/// The lattice code with validated decoders for all three modes.
pub fn u1_lattice_code(window: &LatticeWindow) -> Result<Code> {
    let space_out = window.output_space();
    let space_in = window.input_space();
    let norm = (2 * window.k + 1) as f64;
    let s = C64::new(1.0 / norm.sqrt(), 0.0);
    let mut v = CMatrix::zeros(space_out.total_dim(), space_in.total_dim());
    for (o, i) in encoder_support(window) {
        v[(o, i)] += s;
    }
    let iso = DenseOperator::new(space_out, space_in, v)?;
    let symmetry = Symmetry::U1 {
        charges_in: vec![ChargeRep::range(-window.l, window.l)?],
        charges_out: (0..3).map(|m| window.charges(m)).collect(),
    };
    let mut code = Code::new("u1-lattice", Circuit::from_channel(Channel::isometry(&iso)?), symmetry)?
        .with_param("l", window.l)
        .with_param("k", window.k)
        .with_normalization(norm);
    for (j, dec) in u1_lattice_decoders(window)? {
        code = code.with_decoder(j, dec)?;
    }
    Ok(code)
}

/// Predicted recovery fidelity of `phi` after erasing mode `j`.
///
/// The recovered state is `Σ_e P_e φφ† P_e / (2K+1)` where `P_e` keeps the
/// inputs compatible with erased momentum `e`.
pub fn branch_projection_fidelity(w: &LatticeWindow, j: usize, phi: &DenseKet) -> f64 {
    let mut weights: BTreeMap<i64, f64> = BTreeMap::new();
    for x in -w.l()..=w.l() {
        let p = phi.amplitudes()[w.input_index(x).unwrap()].norm_sqr();
        for y in -w.k()..=w.k() {
            *weights.entry(encoded_values(x, y)[j]).or_default() += p;
        }
    }
    (weights.values().map(|s| s * s).sum::<f64>() / (2 * w.k() + 1) as f64).sqrt()
}

/// `E†E` of the unnormalized encoder, accumulated in integers.
pub fn unnormalized_gram(window: &LatticeWindow) -> Vec<Vec<i64>> {
    let n = window.input_dim();
    let mut cols: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (o, i) in encoder_support(window) {
        cols[i].push(o);
    }
    (0..n).map(|a| (0..n).map(|b| cols[a].iter().filter(|o| cols[b].contains(o)).count() as i64).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::ensemble_fidelity_pure;
    use crate::hilbert::haar_ket;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_window_dims() {
        let w = LatticeWindow::new(DEFAULT_L, DEFAULT_K).unwrap();
        assert_eq!(w.output_space().dims(), &[49, 23, 45]);
        assert_eq!(w.input_dim(), 7);
        assert!(LatticeWindow::with_ranges(1, 1, [(-2, 2), (-2, 2), (-4, 4)]).is_err());
        assert!(LatticeWindow::new(-1, 2).is_err());
    }

    #[test]
    fn small_encoded_state() {
        let w = LatticeWindow::new(0, 1).unwrap();
        let code = u1_lattice_code(&w).unwrap();
        let out = code.encode(&DenseKet::basis(w.input_space(), 0).unwrap()).unwrap().remove(0);
        let s = 1.0 / 3f64.sqrt();
        let sp = w.output_space();
        for v in [[3, -1, -2], [0, 0, 0], [-3, 1, 2]] {
            let idx = sp.index_of(&(0..3).map(|m| w.index(m, v[m]).unwrap()).collect::<Vec<_>>());
            assert!((out.amplitudes()[idx] - C64::new(s, 0.0)).norm() < 1e-15);
        }
        assert!((out.norm_sqr() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn mode_one_marginal_of_zero_input() {
        let w = LatticeWindow::new(0, 1).unwrap();
        let code = u1_lattice_code(&w).unwrap();
        let out = code.encode(&DenseKet::basis(w.input_space(), 0).unwrap()).unwrap().remove(0);
        let m = out.density().partial_trace(&[0]).unwrap();
        for v in -3..=3 {
            let i = w.index(0, v).unwrap();
            let expect = if v % 3 == 0 { 1.0 / 3.0 } else { 0.0 };
            assert!((m.matrix()[(i, i)].re - expect).abs() < 1e-15);
        }
        assert!((m.matrix() - CMatrix::from_diagonal(&m.matrix().diagonal())).norm() < 1e-15);
    }

    #[test]
    fn gram_is_exact_multiple_of_identity() {
        for (l, k) in [(3, 8), (2, 6), (0, 1)] {
            let w = LatticeWindow::new(l, k).unwrap();
            let g = unnormalized_gram(&w);
            for (a, row) in g.iter().enumerate() {
                for (b, &e) in row.iter().enumerate() {
                    assert_eq!(e, if a == b { 2 * k + 1 } else { 0 });
                }
            }
        }
    }

    #[test]
    fn lattice_steps_validate_naive_ones_do_not() {
        let w = LatticeWindow::new(DEFAULT_L, DEFAULT_K).unwrap();
        for j in 0..3 {
            validate_lattice_decoder(&w, j, &lattice_steps(j)).unwrap();
            assert!(matches!(
                validate_lattice_decoder(&w, j, &naive_lattice_steps(j)),
                Err(Error::DecoderValidation(_))
            ));
        }
    }

    #[test]
    fn third_mode_divisibility_holds_on_support() {
        let w = LatticeWindow::new(DEFAULT_L, DEFAULT_K).unwrap();
        for y in -w.k()..=w.k() {
            let v = encoded_values(1, y);
            assert_eq!(v[0] % 3, 0);
        }
    }

    #[test]
    fn basis_inputs_recover_exactly() {
        let w = LatticeWindow::new(1, 1).unwrap();
        let code = u1_lattice_code(&w).unwrap();
        for j in 0..3 {
            let p = code.pipeline(j).unwrap();
            for x in 0..w.input_dim() {
                let k = DenseKet::basis(w.input_space(), x).unwrap();
                assert!(ensemble_fidelity_pure(&k, &p.apply_ket(&k).unwrap()) > 1.0 - 1e-12);
            }
        }
    }

    #[test]
    fn superposition_recovery_matches_branch_projection() {
        let w = LatticeWindow::new(2, 6).unwrap();
        let code = u1_lattice_code(&w).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for j in 0..3 {
            let p = code.pipeline(j).unwrap();
            for _ in 0..5 {
                let phi = haar_ket(w.input_space(), &mut rng);
                let f = ensemble_fidelity_pure(&phi, &p.apply_ket(&phi).unwrap());
                let expect = branch_projection_fidelity(&w, j, &phi);
                assert!((f - expect).abs() < 1e-10, "mode {j}: {f} vs {expect}");
                if j == 0 {
                    assert!(f > 1.0 - 1e-12);
                }
            }
        }
    }
}
