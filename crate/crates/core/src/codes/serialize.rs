//! Plain-text code and state files.
//!
//! A code file is line oriented:
//!
//! ```text
//! covqec-code 1
//! kind qutrit-base
//! param n 3            (zero or more)
//! seed none            (or an integer)
//! normalization 1.0000000000000000e0
//! tolerance trace_preservation 1e-9
//! space_in 3
//! space_out 3 3 3
//! symmetry none | finite | u1
//! ...symmetry body...
//! kraus 1
//! ...rows*cols lines of `re im`, row-major...
//! ```
//!
//! A finite symmetry is followed by `group <d>` and `d` table rows, then
//! `rep_in` and `rep_out` representation blocks:
//! `trivial <dims>`, `dense <dims>` followed by one matrix per element,
//! `factor-permutation <copies> <factor dims>` followed by the action table,
//! or `tensor <parts>` followed by the parts. A U(1) symmetry lists
//! `charges_in <modes>` and `charges_out <modes>`, each followed by one line
//! of charges per mode.
//!
//! Floats are written with 17 significant digits so a read-write cycle is
//! exact. Decoders are not stored.

use std::fmt::Write as _;

use super::{Code, Symmetry};
use crate::channels::{Channel, Circuit};
use crate::error::{Error, Result};
use crate::groups::{ChargeRep, FiniteGroup, GroupAction, RepStructure, Representation};
use crate::hilbert::{CMatrix, CVector, DenseKet, ModeSpace, C64};

const MAGIC: &str = "covqec-code 1";
const TP_TOL: f64 = 1e-9;

/// Shortest-exact decimal form used in every output file.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn push_complex(out: &mut String, z: C64) {
    let _ = writeln!(out, "{} {}", format_f64(z.re), format_f64(z.im));
}

fn push_matrix(out: &mut String, m: &CMatrix) {
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            push_complex(out, m[(r, c)]);
        }
    }
}

fn dims_str(space: &ModeSpace) -> String {
    space.dims().iter().map(|d| d.to_string()).collect::<Vec<_>>().join(" ")
}

fn push_rep(out: &mut String, rep: &Representation) {
    match rep.structure() {
        RepStructure::Trivial => {
            let _ = writeln!(out, "trivial {}", dims_str(rep.space()));
        }
        RepStructure::Dense(us) => {
            let _ = writeln!(out, "dense {}", dims_str(rep.space()));
            for u in us {
                push_matrix(out, u);
            }
        }
        RepStructure::FactorPermutation { factor, action } => {
            let _ = writeln!(out, "factor-permutation {} {}", action.set_size(), dims_str(factor));
            for row in action.table() {
                let _ = writeln!(out, "{}", row.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" "));
            }
        }
        RepStructure::Tensor(parts) => {
            let _ = writeln!(out, "tensor {}", parts.len());
            for p in parts {
                push_rep(out, p);
            }
        }
    }
}

fn push_charges(out: &mut String, key: &str, reps: &[ChargeRep]) {
    let _ = writeln!(out, "{key} {}", reps.len());
    for r in reps {
        let _ = writeln!(out, "{}", r.charges().iter().map(|q| q.to_string()).collect::<Vec<_>>().join(" "));
    }
}

/// Serializes the encoder and symmetry of `code`.
pub fn write_code(code: &Code) -> Result<String> {
    let kraus = code.encoder_kraus()?;
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "kind {}", code.kind());
    for (k, v) in code.params() {
        let _ = writeln!(out, "param {k} {v}");
    }
    match code.seed() {
        Some(s) => {
            let _ = writeln!(out, "seed {s}");
        }
        None => out.push_str("seed none\n"),
    }
    let _ = writeln!(out, "normalization {}", format_f64(code.normalization()));
    let _ = writeln!(out, "tolerance trace_preservation {TP_TOL:e}");
    let _ = writeln!(out, "space_in {}", dims_str(code.space_in()));
    let _ = writeln!(out, "space_out {}", dims_str(code.space_out()));
    match code.symmetry() {
        Symmetry::None => out.push_str("symmetry none\n"),
        Symmetry::Finite { rep_in, rep_out } => {
            out.push_str("symmetry finite\n");
            let _ = write!(out, "group {}", rep_in.group().format_table());
            out.push_str("rep_in ");
            push_rep(&mut out, rep_in);
            out.push_str("rep_out ");
            push_rep(&mut out, rep_out);
        }
        Symmetry::U1 { charges_in, charges_out } => {
            out.push_str("symmetry u1\n");
            push_charges(&mut out, "charges_in", charges_in);
            push_charges(&mut out, "charges_out", charges_out);
        }
    }
    let _ = writeln!(out, "kraus {}", kraus.len());
    for k in &kraus {
        push_matrix(&mut out, k);
    }
    Ok(out)
}

struct Lines<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
            .collect();
        Self { lines, pos: 0 }
    }

    /// Line number of the most recently consumed line.
    fn line_no(&self) -> usize {
        self.lines.get(self.pos.saturating_sub(1)).map_or(1, |l| l.0)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Parse { line: self.line_no(), msg: msg.into() })
    }

    fn peek(&self) -> Option<&'a str> {
        self.lines.get(self.pos).map(|l| l.1)
    }

    fn next(&mut self) -> Result<&'a str> {
        match self.lines.get(self.pos) {
            Some(&(_, l)) => {
                self.pos += 1;
                Ok(l)
            }
            None => self.err("unexpected end of file"),
        }
    }

    /// Next line, which must start with `key`; returns the remainder.
    fn keyed(&mut self, key: &str) -> Result<&'a str> {
        let l = self.next()?;
        match l.strip_prefix(key) {
            Some(rest) if rest.is_empty() || rest.starts_with(' ') => Ok(rest.trim()),
            _ => self.err(format!("expected `{key}`, found {l:?}")),
        }
    }

    fn parse<T: std::str::FromStr>(&self, tok: &str, what: &str) -> Result<T> {
        tok.parse().or_else(|_| self.err(format!("bad {what} {tok:?}")))
    }

    fn usizes(&self, s: &str, what: &str) -> Result<Vec<usize>> {
        s.split_whitespace().map(|t| self.parse(t, what)).collect()
    }

    fn complex(&mut self) -> Result<C64> {
        let l = self.next()?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != 2 {
            return self.err(format!("expected `re im`, found {l:?}"));
        }
        Ok(C64::new(self.parse(toks[0], "real part")?, self.parse(toks[1], "imaginary part")?))
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<CMatrix> {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            data.push(self.complex()?);
        }
        Ok(CMatrix::from_row_slice(rows, cols, &data))
    }

    fn space(&self, s: &str) -> Result<ModeSpace> {
        let dims = self.usizes(s, "dimension")?;
        ModeSpace::new(dims).or_else(|e| self.err(e.to_string()))
    }
}

fn read_rep(lines: &mut Lines, group: &FiniteGroup, first: &str) -> Result<Representation> {
    let (tag, rest) = first.split_once(' ').unwrap_or((first, ""));
    match tag {
        "trivial" => Ok(Representation::trivial(group.clone(), lines.space(rest)?)),
        "dense" => {
            let space = lines.space(rest)?;
            let n = space.total_dim();
            let us = (0..group.order()).map(|_| lines.matrix(n, n)).collect::<Result<Vec<_>>>()?;
            Representation::from_unitaries(group.clone(), space, us)
        }
        "factor-permutation" => {
            let toks = lines.usizes(rest, "integer")?;
            let (&copies, factor) =
                toks.split_first().ok_or(Error::Parse { line: lines.line_no(), msg: "missing copy count".into() })?;
            let factor = ModeSpace::new(factor.to_vec())?;
            let mut table = Vec::with_capacity(group.order());
            for _ in 0..group.order() {
                let row = lines.next()?;
                let row = lines.usizes(row, "set element")?;
                if row.len() != copies {
                    return lines.err(format!("action row has {} entries, expected {copies}", row.len()));
                }
                table.push(row);
            }
            Ok(Representation::factor_permutation(GroupAction::new(group.clone(), table)?, factor))
        }
        "tensor" => {
            let count: usize = lines.parse(rest, "part count")?;
            let parts = (0..count)
                .map(|_| {
                    let l = lines.next()?;
                    read_rep(lines, group, l)
                })
                .collect::<Result<Vec<_>>>()?;
            Representation::tensor(parts)
        }
        other => lines.err(format!("unknown representation {other:?}")),
    }
}

fn read_charges(lines: &mut Lines, key: &str) -> Result<Vec<ChargeRep>> {
    let count: usize = {
        let s = lines.keyed(key)?;
        lines.parse(s, "mode count")?
    };
    (0..count)
        .map(|_| {
            let l = lines.next()?;
            let qs = l.split_whitespace().map(|t| lines.parse(t, "charge")).collect::<Result<Vec<i64>>>()?;
            ChargeRep::new(qs)
        })
        .collect()
}

/// Parses a code file written by [`write_code`].
pub fn read_code(text: &str) -> Result<Code> {
    let mut lines = Lines::new(text);
    if lines.next()? != MAGIC {
        return lines.err(format!("missing `{MAGIC}` header"));
    }
    let kind = lines.keyed("kind")?.to_string();
    let mut params = Vec::new();
    while lines.peek().is_some_and(|l| l.starts_with("param ")) {
        let rest = lines.keyed("param")?;
        let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
        params.push((k.to_string(), v.to_string()));
    }
    let seed = match lines.keyed("seed")? {
        "none" => None,
        s => Some(lines.parse::<u64>(s, "seed")?),
    };
    let normalization: f64 = {
        let s = lines.keyed("normalization")?;
        lines.parse(s, "normalization")?
    };
    while lines.peek().is_some_and(|l| l.starts_with("tolerance ")) {
        lines.next()?;
    }
    let space_in = {
        let s = lines.keyed("space_in")?;
        lines.space(s)?
    };
    let space_out = {
        let s = lines.keyed("space_out")?;
        lines.space(s)?
    };
    let symmetry = match lines.keyed("symmetry")? {
        "none" => Symmetry::None,
        "finite" => {
            let d: usize = {
                let s = lines.keyed("group")?;
                lines.parse(s, "group order")?
            };
            let mut table = Vec::with_capacity(d);
            for _ in 0..d {
                let row = lines.next()?;
                table.push(lines.usizes(row, "group element")?);
            }
            let group = FiniteGroup::from_table(table)?;
            let first = lines.keyed("rep_in")?;
            let rep_in = read_rep(&mut lines, &group, first)?;
            let first = lines.keyed("rep_out")?;
            let rep_out = read_rep(&mut lines, &group, first)?;
            Symmetry::Finite { rep_in, rep_out }
        }
        "u1" => {
            let charges_in = read_charges(&mut lines, "charges_in")?;
            let charges_out = read_charges(&mut lines, "charges_out")?;
            Symmetry::U1 { charges_in, charges_out }
        }
        other => return lines.err(format!("unknown symmetry {other:?}")),
    };
    let count: usize = {
        let s = lines.keyed("kraus")?;
        lines.parse(s, "Kraus count")?
    };
    let (rows, cols) = (space_out.total_dim(), space_in.total_dim());
    let kraus = (0..count).map(|_| lines.matrix(rows, cols)).collect::<Result<Vec<_>>>()?;
    if lines.peek().is_some() {
        lines.next()?;
        return lines.err("trailing content after Kraus operators");
    }
    let channel = Channel::new(space_in, space_out, kraus)?;
    let mut code = Code::new(kind, Circuit::from_channel(channel), symmetry)?.with_normalization(normalization);
    for (k, v) in params {
        code = code.with_param(&k, v);
    }
    if let Some(s) = seed {
        code = code.with_seed(s);
    }
    Ok(code)
}

/// `dims: d₀ d₁ …` then one `re im` line per amplitude.
pub fn write_state(ket: &DenseKet) -> String {
    let mut out = format!("dims: {}\n", dims_str(ket.space()));
    for &z in ket.amplitudes().iter() {
        push_complex(&mut out, z);
    }
    out
}

/// Parses a state file. Amplitudes are taken as written (no normalization).
pub fn read_state(text: &str) -> Result<DenseKet> {
    let mut lines = Lines::new(text);
    let space = {
        let s = lines.keyed("dims:")?;
        lines.space(s)?
    };
    let n = space.total_dim();
    let mut amps = Vec::with_capacity(n);
    for _ in 0..n {
        amps.push(lines.complex()?);
    }
    if lines.peek().is_some() {
        lines.next()?;
        return lines.err(format!("more than {n} amplitudes"));
    }
    DenseKet::new(space, CVector::from_vec(amps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::{
        permutation_covariant_code, qutrit_base_code, u1_lattice_code, LatticeWindow, DEFAULT_CODE_BUDGET,
    };
    use crate::hilbert::random_haar_ket;

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, -1.0 / 3.0, 1e-300, f64::MAX, 0.0, -0.0, 2f64.sqrt()] {
            let s = format_f64(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
    }

    #[test]
    fn code_round_trip_is_textually_stable() {
        let base = qutrit_base_code().unwrap();
        let z2 = FiniteGroup::cyclic(2).unwrap();
        let perm = permutation_covariant_code(&base, &GroupAction::regular(&z2), DEFAULT_CODE_BUDGET).unwrap();
        let lattice = u1_lattice_code(&LatticeWindow::new(1, 1).unwrap()).unwrap();
        for code in [base, perm, lattice] {
            let text = write_code(&code).unwrap();
            let back = read_code(&text).unwrap();
            assert_eq!(write_code(&back).unwrap(), text);
            assert_eq!(back.space_out().dims(), code.space_out().dims());
            assert_eq!(std::mem::discriminant(back.symmetry()), std::mem::discriminant(code.symmetry()));
        }
    }

    #[test]
    fn state_round_trip() {
        let k = random_haar_ket(6, 11).unwrap();
        let text = write_state(&k);
        assert!(text.starts_with("dims: 6\n"));
        let back = read_state(&text).unwrap();
        assert_eq!(back.amplitudes(), k.amplitudes());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = read_state("dims: 2\n1 0\nx 0\n0 0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = read_state("dims: 1\n1 0\n\n0 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }), "{err}");
        assert!(read_code("nonsense\n").is_err());
        let text = write_code(&qutrit_base_code().unwrap()).unwrap();
        assert!(read_code(&format!("{text}1 0\n")).is_err());
    }
}
