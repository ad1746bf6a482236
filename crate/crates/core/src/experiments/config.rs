use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::groups::FiniteGroup;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
/// Default cap on the total code dimension `d^n`.
pub const DEFAULT_BUDGET: usize = 4096;
/// Budgets above this run but print a warning.
pub const BUDGET_WARN: usize = 16384;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DemoKind {
    U1,
    S3Product,
    Gyroscope,
    Random,
}

impl DemoKind {
    pub const ALL: [DemoKind; 4] = [DemoKind::U1, DemoKind::S3Product, DemoKind::Gyroscope, DemoKind::Random];

    pub fn name(self) -> &'static str {
        match self {
            DemoKind::U1 => "u1",
            DemoKind::S3Product => "s3-product",
            DemoKind::Gyroscope => "gyroscope",
            DemoKind::Random => "random",
        }
    }
}

impl FromStr for DemoKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        DemoKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            Error::Config(format!("unknown demo kind {s:?} (expected u1, s3-product, gyroscope or random)"))
        })
    }
}

/// Group named on the command line: `trivial`, `z<N>`, `s<N>` or
/// `file:PATH` (a multiplication table, see [`FiniteGroup::parse_table`]).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GroupSpec {
    Trivial,
    Cyclic(usize),
    Symmetric(usize),
    File(PathBuf),
}

impl GroupSpec {
    pub fn build(&self) -> Result<FiniteGroup> {
        match self {
            GroupSpec::Trivial => Ok(FiniteGroup::trivial()),
            GroupSpec::Cyclic(n) => FiniteGroup::cyclic(*n),
            GroupSpec::Symmetric(n) => FiniteGroup::symmetric(*n),
            GroupSpec::File(p) => FiniteGroup::parse_table(&std::fs::read_to_string(p)?),
        }
    }
}

impl FromStr for GroupSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("unknown group {s:?} (expected trivial, z<N>, s<N> or file:PATH)"));
        if s == "trivial" {
            return Ok(GroupSpec::Trivial);
        }
        if let Some(p) = s.strip_prefix("file:") {
            return Ok(GroupSpec::File(PathBuf::from(p)));
        }
        let (head, num) = s.split_at(s.len().min(1));
        let n: usize = num.parse().map_err(|_| bad())?;
        match head {
            "z" | "Z" if n >= 1 => Ok(GroupSpec::Cyclic(n)),
            "s" | "S" if n >= 1 => Ok(GroupSpec::Symmetric(n)),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for GroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupSpec::Trivial => write!(f, "trivial"),
            GroupSpec::Cyclic(n) => write!(f, "z{n}"),
            GroupSpec::Symmetric(n) => write!(f, "s{n}"),
            GroupSpec::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

/// Pass/fail thresholds of the checks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Covariance residuals and wiring Choi distances.
    pub covariance: f64,
    /// Knill–Laflamme residuals of perfect codes.
    pub kl: f64,
    /// Allowed infidelity `1 − F` of perfect recovery.
    pub fidelity: f64,
    /// Invariance of the random code's seed state.
    pub invariance: f64,
    /// Algebraic identities of the random code.
    pub identity: f64,
    /// Closed-form recovery against the circuit, trace distance.
    pub closed_form: f64,
    /// Input dependence of single-mode expectation values.
    pub alpha: f64,
    /// Slack in the deviation-to-fidelity implication.
    pub implication: f64,
    /// Slack of the fidelity lower bound against the estimate.
    pub bound: f64,
    /// Smallest KL residual the charged no-go probe must keep.
    pub nogo_floor: f64,
    /// KL residual the uncharged no-go probe must reach.
    pub nogo_perfect: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            covariance: 1e-12,
            kl: 1e-10,
            fidelity: 1e-10,
            invariance: 1e-12,
            identity: 1e-10,
            closed_form: 1e-8,
            alpha: 1e-8,
            implication: 1e-6,
            bound: 1e-8,
            nogo_floor: 1e-3,
            nogo_perfect: 1e-9,
        }
    }
}

impl Tolerances {
    const KEYS: [&'static str; 11] = [
        "covariance",
        "kl",
        "fidelity",
        "invariance",
        "identity",
        "closed_form",
        "alpha",
        "implication",
        "bound",
        "nogo_floor",
        "nogo_perfect",
    ];

    fn slot(&mut self, key: &str) -> Option<&mut f64> {
        Some(match key {
            "covariance" => &mut self.covariance,
            "kl" => &mut self.kl,
            "fidelity" => &mut self.fidelity,
            "invariance" => &mut self.invariance,
            "identity" => &mut self.identity,
            "closed_form" => &mut self.closed_form,
            "alpha" => &mut self.alpha,
            "implication" => &mut self.implication,
            "bound" => &mut self.bound,
            "nogo_floor" => &mut self.nogo_floor,
            "nogo_perfect" => &mut self.nogo_perfect,
            _ => return None,
        })
    }

    /// Applies a `key=value` override.
    pub fn set(&mut self, spec: &str) -> Result<()> {
        let (k, v) =
            spec.split_once('=').ok_or_else(|| Error::Config(format!("tolerance {spec:?} is not key=value")))?;
        let value: f64 =
            v.trim().parse().map_err(|_| Error::Config(format!("tolerance value {v:?} is not a number")))?;
        if !(value.is_finite() && value >= 0.0) {
            return Err(Error::Config(format!("tolerance {k} must be finite and non-negative")));
        }
        let slot = self.slot(k.trim()).ok_or_else(|| {
            Error::Config(format!("unknown tolerance {k:?} (expected one of {})", Self::KEYS.join(", ")))
        })?;
        *slot = value;
        Ok(())
    }

    pub fn echo(&self) -> Vec<(String, String)> {
        let mut copy = *self;
        Self::KEYS
            .iter()
            .map(|k| (format!("tol.{k}"), crate::codes::serialize::format_f64(*copy.slot(k).expect("known key"))))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExperimentKind {
    Demo(DemoKind),
    Concentration,
    Nogo,
    Verify { code: PathBuf },
    Encode { code: PathBuf, state: PathBuf },
}

impl ExperimentKind {
    pub fn name(&self) -> String {
        match self {
            ExperimentKind::Demo(k) => format!("demo {}", k.name()),
            ExperimentKind::Concentration => "concentration".into(),
            ExperimentKind::Nogo => "nogo".into(),
            ExperimentKind::Verify { .. } => "verify".into(),
            ExperimentKind::Encode { .. } => "encode".into(),
        }
    }

    /// Stem for output files.
    pub fn stem(&self) -> String {
        match self {
            ExperimentKind::Demo(k) => format!("demo-{}", k.name()),
            other => other.name(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub group: GroupSpec,
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    pub tol: Tolerances,
    /// Output directory; reports go to stdout when absent.
    pub out: Option<PathBuf>,
    pub budget: usize,
    /// Multistart restarts (worst-fidelity search, no-go probe).
    pub restarts: usize,
}

impl ExperimentConfig {
    /// Defaults for `kind`: Z2 with `n = 5`, 200 samples, seed 0, 32
    /// restarts (64 for the no-go probe).
    pub fn new(kind: ExperimentKind) -> Self {
        let restarts = if kind == ExperimentKind::Nogo { 64 } else { 32 };
        Self {
            kind,
            group: GroupSpec::Cyclic(2),
            n: 5,
            samples: 200,
            seed: 0,
            tol: Tolerances::default(),
            out: None,
            budget: DEFAULT_BUDGET,
            restarts,
        }
    }

    /// Checks every field; returns warnings that do not stop the run.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        if self.budget == 0 {
            return Err(Error::Config("budget must be positive".into()));
        }
        if self.budget > BUDGET_WARN {
            warnings.push(format!(
                "warning: budget {} exceeds {BUDGET_WARN}; dense instances this large are slow and memory hungry",
                self.budget
            ));
        }
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be positive".into()));
        }
        let group = self.group.build()?;
        if let ExperimentKind::Concentration | ExperimentKind::Demo(DemoKind::Random) = self.kind {
            if self.n < 3 {
                return Err(Error::Config(format!("n must be at least 3, got {}", self.n)));
            }
            if self.kind == ExperimentKind::Concentration && self.samples == 0 {
                return Err(Error::Config("samples must be positive".into()));
            }
            let dim = group.order().checked_pow(self.n as u32).unwrap_or(usize::MAX);
            if dim > self.budget {
                return Err(Error::InstanceTooLarge { dim, budget: self.budget });
            }
        }
        match &self.kind {
            ExperimentKind::Verify { code } => require_file(code)?,
            ExperimentKind::Encode { code, state } => {
                require_file(code)?;
                require_file(state)?;
            }
            _ => {}
        }
        Ok(warnings)
    }

    /// `key: value` lines written at the top of every output file.
    pub fn echo(&self) -> Vec<(String, String)> {
        let mut v =
            vec![("version".to_string(), format!("covqec {VERSION}")), ("command".to_string(), self.kind.name())];
        match &self.kind {
            ExperimentKind::Verify { code } => v.push(("code_file".into(), code.display().to_string())),
            ExperimentKind::Encode { code, state } => {
                v.push(("code_file".into(), code.display().to_string()));
                v.push(("state_file".into(), state.display().to_string()));
            }
            _ => {}
        }
        v.extend([
            ("seed".to_string(), self.seed.to_string()),
            ("group".to_string(), self.group.to_string()),
            ("n".to_string(), self.n.to_string()),
            ("samples".to_string(), self.samples.to_string()),
            ("budget".to_string(), self.budget.to_string()),
            ("restarts".to_string(), self.restarts.to_string()),
        ]);
        v.extend(self.tol.echo());
        v
    }
}

fn require_file(p: &std::path::Path) -> Result<()> {
    if p.is_file() {
        Ok(())
    } else {
        Err(Error::Config(format!("{} is not a readable file", p.display())))
    }
}
