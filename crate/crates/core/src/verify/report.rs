use std::fmt::Write as _;
use std::time::Duration;

use crate::codes::serialize::format_f64;
use crate::error::Result;

/// Direction of a check: `AtMost` passes iff `residual ≤ tolerance`,
/// `AtLeast` iff `residual ≥ tolerance`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    AtMost,
    AtLeast,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub relation: Relation,
    pub pass: bool,
    pub seed: Option<u64>,
}

impl Check {
    pub fn new(name: impl Into<String>, residual: f64, tolerance: f64, relation: Relation, seed: Option<u64>) -> Self {
        let pass = match relation {
            Relation::AtMost => residual <= tolerance,
            Relation::AtLeast => residual >= tolerance,
        };
        Self { name: name.into(), residual, tolerance, relation, pass, seed }
    }
}

/// Named checks plus informational values. Timings are kept in memory and
/// shown only by [`VerificationReport::timing_summary`] so that written
/// reports are reproducible.
#[derive(Clone, Debug, Default)]
pub struct VerificationReport {
    pub title: String,
    pub config: Vec<(String, String)>,
    pub checks: Vec<Check>,
    pub values: Vec<(String, f64)>,
    pub notes: Vec<String>,
    pub timings: Vec<(String, Duration)>,
}

impl VerificationReport {
    pub fn new(title: impl Into<String>) -> Self {
        Self { title: title.into(), ..Self::default() }
    }

    pub fn with_config(mut self, config: Vec<(String, String)>) -> Self {
        self.config = config;
        self
    }

    pub fn at_most(&mut self, name: impl Into<String>, residual: f64, tolerance: f64, seed: Option<u64>) -> bool {
        self.push(Check::new(name, residual, tolerance, Relation::AtMost, seed))
    }

    pub fn at_least(&mut self, name: impl Into<String>, value: f64, floor: f64, seed: Option<u64>) -> bool {
        self.push(Check::new(name, value, floor, Relation::AtLeast, seed))
    }

    pub fn push(&mut self, check: Check) -> bool {
        let pass = check.pass;
        self.checks.push(check);
        pass
    }

    pub fn value(&mut self, name: impl Into<String>, v: f64) {
        self.values.push((name.into(), v));
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn timing(&mut self, name: impl Into<String>, d: Duration) {
        self.timings.push((name.into(), d));
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn merge(&mut self, other: VerificationReport) {
        self.checks.extend(other.checks);
        self.values.extend(other.values);
        self.notes.extend(other.notes);
        self.timings.extend(other.timings);
    }

    fn config_echo(&self, prefix: &str) -> String {
        let mut s = String::new();
        for (k, v) in &self.config {
            let _ = writeln!(s, "{prefix}{k}: {v}");
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = self.config_echo("# ");
        let _ = writeln!(s, "{}", self.title);
        for c in &self.checks {
            let _ = writeln!(
                s,
                "{} {} residual={} {} {}{}",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                format_f64(c.residual),
                c.relation.symbol(),
                format_f64(c.tolerance),
                c.seed.map(|x| format!(" seed={x}")).unwrap_or_default()
            );
        }
        for (k, v) in &self.values {
            let _ = writeln!(s, "value {k} = {}", format_f64(*v));
        }
        for n in &self.notes {
            let _ = writeln!(s, "note {n}");
        }
        let failed = self.failures().count();
        let _ = writeln!(s, "summary: {} checks, {} failed", self.checks.len(), failed);
        s
    }

    /// One row per check, then one per value (relation, tolerance and pass
    /// empty), after `# key: value` config lines.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["name", "residual", "relation", "tolerance", "pass", "seed"])?;
        for c in &self.checks {
            w.write_record([
                c.name.clone(),
                format_f64(c.residual),
                c.relation.symbol().to_string(),
                format_f64(c.tolerance),
                c.pass.to_string(),
                c.seed.map(|x| x.to_string()).unwrap_or_default(),
            ])?;
        }
        for (name, v) in &self.values {
            w.write_record([name.as_str(), &format_f64(*v), "", "", "", ""])?;
        }
        let body = String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("utf-8 csv");
        Ok(format!("{}{body}", self.config_echo("# ")))
    }

    pub fn timing_summary(&self) -> String {
        self.timings.iter().map(|(k, d)| format!("{k}: {:.3}s", d.as_secs_f64())).collect::<Vec<_>>().join(", ")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FidelityMethod {
    ExactClosedForm,
    MultistartMinimization,
    LowerBound,
}

impl FidelityMethod {
    pub fn tag(self) -> &'static str {
        match self {
            FidelityMethod::ExactClosedForm => "exact-closed-form",
            FidelityMethod::MultistartMinimization => "multistart-minimization",
            FidelityMethod::LowerBound => "lower-bound",
        }
    }
}

/// Worst-case recovery fidelity estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct FidelityEstimate {
    pub value: f64,
    pub method: FidelityMethod,
    pub restarts: usize,
    /// Total descent iterations over all restarts.
    pub iterations: usize,
    /// Smallest fidelity among the Haar samples.
    pub haar_floor: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_flags_follow_relation() {
        let mut r = VerificationReport::new("t").with_config(vec![("seed".into(), "3".into())]);
        assert!(r.at_most("a", 1e-13, 1e-12, None));
        assert!(!r.at_most("b", 0.25, 0.125, Some(4)));
        assert!(r.at_least("c", 0.2, 1e-3, None));
        assert!(!r.all_pass());
        let text = r.to_text();
        assert!(text.starts_with("# seed: 3\n"));
        assert!(text.contains("FAIL b residual=2.5000000000000000e-1 <= 1.2500000000000000e-1 seed=4"));
        let csv = r.to_csv().unwrap();
        assert!(csv.contains("name,residual,relation,tolerance,pass,seed\n"));
        assert!(csv.contains("b,2.5000000000000000e-1,<=,1.2500000000000000e-1,false,4\n"));
        r.value("v", 0.5);
        assert!(r.to_csv().unwrap().ends_with("v,5.0000000000000000e-1,,,,\n"));
    }

    #[test]
    fn csv_quotes_commas() {
        let mut r = VerificationReport::new("t");
        r.at_most("kl[mode 0, mode 1]", 0.0, 1.0, None);
        assert!(r.to_csv().unwrap().contains("\"kl[mode 0, mode 1]\""));
    }
}
