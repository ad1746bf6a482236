//! Experiment drivers: configuration, the concentration sweep over random
//! covariant codes, the no-go probe and per-code demos.

pub mod concentration;
pub mod config;
pub mod demo;
pub mod files;
pub mod nogo;

pub use concentration::{run_concentration, ConcentrationRecord, ConcentrationRun, Verdict};
pub use config::{DemoKind, ExperimentConfig, ExperimentKind, GroupSpec, Tolerances, VERSION};
pub use demo::run_demo;
pub use files::{run_encode, run_verify, shipped_code, verify_code, SHIPPED_CODES};
pub use nogo::{run_nogo, run_nogo_probe, NogoConfig, NogoResult};
