//! State-vector simulation and exact analytics for O(log N)-communication
//! quantum private query protocols.
//!
//! * [`qstate`]: dense complex state vectors and projective measurements.
//! * [`protocol`]: the honest two-round protocol in basic and randomized form.
//! * [`adversary`]: computational-basis attacks, concealing fakes and the
//!   closed-form detection and leakage quantities.
//! * [`baselines`]: reduced QPQ and phase-encoded schemes for comparison.
//! * [`interrogation`]: data-privacy estimate via quantum interrogation.
//! * [`harness`]: seeded, parallel Monte Carlo runs.

pub mod adversary;
pub mod baselines;
pub mod error;
pub mod harness;
pub mod interrogation;
pub mod numerics;
pub mod protocol;
pub mod qstate;

pub use adversary::{AttackReport, Concealment, DetectionStats, FakeState};
pub use baselines::{BaselineAttackReport, BaselineKind, ComparisonRow};
pub use error::{QpqError, Result};
pub use harness::{ExperimentConfig, RunRecord, Scenario, TPolicy};
pub use interrogation::{InitialState, InterrogationSpec, ZerosResult};
pub use protocol::{AnswerResult, DatabaseTable, QueryMode, QuerySpec, Transcript};
pub use qstate::{MeasurementOutcome, Outcome, StateVector};
