//! Probes and counterexample constructors for (strict) propriety, order
//! sensitivity, and concavity of second-order scoring rules.
//!
//! A `NoViolationFound` verdict is evidence from a finite search, never a proof
//! of propriety.

mod classification;
mod probes;
mod regression;
mod suites;
mod sweep;

pub use classification::{classif_counterexample_i, classif_counterexample_ii, threshold_equivalence, BinaryLossValues};
pub use probes::{
    affine_invariance_check, concavity_probe, order_sensitivity_probe, propriety_search, revalidate, strictness_impossibility,
    FamilyBox,
};
pub use regression::{
    der_proposition_demo, near_dirac_nig, regress_counterexample_i, regress_counterexample_ii, RegressionConstruction,
    NEAR_DIRAC_M2, NEAR_DIRAC_M3,
};
pub use suites::{equal_marginal_pairs, random_prediction};
pub use sweep::bayes_peakedness_sweep;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::scoring::{EvalMethod, ScoreGap};
use crate::second_order::SecondOrderDist;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictOutcome {
    NoViolationFound,
    ViolationFound,
    ConditionsNotMet,
}

impl VerdictOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            VerdictOutcome::NoViolationFound => "NoViolationFound",
            VerdictOutcome::ViolationFound => "ViolationFound",
            VerdictOutcome::ConditionsNotMet => "ConditionsNotMet",
        }
    }
}

/// What a witness demonstrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WitnessKind {
    /// `S2(Q̂, Q) < S2(Q, Q)` beyond the certification margin.
    Propriety,
    /// Distinct `Q̂ ≠ Q` with `S2(Q̂, Q) <= S2(Q, Q)`: strict propriety fails.
    Strictness,
    /// A certified increase of `λ ↦ S2((1 − λ) Q' + λ Q, Q)`.
    OrderSensitivity,
    /// `G2(Q) = S2(Q, Q)` falls below its chord.
    Concavity,
    /// An identity that must hold exactly was broken.
    ImplementationDefect,
}

impl WitnessKind {
    pub fn as_str(self) -> &'static str {
        match self {
            WitnessKind::Propriety => "propriety",
            WitnessKind::Strictness => "strictness",
            WitnessKind::OrderSensitivity => "order-sensitivity",
            WitnessKind::Concavity => "concavity",
            WitnessKind::ImplementationDefect => "implementation defect",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Witness<T> {
    pub kind: WitnessKind,
    pub q_hat: SecondOrderDist<T>,
    pub q: SecondOrderDist<T>,
    pub gap: ScoreGap<T>,
    /// Mixing weights involved, for curve-based witnesses.
    pub lambdas: Option<(T, T)>,
    /// Comparison prediction for order-sensitivity witnesses: the gap is
    /// `S2(q_hat, q) − S2(reference, q)`.
    pub reference: Option<SecondOrderDist<T>>,
}

/// Column-oriented numeric table (curves, sweeps, traces).
#[derive(Debug, Clone, PartialEq)]
pub struct Table<T> {
    pub id: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<T>>,
    /// Evaluation method of the values in the table.
    pub method: String,
}

impl<T> Table<T> {
    pub fn new(id: impl Into<String>, columns: &[&str], method: impl Into<String>) -> Self {
        Table { id: id.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new(), method: method.into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditVerdict<T> {
    pub probe: String,
    pub outcome: VerdictOutcome,
    pub witness: Option<Witness<T>>,
    pub probes_run: usize,
    pub skipped: usize,
    pub notes: Vec<String>,
    pub tables: Vec<Table<T>>,
}

impl<T: Real> AuditVerdict<T> {
    pub(crate) fn new(probe: impl Into<String>) -> Self {
        AuditVerdict {
            probe: probe.into(),
            outcome: VerdictOutcome::NoViolationFound,
            witness: None,
            probes_run: 0,
            skipped: 0,
            notes: Vec::new(),
            tables: Vec::new(),
        }
    }

    pub(crate) fn not_met(mut self, note: impl Into<String>) -> Self {
        self.outcome = VerdictOutcome::ConditionsNotMet;
        self.notes.push(note.into());
        self
    }

    pub(crate) fn violation(mut self, witness: Witness<T>) -> Self {
        self.outcome = VerdictOutcome::ViolationFound;
        self.witness = Some(witness);
        self
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    pub fn is_violation(&self) -> bool {
        self.outcome == VerdictOutcome::ViolationFound
    }

    /// A propriety violation carries a witness whose gap is negative beyond
    /// `max(abs_tol, margin_factor · uncertainty)`.
    pub fn witness_is_certified(&self, cfg: &ProbeConfig<T>) -> bool {
        match (&self.outcome, &self.witness) {
            (VerdictOutcome::ViolationFound, Some(w)) => match w.kind {
                WitnessKind::Strictness | WitnessKind::ImplementationDefect => true,
                _ => w.gap.certified_negative(cfg.abs_tol, cfg.margin_factor),
            },
            (VerdictOutcome::ViolationFound, None) => false,
            _ => true,
        }
    }
}

/// Search and certification settings shared by all probes.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeConfig<T> {
    pub seed: u64,
    pub n_random_pairs: usize,
    pub mc_samples: usize,
    /// Number of λ grid points for curve probes.
    pub lambda_grid: usize,
    pub abs_tol: T,
    pub margin_factor: T,
    /// Evaluate scores by Monte Carlo instead of the exact/quadrature paths.
    pub prefer_mc: bool,
    /// Base quadrature node count (Gauss-Hermite; Gauss-Legendre uses twice as many).
    pub nodes: usize,
}

impl<T: Real> Default for ProbeConfig<T> {
    fn default() -> Self {
        ProbeConfig {
            seed: 0,
            n_random_pairs: 200,
            mc_samples: crate::scoring::DEFAULT_MC_SAMPLES,
            lambda_grid: 101,
            abs_tol: T::c(1e-9),
            margin_factor: T::c(3.0),
            prefer_mc: false,
            nodes: crate::quadrature::HERMITE_NODES,
        }
    }
}

impl<T: Real> ProbeConfig<T> {
    pub fn with_seed(seed: u64) -> Self {
        ProbeConfig { seed, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > T::zero()) {
            return Err(Error::arg("abs_tol must be positive"));
        }
        if !(self.margin_factor >= T::c(3.0)) {
            return Err(Error::arg("margin_factor must be at least 3"));
        }
        if self.lambda_grid < 11 {
            return Err(Error::arg("lambda_grid must have at least 11 points"));
        }
        if self.nodes < 8 {
            return Err(Error::arg("quadrature needs at least 8 nodes"));
        }
        Ok(())
    }

    /// Evaluation path for the `i`-th independent score in a probe.
    pub fn method(&self, i: u64) -> EvalMethod {
        if self.prefer_mc {
            EvalMethod::MonteCarlo { samples: self.mc_samples, seed: self.seed.wrapping_add(i.wrapping_mul(2)) }
        } else {
            EvalMethod::Auto
        }
    }

    /// Quadrature-aware deterministic path.
    pub(crate) fn deterministic(&self) -> EvalMethod {
        EvalMethod::Quadrature { nodes: self.nodes }
    }
}

/// Log-spaced grid of `n` points strictly inside `(0, 1)`, from `1e-6` to `1 − 1e-3`.
pub fn open_log_grid<T: Real>(n: usize) -> Vec<T> {
    let lo = (1e-6f64).ln();
    let hi = (1.0f64 - 1e-3).ln();
    (0..n)
        .map(|i| {
            let t = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
            T::c((lo + t * (hi - lo)).exp())
        })
        .collect()
}
