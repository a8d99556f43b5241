//! Constructive counterexamples for binary and multi-class losses.

use super::{open_log_grid, AuditVerdict, ProbeConfig, Table, Witness, WitnessKind};
use crate::error::Result;
use crate::first_order::{Categorical, Task};
use crate::losses::SecondOrderLoss;
use crate::scalar::Real;
use crate::scoring::{class_profile, score_gap, EvalMethod, ScoreGap};
use crate::second_order::{DiracMix, SecondOrderDist};

/// Number of points in the mixing-weight scan.
const THRESHOLD_GRID: usize = 1000;

/// Loss values of a binary loss at a reference prediction `Q̃` and a candidate `Q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryLossValues<T> {
    /// `[L2(Q̃, y1), L2(Q̃, y2)]`
    pub tilde: [T; 2],
    /// `[L2(Q, y1), L2(Q, y2)]`
    pub q: [T; 2],
}

impl<T: Real> BinaryLossValues<T> {
    /// `A = L2(Q̃, y2) − L2(Q, y2)`: what `Q` gains over `Q̃` on the second class.
    pub fn gain(&self) -> T {
        self.tilde[1] - self.q[1]
    }

    /// `B = L2(Q, y1) − L2(Q̃, y1)`: what `Q` loses against `Q̃` on the first class.
    pub fn cost(&self) -> T {
        self.q[0] - self.tilde[0]
    }

    /// `B / (A + B) = (1 + A/B)^{-1}`, or `None` when the ratio is undefined.
    pub fn threshold(&self) -> Option<T> {
        let (a, b) = (self.gain(), self.cost());
        if b == T::zero() || a + b == T::zero() || !a.is_finite() || !b.is_finite() {
            return None;
        }
        Some(T::one() / (T::one() + a / b))
    }
}

/// Checks the equivalence `m < (1 + A/B)^{-1}` ⇔ `S2(Q̃, Q_m) < S2(Q_m, Q_m)`, where
/// `Q_m` has marginal `(1 − m, m)`.
///
/// Returns `(threshold side, score side, slack)` where `slack = |m (A + B) − B|`
/// measures the distance to the boundary on which rounding may split the two
/// sides. `None` when `A + B <= 0` or `B = 0`, where the rearrangement flips or
/// degenerates.
pub fn threshold_equivalence<T: Real>(values: &BinaryLossValues<T>, m: T) -> Option<(bool, bool, T)> {
    let (a, b) = (values.gain(), values.cost());
    if !(a + b > T::zero()) || b == T::zero() {
        return None;
    }
    let threshold_side = m < values.threshold()?;
    let one_m = T::one() - m;
    let lhs = one_m * values.tilde[0] + m * values.tilde[1];
    let rhs = one_m * values.q[0] + m * values.q[1];
    let score_side = lhs < rhs;
    Some((threshold_side, score_side, (m * (a + b) - b).abs()))
}

fn binary_mixture<T: Real>(m: T) -> Result<SecondOrderDist<T>> {
    let atoms = vec![Categorical::vertex(2, 0)?.into(), Categorical::vertex(2, 1)?.into()];
    Ok(DiracMix::new(vec![T::one() - m, m], atoms)?.into())
}

/// Scans `Q_m = (1 − m) δ_{δ_{y1}} + m δ_{δ_{y2}}` against `Q̃ = δ_{δ_{y1}}` on a log grid
/// and looks for an `m` meeting all three conditions `A > 0`, `B > 0`, `m < B/(A+B)`.
pub fn classif_counterexample_i<T: Real, L: SecondOrderLoss<T> + ?Sized>(loss: &L, cfg: &ProbeConfig<T>) -> Result<AuditVerdict<T>> {
    cfg.validate()?;
    let verdict = AuditVerdict::new(format!("classif-counterexample-i[{}]", loss.label()));
    let q_tilde = SecondOrderDist::dirac(Categorical::vertex(2, 0)?);
    if !loss.domain().is_classification() || !loss.domain().accepts(&binary_mixture(T::half())?) {
        return Ok(verdict.not_met("loss is not evaluable on binary Dirac-mixture predictions"));
    }
    let tilde = match class_profile(loss, &q_tilde, 2) {
        Ok(p) if p.iter().all(|v| v.is_finite()) => [p[0], p[1]],
        Ok(_) => return Ok(verdict.not_met("loss is infinite at the vertex prediction; the construction needs finite values")),
        Err(e) => return Ok(verdict.not_met(format!("loss could not be evaluated at the vertex prediction: {e}"))),
    };

    let mut verdict = verdict;
    let mut table = Table::new("threshold", &["m", "gain_a", "cost_b", "threshold"], "exact");
    let (mut undefined, mut non_finite) = (0usize, 0usize);
    let mut ratio_range: Option<(T, T)> = None;
    let mut best: Option<(T, ScoreGap<T>)> = None;
    for m in open_log_grid::<T>(THRESHOLD_GRID) {
        verdict.probes_run += 1;
        let q_m = binary_mixture(m)?;
        let prof = class_profile(loss, &q_m, 2)?;
        if prof.iter().any(|v| !v.is_finite()) {
            non_finite += 1;
            verdict.skipped += 1;
            continue;
        }
        let values = BinaryLossValues { tilde, q: [prof[0], prof[1]] };
        let Some(threshold) = values.threshold() else {
            undefined += 1;
            verdict.skipped += 1;
            continue;
        };
        table.rows.push(vec![m, values.gain(), values.cost(), threshold]);
        let ratio = threshold / m;
        ratio_range = Some(match ratio_range {
            None => (ratio, ratio),
            Some((lo, hi)) => (lo.min(ratio), hi.max(ratio)),
        });
        let feasible = values.gain() > T::zero() && values.cost() > T::zero() && m < threshold;
        if !feasible {
            continue;
        }
        let gap = score_gap(loss, &q_tilde, &q_m, EvalMethod::Exact)?;
        if gap.certified_negative(cfg.abs_tol, cfg.margin_factor) && best.as_ref().is_none_or(|(_, g)| gap.gap < g.gap) {
            best = Some((m, gap));
        }
    }
    if undefined > 0 {
        verdict.note(format!("{undefined} grid points skipped: threshold undefined (equal losses, division by zero)"));
    }
    if non_finite > 0 {
        verdict.note(format!("{non_finite} grid points skipped: infinite loss values"));
    }
    if let Some((lo, hi)) = ratio_range {
        verdict.note(format!("threshold/m ranges over [{:.6}, {:.6}] on the scanned grid", lo.f64(), hi.f64()));
    }
    verdict.tables.push(table);
    Ok(match best {
        Some((m, gap)) => {
            verdict.note(format!("conditions hold at m = {:.6e}", m.f64()));
            let q_m = binary_mixture(m)?;
            verdict.violation(Witness { kind: WitnessKind::Propriety, q_hat: q_tilde, q: q_m, gap, lambdas: Some((m, m)), reference: None })
        }
        None => verdict.not_met(format!(
            "no m on the {THRESHOLD_GRID}-point log grid satisfies A > 0, B > 0 and m < B/(A+B); threshold curve recorded in table 'threshold'"
        )),
    })
}

/// Checks the two inequalities of the multi-class construction for a supplied
/// `(y, Q, Q̄)` and, when they hold, evaluates `S2(Q̄, Q) − S2(Q, Q)`.
pub fn classif_counterexample_ii<T: Real, L: SecondOrderLoss<T> + ?Sized>(
    loss: &L,
    y: usize,
    q: &SecondOrderDist<T>,
    q_bar: &SecondOrderDist<T>,
    cfg: &ProbeConfig<T>,
) -> Result<AuditVerdict<T>> {
    cfg.validate()?;
    let mut verdict = AuditVerdict::new(format!("classif-counterexample-ii[{}]", loss.label()));
    let classes = match q.task() {
        Task::Classification { classes } if q_bar.task() == q.task() => classes,
        _ => return Ok(verdict.not_met("Q and Q̄ must be classification distributions over the same classes")),
    };
    if y >= classes {
        return Ok(verdict.not_met(format!("class {y} out of range for {classes} classes")));
    }
    if !loss.domain().accepts(q) || !loss.domain().accepts(q_bar) {
        return Ok(verdict.not_met("loss is not evaluable on the supplied predictions"));
    }
    let lq = class_profile(loss, q, classes)?;
    let lbar = class_profile(loss, q_bar, classes)?;
    verdict.probes_run = 1;
    let at_y = (lbar[y], lq[y]);
    let sum_excess = |l: &[T]| -> T {
        l.iter().enumerate().filter(|(k, _)| *k != y).fold(T::zero(), |acc, (_, v)| acc + (*v - l[y]))
    };
    let (sum_bar, sum_q) = (sum_excess(&lbar), sum_excess(&lq));
    let mut table = Table::new("class-losses", &["class", "loss_q_bar", "loss_q"], "exact");
    for k in 0..classes {
        table.rows.push(vec![T::of_usize(k), lbar[k], lq[k]]);
    }
    verdict.tables.push(table);
    verdict.note(format!("L2(Q̄, y) = {:.17e}, L2(Q, y) = {:.17e}", at_y.0.f64(), at_y.1.f64()));
    verdict.note(format!(
        "class sums Σ_(k≠y) [L2(·,k) − L2(·,y)]: Q̄ side {:.17e}, Q side {:.17e}",
        sum_bar.f64(),
        sum_q.f64()
    ));
    let first = at_y.0.is_finite() && at_y.0 < at_y.1;
    let second = sum_bar.is_finite() && sum_q.is_finite() && sum_bar <= sum_q;
    if !first || !second {
        let failed = match (first, second) {
            (false, false) => "both conditions fail",
            (false, true) => "L2(Q̄, y) < L2(Q, y) fails",
            _ => "class-sum inequality fails",
        };
        return Ok(verdict.not_met(failed));
    }
    let gap = score_gap(loss, q_bar, q, cfg.method(0))?;
    if gap.certified_negative(cfg.abs_tol, cfg.margin_factor) {
        Ok(verdict.violation(Witness {
            kind: WitnessKind::Propriety,
            q_hat: q_bar.clone(),
            q: q.clone(),
            gap,
            lambdas: None,
            reference: None,
        }))
    } else {
        verdict.note(format!("conditions hold but the gap {:.6e} is not certified negative", gap.gap.f64()));
        Ok(verdict.not_met("score inequality not certified"))
    }
}

