//! Acceptance run: prints one PASS/FAIL line per criterion and exits nonzero
//! if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use scorelab::audit::{
    affine_invariance_check, bayes_peakedness_sweep, classif_counterexample_i, der_proposition_demo, equal_marginal_pairs,
    order_sensitivity_probe, random_prediction, regress_counterexample_i, strictness_impossibility, threshold_equivalence,
    BinaryLossValues, ProbeConfig, RegressionConstruction, VerdictOutcome, WitnessKind,
};
use scorelab::first_order::{s1, Categorical, FirstOrderDist, FirstOrderLoss, Task};
use scorelab::losses::{der_loss, standard_zoo, LossSpec, Quadratic, SecondOrderLoss};
use scorelab::scoring::{s2, score_gap, EvalMethod};
use scorelab::second_order::{Dirichlet, Nig, SecondOrderDist};

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn dir(a: &[f64]) -> SecondOrderDist<f64> {
    Dirichlet::new(a.to_vec()).unwrap().into()
}

fn exact_or_quadrature(q: &SecondOrderDist<f64>) -> EvalMethod {
    match q.task() {
        Task::Classification { .. } => EvalMethod::Exact,
        Task::Regression => EvalMethod::Quadrature { nodes: 64 },
    }
}

fn random_simplex(rng: &mut ChaCha8Rng, k: usize) -> Categorical<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut p: Vec<f64> = raw.iter().map(|r| r / total).collect();
    p[k - 1] = 1.0 - p[..k - 1].iter().sum::<f64>();
    Categorical::new(p).unwrap()
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut brier_dev, mut ce_dev) = (0.0f64, 0.0f64);
    for i in 0..1000 {
        let k = [2, 3, 5][i % 3];
        let (ph, p) = (random_simplex(&mut rng, k), random_simplex(&mut rng, k));
        let (fh, f): (FirstOrderDist<f64>, FirstOrderDist<f64>) = (ph.clone().into(), p.clone().into());
        let gap = |loss| -> Result<f64, String> {
            Ok(s1(loss, &fh, &f, 64).map_err(err)?.value - s1(loss, &f, &f, 64).map_err(err)?.value)
        };
        let dist: f64 = ph.probs().iter().zip(p.probs()).map(|(a, b)| (a - b) * (a - b)).sum();
        let kl: f64 = p.probs().iter().zip(ph.probs()).map(|(a, b)| a * (a / b).ln()).sum();
        brier_dev = brier_dev.max((gap(FirstOrderLoss::Brier)? - dist).abs());
        ce_dev = ce_dev.max((gap(FirstOrderLoss::CrossEntropy)? - kl).abs());
    }
    ensure(
        brier_dev <= 1e-12 && ce_dev <= 1e-12,
        format!("1000 pairs, K in {{2,3,5}}: max |brier gap - ||p^-p||^2| = {brier_dev:.2e}, max |ce gap - KL| = {ce_dev:.2e}"),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cfg = ProbeConfig::with_seed(2);
    let zoo = standard_zoo::<f64>();
    let mut worst = 0.0f64;
    let mut missing = Vec::new();
    for loss in &zoo {
        let domain = loss.domain();
        let pairs = equal_marginal_pairs::<f64, _>(domain, 3, 10, &mut rng).map_err(err)?;
        if pairs.len() != 10 {
            return Err(format!("{loss}: {} pairs constructed", pairs.len()));
        }
        for (qa, qb) in &pairs {
            if qa == qb {
                return Err(format!("{loss}: identical pair {qa}"));
            }
            let q_hat = random_prediction(domain, 3, &mut rng).map_err(err)?;
            let m = exact_or_quadrature(qa);
            let a = s2(loss, &q_hat, qa, m).map_err(err)?.value;
            let b = s2(loss, &q_hat, qb, m).map_err(err)?.value;
            worst = worst.max((a - b).abs());
        }
        let v = strictness_impossibility(loss, &cfg).map_err(err)?;
        let ok = v.outcome == VerdictOutcome::ViolationFound && v.witness.as_ref().is_some_and(|w| w.kind == WitnessKind::Strictness);
        if !ok {
            missing.push(loss.to_string());
        }
    }
    ensure(
        worst <= 1e-9 && missing.is_empty(),
        format!(
            "{} losses x 10 pairs: max |S2(Q^,Qa) - S2(Q^,Qb)| = {worst:.2e}; strictness witness missing for {:?}",
            zoo.len(),
            missing
        ),
    )
}

fn criterion_3() -> Outcome {
    let loss = LossSpec::BayesCe { lambda: 0.0 };
    let (q_hat, q) = (dir(&[2.0, 2.0]), dir(&[1.0, 1.0]));
    let lhs = s2(&loss, &q_hat, &q, EvalMethod::Exact).map_err(err)?.value;
    let rhs = s2(&loss, &q, &q, EvalMethod::Exact).map_err(err)?.value;
    let gap = score_gap(&loss, &q_hat, &q, EvalMethod::Exact).map_err(err)?.gap;
    let exact_ok = (lhs - 5.0 / 6.0).abs() <= 1e-9 && (rhs - 1.0).abs() <= 1e-9 && (gap + 1.0 / 6.0).abs() <= 1e-9;

    // the binary λ = 0 loss is symmetric on Dir(2,2), so the draws are constant and the
    // standard error is zero; the 1e-12 floor absorbs summation rounding
    let mc = score_gap(&loss, &q_hat, &q, EvalMethod::MonteCarlo { samples: 100_000, seed: 3 }).map_err(err)?;
    let mc_ok = (mc.gap + 1.0 / 6.0).abs() <= 4.0 * mc.stderr + 1e-12;

    let grid = [1.0, 2.0, 4.0, 8.0, 16.0];
    let table = bayes_peakedness_sweep(&[1.0, 1.0], &grid, 0.0).map_err(err)?;
    let values: Vec<f64> = table.rows.iter().map(|r| r[1]).collect();
    let decreasing = values.windows(2).all(|w| w[1] < w[0]);
    let last = values[4];
    // independent oracle: E[-ln p] for p ~ Beta(16, 16)
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let beta = Beta::new(16.0f64, 16.0).map_err(err)?;
    let n = 100_000;
    let draws: Vec<f64> = (0..n).map(|_| -beta.sample(&mut rng).ln()).collect();
    let mean = draws.iter().sum::<f64>() / n as f64;
    let sd = (draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let se = sd / (n as f64).sqrt();
    let oracle_ok = (mean - last).abs() <= 4.0 * se;
    let limit_ok = (last - 2f64.ln()).abs() < 0.05;
    ensure(
        exact_ok && mc_ok && decreasing && oracle_ok && limit_ok,
        format!(
            "exact S2 = {lhs:.12}, {rhs:.12}, gap = {gap:.12}; mc gap = {:.12} (stderr {:.2e}); peakedness {values:.6?}, \
             c=16 vs ln 2 diff {:.4}, MC oracle {mean:.6} +/- {se:.1e}",
            mc.gap,
            mc.stderr,
            (last - 2f64.ln()).abs()
        ),
    )
}

fn criterion_4() -> Outcome {
    let cfg = ProbeConfig::with_seed(4);
    let loss = LossSpec::BayesCe { lambda: 0.0 };
    // curve λ ↦ S2((1 − λ) Q̂ + λ Q, Q) through the criterion-3 witness
    let v = order_sensitivity_probe(&loss, &dir(&[1.0, 1.0]), &dir(&[2.0, 2.0]), &cfg).map_err(err)?;
    let w = v.witness.as_ref().ok_or("no increase on the witness curve")?;
    let increase = -w.gap.gap;
    let witness_ok = v.outcome == VerdictOutcome::ViolationFound && increase > 1e-9 && w.gap.lhs.method.to_string() == "exact";

    let brier = LossSpec::MeanComposed(FirstOrderLoss::Brier);
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let mut worst_rise = f64::NEG_INFINITY;
    for _ in 0..10 {
        let mut alpha = || vec![rng.random_range(0.5..5.0), rng.random_range(0.5..5.0)];
        let (q, q_prime) = (dir(&alpha()), dir(&alpha()));
        let v = order_sensitivity_probe(&brier, &q, &q_prime, &cfg).map_err(err)?;
        let values: Vec<f64> = v.tables[0].rows.iter().map(|r| r[1]).collect();
        if values.len() != 101 {
            return Err(format!("curve has {} points", values.len()));
        }
        worst_rise = values.windows(2).map(|p| p[1] - p[0]).fold(worst_rise, f64::max);
    }
    ensure(
        witness_ok && worst_rise <= 1e-12,
        format!(
            "bayes-ce(0) curve increase {increase:.6e} between lambdas {:?}; mean(brier) max step rise over 10 curves {worst_rise:.2e}",
            w.lambdas
        ),
    )
}

fn criterion_5() -> Outcome {
    let cfg = ProbeConfig { n_random_pairs: 30, ..ProbeConfig::with_seed(5) };
    let mut worst = 0.0f64;
    let mut failed = Vec::new();
    let zoo = standard_zoo::<f64>();
    for loss in &zoo {
        let v = affine_invariance_check(loss, 3.7, Quadratic::new(0.0, 0.0, 1.0), &cfg).map_err(err)?;
        if v.outcome != VerdictOutcome::NoViolationFound {
            failed.push(loss.to_string());
        }
        worst = v.tables[0].rows.iter().map(|r| r[2]).fold(worst, f64::max);
    }
    ensure(
        failed.is_empty() && worst <= 1e-9,
        format!("30 cases on each of {} losses: max |wrapped - 3.7 inner| = {worst:.2e}; failures {failed:?}", zoo.len()),
    )
}

fn criterion_6() -> Outcome {
    let cfg = ProbeConfig::with_seed(6);
    let start = Instant::now();
    let v = der_proposition_demo(0.0, 0.1, 1.0, &cfg).map_err(err)?;
    let elapsed = start.elapsed().as_secs_f64();
    let curves = v.tables.iter().find(|t| t.id == "loss-curves").ok_or("no loss-curve table")?;
    let dominated = !curves.rows.is_empty() && curves.rows.iter().all(|r| r[0] != 0.0 && r[1] < r[2]);
    let w = v.witness.as_ref().ok_or("no witness")?;
    let certified = v.outcome == VerdictOutcome::ViolationFound && v.witness_is_certified(&cfg) && w.gap.lhs.method.to_string().starts_with("quadrature");
    let anchor = der_loss(&Nig::new(0.0, 1.0, 1.0, 1.0).map_err(err)?, 0.0, 1.0);
    let anchor_ok = (anchor - 2.0 * 2f64.ln()).abs() <= 1e-12;
    ensure(
        dominated && certified && anchor_ok && elapsed < 10.0,
        format!(
            "lambda = 1: {} grid points dominated = {dominated}; gap {:.6e} (residual {:.1e}); anchor {anchor:.15}; {elapsed:.2}s",
            curves.rows.len(),
            w.gap.gap,
            w.gap.residual()
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    // quadruples are drawn until 1000 satisfy A + B > 0, B != 0, the region where
    // the rearrangement into a threshold is valid
    let (mut checked, mut mismatches, mut drawn) = (0, 0, 0);
    while checked < 1000 {
        drawn += 1;
        let mut v = || rng.random_range(-5.0..5.0);
        let values = BinaryLossValues { tilde: [v(), v()], q: [v(), v()] };
        let m = rng.random_range(0.0..1.0);
        if let Some((a, b, slack)) = threshold_equivalence(&values, m) {
            checked += 1;
            if a != b && slack > 1e-12 {
                mismatches += 1;
            }
        }
    }
    let cfg = ProbeConfig::with_seed(7);
    let brier = classif_counterexample_i(&LossSpec::MeanComposed(FirstOrderLoss::Brier), &cfg).map_err(err)?;
    let t: &scorelab::audit::Table<f64> = brier.tables.iter().find(|t| t.id == "threshold").ok_or("no threshold table")?;
    let m_half = t.rows.iter().map(|r| (r[3] - r[0] / 2.0).abs()).fold(0.0f64, f64::max);
    let brier_ok = brier.outcome == VerdictOutcome::ConditionsNotMet && !t.rows.is_empty() && m_half <= 1e-12;

    let start = Instant::now();
    let sq = regress_counterexample_i(&LossSpec::MeanComposed(FirstOrderLoss::SquaredError), &RegressionConstruction::default(), &cfg)
        .map_err(err)?;
    let elapsed = start.elapsed().as_secs_f64();
    let trace = sq.tables.iter().find(|t| t.id == "sweep").map_or(0, |t| t.rows.len());
    ensure(
        mismatches == 0 && checked == 1000 && brier_ok && trace > 0 && elapsed < 60.0,
        format!(
            "{checked} valid quadruples of {drawn} drawn, {mismatches} mismatches; mean(brier) {} with max |threshold - m/2| = {m_half:.1e}; \
             regress-i sq-mean {} with {trace}-row trace in {elapsed:.2}s",
            brier.outcome.as_str(),
            sq.outcome.as_str()
        ),
    )
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let run = || -> Result<serde_json::Value, String> {
        let o = Command::new(env!("CARGO_BIN_EXE_scorelab"))
            .current_dir(dir.path())
            .args(["audit", "--loss", "bayes-ce", "--family", "dirichlet", "--k", "3", "--seed", "42", "--mc", "--mc-samples", "2000", "--n-pairs", "20", "--out", "det", "--force"])
            .output()
            .map_err(err)?;
        if !o.status.success() {
            return Err(String::from_utf8_lossy(&o.stderr).into_owned());
        }
        let text = std::fs::read_to_string(dir.path().join("det.json")).map_err(err)?;
        let mut json: serde_json::Value = serde_json::from_str(&text).map_err(err)?;
        json.as_object_mut().ok_or("report is not an object")?.remove("timestamp");
        Ok(json)
    };
    let (a, b) = (run()?, run()?);
    let (sa, sb) = (serde_json::to_string(&a).map_err(err)?, serde_json::to_string(&b).map_err(err)?);
    ensure(sa == sb, format!("two seeded audit runs: {} bytes each, identical = {}", sa.len(), sa == sb))
}

fn main() {
    let criteria: [fn() -> Outcome; 8] =
        [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7, criterion_8];
    let mut failures = 0;
    for (i, criterion) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(criterion)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {}: PASS - {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("criterion {}: FAIL - {detail}", i + 1);
            }
        }
    }
    if failures > 0 {
        std::process::exit(1);
    }
}
