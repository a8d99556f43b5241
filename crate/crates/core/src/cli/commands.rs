//! Command implementations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::report::{report_path, table_path, CheckRecord, GapRecord, Report, ScoreRecord, TableRecord};
use super::resolve::{parse_c_grid, resolve_loss};
use super::{render_curves, CliError, Command, Settings, EXIT_EVAL, EXIT_OK};
use crate::audit::{
    affine_invariance_check, bayes_peakedness_sweep, classif_counterexample_i, classif_counterexample_ii, concavity_probe,
    der_proposition_demo, equal_marginal_pairs, order_sensitivity_probe, propriety_search, random_prediction,
    regress_counterexample_i, regress_counterexample_ii, strictness_impossibility, threshold_equivalence, BinaryLossValues,
    FamilyBox, ProbeConfig, RegressionConstruction, VerdictOutcome, WitnessKind,
};
use crate::first_order::{s1, Categorical, FirstOrderDist, FirstOrderLoss, Task};
use crate::losses::{der_loss, standard_zoo, LossSpec, Quadratic, SecondOrderLoss};
use crate::scoring::{s2, score_gap, EvalMethod};
use crate::second_order::{kl_dirichlet, Dirichlet, Nig, SecondOrderDist};
use crate::text::{parse_first_order, parse_second_order};

type CmdResult<T> = Result<T, CliError>;

fn config(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn required<'a>(value: &'a Option<String>, flag: &str) -> CmdResult<&'a str> {
    value.as_deref().ok_or_else(|| config(format!("--{flag} is required")))
}

fn uses_mc(s: &Settings) -> bool {
    s.mc == Some(true) || s.method.as_deref() == Some("mc")
}

fn probe_config(s: &Settings) -> CmdResult<ProbeConfig<f64>> {
    let d = ProbeConfig::<f64>::default();
    let cfg = ProbeConfig {
        seed: s.seed.unwrap_or(d.seed),
        n_random_pairs: s.n_pairs.unwrap_or(d.n_random_pairs),
        mc_samples: s.mc_samples.unwrap_or(d.mc_samples),
        lambda_grid: s.lambda_grid.unwrap_or(d.lambda_grid),
        abs_tol: s.abs_tol.unwrap_or(d.abs_tol),
        margin_factor: s.margin_factor.unwrap_or(d.margin_factor),
        prefer_mc: s.mc.unwrap_or(false),
        nodes: s.nodes.unwrap_or(d.nodes),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn eval_method(s: &Settings, cfg: &ProbeConfig<f64>) -> CmdResult<EvalMethod> {
    Ok(match s.method.as_deref().unwrap_or("auto") {
        "auto" => EvalMethod::Auto,
        "exact" => EvalMethod::Exact,
        "quadrature" => EvalMethod::Quadrature { nodes: cfg.nodes },
        "mc" => EvalMethod::MonteCarlo { samples: cfg.mc_samples, seed: cfg.seed },
        other => return Err(config(format!("unknown method '{other}'; valid methods: auto, exact, quadrature, mc"))),
    })
}

fn loss_of(s: &Settings) -> CmdResult<LossSpec<f64>> {
    Ok(resolve_loss(required(&s.loss, "loss")?, s.lambda)?)
}

fn second(s: &Option<String>, flag: &str) -> CmdResult<SecondOrderDist<f64>> {
    Ok(parse_second_order(required(s, flag)?)?)
}

/// Runs `command` and writes its report; returns the exit status.
pub fn execute(command: Command, settings: Settings) -> CmdResult<i32> {
    if uses_mc(&settings) && settings.seed.is_none() {
        return Err(config("--seed is mandatory for Monte-Carlo runs"));
    }
    let cfg = probe_config(&settings)?;
    let prefix = settings.out.clone().unwrap_or_else(|| format!("scorelab-{}", command.name()));
    let force = settings.force.unwrap_or(false);
    let writes = command != Command::Selftest || settings.out.is_some();
    let resolved = resolved_config(command, &settings, &cfg)?;
    let mut report = Report::new(command.name(), cfg.seed, resolved);
    let status = match command {
        Command::Score => score(&settings, &cfg, &mut report)?,
        Command::Audit => audit(&settings, &cfg, &mut report)?,
        Command::Counterexample => counterexample(&settings, &cfg, &mut report)?,
        Command::Sweep => sweep(&settings, &cfg, &mut report)?,
        Command::Selftest => selftest(&cfg, &mut report)?,
    };
    if writes {
        write_outputs(&report, &prefix, force)?;
    }
    Ok(status)
}

/// The settings as given (unset keys omitted) plus the effective probe configuration.
fn resolved_config(command: Command, settings: &Settings, cfg: &ProbeConfig<f64>) -> CmdResult<serde_json::Value> {
    let mut given = serde_json::to_value(settings).map_err(|e| config(e.to_string()))?;
    if let Some(map) = given.as_object_mut() {
        map.retain(|_, v| !v.is_null());
        map.insert("command".into(), command.name().into());
    }
    Ok(serde_json::json!({
        "settings": given,
        "probe": {
            "seed": cfg.seed,
            "n-pairs": cfg.n_random_pairs,
            "mc-samples": cfg.mc_samples,
            "lambda-grid": cfg.lambda_grid,
            "abs-tol": cfg.abs_tol,
            "margin-factor": cfg.margin_factor,
            "mc": cfg.prefer_mc,
            "nodes": cfg.nodes,
        },
    }))
}

fn write_outputs(report: &Report, prefix: &str, force: bool) -> CmdResult<()> {
    let path = report_path(prefix);
    let tables: Vec<_> = report.tables.iter().map(|t| table_path(prefix, &t.id)).collect();
    if !force {
        if let Some(existing) = std::iter::once(&path).chain(&tables).find(|p| p.exists()) {
            return Err(config(format!("{} exists; pass --force to overwrite", existing.display())));
        }
    }
    let json = report.to_json()?;
    std::fs::write(&path, json).map_err(|e| config(format!("cannot write {}: {e}", path.display())))?;
    let written = render_curves(report, prefix)?;
    println!("report: {}", path.display());
    for p in written {
        println!("table: {}", p.display());
    }
    Ok(())
}

fn print_verdicts(report: &Report) {
    for v in &report.verdicts {
        let gap = v.witness.as_ref().map(|w| format!(" gap {} [{}]", w.gap.gap.decimal(), w.gap.lhs.method)).unwrap_or_default();
        println!("{}: {}{}", v.probe, v.outcome, gap);
    }
}

fn score(s: &Settings, cfg: &ProbeConfig<f64>, report: &mut Report) -> CmdResult<i32> {
    let loss = loss_of(s)?;
    let q_hat = second(&s.q_hat, "q-hat")?;
    let q = second(&s.q, "q")?;
    let method = eval_method(s, cfg)?;
    let lhs = s2(&loss, &q_hat, &q, method)?;
    let gap = score_gap(&loss, &q_hat, &q, method)?;
    report.scores.push(ScoreRecord::new(format!("S2({q_hat}, {q})"), &lhs));
    report.scores.push(ScoreRecord::new(format!("S2({q}, {q})"), &gap.rhs));
    report.gaps.push(GapRecord::new(format!("S2({q_hat}, {q}) - S2({q}, {q})"), &gap));
    for r in &report.scores {
        println!("{} = {} [{}] stderr {}", r.label, r.value.decimal(), r.method, r.stderr.decimal());
    }
    println!("gap = {} stderr {}", report.gaps[0].gap.decimal(), report.gaps[0].stderr.decimal());
    Ok(EXIT_OK)
}

fn audit(s: &Settings, cfg: &ProbeConfig<f64>, report: &mut Report) -> CmdResult<i32> {
    let loss = loss_of(s)?;
    let family = FamilyBox::default_for(s.family.as_deref().unwrap_or("dirichlet"), s.k.unwrap_or(2))?;
    let search = propriety_search(&loss, &family, cfg)?;
    report.push_verdict(&search);
    report.push_verdict(&strictness_impossibility(&loss, cfg)?);
    // cross-probe agreement on the propriety witness
    if let Some(w) = search.witness.as_ref().filter(|w| w.kind == WitnessKind::Propriety) {
        report.push_verdict(&order_sensitivity_probe(&loss, &w.q, &w.q_hat, cfg)?);
        report.push_verdict(&concavity_probe(&loss, &w.q, &w.q_hat, cfg)?);
    }
    print_verdicts(report);
    Ok(EXIT_OK)
}

fn counterexample(s: &Settings, cfg: &ProbeConfig<f64>, report: &mut Report) -> CmdResult<i32> {
    let kind = required(&s.kind, "kind")?;
    let verdicts = match kind {
        "classif-i" => vec![classif_counterexample_i(&loss_of(s)?, cfg)?],
        "classif-ii" => {
            let y = s.y.ok_or_else(|| config("--y is required"))?;
            vec![classif_counterexample_ii(&loss_of(s)?, y, &second(&s.q, "q")?, &second(&s.q_bar, "q-bar")?, cfg)?]
        }
        "regress-i" => {
            let d = RegressionConstruction::<f64>::default();
            let c = RegressionConstruction {
                mu_star: s.mu.unwrap_or(d.mu_star),
                sigma: s.sigma.unwrap_or(d.sigma),
                mirrored: s.mirrored.unwrap_or(false),
                ..d
            };
            vec![regress_counterexample_i(&loss_of(s)?, &c, cfg)?]
        }
        "regress-ii" => {
            let p_tilde: FirstOrderDist<f64> = parse_first_order(required(&s.p_tilde, "p-tilde")?)?;
            let mu = s.mu.unwrap_or(p_tilde.mean()?);
            let delta = s.delta.ok_or_else(|| config("--delta is required"))?;
            let q_point = s.q.as_deref().map(parse_second_order).transpose()?;
            vec![regress_counterexample_ii(&loss_of(s)?, mu, &p_tilde, q_point.as_ref(), &second(&s.q_bar, "q-bar")?, delta, cfg)?]
        }
        "der" => {
            let (mu, sigma) = (s.mu.unwrap_or(0.0), s.sigma.unwrap_or(0.1));
            match s.lambda {
                Some(l) => vec![der_proposition_demo(mu, sigma, l, cfg)?],
                None => [0.0, 0.1, 1.0].iter().map(|l| der_proposition_demo(mu, sigma, *l, cfg)).collect::<Result<_, _>>()?,
            }
        }
        other => {
            return Err(config(format!("unknown counterexample kind '{other}'; valid kinds: classif-i, classif-ii, regress-i, regress-ii, der")))
        }
    };
    for v in &verdicts {
        report.push_verdict(v);
    }
    print_verdicts(report);
    Ok(EXIT_OK)
}

fn sweep(s: &Settings, cfg: &ProbeConfig<f64>, report: &mut Report) -> CmdResult<i32> {
    match s.kind.as_deref().unwrap_or("peakedness") {
        "peakedness" => {
            match s.loss.as_deref() {
                None | Some("bayes-ce") => {}
                Some(other) => return Err(config(format!("the peakedness sweep uses bayes-ce, not '{other}'"))),
            }
            let alpha = required(&s.alpha, "alpha")?
                .split(',')
                .map(|a| a.trim().parse::<f64>().map_err(|_| config(format!("'{a}' is not a number"))))
                .collect::<CmdResult<Vec<_>>>()?;
            let grid = parse_c_grid(required(&s.c_grid, "c-grid")?)?;
            let table = bayes_peakedness_sweep(&alpha, &grid, s.lambda.unwrap_or(0.0))?;
            for row in &table.rows {
                println!("{},{}", super::Num(row[0]).decimal(), super::Num(row[1]).decimal());
            }
            report.tables.push(TableRecord::new("peakedness", &table));
        }
        "order" => {
            report.push_verdict(&order_sensitivity_probe(&loss_of(s)?, &second(&s.q, "q")?, &second(&s.q_prime, "q-prime")?, cfg)?);
            print_verdicts(report);
        }
        "concavity" => {
            report.push_verdict(&concavity_probe(&loss_of(s)?, &second(&s.q, "q")?, &second(&s.q_prime, "q-prime")?, cfg)?);
            print_verdicts(report);
        }
        other => return Err(config(format!("unknown sweep kind '{other}'; valid kinds: peakedness, order, concavity"))),
    }
    Ok(EXIT_OK)
}

fn check(report: &mut Report, name: &str, passed: bool, detail: String) {
    println!("{} {name}: {detail}", if passed { "PASS" } else { "FAIL" });
    report.checks.push(CheckRecord { name: name.into(), passed, detail });
}

fn random_simplex(rng: &mut ChaCha8Rng, k: usize) -> crate::error::Result<Categorical<f64>> {
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut p: Vec<f64> = raw.iter().map(|r| r / total).collect();
    p[k - 1] = 1.0 - p[..k - 1].iter().sum::<f64>();
    Categorical::new(p)
}

fn selftest(cfg: &ProbeConfig<f64>, report: &mut Report) -> CmdResult<i32> {
    let tol = 1e-9;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    // first-order identities
    let mut worst = 0.0f64;
    for i in 0..300 {
        let k = [2, 3, 5][i % 3];
        let (ph, p) = (random_simplex(&mut rng, k)?, random_simplex(&mut rng, k)?);
        let (fh, f): (FirstOrderDist<f64>, FirstOrderDist<f64>) = (ph.clone().into(), p.clone().into());
        let brier = s1(FirstOrderLoss::Brier, &fh, &f, cfg.nodes)?.value - s1(FirstOrderLoss::Brier, &f, &f, cfg.nodes)?.value;
        let dist: f64 = ph.probs().iter().zip(p.probs()).map(|(a, b)| (a - b) * (a - b)).sum();
        let ce = s1(FirstOrderLoss::CrossEntropy, &fh, &f, cfg.nodes)?.value - s1(FirstOrderLoss::CrossEntropy, &f, &f, cfg.nodes)?.value;
        let kl: f64 = p.probs().iter().zip(ph.probs()).map(|(a, b)| a * (a / b).ln()).sum();
        worst = worst.max((brier - dist).abs()).max((ce - kl).abs());
    }
    check(report, "first-order identities", worst <= 1e-12, format!("max deviation {worst:.3e}"));

    // closed forms
    let kl = kl_dirichlet(&[2.0, 2.0], &[1.0, 1.0])?;
    check(report, "dirichlet kl", (kl - (6f64.ln() - 5.0 / 3.0)).abs() < 1e-12, format!("KL((2,2)||(1,1)) = {kl}"));
    let ce0 = LossSpec::BayesCe { lambda: 0.0 };
    let (d2, d1): (SecondOrderDist<f64>, SecondOrderDist<f64>) = (Dirichlet::new(vec![2.0, 2.0])?.into(), Dirichlet::new(vec![1.0, 1.0])?.into());
    let gap = score_gap(&ce0, &d2, &d1, EvalMethod::Exact)?;
    check(report, "bayes-ce impropriety", (gap.gap + 1.0 / 6.0).abs() < tol, format!("gap = {}", gap.gap));
    let anchor = der_loss(&Nig::new(0.0, 1.0, 1.0, 1.0)?, 0.0, 1.0);
    check(report, "der anchor", (anchor - 2.0 * 2f64.ln()).abs() < 1e-12, format!("L(0,1,1,1; 0) = {anchor}"));

    // marginal collapse and strictness for every zoo loss
    let zoo = standard_zoo::<f64>();
    let (mut collapse, mut strict_ok) = (0.0f64, true);
    for loss in &zoo {
        let domain = loss.domain();
        for (qa, qb) in equal_marginal_pairs::<f64, _>(domain, 3, 5, &mut rng)? {
            let q_hat = random_prediction(domain, 3, &mut rng)?;
            let m = match qa.task() {
                Task::Classification { .. } => EvalMethod::Exact,
                Task::Regression => EvalMethod::Quadrature { nodes: cfg.nodes },
            };
            let (a, b) = (s2(loss, &q_hat, &qa, m)?.value, s2(loss, &q_hat, &qb, m)?.value);
            collapse = collapse.max((a - b).abs());
        }
        let v = strictness_impossibility(loss, cfg)?;
        strict_ok &= v.outcome == VerdictOutcome::ViolationFound && v.witness.as_ref().is_some_and(|w| w.kind == WitnessKind::Strictness);
    }
    check(report, "marginal collapse", collapse <= tol, format!("max |S2(Q̂,Qa) − S2(Q̂,Qb)| = {collapse:.3e}"));
    check(report, "strictness impossibility", strict_ok, format!("strictness witness for all {} zoo losses", zoo.len()));

    // threshold equivalence
    let mut mismatches = 0;
    for _ in 0..1000 {
        let mut v = || rng.random_range(-3.0..3.0);
        let values = BinaryLossValues { tilde: [v(), v()], q: [v(), v()] };
        let m = rng.random_range(0.0..1.0);
        if let Some((a, b, slack)) = threshold_equivalence(&values, m) {
            if a != b && slack > 1e-12 {
                mismatches += 1;
            }
        }
    }
    check(report, "threshold equivalence", mismatches == 0, format!("{mismatches} mismatches on 1000 quadruples"));

    // affine wrap
    let affine_cfg = ProbeConfig { n_random_pairs: 5, ..cfg.clone() };
    let mut affine_ok = true;
    for loss in &zoo {
        let v = affine_invariance_check(loss, 3.7, Quadratic::new(0.0, 0.0, 1.0), &affine_cfg)?;
        affine_ok &= v.outcome == VerdictOutcome::NoViolationFound;
    }
    check(report, "affine invariance", affine_ok, "gap(3.7·L + y²) = 3.7·gap(L) on every zoo loss".into());

    // peakedness
    let table = bayes_peakedness_sweep(&[1.0, 1.0], &[1.0, 2.0, 4.0, 8.0, 16.0], 0.0)?;
    let values: Vec<f64> = table.rows.iter().map(|r| r[1]).collect();
    let decreasing = values.windows(2).all(|w| w[1] < w[0]);
    check(
        report,
        "peakedness sweep",
        decreasing && (values[4] - 2f64.ln()).abs() < 0.05,
        format!("values {values:?}"),
    );
    report.tables.push(TableRecord::new("peakedness", &table));

    Ok(if report.checks.iter().all(|c| c.passed) { EXIT_OK } else { EXIT_EVAL })
}
