//! Propriety search, strictness, order-sensitivity, concavity and affine probes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::suites::random_prediction;
use super::{AuditVerdict, ProbeConfig, Table, Witness, WitnessKind};
use crate::error::{Error, Result};
use crate::first_order::{Categorical, Gaussian, Task};
use crate::losses::{LossDomain, LossSpec, Quadratic, SecondOrderLoss};
use crate::scalar::Real;
use crate::scoring::{order_sensitivity_curve, s2, score_gap, uniform_grid, EvalMethod, Method, ScoreGap, ScoreValue};
use crate::second_order::{mix, DiracMix, Dirichlet, Nig, SecondOrderDist};

const NOT_A_PROOF: &str = "NoViolationFound is evidence from a finite search, not a proof of propriety";

/// A second-order family together with a parameter box to sample from.
#[derive(Debug, Clone, PartialEq)]
pub enum FamilyBox<T> {
    /// Dirichlet with every concentration in `[lo, hi]`.
    Dirichlet { classes: usize, lo: T, hi: T },
    /// Two-atom Dirac mixtures of interior categoricals.
    DiracCategorical { classes: usize },
    /// NIG with each parameter in its closed range.
    Nig { m1: (T, T), m2: (T, T), m3: (T, T), m4: (T, T) },
    /// Point masses on Gaussians.
    DiracGaussian { mu: (T, T), sigma: (T, T) },
}

impl<T: Real> FamilyBox<T> {
    pub fn name(&self) -> &'static str {
        match self {
            FamilyBox::Dirichlet { .. } => "dirichlet",
            FamilyBox::DiracCategorical { .. } => "dirac-categorical",
            FamilyBox::Nig { .. } => "nig",
            FamilyBox::DiracGaussian { .. } => "dirac-gaussian",
        }
    }

    /// Default box for a family name.
    pub fn default_for(name: &str, classes: usize) -> Result<Self> {
        match name {
            "dirichlet" => Ok(FamilyBox::Dirichlet { classes, lo: T::half(), hi: T::c(5.0) }),
            "dirac-categorical" => Ok(FamilyBox::DiracCategorical { classes }),
            "nig" => Ok(FamilyBox::Nig {
                m1: (-T::one(), T::one()),
                m2: (T::half(), T::c(4.0)),
                m3: (T::c(1.5), T::c(5.0)),
                m4: (T::half(), T::two()),
            }),
            "dirac-gaussian" => Ok(FamilyBox::DiracGaussian { mu: (-T::one(), T::one()), sigma: (T::half(), T::two()) }),
            other => Err(Error::arg(format!(
                "unknown family '{other}'; valid families: dirichlet, dirac-categorical, nig, dirac-gaussian"
            ))),
        }
    }

    fn validate(&self) -> Result<()> {
        let ordered = |(a, b): (T, T)| a <= b;
        let ok = match self {
            FamilyBox::Dirichlet { classes, lo, hi } => *classes >= 2 && *lo > T::zero() && lo <= hi && hi.is_finite(),
            FamilyBox::DiracCategorical { classes } => *classes >= 2,
            FamilyBox::Nig { m1, m2, m3, m4 } => {
                ordered(*m1) && ordered(*m2) && ordered(*m3) && ordered(*m4) && m2.0 > T::zero() && m3.0 >= T::one() && m4.0 > T::zero()
            }
            FamilyBox::DiracGaussian { mu, sigma } => ordered(*mu) && ordered(*sigma) && sigma.0 > T::zero(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::arg(format!("invalid parameter box for family {}", self.name())))
        }
    }

    fn draw(range: (T, T), rng: &mut ChaCha8Rng) -> T {
        let u = T::c(rng.random::<f64>());
        range.0 + u * (range.1 - range.0)
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Result<SecondOrderDist<T>> {
        match self {
            FamilyBox::Dirichlet { classes, lo, hi } => {
                Ok(Dirichlet::new((0..*classes).map(|_| Self::draw((*lo, *hi), rng)).collect())?.into())
            }
            FamilyBox::DiracCategorical { classes } => random_prediction(LossDomain::Classification { dirichlet_only: false }, *classes, rng)
                .and_then(|q| match q {
                    SecondOrderDist::Dirac(_) => Ok(q),
                    other => {
                        let p = other.marginal().to_categorical()?;
                        let w = Self::draw((T::c(0.1), T::c(0.9)), rng);
                        let uniform = Categorical::uniform(*classes)?;
                        Ok(DiracMix::new(vec![T::one() - w, w], vec![p.into(), uniform.into()])?.into())
                    }
                }),
            FamilyBox::Nig { m1, m2, m3, m4 } => {
                Ok(Nig::new(Self::draw(*m1, rng), Self::draw(*m2, rng), Self::draw(*m3, rng), Self::draw(*m4, rng))?.into())
            }
            FamilyBox::DiracGaussian { mu, sigma } => {
                Ok(SecondOrderDist::dirac(Gaussian::new(Self::draw(*mu, rng), Self::draw(*sigma, rng))?))
            }
        }
    }

    /// Fixed pairs probed before the random ones.
    fn anchors(&self) -> Result<Vec<(SecondOrderDist<T>, SecondOrderDist<T>)>> {
        let mut out = Vec::new();
        if let FamilyBox::Dirichlet { classes, lo, hi } = self {
            let flat = |c: T| -> Result<SecondOrderDist<T>> { Ok(Dirichlet::new(vec![c; *classes])?.into()) };
            if *lo <= T::one() && T::two() <= *hi {
                out.push((flat(T::two())?, flat(T::one())?));
            }
            out.push((flat(*hi)?, flat(*lo)?));
            out.push((flat(*lo)?, flat(*hi)?));
        }
        Ok(out)
    }
}

/// Deterministic path for the task of `q`.
fn exact_path<T: Real>(q: &SecondOrderDist<T>, cfg: &ProbeConfig<T>) -> EvalMethod {
    match q.task() {
        Task::Classification { .. } => EvalMethod::Exact,
        Task::Regression => cfg.deterministic(),
    }
}

fn refined(method: Method) -> EvalMethod {
    match method {
        Method::Exact => EvalMethod::Exact,
        Method::Quadrature { nodes } => EvalMethod::Quadrature { nodes: 2 * nodes },
        Method::MonteCarlo { samples, seed } => EvalMethod::MonteCarlo { samples: 2 * samples, seed },
    }
}

fn shifted(method: EvalMethod, by: u64) -> EvalMethod {
    match method {
        EvalMethod::MonteCarlo { samples, seed } => EvalMethod::MonteCarlo { samples, seed: seed.wrapping_add(by) },
        m => m,
    }
}

/// Samples `(Q̂, Q)` pairs from the box and reports the most negative certified gap.
pub fn propriety_search<T: Real, L: SecondOrderLoss<T> + ?Sized>(
    loss: &L,
    family: &FamilyBox<T>,
    cfg: &ProbeConfig<T>,
) -> Result<AuditVerdict<T>> {
    cfg.validate()?;
    family.validate()?;
    let mut verdict = AuditVerdict::new(format!("propriety-search[{}; {}]", loss.label(), family.name()));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let probe = family.sample(&mut rng)?;
    if !loss.domain().accepts(&probe) {
        return Ok(verdict.not_met(format!("loss cannot be evaluated on the {} family", family.name())));
    }
    let mut pairs = family.anchors()?;
    pairs.push((probe.clone(), probe));
    for _ in 0..cfg.n_random_pairs {
        pairs.push((family.sample(&mut rng)?, family.sample(&mut rng)?));
    }

    let mut best: Option<Witness<T>> = None;
    let mut first_error: Option<String> = None;
    for (i, (q_hat, q)) in pairs.into_iter().enumerate() {
        verdict.probes_run += 1;
        let gap = match score_gap(loss, &q_hat, &q, cfg.method(i as u64)) {
            Ok(g) if g.gap.is_finite() => g,
            Ok(_) => {
                verdict.skipped += 1;
                continue;
            }
            Err(e) => {
                verdict.skipped += 1;
                first_error.get_or_insert_with(|| e.to_string());
                continue;
            }
        };
        if gap.certified_negative(cfg.abs_tol, cfg.margin_factor) && best.as_ref().is_none_or(|w| gap.gap < w.gap.gap) {
            best = Some(Witness { kind: WitnessKind::Propriety, q_hat, q, gap, lambdas: None, reference: None });
        }
    }
    if verdict.skipped > 0 {
        verdict.note(format!("{} pairs skipped with non-finite or failed gaps", verdict.skipped));
    }
    if let Some(e) = first_error {
        verdict.note(format!("first evaluation failure: {e}"));
    }
    Ok(match best {
        Some(w) => {
            let holds = revalidate(loss, &w, cfg)?;
            verdict.note(format!("witness re-validated on a refined path: {}", if holds { "sign preserved" } else { "sign NOT preserved" }));
            verdict.violation(w)
        }
        None => {
            verdict.note(NOT_A_PROOF);
            verdict
        }
    })
}

/// Recomputes a witness on a refined path (doubled Monte-Carlo samples or
/// quadrature nodes, or the exact path again) and checks that its verdict holds.
pub fn revalidate<T: Real, L: SecondOrderLoss<T> + ?Sized>(loss: &L, witness: &Witness<T>, cfg: &ProbeConfig<T>) -> Result<bool> {
    let method = refined(witness.gap.lhs.method);
    let certified = |g: &ScoreGap<T>| g.certified_negative(cfg.abs_tol, cfg.margin_factor);
    match witness.kind {
        WitnessKind::Propriety => Ok(certified(&score_gap(loss, &witness.q_hat, &witness.q, method)?)),
        WitnessKind::Strictness => {
            let g = score_gap(loss, &witness.q_hat, &witness.q, method)?;
            Ok(g.gap <= g.margin(cfg.abs_tol, cfg.margin_factor))
        }
        WitnessKind::OrderSensitivity => {
            let reference = witness.reference.as_ref().ok_or_else(|| Error::arg("order-sensitivity witness lacks its reference"))?;
            let lhs = s2(loss, &witness.q_hat, &witness.q, method)?;
            let rhs = s2(loss, reference, &witness.q, shifted(method, 1))?;
            Ok(certified(&ScoreGap::new(lhs, rhs)))
        }
        WitnessKind::Concavity => {
            let lambda = witness.lambdas.map(|l| l.0).ok_or_else(|| Error::arg("concavity witness lacks its weight"))?;
            let gap = concavity_gap(loss, &witness.q_hat, &witness.q, lambda, method)?;
            Ok(certified(&gap))
        }
        WitnessKind::ImplementationDefect => Ok(true),
    }
}

/// `G2` at `(1 − λ) Q̃ + λ Q` minus the chord `(1 − λ) G2(Q̃) + λ G2(Q)`.
fn concavity_gap<T: Real, L: SecondOrderLoss<T> + ?Sized>(
    loss: &L,
    q_tilde: &SecondOrderDist<T>,
    q: &SecondOrderDist<T>,
    lambda: T,
    method: EvalMethod,
) -> Result<ScoreGap<T>> {
    let g_tilde = s2(loss, q_tilde, q_tilde, shifted(method, 1))?;
    let g_q = s2(loss, q, q, shifted(method, 2))?;
    let m = mix(q_tilde, q, lambda)?;
    let g_mix = s2(loss, &m, &m, method)?;
    Ok(ScoreGap::new(g_mix, chord(&g_tilde, &g_q, lambda)))
}

fn chord<T: Real>(a: &ScoreValue<T>, b: &ScoreValue<T>, lambda: T) -> ScoreValue<T> {
    let w = T::one() - lambda;
    let value = if lambda == T::zero() {
        a.value
    } else if lambda == T::one() {
        b.value
    } else {
        w * a.value + lambda * b.value
    };
    ScoreValue {
        value,
        stderr: ((w * a.stderr).powi(2) + (lambda * b.stderr).powi(2)).sqrt(),
        residual: w * a.residual + lambda * b.residual,
        method: a.method,
        infinite: a.infinite || b.infinite,
    }
}

/// The two equal-marginal targets used to show that strict propriety fails.
fn strictness_pair<T: Real>(domain: LossDomain, spread: bool) -> Result<(SecondOrderDist<T>, SecondOrderDist<T>)> {
    Ok(match domain {
        LossDomain::Classification { dirichlet_only: true } => {
            (Dirichlet::new(vec![T::one(); 2])?.into(), Dirichlet::new(vec![T::c(3.0); 2])?.into())
        }
        LossDomain::Classification { dirichlet_only: false } => {
            let (a, b) = if spread {
                (Categorical::vertex(2, 0)?, Categorical::vertex(2, 1)?)
            } else {
                (Categorical::new(vec![T::c(0.8), T::c(0.2)])?, Categorical::new(vec![T::c(0.2), T::c(0.8)])?)
            };
            let q1 = SecondOrderDist::dirac(Categorical::uniform(2)?);
            (q1, DiracMix::new(vec![T::half(), T::half()], vec![a.into(), b.into()])?.into())
        }
        LossDomain::Regression { nig_only: true } => {
            (Nig::new(T::zero(), T::one(), T::two(), T::one())?.into(), Nig::new(T::zero(), T::c(3.0), T::two(), T::c(1.5))?.into())
        }
        LossDomain::Regression { nig_only: false } => {
            let d = SecondOrderDist::dirac(Gaussian::new(T::zero(), T::two())?);
            (d.clone(), mix(&d, &d, T::half())?)
        }
    })
}

/// Exhibits distinct `Q1 ≠ Q2` with equal marginals, so that
/// `S2(Q̂, Q1) = S2(Q̂, Q2)` for every `Q̂` and one of the two predictions scores
/// no worse than the truth on the other's target.
pub fn strictness_impossibility<T: Real, L: SecondOrderLoss<T> + ?Sized>(loss: &L, cfg: &ProbeConfig<T>) -> Result<AuditVerdict<T>> {
    cfg.validate()?;
    let mut verdict = AuditVerdict::new(format!("strictness[{}]", loss.label()));
    let domain = loss.domain();
    let mut attempt = 0;
    let (q1, q2, scores) = loop {
        let (q1, q2) = strictness_pair::<T>(domain, attempt == 0)?;
        let method = exact_path(&q1, cfg);
        let scores = [s2(loss, &q1, &q1, method)?, s2(loss, &q1, &q2, method)?, s2(loss, &q2, &q1, method)?, s2(loss, &q2, &q2, method)?];
        if scores.iter().all(|s| s.value.is_finite()) || attempt == 1 {
            break (q1, q2, scores);
        }
        verdict.note("vertex atoms give infinite losses; using interior atoms (0.8, 0.2) and (0.2, 0.8) with the same average");
        attempt += 1;
    };
    let [s11, s12, s21, s22] = scores;
    verdict.probes_run = 4;
    verdict.note(format!("Q1 = {q1}"));
    verdict.note(format!("Q2 = {q2}"));
    for (name, a, b) in [("Q̂ = Q1", &s11, &s12), ("Q̂ = Q2", &s21, &s22)] {
        let dev = if a.value == b.value { T::zero() } else { (a.value - b.value).abs() };
        verdict.note(format!("{name}: |S2(Q̂,Q1) − S2(Q̂,Q2)| = {:.3e}", dev.f64()));
        if !(dev <= cfg.abs_tol.max(cfg.margin_factor * (a.uncertainty() + b.uncertainty()))) {
            let gap = ScoreGap::new(a.clone(), b.clone());
            let q_hat = if name.ends_with("Q1") { q1.clone() } else { q2.clone() };
            verdict.note("scores differ between equal-marginal targets: the marginal-collapse identity is broken");
            return Ok(verdict.violation(Witness {
                kind: WitnessKind::ImplementationDefect,
                q_hat,
                q: q1,
                gap,
                lambdas: None,
                reference: None,
            }));
        }
    }
    // gap of predicting Q2 on target Q1, and of predicting Q1 on target Q2
    let g21 = ScoreGap::new(s21, s11);
    let g12 = ScoreGap::new(s12, s22);
    let (q_hat, q, gap) = if g21.gap <= g12.gap { (q2, q1, g21) } else { (q1, q2, g12) };
    if gap.certified_negative(cfg.abs_tol, cfg.margin_factor) {
        verdict.note("the strictness witness is also a certified propriety violation");
    }
    if !(gap.gap <= gap.margin(cfg.abs_tol, cfg.margin_factor)) {
        return Ok(verdict.not_met("neither equal-marginal prediction matches the other's score"));
    }
    verdict.note("distinct second-order distributions with equal marginals are scored identically; strict propriety fails");
    Ok(verdict.violation(Witness { kind: WitnessKind::Strictness, q_hat, q, gap, lambdas: None, reference: None }))
}

fn increase_margin<T: Real>(a: &ScoreValue<T>, b: &ScoreValue<T>, cfg: &ProbeConfig<T>) -> T {
    let stderr = (a.stderr * a.stderr + b.stderr * b.stderr).sqrt();
    cfg.abs_tol.max(cfg.margin_factor * stderr.max(a.residual + b.residual))
}

/// Looks for a certified increase of `λ ↦ S2((1 − λ) Q' + λ Q, Q)`.
pub fn order_sensitivity_probe<T: Real, L: SecondOrderLoss<T> + ?Sized>(
    loss: &L,
    q: &SecondOrderDist<T>,
    q_prime: &SecondOrderDist<T>,
    cfg: &ProbeConfig<T>,
) -> Result<AuditVerdict<T>> {
    cfg.validate()?;
    let mut verdict = AuditVerdict::new(format!("order-sensitivity[{}]", loss.label()));
    let grid = uniform_grid::<T>(cfg.lambda_grid);
    let curve = match order_sensitivity_curve(loss, q, q_prime, &grid, cfg.method(0)) {
        Ok(c) => c,
        Err(e) => return Ok(verdict.not_met(format!("curve could not be evaluated: {e}"))),
    };
    verdict.probes_run = curve.len();
    let method = curve[0].1.method.to_string();
    let mut table = Table::new("order-sensitivity", &["lambda", "value", "stderr", "residual"], method);
    for (l, v) in &curve {
        table.rows.push(vec![*l, v.value, v.stderr, v.residual]);
    }
    verdict.tables.push(table);
    let mut best: Option<(usize, T)> = None;
    for j in 0..curve.len() - 1 {
        let (a, b) = (&curve[j].1, &curve[j + 1].1);
        let inc = b.value - a.value;
        if inc.is_finite() && inc > increase_margin(a, b, cfg) && best.is_none_or(|(_, m)| inc > m) {
            best = Some((j, inc));
        }
    }
    Ok(match best {
        Some((j, inc)) => {
            let (lj, lk) = (curve[j].0, curve[j + 1].0);
            verdict.note(format!("certified increase {:.6e} between lambda = {} and {}", inc.f64(), lj, lk));
            let witness = Witness {
                kind: WitnessKind::OrderSensitivity,
                q_hat: mix(q_prime, q, lj)?,
                q: q.clone(),
                gap: ScoreGap::new(curve[j].1.clone(), curve[j + 1].1.clone()),
                lambdas: Some((lj, lk)),
                reference: Some(mix(q_prime, q, lk)?),
            };
            verdict.violation(witness)
        }
        None => {
            verdict.note(NOT_A_PROOF);
            verdict
        }
    })
}

/// Checks `G2(Q) = S2(Q, Q)` against its chords along `(1 − λ) Q̃ + λ Q`.
pub fn concavity_probe<T: Real, L: SecondOrderLoss<T> + ?Sized>(
    loss: &L,
    q: &SecondOrderDist<T>,
    q_tilde: &SecondOrderDist<T>,
    cfg: &ProbeConfig<T>,
) -> Result<AuditVerdict<T>> {
    cfg.validate()?;
    let mut verdict = AuditVerdict::new(format!("concavity[{}]", loss.label()));
    let base = cfg.method(0);
    let ends = (|| Ok::<_, Error>((s2(loss, q_tilde, q_tilde, shifted(base, 1))?, s2(loss, q, q, shifted(base, 2))?)))();
    let (g_tilde, g_q) = match ends {
        Ok(e) => e,
        Err(e) => return Ok(verdict.not_met(format!("endpoints could not be evaluated: {e}"))),
    };
    let mut table = Table::new("concavity", &["lambda", "g2", "chord", "deficit"], g_q.method.to_string());
    let mut best: Option<(T, ScoreGap<T>)> = None;
    for (i, lambda) in uniform_grid::<T>(cfg.lambda_grid).into_iter().enumerate() {
        let m = mix(q_tilde, q, lambda)?;
        let g_mix = match s2(loss, &m, &m, shifted(base, 3 + 2 * i as u64)) {
            Ok(v) => v,
            Err(e) => return Ok(verdict.not_met(format!("G2 could not be evaluated on mixtures: {e}"))),
        };
        verdict.probes_run += 1;
        let gap = ScoreGap::new(g_mix, chord(&g_tilde, &g_q, lambda));
        table.rows.push(vec![lambda, gap.lhs.value, gap.rhs.value, gap.gap]);
        if gap.certified_negative(cfg.abs_tol, cfg.margin_factor) && best.as_ref().is_none_or(|(_, g)| gap.gap < g.gap) {
            best = Some((lambda, gap));
        }
    }
    verdict.tables.push(table);
    Ok(match best {
        Some((lambda, gap)) => {
            verdict.note(format!("G2 falls below its chord at lambda = {lambda}"));
            verdict.violation(Witness {
                kind: WitnessKind::Concavity,
                q_hat: q_tilde.clone(),
                q: q.clone(),
                gap,
                lambdas: Some((lambda, lambda)),
                reference: None,
            })
        }
        None => {
            verdict.note(NOT_A_PROOF);
            verdict
        }
    })
}

/// Verifies `gap(c · L2 + g) = c · gap(L2)` on a random suite of `cfg.n_random_pairs` pairs.
pub fn affine_invariance_check<T: Real>(inner: &LossSpec<T>, c: T, g: Quadratic<T>, cfg: &ProbeConfig<T>) -> Result<AuditVerdict<T>> {
    cfg.validate()?;
    let mut verdict = AuditVerdict::new(format!("affine-invariance[{inner}]"));
    if !(c > T::zero()) {
        return Ok(verdict.not_met("the scale c must be positive"));
    }
    let wrapped = LossSpec::affine(inner.clone(), c, g)?;
    let domain = inner.domain();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut table = Table::new("affine", &["inner_gap", "wrapped_gap", "deviation"], "exact/quadrature");
    let mut worst: Option<(T, Witness<T>)> = None;
    let mut sign_flips = 0usize;
    for _ in 0..cfg.n_random_pairs {
        let q_hat = random_prediction(domain, 3, &mut rng)?;
        let q = random_prediction(domain, 3, &mut rng)?;
        let method = exact_path(&q, cfg);
        let (gi, gw) = match (score_gap(inner, &q_hat, &q, method), score_gap(&wrapped, &q_hat, &q, method)) {
            (Ok(a), Ok(b)) if a.gap.is_finite() && b.gap.is_finite() => (a, b),
            _ => {
                verdict.skipped += 1;
                continue;
            }
        };
        verdict.probes_run += 1;
        let dev = (gw.gap - c * gi.gap).abs();
        table.rows.push(vec![gi.gap, gw.gap, dev]);
        if (gi.gap > T::zero() && gw.gap <= T::zero()) || (gi.gap < T::zero() && gw.gap >= T::zero()) {
            sign_flips += 1;
        }
        if dev > cfg.abs_tol && worst.as_ref().is_none_or(|(d, _)| dev > *d) {
            worst = Some((dev, Witness { kind: WitnessKind::ImplementationDefect, q_hat, q, gap: gw, lambdas: None, reference: None }));
        }
    }
    verdict.tables.push(table);
    verdict.note(format!("{sign_flips} gap signs changed under the wrap"));
    Ok(match worst {
        Some((dev, w)) => {
            verdict.note(format!("wrapped gap deviates from c · inner gap by {:.3e}: implementation defect", dev.f64()));
            verdict.violation(w)
        }
        None => {
            verdict.note(format!("all {} wrapped gaps equal c · inner gap within {}", verdict.probes_run, cfg.abs_tol));
            verdict
        }
    })
}
