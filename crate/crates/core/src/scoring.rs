//! Expected second-order scores `S2(Q̂, Q) = E_{p~Q} E_{Y~p}[L2(Q̂, Y)]` with exact,
//! quadrature, and Monte-Carlo evaluation paths.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::first_order::{expect_fn, Outcome, Task};
use crate::losses::SecondOrderLoss;
use crate::quadrature::HERMITE_NODES;
use crate::scalar::{kahan_sum, Real};
use crate::second_order::{mix, SecondOrderDist};

/// Default Monte-Carlo sample count.
pub const DEFAULT_MC_SAMPLES: usize = 100_000;

/// How a score value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Exact,
    Quadrature { nodes: usize },
    MonteCarlo { samples: usize, seed: u64 },
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Exact => write!(f, "exact"),
            Method::Quadrature { nodes } => write!(f, "quadrature({nodes})"),
            Method::MonteCarlo { samples, seed } => write!(f, "mc({samples},{seed})"),
        }
    }
}

/// Requested evaluation path for `s2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMethod {
    /// Exact for classification, quadrature with the default node count for regression.
    Auto,
    Exact,
    Quadrature { nodes: usize },
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreValue<T> {
    pub value: T,
    /// Monte-Carlo standard error; zero for exact and quadrature values.
    pub stderr: T,
    /// Quadrature residual `|I(n) − I(2n)|`; zero for exact and Monte-Carlo values.
    pub residual: T,
    pub method: Method,
    /// Set when a positive-mass outcome has an infinite loss.
    pub infinite: bool,
}

impl<T: Real> ScoreValue<T> {
    pub fn deterministic(value: T, method: Method) -> Self {
        ScoreValue { value, stderr: T::zero(), residual: T::zero(), method, infinite: value == T::infinity() }
    }

    /// Largest of the statistical and discretisation uncertainty.
    pub fn uncertainty(&self) -> T {
        self.stderr.max(self.residual)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreGap<T> {
    /// `lhs.value − rhs.value`.
    pub gap: T,
    /// Standard errors combined in quadrature.
    pub stderr: T,
    pub lhs: ScoreValue<T>,
    pub rhs: ScoreValue<T>,
}

impl<T: Real> ScoreGap<T> {
    pub fn new(lhs: ScoreValue<T>, rhs: ScoreValue<T>) -> Self {
        let gap = if lhs.value == rhs.value { T::zero() } else { lhs.value - rhs.value };
        let stderr = (lhs.stderr * lhs.stderr + rhs.stderr * rhs.stderr).sqrt();
        ScoreGap { gap, stderr, lhs, rhs }
    }

    /// Combined quadrature residual of both sides.
    pub fn residual(&self) -> T {
        self.lhs.residual + self.rhs.residual
    }

    /// `max(abs_tol, factor · uncertainty)`.
    pub fn margin(&self, abs_tol: T, factor: T) -> T {
        abs_tol.max(factor * self.stderr.max(self.residual()))
    }

    /// The gap is negative beyond its certification margin.
    pub fn certified_negative(&self, abs_tol: T, factor: T) -> bool {
        self.gap.is_finite() && self.gap < -self.margin(abs_tol, factor)
    }
}

fn check_compatible<T: Real>(q_hat: &SecondOrderDist<T>, q: &SecondOrderDist<T>) -> Result<()> {
    if q_hat.task() != q.task() {
        return Err(Error::arg("prediction and target live on different outcome spaces"));
    }
    Ok(())
}

/// Loss values `L2(Q̂, k)` for every class.
pub fn class_profile<T: Real, L: SecondOrderLoss<T> + ?Sized>(loss: &L, q_hat: &SecondOrderDist<T>, classes: usize) -> Result<Vec<T>> {
    (0..classes)
        .map(|k| {
            let v = loss.eval(q_hat, Outcome::Class(k))?;
            if v.is_nan() {
                Err(Error::eval("loss is NaN", Outcome::<T>::Class(k)))
            } else {
                Ok(v)
            }
        })
        .collect()
}

/// `Σ_k p̄_k L_k` with the `0 · inf = 0` convention.
pub fn exact_from_profile<T: Real>(profile: &[T], q: &SecondOrderDist<T>) -> Result<ScoreValue<T>> {
    let marginal = q.marginal().to_categorical()?;
    let mut terms = Vec::with_capacity(profile.len());
    for (pk, lk) in marginal.probs().iter().zip(profile) {
        if *pk == T::zero() {
            continue;
        }
        if *lk == T::infinity() {
            return Ok(ScoreValue::deterministic(T::infinity(), Method::Exact));
        }
        terms.push(*pk * *lk);
    }
    Ok(ScoreValue::deterministic(kahan_sum(terms), Method::Exact))
}

/// `S2(Q̂, Q)`.
pub fn s2<T: Real, L: SecondOrderLoss<T> + ?Sized>(
    loss: &L,
    q_hat: &SecondOrderDist<T>,
    q: &SecondOrderDist<T>,
    method: EvalMethod,
) -> Result<ScoreValue<T>> {
    check_compatible(q_hat, q)?;
    let task = q.task();
    match (method, task) {
        (EvalMethod::MonteCarlo { samples, seed }, _) => s2_monte_carlo(loss, q_hat, q, samples, seed),
        (EvalMethod::Auto | EvalMethod::Exact, Task::Classification { classes }) => {
            let profile = class_profile(loss, q_hat, classes)?;
            exact_from_profile(&profile, q)
        }
        (EvalMethod::Quadrature { .. }, Task::Classification { .. }) => {
            Err(Error::arg("classification scores are summed exactly; quadrature does not apply"))
        }
        (EvalMethod::Exact, Task::Regression) => Err(Error::arg("no exact path for regression scores; use quadrature or mc")),
        (EvalMethod::Auto, Task::Regression) => s2_quadrature(loss, q_hat, q, HERMITE_NODES),
        (EvalMethod::Quadrature { nodes }, Task::Regression) => s2_quadrature(loss, q_hat, q, nodes),
    }
}

fn s2_quadrature<T: Real, L: SecondOrderLoss<T> + ?Sized>(
    loss: &L,
    q_hat: &SecondOrderDist<T>,
    q: &SecondOrderDist<T>,
    nodes: usize,
) -> Result<ScoreValue<T>> {
    let marginal = q.marginal();
    let mut f = |y: Outcome<T>| loss.eval(q_hat, y);
    let value = expect_fn(&marginal, &mut f, nodes)?;
    let refined = expect_fn(&marginal, &mut f, 2 * nodes)?;
    Ok(ScoreValue {
        value,
        stderr: T::zero(),
        residual: (refined - value).abs(),
        method: Method::Quadrature { nodes },
        infinite: false,
    })
}

fn s2_monte_carlo<T: Real, L: SecondOrderLoss<T> + ?Sized>(
    loss: &L,
    q_hat: &SecondOrderDist<T>,
    q: &SecondOrderDist<T>,
    samples: usize,
    seed: u64,
) -> Result<ScoreValue<T>> {
    if samples < 2 {
        return Err(Error::arg("monte carlo needs at least 2 samples"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let profile = match q.task() {
        Task::Classification { classes } => Some(class_profile(loss, q_hat, classes)?),
        Task::Regression => None,
    };
    // Welford accumulation in f64
    let (mut mean, mut m2) = (0.0f64, 0.0f64);
    for i in 0..samples {
        let p = q.sample_with(&mut rng);
        let y = p.sample(&mut rng);
        let v = match (&profile, y) {
            (Some(prof), Outcome::Class(k)) => prof[k],
            _ => loss.eval(q_hat, y)?,
        };
        if !v.is_finite() {
            return Err(Error::eval(format!("loss is {v} on monte carlo draw {i}"), y));
        }
        let v = v.f64();
        let delta = v - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (v - mean);
    }
    let n = samples as f64;
    let sd = (m2 / (n - 1.0)).sqrt();
    Ok(ScoreValue {
        value: T::c(mean),
        stderr: T::c(sd / n.sqrt()),
        residual: T::zero(),
        method: Method::MonteCarlo { samples, seed },
        infinite: false,
    })
}

/// `S2(Q̂, Q) − S2(Q, Q)`. Under Monte Carlo the right-hand side uses `seed + 1`
/// so the two estimates are independent.
pub fn score_gap<T: Real, L: SecondOrderLoss<T> + ?Sized>(
    loss: &L,
    q_hat: &SecondOrderDist<T>,
    q: &SecondOrderDist<T>,
    method: EvalMethod,
) -> Result<ScoreGap<T>> {
    let lhs = s2(loss, q_hat, q, method)?;
    if q_hat == q {
        return Ok(ScoreGap::new(lhs.clone(), lhs));
    }
    let rhs_method = match method {
        EvalMethod::MonteCarlo { samples, seed } => EvalMethod::MonteCarlo { samples, seed: seed.wrapping_add(1) },
        m => m,
    };
    let rhs = s2(loss, q, q, rhs_method)?;
    Ok(ScoreGap::new(lhs, rhs))
}

/// Validates an order-sensitivity grid: sorted, inside `[0, 1]`, at least 3 points.
pub fn check_lambda_grid<T: Real>(grid: &[T]) -> Result<()> {
    if grid.len() < 3 {
        return Err(Error::arg(format!("lambda grid needs at least 3 points, got {}", grid.len())));
    }
    if grid.iter().any(|l| !(*l >= T::zero() && *l <= T::one())) {
        return Err(Error::arg("lambda grid must lie in [0, 1]"));
    }
    if grid.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::arg("lambda grid must be sorted"));
    }
    Ok(())
}

pub fn uniform_grid<T: Real>(points: usize) -> Vec<T> {
    let last = T::of_usize(points.max(2) - 1);
    (0..points.max(2)).map(|i| T::of_usize(i) / last).collect()
}

/// `λ ↦ S2((1 − λ) Q' + λ Q, Q)` on a grid. Monte-Carlo points use `seed + index`.
pub fn order_sensitivity_curve<T: Real, L: SecondOrderLoss<T> + ?Sized>(
    loss: &L,
    q: &SecondOrderDist<T>,
    q_prime: &SecondOrderDist<T>,
    grid: &[T],
    method: EvalMethod,
) -> Result<Vec<(T, ScoreValue<T>)>> {
    check_lambda_grid(grid)?;
    check_compatible(q_prime, q)?;
    grid.iter()
        .enumerate()
        .map(|(i, lambda)| {
            let point_method = match method {
                EvalMethod::MonteCarlo { samples, seed } => EvalMethod::MonteCarlo { samples, seed: seed.wrapping_add(i as u64) },
                m => m,
            };
            let q_lambda = mix(q_prime, q, *lambda)?;
            Ok((*lambda, s2(loss, &q_lambda, q, point_method)?))
        })
        .collect()
}
