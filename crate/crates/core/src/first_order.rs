//! First-order distributions on outcomes, first-order losses, and the expected score `S1`.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::quadrature::{gauss_hermite, legendre_on};
use crate::scalar::{kahan_sum, Real};
use crate::scoring::{Method, ScoreValue};
use crate::special::{ln_gamma, normal_cdf, normal_pdf, normal_sf};

/// Tolerance used when validating probability vectors.
pub fn simplex_tol<T: Real>(len: usize) -> T {
    T::c(1e-12).max(T::epsilon() * T::of_usize(16 * len.max(1)))
}

/// An observed outcome: a class index (classification) or a real value (regression).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome<T> {
    Class(usize),
    Value(T),
}

impl<T: Real> Outcome<T> {
    /// The outcome as a real number (class indices map to their index).
    pub fn as_real(self) -> T {
        match self {
            Outcome::Class(k) => T::of_usize(k),
            Outcome::Value(y) => y,
        }
    }
}

impl<T: Real> std::fmt::Display for Outcome<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Outcome::Class(k) => write!(f, "class {k}"),
            Outcome::Value(y) => write!(f, "y={y}"),
        }
    }
}

/// Whether a distribution lives on a finite class set or on the real line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Classification { classes: usize },
    Regression,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Categorical<T> {
    probs: Vec<T>,
}

impl<T: Real> Categorical<T> {
    pub fn new(probs: Vec<T>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::arg(format!("categorical needs at least 2 classes, got {}", probs.len())));
        }
        if probs.iter().any(|p| !(*p >= T::zero()) || !p.is_finite()) {
            return Err(Error::arg("categorical probabilities must be finite and nonnegative"));
        }
        let total = kahan_sum(probs.iter().copied());
        if (total - T::one()).abs() > simplex_tol::<T>(probs.len()) {
            return Err(Error::arg(format!("categorical probabilities sum to {total}, not 1")));
        }
        Ok(Categorical { probs })
    }

    /// The point mass on class `k` out of `classes`.
    pub fn vertex(classes: usize, k: usize) -> Result<Self> {
        if k >= classes {
            return Err(Error::arg(format!("class {k} out of range for {classes} classes")));
        }
        let mut probs = vec![T::zero(); classes];
        probs[k] = T::one();
        Categorical::new(probs)
    }

    pub fn uniform(classes: usize) -> Result<Self> {
        Categorical::new(vec![T::one() / T::of_usize(classes.max(1)); classes])
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn classes(&self) -> usize {
        self.probs.len()
    }

    pub fn prob(&self, y: usize) -> Result<T> {
        self.probs
            .get(y)
            .copied()
            .ok_or_else(|| Error::arg(format!("class {y} out of range for {} classes", self.probs.len())))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian<T> {
    pub mu: T,
    pub sigma: T,
}

impl<T: Real> Gaussian<T> {
    pub fn new(mu: T, sigma: T) -> Result<Self> {
        if !mu.is_finite() || !(sigma > T::zero()) || !sigma.is_finite() {
            return Err(Error::arg(format!("gaussian needs finite mu and sigma > 0, got ({mu}, {sigma})")));
        }
        Ok(Gaussian { mu, sigma })
    }

    pub fn pdf(&self, y: T) -> T {
        normal_pdf((y - self.mu) / self.sigma) / self.sigma
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudentT<T> {
    pub loc: T,
    pub scale: T,
    pub dof: T,
}

impl<T: Real> StudentT<T> {
    pub fn new(loc: T, scale: T, dof: T) -> Result<Self> {
        if !loc.is_finite() || !(scale > T::zero()) || !(dof > T::zero()) || !scale.is_finite() || !dof.is_finite() {
            return Err(Error::arg(format!("student-t needs scale > 0 and dof > 0, got ({loc}, {scale}, {dof})")));
        }
        Ok(StudentT { loc, scale, dof })
    }

    pub fn ln_pdf(&self, y: T) -> T {
        let nu = self.dof;
        let z = (y - self.loc) / self.scale;
        let half = T::half();
        ln_gamma((nu + T::one()) * half)
            - ln_gamma(nu * half)
            - half * (nu * T::PI()).ln()
            - self.scale.ln()
            - (nu + T::one()) * half * (z * z / nu).ln_1p()
    }

    pub fn pdf(&self, y: T) -> T {
        self.ln_pdf(y).exp()
    }
}

/// A Gaussian restricted to `(lo, hi)`; either bound may be infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedGaussian<T> {
    pub mu: T,
    pub sigma: T,
    pub lo: T,
    pub hi: T,
    mass: T,
}

impl<T: Real> TruncatedGaussian<T> {
    pub fn new(mu: T, sigma: T, lo: T, hi: T) -> Result<Self> {
        Gaussian::new(mu, sigma)?;
        if !(lo < hi) {
            return Err(Error::arg(format!("truncation needs lo < hi, got ({lo}, {hi})")));
        }
        let a = (lo - mu) / sigma;
        let b = (hi - mu) / sigma;
        let mass = if a > T::zero() { normal_sf(a) - normal_sf(b) } else { normal_cdf(b) - normal_cdf(a) };
        if !(mass > T::zero()) {
            return Err(Error::arg("truncation interval carries no probability mass"));
        }
        Ok(TruncatedGaussian { mu, sigma, lo, hi, mass })
    }

    /// Probability mass of the untruncated Gaussian inside `(lo, hi)`.
    pub fn mass(&self) -> T {
        self.mass
    }

    pub fn pdf(&self, y: T) -> T {
        if y < self.lo || y > self.hi {
            return T::zero();
        }
        normal_pdf((y - self.mu) / self.sigma) / (self.sigma * self.mass)
    }

    fn mean(&self) -> T {
        let a = (self.lo - self.mu) / self.sigma;
        let b = (self.hi - self.mu) / self.sigma;
        self.mu + self.sigma * (normal_pdf(a) - normal_pdf(b)) / self.mass
    }

    fn variance(&self) -> T {
        let a = (self.lo - self.mu) / self.sigma;
        let b = (self.hi - self.mu) / self.sigma;
        let term = |z: T| if z.is_finite() { z * normal_pdf(z) } else { T::zero() };
        let r = (normal_pdf(a) - normal_pdf(b)) / self.mass;
        self.sigma * self.sigma * (T::one() + (term(a) - term(b)) / self.mass - r * r)
    }

    /// Integration window: the support clipped to twelve standard deviations around `mu`.
    fn window(&self) -> (T, T) {
        let span = T::c(12.0) * self.sigma;
        let mut a = self.lo.max(self.mu - span);
        let mut b = self.hi.min(self.mu + span);
        if !(a < b) {
            // support lies in a far tail: integrate twelve sigmas from the near edge
            if self.lo > self.mu {
                a = self.lo;
                b = self.hi.min(self.lo + span);
            } else {
                b = self.hi;
                a = self.lo.max(self.hi - span);
            }
        }
        (a, b)
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        // inverse CDF by bisection on the tail-accurate side
        let u = T::c(rng.random::<f64>());
        let upper = self.lo > self.mu;
        let (a, b) = self.window();
        let (mut lo, mut hi) = (a, b);
        let za = (self.lo - self.mu) / self.sigma;
        for _ in 0..200 {
            let mid = (lo + hi) * T::half();
            let z = (mid - self.mu) / self.sigma;
            let cdf = if upper {
                (normal_sf(za) - normal_sf(z)) / self.mass
            } else {
                (normal_cdf(z) - normal_cdf(za).max(T::zero())) / self.mass
            };
            if cdf < u {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= T::epsilon() * (hi.abs() + lo.abs()).max(T::min_positive_value()) {
                break;
            }
        }
        (lo + hi) * T::half()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMixture<T> {
    weights: Vec<T>,
    components: Vec<FirstOrderDist<T>>,
}

impl<T: Real> FiniteMixture<T> {
    pub fn new(weights: Vec<T>, components: Vec<FirstOrderDist<T>>) -> Result<Self> {
        validate_weights(&weights)?;
        if weights.len() != components.len() {
            return Err(Error::arg("mixture weights and components differ in length"));
        }
        let task = components[0].task();
        if components.iter().any(|c| c.task() != task) {
            return Err(Error::arg("mixture components must share one outcome space"));
        }
        Ok(FiniteMixture { weights, components })
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn components(&self) -> &[FirstOrderDist<T>] {
        &self.components
    }
}

pub(crate) fn validate_weights<T: Real>(weights: &[T]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::arg("weights must be non-empty"));
    }
    if weights.iter().any(|w| !(*w >= T::zero()) || !w.is_finite()) {
        return Err(Error::arg("weights must be finite and nonnegative"));
    }
    let total = kahan_sum(weights.iter().copied());
    if (total - T::one()).abs() > simplex_tol::<T>(weights.len()) {
        return Err(Error::arg(format!("weights sum to {total}, not 1")));
    }
    Ok(())
}

/// A probability distribution over outcomes.
#[derive(Debug, Clone, PartialEq)]
pub enum FirstOrderDist<T> {
    Categorical(Categorical<T>),
    Gaussian(Gaussian<T>),
    StudentT(StudentT<T>),
    Truncated(TruncatedGaussian<T>),
    Mixture(FiniteMixture<T>),
}

impl<T: Real> From<Categorical<T>> for FirstOrderDist<T> {
    fn from(c: Categorical<T>) -> Self {
        FirstOrderDist::Categorical(c)
    }
}

impl<T: Real> From<Gaussian<T>> for FirstOrderDist<T> {
    fn from(g: Gaussian<T>) -> Self {
        FirstOrderDist::Gaussian(g)
    }
}

impl<T: Real> From<StudentT<T>> for FirstOrderDist<T> {
    fn from(t: StudentT<T>) -> Self {
        FirstOrderDist::StudentT(t)
    }
}

impl<T: Real> From<TruncatedGaussian<T>> for FirstOrderDist<T> {
    fn from(t: TruncatedGaussian<T>) -> Self {
        FirstOrderDist::Truncated(t)
    }
}

impl<T: Real> From<FiniteMixture<T>> for FirstOrderDist<T> {
    fn from(m: FiniteMixture<T>) -> Self {
        FirstOrderDist::Mixture(m)
    }
}

impl<T: Real> FirstOrderDist<T> {
    pub fn task(&self) -> Task {
        match self {
            FirstOrderDist::Categorical(c) => Task::Classification { classes: c.classes() },
            FirstOrderDist::Mixture(m) => m.components[0].task(),
            _ => Task::Regression,
        }
    }

    pub fn as_categorical(&self) -> Option<&Categorical<T>> {
        match self {
            FirstOrderDist::Categorical(c) => Some(c),
            _ => None,
        }
    }

    /// Expectation of a real-valued distribution.
    pub fn mean(&self) -> Result<T> {
        match self {
            FirstOrderDist::Categorical(_) => Err(Error::arg("mean of a categorical distribution is undefined; use mean_prob")),
            FirstOrderDist::Gaussian(g) => Ok(g.mu),
            FirstOrderDist::StudentT(t) => {
                if t.dof > T::one() {
                    Ok(t.loc)
                } else {
                    Err(Error::arg(format!("student-t with dof {} has no finite mean", t.dof)))
                }
            }
            FirstOrderDist::Truncated(t) => Ok(t.mean()),
            FirstOrderDist::Mixture(m) => {
                let parts = m
                    .weights
                    .iter()
                    .zip(&m.components)
                    .map(|(w, c)| Ok(*w * c.mean()?))
                    .collect::<Result<Vec<_>>>()?;
                Ok(kahan_sum(parts))
            }
        }
    }

    pub fn variance(&self) -> Result<T> {
        match self {
            FirstOrderDist::Categorical(_) => Err(Error::arg("variance of a categorical distribution is undefined")),
            FirstOrderDist::Gaussian(g) => Ok(g.sigma * g.sigma),
            FirstOrderDist::StudentT(t) => {
                if t.dof > T::two() {
                    Ok(t.scale * t.scale * t.dof / (t.dof - T::two()))
                } else {
                    Err(Error::arg(format!("student-t with dof {} has no finite variance", t.dof)))
                }
            }
            FirstOrderDist::Truncated(t) => Ok(t.variance()),
            FirstOrderDist::Mixture(m) => {
                let mean = self.mean()?;
                let mut acc = T::zero();
                for (w, c) in m.weights.iter().zip(&m.components) {
                    let d = c.mean()? - mean;
                    acc = acc + *w * (c.variance()? + d * d);
                }
                Ok(acc)
            }
        }
    }

    /// Probability of class `y`.
    pub fn mean_prob(&self, y: usize) -> Result<T> {
        match self {
            FirstOrderDist::Categorical(c) => c.prob(y),
            FirstOrderDist::Mixture(m) if matches!(self.task(), Task::Classification { .. }) => {
                let parts = m
                    .weights
                    .iter()
                    .zip(&m.components)
                    .map(|(w, c)| Ok(*w * c.mean_prob(y)?))
                    .collect::<Result<Vec<_>>>()?;
                Ok(kahan_sum(parts))
            }
            _ => Err(Error::arg("class probability requested from a regression distribution")),
        }
    }

    /// Density for real-valued families.
    pub fn pdf(&self, y: T) -> Result<T> {
        match self {
            FirstOrderDist::Categorical(_) => Err(Error::arg("categorical distributions have no density")),
            FirstOrderDist::Gaussian(g) => Ok(g.pdf(y)),
            FirstOrderDist::StudentT(t) => Ok(t.pdf(y)),
            FirstOrderDist::Truncated(t) => Ok(t.pdf(y)),
            FirstOrderDist::Mixture(m) => {
                let mut acc = T::zero();
                for (w, c) in m.weights.iter().zip(&m.components) {
                    acc = acc + *w * c.pdf(y)?;
                }
                Ok(acc)
            }
        }
    }

    /// Collapse a classification mixture into a single categorical.
    pub fn to_categorical(&self) -> Result<Categorical<T>> {
        match self.task() {
            Task::Classification { classes } => {
                if let FirstOrderDist::Categorical(c) = self {
                    return Ok(c.clone());
                }
                let probs = (0..classes).map(|k| self.mean_prob(k)).collect::<Result<Vec<_>>>()?;
                Categorical::new(probs)
            }
            Task::Regression => Err(Error::arg("regression distribution cannot be collapsed to a categorical")),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Outcome<T> {
        match self {
            FirstOrderDist::Categorical(c) => Outcome::Class(pick_index(c.probs(), rng)),
            FirstOrderDist::Gaussian(g) => {
                let n = Normal::new(g.mu.f64(), g.sigma.f64()).expect("validated gaussian");
                Outcome::Value(T::c(n.sample(rng)))
            }
            FirstOrderDist::StudentT(t) => {
                let z: f64 = StandardNormal.sample(rng);
                let chi2 = rand_distr::Gamma::new(t.dof.f64() * 0.5, 2.0).expect("validated dof").sample(rng);
                let draw = z / (chi2 / t.dof.f64()).sqrt();
                Outcome::Value(t.loc + t.scale * T::c(draw))
            }
            FirstOrderDist::Truncated(t) => Outcome::Value(t.sample(rng)),
            FirstOrderDist::Mixture(m) => m.components[pick_index(&m.weights, rng)].sample(rng),
        }
    }
}

pub(crate) fn pick_index<T: Real, R: Rng + ?Sized>(weights: &[T], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, w) in weights.iter().enumerate() {
        let w = w.f64();
        if w > 0.0 {
            last_positive = i;
        }
        acc += w;
        if u < acc && w > 0.0 {
            return i;
        }
    }
    last_positive
}

/// Validates a quadrature node count.
fn check_nodes(nodes: usize) -> Result<()> {
    if nodes < 8 {
        return Err(Error::arg(format!("quadrature needs at least 8 nodes, got {nodes}")));
    }
    Ok(())
}

/// `E_{Y~p}[f(Y)]`.
///
/// Categorical distributions are summed exactly (zero-mass classes are skipped
/// and `+inf` at a positive-mass class yields `+inf`). Gaussians use `nodes`
/// Gauss-Hermite points; truncated Gaussians and Student-t use `2 * nodes`
/// Gauss-Legendre points, on a twelve-sigma window and after the substitution
/// `y = loc + scale * tan(theta)` respectively. Mixtures combine their
/// components' rules. Any non-finite value at a quadrature node is an
/// evaluation error naming that node.
pub fn expect_fn<T: Real>(p: &FirstOrderDist<T>, f: &mut dyn FnMut(Outcome<T>) -> Result<T>, nodes: usize) -> Result<T> {
    match p {
        FirstOrderDist::Categorical(c) => {
            let mut terms = Vec::with_capacity(c.classes());
            for (k, pk) in c.probs().iter().enumerate() {
                if *pk == T::zero() {
                    continue;
                }
                let v = f(Outcome::Class(k))?;
                if v.is_nan() {
                    return Err(Error::eval("integrand is NaN", Outcome::<T>::Class(k)));
                }
                if v == T::infinity() {
                    return Ok(T::infinity());
                }
                terms.push(*pk * v);
            }
            Ok(kahan_sum(terms))
        }
        FirstOrderDist::Gaussian(g) => {
            check_nodes(nodes)?;
            let rule = gauss_hermite(nodes);
            let scale = T::SQRT_2() * g.sigma;
            let norm = T::PI().sqrt();
            let mut terms = Vec::with_capacity(nodes);
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                let y = g.mu + scale * T::c(*x);
                let v = finite_at(f, y)?;
                terms.push(T::c(*w) / norm * v);
            }
            Ok(kahan_sum(terms))
        }
        FirstOrderDist::Truncated(t) => {
            check_nodes(nodes)?;
            let (a, b) = t.window();
            let mut terms = Vec::with_capacity(2 * nodes);
            for (y, w) in legendre_on(2 * nodes, a, b) {
                let v = finite_at(f, y)?;
                terms.push(w * t.pdf(y) * v);
            }
            Ok(kahan_sum(terms))
        }
        FirstOrderDist::StudentT(t) => {
            check_nodes(nodes)?;
            let half_pi = T::FRAC_PI_2();
            expect_tan(t, f, nodes, -half_pi, half_pi)
        }
        FirstOrderDist::Mixture(m) => {
            let mut terms = Vec::with_capacity(m.weights.len());
            for (w, c) in m.weights.iter().zip(&m.components) {
                if *w == T::zero() {
                    continue;
                }
                let v = expect_fn(c, f, nodes)?;
                if v == T::infinity() {
                    return Ok(v);
                }
                terms.push(*w * v);
            }
            Ok(kahan_sum(terms))
        }
    }
}

fn finite_at<T: Real>(f: &mut dyn FnMut(Outcome<T>) -> Result<T>, y: T) -> Result<T> {
    let v = f(Outcome::Value(y))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::eval(format!("integrand is {v}"), Outcome::Value(y)))
    }
}

fn expect_tan<T: Real>(
    t: &StudentT<T>,
    f: &mut dyn FnMut(Outcome<T>) -> Result<T>,
    nodes: usize,
    theta_lo: T,
    theta_hi: T,
) -> Result<T> {
    let mut terms = Vec::with_capacity(2 * nodes);
    for (theta, w) in legendre_on(2 * nodes, theta_lo, theta_hi) {
        let tan = theta.tan();
        let y = t.loc + t.scale * tan;
        let jac = t.scale * (T::one() + tan * tan);
        let dens = t.pdf(y) * jac;
        if dens == T::zero() {
            continue;
        }
        let v = finite_at(f, y)?;
        terms.push(w * dens * v);
    }
    Ok(kahan_sum(terms))
}

/// `∫_{lo}^{hi} f(y) dp(y)` for real-valued distributions; bounds may be infinite.
///
/// Uses `2 * nodes` Gauss-Legendre points after the substitution
/// `y = center + scale * tan(theta)` on each family's natural location and scale.
pub fn expect_region<T: Real>(
    p: &FirstOrderDist<T>,
    f: &mut dyn FnMut(Outcome<T>) -> Result<T>,
    lo: T,
    hi: T,
    nodes: usize,
) -> Result<T> {
    check_nodes(nodes)?;
    if !(lo < hi) {
        return Ok(T::zero());
    }
    let (center, scale, lo, hi) = match p {
        FirstOrderDist::Categorical(_) => return Err(Error::arg("region integrals need a real-valued distribution")),
        FirstOrderDist::Mixture(m) => {
            let mut acc = T::zero();
            for (w, c) in m.weights.iter().zip(&m.components) {
                if *w > T::zero() {
                    acc = acc + *w * expect_region(c, f, lo, hi, nodes)?;
                }
            }
            return Ok(acc);
        }
        FirstOrderDist::StudentT(t) => {
            let (a, b) = (((lo - t.loc) / t.scale).atan(), ((hi - t.loc) / t.scale).atan());
            return expect_tan(t, f, nodes, a, b);
        }
        FirstOrderDist::Gaussian(g) => (g.mu, g.sigma, lo, hi),
        FirstOrderDist::Truncated(t) => {
            let (a, b) = t.window();
            (t.mu, t.sigma, lo.max(a), hi.min(b))
        }
    };
    if !(lo < hi) {
        return Ok(T::zero());
    }
    let (ta, tb) = (((lo - center) / scale).atan(), ((hi - center) / scale).atan());
    let mut terms = Vec::with_capacity(2 * nodes);
    for (theta, w) in legendre_on(2 * nodes, ta, tb) {
        let tan = theta.tan();
        let y = center + scale * tan;
        let dens = p.pdf(y)? * scale * (T::one() + tan * tan);
        if dens == T::zero() {
            continue;
        }
        terms.push(w * dens * finite_at(f, y)?);
    }
    Ok(kahan_sum(terms))
}

/// First-order losses `L1(p_hat, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FirstOrderLoss {
    /// Σ_k (p_k − 1{k=y})²
    Brier,
    /// −log p_y, saturating to `+inf`
    CrossEntropy,
    /// 1 − p_y
    Linear,
    /// (E[p] − y)², regression
    SquaredError,
}

impl FirstOrderLoss {
    pub const ALL: [FirstOrderLoss; 4] =
        [FirstOrderLoss::Brier, FirstOrderLoss::CrossEntropy, FirstOrderLoss::Linear, FirstOrderLoss::SquaredError];

    pub fn name(self) -> &'static str {
        match self {
            FirstOrderLoss::Brier => "brier",
            FirstOrderLoss::CrossEntropy => "ce",
            FirstOrderLoss::Linear => "linear",
            FirstOrderLoss::SquaredError => "sq-mean",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        FirstOrderLoss::ALL.into_iter().find(|l| l.name() == name)
    }

    pub fn is_classification(self) -> bool {
        !matches!(self, FirstOrderLoss::SquaredError)
    }

    pub fn eval<T: Real>(self, p_hat: &FirstOrderDist<T>, y: Outcome<T>) -> Result<T> {
        match (self, y) {
            (FirstOrderLoss::SquaredError, Outcome::Value(y)) => {
                let d = p_hat.mean()? - y;
                Ok(d * d)
            }
            (FirstOrderLoss::SquaredError, Outcome::Class(_)) => Err(Error::arg("squared error needs a real outcome")),
            (_, Outcome::Class(k)) => {
                let c = p_hat.to_categorical()?;
                match self {
                    FirstOrderLoss::Brier => brier_loss(&c, k),
                    FirstOrderLoss::CrossEntropy => ce_loss(&c, k),
                    _ => Ok(T::one() - c.prob(k)?),
                }
            }
            (_, Outcome::Value(_)) => Err(Error::arg(format!("{} loss needs a class outcome", self.name()))),
        }
    }
}

/// Σ_k (p_k − 1{k=y})².
pub fn brier_loss<T: Real>(p: &Categorical<T>, y: usize) -> Result<T> {
    p.prob(y)?;
    Ok(kahan_sum(p.probs().iter().enumerate().map(|(k, pk)| {
        let d = if k == y { *pk - T::one() } else { *pk };
        d * d
    })))
}

/// −log p_y; `+inf` when `p_y = 0`.
pub fn ce_loss<T: Real>(p: &Categorical<T>, y: usize) -> Result<T> {
    let py = p.prob(y)?;
    if py == T::zero() {
        Ok(T::infinity())
    } else {
        Ok(-py.ln())
    }
}

/// Expected first-order score `S1(p_hat, p) = E_{Y~p}[L1(p_hat, Y)]`.
pub fn s1<T: Real>(loss: FirstOrderLoss, p_hat: &FirstOrderDist<T>, p: &FirstOrderDist<T>, nodes: usize) -> Result<ScoreValue<T>> {
    let value = expect_fn(p, &mut |y| loss.eval(p_hat, y), nodes)?;
    let method = match p.task() {
        Task::Classification { .. } => Method::Exact,
        Task::Regression => Method::Quadrature { nodes },
    };
    Ok(ScoreValue::deterministic(value, method))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::HERMITE_NODES;

    fn cat(p: &[f64]) -> Categorical<f64> {
        Categorical::new(p.to_vec()).unwrap()
    }

    #[test]
    fn brier_examples() {
        assert_eq!(brier_loss(&cat(&[1.0, 0.0]), 0).unwrap(), 0.0);
        assert_eq!(brier_loss(&cat(&[0.5, 0.5]), 0).unwrap(), 0.5);
        assert!((brier_loss(&cat(&[0.8, 0.2]), 1).unwrap() - 1.28).abs() < 1e-15);
        assert!(brier_loss(&cat(&[0.8, 0.2]), 2).is_err());
    }

    #[test]
    fn ce_examples() {
        assert_eq!(ce_loss(&cat(&[1.0, 0.0]), 0).unwrap(), 0.0);
        assert!((ce_loss(&cat(&[0.5, 0.5]), 0).unwrap() - 0.693_147_180_559_945_3).abs() < 1e-15);
        assert_eq!(ce_loss(&cat(&[0.0, 1.0]), 0).unwrap(), f64::INFINITY);
        assert!(ce_loss(&cat(&[0.5, 0.5]), 5).is_err());
    }

    #[test]
    fn categorical_validation() {
        assert!(Categorical::new(vec![1.0f64]).is_err());
        assert!(Categorical::new(vec![0.6f64, 0.6]).is_err());
        assert!(Categorical::new(vec![-0.1f64, 1.1]).is_err());
        assert!(Categorical::new(vec![0.3f64, 0.7]).is_ok());
    }

    #[test]
    fn means() {
        let g: FirstOrderDist<f64> = Gaussian::new(3.0, 1.0).unwrap().into();
        assert_eq!(g.mean().unwrap(), 3.0);
        let c: FirstOrderDist<f64> = cat(&[0.25, 0.75]).into();
        assert_eq!(c.mean_prob(1).unwrap(), 0.75);
        assert!(c.mean().is_err());
        let mix: FirstOrderDist<f64> = FiniteMixture::new(
            vec![0.5, 0.5],
            vec![Gaussian::new(-1.0, 1.0).unwrap().into(), Gaussian::new(1.0, 1.0).unwrap().into()],
        )
        .unwrap()
        .into();
        assert_eq!(mix.mean().unwrap(), 0.0);
        assert!(FirstOrderDist::from(StudentT::new(0.0, 1.0, 1.0).unwrap()).mean().is_err());
    }

    #[test]
    fn expect_fn_examples() {
        let c: FirstOrderDist<f64> = cat(&[0.5, 0.5]).into();
        let phat = cat(&[0.8, 0.2]);
        let v = expect_fn(&c, &mut |y| match y {
            Outcome::Class(k) => brier_loss(&phat, k),
            _ => unreachable!(),
        }, HERMITE_NODES)
        .unwrap();
        assert!((v - 0.68).abs() < 1e-15);

        let g: FirstOrderDist<f64> = Gaussian::new(0.0, 1.0).unwrap().into();
        let m1 = expect_fn(&g, &mut |y| Ok(y.as_real()), 64).unwrap();
        assert!(m1.abs() < 1e-14);
        let m2 = expect_fn(&g, &mut |y| Ok(y.as_real().powi(2)), 64).unwrap();
        assert!((m2 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn expect_fn_reports_offending_node() {
        let g: FirstOrderDist<f64> = Gaussian::new(0.0, 1.0).unwrap().into();
        let err = expect_fn(&g, &mut |y| Ok(if y.as_real() > 2.0 { f64::INFINITY } else { 0.0 }), 16).unwrap_err();
        assert!(matches!(err, Error::Evaluation { .. }));
        assert!(expect_fn(&g, &mut |_| Ok(0.0), 4).is_err());
    }

    #[test]
    fn ce_saturates_in_expectation() {
        let phat: FirstOrderDist<f64> = cat(&[0.0, 1.0]).into();
        let p: FirstOrderDist<f64> = cat(&[0.5, 0.5]).into();
        let s = s1(FirstOrderLoss::CrossEntropy, &phat, &p, 64).unwrap();
        assert_eq!(s.value, f64::INFINITY);
        // zero-mass classes do not contribute
        let p0: FirstOrderDist<f64> = cat(&[0.0, 1.0]).into();
        assert_eq!(s1(FirstOrderLoss::CrossEntropy, &phat, &p0, 64).unwrap().value, 0.0);
    }

    #[test]
    fn s1_examples() {
        let u: FirstOrderDist<f64> = cat(&[0.5, 0.5]).into();
        let q: FirstOrderDist<f64> = cat(&[0.8, 0.2]).into();
        let s = s1(FirstOrderLoss::Brier, &u, &u, 64).unwrap();
        assert_eq!(s.value, 0.5);
        assert_eq!(s.method, Method::Exact);
        assert!((s1(FirstOrderLoss::Brier, &q, &u, 64).unwrap().value - 0.68).abs() < 1e-15);
        let h = s1(FirstOrderLoss::CrossEntropy, &u, &u, 64).unwrap().value;
        assert!((h - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn truncated_density_integrates_to_one() {
        for (mu, sigma, lo, hi) in [(-1.0, 0.3, f64::NEG_INFINITY, 0.0), (1.0, 0.3, 0.0, f64::INFINITY), (0.0, 1.0, -0.5, 2.0), (0.0, 1.0, 4.0, f64::INFINITY)] {
            let t = TruncatedGaussian::new(mu, sigma, lo, hi).unwrap();
            let d: FirstOrderDist<f64> = t.clone().into();
            let total = expect_fn(&d, &mut |_| Ok(1.0), 64).unwrap();
            assert!((total - 1.0).abs() < 1e-10, "{mu} {sigma} {lo} {hi}: {total}");
            let m = expect_fn(&d, &mut |y| Ok(y.as_real()), 64).unwrap();
            assert!((m - d.mean().unwrap()).abs() < 1e-10);
        }
        assert!(TruncatedGaussian::new(0.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn student_t_moments_by_quadrature() {
        let t: FirstOrderDist<f64> = StudentT::new(0.5, 2.0, 30.0).unwrap().into();
        let total = expect_fn(&t, &mut |_| Ok(1.0), 64).unwrap();
        assert!((total - 1.0).abs() < 1e-10);
        let var = expect_fn(&t, &mut |y| Ok((y.as_real() - 0.5).powi(2)), 64).unwrap();
        assert!((var - t.variance().unwrap()).abs() < 1e-8);
    }

    #[test]
    fn region_integrals_partition_the_line() {
        let g: FirstOrderDist<f64> = Gaussian::new(0.2, 0.7).unwrap().into();
        let f = &mut |y: Outcome<f64>| Ok(1.0 + y.as_real().powi(2));
        let whole = expect_fn(&g, f, 64).unwrap();
        let left = expect_region(&g, f, f64::NEG_INFINITY, 0.1, 64).unwrap();
        let mid = expect_region(&g, f, 0.1, 0.5, 64).unwrap();
        let right = expect_region(&g, f, 0.5, f64::INFINITY, 64).unwrap();
        assert!((left + mid + right - whole).abs() < 1e-10);
    }

    #[test]
    fn squared_error_loss() {
        let g: FirstOrderDist<f64> = Gaussian::new(1.0, 2.0).unwrap().into();
        assert_eq!(FirstOrderLoss::SquaredError.eval(&g, Outcome::Value(3.0)).unwrap(), 4.0);
        assert!(FirstOrderLoss::Brier.eval(&g, Outcome::Value(3.0)).is_err());
    }
}
