//! Second-order distributions: distributions over first-order distributions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};

use crate::error::{Error, Result};
use crate::first_order::{pick_index, validate_weights, Categorical, FiniteMixture, FirstOrderDist, Gaussian, StudentT, Task};
use crate::scalar::{kahan_sum, Real};
use crate::special::{digamma, ln_gamma};

/// Maximum nesting depth of convex mixtures.
pub const MAX_MIX_DEPTH: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Dirichlet<T> {
    alpha: Vec<T>,
}

impl<T: Real> Dirichlet<T> {
    pub fn new(alpha: Vec<T>) -> Result<Self> {
        if alpha.len() < 2 {
            return Err(Error::arg(format!("dirichlet needs at least 2 concentrations, got {}", alpha.len())));
        }
        if alpha.iter().any(|a| !(*a > T::zero()) || !a.is_finite()) {
            return Err(Error::arg("dirichlet concentrations must be finite and positive"));
        }
        Ok(Dirichlet { alpha })
    }

    /// Dirichlet(1, ..., 1): the uniform density on the simplex.
    pub fn uniform(classes: usize) -> Result<Self> {
        Dirichlet::new(vec![T::one(); classes])
    }

    pub fn alpha(&self) -> &[T] {
        &self.alpha
    }

    pub fn classes(&self) -> usize {
        self.alpha.len()
    }

    pub fn total(&self) -> T {
        kahan_sum(self.alpha.iter().copied())
    }

    /// E[p_k] = α_k / α0.
    pub fn mean(&self) -> Vec<T> {
        let a0 = self.total();
        self.alpha.iter().map(|a| *a / a0).collect()
    }

    /// Var[p_k] = α_k (α0 − α_k) / (α0² (α0 + 1)).
    pub fn variance(&self) -> Vec<T> {
        let a0 = self.total();
        self.alpha.iter().map(|a| *a * (a0 - *a) / (a0 * a0 * (a0 + T::one()))).collect()
    }

    /// E[ln p_k] = ψ(α_k) − ψ(α0).
    pub fn mean_log(&self, k: usize) -> T {
        digamma(self.alpha[k]) - digamma(self.total())
    }

    pub fn ln_pdf(&self, p: &[T]) -> T {
        let norm = ln_gamma(self.total()) - kahan_sum(self.alpha.iter().map(|a| ln_gamma(*a)));
        norm + kahan_sum(self.alpha.iter().zip(p).map(|(a, x)| (*a - T::one()) * x.ln()))
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Categorical<T> {
        loop {
            let draws: Vec<f64> = self
                .alpha
                .iter()
                .map(|a| Gamma::new(a.f64(), 1.0).expect("validated concentration").sample(rng))
                .collect();
            let total: f64 = draws.iter().sum();
            if total > 0.0 {
                let probs = draws.iter().map(|d| T::c(d / total)).collect::<Vec<_>>();
                if let Ok(c) = Categorical::new(probs) {
                    return c;
                }
            }
        }
    }
}

/// Normal-inverse-gamma distribution over Gaussian parameters `(μ, σ²)`:
/// `σ² ~ InvGamma(m3, m4)`, `μ | σ² ~ N(m1, σ²/m2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nig<T> {
    pub m1: T,
    pub m2: T,
    pub m3: T,
    pub m4: T,
}

impl<T: Real> Nig<T> {
    /// Accepts `m2 > 0`, `m3 >= 1`, `m4 > 0`. The boundary `m3 = 1` is admitted
    /// because the flat evidential prediction of the DER counterexample lives there.
    pub fn new(m1: T, m2: T, m3: T, m4: T) -> Result<Self> {
        let ok = m1.is_finite() && m2 > T::zero() && m2.is_finite() && m3 >= T::one() && m3.is_finite() && m4 > T::zero() && m4.is_finite();
        if !ok {
            return Err(Error::arg(format!("nig needs m2 > 0, m3 >= 1, m4 > 0; got ({m1}, {m2}, {m3}, {m4})")));
        }
        Ok(Nig { m1, m2, m3, m4 })
    }

    /// Posterior predictive: Student-t with location m1, 2·m3 degrees of freedom and
    /// scale sqrt(m4 (1 + m2) / (m2 m3)).
    pub fn predictive(&self) -> StudentT<T> {
        let scale = (self.m4 * (T::one() + self.m2) / (self.m2 * self.m3)).sqrt();
        StudentT { loc: self.m1, scale, dof: T::two() * self.m3 }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Gaussian<T> {
        loop {
            let precision = Gamma::new(self.m3.f64(), 1.0 / self.m4.f64()).expect("validated nig").sample(rng);
            let var = 1.0 / precision;
            if !var.is_finite() || var <= 0.0 {
                continue;
            }
            let mu = Normal::new(self.m1.f64(), (var / self.m2.f64()).sqrt()).expect("validated nig").sample(rng);
            if let Ok(g) = Gaussian::new(T::c(mu), T::c(var.sqrt())) {
                return g;
            }
        }
    }
}

/// Finite mixture of point masses on first-order distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct DiracMix<T> {
    weights: Vec<T>,
    atoms: Vec<FirstOrderDist<T>>,
}

impl<T: Real> DiracMix<T> {
    pub fn new(weights: Vec<T>, atoms: Vec<FirstOrderDist<T>>) -> Result<Self> {
        validate_weights(&weights)?;
        if weights.len() != atoms.len() {
            return Err(Error::arg("dirac mixture weights and atoms differ in length"));
        }
        let task = atoms[0].task();
        if atoms.iter().any(|a| a.task() != task) {
            return Err(Error::arg("dirac mixture atoms must share one outcome space"));
        }
        Ok(DiracMix { weights, atoms })
    }

    /// The point mass δ_p.
    pub fn point(p: FirstOrderDist<T>) -> Self {
        DiracMix { weights: vec![T::one()], atoms: vec![p] }
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn atoms(&self) -> &[FirstOrderDist<T>] {
        &self.atoms
    }
}

/// A distribution over first-order distributions.
#[derive(Debug, Clone, PartialEq)]
pub enum SecondOrderDist<T> {
    Dirichlet(Dirichlet<T>),
    Nig(Nig<T>),
    Dirac(DiracMix<T>),
    /// `(1 − lambda) · first + lambda · second`, kept symbolic.
    ConvexMix { lambda: T, first: Box<SecondOrderDist<T>>, second: Box<SecondOrderDist<T>> },
}

impl<T: Real> From<Dirichlet<T>> for SecondOrderDist<T> {
    fn from(d: Dirichlet<T>) -> Self {
        SecondOrderDist::Dirichlet(d)
    }
}

impl<T: Real> From<Nig<T>> for SecondOrderDist<T> {
    fn from(n: Nig<T>) -> Self {
        SecondOrderDist::Nig(n)
    }
}

impl<T: Real> From<DiracMix<T>> for SecondOrderDist<T> {
    fn from(d: DiracMix<T>) -> Self {
        SecondOrderDist::Dirac(d)
    }
}

/// `(1 − lambda) Q' + lambda Q`.
pub fn mix<T: Real>(q_prime: &SecondOrderDist<T>, q: &SecondOrderDist<T>, lambda: T) -> Result<SecondOrderDist<T>> {
    if !(lambda >= T::zero() && lambda <= T::one()) {
        return Err(Error::arg(format!("mixing weight {lambda} outside [0, 1]")));
    }
    if q_prime.task() != q.task() {
        return Err(Error::arg("cannot mix second-order distributions over different outcome spaces"));
    }
    let depth = q_prime.depth().max(q.depth()) + 1;
    if depth > MAX_MIX_DEPTH {
        return Err(Error::arg(format!("convex mixture nesting {depth} exceeds {MAX_MIX_DEPTH}")));
    }
    Ok(SecondOrderDist::ConvexMix { lambda, first: Box::new(q_prime.clone()), second: Box::new(q.clone()) })
}

/// Closed-form KL(Dir(alpha) || Dir(beta)).
pub fn kl_dirichlet<T: Real>(alpha: &[T], beta: &[T]) -> Result<T> {
    if alpha.len() != beta.len() {
        return Err(Error::arg(format!("dirichlet dimensions differ: {} vs {}", alpha.len(), beta.len())));
    }
    let a = Dirichlet::new(alpha.to_vec())?;
    let b = Dirichlet::new(beta.to_vec())?;
    if alpha == beta {
        return Ok(T::zero());
    }
    let a0 = a.total();
    let b0 = b.total();
    let psi0 = digamma(a0);
    let terms = alpha.iter().zip(beta).map(|(ak, bk)| ln_gamma(*bk) - ln_gamma(*ak) + (*ak - *bk) * (digamma(*ak) - psi0));
    let kl = ln_gamma(a0) - ln_gamma(b0) + kahan_sum(terms);
    Ok(kl.max(T::zero()))
}

impl<T: Real> SecondOrderDist<T> {
    pub fn dirac(p: impl Into<FirstOrderDist<T>>) -> Self {
        SecondOrderDist::Dirac(DiracMix::point(p.into()))
    }

    pub fn task(&self) -> Task {
        match self {
            SecondOrderDist::Dirichlet(d) => Task::Classification { classes: d.classes() },
            SecondOrderDist::Nig(_) => Task::Regression,
            SecondOrderDist::Dirac(d) => d.atoms[0].task(),
            SecondOrderDist::ConvexMix { first, .. } => first.task(),
        }
    }

    /// Nesting depth of convex mixtures.
    pub fn depth(&self) -> usize {
        match self {
            SecondOrderDist::ConvexMix { first, second, .. } => 1 + first.depth().max(second.depth()),
            _ => 0,
        }
    }

    pub fn as_dirichlet(&self) -> Option<&Dirichlet<T>> {
        match self {
            SecondOrderDist::Dirichlet(d) => Some(d),
            _ => None,
        }
    }

    pub fn as_nig(&self) -> Option<&Nig<T>> {
        match self {
            SecondOrderDist::Nig(n) => Some(n),
            _ => None,
        }
    }

    /// The mean measure `p̄(A) = E_{p~Q}[p(A)]`.
    pub fn marginal(&self) -> FirstOrderDist<T> {
        match self {
            SecondOrderDist::Dirichlet(d) => FirstOrderDist::Categorical(Categorical::new(d.mean()).unwrap_or_else(|_| {
                // renormalise rounding drift on very unequal concentrations
                let m = d.mean();
                let s = kahan_sum(m.iter().copied());
                Categorical::new(m.into_iter().map(|x| x / s).collect()).expect("normalised dirichlet mean")
            })),
            SecondOrderDist::Nig(n) => FirstOrderDist::StudentT(n.predictive()),
            SecondOrderDist::Dirac(d) => {
                if d.atoms.len() == 1 {
                    return d.atoms[0].clone();
                }
                let mix = FirstOrderDist::Mixture(
                    FiniteMixture::new(d.weights.clone(), d.atoms.clone()).expect("dirac mixture already validated"),
                );
                collapse_classification(mix)
            }
            SecondOrderDist::ConvexMix { lambda, first, second } => {
                let mix = FirstOrderDist::Mixture(
                    FiniteMixture::new(vec![T::one() - *lambda, *lambda], vec![first.marginal(), second.marginal()])
                        .expect("convex weights form a probability vector"),
                );
                collapse_classification(mix)
            }
        }
    }

    /// `E_{p~Q}[p(y)]`.
    pub fn mean_prob(&self, y: usize) -> Result<T> {
        match self.task() {
            Task::Classification { classes } if y < classes => self.marginal().mean_prob(y),
            Task::Classification { classes } => Err(Error::arg(format!("class {y} out of range for {classes} classes"))),
            Task::Regression => Err(Error::arg("class probability requested from a regression second-order distribution")),
        }
    }

    /// Draw `p ~ Q` from an explicit 64-bit seed.
    pub fn sample_first_order(&self, seed: u64) -> FirstOrderDist<T> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(&mut rng)
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R) -> FirstOrderDist<T> {
        match self {
            SecondOrderDist::Dirichlet(d) => FirstOrderDist::Categorical(d.sample(rng)),
            SecondOrderDist::Nig(n) => FirstOrderDist::Gaussian(n.sample(rng)),
            SecondOrderDist::Dirac(d) => d.atoms[pick_index(&d.weights, rng)].clone(),
            SecondOrderDist::ConvexMix { lambda, first, second } => {
                let u: f64 = rng.random();
                if u < lambda.f64() {
                    second.sample_with(rng)
                } else {
                    first.sample_with(rng)
                }
            }
        }
    }
}

fn collapse_classification<T: Real>(mix: FirstOrderDist<T>) -> FirstOrderDist<T> {
    match mix.task() {
        Task::Classification { .. } => match mix.to_categorical() {
            Ok(c) => FirstOrderDist::Categorical(c),
            Err(_) => mix,
        },
        Task::Regression => mix,
    }
}
