//! Second-order losses `L2(Q, y)`.

use crate::error::{Error, Result};
use crate::first_order::{FirstOrderLoss, Outcome, Task};
use crate::scalar::{kahan_sum, Real};
use crate::second_order::{kl_dirichlet, Dirichlet, Nig, SecondOrderDist};
use crate::special::ln_gamma;

/// Maximum number of stacked affine wrappers.
pub const MAX_AFFINE_DEPTH: usize = 4;

/// Which second-order arguments a loss can be evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossDomain {
    /// Any classification second-order distribution, or only Dirichlets.
    Classification { dirichlet_only: bool },
    /// Any regression second-order distribution, or only NIGs.
    Regression { nig_only: bool },
}

impl LossDomain {
    pub fn is_classification(self) -> bool {
        matches!(self, LossDomain::Classification { .. })
    }

    /// Whether the loss accepts `q` as its prediction argument.
    pub fn accepts<T: Real>(self, q: &SecondOrderDist<T>) -> bool {
        match (self, q.task()) {
            (LossDomain::Classification { dirichlet_only }, Task::Classification { .. }) => {
                !dirichlet_only || q.as_dirichlet().is_some()
            }
            (LossDomain::Regression { nig_only }, Task::Regression) => !nig_only || q.as_nig().is_some(),
            _ => false,
        }
    }
}

/// A second-order loss function.
pub trait SecondOrderLoss<T: Real>: Send + Sync {
    fn eval(&self, q: &SecondOrderDist<T>, y: Outcome<T>) -> Result<T>;
    fn domain(&self) -> LossDomain;
    /// Human-readable label; for zoo losses this is the text descriptor.
    fn label(&self) -> String;
}

/// Quadratic `g(y) = c0 + c1 y + c2 y²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadratic<T> {
    pub coeffs: [T; 3],
}

impl<T: Real> Quadratic<T> {
    pub fn new(c0: T, c1: T, c2: T) -> Self {
        Quadratic { coeffs: [c0, c1, c2] }
    }

    pub fn zero() -> Self {
        Quadratic::new(T::zero(), T::zero(), T::zero())
    }

    pub fn eval(&self, y: T) -> T {
        let [c0, c1, c2] = self.coeffs;
        c0 + y * (c1 + y * c2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BayesKind {
    CrossEntropy,
    Brier,
}

/// The loss zoo.
#[derive(Debug, Clone, PartialEq)]
pub enum LossSpec<T> {
    /// E_{p~Q}[−log p_y] + λ KL(Q || Dir(1,…,1))
    BayesCe { lambda: T },
    /// E_{p~Q}[brier(p, y)] + λ KL(Q || Dir(1,…,1))
    BayesBrier { lambda: T },
    /// Deep evidential regression loss on NIG parameters.
    Der { lambda: T },
    /// L1(marginal(Q), y)
    MeanComposed(FirstOrderLoss),
    /// c · inner(Q, y) + g(y)
    Affine { c: T, g: Quadratic<T>, inner: Box<LossSpec<T>> },
}

impl<T: Real> LossSpec<T> {
    pub fn affine(inner: LossSpec<T>, c: T, g: Quadratic<T>) -> Result<Self> {
        if !(c > T::zero()) || !c.is_finite() {
            return Err(Error::arg(format!("affine scale must be positive, got {c}")));
        }
        if g.coeffs.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("affine offset coefficients must be finite"));
        }
        if inner.affine_depth() >= MAX_AFFINE_DEPTH {
            return Err(Error::arg(format!("affine wrappers nested deeper than {MAX_AFFINE_DEPTH}")));
        }
        Ok(LossSpec::Affine { c, g, inner: Box::new(inner) })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LossSpec::BayesCe { lambda } | LossSpec::BayesBrier { lambda } | LossSpec::Der { lambda } => {
                if *lambda >= T::zero() && lambda.is_finite() {
                    Ok(())
                } else {
                    Err(Error::arg(format!("regularisation weight must be >= 0, got {lambda}")))
                }
            }
            LossSpec::MeanComposed(_) => Ok(()),
            LossSpec::Affine { c, g, inner } => {
                inner.validate()?;
                LossSpec::affine((**inner).clone(), *c, *g).map(|_| ())
            }
        }
    }

    fn affine_depth(&self) -> usize {
        match self {
            LossSpec::Affine { inner, .. } => 1 + inner.affine_depth(),
            _ => 0,
        }
    }
}

/// `E_{p~Q}[L1(p, y)]` for the Bayesian losses; closed form on Dirichlets,
/// linear over Dirac and convex mixtures.
pub fn expected_first_order_loss<T: Real>(q: &SecondOrderDist<T>, kind: BayesKind, y: usize) -> Result<T> {
    match q {
        SecondOrderDist::Dirichlet(d) => {
            if y >= d.classes() {
                return Err(Error::arg(format!("class {y} out of range for {} classes", d.classes())));
            }
            Ok(match kind {
                BayesKind::CrossEntropy => -d.mean_log(y),
                BayesKind::Brier => dirichlet_expected_brier(d, y),
            })
        }
        SecondOrderDist::Nig(_) => Err(Error::arg("bayesian losses need a classification second-order distribution")),
        SecondOrderDist::Dirac(dm) => {
            let loss = match kind {
                BayesKind::CrossEntropy => FirstOrderLoss::CrossEntropy,
                BayesKind::Brier => FirstOrderLoss::Brier,
            };
            let mut terms = Vec::with_capacity(dm.weights().len());
            for (w, atom) in dm.weights().iter().zip(dm.atoms()) {
                if *w == T::zero() {
                    continue;
                }
                let v = loss.eval(atom, Outcome::Class(y))?;
                if v == T::infinity() {
                    return Ok(v);
                }
                terms.push(*w * v);
            }
            Ok(kahan_sum(terms))
        }
        SecondOrderDist::ConvexMix { lambda, first, second } => {
            let mut acc = T::zero();
            for (w, part) in [(T::one() - *lambda, first), (*lambda, second)] {
                if w == T::zero() {
                    continue;
                }
                let v = expected_first_order_loss(part, kind, y)?;
                if v == T::infinity() {
                    return Ok(v);
                }
                acc = acc + w * v;
            }
            Ok(acc)
        }
    }
}

/// Σ_k Var(p_k) + (E p_k − 1{k=y})² under a Dirichlet.
fn dirichlet_expected_brier<T: Real>(d: &Dirichlet<T>, y: usize) -> T {
    let mean = d.mean();
    let var = d.variance();
    kahan_sum(mean.iter().zip(&var).enumerate().map(|(k, (m, v))| {
        let e = if k == y { *m - T::one() } else { *m };
        *v + e * e
    }))
}

/// The Bayesian second-order loss on a Dirichlet prediction.
pub fn bayes_loss<T: Real>(q: &Dirichlet<T>, y: usize, lambda: T, kind: BayesKind) -> Result<T> {
    let expected = expected_first_order_loss(&SecondOrderDist::Dirichlet(q.clone()), kind, y)?;
    if lambda == T::zero() {
        return Ok(expected);
    }
    let uniform = vec![T::one(); q.classes()];
    Ok(expected + lambda * kl_dirichlet(q.alpha(), &uniform)?)
}

/// Student-t negative log-likelihood of the NIG predictive.
///
/// Algebraically `½ log(π/m2) − m3 log(m24) + (m3 + ½) log((y−m1)² m2 + m24)
/// + log(Γ(m3)/Γ(m3 + ½))` with `m24 = 2 m4 (1 + m2)`; the two large
/// logarithms are combined through `log1p` to avoid cancellation when `m3` is large.
pub fn student_nll<T: Real>(m: &Nig<T>, y: T) -> T {
    let half = T::half();
    let m24 = T::two() * m.m4 * (T::one() + m.m2);
    let d = y - m.m1;
    half * (T::PI() / m.m2).ln() + half * m24.ln() + (m.m3 + half) * (d * d * m.m2 / m24).ln_1p() + ln_gamma(m.m3)
        - ln_gamma(m.m3 + half)
}

/// |m1 − y| · (m3 + 2 m2).
pub fn der_penalty<T: Real>(m: &Nig<T>, y: T) -> T {
    (m.m1 - y).abs() * (m.m3 + T::two() * m.m2)
}

pub fn der_loss<T: Real>(m: &Nig<T>, y: T, lambda: T) -> T {
    let pen = der_penalty(m, y);
    // λ·0 stays 0 even when the penalty is huge
    if lambda == T::zero() || pen == T::zero() {
        student_nll(m, y)
    } else {
        student_nll(m, y) + lambda * pen
    }
}

pub fn mean_composed_loss<T: Real>(kind: FirstOrderLoss, q: &SecondOrderDist<T>, y: Outcome<T>) -> Result<T> {
    match (kind.is_classification(), q.task()) {
        (true, Task::Classification { .. }) | (false, Task::Regression) => kind.eval(&q.marginal(), y),
        _ => Err(Error::arg(format!("{} loss does not match the outcome space of the prediction", kind.name()))),
    }
}

fn class_of<T: Real>(y: Outcome<T>) -> Result<usize> {
    match y {
        Outcome::Class(k) => Ok(k),
        Outcome::Value(_) => Err(Error::arg("classification loss received a real outcome")),
    }
}

impl<T: Real> SecondOrderLoss<T> for LossSpec<T> {
    fn eval(&self, q: &SecondOrderDist<T>, y: Outcome<T>) -> Result<T> {
        match self {
            LossSpec::BayesCe { lambda } | LossSpec::BayesBrier { lambda } => {
                let kind = if matches!(self, LossSpec::BayesCe { .. }) { BayesKind::CrossEntropy } else { BayesKind::Brier };
                let k = class_of(y)?;
                match q {
                    SecondOrderDist::Dirichlet(d) => bayes_loss(d, k, *lambda, kind),
                    // the expected-loss term is linear in Q; the KL term needs a Dirichlet
                    _ if *lambda == T::zero() => expected_first_order_loss(q, kind, k),
                    _ => Err(Error::arg("bayesian loss with lambda > 0 is defined on Dirichlet predictions only")),
                }
            }
            LossSpec::Der { lambda } => {
                let m = q.as_nig().ok_or_else(|| Error::arg("DER loss is defined on NIG predictions only"))?;
                match y {
                    Outcome::Value(v) => Ok(der_loss(m, v, *lambda)),
                    Outcome::Class(_) => Err(Error::arg("DER loss needs a real outcome")),
                }
            }
            LossSpec::MeanComposed(kind) => mean_composed_loss(*kind, q, y),
            LossSpec::Affine { c, g, inner } => Ok(*c * inner.eval(q, y)? + g.eval(y.as_real())),
        }
    }

    fn domain(&self) -> LossDomain {
        match self {
            LossSpec::BayesCe { lambda } | LossSpec::BayesBrier { lambda } => {
                LossDomain::Classification { dirichlet_only: *lambda != T::zero() }
            }
            LossSpec::Der { .. } => LossDomain::Regression { nig_only: true },
            LossSpec::MeanComposed(kind) => {
                if kind.is_classification() {
                    LossDomain::Classification { dirichlet_only: false }
                } else {
                    LossDomain::Regression { nig_only: false }
                }
            }
            LossSpec::Affine { inner, .. } => inner.domain(),
        }
    }

    fn label(&self) -> String {
        self.to_string()
    }
}

/// Every loss kind of the zoo at representative parameters.
pub fn standard_zoo<T: Real>() -> Vec<LossSpec<T>> {
    let mut zoo = vec![
        LossSpec::BayesCe { lambda: T::zero() },
        LossSpec::BayesCe { lambda: T::one() },
        LossSpec::BayesBrier { lambda: T::zero() },
        LossSpec::BayesBrier { lambda: T::one() },
        LossSpec::Der { lambda: T::zero() },
        LossSpec::Der { lambda: T::one() },
        LossSpec::MeanComposed(FirstOrderLoss::Brier),
        LossSpec::MeanComposed(FirstOrderLoss::CrossEntropy),
        LossSpec::MeanComposed(FirstOrderLoss::Linear),
        LossSpec::MeanComposed(FirstOrderLoss::SquaredError),
    ];
    let square = Quadratic::new(T::zero(), T::zero(), T::one());
    zoo.push(LossSpec::affine(LossSpec::BayesCe { lambda: T::zero() }, T::c(3.7), square).expect("valid wrap"));
    zoo.push(LossSpec::affine(LossSpec::Der { lambda: T::one() }, T::c(3.7), square).expect("valid wrap"));
    zoo
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::first_order::Categorical;
    use crate::second_order::DiracMix;

    fn dir(a: &[f64]) -> Dirichlet<f64> {
        Dirichlet::new(a.to_vec()).unwrap()
    }

    #[test]
    fn bayes_ce_examples() {
        let v = bayes_loss(&dir(&[2.0, 2.0]), 0, 0.0, BayesKind::CrossEntropy).unwrap();
        assert!((v - 5.0 / 6.0).abs() < 1e-14);
        let v = bayes_loss(&dir(&[1.0, 1.0]), 0, 0.0, BayesKind::CrossEntropy).unwrap();
        assert!((v - 1.0).abs() < 1e-14);
        // λ·KL(Dir(1,1) || Dir(1,1)) = 0
        let v = bayes_loss(&dir(&[1.0, 1.0]), 0, 5.0, BayesKind::CrossEntropy).unwrap();
        assert!((v - 1.0).abs() < 1e-14);
    }

    #[test]
    fn bayes_brier_example() {
        let v = bayes_loss(&dir(&[1.0, 1.0]), 0, 0.0, BayesKind::Brier).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn bayes_rejects_mixtures_when_regularised() {
        let q: SecondOrderDist<f64> = SecondOrderDist::dirac(Categorical::new(vec![0.5, 0.5]).unwrap());
        assert!(LossSpec::BayesCe { lambda: 1.0 }.eval(&q, Outcome::Class(0)).is_err());
        let v = LossSpec::BayesCe { lambda: 0.0 }.eval(&q, Outcome::Class(0)).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-15);
        let nig: SecondOrderDist<f64> = Nig::new(0.0, 1.0, 2.0, 1.0).unwrap().into();
        assert!(LossSpec::BayesCe { lambda: 0.0 }.eval(&nig, Outcome::Class(0)).is_err());
    }

    #[test]
    fn der_anchor() {
        let m = Nig::new(0.0, 1.0, 1.0, 1.0).unwrap();
        for lambda in [0.0, 0.1, 1.0, 7.0] {
            assert!((der_loss(&m, 0.0, lambda) - 2.0 * 2f64.ln()).abs() < 1e-12);
        }
        assert_eq!(der_penalty(&m, 1.0), 3.0);
    }

    #[test]
    fn der_stable_form_matches_printed_form() {
        let printed = |m: &Nig<f64>, y: f64| {
            let m24 = 2.0 * m.m4 * (1.0 + m.m2);
            0.5 * (std::f64::consts::PI / m.m2).ln() - m.m3 * m24.ln()
                + (m.m3 + 0.5) * ((y - m.m1).powi(2) * m.m2 + m24).ln()
                + ln_gamma(m.m3)
                - ln_gamma(m.m3 + 0.5)
        };
        for (m, y) in [
            (Nig::new(0.3, 2.0, 3.0, 0.5).unwrap(), 1.7),
            (Nig::new(-1.0, 0.1, 1.5, 4.0).unwrap(), -3.0),
            (Nig::new(0.0, 10.0, 20.0, 2.0).unwrap(), 0.25),
        ] {
            assert!((student_nll(&m, y) - printed(&m, y)).abs() < 1e-12);
        }
    }

    #[test]
    fn der_grows_in_the_tails() {
        let m = Nig::new(0.0, 1.0, 2.0, 1.0).unwrap();
        let mut prev = der_loss(&m, 5.0, 1.0);
        for i in 1..50 {
            let y = 5.0 + i as f64;
            let cur = der_loss(&m, y, 1.0);
            assert!(cur > prev);
            assert!(der_loss(&m, -y, 1.0) > der_loss(&m, -y + 1.0, 1.0));
            prev = cur;
        }
    }

    #[test]
    fn mean_composed_examples() {
        let delta0: SecondOrderDist<f64> = SecondOrderDist::dirac(Categorical::vertex(2, 0).unwrap());
        assert_eq!(mean_composed_loss(FirstOrderLoss::Brier, &delta0, Outcome::Class(0)).unwrap(), 0.0);
        let q: SecondOrderDist<f64> = dir(&[1.0, 3.0]).into();
        assert!((mean_composed_loss(FirstOrderLoss::Brier, &q, Outcome::Class(1)).unwrap() - 0.125).abs() < 1e-15);
        assert_eq!(mean_composed_loss(FirstOrderLoss::CrossEntropy, &delta0, Outcome::Class(1)).unwrap(), f64::INFINITY);
        let nig: SecondOrderDist<f64> = Nig::new(2.0, 1.0, 2.0, 1.0).unwrap().into();
        assert_eq!(mean_composed_loss(FirstOrderLoss::SquaredError, &nig, Outcome::Value(0.0)).unwrap(), 4.0);
        assert!(mean_composed_loss(FirstOrderLoss::Brier, &nig, Outcome::Class(0)).is_err());
    }

    #[test]
    fn affine_wrap_examples() {
        let nig: SecondOrderDist<f64> = Nig::new(0.0, 1.0, 1.0, 1.0).unwrap().into();
        let inner = LossSpec::Der { lambda: 1.0 };
        let id = LossSpec::affine(inner.clone(), 1.0, Quadratic::zero()).unwrap();
        for y in [-1.0, 0.0, 0.3, 2.0] {
            assert_eq!(id.eval(&nig, Outcome::Value(y)).unwrap(), inner.eval(&nig, Outcome::Value(y)).unwrap());
        }
        let wrapped = LossSpec::affine(inner, 3.7, Quadratic::new(0.0, 0.0, 1.0)).unwrap();
        let v = wrapped.eval(&nig, Outcome::Value(0.0)).unwrap();
        assert!((v - 3.7 * 2.0 * 2f64.ln()).abs() < 1e-12);
        assert!((v - 5.129_290).abs() < 1e-6);
        assert!(LossSpec::affine(LossSpec::Der { lambda: 1.0 }, 0.0, Quadratic::zero()).is_err());
    }

    #[test]
    fn affine_depth_is_bounded() {
        let mut l = LossSpec::<f64>::MeanComposed(FirstOrderLoss::Brier);
        for _ in 0..MAX_AFFINE_DEPTH {
            l = LossSpec::affine(l, 2.0, Quadratic::zero()).unwrap();
        }
        assert!(LossSpec::affine(l, 2.0, Quadratic::zero()).is_err());
    }

    #[test]
    fn domains() {
        let d: SecondOrderDist<f64> = dir(&[1.0, 2.0]).into();
        let dm: SecondOrderDist<f64> = DiracMix::point(Categorical::vertex(2, 0).unwrap().into()).into();
        assert!(LossSpec::BayesCe { lambda: 1.0 }.domain().accepts(&d));
        assert!(!LossSpec::BayesCe { lambda: 1.0 }.domain().accepts(&dm));
        assert!(LossSpec::BayesCe { lambda: 0.0 }.domain().accepts(&dm));
        assert!(!LossSpec::<f64>::Der { lambda: 1.0 }.domain().accepts(&d));
    }
}
