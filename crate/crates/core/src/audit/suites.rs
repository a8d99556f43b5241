//! Random predictions and equal-marginal target pairs used by the probes.

use rand::Rng;

use crate::error::Result;
use crate::first_order::{Categorical, FiniteMixture, FirstOrderDist, Gaussian};
use crate::losses::LossDomain;
use crate::scalar::Real;
use crate::second_order::{mix, DiracMix, Dirichlet, Nig, SecondOrderDist};

fn uniform<T: Real, R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> T {
    T::c(rng.random_range(lo..hi))
}

fn random_dirichlet<T: Real, R: Rng + ?Sized>(rng: &mut R, classes: usize) -> Result<Dirichlet<T>> {
    Dirichlet::new((0..classes).map(|_| uniform(rng, 0.5, 5.0)).collect())
}

/// An interior categorical with every probability at least `0.05 / classes`.
fn random_categorical<T: Real, R: Rng + ?Sized>(rng: &mut R, classes: usize) -> Result<Categorical<T>> {
    let raw: Vec<f64> = (0..classes).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut probs: Vec<T> = raw.iter().map(|r| T::c(r / total)).collect();
    // put the rounding remainder on the last class so the vector sums to one
    let head = probs[..classes - 1].iter().fold(T::zero(), |a, p| a + *p);
    probs[classes - 1] = T::one() - head;
    Categorical::new(probs)
}

fn random_nig<T: Real, R: Rng + ?Sized>(rng: &mut R) -> Result<Nig<T>> {
    Nig::new(uniform(rng, -1.0, 1.0), uniform(rng, 0.5, 4.0), uniform(rng, 1.5, 5.0), uniform(rng, 0.5, 2.0))
}

fn random_gaussian<T: Real, R: Rng + ?Sized>(rng: &mut R) -> Result<Gaussian<T>> {
    Gaussian::new(uniform(rng, -1.0, 1.0), uniform(rng, 0.5, 2.0))
}

/// A random prediction the loss with `domain` can evaluate. Classification
/// predictions have `classes` classes.
pub fn random_prediction<T: Real, R: Rng + ?Sized>(domain: LossDomain, classes: usize, rng: &mut R) -> Result<SecondOrderDist<T>> {
    match domain {
        LossDomain::Classification { dirichlet_only: true } => Ok(random_dirichlet(rng, classes)?.into()),
        LossDomain::Classification { dirichlet_only: false } => match rng.random_range(0..3) {
            0 => Ok(random_dirichlet(rng, classes)?.into()),
            1 => {
                let w: T = uniform(rng, 0.1, 0.9);
                let atoms = vec![random_categorical(rng, classes)?.into(), random_categorical(rng, classes)?.into()];
                Ok(DiracMix::new(vec![T::one() - w, w], atoms)?.into())
            }
            _ => {
                let d: SecondOrderDist<T> = random_dirichlet(rng, classes)?.into();
                let p = SecondOrderDist::dirac(random_categorical(rng, classes)?);
                mix(&d, &p, uniform(rng, 0.1, 0.9))
            }
        },
        LossDomain::Regression { nig_only: true } => Ok(random_nig(rng)?.into()),
        LossDomain::Regression { nig_only: false } => match rng.random_range(0..3) {
            0 => Ok(random_nig(rng)?.into()),
            1 => Ok(SecondOrderDist::dirac(random_gaussian(rng)?)),
            _ => {
                let w: T = uniform(rng, 0.1, 0.9);
                let atoms = vec![random_gaussian(rng)?.into(), random_gaussian(rng)?.into()];
                Ok(DiracMix::new(vec![T::one() - w, w], atoms)?.into())
            }
        },
    }
}

/// `n` structurally distinct target pairs `(Q_a, Q_b)` with identical marginals,
/// cycling through five constructions for the task of `domain`.
pub fn equal_marginal_pairs<T: Real, R: Rng + ?Sized>(
    domain: LossDomain,
    classes: usize,
    n: usize,
    rng: &mut R,
) -> Result<Vec<(SecondOrderDist<T>, SecondOrderDist<T>)>> {
    (0..n)
        .map(|i| if domain.is_classification() { classification_pair(i % 5, classes, rng) } else { regression_pair(i % 5, rng) })
        .collect()
}

fn classification_pair<T: Real, R: Rng + ?Sized>(
    kind: usize,
    classes: usize,
    rng: &mut R,
) -> Result<(SecondOrderDist<T>, SecondOrderDist<T>)> {
    let a = random_dirichlet::<T, R>(rng, classes)?;
    Ok(match kind {
        // same mean, different concentration
        0 => {
            let c: T = uniform(rng, 0.3, 5.0);
            let b = Dirichlet::new(a.alpha().iter().map(|x| *x * c).collect())?;
            (a.into(), b.into())
        }
        // a Dirichlet against the point mass at its mean
        1 => {
            let p = Categorical::new(a.mean())?;
            (a.into(), SecondOrderDist::dirac(p))
        }
        // a two-atom mixture against the point mass at its average
        2 => {
            let w: T = uniform(rng, 0.1, 0.9);
            let (p1, p2) = (random_categorical::<T, R>(rng, classes)?, random_categorical::<T, R>(rng, classes)?);
            let avg = FiniteMixture::new(vec![T::one() - w, w], vec![p1.clone().into(), p2.clone().into()])?;
            let avg = FirstOrderDist::Mixture(avg).to_categorical()?;
            (DiracMix::new(vec![T::one() - w, w], vec![p1.into(), p2.into()])?.into(), SecondOrderDist::dirac(avg))
        }
        // a mixture of Dirichlets against the point mass at the mixed mean
        3 => {
            let b = random_dirichlet::<T, R>(rng, classes)?;
            let lambda: T = uniform(rng, 0.1, 0.9);
            let q = mix(&a.clone().into(), &b.clone().into(), lambda)?;
            let p = q.marginal().to_categorical()?;
            (q, SecondOrderDist::dirac(p))
        }
        // the same convex mixture written in the opposite order
        _ => {
            let b = SecondOrderDist::dirac(random_categorical::<T, R>(rng, classes)?);
            let lambda: T = uniform(rng, 0.1, 0.9);
            let a: SecondOrderDist<T> = a.into();
            (mix(&a, &b, lambda)?, mix(&b, &a, T::one() - lambda)?)
        }
    })
}

fn regression_pair<T: Real, R: Rng + ?Sized>(kind: usize, rng: &mut R) -> Result<(SecondOrderDist<T>, SecondOrderDist<T>)> {
    Ok(match kind {
        // two NIGs with the same predictive: keep m4 (1 + m2) / m2 fixed
        0 => {
            let a = random_nig::<T, R>(rng)?;
            let m2b: T = uniform(rng, 0.5, 4.0);
            let m4b = a.m4 * (T::one() + a.m2) * m2b / (a.m2 * (T::one() + m2b));
            let b = Nig::new(a.m1, m2b, a.m3, m4b)?;
            (a.into(), b.into())
        }
        // a NIG against the point mass at its predictive
        1 => {
            let a = random_nig::<T, R>(rng)?;
            let t = a.predictive();
            (a.into(), SecondOrderDist::dirac(t))
        }
        // a point mass against a convex mixture of two copies of itself
        2 => {
            let d = SecondOrderDist::dirac(random_gaussian::<T, R>(rng)?);
            let lambda: T = uniform(rng, 0.1, 0.9);
            (d.clone(), mix(&d, &d, lambda)?)
        }
        // a two-atom mixture against the point mass at the mixture density
        3 => {
            let w: T = uniform(rng, 0.1, 0.9);
            let atoms: Vec<FirstOrderDist<T>> = vec![random_gaussian::<T, R>(rng)?.into(), random_gaussian::<T, R>(rng)?.into()];
            let weights = vec![T::one() - w, w];
            let density = FiniteMixture::new(weights.clone(), atoms.clone())?;
            (DiracMix::new(weights, atoms)?.into(), SecondOrderDist::dirac(density))
        }
        // the same convex mixture written in the opposite order
        _ => {
            let a: SecondOrderDist<T> = random_nig::<T, R>(rng)?.into();
            let b = SecondOrderDist::dirac(random_gaussian::<T, R>(rng)?);
            let lambda: T = uniform(rng, 0.1, 0.9);
            (mix(&a, &b, lambda)?, mix(&b, &a, T::one() - lambda)?)
        }
    })
}
