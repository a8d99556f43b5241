//! Library values checked against independent implementations (statrs) and
//! Monte-Carlo estimates built directly from rand_distr samplers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};
use scorelab::first_order::{expect_fn, s1, FirstOrderDist, Gaussian, Outcome, StudentT, TruncatedGaussian};
use scorelab::losses::{bayes_loss, student_nll, BayesKind, LossSpec};
use scorelab::scoring::{s2, EvalMethod, Method};
use scorelab::second_order::{kl_dirichlet, Dirichlet, Nig, SecondOrderDist};
use scorelab::special::{digamma, erfc, ln_gamma, normal_cdf};
use scorelab::FirstOrderLoss;
use statrs::distribution::{Continuous, ContinuousCDF, StudentsT};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// Mean and standard error of `n` draws of `f`.
fn mc(n: usize, mut f: impl FnMut() -> f64) -> (f64, f64) {
    let xs: Vec<f64> = (0..n).map(|_| f()).collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

fn dirichlet_draw(rng: &mut ChaCha8Rng, alpha: &[f64]) -> Vec<f64> {
    let g: Vec<f64> = alpha.iter().map(|a| Gamma::new(*a, 1.0).unwrap().sample(rng)).collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|x| x / s).collect()
}

// (x, ln Γ(x), ψ(x)) to 20 digits from an arbitrary-precision evaluation
const GAMMA_TABLE: [(f64, f64, f64); 13] = [
    (1e-3, 6.9071788853838536825, -1000.5755719318103005),
    (0.1, 2.2527126517342059599, -10.423754940411076795),
    (0.5, 0.57236494292470008707, -1.9635100260214234794),
    (0.9, 0.066376239734742971189, -0.75492694994705139189),
    (1.5, -0.12078223763524522235, 0.036489973978576520559),
    (2.5, 0.28468287047291915963, 0.70315664064524318723),
    (3.7, 1.4280723266653879219, 1.1671535393615113859),
    (7.25, 7.0521854507385394449, 1.9104535268837360284),
    (10.0, 12.801827480081469611, 2.2517525890667211076),
    (33.3, 82.603723581654952928, 3.4904672385202428639),
    (150.0, 600.00947055532742811, 5.00729825707567927),
    (1e3, 5905.2204232091812118, 6.9072551956488120521),
    (1e5, 1051287.7089736568949, 11.512920464961895087),
];

// (x, erfc(x)) from an arbitrary-precision evaluation
const ERFC_TABLE: [(f64, f64); 7] = [
    (-1.0, 1.84270079294971486934),
    (0.5, 0.479500122186953462317),
    (1.0, 0.157299207050285130659),
    (3.0, 2.20904969985854413728e-5),
    (5.0, 1.53745979442803485019e-12),
    (8.0, 1.12242971729829270800e-29),
    (12.0, 1.35626116920590421278e-64),
];

#[test]
fn special_functions_match_reference_values() {
    for (x, lg, psi) in GAMMA_TABLE {
        // absolute accuracy near the zeros at 1 and 2, relative elsewhere
        assert!(rel(ln_gamma(x), lg) < 1e-14, "ln_gamma({x}) = {} vs {lg}", ln_gamma(x));
        assert!(rel(digamma(x), psi) < 4e-15, "digamma({x}) = {} vs {psi}", digamma(x));
    }
    for (x, v) in ERFC_TABLE {
        assert!((erfc(x) / v - 1.0).abs() < 1e-14, "erfc({x}) = {:e} vs {v:e}", erfc(x));
    }
    assert_eq!(ln_gamma(1.0), 0.0);
    assert_eq!(ln_gamma(2.0), 0.0);
}

#[test]
fn special_functions_agree_with_statrs() {
    // statrs is accurate to roughly 1e-10 for erfc and 1e-14 for the gamma family
    for i in 1..400 {
        let x = i as f64 * 0.173;
        assert!(rel(ln_gamma(x), statrs::function::gamma::ln_gamma(x)) < 1e-13, "ln_gamma({x})");
        assert!(rel(digamma(x), statrs::function::gamma::digamma(x)) < 1e-12, "digamma({x})");
    }
    for i in -60..=120 {
        let x = i as f64 * 0.1;
        let (ours, theirs) = (erfc(x), statrs::function::erf::erfc(x));
        assert!((ours / theirs - 1.0).abs() < 1e-9, "erfc({x}): {ours} vs {theirs}");
    }
}

#[test]
fn student_t_density_matches_statrs() {
    for &(loc, scale, dof) in &[(0.0, 1.0, 3.0), (1.5, 0.3, 2.0), (-2.0, 4.0, 40.0), (0.0, 0.1, 2000.0)] {
        let ours = StudentT::new(loc, scale, dof).unwrap();
        let theirs = StudentsT::new(loc, scale, dof).unwrap();
        for k in -20..=20 {
            let y = loc + scale * k as f64 * 0.37;
            // the normalising constant is a difference of two log-gammas of size ~dof·ln(dof)
            let tol = 1e-15 * ln_gamma((dof + 1.0) / 2.0).abs().max(1.0) * 4.0;
            assert!(rel(ours.pdf(y), theirs.pdf(y)) < tol.max(1e-13), "pdf at {y}");
            assert!((ours.ln_pdf(y) - theirs.ln_pdf(y)).abs() < tol.max(1e-13), "ln_pdf at {y}");
        }
    }
}

#[test]
fn nig_predictive_matches_sampled_marginal() {
    let nig = Nig::new(0.4, 2.0, 3.0, 1.5).unwrap();
    let t = nig.predictive();
    let theirs = StudentsT::new(t.loc, t.scale, t.dof).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let n = 200_000;
    // σ² ~ InvGamma(m3, m4), μ | σ² ~ N(m1, σ²/m2), y | μ, σ² ~ N(μ, σ²)
    let ys: Vec<f64> = (0..n)
        .map(|_| {
            let var = 1.0 / Gamma::new(nig.m3, 1.0 / nig.m4).unwrap().sample(&mut rng);
            let mu = Normal::new(nig.m1, (var / nig.m2).sqrt()).unwrap().sample(&mut rng);
            Normal::new(mu, var.sqrt()).unwrap().sample(&mut rng)
        })
        .collect();
    for &q in &[-1.5, -0.5, 0.0, 0.4, 1.0, 2.5] {
        let p = theirs.cdf(q);
        let frac = ys.iter().filter(|y| **y <= q).count() as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((frac - p).abs() < 4.0 * se, "cdf at {q}: sampled {frac}, predictive {p}");
    }
}

#[test]
fn dirichlet_kl_matches_monte_carlo() {
    let cases: [(&[f64], &[f64]); 3] = [(&[2.0, 2.0], &[1.0, 1.0]), (&[0.7, 3.0, 1.2], &[1.0, 1.0, 1.0]), (&[5.0, 1.0], &[2.0, 3.0])];
    let ln_b = |a: &[f64]| a.iter().map(|x| statrs::function::gamma::ln_gamma(*x)).sum::<f64>() - statrs::function::gamma::ln_gamma(a.iter().sum());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (alpha, beta) in cases {
        let kl = kl_dirichlet(alpha, beta).unwrap();
        let (est, se) = mc(200_000, || {
            let p = dirichlet_draw(&mut rng, alpha);
            let la: f64 = alpha.iter().zip(&p).map(|(a, x)| (a - 1.0) * x.ln()).sum::<f64>() - ln_b(alpha);
            let lb: f64 = beta.iter().zip(&p).map(|(b, x)| (b - 1.0) * x.ln()).sum::<f64>() - ln_b(beta);
            la - lb
        });
        assert!((est - kl).abs() < 4.0 * se, "KL {alpha:?}||{beta:?}: closed {kl}, mc {est} ± {se}");
    }
    assert!((kl_dirichlet(&[2.0, 2.0], &[1.0, 1.0]).unwrap() - (6f64.ln() - 5.0 / 3.0)).abs() < 1e-14);
}

#[test]
fn bayes_losses_match_monte_carlo() {
    let alpha = [0.8, 2.5, 4.0];
    let d = Dirichlet::new(alpha.to_vec()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for y in 0..3 {
        let (ce, se_ce) = mc(100_000, || -dirichlet_draw(&mut rng, &alpha)[y].ln());
        let closed = bayes_loss(&d, y, 0.0, BayesKind::CrossEntropy).unwrap();
        assert!((ce - closed).abs() < 4.0 * se_ce, "ce class {y}: {closed} vs {ce} ± {se_ce}");
        let (br, se_br) = mc(100_000, || {
            let p = dirichlet_draw(&mut rng, &alpha);
            p.iter().enumerate().map(|(k, pk)| (pk - if k == y { 1.0 } else { 0.0 }).powi(2)).sum()
        });
        let closed = bayes_loss(&d, y, 0.0, BayesKind::Brier).unwrap();
        assert!((br - closed).abs() < 4.0 * se_br, "brier class {y}: {closed} vs {br} ± {se_br}");
    }
}

#[test]
fn student_nll_matches_statrs_log_density() {
    for &(m1, m2, m3, m4) in &[(0.0, 1.0, 1.0, 1.0), (0.3, 2.0, 3.0, 0.5), (-1.0, 1e6, 1e3, 9.99), (2.0, 0.1, 1.5, 4.0)] {
        let nig = Nig::new(m1, m2, m3, m4).unwrap();
        let t = nig.predictive();
        let theirs = StudentsT::new(t.loc, t.scale, t.dof).unwrap();
        for k in -10..=10 {
            let y = m1 + k as f64 * 0.25 * t.scale;
            let ours = student_nll(&nig, y);
            assert!((ours + theirs.ln_pdf(y)).abs() < 1e-9 * ours.abs().max(1.0), "nll at {y} for {nig:?}");
        }
    }
}

#[test]
fn truncated_gaussian_moments_match_sampler() {
    let t = TruncatedGaussian::new(-1.0, 0.3, f64::NEG_INFINITY, 0.0).unwrap();
    let p: FirstOrderDist<f64> = t.into();
    let mass = expect_fn(&p, &mut |_| Ok(1.0), 64).unwrap();
    assert!((mass - 1.0).abs() < 1e-12);
    let mean = p.mean().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (est, se) = mc(100_000, || p.sample(&mut rng).as_real());
    assert!((est - mean).abs() < 4.0 * se);
    let var = p.variance().unwrap();
    let (v_est, v_se) = mc(100_000, || (p.sample(&mut rng).as_real() - mean).powi(2));
    assert!((v_est - var).abs() < 4.0 * v_se);
    // one-sided truncation far in the tail
    let tail = TruncatedGaussian::new(0.0, 1.0, 6.0, f64::INFINITY).unwrap();
    // Φ(−6) from an arbitrary-precision evaluation
    assert!((tail.mass() / 9.86587645037698140701e-10 - 1.0).abs() < 1e-14);
    assert!((normal_cdf(-6.0) / tail.mass() - 1.0).abs() < 1e-14);
}

#[test]
fn gaussian_squared_error_score() {
    let p: FirstOrderDist<f64> = Gaussian::new(0.5, 1.3).unwrap().into();
    let ph: FirstOrderDist<f64> = Gaussian::new(-0.2, 0.4).unwrap().into();
    let v = s1(FirstOrderLoss::SquaredError, &ph, &p, 64).unwrap();
    assert!((v.value - (0.7f64.powi(2) + 1.69)).abs() < 1e-12);
    assert_eq!(v.method, Method::Quadrature { nodes: 64 });
    let _ = Outcome::<f64>::Value(0.0);
}

#[test]
fn regression_quadrature_agrees_with_monte_carlo() {
    let cases = [
        (LossSpec::Der { lambda: 0.5 }, Nig::new(0.2, 1.5, 2.5, 1.0).unwrap(), Nig::new(-0.3, 2.0, 4.0, 2.0).unwrap()),
        (LossSpec::Der { lambda: 0.0 }, Nig::new(0.0, 1.0, 1.0, 1.0).unwrap(), Nig::new(0.5, 3.0, 3.0, 0.5).unwrap()),
    ];
    for (loss, qh, q) in cases {
        let (qh, q): (SecondOrderDist<f64>, SecondOrderDist<f64>) = (qh.into(), q.into());
        let quad = s2(&loss, &qh, &q, EvalMethod::Quadrature { nodes: 64 }).unwrap();
        let mcv = s2(&loss, &qh, &q, EvalMethod::MonteCarlo { samples: 100_000, seed: 9 }).unwrap();
        assert!((quad.value - mcv.value).abs() < 4.0 * mcv.stderr + 3.0 * quad.residual, "{loss}: {quad:?} vs {mcv:?}");
    }
}
